//! Location-specific calibration of vibrotactile output.
//!
//! A frequency sweep is played through the actuator and recorded at a target
//! location; a rational transfer function is fitted to the measured response
//! and inverted so that any desired input signal can be turned into a command
//! signal whose measured acceleration at that location reproduces the input.
//! Per-location models are collected into a [`DeviceMap`] which can be
//! interpolated between measured locations.
//!
//! The hardware chain is abstracted behind [`DevicePort`]; [`PlateModel`] is a
//! simulated touch plate used for tests and examples.

pub mod calib;
pub mod cli;
pub mod error;
mod filter;
pub mod frf;
pub mod inverse;
pub mod io;
pub mod map;
pub mod plant;
pub mod signal;
pub mod sysid;
pub mod tf;

pub use calib::{run_device_calibration, run_location_calibration, CalibConfig, DevicePort, LocationModel, ValidationSignal};
pub use error::{Error, Result};
pub use frf::FrequencyResponse;
pub use inverse::{adapt_signal, design_inverse, InverseFilter};
pub use map::{interpolate_frf, loo_validate, model_at, DeviceMap};
pub use plant::{default_plant, frf_exact, simulate_playback, Location, PlateMode, PlateModel, Preset};
pub use signal::{apply_fade, generate_sweep, nrmse_aligned, tone_burst, SampledSignal, SweepLaw, SweepSpec};
pub use sysid::{band_mask, estimate_frf, FrfEstimate};
pub use tf::{evaluate_tf, fit_rational, select_order, stabilize, OrderSelection, RationalTF};
