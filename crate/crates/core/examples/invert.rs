//! Designs an inverse filter from a fitted model and renders a tone burst
//! with and without it.

use vibrocal::inverse::{default_beta, DEFAULT_BETA_RATIO, DEFAULT_G_MAX};
use vibrocal::{
    adapt_signal, default_plant, design_inverse, frf_exact, nrmse_aligned, select_order, simulate_playback, tone_burst,
    Location, Preset, SampledSignal,
};

fn main() -> vibrocal::Result<()> {
    let plant = default_plant(Preset::Small);
    let fs = plant.sample_rate;
    let loc = Location::new(0.3, 0.6)?;
    let band = (20.0, 500.0);

    let freqs: Vec<f64> = (0..=96).map(|i| 20.0 + 5.0 * i as f64).collect();
    let frf = frf_exact(&plant, loc, &freqs)?;
    let tf = select_order(&frf, &vec![true; frf.len()], 16, 0.01)?.tf;
    let beta = default_beta(&tf, band, 4096, DEFAULT_BETA_RATIO);
    let inv = design_inverse(&tf, band, beta, DEFAULT_G_MAX, 4096)?;
    println!("beta {beta:.3e}, latency {} samples", inv.latency);

    let burst = tone_burst(180.0, 0.1, 1.0, fs)?;
    let pad = |s: &SampledSignal, n: usize| {
        let mut v = s.samples().to_vec();
        v.resize(n, 0.0);
        SampledSignal::new(v, fs)
    };

    let raw = simulate_playback(&plant, &burst, loc, 0)?;
    let raw_err = nrmse_aligned(&burst, &raw, band, 200)?;

    let command = adapt_signal(&burst, &inv)?;
    let played = simulate_playback(&plant, &command, loc, 0)?;
    let desired = pad(&burst, played.len())?;
    let err = nrmse_aligned(&desired, &played, band, inv.latency + 50)?;
    println!("NRMSE without inversion {raw_err:.3}, with inversion {err:.4}");
    Ok(())
}
