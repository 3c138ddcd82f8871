//! Builds a 4x4 device map, queries models between measured points and runs
//! leave-one-out validation.

use vibrocal::frf::rms_relative_error;
use vibrocal::{
    default_plant, evaluate_tf, frf_exact, interpolate_frf, loo_validate, model_at, run_device_calibration, CalibConfig,
    Location, Preset,
};

fn main() -> vibrocal::Result<()> {
    let plant = default_plant(Preset::Small);
    let map = run_device_calibration(&plant, &Location::grid(4), &CalibConfig::default(), 0)?;

    for (x, y) in [(0.5, 0.5), (0.3, 0.6), (0.05, 0.95)] {
        let q = Location::new(x, y)?;
        let frf = interpolate_frf(&map, q)?;
        let exact = frf_exact(&plant, q, frf.freqs())?;
        let mask = vec![true; frf.len()];
        let tf = model_at(&map, q, 16, 0.02)?;
        let model = evaluate_tf(&tf, frf.freqs())?;
        println!(
            "({x:.2}, {y:.2}): interpolation error vs plant {:.3}, refit order {}, refit error {:.4}",
            rms_relative_error(frf.values(), exact.values(), &mask),
            tf.orders().0,
            rms_relative_error(model.values(), frf.values(), &mask),
        );
    }

    let mut loo = loo_validate(&map)?;
    loo.sort_by(|a, b| a.total_cmp(b));
    println!(
        "leave-one-out: min {:.3}, median {:.3}, max {:.3}",
        loo[0],
        0.5 * (loo[7] + loo[8]),
        loo[15]
    );
    Ok(())
}
