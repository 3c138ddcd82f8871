//! Estimates the FRF at one location from a sweep recording and reports the
//! magnitude error against the exact plant response.

use vibrocal::{band_mask, default_plant, estimate_frf, frf_exact, generate_sweep, simulate_playback, Location, Preset, SweepSpec};

fn main() -> vibrocal::Result<()> {
    let plant = default_plant(Preset::Small);
    let loc = Location::new(0.3, 0.6)?;
    let sweep = generate_sweep(&SweepSpec::default(), plant.sample_rate)?;

    for sigma in [0.0, 0.005] {
        let rec = simulate_playback(&plant.clone().with_noise(sigma), &sweep, loc, 1)?;
        let est = estimate_frf(&sweep, &rec, 8192, 0.75)?;
        let exact = frf_exact(&plant, loc, est.frf.freqs())?;
        let mask = band_mask(&est.frf, 0.95, (20.0, 500.0))?;
        let coh = est.frf.coherence().unwrap_or(&[]);
        let mut worst = 0.0f64;
        let mut min_coh = 1.0f64;
        for i in (0..est.frf.len()).filter(|&i| mask[i]) {
            worst = worst.max((est.frf.values()[i].norm() / exact.values()[i].norm() - 1.0).abs());
            min_coh = min_coh.min(coh[i]);
        }
        println!(
            "sigma {sigma}: {} usable bins, worst |H| error {:.4}, min coherence {:.4}",
            mask.iter().filter(|&&m| m).count(),
            worst,
            min_coh
        );
    }
    Ok(())
}
