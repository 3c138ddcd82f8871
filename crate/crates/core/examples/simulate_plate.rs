//! Drives the `small` plate with a 150 Hz tone at a few sensor positions and
//! compares the steady-state amplitude with the exact response.

use vibrocal::{default_plant, frf_exact, simulate_playback, tone_burst, Location, Preset, SampledSignal};

fn main() -> vibrocal::Result<()> {
    let plant = default_plant(Preset::Small);
    let fs = plant.sample_rate;
    let f = 150.0;
    let tone: Vec<f64> = (0..8000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / fs).sin()).collect();
    let tone = SampledSignal::new(tone, fs)?;

    println!("   x     y   |H| exact  steady amplitude");
    for (x, y) in [(0.2, 0.2), (0.5, 0.5), (0.3, 0.6), (0.8, 0.85)] {
        let loc = Location::new(x, y)?;
        let h = frf_exact(&plant, loc, &[f])?.values()[0].norm();
        let out = simulate_playback(&plant, &tone, loc, 0)?;
        let tail = out.window(4000, 4000);
        let amp = tail.rms() * 2f64.sqrt();
        println!("{x:5.2} {y:5.2}  {h:9.5}  {amp:9.5}");
    }

    let burst = tone_burst(180.0, 0.1, 1.0, fs)?;
    let noisy = plant.clone().with_noise(0.01);
    let rec = simulate_playback(&noisy, &burst, Location::new(0.3, 0.6)?, 42)?;
    println!("noisy burst recording: {} samples, rms {:.4}", rec.len(), rec.rms());
    Ok(())
}
