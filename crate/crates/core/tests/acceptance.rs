//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vibrocal::inverse::{default_beta, design_grid, DEFAULT_BETA_RATIO};
use vibrocal::map::load_map;
use vibrocal::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn small() -> PlateModel {
    default_plant(Preset::Small)
}

fn fixture_locations() -> Vec<Location> {
    let mut locs = Location::grid(3);
    for (x, y) in [(0.2, 0.2), (0.3, 0.6), (0.25, 0.25)] {
        locs.push(Location::new(x, y).unwrap());
    }
    locs
}

fn in_band(f: f64) -> bool {
    (20.0..=500.0).contains(&f)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn identification_accuracy() -> Outcome {
    let plant = small();
    let sweep = generate_sweep(&SweepSpec::default(), plant.sample_rate).unwrap();
    let locs = fixture_locations();
    let recordings: Vec<_> = locs
        .iter()
        .map(|&l| simulate_playback(&plant, &sweep, l, 0).unwrap())
        .collect();

    let start = Instant::now();
    let estimates: Vec<_> = recordings
        .iter()
        .map(|r| estimate_frf(&sweep, r, 32768, 0.75).unwrap())
        .collect();
    let elapsed = start.elapsed().as_secs_f64() / locs.len() as f64;

    let mut worst_mag = 0.0f64;
    let mut worst_coh = 1.0f64;
    for (loc, est) in locs.iter().zip(&estimates) {
        let exact = frf_exact(&plant, *loc, est.frf.freqs()).unwrap();
        let coh = est.frf.coherence().unwrap();
        for (i, &f) in est.frf.freqs().iter().enumerate() {
            if !in_band(f) {
                continue;
            }
            let rel = (est.frf.values()[i].norm() / exact.values()[i].norm() - 1.0).abs();
            worst_mag = worst_mag.max(rel);
            worst_coh = worst_coh.min(coh[i]);
        }
    }
    outcome(
        worst_mag <= 0.02 && worst_coh >= 0.999 && elapsed < 5.0,
        format!("worst |H| error {worst_mag:.4}, min coherence {worst_coh:.5}, {elapsed:.2} s per location"),
    )
}

fn fit_round_trip() -> Outcome {
    let fs = 1000.0;
    let truth = RationalTF::new(vec![0.3, -0.1, 0.2], vec![1.0, -1.5, 0.8], fs).unwrap();
    let freqs: Vec<f64> = (1..200).map(|i| i as f64 * 2.5).collect();
    let frf = evaluate_tf(&truth, &freqs).unwrap();
    let mask = vec![true; frf.len()];
    let fit = fit_rational(&frf, &mask, 2, 2).unwrap();
    let coef_err = fit
        .b()
        .iter()
        .zip(truth.b())
        .chain(fit.a().iter().zip(truth.a()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let sel = select_order(&frf, &mask, 8, 1e-3).unwrap();
    outcome(
        coef_err <= 1e-6 && sel.order == 2,
        format!("max coefficient error {coef_err:.2e}, selected order {}", sel.order),
    )
}

/// Random stable plant of order 2 or 4 (conjugate pole pairs).
fn random_stable_tf(rng: &mut ChaCha8Rng, fs: f64) -> RationalTF {
    let pairs = rng.random_range(1..=2);
    let mut a = vec![1.0];
    for _ in 0..pairs {
        let r: f64 = rng.random_range(0.5..0.98);
        let theta: f64 = rng.random_range(0.02..0.45) * std::f64::consts::PI;
        let quad = [1.0, -2.0 * r * theta.cos(), r * r];
        let mut next = vec![0.0; a.len() + 2];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &qj) in quad.iter().enumerate() {
                next[i + j] += ai * qj;
            }
        }
        a = next;
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let b = (0..a.len()).map(|_| normal.sample(rng)).collect();
    RationalTF::new(b, a, fs).unwrap()
}

fn stability() -> Outcome {
    let fs = 4000.0;
    let freqs: Vec<f64> = (0..=96).map(|i| 20.0 + 5.0 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut unstable = 0;
    for _ in 0..1000 {
        let truth = random_stable_tf(&mut rng, fs);
        let clean = evaluate_tf(&truth, &freqs).unwrap();
        let rms = (clean.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / freqs.len() as f64).sqrt();
        // 20 dB: complex noise with rms one tenth of the response rms
        let noise = Normal::new(0.0, 0.1 * rms / 2f64.sqrt()).unwrap();
        let noisy: Vec<Complex64> = clean
            .values()
            .iter()
            .map(|v| v + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng)))
            .collect();
        let frf = FrequencyResponse::new(freqs.clone(), noisy, None, fs).unwrap();
        let mask = vec![true; freqs.len()];
        let tf = select_order(&frf, &mask, 8, 0.02).unwrap().tf;
        let radius = tf.max_pole_radius().unwrap();
        worst = worst.max(radius);
        if radius > 1.0 - 1e-6 {
            unstable += 1;
        }
    }
    outcome(unstable == 0, format!("{unstable} unstable of 1000, max pole radius {worst:.7}"))
}

fn inversion_flatness() -> Outcome {
    let plant = small();
    let config = CalibConfig::default();
    let mut worst_db = 0.0f64;
    let mut unconverged = 0;
    for loc in fixture_locations() {
        let model = run_location_calibration(&plant, loc, &config, 0).unwrap();
        if !model.converged {
            unconverged += 1;
        }
        let beta = default_beta(&model.tf, config.band, config.fir_len, DEFAULT_BETA_RATIO);
        let inv = design_inverse(&model.tf, config.band, beta, config.g_max, config.fir_len).unwrap();
        let freqs: Vec<f64> = design_grid(config.fir_len, plant.sample_rate)
            .into_iter()
            .filter(|&f| in_band(f))
            .collect();
        let exact = frf_exact(&plant, loc, &freqs).unwrap();
        for (&f, h) in freqs.iter().zip(exact.values()) {
            if h.norm() < 1.0 / config.g_max {
                continue;
            }
            let db = 20.0 * (inv.response_at(f) * h).norm().log10();
            worst_db = worst_db.max(db.abs());
        }
    }
    outcome(
        worst_db <= 1.0 && unconverged == 0,
        format!("worst |C·H| deviation {worst_db:.3} dB, {unconverged} locations unconverged"),
    )
}

/// Plate with per-location measurement noise.
struct NoisyPlate {
    plant: PlateModel,
    sigmas: Vec<(Location, f64)>,
}

impl DevicePort for NoisyPlate {
    fn sample_rate(&self) -> f64 {
        self.plant.sample_rate
    }

    fn play_and_record(&self, command: &SampledSignal, location: Location, seed: u64) -> Result<SampledSignal> {
        let sigma = self
            .sigmas
            .iter()
            .find(|(l, _)| *l == location)
            .map(|&(_, s)| s)
            .unwrap_or(0.0);
        simulate_playback(&self.plant.clone().with_noise(sigma), command, location, seed)
    }
}

fn summarize(map: &DeviceMap) -> (f64, usize, String) {
    let worst = map.entries().iter().fold(None::<&LocationModel>, |acc, e| match acc {
        Some(w) if w.render_error >= e.render_error => Some(w),
        _ => Some(e),
    });
    let unconverged = map.entries().iter().filter(|e| !e.converged).count() + map.failures().len();
    let at = worst
        .map(|w| format!("({:.3}, {:.3})", w.location.x, w.location.y))
        .unwrap_or_default();
    (worst.map_or(f64::INFINITY, |w| w.render_error), unconverged, at)
}

fn end_to_end_rendering() -> Outcome {
    let plant = small();
    let locs = Location::grid(3);

    let start = Instant::now();
    let clean = run_device_calibration(&plant, &locs, &CalibConfig::default(), 0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let (clean_worst, clean_bad, _) = summarize(&clean);

    // 20 dB SNR relative to each location's sweep recording
    let sweep = generate_sweep(&SweepSpec::default(), plant.sample_rate).unwrap();
    let sigmas = locs
        .iter()
        .map(|&l| (l, 0.1 * simulate_playback(&plant, &sweep, l, 0).unwrap().rms()))
        .collect();
    let device = NoisyPlate {
        plant: plant.clone(),
        sigmas,
    };
    let config = CalibConfig {
        render_tol: 0.15,
        ..CalibConfig::default()
    };
    let noisy = run_device_calibration(&device, &locs, &config, 0).unwrap();
    let (noisy_worst, noisy_bad, noisy_at) = summarize(&noisy);

    outcome(
        clean_bad == 0 && clean_worst <= 0.05 && noisy_bad == 0 && noisy_worst <= 0.15 && elapsed < 60.0,
        format!(
            "noiseless worst {clean_worst:.4} ({clean_bad} unconverged, {elapsed:.1} s); \
             20 dB worst {noisy_worst:.4} at {noisy_at} ({noisy_bad} unconverged)"
        ),
    )
}

fn interpolation() -> Outcome {
    let plant = small();
    let map = run_device_calibration(&plant, &Location::grid(4), &CalibConfig::default(), 0).unwrap();
    let loo = median(loo_validate(&map).unwrap());
    let exact = map
        .entries()
        .iter()
        .all(|e| interpolate_frf(&map, e.location).unwrap().values() == e.frf.values());
    outcome(
        loo <= 0.25 && exact,
        format!("median LOO error {loo:.3}, stored locations reproduced exactly: {exact}"),
    )
}

fn run(dir: &Path, args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vibrocal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.success(), text)
}

fn determinism_and_pipeline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut ok = true;
    for name in ["a.json", "b.json"] {
        ok &= run(d, &["calibrate", "--preset", "small", "--seed", "7", "-o", name]).0;
    }
    let identical = ok && std::fs::read(d.join("a.json")).unwrap() == std::fs::read(d.join("b.json")).unwrap();
    let loads = identical && load_map(d.join("a.json")).is_ok();

    let chain: [&[&str]; 9] = [
        &["sweep-gen", "-o", "sweep.csv"],
        &["simulate", "--input", "sweep.csv", "--x", "0.3", "--y", "0.6", "-o", "rec.csv"],
        &["identify", "--input", "sweep.csv", "--output", "rec.csv", "-o", "frf.csv"],
        &["fit", "--frf", "frf.csv", "-o", "tf.json"],
        &["invert", "--tf", "tf.json", "-o", "taps.csv"],
        &["sweep-gen", "--f-start", "60", "--f-end", "400", "--duration", "2", "-o", "desired.csv"],
        &["adapt", "--input", "desired.csv", "--taps", "taps.csv", "-o", "cmd.csv"],
        &["simulate", "--input", "cmd.csv", "--x", "0.3", "--y", "0.6", "-o", "played.csv"],
        &["evaluate", "--desired", "desired.csv", "--measured", "played.csv", "--max-lag", "2100"],
    ];
    let mut chain_ok = true;
    let mut last = String::new();
    for args in chain {
        let (success, text) = run(d, args);
        chain_ok &= success;
        last = text;
        if !success {
            break;
        }
    }
    let nrmse = last
        .trim()
        .strip_prefix("nrmse ")
        .and_then(|v| v.parse::<f64>().ok())
        .unwrap_or(f64::INFINITY);
    outcome(
        identical && loads && chain_ok && nrmse <= 0.05,
        format!("byte-identical maps: {identical}, chain exit ok: {chain_ok}, chain NRMSE {nrmse:.5}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("identification accuracy", identification_accuracy),
        ("fit round trip", fit_round_trip),
        ("stability", stability),
        ("inversion flatness", inversion_flatness),
        ("end-to-end rendering", end_to_end_rendering),
        ("interpolation", interpolation),
        ("determinism and pipeline", determinism_and_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {} {}: {} ({})",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
