//! Generates the default excitation sweep and a log sweep, and prints a few
//! instantaneous frequencies.

use vibrocal::{generate_sweep, SweepLaw, SweepSpec};

fn main() -> vibrocal::Result<()> {
    let fs = 4000.0;
    let linear = SweepSpec::default();
    let log = SweepSpec {
        law: SweepLaw::Logarithmic,
        ..linear
    };
    for spec in [linear, log] {
        let s = generate_sweep(&spec, fs)?;
        print!("{:?}: {} samples, rms {:.3}; f(t) =", spec.law, s.len(), s.rms());
        for t in [0.0, 1.0, 2.5, 4.0, 5.0] {
            print!(" {:.1}", spec.instantaneous_frequency(t));
        }
        println!(" Hz");
    }
    Ok(())
}
