//! Fits rational models of increasing order to the exact FRF of the `small`
//! plate and shows the order selected for a tolerance.

use vibrocal::{default_plant, fit_rational, frf_exact, select_order, Location, Preset};

fn main() -> vibrocal::Result<()> {
    let plant = default_plant(Preset::Small);
    let freqs: Vec<f64> = (0..=96).map(|i| 20.0 + 5.0 * i as f64).collect();
    let frf = frf_exact(&plant, Location::new(0.25, 0.25)?, &freqs)?;
    let mask = vec![true; frf.len()];

    for order in [2, 4, 6, 8, 10] {
        let tf = fit_rational(&frf, &mask, order, order)?;
        let err = vibrocal::tf::fit_error(&tf, &frf, &mask);
        println!("order {order:2}: error {err:.5}, max pole radius {:.4}", tf.max_pole_radius()?);
    }
    let sel = select_order(&frf, &mask, 16, 0.01)?;
    println!("select_order(tol 0.01) -> order {} (error {:.5})", sel.order, sel.error);
    println!("a = {:?}", sel.tf.a());
    Ok(())
}
