//! Calibrates a 3x3 grid on the `small` plate and writes the device map.

use vibrocal::map::save_map;
use vibrocal::{default_plant, run_device_calibration, CalibConfig, Location, Preset};

fn main() -> anyhow::Result<()> {
    let plant = default_plant(Preset::Small);
    let config = CalibConfig::default();
    let map = run_device_calibration(&plant, &Location::grid(3), &config, 0)?.with_actuator_pos(plant.actuator_pos);

    println!("    x      y  order  fit_err  render_err  iters  converged");
    for e in map.entries() {
        println!(
            "{:.3}  {:.3}  {:5}  {:7.4}  {:10.4}  {:5}  {}",
            e.location.x, e.location.y, e.order, e.fit_error, e.render_error, e.iterations_used, e.converged
        );
    }
    let path = std::env::temp_dir().join("vibrocal_example_map.json");
    save_map(&map, &path)?;
    println!("map written to {}", path.display());
    Ok(())
}
