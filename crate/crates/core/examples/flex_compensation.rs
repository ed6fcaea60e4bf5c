//! Flies the flexible T twice, with and without the bending compensation
//! terms, and compares altitude tracking.

use lattice_flight::harness::{bundled, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = bundled("flex_t")?;
    let mut rows = Vec::new();
    for on in [true, false] {
        let mut s = base.clone();
        s.control.flex_compensation = on;
        let out = run_scenario(&s)?;
        let gamma = out.records.last().map(|r| r.gammas.clone()).unwrap_or_default();
        rows.push((on, out.summary.rms_altitude_error, out.summary.max_abs_e_z, gamma));
    }
    println!("compensation  rms e_z [m]  max |e_z| [m]  final γ [rad]");
    for (on, rms, max, gamma) in &rows {
        println!(
            "{:<12}  {:<11.5}  {:<13.5}  {:.4?}",
            if *on { "on" } else { "off" },
            rms,
            max,
            gamma
        );
    }
    let gain = 1.0 - rows[0].1 / rows[1].1;
    println!("altitude RMS reduced by {:.1} %", 100.0 * gain);
    Ok(())
}
