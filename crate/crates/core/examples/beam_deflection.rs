//! Cantilever bending of a rod under the net thrust of its tip copter.

use lattice_flight::flexibility::{beam_shape, load_for_gamma, static_deflection, BeamParams};
use lattice_flight::GRAVITY;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // the long rod of the flexible T
    let beam = BeamParams::new(0.30, 0.005, 9.52e8, 0.033)?;
    println!("l = {} m, EI = {:.4e} N·m²", beam.length, beam.rigidity());
    println!("{:>8} {:>10} {:>10} {:>12}", "T [N]", "γ [deg]", "δ [mm]", "δ/γ [m]");
    for t in [0.3, 0.33, 0.36, 0.39, 0.42, 0.6] {
        let f = static_deflection(t, &beam, GRAVITY);
        let ratio = if f.gamma != 0.0 { f.delta_z / f.gamma } else { f64::NAN };
        println!(
            "{t:>8.3} {:>10.3} {:>10.3} {ratio:>12.5}",
            f.gamma.to_degrees(),
            f.delta_z * 1e3
        );
    }
    println!("2l/3 = {:.5} m", 2.0 * beam.length / 3.0);

    let load = load_for_gamma(0.1, &beam);
    let thrust = load + beam.tip_mass * GRAVITY;
    println!("\nγ = 0.1 rad needs a net load of {load:.4} N (thrust {thrust:.4} N); shape:");
    for k in 0..=6 {
        let s = beam.length * k as f64 / 6.0;
        println!(
            "  s = {s:.2} m  z = {:.3} mm",
            beam_shape(s, thrust, &beam, GRAVITY) * 1e3
        );
    }
    Ok(())
}
