//! Per-tick growth of the altitude and attitude Lyapunov functions over a
//! noiseless run.
//!
//! `cargo run --release --example lyapunov_check [-- scenario]`

use lattice_flight::harness::{bundled, run_scenario};

const SLACK: f64 = 1e-8;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "quad".into());
    let out = run_scenario(&bundled(&name)?.without_noise())?;
    let steps = &out.lyapunov;
    let worst_z = steps.iter().max_by(|a, b| a.dv_z.total_cmp(&b.dv_z)).expect("ticks");
    let worst_att = steps
        .iter()
        .max_by(|a, b| a.dv_att.total_cmp(&b.dv_att))
        .expect("ticks");
    println!("{name}: {} ticks", steps.len());
    println!("largest ΔV_z   {:+.3e} at {:.3} s", worst_z.dv_z, worst_z.time);
    println!("largest ΔV_att {:+.3e} at {:.3} s", worst_att.dv_att, worst_att.time);
    let over_z = steps.iter().filter(|s| s.dv_z > SLACK).count();
    let over_att = steps.iter().filter(|s| s.dv_att > SLACK).count();
    println!("ticks above +{SLACK:e}: V_z {over_z}, V_att {over_att}");
    Ok(())
}
