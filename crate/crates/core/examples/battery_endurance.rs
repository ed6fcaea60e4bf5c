//! Battery model: hover endurance for the reference loads, a discharge
//! curve, and packs installed part-used.

use lattice_flight::power::{
    battery_step, endurance, BatteryParams, BatteryState, DeltaPreset, REFERENCE_COPTER_MASS, REFERENCE_MAX_PAYLOAD,
};
use lattice_flight::GRAVITY;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = BatteryParams::default();
    println!("k_idle = {:.4e} 1/s, k_load = {:.4e} 1/(s·N²)", p.k_idle, p.k_load);
    for (label, payload, delta) in [
        ("unloaded", 0.0, DeltaPreset::Unloaded),
        ("80 % payload", 0.8, DeltaPreset::Payload80),
        ("90 % payload", 0.9, DeltaPreset::Payload90),
    ] {
        let thrust = (REFERENCE_COPTER_MASS + payload * REFERENCE_MAX_PAYLOAD) * GRAVITY;
        let t = endurance(&p, thrust, delta.volts(), 0.01)?;
        println!(
            "{label:<13} T = {thrust:.4} N  reaches {:.2} V after {t:.1} s",
            delta.volts()
        );
    }

    println!("\ndischarge at hover thrust, every 30 s");
    let thrust = REFERENCE_COPTER_MASS * GRAVITY;
    let mut s = BatteryState::full(&p);
    let dt = 0.1;
    for k in 0..=4500 {
        if k % 300 == 0 {
            println!(
                "{:>6.0} s  {:.3} V  q = {:.3}",
                k as f64 * dt,
                s.voltage,
                s.capacity_used
            );
        }
        let (next, event) = battery_step(&s, thrust, dt, &p)?;
        if let Some(e) = event {
            println!("depleted at {:.1} s ({:.3} V)", (k + 1) as f64 * dt, e.voltage);
        }
        s = next;
    }

    println!();
    for v in [4.1, 4.0, 3.85, 3.7] {
        let s = BatteryState::from_voltage(v, &p);
        println!(
            "reading {v:.2} V -> charge already drawn {:.3}, offset {:.2} V",
            s.capacity_start, s.offset
        );
    }
    Ok(())
}
