//! Resolves every bundled lattice and prints agent poses, mass properties
//! and hover bending.
//!
//! `cargo run --example inspect_structure [-- path/to/file.lattice]`

use lattice_flight::harness::{bundled_lattice, inspect};
use lattice_flight::structure::Structure;

const NAMES: &[&str] = &["quad", "tcopter", "hexacopter", "pentacopter", "lpayload", "flex_t"];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = std::env::args().nth(1) {
        print!("{}", inspect(&Structure::from_file(path)?));
        return Ok(());
    }
    for name in NAMES {
        let text = bundled_lattice(&format!("{name}.lattice")).expect("bundled lattice");
        let s = Structure::parse(text)?;
        println!("== {name}");
        print!("{}", inspect(&s));
        let c = s.geometry.com;
        println!("C_s origin in C_0: ({:.4}, {:.4}, {:.4})\n", c.x, c.y, c.z);
    }
    Ok(())
}
