//! Tabulate the normalized Hill-type muscle curves.
use spinectl::dynamics::{active_force_length, force_velocity, passive_force_length};

fn main() {
    println!("{:>6} {:>10} {:>10}", "l", "active", "passive");
    for k in 0..=16 {
        let l = 0.4 + 0.075 * k as f64;
        println!("{l:>6.3} {:>10.4} {:>10.4}", active_force_length(l), passive_force_length(l));
    }
    println!("\n{:>6} {:>10}", "v", "f(v)");
    for k in -5..=5 {
        let v = 0.2 * k as f64;
        println!("{v:>6.2} {:>10.4}", force_velocity(v));
    }
}
