//! The three temperature schedules, sampled at a few points of a run.
//!
//!     cargo run --release --example temperature_schedules

use levrl::train::rl::{temperature_at, TemperatureSchedule};

fn main() -> levrl::Result<()> {
    let total = 50_000;
    let schedules = [
        TemperatureSchedule::constant(0.5),
        TemperatureSchedule::anneal_down(1.0, 0.1, total),
        TemperatureSchedule::anneal_up(0.1, 1.0, total),
    ];
    print!("{:>8}", "step");
    for s in &schedules {
        print!("{:>16}", s.label());
    }
    println!();
    for step in [0, 5_000, 12_500, 25_000, 37_500, 49_999, 50_000, 60_000] {
        print!("{step:>8}");
        for s in &schedules {
            print!("{:>16.6}", temperature_at(s, step)?);
        }
        println!();
    }
    println!("per-step ratio of the decay: {:.9}", schedules[1].ratio());
    Ok(())
}
