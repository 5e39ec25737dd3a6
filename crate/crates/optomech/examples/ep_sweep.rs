//! Track the two mechanical eigenmodes through the exceptional point.
//!
//! Below the EP the branches split in frequency and share a linewidth; at
//! `Gamma_1 = |delta| / 2` they coalesce; beyond it the frequencies lock
//! and the linewidths split into a narrow dark branch and a broad bright
//! branch.
//!
//! ```text
//! cargo run --example ep_sweep
//! ```

use optomech::effective::{effective_model, eigenmodes_numeric, locate_ep};
use optomech::sweep::builtin_scenario;

const TAU: f64 = std::f64::consts::TAU;

fn main() {
    let scenario = builtin_scenario("scenario-a1").unwrap();
    println!("{}\n", scenario.description);
    println!(
        "{:>12} {:>14} {:>14} {:>12} {:>12}  {:<8}  classes",
        "Gamma1_hz", "f_plus_hz", "f_minus_hz", "w_plus_hz", "w_minus_hz", "regime"
    );
    for &gamma1_hz in &[
        1.0, 10.0, 20.0, 30.0, 38.0, 40.0, 42.0, 60.0, 100.0, 300.0, 1000.0,
    ] {
        let params = scenario.params_at(gamma1_hz).unwrap();
        let eff = effective_model(&params).unwrap();
        let report = eigenmodes_numeric(&eff).unwrap();
        let [plus, minus] = &report.modes;
        println!(
            "{gamma1_hz:>12.1} {:>14.3} {:>14.3} {:>12.3} {:>12.3}  {:<8}  {}/{}",
            plus.omega / TAU,
            minus.omega / TAU,
            plus.gamma / TAU,
            minus.gamma / TAU,
            report.regime.to_string(),
            plus.classification,
            minus.classification,
        );
    }

    let grid: Vec<f64> = scenario.grid.values_hz().iter().map(|h| TAU * h).collect();
    let ep = locate_ep(&scenario.base, &grid).unwrap();
    println!(
        "\nEP: analytic Gamma_1/2pi = {:.3} Hz; eigenvalue-gap minimum on the grid at {:.3} Hz \
         (gap {:.3e} rad/s)",
        ep.analytic / TAU,
        ep.grid_minimum / TAU,
        ep.gap_at_minimum
    );
}
