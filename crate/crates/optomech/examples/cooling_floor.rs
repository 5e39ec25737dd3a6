//! The dark-mode cooling floor of single-cavity sideband cooling.
//!
//! Sweeping the drive strength, the total phonon number first drops, hits
//! its minimum at the exceptional point, and then climbs again as the dark
//! mode decouples from the cavity. The minimum equals the closed-form
//! dark-mode limit.
//!
//! ```text
//! cargo run --example cooling_floor
//! ```

use optomech::steady_state::dark_mode_limit;
use optomech::sweep::{builtin_scenario, run_sweep, SweepOptions};

const TAU: f64 = std::f64::consts::TAU;

fn main() {
    let scenario = builtin_scenario("scenario-a1").unwrap();
    let result = run_sweep(&scenario, &SweepOptions::default()).unwrap();
    let n_th = scenario.common_n_th();

    println!("{:>12} {:>14} {:>14}", "Gamma1_hz", "n_total/n_th", "");
    let mut minimum = (0.0, f64::INFINITY);
    for row in result.rows.iter().step_by(8) {
        let ratio = row.phonons.as_ref().unwrap().n_total / n_th;
        let bar: String = std::iter::repeat_n('#', (60.0 * ratio).min(70.0) as usize).collect();
        println!("{:>12.2} {:>14.5e} {bar}", row.control_hz, ratio);
    }
    for row in &result.rows {
        let total = row.phonons.as_ref().unwrap().n_total;
        if total < minimum.1 {
            minimum = (row.control_hz, total);
        }
    }

    let gamma = 0.5 * (scenario.base.mech[0].gamma + scenario.base.mech[1].gamma);
    let limit = dark_mode_limit(gamma, scenario.base.delta_omega(), n_th).unwrap();
    println!(
        "\nminimum n_total/n_th = {:.5e} at Gamma_1/2pi = {:.2} Hz",
        minimum.1 / n_th,
        minimum.0
    );
    println!(
        "dark-mode limit:       exact {:.5e}, large-drive approximation {:.5e}",
        limit.exact / n_th,
        limit.approx / n_th
    );
    println!(
        "EP sits at Gamma_1/2pi = |delta|/2 = {:.1} Hz",
        0.5 * scenario.base.delta_omega().abs() / TAU
    );
}
