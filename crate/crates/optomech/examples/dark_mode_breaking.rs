//! Break the dark mode with a second dissipative channel.
//!
//! With the first cavity driven hard (`Gamma_1 / 2pi = 1000 Hz`, far past
//! the EP) the pair is stuck at the dark-mode floor. Raising the second
//! cavity's damping of mode 1 couples the dark and bright combinations,
//! and the total phonon number falls an order of magnitude below the
//! single-cavity limit.
//!
//! ```text
//! cargo run --example dark_mode_breaking
//! ```

use optomech::sweep::{builtin_scenario, run_sweep, SweepOptions};

fn main() {
    let scenario = builtin_scenario("scenario-a2").unwrap();
    println!("{}\n", scenario.description);
    let result = run_sweep(&scenario, &SweepOptions::default()).unwrap();
    let n_th = scenario.common_n_th();
    let limit = scenario.dark_limit_total().unwrap();

    println!(
        "{:>12} {:>14} {:>18}",
        "Gamma12_hz", "n_total/n_th", "vs dark limit"
    );
    for row in result.rows.iter().step_by(4) {
        let total = row.phonons.as_ref().unwrap().n_total;
        println!(
            "{:>12.1} {:>14.5e} {:>17.2}x",
            row.control_hz,
            total / n_th,
            total / limit
        );
    }
    let endpoint = result
        .rows
        .last()
        .unwrap()
        .phonons
        .as_ref()
        .unwrap()
        .n_total;
    println!(
        "\nendpoint: n_total = {:.3e} = {:.3}x the dark-mode limit ({:.3e})",
        endpoint / n_th,
        endpoint / limit,
        limit / n_th
    );
}
