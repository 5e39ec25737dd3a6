//! Synthesize probe power spectral densities and extract eigenmode
//! parameters by Lorentzian fitting, below and above the EP.
//!
//! Writes the two spectra as CSV into `examples_out/`.
//!
//! ```text
//! cargo run --example psd_and_fit
//! ```

use optomech::effective::{effective_model, eigenmodes_closed_form};
use optomech::model::build_dynamics;
use optomech::spectra::{fit_lorentzians, integration_grid, probe_psd, spectral_thermometry};
use optomech::sweep::builtin_scenario;

const TAU: f64 = std::f64::consts::TAU;

fn main() -> optomech::Result<()> {
    let out_dir = std::path::Path::new("examples_out");
    std::fs::create_dir_all(out_dir)?;
    let scenario = builtin_scenario("scenario-a1").unwrap();
    let weights = scenario.base.probe_weights;

    for (label, gamma1_hz) in [("pre-EP", 20.0), ("post-EP", 100.0)] {
        let params = scenario.params_at(gamma1_hz)?;
        let model = build_dynamics(&params)?;
        let grid = integration_grid(&model.drift, 60.0)?;
        let spec = probe_psd(&model, weights, &grid)?;

        let path = out_dir.join(format!("psd_{gamma1_hz}hz.csv"));
        spec.write_csv(std::io::BufWriter::new(std::fs::File::create(&path)?))?;

        let fit = fit_lorentzians(&spec, 2)?;
        let cf = eigenmodes_closed_form(&effective_model(&params)?)?;
        println!(
            "{label} (Gamma_1/2pi = {gamma1_hz} Hz), spectrum -> {}",
            path.display()
        );
        for peak in &fit.peaks {
            println!(
                "  fitted peak: center {:.3} Hz, half-width {:.3} Hz, area/2pi = {:.4e}",
                peak.center / TAU,
                peak.half_width / TAU,
                peak.area / TAU
            );
        }
        println!(
            "  closed form: centers {:.3} / {:.3} Hz, linewidths {:.3} / {:.3} Hz",
            cf.modes[0].omega / TAU,
            cf.modes[1].omega / TAU,
            cf.modes[0].gamma / TAU,
            cf.modes[1].gamma / TAU
        );
        let thermometry = spectral_thermometry(&fit, weights);
        println!(
            "  probe-referred occupation from fitted areas: {:.4e} (n_th = {:.1e})",
            thermometry.total,
            scenario.common_n_th()
        );
        println!(
            "  integrated spectrum: {:.4e}\n",
            spec.integrate_occupation()
        );
    }
    Ok(())
}
