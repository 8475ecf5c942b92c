// Scratch: which orders whiten the closed-loop error series?
use errmpc::error_model::{fit_error_model, static_input_baseline, ErrorBuffer};
use errmpc::sim::{run_scenario, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::wrong_mass();
    cfg.duration = 20.0;
    let run = run_scenario(&cfg).unwrap();
    let buffer = ErrorBuffer::from_csv(&run.error_log.unwrap(), 600).unwrap();
    let baseline = static_input_baseline(cfg.control_mass);

    for (n, m) in [(2usize, 1usize), (3, 0), (4, 0), (4, 1), (6, 0), (8, 0), (8, 1), (10, 0), (12, 0)] {
        match fit_error_model(&buffer, n, m, &baseline, false) {
            Ok((_, diag)) => {
                let band = 2.0 / (diag.sample_count as f64).sqrt();
                let mut outside = 0usize;
                let mut total = 0usize;
                for rho in &diag.autocorr {
                    outside += rho.iter().filter(|v| v.abs() > band).count();
                    total += rho.len();
                }
                println!(
                    "({n},{m}): pooled {}/{} = {:.1}%  rss_total {:.6}",
                    outside,
                    total,
                    100.0 * outside as f64 / total as f64,
                    diag.rss_total
                );
            }
            Err(e) => println!("({n},{m}): FAILED {e}"),
        }
    }
}
