// Scratch diagnosis: why does the online model never serve forecasts?
use errmpc::error_model::{
    adequacy_check, fit_error_model, static_input_baseline, ErrorBuffer, ErrorModelConfig,
    ErrorModelManager,
};
use errmpc::sim::{run_scenario, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::wrong_mass();
    cfg.duration = 20.0;
    let run = run_scenario(&cfg).unwrap();
    let log = run.error_log.unwrap();
    let buffer = ErrorBuffer::from_csv(&log, 600).unwrap();
    println!("buffer has {} samples", buffer.len());

    let baseline = static_input_baseline(cfg.control_mass);
    match fit_error_model(&buffer, 2, 1, &baseline, false) {
        Ok((model, diag)) => {
            println!("fit OK: n_params {}  sample_count {}", diag.n_params, diag.sample_count);
            println!("  rss per channel: {:?}", diag.rss_per_channel);
            for (c, rho) in diag.autocorr.iter().enumerate() {
                let band = 2.0 / (diag.sample_count as f64).sqrt();
                let outside = rho.iter().filter(|v| v.abs() > band).count();
                println!("  ch{c}: {} of {} lags outside +-{:.4}", outside, rho.len(), band);
            }
            let _ = model;
        }
        Err(e) => println!("fit FAILED: {e}"),
    }

    // Replay through a manager on the scenario schedule.
    let mut mc = ErrorModelConfig::new(baseline.clone());
    mc.capacity = 600;
    mc.min_fit_samples = 150;
    mc.refit_interval = 250;
    mc.residual_window = 400;
    mc.orders = Some((2, 1));
    let mut manager = ErrorModelManager::new(mc);
    for (k, s) in buffer.samples().enumerate() {
        manager.record(s.clone()).unwrap();
        if (k + 1) % 100 == 0 {
            println!(
                "after {:4} samples: ready {}  failed_refits {}  report {:?}",
                k + 1,
                manager.compensation_ready(),
                manager.failed_refits,
                manager.last_report.as_ref().map(|r| (r.passed, r.outside_fraction))
            );
        }
    }
    if let Some(m) = manager.model() {
        println!("model warm: {}", m.is_warm());
    } else {
        println!("manager holds no model at all");
    }
    let recent: Vec<_> = Vec::new();
    let _ = adequacy_check(&recent);
}
