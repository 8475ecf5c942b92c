// Scratch: ablation grid over noise level and the input term.
use errmpc::sim::{paired_compare, ScenarioConfig};

fn run(tag: &str, cfg: &ScenarioConfig) {
    match paired_compare(cfg) {
        Ok(pair) => {
            let r = &pair.report;
            println!(
                "{tag:34} b_p2p {:6.4} c_p2p {:6.4} vib {:+7.1}% | b_mean {:.4} c_mean {:.4} gap {:+6.1}% | fell {}/{}",
                r.baseline.peak_to_peak_height,
                r.compensated.peak_to_peak_height,
                r.vibration_reduction_pct,
                r.baseline.mean_height,
                r.compensated.mean_height,
                r.height_error_reduction_pct,
                r.baseline.fell_over,
                r.compensated.fell_over
            );
        }
        Err(e) => println!("{tag:34} FAILED: {e}"),
    }
}

fn set_noise(cfg: &mut ScenarioConfig, s: f64) {
    cfg.noise.angles = s;
    cfg.noise.position = s;
    cfg.noise.rates = s;
    cfg.noise.velocity = s;
}

fn main() {
    let mut cfg = ScenarioConfig::wrong_mass();
    cfg.duration = 20.0;
    run("wm noise1e-3 C", &cfg);

    let mut c2 = cfg.clone();
    set_noise(&mut c2, 2e-4);
    run("wm noise2e-4 C", &c2);

    let mut c3 = c2.clone();
    c3.model.force_zero_c = true;
    run("wm noise2e-4 noC", &c3);

    let mut c4 = cfg.clone();
    c4.model.force_zero_c = true;
    run("wm noise1e-3 noC", &c4);

    let mut g = ScenarioConfig::ground_truth();
    g.duration = 20.0;
    set_noise(&mut g, 2e-4);
    run("gt noise2e-4 C", &g);

    let mut g2 = g.clone();
    g2.model.force_zero_c = true;
    run("gt noise2e-4 noC", &g2);

    let mut p = ScenarioConfig::payload_8kg();
    p.duration = 25.0;
    set_noise(&mut p, 2e-4);
    run("pl noise2e-4 C", &p);
}
