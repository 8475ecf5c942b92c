// Scratch probe for closed-loop numbers; replaced by real examples later.
use errmpc::sim::{paired_compare, ScenarioConfig};
use std::time::Instant;

fn main() {
    for name in ["ground_truth", "wrong_mass", "payload_8kg"] {
        let cfg = ScenarioConfig::builtin(name).unwrap();
        let t0 = Instant::now();
        match paired_compare(&cfg) {
            Ok(pair) => {
                let r = &pair.report;
                println!("== {name} ({:.1} s wall) ==", t0.elapsed().as_secs_f64());
                println!(
                    "  baseline   : mean_h {:.4}  p2p {:.4}  mae_h {:.5}  fell {}  degraded {}",
                    r.baseline.mean_height,
                    r.baseline.peak_to_peak_height,
                    r.baseline.mae[3],
                    r.baseline.fell_over,
                    r.baseline.degraded_ticks
                );
                println!(
                    "  compensated: mean_h {:.4}  p2p {:.4}  mae_h {:.5}  fell {}  degraded {}",
                    r.compensated.mean_height,
                    r.compensated.peak_to_peak_height,
                    r.compensated.mae[3],
                    r.compensated.fell_over,
                    r.compensated.degraded_ticks
                );
                println!(
                    "  reductions : vibration {:.1}%  height-gap {:.1}%  mae [{:.1} {:.1} {:.1} {:.1}]%",
                    r.vibration_reduction_pct,
                    r.height_error_reduction_pct,
                    r.mae_reduction_pct[0],
                    r.mae_reduction_pct[1],
                    r.mae_reduction_pct[2],
                    r.mae_reduction_pct[3]
                );
            }
            Err(e) => println!("== {name} FAILED: {e}"),
        }
    }
}
