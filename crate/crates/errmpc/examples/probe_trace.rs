// Scratch: envelope of the compensated wrong-mass height trace.
use errmpc::sim::{run_scenario, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::wrong_mass();
    cfg.duration = 20.0;
    cfg.compensation = true;
    let run = run_scenario(&cfg).unwrap();
    println!("fell: {}", run.fell_over());
    println!("  t-bin   mean_h    min_h    max_h   mean_c4    fz_sum");
    let dt = 2.0;
    let mut bin_start = 0.0;
    while bin_start < 20.0 {
        let rows: Vec<_> = run
            .records
            .iter()
            .filter(|r| r.time >= bin_start && r.time < bin_start + dt)
            .collect();
        if rows.is_empty() {
            break;
        }
        let n = rows.len() as f64;
        let mean_h: f64 = rows.iter().map(|r| r.measured[5]).sum::<f64>() / n;
        let min_h = rows.iter().map(|r| r.measured[5]).fold(f64::INFINITY, f64::min);
        let max_h = rows.iter().map(|r| r.measured[5]).fold(f64::NEG_INFINITY, f64::max);
        let mean_c4: f64 = rows.iter().map(|r| r.compensation[3]).sum::<f64>() / n;
        let fz: f64 = rows
            .iter()
            .map(|r| r.grfs[2] + r.grfs[5] + r.grfs[8] + r.grfs[11])
            .sum::<f64>()
            / n;
        println!(
            "{:5.1}-{:4.1} {:.4}  {:.4}  {:.4}  {:+.4}  {:7.1}",
            bin_start,
            bin_start + dt,
            mean_h,
            min_h,
            max_h,
            mean_c4,
            fz
        );
        bin_start += dt;
    }
    // Fine-grained slice to see the oscillation period.
    println!("\nfine slice t in [6, 9):");
    for r in run.records.iter().filter(|r| r.time >= 6.0 && r.time < 9.0) {
        if (r.time * 100.0).round() as i64 % 9 == 0 {
            println!(
                "  t {:6.3}  h {:.4}  c4 {:+.4}  fz {:6.1}",
                r.time,
                r.measured[5],
                r.compensation[3],
                r.grfs[2] + r.grfs[5] + r.grfs[8] + r.grfs[11]
            );
        }
    }
}
