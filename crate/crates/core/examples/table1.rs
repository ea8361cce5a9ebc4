//! Runs the balanced n = 50 scenarios of the power table and prints rates.
//!
//! cargo run --release -p ordprop --example table1 [replicates] [haldane|reject]

use ordprop::{run_study, BoundaryPolicy, Procedure, Scenario};

fn main() {
    let mut args = std::env::args().skip(1);
    let replicates = args.next().map_or(5000, |a| a.parse().expect("replicates"));
    let policy: BoundaryPolicy = args.next().map_or(BoundaryPolicy::Haldane, |a| a.parse().expect("policy"));
    let rows: &[[f64; 4]] = &[
        [0.05, 0.05, 0.05, 0.05],
        [0.07, 0.07, 0.07, 0.07],
        [0.10, 0.10, 0.10, 0.10],
        [0.20, 0.20, 0.20, 0.20],
        [0.05, 0.05, 0.05, 0.30],
        [0.05, 0.10, 0.20, 0.30],
        [0.05, 0.30, 0.30, 0.30],
        [0.05, 0.05, 0.10, 0.30],
        [0.05, 0.10, 0.30, 0.20],
        [0.05, 0.10, 0.30, 0.10],
        [0.07, 0.07, 0.07, 0.30],
        [0.07, 0.07, 0.10, 0.30],
        [0.07, 0.30, 0.30, 0.30],
        [0.07, 0.10, 0.30, 0.20],
    ];
    let scenarios: Vec<Scenario> = rows
        .iter()
        .map(|pi| Scenario {
            replicates,
            boundary_policy: policy,
            ..Scenario::balanced(pi, 50, 0)
        })
        .collect();
    let results = run_study(&scenarios, 2024, 0).expect("valid scenarios");
    for r in results {
        let mut line = format!("{:?}", r.scenario.pi);
        for p in Procedure::ALL {
            let rates = r.rates_for(p);
            for v in &rates.per_dose {
                if let Some(v) = v {
                    line.push_str(&format!(" {v:.3}"));
                }
            }
            line.push_str(&format!(" | {}a {:.3} ||", p.tag(), rates.any_pair));
        }
        println!("{line} corr={} fail={} t={:.1}s", r.corrected_replicates, r.failed_replicates, r.elapsed.as_secs_f64());
    }
}
