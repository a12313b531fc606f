// criterion-5-shaped check: baseline cell over 5 seeds, RCGAN skipped
use drivegen_core::harness::*;
use drivegen_core::simulator::{simulate_dataset, SimConfig};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let mut aurocs = Vec::new();
    for seed in 0..5u64 {
        let raws = simulate_dataset(&SimConfig::default(), 1000 + seed).unwrap();
        let data = prepare(&raws).unwrap();
        let cfg = ExperimentConfig {
            base_seed: 1000 + seed,
            baseline_only: true,
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&data, &cfg, 0).unwrap();
        let a = out.result.cells[0].auroc;
        println!("seed {seed}: baseline AUROC {a:.4} (grid pick: lr {}, epochs {}, {:?}) [{:.0} s]",
            out.result.cells[0].grid_choice.learning_rate,
            out.result.cells[0].grid_choice.epochs,
            out.result.cells[0].grid_choice.activation,
            t0.elapsed().as_secs_f64());
        aurocs.push(a);
    }
    aurocs.sort_by(f64::total_cmp);
    println!("median {:.4}  total {:.1} s", aurocs[2], t0.elapsed().as_secs_f64());
}
