// per-feature class separation on the prepared dataset
use drivegen_core::harness::prepare;
use drivegen_core::label::DrivingClass;
use drivegen_core::semisup::auroc;
use drivegen_core::simulator::{simulate_dataset, SimConfig};
use drivegen_core::features::{FeatureVector, FEATURE_COUNT};

fn main() {
    let raws = simulate_dataset(&SimConfig::default(), 1007).unwrap();
    let data = prepare(&raws).unwrap();
    let labels: Vec<bool> = data.examples.iter().map(|e| e.class == DrivingClass::Aggressive).collect();
    let names = FeatureVector::column_names();
    let mut ranked: Vec<(f64, usize)> = (0..FEATURE_COUNT).map(|j| {
        let scores: Vec<f64> = data.examples.iter().map(|e| e.features.values()[j]).collect();
        let a = auroc(&scores, &labels).unwrap();
        ((a - 0.5).abs() + 0.5, j)
    }).collect();
    ranked.sort_by(|a, b| f64::total_cmp(&b.0, &a.0));
    println!("top single-feature |AUROC|:");
    for (a, j) in ranked.iter().take(10) {
        println!("  {:<22} {a:.3}", names[*j]);
    }
    println!("bottom:");
    for (a, j) in ranked.iter().rev().take(3) {
        println!("  {:<22} {a:.3}", names[*j]);
    }
}
