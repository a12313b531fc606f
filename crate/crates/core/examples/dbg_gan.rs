// hyperparameter sweep for GAN smoke dynamics on simulator data
use drivegen_core::harness::prepare;
use drivegen_core::label::DrivingClass;
use drivegen_core::rcgan::*;
use drivegen_core::rng::stream_rng;
use drivegen_core::semisup::*;
use drivegen_core::simulator::{simulate_dataset, SimConfig};
use drivegen_core::features::extract_features;

fn main() {
    // small dataset: 40 trips, 20 labeled (10/10), 20 unlabeled
    let sim = SimConfig { n: 40, labeled: 20, ..SimConfig::default() };
    let raws = simulate_dataset(&sim, 7).unwrap();
    let data = prepare(&raws).unwrap();
    let labeled: Vec<_> = data.labeled_idx.iter().map(|&i| data.trips[i].clone()).collect();

    // classifier trained on real labeled features (fixed config)
    let unlabeled_feats: Vec<Vec<f64>> = data.unlabeled_idx.iter()
        .map(|&i| data.examples[i].features.values().to_vec()).collect();
    let mut ae_rng = stream_rng(7, 55);
    let (ae, _) = train_autoencoder(&unlabeled_feats, &AeShape::default(), 100, 0.001, &mut ae_rng).unwrap();
    let train_pairs: Vec<_> = data.labeled_idx.iter()
        .map(|&i| (data.examples[i].features.clone(), data.examples[i].class)).collect();
    let mut t_rng = stream_rng(7, 56);
    let clf0 = transfer_weights(&ae, drivegen_core::numerics::Activation::Tanh, &mut t_rng);
    let clf = train_classifier(&clf0, &train_pairs, 200, 0.01).unwrap();
    // sanity: classifier quality on all real trips
    let scores: Vec<f64> = data.examples.iter().map(|e| predict(&clf, &e.features).unwrap()).collect();
    let labels: Vec<bool> = data.examples.iter().map(|e| e.class == DrivingClass::Aggressive).collect();
    println!("real-data classifier AUROC on all trips: {:.3}", auroc(&scores, &labels).unwrap());

    for d_lr in [0.001, 0.01, 0.1, 0.3] {
        for seed in [1u64, 2, 3] {
            let cfg = RcganConfig {
                epochs: 200, hidden: 32, latent: 8,
                d_learning_rate: d_lr,
                ..RcganConfig::default()
            };
            let mut rng = stream_rng(seed, 0);
            let trained = train_rcgan(&labeled, &cfg, &mut rng).unwrap();
            // condition separation of generated trips per the real-data classifier
            let mut f_rng = stream_rng(seed, 1);
            let fakes = synthesize(&trained.generator, 1.5, 20, &mut f_rng).unwrap();
            let fscores: Vec<f64> = fakes.iter().map(|t| {
                let f = extract_features(&t.values).unwrap();
                let sf = scale_features(&data.feature_scaler, &f).unwrap();
                predict(&clf, &sf).unwrap()
            }).collect();
            let flabels: Vec<bool> = fakes.iter().map(|t| t.truth == Some(DrivingClass::Aggressive)).collect();
            let fake_auroc = auroc(&fscores, &flabels).unwrap();
            let h = &trained.history;
            let last = h.last().unwrap();
            println!("d_lr {d_lr:<5} seed {seed}: fake-condition AUROC {fake_auroc:.3} | d_loss {:.3}->{:.3} g_loss {:.3}->{:.3}",
                h[0].d_loss, last.d_loss, h[0].g_loss, last.g_loss);
        }
    }
}
