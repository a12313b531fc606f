// can the discriminator alone separate real trips from a frozen generator's
// output, as a function of init scale and lr?
use drivegen_core::harness::prepare;
use drivegen_core::numerics::sgd_update;
use drivegen_core::rcgan::*;
use drivegen_core::rng::stream_rng;
use drivegen_core::simulator::{simulate_dataset, SimConfig};

fn main() {
    let sim = SimConfig { n: 40, labeled: 20, ..SimConfig::default() };
    let raws = simulate_dataset(&sim, 7).unwrap();
    let data = prepare(&raws).unwrap();
    let labeled: Vec<_> = data.labeled_idx.iter().map(|&i| data.trips[i].clone()).collect();

    for (scale, d_lr) in [(1.0f64, 0.001f64), (1.0, 0.01), (1.0, 0.1), (3.0, 0.01), (3.0, 0.1), (6.0, 0.1), (6.0, 0.01)] {
        let cfg = RcganConfig { epochs: 0, hidden: 32, latent: 8, ..RcganConfig::default() };
        let mut rng = stream_rng(5, 0);
        let gen = GeneratorNet::init(&cfg, &mut rng);
        let mut disc = DiscriminatorNet::init(&cfg, &mut rng);
        // rescale init in place to emulate a larger INIT_SCALE
        if scale != 1.0 {
            let mut pv = disc.flatten();
            for v in pv.values_mut() { *v *= scale; }
            disc = disc.unflatten_like(&pv).unwrap();
        }
        // 200 epochs x 20 items of pure D training against frozen G
        for _epoch in 0..200 {
            for trip in &labeled {
                let y = trip.label.unwrap();
                let z = sample_noise(&mut rng, cfg.seq_len, cfg.latent);
                let fake = generate(&gen, &z, y).unwrap();
                let (_, g_real, _) = disc_loss_and_grad(&disc, &trip.values, y, 0.9).unwrap();
                let (_, g_fake, _) = disc_loss_and_grad(&disc, &fake.values, y, 0.0).unwrap();
                let mut g = g_real;
                for (a, b) in g.values_mut().iter_mut().zip(g_fake.values()) { *a += b; }
                let theta = sgd_update(&disc.flatten(), &g, d_lr).unwrap();
                disc = disc.unflatten_like(&theta).unwrap();
            }
        }
        // evaluate separation
        let mut real_score = 0.0;
        let mut fake_score = 0.0;
        for trip in &labeled {
            let y = trip.label.unwrap();
            let (_, m) = discriminate(&disc, &trip.values, y).unwrap();
            real_score += m / labeled.len() as f64;
            let z = sample_noise(&mut rng, cfg.seq_len, cfg.latent);
            let fake = generate(&gen, &z, y).unwrap();
            let (_, mf) = discriminate(&disc, &fake.values, y).unwrap();
            fake_score += mf / labeled.len() as f64;
        }
        println!("init x{scale} d_lr {d_lr}: real {real_score:.3} fake {fake_score:.3}");
    }
}
