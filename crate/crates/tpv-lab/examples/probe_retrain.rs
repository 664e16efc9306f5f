use tpv_lab::datagen::*;
use tpv_lab::empirical::*;
use tpv_lab::nn::{init_network, MlpConfig};
use tpv_lab::rng::derive_seed;
use tpv_lab::theory::{label_noise_spectrum_gram, tpv_label_nonlinear};
use tpv_lab::train::{train_mse, Schedule, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::LinearGaussian, input_dim: 20, seed: derive_seed(1, &[11]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let test = sample_dataset(&teacher, 5000, 1);
    let width = 128usize;
    let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, 0]));
    let init = init_network(&cfg);
    let tr = train_mse(&init, &train, &TrainConfig::full_batch(2e-2, 3000)).unwrap();
    let reference = init.with_params(tr.final_params);
    println!("ref_loss {:.2e}", reference.loss_mse(&train.xs, &train.ys).unwrap());
    let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
    let theory = 1e-4 * tpv_label_nonlinear(&spec, 1.0).unwrap();
    println!("theory {theory:.3e}");
    let x_ref = taylor_reference_subset(&train.xs, 999);
    for (label, lr, ep, sched) in [
        ("A lr5e-3 500 cos", 5e-3, 500usize, Schedule::Cosine),
        ("B lr1e-2 800 cos", 1e-2, 800, Schedule::Cosine),
        ("C lr2e-2 300 cos", 2e-2, 300, Schedule::Cosine),
    ] {
        let mut kept = Vec::new();
        let mut tes = Vec::new();
        for run in 0..4u64 {
            let noisy = add_label_noise(&train, 0.01, derive_seed(42, &[run]));
            let rcfg = TrainConfig { schedule: sched, ..TrainConfig::full_batch(lr, ep) };
            let rt = train_mse(&reference, &noisy, &rcfg).unwrap();
            let te = taylor_validity(&reference, &rt.final_params, &x_ref, 1e-2).unwrap();
            tes.push(te);
            if te < 1e-3 && rt.loss_decreased { kept.push(rt.final_params); }
        }
        let ratio = if kept.is_empty() { f64::NAN } else {
            empirical_tpv(&reference, &kept, &test.xs).unwrap() / theory
        };
        println!("{label}: taylor {:?} kept {} ratio {ratio:.2}", tes.iter().map(|t| format!("{t:.1e}")).collect::<Vec<_>>(), kept.len());
    }
}
