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
    for ref_lr in [2.5e-3f64, 5e-3] {
        for width in [128usize, 256, 512] {
            let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, width as u64]));
            let init = init_network(&cfg);
            let tr = train_mse(&init, &train, &TrainConfig::full_batch(ref_lr, 800)).unwrap();
            let reference = init.with_params(tr.final_params);
            let ref_loss = reference.loss_mse(&train.xs, &train.ys).unwrap();
            let test_loss = reference.loss_mse(&test.xs, &test.ys).unwrap();
            let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
            let theory = tpv_label_nonlinear(&spec, 1e-4).unwrap();
            let mut logit_ds = train.clone();
            logit_ds.ys = reference.batch_forward(&train.xs).unwrap();
            let x_ref = taylor_reference_subset(&train.xs, 999);
            let mut kept = Vec::new();
            let mut tes = Vec::new();
            for run in 0..8u64 {
                let noisy = add_label_noise(&logit_ds, 0.01, derive_seed(42, &[run]));
                let rcfg = TrainConfig { schedule: Schedule::Cosine, ..TrainConfig::full_batch(1e-2, 300) };
                let rt = train_mse(&reference, &noisy, &rcfg).unwrap();
                let te = taylor_validity(&reference, &rt.final_params, &x_ref, 1e-2).unwrap();
                tes.push(format!("{te:.1e}"));
                if te < 1e-3 && rt.loss_decreased { kept.push(rt.final_params); }
            }
            let (emp_te, ratio) = if kept.is_empty() { (f64::NAN, f64::NAN) } else {
                let e = empirical_tpv(&reference, &kept, &test.xs).unwrap();
                (e, e / theory)
            };
            println!("ref_lr {ref_lr} w{width}: ref {ref_loss:.1e} test {test_loss:.3e} theory {theory:.3e} kept {}/{} emp {emp_te:.3e} ratio {ratio:.2} taylor {tes:?}",
                kept.len(), 8);
        }
    }
}
