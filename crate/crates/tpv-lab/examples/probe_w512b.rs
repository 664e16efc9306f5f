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
    for width in [512usize, 128] {
        let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, width as u64]));
        let init = init_network(&cfg);
        let tr = train_mse(&init, &train, &TrainConfig::full_batch(1e-2, 800)).unwrap();
        let reference = init.with_params(tr.final_params);
        let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
        let theory = 1e-4 * tpv_label_nonlinear(&spec, 1.0).unwrap();
        println!("w{width}: theory {theory:.3e}");
        let mut logit_ds = train.clone();
        logit_ds.ys = reference.batch_forward(&train.xs).unwrap();
        let x_ref = taylor_reference_subset(&train.xs, 999);
        for (label, lr, ep) in [("V1 5e-3x500", 5e-3, 500usize), ("V2 1e-2x300", 1e-2, 300)] {
            let mut kept = Vec::new();
            let mut tes = Vec::new();
            for run in 0..6u64 {
                let noisy = add_label_noise(&logit_ds, 0.01, derive_seed(42, &[run]));
                let rcfg = TrainConfig { schedule: Schedule::Cosine, ..TrainConfig::full_batch(lr, ep) };
                let rt = train_mse(&reference, &noisy, &rcfg).unwrap();
                let te = taylor_validity(&reference, &rt.final_params, &x_ref, 1e-2).unwrap();
                tes.push(format!("{te:.1e}"));
                if te < 1e-3 && rt.loss_decreased { kept.push(rt.final_params); }
            }
            if kept.is_empty() { println!("  w{width} {label}: {tes:?} ALL DISCARDED"); continue; }
            let emp_te = empirical_tpv(&reference, &kept, &test.xs).unwrap();
            println!("  w{width} {label}: {tes:?} kept {} emp_te {emp_te:.3e} ratio {:.2}", kept.len(), emp_te / theory);
        }
    }
}
