use tpv_lab::datagen::*;
use tpv_lab::empirical::*;
use tpv_lab::nn::{init_network, MlpConfig};
use tpv_lab::rng::derive_seed;
use tpv_lab::theory::{label_noise_spectrum_gram, tpv_label_nonlinear};
use tpv_lab::train::{train_mse, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::LinearGaussian, input_dim: 20, seed: derive_seed(1, &[11]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let test = sample_dataset(&teacher, 5000, 1);
    for (width, ref_lr, ref_ep) in [(128usize, 2e-2, 3000usize), (512, 2e-2, 1500)] {
        let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, 0]));
        let init = init_network(&cfg);
        let t0 = std::time::Instant::now();
        let tr = train_mse(&init, &train, &TrainConfig::full_batch(ref_lr, ref_ep)).unwrap();
        let reference = init.with_params(tr.final_params);
        let ref_loss = reference.loss_mse(&train.xs, &train.ys).unwrap();
        let test_loss = reference.loss_mse(&test.xs, &test.ys).unwrap();
        println!("w{width}: ref_loss {ref_loss:.2e} test_loss {test_loss:.3e} [{:.0?}]", t0.elapsed());
        let t0 = std::time::Instant::now();
        let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
        let t_base = tpv_label_nonlinear(&spec, 1.0).unwrap();
        println!("w{width}: rank {} t_base {t_base:.4e} theory(s=0.01) {:.4e} [{:.0?}]", spec.s.len(), 1e-4*t_base, t0.elapsed());
        let x_ref = taylor_reference_subset(&train.xs, 999);
        let mut kept = Vec::new();
        for run in 0..4u64 {
            let noisy = add_label_noise(&train, 0.01, derive_seed(42, &[run]));
            let t0 = std::time::Instant::now();
            let rt = train_mse(&reference, &noisy, &TrainConfig::full_batch(5e-3, 500)).unwrap();
            let te = taylor_validity(&reference, &rt.final_params, &x_ref, 1e-2).unwrap();
            println!("  w{width} run {run}: taylor {te:.3e} decreased={} [{:.0?}]", rt.loss_decreased, t0.elapsed());
            if te < 1e-3 && rt.loss_decreased { kept.push(rt.final_params); }
        }
        if !kept.is_empty() {
            let tr_tpv = empirical_tpv(&reference, &kept, &train.xs).unwrap();
            let te_tpv = empirical_tpv(&reference, &kept, &test.xs).unwrap();
            println!("w{width}: kept {} emp_train {tr_tpv:.4e} emp_test {te_tpv:.4e} theory {:.4e} ratio {:.2}",
                kept.len(), 1e-4*t_base, te_tpv/(1e-4*t_base));
        } else { println!("w{width}: ALL DISCARDED"); }
    }
}
