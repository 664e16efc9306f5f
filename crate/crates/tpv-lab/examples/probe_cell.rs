use tpv_lab::datagen::*;
use tpv_lab::empirical::*;
use tpv_lab::nn::{init_network, MlpConfig, ParamVector};
use tpv_lab::rng::derive_seed;
use tpv_lab::train::{train_mse, Schedule, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::MultiReLU10, input_dim: 20, seed: derive_seed(1, &[99]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let cfg = MlpConfig::new(20, vec![32, 32], 1, 5);
    let init = init_network(&cfg);
    let rc = TrainConfig { schedule: Schedule::Cosine, ..TrainConfig::full_batch(1e-2, 4000) };
    let tr = train_mse(&init, &train, &rc).unwrap();
    let reference = init.with_params(tr.final_params);
    for gamma in [0.1, 1.0, 10.0] {
        let noisy = add_label_noise(&train, 0.01, 4242);
        let rcfg = TrainConfig {
            schedule: Schedule::Cosine,
            proximity_gamma: gamma,
            proximity_anchor: Some(ParamVector(reference.params.0.clone())),
            ..TrainConfig::full_batch(1e-2, 200)
        };
        let rt = train_mse(&reference, &noisy, &rcfg).unwrap();
        let x_ref = taylor_reference_subset(&train.xs, 999);
        let te = taylor_validity(&reference, &rt.final_params, &x_ref, 1e-2).unwrap();
        let dn = rt.final_params.sub(&reference.params).norm();
        println!(
            "gamma={gamma}: loss {:.6e}->{:.6e} decreased={} taylor {:.3e} |dw| {:.2e}",
            rt.loss_per_epoch[0],
            rt.loss_per_epoch.last().unwrap(),
            rt.loss_decreased,
            te,
            dn
        );
    }
}
