use tpv_lab::datagen::*;
use tpv_lab::empirical::*;
use tpv_lab::linalg::Matrix;
use tpv_lab::nn::{init_network, layer_spans, MlpConfig};
use tpv_lab::nn::ntk::{ntk_gram, NtkSide};
use tpv_lab::linalg::compact_svd;
use tpv_lab::rng::{derive_seed, StreamRng};
use tpv_lab::theory::{label_noise_spectrum_gram, tpv_label_nonlinear};
use tpv_lab::train::{train_mse, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::LinearGaussian, input_dim: 20, seed: derive_seed(1, &[11]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let test = sample_dataset(&teacher, 5000, 1);
    let n = train.len();
    for (label, style) in [("he", 0u32), ("torch", 1u32)] {
        for width in [512usize, 128] {
            let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, width as u64]));
            let mut init = init_network(&cfg);
            if style == 1 {
                // U(±1/sqrt(fan_in)) weights and biases.
                let mut rng = StreamRng::new(derive_seed(1, &[77, width as u64]));
                for span in layer_spans(&cfg) {
                    let bound = 1.0 / (span.inp as f64).sqrt();
                    for w in init.params.0[span.w_off..span.w_off + span.out * span.inp].iter_mut() {
                        *w = rng.uniform_in(-bound, bound);
                    }
                    for b in init.params.0[span.b_off..span.b_off + span.out].iter_mut() {
                        *b = rng.uniform_in(-bound, bound);
                    }
                }
            }
            let tr = train_mse(&init, &train, &TrainConfig::full_batch(1e-2, 800)).unwrap();
            let reference = init.with_params(tr.final_params);
            let ref_loss = reference.loss_mse(&train.xs, &train.ys).unwrap();
            let test_loss = reference.loss_mse(&test.xs, &test.ys).unwrap();
            let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
            let theory = tpv_label_nonlinear(&spec, 1e-4).unwrap();
            let side = NtkSide::build(&reference, &train.xs).unwrap();
            let k_tr = ntk_gram(&reference, &side, &side).symmetrized();
            let eig = compact_svd(&k_tr, 1e-12).unwrap();
            let x_ref = taylor_reference_subset(&train.xs, 999);
            let mut rng = StreamRng::new(777);
            let eps: Vec<f64> = (0..n).map(|_| 0.01 * rng.normal()).collect();
            let tau = 15.0;
            let ueps = eig.u.matvec_t(&eps);
            let coef: Vec<f64> = ueps.iter().zip(&eig.s).map(|(c, lam)| {
                let st2 = lam / n as f64;
                c * (1.0 - (-st2 * tau).exp()) / lam
            }).collect();
            let alpha = eig.u.matvec(&coef);
            let cache = reference.forward_cached(&train.xs).unwrap();
            let dw = reference.backward_param_grad(&cache, &Matrix::column(&alpha));
            let mut params = reference.params.clone();
            params.axpy(1.0, &dw);
            let te = taylor_validity(&reference, &params, &x_ref, 1e-2).unwrap();
            println!("{label} w{width}: ref {ref_loss:.1e} test {test_loss:.3e} theory {theory:.3e} floor_taylor {te:.2e}");
        }
    }
}
