use tpv_lab::datagen::*;
use tpv_lab::nn::{init_network, MlpConfig};
use tpv_lab::rng::derive_seed;
use tpv_lab::theory::label_noise_spectrum_gram;
use tpv_lab::train::{train_mse, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::LinearGaussian, input_dim: 20, seed: derive_seed(1, &[11]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let test = sample_dataset(&teacher, 5000, 1);
    for width in [128usize, 512] {
        let cfg = MlpConfig::new(20, vec![width, width], 1, derive_seed(1, &[12, width as u64]));
        let init = init_network(&cfg);
        let tr = train_mse(&init, &train, &TrainConfig::full_batch(1e-2, 800)).unwrap();
        let reference = init.with_params(tr.final_params);
        let spec = label_noise_spectrum_gram(&reference, &train.xs, &test.xs, 0.0).unwrap();
        let lam_max = spec.s[0] * spec.s[0];
        // Cumulative theory mass vs eigenvalue cutoff.
        for cut_exp in [-12.0f64, -10.0, -8.0, -7.0, -6.0, -5.0, -4.0] {
            let cut = lam_max * 10f64.powf(cut_exp);
            let (mut sum, mut rank) = (0.0, 0);
            for (s, b) in spec.s.iter().zip(&spec.b_diag) {
                if s * s > cut { sum += b / (s * s); rank += 1; }
            }
            println!("w{width} cutoff 1e{cut_exp}: rank {rank} theory {sum:.4e} (x sigma^2)");
        }
        // Fit-visible fraction at GD time tau: response (1-exp(-stilde^2 tau))^2.
        let n = 1000.0;
        let total: f64 = spec.s.iter().zip(&spec.b_diag).map(|(s, b)| b / (s * s)).sum();
        for tau in [5.0f64, 15.0, 30.0, 60.0, 120.0] {
            let vis: f64 = spec.s.iter().zip(&spec.b_diag).map(|(s, b)| {
                let st2 = s * s / n;
                let r = 1.0 - (-st2 * tau).exp();
                b / (s * s) * r * r
            }).sum();
            println!("w{width} tau {tau}: visible fraction {:.2}", vis / total);
        }
    }
}
