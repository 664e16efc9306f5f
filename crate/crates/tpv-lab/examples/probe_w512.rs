use tpv_lab::datagen::*;
use tpv_lab::nn::{init_network, MlpConfig};
use tpv_lab::rng::derive_seed;
use tpv_lab::train::{train_mse, Schedule, TrainConfig};

fn main() {
    let teacher = TeacherSpec { kind: TeacherKind::LinearGaussian, input_dim: 20, seed: derive_seed(1, &[11]) };
    let train = sample_dataset(&teacher, 1000, 0);
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args[1].parse().unwrap();
    let epochs: usize = args[2].parse().unwrap();
    let sched = if args[3] == "cos" { Schedule::Cosine } else { Schedule::Constant };
    let cfg = MlpConfig::new(20, vec![512, 512], 1, derive_seed(1, &[12, 2]));
    let init = init_network(&cfg);
    let t0 = std::time::Instant::now();
    let tr = train_mse(&init, &train, &TrainConfig { schedule: sched, ..TrainConfig::full_batch(lr, epochs) }).unwrap();
    // print loss milestones
    for (e, l) in tr.loss_per_epoch.iter().enumerate() {
        if e % 500 == 0 || e == epochs { println!("lr={lr} {} ep {e}: {l:.3e}", args[3]); }
    }
    println!("done diverged={} [{:.0?}]", tr.diverged, t0.elapsed());
}
