use std::time::Instant;
use tpv_lab::linalg::Matrix;
use tpv_lab::nn::{init_network, MlpConfig};
use tpv_lab::rng::StreamRng;

fn main() {
    let mut rng = StreamRng::new(1);
    let a = Matrix::from_fn(1000, 512, |_, _| rng.normal());
    let b = Matrix::from_fn(533, 512, |_, _| rng.normal());
    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..5 {
        let c = a.matmul_nt(&b);
        acc += c.get(0, 0);
    }
    let el = t.elapsed().as_secs_f64();
    let flops = 5.0 * 2.0 * 1000.0 * 512.0 * 533.0;
    println!("gemm_nt: {:.2} GFLOP/s (acc {acc:.3})", flops / el / 1e9);

    let t = Instant::now();
    let mut acc = 0.0;
    for _ in 0..5 {
        let c = a.transpose().matmul_tn(&b.transpose());
        acc += c.get(0, 0);
    }
    let el = t.elapsed().as_secs_f64();
    println!("gemm_tn: {:.2} GFLOP/s (acc {acc:.3})", flops / el / 1e9);

    // MLP training-step throughput at width 512
    let cfg = MlpConfig::new(20, vec![512, 512], 1, 2);
    let net = init_network(&cfg);
    let xs = Matrix::from_fn(1000, 20, |_, _| rng.normal());
    let ys = Matrix::from_fn(1000, 1, |_, _| rng.normal());
    let t = Instant::now();
    let reps = 20;
    let mut acc = 0.0;
    for _ in 0..reps {
        let (l, g) = net.loss_and_grad_mse(&xs, &ys).unwrap();
        acc += l + g.0[0];
    }
    let el = t.elapsed().as_secs_f64();
    println!("fwd+bwd w=512 d3 n=1000: {:.1} ms/epoch (acc {acc:.3})", el / reps as f64 * 1e3);
}
