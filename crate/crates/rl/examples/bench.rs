use alb_rl::adam::Adam;
use alb_rl::net::{DenseNet, Head};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn bench(sizes: &[usize], batch: usize, label: &str) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = DenseNet::init(sizes, Head::Linear, &mut rng);
    let target = net.clone();
    let mut adam = Adam::new(&net, 1e-5);
    let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.gen_range(0.0..1.0));
    let iters = 200;
    let t0 = Instant::now();
    for _ in 0..iters {
        let trace = net.forward_batch(x.view());
        let _tq = target.forward_batch(x.view());
        let dout = trace.output().clone() * 0.001;
        let grads = net.backward_batch(&trace, dout.view());
        adam.step(&mut net, &grads, Some(1.0));
    }
    let dt = t0.elapsed();
    println!("{label}: {:.3} ms/learn-step (params {})", dt.as_secs_f64() * 1000.0 / iters as f64, net.param_count());
}

fn main() {
    bench(&[48, 534, 534, 534, 336], 64, "dqn central 3x5");
    bench(&[48, 178, 178, 178, 26], 64, "dqn multi agent 3x5");
    bench(&[48, 258, 258, 258, 336], 5, "ppo central minibatch");
    bench(&[48, 86, 86, 86, 26], 5, "ppo multi minibatch");
    bench(&[465, 178, 178, 178, 56], 64, "dqn multi agent 15x10");
}
