//! Central finite-difference checks shared by the gradient and acceptance tests.
#![allow(dead_code)]

use fovscope::graph::{assemble, build_aspp_head, build_encoder, AsppSpec, NetworkGraph};
use fovscope::ops::{self, ConvSpec};
use fovscope::{Kernel, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-6;

/// Per-op outcome over a batch of random instances.
#[derive(Debug, Clone)]
pub struct OpStats {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub excluded_coords: usize,
}

impl OpStats {
    pub fn passes(&self, min_instances: usize) -> bool {
        self.instances >= min_instances && self.worst <= REL_TOL
    }
}

/// `‖a − n‖∞ / ‖n‖∞` of the analytic gradient of `⟨f(x), g⟩` against central
/// differences. A coordinate is skipped when the perturbation changes the
/// activation pattern reported by `f`. Returns `None` if every coordinate was
/// skipped, plus the number skipped.
pub fn fd_check<F, P>(x: &Tensor, g: &Tensor, analytic: &Tensor, f: F) -> (Option<f64>, usize)
where
    F: Fn(&Tensor) -> (Tensor, P),
    P: PartialEq,
{
    let (_, base_pattern) = f(x);
    let mut num_max: f64 = 0.0;
    let mut diff_max: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for i in 0..x.values().len() {
        let mut plus = x.clone();
        plus.values_mut()[i] += EPS;
        let mut minus = x.clone();
        minus.values_mut()[i] -= EPS;
        let (yp, pp) = f(&plus);
        let (ym, pm) = f(&minus);
        if pp != base_pattern || pm != base_pattern {
            skipped += 1;
            continue;
        }
        let numeric = (yp.dot(g).unwrap() - ym.dot(g).unwrap()) / (2.0 * EPS);
        num_max = num_max.max(numeric.abs());
        diff_max = diff_max.max((numeric - analytic.values()[i]).abs());
        used += 1;
    }
    if used == 0 {
        return (None, skipped);
    }
    (Some(diff_max / num_max.max(1e-12)), skipped)
}

fn random_tensor(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::random(shape.height, shape.width, shape.channels, rng.gen(), 1.0).unwrap()
}

fn random_kernel(kh: usize, kw: usize, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Kernel {
    let w = (0..kh * kw * cin * cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Kernel::new(kh, kw, cin, cout, w, b).unwrap()
}

fn small_shape(rng: &mut ChaCha8Rng, even: bool) -> Shape {
    let side = |rng: &mut ChaCha8Rng| if even { 2 * rng.gen_range(1..=4) } else { rng.gen_range(1..=8) };
    Shape::new(side(rng), side(rng), rng.gen_range(1..=3))
}

fn collect(name: &'static str, results: Vec<(Option<f64>, usize)>) -> OpStats {
    let mut stats = OpStats { name, instances: 0, worst: 0.0, excluded_coords: 0 };
    for (err, skipped) in results {
        stats.excluded_coords += skipped;
        if let Some(e) = err {
            stats.instances += 1;
            stats.worst = stats.worst.max(e);
        }
    }
    stats
}

pub fn conv_stats(n: usize, seed: u64) -> OpStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    while results.len() < n {
        let xs = small_shape(&mut rng, false);
        let kh = [1, 3, 5][rng.gen_range(0..3)];
        let kw = [1, 3, 5][rng.gen_range(0..3)];
        let k = random_kernel(kh, kw, xs.channels, rng.gen_range(1..=3), &mut rng);
        let spec = ConvSpec::new(rng.gen_range(1..=2), rng.gen_range(1..=3), rng.gen_range(0..=4)).unwrap();
        let Ok(ys) = spec.output_shape(xs, &k) else { continue };
        let x = random_tensor(xs, &mut rng);
        let g = random_tensor(ys, &mut rng);
        let analytic = ops::conv2d_input_grad(&g, &k, &spec, xs).unwrap();
        results.push(fd_check(&x, &g, &analytic, |t| (ops::conv2d_forward(t, &k, &spec).unwrap(), ())));
    }
    collect("conv2d", results)
}

pub fn relu_stats(n: usize, seed: u64) -> OpStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = (0..n)
        .map(|_| {
            let xs = small_shape(&mut rng, false);
            let x = random_tensor(xs, &mut rng);
            let g = random_tensor(xs, &mut rng);
            let (_, mask) = ops::relu_forward(&x);
            let analytic = ops::relu_input_grad(&g, &mask).unwrap();
            fd_check(&x, &g, &analytic, ops::relu_forward)
        })
        .collect();
    collect("relu", results)
}

pub fn maxpool_stats(n: usize, seed: u64) -> OpStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = (0..n)
        .map(|_| {
            let xs = small_shape(&mut rng, true);
            let x = random_tensor(xs, &mut rng);
            let (y, ctx) = ops::maxpool_forward(&x).unwrap();
            let g = random_tensor(y.shape(), &mut rng);
            let analytic = ops::maxpool_input_grad(&g, &ctx).unwrap();
            fd_check(&x, &g, &analytic, |t| {
                let (y, c) = ops::maxpool_forward(t).unwrap();
                (y, c.argmax().to_vec())
            })
        })
        .collect();
    collect("maxpool2x2", results)
}

pub fn avgpool_stats(n: usize, seed: u64) -> OpStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = (0..n)
        .map(|_| {
            let xs = small_shape(&mut rng, false);
            let x = random_tensor(xs, &mut rng);
            let g = random_tensor(Shape::new(1, 1, xs.channels), &mut rng);
            let analytic = ops::global_avgpool_input_grad(&g, xs).unwrap();
            fd_check(&x, &g, &analytic, |t| (ops::global_avgpool_forward(t), ()))
        })
        .collect();
    collect("global_avgpool", results)
}

pub fn resize_stats(n: usize, seed: u64) -> OpStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = (0..n)
        .map(|_| {
            let xs = small_shape(&mut rng, false);
            let (oh, ow) = (rng.gen_range(xs.height..=16), rng.gen_range(xs.width..=16));
            let x = random_tensor(xs, &mut rng);
            let g = random_tensor(Shape::new(oh, ow, xs.channels), &mut rng);
            let analytic = ops::bilinear_upsample_input_grad(&g, xs).unwrap();
            fd_check(&x, &g, &analytic, |t| (ops::bilinear_upsample_forward(t, oh, ow).unwrap(), ()))
        })
        .collect();
    collect("bilinear_upsample", results)
}

pub fn all_op_stats(n: usize) -> Vec<OpStats> {
    vec![conv_stats(n, 1), relu_stats(n, 2), maxpool_stats(n, 3), avgpool_stats(n, 4), resize_stats(n, 5)]
}

/// Small ASPP network: 32×32×3 input, stride 4, 2-channel encoder and branches.
pub fn small_aspp_net(image_pool: bool) -> NetworkGraph {
    let enc = build_encoder(4, &[2, 2], 3, 11).unwrap();
    let spec = AsppSpec { base_rate: 1, branch_channels: 2, in_channels: 2, image_pool, seed: 12 };
    let head = build_aspp_head(&spec, 2).unwrap();
    assemble(&enc, &head, 32, 32).unwrap()
}

/// Finite-difference check of the full-network input gradient.
pub fn full_graph_check(net: &NetworkGraph, seed: u64) -> (Option<f64>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(net.input_shape(), &mut rng);
    let g = random_tensor(net.output_shape(), &mut rng);
    let analytic = net.grad_wrt_input(&x, &g).unwrap();
    fd_check(&x, &g, &analytic, |t| (net.forward(t).unwrap(), net.activation_pattern(t).unwrap()))
}
