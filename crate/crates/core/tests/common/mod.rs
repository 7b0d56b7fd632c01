//! Oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use hydragan_core::datapipe::Dataset;
use hydragan_core::evaluator::{fit_predictors, select_columns, ModelKind};
use hydragan_core::networks::{Generator, NetworkConfig};
use hydragan_core::numcore::{Activation, Grads, LayerSpec, Network, Optimizer, Tensor};
use hydragan_core::rng::{self, ChaCha8Rng};
use hydragan_core::toy;
use hydragan_core::trainer::{Agents, TrainConfig};
use rand::Rng;

pub const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

fn kink_distance(act: Activation, z: f64) -> f64 {
    let edge = core::f64::consts::E.sqrt() - 1.0;
    match act {
        Activation::Linear | Activation::Symlog => f64::INFINITY,
        Activation::LeakyRelu => z.abs(),
        Activation::ClampedLinear => (z.abs() - 0.5).abs(),
        Activation::ClampedSymlog => (z.abs() - edge).abs(),
    }
}

fn loss(net: &Network, x: &Tensor, upstream: &Tensor) -> f64 {
    let y = net.forward(x).unwrap();
    y.data().iter().zip(upstream.data()).map(|(a, b)| a * b).sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = scale * rng::standard_normal(rng);
    }
    t
}

/// Builds a two-layer case whose pre-activations all sit away from kinks.
pub fn case(first_conv: bool, act: Activation, seed: u64) -> (Network, Tensor, Tensor) {
    let mut rng = rng::seeded(seed);
    let width = 6;
    let first = if first_conv {
        LayerSpec::conv1d(width, 3, 2, act).unwrap()
    } else {
        LayerSpec::dense(width, 5, act).unwrap()
    };
    let second = LayerSpec::dense(first.output_width, 3, act).unwrap();
    loop {
        let net = Network::init(&[first, second], 0.5, &mut rng).unwrap();
        let x = random_tensor(&[4, width], 1.0, &mut rng);
        // replay the stack with linear activations to read pre-activations
        let mut h = x.clone();
        let mut clear = true;
        for layer in net.layers() {
            let single = Network::new(vec![hydragan_core::numcore::Layer::from_parts(
                LayerSpec { activation: Activation::Linear, ..layer.spec },
                layer.weight.clone(),
                layer.bias.clone(),
            )
            .unwrap()])
            .unwrap();
            let z = single.forward(&h).unwrap();
            if z.data().iter().any(|&v| kink_distance(act, v) < 1e-3) {
                clear = false;
            }
            let mut next = z.clone();
            for v in next.data_mut() {
                *v = act.apply(*v);
            }
            h = next;
        }
        if clear {
            let upstream = random_tensor(&[4, 3], 1.0, &mut rng);
            return (net, x, upstream);
        }
    }
}

/// Max relative error across all parameters and inputs for one case.
pub fn max_case_error(first_conv: bool, act: Activation, seed: u64) -> f64 {
    let (mut net, x, upstream) = case(first_conv, act, seed);
    let (_, tape) = net.forward_tape(&x).unwrap();
    let (grads, dx) = net.backward(&tape, &upstream).unwrap();
    let mut worst: f64 = 0.0;

    let n_params = net.params().len();
    for t in 0..n_params {
        let len = net.params()[t].len();
        for i in 0..len {
            let orig = net.params()[t].data()[i];
            net.params_mut()[t].data_mut()[i] = orig + H;
            let up = loss(&net, &x, &upstream);
            net.params_mut()[t].data_mut()[i] = orig - H;
            let down = loss(&net, &x, &upstream);
            net.params_mut()[t].data_mut()[i] = orig;
            let fd = (up - down) / (2.0 * H);
            worst = worst.max(rel_err(grads.0[t].data()[i], fd));
        }
    }
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        xp.data_mut()[i] = orig + H;
        let up = loss(&net, &xp, &upstream);
        xp.data_mut()[i] = orig - H;
        let down = loss(&net, &xp, &upstream);
        xp.data_mut()[i] = orig;
        worst = worst.max(rel_err(dx.data()[i], (up - down) / (2.0 * H)));
    }
    worst
}


/// Minimum-cost perfect matching by enumerating every permutation.
pub fn brute_force_matching(a: &[f64], b: &[f64]) -> f64 {
    fn permute(k: usize, p: &mut Vec<usize>, a: &[f64], b: &[f64], best: &mut f64) {
        if k == p.len() {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs()).sum();
            *best = best.min(c);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(k + 1, p, a, b, best);
            p.swap(k, i);
        }
    }
    let mut p: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    permute(0, &mut p, a, b, &mut best);
    best / a.len() as f64
}

pub fn small_net() -> NetworkConfig {
    NetworkConfig {
        noise_dim: 4,
        trunk_widths: vec![8],
        head_widths: vec![8],
        conv_channels: 2,
        critic_hidden: vec![8],
        ..NetworkConfig::default()
    }
}

pub fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        n_heads: Some(2),
        network: small_net(),
        seed,
        ..TrainConfig::default()
    }
}

pub fn copycol(n: usize, seed: u64) -> Dataset {
    let t = toy::copycol(n, seed).unwrap();
    Dataset::with_sensitive_name(t.names, t.rows, &t.sensitive).unwrap().normalize()
}

pub fn all_params(agents: &Agents) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = agents.generator.params().iter().map(|t| bits(t)).collect();
    for d in agents.discriminators() {
        out.extend(d.params().iter().map(|t| bits(t)));
    }
    out
}

pub fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

/// One critic step of a plain single-pair WGAN, written against the
/// network primitives.
pub fn reference_critic_step(
    gen: &Generator,
    critic: &mut Network,
    opt: &mut Optimizer,
    data: &Tensor,
    rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) {
    let b = cfg.batch_size;
    let idx: Vec<usize> = (0..b).map(|_| rng.gen_range(0..data.rows())).collect();
    let real = data.select_rows(&idx);
    let nd = gen.noise_dim();
    let noise = Tensor::matrix(b, nd, (0..b * nd).map(|_| rng::standard_normal(rng)).collect()).unwrap();
    let fake = gen.heads()[0].forward(&gen.trunk().forward(&noise).unwrap()).unwrap();
    let (_, tape_real) = critic.forward_tape(&real).unwrap();
    let (_, tape_fake) = critic.forward_tape(&fake).unwrap();
    // d/dscore of mean(fake) - mean(real)
    let up_real = Tensor::matrix(b, 1, vec![-1.0 / b as f64; b]).unwrap();
    let up_fake = Tensor::matrix(b, 1, vec![1.0 / b as f64; b]).unwrap();
    let (g_real, _) = critic.backward(&tape_real, &up_real).unwrap();
    let (g_fake, _) = critic.backward(&tape_fake, &up_fake).unwrap();
    let summed = Grads(
        g_real
            .0
            .iter()
            .zip(&g_fake.0)
            .map(|(a, f)| {
                let mut t = a.clone();
                t.data_mut().iter_mut().zip(f.data()).for_each(|(x, y)| *x += y);
                t
            })
            .collect(),
    );
    opt.step(&mut critic.params_mut(), &summed).unwrap();
    for p in critic.params_mut() {
        p.data_mut().iter_mut().for_each(|w| *w = w.clamp(-cfg.clip, cfg.clip));
    }
}

pub fn reference_generator_step(
    gen: &mut Generator,
    critic: &Network,
    opt: &mut Optimizer,
    rng: &mut ChaCha8Rng,
    cfg: &TrainConfig,
) {
    let b = cfg.batch_size;
    let nd = gen.noise_dim();
    let noise = Tensor::matrix(b, nd, (0..b * nd).map(|_| rng::standard_normal(rng)).collect()).unwrap();
    let (hidden, trunk_tape) = gen.trunk().forward_tape(&noise).unwrap();
    let (fake, head_tape) = gen.heads()[0].forward_tape(&hidden).unwrap();
    let (_, critic_tape) = critic.forward_tape(&fake).unwrap();
    // d/dscore of -mean(fake)
    let up = Tensor::matrix(b, 1, vec![-1.0 / b as f64; b]).unwrap();
    let (_, d_fake) = critic.backward(&critic_tape, &up).unwrap();
    let (head_grads, d_hidden) = gen.heads()[0].backward(&head_tape, &d_fake).unwrap();
    let (trunk_grads, _) = gen.trunk().backward(&trunk_tape, &d_hidden).unwrap();
    let grads = Grads(trunk_grads.0.into_iter().chain(head_grads.0).collect());
    opt.step(&mut gen.params_mut(), &grads).unwrap();
}

/// Train-on-real, test-on-real utility computed directly from the fitted
/// predictors.
pub fn train_on_real_baseline(real: &Dataset) -> f64 {
    let s = real.sensitive_index();
    let features: Vec<usize> = (0..real.n_features()).filter(|&j| j != s).collect();
    let mut maes = Vec::new();
    for &t in &features {
        let mut cols: Vec<usize> = features.iter().copied().filter(|&j| j != t).collect();
        let x = select_columns(real.matrix(), &cols);
        cols.push(t);
        let y = real.column(t);
        let models = fit_predictors(&select_columns(real.matrix(), &cols), cols.len() - 1).unwrap();
        for kind in ModelKind::ALL {
            let pred = models.model(kind).predict(&x);
            maes.push(pred.iter().zip(&y).map(|(p, v)| (p - v).abs()).sum::<f64>() / y.len() as f64);
        }
    }
    (1.0 - (maes.iter().sum::<f64>() / maes.len() as f64)).clamp(0.0, 1.0)
}
