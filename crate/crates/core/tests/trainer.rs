mod common;

use common::*;
use hydragan_core::datapipe::Dataset;
use hydragan_core::networks::Generator;
use hydragan_core::numcore::{Activation, Grads, Layer, LayerSpec, Network, Optimizer, OptimizerKind, Tensor};
use hydragan_core::rng;
use hydragan_core::trainer::*;
use rand::Rng;

#[test]
fn combined_loss_examples() {
    assert_eq!(combined_loss(0.5, &[0.2, 0.3]).total, 1.0);
    let solo = combined_loss(0.7, &[]);
    assert_eq!(solo.total, 0.7);
    assert_eq!(solo.lambda_sum, 0.0);
    assert_eq!(combined_loss(0.0, &[0.0, 0.0]).total, 0.0);
}

#[test]
fn combined_total_is_own_plus_others() {
    let mut r = rng::seeded(11);
    for _ in 0..1000 {
        let own = rng::uniform(&mut r, -2.0, 2.0);
        let others: Vec<f64> = (0..r.gen_range(0..6)).map(|_| rng::uniform(&mut r, -2.0, 2.0)).collect();
        let b = combined_loss(own, &others);
        let mut lambda = 0.0;
        for o in &others {
            lambda += o;
        }
        assert_eq!(b.own.to_bits(), own.to_bits());
        assert_eq!(b.lambda_sum, lambda);
        assert_eq!(b.total.to_bits(), (own + lambda).to_bits());
    }
}

#[test]
fn recorded_combined_losses_are_consistent() {
    let mut tr = Trainer::new(&copycol(200, 1), small_config(1)).unwrap();
    for _ in 0..5 {
        let rec = tr.train_epoch().unwrap();
        let own: Vec<f64> = rec
            .critic_losses
            .iter()
            .copied()
            .chain(rec.reid_losses.iter().flatten().copied())
            .collect();
        assert_eq!(rec.combined.len(), own.len());
        for (j, b) in rec.combined.iter().enumerate() {
            let others: Vec<f64> = own.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &v)| v).collect();
            assert_eq!(*b, combined_loss(own[j], &others));
        }
    }
}

/// Own losses of every discriminator on fixed batches.
fn discriminator_losses(agents: &Agents, real: &Tensor, fake: &Tensor, sensitive: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &agents.critics {
        out.push(critic_loss(&c.realism_score(real).unwrap(), &c.realism_score(fake).unwrap()).unwrap());
    }
    let x = real.without_column(sensitive);
    let y = Tensor::matrix(real.rows(), 1, real.column(sensitive)).unwrap();
    for r in &agents.reids {
        out.push(reid_fit_loss(&y, &r.reid_predict(&x).unwrap()).unwrap());
    }
    out
}

#[test]
fn lambda_term_is_constant_in_own_parameters() {
    let ds = copycol(100, 2);
    let agents = Agents::build(2, ds.n_features(), ReidSharing::PerHead, &small_net(), 5).unwrap();
    let mut r = rng::seeded(4);
    let idx: Vec<usize> = (0..32).map(|_| r.gen_range(0..ds.n_samples())).collect();
    let real = ds.matrix().select_rows(&idx);
    let noise = Tensor::matrix(32, 4, (0..128).map(|_| rng::standard_normal(&mut r)).collect()).unwrap();
    let fake = agents.generator.generate_head(0, &noise).unwrap();
    let base = discriminator_losses(&agents, &real, &fake, ds.sensitive_index());
    let n_disc = base.len();
    for j in 0..n_disc {
        let lambda = |l: &[f64]| l.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| v).sum::<f64>();
        // finite differences of the lambda sum along every parameter of j
        for t in 0..8 {
            let mut moved = agents.clone();
            let disc = if j < 2 { &mut moved.critics[j] } else { &mut moved.reids[j - 2] };
            let mut params = disc.params_mut();
            let k = t % params.len();
            let len = params[k].len();
            let i = r.gen_range(0..len);
            params[k].data_mut()[i] += 1e-3;
            let after = discriminator_losses(&moved, &real, &fake, ds.sensitive_index());
            for o in (0..n_disc).filter(|&o| o != j) {
                assert_eq!(after[o].to_bits(), base[o].to_bits(), "disc {j} moved loss of {o}");
            }
            assert_eq!((lambda(&after) - lambda(&base)) / 1e-3, 0.0);
        }
    }
}

#[test]
fn combined_objective_updates_match_own_bitwise() {
    let ds = copycol(200, 3);
    for sharing in [ReidSharing::PerHead, ReidSharing::Shared] {
        let mut own_cfg = small_config(9);
        own_cfg.reid_sharing = sharing;
        let mut comb_cfg = own_cfg.clone();
        comb_cfg.discriminator_objective = DiscriminatorObjective::Combined;
        let mut a = Trainer::new(&ds, own_cfg).unwrap();
        let mut b = Trainer::new(&ds, comb_cfg).unwrap();
        for _ in 0..15 {
            let ra = a.train_epoch().unwrap();
            let rb = b.train_epoch().unwrap();
            assert!(ra.reid_active.iter().any(|&x| x));
            assert_eq!(ra, rb);
            assert_eq!(all_params(&a.agents), all_params(&b.agents));
        }
    }
}

#[test]
fn lambda_gradient_is_the_additive_identity() {
    let p = Tensor::matrix(2, 2, vec![1.0, -2.0, 0.0, -0.0]).unwrap();
    let mut g = Grads(vec![Tensor::matrix(2, 2, vec![0.5, -0.0, 0.0, -3.0]).unwrap()]);
    let before: Vec<u64> = bits(&g.0[0]);
    g.accumulate(&Grads::additive_identity_like(&[&p])).unwrap();
    assert_eq!(bits(&g.0[0]), before);
}

#[test]
fn gate_latches_on_simulated_trajectories() {
    let mut r = rng::seeded(21);
    for case in 0..10_000 {
        let heads = r.gen_range(1..5);
        let steps = r.gen_range(1..30);
        let mut active = vec![false; heads];
        let mut ever_below = vec![false; heads];
        for _ in 0..steps {
            let em: Vec<f64> = (0..heads)
                .map(|_| match r.gen_range(0..10) {
                    0 => 0.3,
                    1 => f64::NAN,
                    2 => 0.3 - 1e-12,
                    3 => 0.3 + 1e-12,
                    _ => rng::uniform(&mut r, 0.0, 0.8),
                })
                .collect();
            let next = em_gate(&em, &active, 0.3);
            for h in 0..heads {
                ever_below[h] |= em[h] < 0.3;
                assert!(!active[h] || next[h], "case {case}: unlatched");
                assert_eq!(next[h], ever_below[h], "case {case}: em {}", em[h]);
            }
            active = next;
        }
    }
}

#[test]
fn gate_examples() {
    assert_eq!(em_gate(&[0.5], &[false], 0.3), vec![false]);
    assert_eq!(em_gate(&[0.29], &[false], 0.3), vec![true]);
    assert_eq!(em_gate(&[0.3], &[false], 0.3), vec![false]);
    assert_eq!(em_gate(&[0.9], &[true], 0.3), vec![true]);
}

#[test]
fn gate_flags_monotone_during_training() {
    let mut tr = Trainer::new(&copycol(200, 4), small_config(4)).unwrap();
    tr.run(|_| {}).unwrap_or(());
    let hist = &tr.state.history;
    assert_eq!(hist.len(), tr.config.epochs.min(hist.len()));
    for w in hist.windows(2) {
        for h in 0..w[0].reid_active.len() {
            assert!(!w[0].reid_active[h] || w[1].reid_active[h]);
        }
    }
}

#[test]
fn single_head_without_reid_is_plain_wgan() {
    let ds = copycol(150, 5);
    for gen_opt in [OptimizerKind::Rmsprop, OptimizerKind::Adam] {
        let cfg = TrainConfig {
            n_heads: Some(1),
            reid_enabled: false,
            generator_optimizer: gen_opt,
            n_critic: 3,
            ..small_config(13)
        };
        let mut tr = Trainer::new(&ds, cfg.clone()).unwrap();
        let data = tr.data.partitions[0].clone();
        assert_eq!(data.rows(), ds.n_samples());

        let mut gen = tr.agents.generator.clone();
        let mut critic = tr.agents.critics[0].network().clone();
        let mut rng = tr.state.rng.clone();
        let mut c_opt = Optimizer::new(cfg.critic_optimizer, cfg.learning_rate, &critic.params()).unwrap();
        let mut g_opt = Optimizer::new(cfg.generator_optimizer, cfg.learning_rate, &gen.params()).unwrap();

        for _ in 0..4 {
            tr.train_epoch().unwrap();
            for _ in 0..cfg.n_critic {
                reference_critic_step(&gen, &mut critic, &mut c_opt, &data, &mut rng, &cfg);
            }
            reference_generator_step(&mut gen, &critic, &mut g_opt, &mut rng, &cfg);

            let ours: Vec<Vec<u64>> = tr.agents.critics[0].params().iter().map(|t| bits(t)).collect();
            let theirs: Vec<Vec<u64>> = critic.params().iter().map(|t| bits(t)).collect();
            assert_eq!(ours, theirs);
            let ours: Vec<Vec<u64>> = tr.agents.generator.params().iter().map(|t| bits(t)).collect();
            let theirs: Vec<Vec<u64>> = gen.params().iter().map(|t| bits(t)).collect();
            assert_eq!(ours, theirs);
        }
        assert!(tr.state.reid_active.iter().all(|&a| !a));
    }
}

#[test]
fn identical_seeds_give_identical_histories() {
    let ds = copycol(200, 6);
    let run = || {
        let mut tr = Trainer::new(&ds, TrainConfig { epochs: 25, ..small_config(17) }).unwrap();
        tr.run(|_| {}).unwrap();
        (serde_json::to_string(&tr.state.history).unwrap(), all_params(&tr.agents))
    };
    assert_eq!(run(), run());
}

#[test]
fn critic_weights_stay_clipped() {
    let mut tr = Trainer::new(&copycol(200, 7), TrainConfig { n_critic: 1, ..small_config(7) }).unwrap();
    for _ in 0..40 {
        tr.train_epoch().unwrap();
        for c in &tr.agents.critics {
            for p in c.params() {
                assert!(p.data().iter().all(|w| w.abs() <= tr.config.clip));
            }
        }
    }
}

#[test]
fn inactive_reid_does_not_reach_the_generator() {
    let ds = copycol(200, 8);
    let cfg = TrainConfig {
        reid_enabled: false,
        ..small_config(8)
    };
    let mut a = Trainer::new(&ds, cfg).unwrap();
    for _ in 0..3 {
        a.train_epoch().unwrap();
    }
    let mut b = a.clone();
    let mut r = rng::seeded(3);
    for net in &mut b.agents.reids {
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|w| *w = rng::uniform(&mut r, -0.05, 0.05));
        }
    }
    let ra = a.train_epoch().unwrap();
    let rb = b.train_epoch().unwrap();
    assert_eq!(ra.generator_loss.to_bits(), rb.generator_loss.to_bits());
    assert!(ra.generator_reid.iter().all(Option::is_none));
    let ga: Vec<Vec<u64>> = a.agents.generator.params().iter().map(|t| bits(t)).collect();
    let gb: Vec<Vec<u64>> = b.agents.generator.params().iter().map(|t| bits(t)).collect();
    assert_eq!(ga, gb);
}

fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    xs.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}

#[test]
fn single_feature_critic_loss_trend_decreases() {
    let mut r = rng::seeded(7);
    let n = 500;
    let rows = Tensor::matrix(n, 1, (0..n).map(|_| 2.0 + 0.5 * rng::standard_normal(&mut r)).collect()).unwrap();
    let ds = Dataset::new(vec!["x".into()], rows, 0).unwrap().normalize();
    let cfg = TrainConfig {
        n_heads: Some(1),
        epochs: 200,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut tr = Trainer::new(&ds, cfg).unwrap();
    assert!(tr.agents.reids.is_empty());
    let mut losses = Vec::new();
    tr.run(|rec| losses.push(rec.critic_losses[0].abs())).unwrap();
    assert_eq!(losses.len(), 200);
    let ma = moving_average(&losses, 20);
    let (first, last) = (ma[0], ma[ma.len() - 1]);
    println!("|critic loss| moving average: first {first:.5} last {last:.5}");
    assert!(last < first);
}

#[test]
fn head_usage_follows_seeded_draw() {
    // heads with zero weights and saturating biases emit all-0 and all-1 rows
    let trunk = Network::init(&[LayerSpec::dense(3, 4, Activation::Symlog).unwrap()], 0.05, &mut rng::seeded(1)).unwrap();
    let head = |bias: f64| {
        let spec = LayerSpec::dense(4, 2, Activation::ClampedSymlog).unwrap();
        let layer = Layer::from_parts(spec, Tensor::zeros(&spec.weight_shape()), Tensor::vector(vec![bias; 2]).unwrap()).unwrap();
        Network::new(vec![layer]).unwrap()
    };
    let gen = Generator::from_parts(trunk, vec![head(-10.0), head(10.0)]).unwrap();
    for seed in 0..5 {
        let out = sample_synthetic(&gen, &[60, 40], 100, seed).unwrap();
        let mut r = rng::seeded(seed);
        let expected: Vec<usize> = (0..100).map(|_| usize::from(r.gen_range(0..100usize) >= 60)).collect();
        let got: Vec<usize> = (0..100).map(|i| out.row(i)[0] as usize).collect();
        assert_eq!(got, expected);
        let ones = got.iter().sum::<usize>();
        assert!((25..=55).contains(&ones), "seed {seed}: {ones} rows from the 40% head");
    }
}

#[test]
fn probe_null_radius_and_untrained_point() {
    let ds = copycol(200, 9);
    let mut tr = Trainer::new(&ds, small_config(9)).unwrap();
    let untrained = tr.agents.clone();
    for _ in 0..10 {
        tr.train_epoch().unwrap();
    }
    let null = EquilibriumProbeConfig {
        gamma: 1e-12,
        trials: 16,
        ..EquilibriumProbeConfig::default()
    };
    let mut game = HydraGame::new(&tr.agents, &tr.data, &tr.config, &null).unwrap();
    let rep = equilibrium_probe(&mut game, &null).unwrap();
    assert!(rep.agents.iter().all(|a| a.pass_fraction == 1.0), "{rep:?}");
    assert!(rep.agents.iter().all(|a| a.deltas.len() == 16));

    let strict = EquilibriumProbeConfig {
        epsilon: 0.0,
        ..EquilibriumProbeConfig::default()
    };
    let mut game = HydraGame::new(&untrained, &tr.data, &tr.config, &strict).unwrap();
    let rep = equilibrium_probe(&mut game, &strict).unwrap();
    assert!(rep.min_pass_fraction() < 0.9, "{:?}", rep.agents.iter().map(|a| a.pass_fraction).collect::<Vec<_>>());
}
