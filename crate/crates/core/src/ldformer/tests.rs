use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::graph_forward;
use super::*;
use crate::autodiff::{Graph, ParamSet};
use crate::otfs::OtfsDims;
use crate::tensor::RealTensor;

/// S = 8, one block 2 → 1 channel, R = 4, D = 16.
fn tiny() -> LdformerConfig {
    LdformerConfig {
        dims: OtfsDims::new(4, 2).unwrap(),
        history_len: 2,
        max_positions: 3,
        channels: vec![1],
        latent_side: 4,
        trans_layers: 1,
        heads: 2,
        ffn_hidden: 8,
        batch: 2,
        ..LdformerConfig::desk()
    }
}

fn frames(n: usize, side: usize, rng: &mut ChaCha8Rng) -> Vec<RealTensor> {
    (0..n)
        .map(|_| {
            let data = (0..2 * side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
            RealTensor::new(vec![2, side, side], data).unwrap()
        })
        .collect()
}

fn stacked(f: &[RealTensor]) -> RealTensor {
    RealTensor::stack(&f.iter().collect::<Vec<_>>()).unwrap()
}

#[test]
fn encoder_only_count() {
    let cfg = LdformerConfig {
        channels: vec![4],
        kernel: 3,
        ..LdformerConfig::desk()
    };
    assert_eq!(cfg.param_breakdown().encoder, 4 * 2 * 9 + 4);
}

#[test]
fn desk_geometry() {
    let cfg = LdformerConfig::desk();
    cfg.validate().unwrap();
    assert_eq!(cfg.side(), 64);
    assert_eq!(cfg.latent_side, 64 / 8);
    assert_eq!(cfg.token_dim(), 256);
    let full = LdformerConfig::full_scale();
    full.validate().unwrap();
    assert_eq!(full.side(), 512);
    assert_eq!(full.token_dim(), 1024);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = LdformerConfig::desk();
    let cases = [
        LdformerConfig { latent_side: 16, ..base.clone() },
        LdformerConfig { kernel: 3, ..base.clone() },
        LdformerConfig { heads: 3, ..base.clone() },
        LdformerConfig { channels: vec![], ..base.clone() },
        LdformerConfig { max_positions: 5, ..base.clone() },
        LdformerConfig { batch: 0, ..base.clone() },
    ];
    for c in cases {
        assert!(c.validate().is_err(), "{c:?}");
        assert!(Ldformer::init(c).is_err());
    }
}

#[test]
fn count_matches_instantiated_params() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let blocks = rng.random_range(1..=3);
        let channels: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=3)).collect();
        let side = 16;
        let latent = side >> blocks;
        let d = channels[blocks - 1] * latent * latent;
        let heads = [1, 2, 4].into_iter().rfind(|h| d.is_multiple_of(*h)).unwrap();
        let cfg = LdformerConfig {
            dims: OtfsDims::new(8, 2).unwrap(),
            channels,
            latent_side: latent,
            trans_layers: rng.random_range(0..=2),
            heads,
            ffn_hidden: rng.random_range(1..=16),
            history_len: 3,
            max_positions: rng.random_range(3..=6),
            ..LdformerConfig::desk()
        };
        let m = Ldformer::init(cfg.clone()).unwrap();
        assert_eq!(m.parameter_count(), cfg.parameter_count());
    }
}

#[test]
fn zero_biased_encoder_maps_zero_to_zero() {
    let m = Ldformer::init(tiny()).unwrap();
    let x = RealTensor::zeros(&[2, 2, 8, 8]);
    let (features, skips) = m.encode(&x).unwrap();
    assert_eq!(features.shape(), &[2, 1, 4, 4]);
    assert!(features.data().iter().all(|&v| v == 0.0));
    assert_eq!(skips.len(), 2);
}

#[test]
fn weight_sharing_across_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = Ldformer::init(tiny()).unwrap();
    let f = frames(1, 8, &mut rng);
    let x = stacked(&[f[0].clone(), f[0].clone(), f[0].clone()]);
    let (features, _) = m.encode(&x).unwrap();
    let n = features.len() / 3;
    assert_eq!(features.data()[..n], features.data()[n..2 * n]);
    assert_eq!(features.data()[..n], features.data()[2 * n..]);
}

#[test]
fn graph_and_cached_paths_agree() {
    for pre_norm in [false, true] {
        graph_and_cached_agree(LdformerConfig { pre_norm, ..tiny() });
    }
}

fn graph_and_cached_agree(cfg: LdformerConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = Ldformer::init(cfg).unwrap();
    let f = frames(4, 8, &mut rng);
    let x = stacked(&f);
    let mut g = Graph::new();
    let bound = m.params().register(&mut g);
    let xv = g.constant(x.clone());
    let y = graph_forward(&mut g, &bound, m.config(), xv, 2, 2).unwrap();
    for b in 0..2 {
        let seq = stacked(&f[2 * b..2 * b + 2]);
        let direct = m.forward_sequence(&seq).unwrap();
        let n = direct.len();
        let diff = g.value(y).data()[b * n..(b + 1) * n]
            .iter()
            .zip(direct.data())
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
        let last = m.predict_one(&f[2 * b..2 * b + 2]).unwrap();
        assert_eq!(last.data(), &direct.data()[n / 2..]);
    }
}

#[test]
fn output_side_matches_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = Ldformer::init(LdformerConfig::desk()).unwrap();
    let f = frames(3, 64, &mut rng);
    let y = m.forward_sequence(&stacked(&f)).unwrap();
    assert_eq!(y.shape(), &[3, 2, 64, 64]);
    let p = m.predict_one(&f).unwrap();
    assert_eq!(p.shape(), &[2, 64, 64]);
    assert_eq!(p, m.predict_one(&f).unwrap());
}

#[test]
fn causal_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (j, pre_norm) in [(1, false), (2, false), (1, true), (2, true)] {
        let cfg = LdformerConfig {
            history_len: 3,
            max_positions: 3,
            pre_norm,
            ..tiny()
        };
        let m = Ldformer::init(cfg).unwrap();
        let f = frames(3, 8, &mut rng);
        let mut g = f.clone();
        g[j] = frames(1, 8, &mut rng).remove(0);
        let (a, b) = (m.forward_sequence(&stacked(&f)).unwrap(), m.forward_sequence(&stacked(&g)).unwrap());
        let n = a.len() / 3;
        assert_eq!(a.data()[..j * n], b.data()[..j * n]);
        assert_ne!(a.data()[j * n..], b.data()[j * n..]);
    }
}

#[test]
fn single_step_sequence_and_identical_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let m = Ldformer::init(tiny()).unwrap();
    let f = frames(1, 8, &mut rng);
    assert_eq!(m.predict_one(&f).unwrap().shape(), &[2, 8, 8]);

    let mut m = m;
    m.params_mut().get_mut("pe").unwrap().data_mut().fill(0.0);
    let y = m.forward_sequence(&stacked(&[f[0].clone(), f[0].clone()])).unwrap();
    let n = y.len() / 2;
    let diff = y.data()[..n].iter().zip(&y.data()[n..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn skip_ablation_changes_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = Ldformer::init(tiny()).unwrap();
    let no_skip = Ldformer::from_params(
        LdformerConfig { skips: false, ..tiny() },
        m.params().clone(),
    )
    .unwrap();
    let f = frames(2, 8, &mut rng);
    let (a, b) = (m.predict_one(&f).unwrap(), no_skip.predict_one(&f).unwrap());
    assert!(a.max_abs_diff(&b) > 1e-3);
}

#[test]
fn full_stack_gradient_check() {
    for pre_norm in [false, true] {
        full_stack_fd(LdformerConfig { pre_norm, ..tiny() });
    }
}

fn full_stack_fd(cfg: LdformerConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = Ldformer::init(cfg).unwrap();
    let f = frames(3, 8, &mut rng);
    let x = stacked(&f[..2]);
    let y = stacked(&f[1..]);
    let loss_of = |p: &ParamSet| {
        let mut g = Graph::new();
        let bound = p.register(&mut g);
        let xv = g.constant(x.clone());
        let out = graph_forward(&mut g, &bound, m.config(), xv, 1, 2).unwrap();
        let yv = g.constant(y.clone());
        let l = g.mse_loss(out, yv).unwrap();
        let l = g.scale(l, 256.0);
        (g, bound, l)
    };
    let (mut g, bound, l) = loss_of(m.params());
    g.backward(l).unwrap();
    let grads = bound.grads(&g);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, name) in m.params().names().iter().enumerate() {
        for j in 0..m.params().tensors()[i].len() {
            let mut p = m.params().clone();
            p.get_mut(name).unwrap().data_mut()[j] += eps;
            let (gp, _, lp) = loss_of(&p);
            p.get_mut(name).unwrap().data_mut()[j] -= 2.0 * eps;
            let (gm, _, lm) = loss_of(&p);
            let numeric = (gp.value(lp).data()[0] - gm.value(lm).data()[0]) / (2.0 * eps);
            let a = grads[i].data()[j];
            // The loss is O(100), so central differences carry ~1e-8 of
            // rounding noise; the floor keeps near-zero entries meaningful.
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst} (pre_norm {})", m.config().pre_norm);
}

#[test]
fn predict_multi_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = Ldformer::init(tiny()).unwrap();
    let f = frames(2, 8, &mut rng);
    assert!(m.predict_multi(&f, 0).is_err());
    let one = m.predict_multi(&f, 1).unwrap();
    assert_eq!(one, vec![m.predict_one(&f).unwrap()]);
    let three = m.predict_multi(&f, 3).unwrap();
    assert_eq!(three[0], one[0]);
    let second = m.predict_one(&[f[1].clone(), three[0].clone()]).unwrap();
    assert_eq!(three[1], second);
}

#[test]
fn sequences_longer_than_table_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let m = Ldformer::init(tiny()).unwrap();
    assert!(m.predict_one(&frames(4, 8, &mut rng)).is_err());
    assert!(m.predict_one(&frames(1, 4, &mut rng)).is_err());
}

#[test]
fn from_params_checks_layout() {
    let m = Ldformer::init(tiny()).unwrap();
    let mut p = m.params().clone();
    p.remove("pe");
    assert!(Ldformer::from_params(tiny(), p).is_err());
    let mut p = m.params().clone();
    p.push("extra", RealTensor::scalar(1.0)).unwrap();
    assert!(Ldformer::from_params(tiny(), p).is_err());
    assert!(Ldformer::from_params(tiny(), m.params().clone()).is_ok());
}

#[test]
fn training_reduces_loss_and_keeps_best() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = LdformerConfig {
        max_epochs: 6,
        patience: 2,
        ..tiny()
    };
    let f = frames(20, 8, &mut rng);
    let windows: Vec<_> = (2..20)
        .map(|t| crate::dataset::SampleWindow { t_index: t, history_len: 2, horizon: 1 })
        .collect();
    let (model, report) = train_windows(&f, &windows[..14], &windows[14..], Ldformer::init(cfg).unwrap(), |_| {}).unwrap();
    assert!(report.stopped_epoch <= 6);
    assert_eq!(report.val_loss.len(), report.stopped_epoch);
    let min = report.val_loss.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(report.best_val, min);
    assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);
    let again = super::train::dense_loss(&model, &f, &windows[14..]).unwrap();
    assert!((again - report.best_val).abs() < 1e-12);
}

#[test]
fn nan_data_aborts_with_location() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut f = frames(6, 8, &mut rng);
    let huge = 1e300;
    f[3].data_mut()[0] = huge;
    let windows: Vec<_> = (2..6)
        .map(|t| crate::dataset::SampleWindow { t_index: t, history_len: 2, horizon: 1 })
        .collect();
    let err = train_windows(&f, &windows, &[], Ldformer::init(tiny()).unwrap(), |_| {}).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("epoch 1") && msg.contains("batch"), "{msg}");
}
