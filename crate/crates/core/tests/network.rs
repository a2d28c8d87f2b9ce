//! Whole-network contracts: the configuration space, shape bookkeeping and
//! end-to-end gradients.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strokeseg_autograd::{Backend, ConvGeom, Dims, Eval, PoolKind, Tensor};
use strokeseg_core::gradcheck::{check_network_gradients, tiny_config};
use strokeseg_core::network::blocks::res_block;
use strokeseg_core::network::{build_network, forward, forward_graph, Mode, NetworkWeights};
use strokeseg_core::{AttentionKind, BlockKind, LossConfig, NetworkConfig};

/// Evaluates like [`Eval`] while logging the shape of every produced value.
struct Recorder<'a> {
    inner: Eval<'a>,
    shapes: Vec<Dims>,
}

impl<'a> Recorder<'a> {
    fn log(&mut self, t: Cow<'a, Tensor>) -> Cow<'a, Tensor> {
        self.shapes.push(t.dims());
        t
    }
}

type R<'a> = strokeseg_autograd::Result<Cow<'a, Tensor>>;

impl<'a> Backend for Recorder<'a> {
    type T = Cow<'a, Tensor>;
    fn param(&mut self, name: &str) -> R<'a> {
        self.inner.param(name)
    }
    fn input(&mut self, t: Tensor) -> Self::T {
        self.inner.input(t)
    }
    fn value<'v>(&'v self, v: &'v Self::T) -> &'v Tensor {
        v
    }
    fn conv3d(&mut self, x: &Self::T, w: &Self::T, b: Option<&Self::T>, g: ConvGeom) -> R<'a> {
        let y = self.inner.conv3d(x, w, b, g)?;
        Ok(self.log(y))
    }
    fn group_norm(&mut self, x: &Self::T, g: &Self::T, b: &Self::T, groups: usize) -> R<'a> {
        let y = self.inner.group_norm(x, g, b, groups)?;
        Ok(self.log(y))
    }
    fn leaky_relu(&mut self, x: &Self::T, s: f64) -> Self::T {
        let y = self.inner.leaky_relu(x, s);
        self.log(y)
    }
    fn sigmoid(&mut self, x: &Self::T) -> Self::T {
        let y = self.inner.sigmoid(x);
        self.log(y)
    }
    fn max_pool(&mut self, x: &Self::T, w: [usize; 3]) -> R<'a> {
        let y = self.inner.max_pool(x, w)?;
        Ok(self.log(y))
    }
    fn resize(&mut self, x: &Self::T, t: [usize; 3]) -> Self::T {
        let y = self.inner.resize(x, t);
        self.log(y)
    }
    fn concat(&mut self, parts: &[&Self::T]) -> R<'a> {
        let y = self.inner.concat(parts)?;
        Ok(self.log(y))
    }
    fn add(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        let y = self.inner.add(a, b)?;
        Ok(self.log(y))
    }
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> R<'a> {
        let y = self.inner.mul(a, b)?;
        Ok(self.log(y))
    }
    fn global_pool(&mut self, x: &Self::T, k: PoolKind) -> Self::T {
        let y = self.inner.global_pool(x, k);
        self.log(y)
    }
    fn channel_pool(&mut self, x: &Self::T, k: PoolKind) -> Self::T {
        let y = self.inner.channel_pool(x, k);
        self.log(y)
    }
}

fn random_input(sp: [usize; 3], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Dims::new(1, 2, sp);
    Tensor::new(d, (0..d.numel()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn all_configs() -> Vec<NetworkConfig> {
    let mut v = Vec::new();
    for block in [BlockKind::StdUNet, BlockKind::ResUNet] {
        for att in AttentionKind::ALL {
            for ds in [false, true] {
                v.push(NetworkConfig::desk(block, att, ds));
            }
        }
    }
    v
}

#[test]
fn every_configuration_keeps_the_shape_contract() {
    let sp = [13, 11, 3];
    let x = random_input(sp, 1);
    for cfg in all_configs() {
        let w = build_network(&cfg, 7).unwrap();
        let out = forward(&w, &x, Mode::Eval).unwrap();
        assert_eq!(out.outputs.len(), cfg.head_count());
        for o in &out.outputs {
            assert_eq!(o.dims(), Dims::new(1, 1, sp));
            assert!(o.data().iter().all(|p| *p > 0.0 && *p < 1.0), "{cfg:?}");
        }
        let mut rec = Recorder { inner: Eval::new(&w), shapes: Vec::new() };
        forward_graph(&mut rec, &cfg, x.clone(), None).unwrap();
        let spatial: Vec<_> = rec.shapes.iter().filter(|d| d.spatial() > 1).collect();
        assert!(spatial.iter().all(|d| d.sp[2] == sp[2]), "{cfg:?}: IS extent changed");
        // the coarsest features are the input downsampled five times
        assert!(rec.shapes.iter().any(|d| d.sp == [1, 1, 3]));
    }
}

#[test]
fn scale_channel_and_gate_coefficients_are_well_formed() {
    let x = random_input([10, 8, 2], 2);
    for att in [AttentionKind::AGs, AttentionKind::SeAGs, AttentionKind::AGh] {
        let w = build_network(&NetworkConfig::desk(BlockKind::ResUNet, att, false), 3).unwrap();
        let maps = forward(&w, &x, Mode::Eval).unwrap().attention_maps;
        assert_eq!(maps.len(), 5);
        for m in maps.values() {
            assert!(m.data().iter().all(|v| *v > 0.0 && *v < 1.0));
            if att != AttentionKind::AGh {
                assert_eq!(m.dims().c, 1);
            }
        }
    }
}

#[test]
fn every_residual_block_degenerates_to_its_projection() {
    let cfg = NetworkConfig::desk(BlockKind::ResUNet, AttentionKind::None, false);
    let mut w = build_network(&cfg, 9).unwrap();
    for (k, t) in w.params.iter_mut() {
        if k.contains("/conv1/") || k.contains("/conv2/") {
            *t = Tensor::zeros(t.dims());
        }
    }
    let w = NetworkWeights::from_params(cfg.clone(), w.params).unwrap();
    let mut names: Vec<String> = (1..=5).map(|i| format!("enc{i}")).collect();
    names.push("bot".into());
    names.extend((1..=5).map(|i| format!("dec{i}")));
    for name in names {
        let proj = &w.params[&format!("{name}/proj/w")];
        let cin = proj.dims().c;
        let first = name == "enc1";
        let stride = if first || name.starts_with("dec") { [1, 1, 1] } else { [2, 2, 1] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Dims::new(1, cin, [6, 5, 2]);
        let x = Tensor::new(d, (0..d.numel()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut e = Eval::new(&w);
        let xv = e.input(x.clone());
        let got = res_block(&mut e, &xv, &name, cfg.gn_groups, first, stride, None).unwrap().into_owned();
        let p = e.param(&format!("{name}/proj/w")).unwrap();
        let b = e.param(&format!("{name}/proj/b")).unwrap();
        let expected = e.conv3d(&xv, &p, Some(&b), ConvGeom::valid(stride)).unwrap();
        assert_eq!(&got, expected.as_ref(), "{name}");
    }
}

fn gradient_check(cfg: NetworkConfig, seed: u64) {
    let w = build_network(&cfg, seed).unwrap();
    let x = random_input([16, 16, 4], seed + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let yd = Dims::new(1, 1, [16, 16, 4]);
    let y = Tensor::new(yd, (0..yd.numel()).map(|_| if rng.random_bool(0.2) { 1.0 } else { 0.0 }).collect()).unwrap();
    let report = check_network_gradients(&w, &x, &y, &LossConfig::default(), 1e-3, 1e-7, 1e-3).unwrap();
    eprintln!("{:?}/{:?}: {report:?}", cfg.block, cfg.attention);
    assert!(report.passed(), "{:?}", report.failures);
    assert_eq!(report.checked + report.refined, w.param_count());
}

fn tiny(block: BlockKind, attention: AttentionKind) -> NetworkConfig {
    tiny_config(&NetworkConfig::desk(block, attention, true))
}
#[test]
fn std_unet_gradients_match_finite_differences() {
    gradient_check(tiny(BlockKind::StdUNet, AttentionKind::SeAGs), 20);
}

#[test]
fn res_unet_gradients_match_finite_differences() {
    gradient_check(tiny(BlockKind::ResUNet, AttentionKind::CBAM), 30);
}

#[test]
fn hybrid_gate_gradients_match_finite_differences() {
    gradient_check(tiny(BlockKind::StdUNet, AttentionKind::AGh), 40);
}
