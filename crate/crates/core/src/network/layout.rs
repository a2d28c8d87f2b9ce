//! The parameter inventory of a configuration: every tensor name, its shape
//! and how it is initialised, in a fixed order.

use strokeseg_autograd::Dims;

use super::blocks::{CBAM_KERNEL, RES_KERNEL, STD_KERNEL};
use crate::config::{AttentionKind, BlockKind, NetworkConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `sqrt(2 / fan_in)`, for convolutions
    /// feeding a rectifier.
    Kaiming,
    /// Normal with standard deviation `sqrt(1 / fan_in)`, for convolutions
    /// whose output is used linearly (projections, logits).
    FanIn,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Dims,
    pub init: Init,
}

#[derive(Default)]
struct Inventory(Vec<ParamSpec>);

impl Inventory {
    fn push(&mut self, name: String, dims: Dims, init: Init) {
        self.0.push(ParamSpec { name, dims, init });
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: [usize; 3], bias: bool) {
        let linear = ["proj", "psi", "fc2", "spatial"].iter().any(|s| name.ends_with(s)) || name.starts_with("head");
        self.push(format!("{name}/w"), Dims::new(cout, cin, k), if linear { Init::FanIn } else { Init::Kaiming });
        if bias {
            self.push(format!("{name}/b"), Dims::vector(cout), Init::Zeros);
        }
    }

    fn gn(&mut self, name: &str, c: usize) {
        self.push(format!("{name}/gamma"), Dims::vector(c), Init::Ones);
        self.push(format!("{name}/beta"), Dims::vector(c), Init::Zeros);
    }

    fn std_block(&mut self, p: &str, cin: usize, cout: usize) {
        self.conv(&format!("{p}/conv1"), cin, cout, STD_KERNEL, true);
        self.gn(&format!("{p}/gn1"), cout);
        self.conv(&format!("{p}/conv2"), cout, cout, STD_KERNEL, true);
        self.gn(&format!("{p}/gn2"), cout);
    }

    fn res_block(&mut self, p: &str, cin: usize, cout: usize, first: bool, down: bool) {
        if first {
            self.conv(&format!("{p}/conv1"), cin, cout, RES_KERNEL, true);
            self.gn(&format!("{p}/gn1"), cout);
        } else {
            self.gn(&format!("{p}/gn1"), cin);
            self.conv(&format!("{p}/conv1"), cin, cout, if down { STD_KERNEL } else { RES_KERNEL }, true);
            self.gn(&format!("{p}/gn2"), cout);
        }
        self.conv(&format!("{p}/conv2"), cout, cout, RES_KERNEL, true);
        self.conv(&format!("{p}/proj"), cin, cout, [1, 1, 1], true);
    }

    fn mlp(&mut self, p: &str, c: usize, r: usize) {
        let hidden = (c / r).max(1);
        self.conv(&format!("{p}/fc1"), c, hidden, [1, 1, 1], true);
        self.conv(&format!("{p}/fc2"), hidden, c, [1, 1, 1], true);
    }
}

/// Channel width of encoder level `i` (1-based); level 6 is the bottleneck.
pub fn width(cfg: &NetworkConfig, level: usize) -> usize {
    if level == 6 {
        cfg.bottleneck_filters
    } else {
        cfg.encoder_filters[level - 1]
    }
}

pub fn gate_channels(cfg: &NetworkConfig, level: usize) -> usize {
    (width(cfg, level) / cfg.ag_reduction).max(1)
}

/// Parameters in the order they are created (and randomly initialised).
pub fn param_specs(cfg: &NetworkConfig) -> Vec<ParamSpec> {
    let mut inv = Inventory::default();
    let block = |inv: &mut Inventory, p: &str, cin: usize, cout: usize, first: bool, down: bool| match cfg.block {
        BlockKind::StdUNet => inv.std_block(p, cin, cout),
        BlockKind::ResUNet => inv.res_block(p, cin, cout, first, down),
    };
    let mut cin = 2;
    for i in 1..=5 {
        let c = width(cfg, i);
        let p = format!("enc{i}");
        block(&mut inv, &p, cin, c, i == 1, i > 1);
        if cfg.attention == AttentionKind::CBAM {
            inv.mlp(&format!("{p}/cbam"), c, cfg.se_reduction);
            inv.conv(&format!("{p}/cbam/spatial"), 2, 1, CBAM_KERNEL, true);
        }
        if cfg.attention.has_se() {
            inv.mlp(&format!("{p}/se"), c, cfg.se_reduction);
        }
        cin = c;
    }
    block(&mut inv, "bot", cin, width(cfg, 6), false, true);
    for i in (1..=5).rev() {
        let (ce, cg) = (width(cfg, i), width(cfg, i + 1));
        if cfg.attention.has_gate() {
            let inter = gate_channels(cfg, i);
            let p = format!("att{i}");
            inv.conv(&format!("{p}/theta"), ce, inter, [2, 2, 1], false);
            inv.conv(&format!("{p}/phi"), cg, inter, [1, 1, 1], true);
            inv.conv(&format!("{p}/psi"), inter, if cfg.attention.hybrid_gate() { ce } else { 1 }, [1, 1, 1], true);
        }
        block(&mut inv, &format!("dec{i}"), cg + ce, ce, false, false);
    }
    for k in 1..=6 {
        if cfg.deep_supervision || k == 6 {
            // head1 reads the bottleneck, head6 the finest decoder level
            inv.conv(&format!("head{k}"), width(cfg, 7 - k), 1, [1, 1, 1], true);
        }
    }
    inv.0
}
