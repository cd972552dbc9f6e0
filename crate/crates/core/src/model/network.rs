//! The full network: example resolution, forward pass with trace, and backward pass.

use std::collections::HashMap;

use super::layers::{
    align, align_backward, backbone_backward, backbone_forward, fuse_resolutions, fusion_backward, gate_backward,
    gate_forward, mix, AlignTrace, BackboneTrace, FusionTrace, GateTrace, RESOLUTIONS,
};
use super::loss::bce_with_logit;
use super::params::{DenseParams, GateFeatures, ModelParams, ParamGroup};
use crate::data::{Example, Item, ItemKey, ItemStats};
use crate::embedding::RowGrads;
use crate::sid::Resolution;

/// Table rows and gate input of one item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemFeatures {
    pub key: ItemKey,
    pub sid_rows: [usize; RESOLUTIONS],
    pub hid_row: usize,
    pub gate: GateFeatures,
}

/// An [`Example`] with every key mapped onto table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExample {
    pub user_row: usize,
    pub target: ItemFeatures,
    pub history: Vec<ItemFeatures>,
    pub label: u8,
}

/// Maps item keys onto [`ItemFeatures`] for a given catalog, statistics snapshot and
/// parameter set. Unknown items fall back to the OOV semantic rows, their hashed
/// bucket and all-zero statistics.
#[derive(Debug, Clone)]
pub struct FeatureIndex {
    items: HashMap<ItemKey, ItemFeatures>,
    oov_rows: [usize; RESOLUTIONS],
    zero_gate: GateFeatures,
    hid_buckets: usize,
}

impl FeatureIndex {
    pub fn build(catalog: &[Item], stats: &ItemStats, params: &ModelParams) -> Self {
        let vocab = &params.sid.vocab;
        let items = catalog
            .iter()
            .map(|it| {
                let sid_rows = it.sids.as_ref().map_or_else(|| vocab.oov_rows(), |s| vocab.rows_for(s));
                let f = ItemFeatures {
                    key: it.item_key,
                    sid_rows,
                    hid_row: params.hid.row_for(it.item_key),
                    gate: GateFeatures::new(stats.get(it.item_key), &params.normalizer),
                };
                (it.item_key, f)
            })
            .collect();
        Self {
            items,
            oov_rows: vocab.oov_rows(),
            zero_gate: GateFeatures::new(Default::default(), &params.normalizer),
            hid_buckets: params.hid.num_buckets(),
        }
    }

    pub fn item(&self, key: ItemKey) -> ItemFeatures {
        self.items.get(&key).copied().unwrap_or(ItemFeatures {
            key,
            sid_rows: self.oov_rows,
            hid_row: crate::embedding::hash_hid(key, self.hid_buckets),
            gate: self.zero_gate,
        })
    }

    pub fn contains(&self, key: ItemKey) -> bool {
        self.items.contains_key(&key)
    }

    pub fn resolve(&self, ex: &Example, params: &ModelParams) -> ResolvedExample {
        ResolvedExample {
            user_row: params.user_row(ex.user_key),
            target: self.item(ex.target),
            history: ex.history.iter().map(|&k| self.item(k)).collect(),
            label: ex.label,
        }
    }

    pub fn resolve_all(&self, log: &[Example], params: &ModelParams) -> Vec<ResolvedExample> {
        log.iter().map(|ex| self.resolve(ex, params)).collect()
    }
}

/// Semantic representation of one item as computed in the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSidTrace {
    pub rows: [usize; RESOLUTIONS],
    /// `None` when multi-resolution fusion is disabled (`e_sid` is the raw `s3` row).
    pub fusion: Option<FusionTrace>,
    pub e_sid: Vec<f64>,
}

/// Everything the forward pass computed for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub prob: f64,
    pub logit: f64,
    pub loss: f64,
    /// Weight on the HID embedding.
    pub g: f64,
    pub gate: Option<GateTrace>,
    pub target_sid: Option<ItemSidTrace>,
    pub history_sid: Vec<ItemSidTrace>,
    pub align: Option<AlignTrace>,
    pub e_hid: Vec<f64>,
    pub e_shid: Vec<f64>,
    pub backbone: BackboneTrace,
}

impl Trace {
    /// Attention weights over `{s1, s2, s3, s12, s23}` for the target.
    pub fn fusion_weights(&self) -> Option<[f64; RESOLUTIONS]> {
        self.target_sid.as_ref().and_then(|t| t.fusion.as_ref()).map(|f| f.weights)
    }
}

/// Gradients of the loss w.r.t. every parameter group. Table gradients are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dense: DenseParams,
    pub hid: RowGrads,
    pub sid: RowGrads,
    pub user: RowGrads,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            dense: DenseParams::zeros(&params.config).expect("config was validated"),
            hid: RowGrads::new(params.config.embed_dim),
            sid: RowGrads::new(params.config.embed_dim),
            user: RowGrads::new(params.config.user_dim),
        }
    }

    pub fn rows(&self, group: ParamGroup) -> Option<&RowGrads> {
        match group {
            ParamGroup::HidTable => Some(&self.hid),
            ParamGroup::SidTable => Some(&self.sid),
            ParamGroup::UserTable => Some(&self.user),
            _ => None,
        }
    }

    pub fn rows_mut(&mut self, group: ParamGroup) -> Option<&mut RowGrads> {
        match group {
            ParamGroup::HidTable => Some(&mut self.hid),
            ParamGroup::SidTable => Some(&mut self.sid),
            ParamGroup::UserTable => Some(&mut self.user),
            _ => None,
        }
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for (_, _, t) in self.dense.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
        for rows in [&mut self.hid, &mut self.sid, &mut self.user] {
            for (_, g) in rows.iter_mut() {
                g.iter_mut().for_each(|x| *x *= factor);
            }
        }
    }

    pub fn clear(&mut self) {
        for (_, _, t) in self.dense.tensors_mut() {
            t.fill(0.0);
        }
        self.hid.clear();
        self.sid.clear();
        self.user.clear();
    }

    /// Whether any entry of `group` is non-zero.
    pub fn touches(&self, group: ParamGroup) -> bool {
        match self.rows(group) {
            Some(rows) => rows.iter().any(|(_, g)| g.iter().any(|&x| x != 0.0)),
            None => self.dense.tensors().iter().any(|(grp, _, t)| *grp == group && t.iter().any(|&x| x != 0.0)),
        }
    }
}

impl ModelParams {
    fn item_sid(&self, rows: [usize; RESOLUTIONS]) -> ItemSidTrace {
        let table = &self.sid.table;
        if self.flags.use_multires {
            let embeds: Vec<&[f64]> = rows.iter().map(|&r| table.row(r)).collect();
            let fusion = fuse_resolutions(&embeds, &self.dense.fusion).expect("table rows match fusion dim");
            ItemSidTrace { rows, e_sid: fusion.fused.clone(), fusion: Some(fusion) }
        } else {
            ItemSidTrace { rows, fusion: None, e_sid: table.row(rows[Resolution::S3.index()]).to_vec() }
        }
    }

    /// Forward pass. Disabled components behave as follows: without multi-resolution
    /// fusion `e_sid` is the raw `s3` embedding; without the gate `g = 0.5`; without
    /// alignment the alignment features are zeros; `hid_only` uses `g = 1` and no
    /// semantic path at all.
    pub fn forward(&self, ex: &ResolvedExample) -> Trace {
        let flags = self.flags;
        let e_hid = self.hid.table.row(ex.target.hid_row).to_vec();
        let target_sid = flags.uses_sid().then(|| self.item_sid(ex.target.sid_rows));

        let gate = flags.gate_active().then(|| gate_forward(&ex.target.gate.normalized, &self.dense.gate));
        let g = match (&gate, flags.hid_only) {
            (_, true) => 1.0,
            (Some(t), _) => t.g,
            (None, _) => 0.5,
        };
        let e_shid = match &target_sid {
            Some(t) => mix(&e_hid, &t.e_sid, g),
            None => e_hid.clone(),
        };

        let (history_sid, align_trace) = match &target_sid {
            Some(t) if flags.alignment_active() => {
                let hist: Vec<ItemSidTrace> = ex.history.iter().map(|h| self.item_sid(h.sid_rows)).collect();
                let refs: Vec<&[f64]> = hist.iter().map(|h| h.e_sid.as_slice()).collect();
                let a = align(&t.e_sid, &refs, &self.dense.autodis);
                (hist, Some(a))
            }
            _ => (Vec::new(), None),
        };

        let cfg = &self.config;
        let mut input = Vec::with_capacity(cfg.backbone_input());
        input.extend_from_slice(&e_shid);
        input.extend_from_slice(self.user.row(ex.user_row));
        match &align_trace {
            Some(a) => input.extend_from_slice(&a.features),
            None => input.resize(cfg.backbone_input(), 0.0),
        }
        let backbone = backbone_forward(input, &self.dense.backbone);
        let logit = backbone.logit;
        Trace {
            prob: crate::linalg::sigmoid(logit),
            logit,
            loss: bce_with_logit(logit, ex.label),
            g,
            gate,
            target_sid,
            history_sid,
            align: align_trace,
            e_hid,
            e_shid,
            backbone,
        }
    }

    pub fn predict(&self, ex: &ResolvedExample) -> f64 {
        self.forward(ex).prob
    }

    /// Gate value of an item from its statistics, or `None` when the gate is off.
    pub fn item_gate(&self, gate: &GateFeatures) -> Option<f64> {
        self.flags.gate_active().then(|| gate_forward(&gate.normalized, &self.dense.gate).g)
    }

    /// Exact gradients of the per-example log loss.
    pub fn backward(&self, ex: &ResolvedExample, trace: &Trace) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        self.accumulate_gradients(ex, trace, 1.0, &mut grads);
        grads
    }

    /// Adds `scale` times the gradient of this example's loss into `grads`.
    pub fn accumulate_gradients(&self, ex: &ResolvedExample, trace: &Trace, scale: f64, grads: &mut Gradients) {
        let cfg = &self.config;
        let d_logit = scale * (trace.prob - f64::from(ex.label));
        let d_input = backbone_backward(&trace.backbone, &self.dense.backbone, d_logit, &mut grads.dense.backbone);
        let (d_shid, rest) = d_input.split_at(cfg.embed_dim);
        let (d_user, d_align) = rest.split_at(cfg.user_dim);
        grads.user.accumulate(ex.user_row, 1.0, d_user);

        let g = trace.g;
        grads.hid.accumulate(ex.target.hid_row, g, d_shid);
        let Some(target) = &trace.target_sid else {
            return;
        };
        let mut d_target: Vec<f64> = d_shid.iter().map(|d| (1.0 - g) * d).collect();
        if let Some(gt) = &trace.gate {
            let d_g: f64 = d_shid.iter().zip(trace.e_hid.iter().zip(&target.e_sid)).map(|(d, (h, s))| d * (h - s)).sum();
            gate_backward(gt, &self.dense.gate, d_g, &mut grads.dense.gate);
        }

        if let Some(at) = &trace.align {
            let refs: Vec<&[f64]> = trace.history_sid.iter().map(|h| h.e_sid.as_slice()).collect();
            let mut d_hist = vec![vec![0.0; cfg.embed_dim]; refs.len()];
            align_backward(
                &target.e_sid,
                &refs,
                at,
                &self.dense.autodis,
                d_align,
                &mut grads.dense.autodis,
                &mut d_target,
                &mut d_hist,
            );
            for (h, d) in trace.history_sid.iter().zip(&d_hist) {
                self.item_sid_backward(h, d, grads);
            }
        }
        self.item_sid_backward(target, &d_target, grads);
    }

    fn item_sid_backward(&self, item: &ItemSidTrace, d_sid: &[f64], grads: &mut Gradients) {
        let table = &self.sid.table;
        match &item.fusion {
            Some(ft) => {
                let embeds: Vec<&[f64]> = item.rows.iter().map(|&r| table.row(r)).collect();
                let mut d_embeds = vec![vec![0.0; self.config.embed_dim]; RESOLUTIONS];
                fusion_backward(&embeds, ft, &self.dense.fusion, d_sid, &mut grads.dense.fusion, &mut d_embeds);
                for (&row, d) in item.rows.iter().zip(&d_embeds) {
                    grads.sid.accumulate(row, 1.0, d);
                }
            }
            None => grads.sid.accumulate(item.rows[Resolution::S3.index()], 1.0, d_sid),
        }
    }

    /// Loss of one example.
    pub fn loss(&self, ex: &ResolvedExample) -> f64 {
        self.forward(ex).loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ItemCounts;
    use crate::model::fixture::fixture;
    use crate::model::params::AblationFlags;

    #[test]
    fn zero_params_predict_one_half() {
        let (p, idx, ex) = fixture(AblationFlags::default(), true);
        assert_eq!(p.forward(&idx.resolve(&ex, &p)).prob, 0.5);
    }

    #[test]
    fn disabled_gate_is_exactly_one_half() {
        let flags = AblationFlags { use_gate: false, ..Default::default() };
        let (p, idx, ex) = fixture(flags, false);
        let t = p.forward(&idx.resolve(&ex, &p));
        assert_eq!(t.g, 0.5);
        assert!(t.gate.is_none());
    }

    #[test]
    fn unknown_items_use_oov_rows() {
        let (p, idx, _) = fixture(AblationFlags::default(), false);
        let f = idx.item(ItemKey(99));
        assert_eq!(f.sid_rows, p.sid.vocab.oov_rows());
        assert_eq!(f.gate.counts, ItemCounts::default());
    }

    #[test]
    fn untouched_rows_have_no_gradient() {
        let (p, idx, ex) = fixture(AblationFlags::default(), false);
        let r = idx.resolve(&ex, &p);
        let g = p.backward(&r, &p.forward(&r));
        let used: std::collections::HashSet<usize> =
            std::iter::once(&r.target).chain(&r.history).flat_map(|f| f.sid_rows).collect();
        for (row, _) in g.sid.iter() {
            assert!(used.contains(&row));
        }
        assert_eq!(g.user.touched().collect::<Vec<_>>(), vec![r.user_row]);
        assert_eq!(g.hid.touched().collect::<Vec<_>>(), vec![r.target.hid_row]);
    }

    #[test]
    fn no_alignment_means_no_autodis_gradient() {
        let flags = AblationFlags { use_alignment: false, ..Default::default() };
        let (p, idx, ex) = fixture(flags, false);
        let r = idx.resolve(&ex, &p);
        let g = p.backward(&r, &p.forward(&r));
        assert!(!g.touches(ParamGroup::AutoDis));
        assert!(g.touches(ParamGroup::Fusion));
    }

    #[test]
    fn ablations_shrink_the_dependency_set() {
        let full = AblationFlags::default();
        let off = AblationFlags { use_multires: false, use_gate: false, use_alignment: false, hid_only: false };
        let (p, idx, ex) = fixture(full, false);
        let r = idx.resolve(&ex, &p);
        let g_full = p.backward(&r, &p.forward(&r));
        let (p_off, idx_off, _) = fixture(off, false);
        let r_off = idx_off.resolve(&ex, &p_off);
        let g_off = p_off.backward(&r_off, &p_off.forward(&r_off));
        let count = |g: &Gradients| ParamGroup::ALL.iter().filter(|&&grp| g.touches(grp)).count();
        assert!(count(&g_off) < count(&g_full));
        for grp in [ParamGroup::Fusion, ParamGroup::Gate, ParamGroup::AutoDis] {
            assert!(!g_off.touches(grp), "{grp:?}");
        }
        // only the target's s3 row is used
        assert_eq!(g_off.sid.touched().collect::<Vec<_>>(), vec![r_off.target.sid_rows[2]]);
    }

    #[test]
    fn hid_only_ignores_semantic_tables() {
        let flags = AblationFlags { hid_only: true, ..Default::default() };
        let (p, idx, ex) = fixture(flags, false);
        let r = idx.resolve(&ex, &p);
        let t = p.forward(&r);
        assert_eq!(t.g, 1.0);
        assert_eq!(t.e_shid, t.e_hid);
        let g = p.backward(&r, &t);
        assert!(g.sid.is_empty());
    }
}
