use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autodiff::{Graph, NodeId};
use super::tensor::{Gradients, ParamSet, Real, Tensor};
use crate::error::{Error, Result};
use crate::textpipe::{BOS, EOS};

/// Architecture name recorded in checkpoints.
pub const ARCH_KIND: &str = "bigru-luong-dot";

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.08;

/// Shape of the encoder-decoder.
///
/// Only one recurrent layer and one attention head are implemented; the
/// fields exist so checkpoints describe the model completely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

impl Arch {
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> Self {
        Arch {
            emb_dim: 64,
            hidden_dim: 128,
            layers: 1,
            heads: 1,
            src_vocab,
            tgt_vocab,
        }
    }

    pub fn with_dims(mut self, emb_dim: usize, hidden_dim: usize) -> Self {
        self.emb_dim = emb_dim;
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("architecture: {what}")));
        if self.emb_dim == 0 || self.hidden_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.layers != 1 || self.heads != 1 {
            return bad("only one layer and one attention head are supported");
        }
        if self.src_vocab < 5 || self.tgt_vocab < 5 {
            return bad("vocabularies need at least one non-reserved entry");
        }
        Ok(())
    }

    /// Parameter names and shapes, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (e, h) = (self.emb_dim, self.hidden_dim);
        let mut out: Vec<(String, Vec<usize>)> = vec![
            ("src_emb".into(), vec![self.src_vocab, e]),
            ("tgt_emb".into(), vec![self.tgt_vocab, e]),
        ];
        let mut gru = |prefix: &str, input: usize| {
            out.push((format!("{prefix}.w_ih"), vec![3 * h, input]));
            out.push((format!("{prefix}.w_hh"), vec![3 * h, h]));
            out.push((format!("{prefix}.b_ih"), vec![3 * h]));
            out.push((format!("{prefix}.b_hh"), vec![3 * h]));
        };
        gru("enc_fwd", e);
        gru("enc_bwd", e);
        gru("dec", e + h);
        out.push(("bridge.w".into(), vec![h, 2 * h]));
        out.push(("bridge.b".into(), vec![h]));
        out.push(("attn.key".into(), vec![h, 2 * h]));
        out.push(("comb.w".into(), vec![h, 3 * h]));
        out.push(("comb.b".into(), vec![h]));
        out.push(("out.w".into(), vec![self.tgt_vocab, h]));
        out.push(("out.b".into(), vec![self.tgt_vocab]));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GruIds {
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
}

/// Parameter indices, resolved once from the storage order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    src_emb: usize,
    tgt_emb: usize,
    enc_fwd: GruIds,
    enc_bwd: GruIds,
    dec: GruIds,
    bridge_w: usize,
    bridge_b: usize,
    key: usize,
    comb_w: usize,
    comb_b: usize,
    out_w: usize,
    out_b: usize,
}

impl Layout {
    fn of(arch: &Arch) -> Self {
        let names: Vec<String> = arch.param_shapes().into_iter().map(|(n, _)| n).collect();
        let at = |n: &str| names.iter().position(|m| m == n).expect("known parameter");
        let gru = |p: &str| GruIds {
            w_ih: at(&format!("{p}.w_ih")),
            w_hh: at(&format!("{p}.w_hh")),
            b_ih: at(&format!("{p}.b_ih")),
            b_hh: at(&format!("{p}.b_hh")),
        };
        Layout {
            src_emb: at("src_emb"),
            tgt_emb: at("tgt_emb"),
            enc_fwd: gru("enc_fwd"),
            enc_bwd: gru("enc_bwd"),
            dec: gru("dec"),
            bridge_w: at("bridge.w"),
            bridge_b: at("bridge.b"),
            key: at("attn.key"),
            comb_w: at("comb.w"),
            comb_b: at("comb.b"),
            out_w: at("out.w"),
            out_b: at("out.b"),
        }
    }
}

/// Bidirectional-GRU encoder, GRU decoder with input feeding and global
/// dot-product attention.
#[derive(Debug, Clone, PartialEq)]
pub struct NmtModel<T> {
    arch: Arch,
    layout: Layout,
    params: ParamSet<T>,
    rng_seed: u64,
}

/// Encoder output on a tape.
pub(crate) struct Encoded {
    annotations: Vec<NodeId>,
    keys: Vec<NodeId>,
    pub(crate) init: DecoderState,
}

/// Recurrent state plus the attentional vector fed into the next step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DecoderState {
    hidden: NodeId,
    feed: NodeId,
}

impl<T: Real> NmtModel<T> {
    /// Fresh model with weights drawn uniformly from ±[`INIT_RANGE`].
    pub fn new(arch: Arch, rng_seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut params = ParamSet::new();
        for (name, shape) in arch.param_shapes() {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| T::lit((rng.gen::<f64>() * 2.0 - 1.0) * INIT_RANGE))
                .collect();
            params.push(&name, Tensor::from_vec(&shape, data)?);
        }
        Ok(NmtModel {
            layout: Layout::of(&arch),
            arch,
            params,
            rng_seed,
        })
    }

    /// Rebuilds a model from stored parameters; names and shapes must match
    /// the architecture exactly.
    pub fn from_params(arch: Arch, params: ParamSet<T>, rng_seed: u64) -> Result<Self> {
        arch.validate()?;
        let expected = arch.param_shapes();
        if expected.len() != params.len() {
            return Err(Error::ShapeMismatch {
                name: "<parameter count>".into(),
            });
        }
        for ((name, shape), (n, t)) in expected.iter().zip(params.iter()) {
            if name != n || shape.as_slice() != t.shape() {
                return Err(Error::ShapeMismatch { name: name.clone() });
            }
        }
        if !params.is_finite() {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(NmtModel {
            layout: Layout::of(&arch),
            arch,
            params,
            rng_seed,
        })
    }

    pub fn arch(&self) -> &Arch {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Hash of every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        self.params.fingerprint()
    }

    pub fn cast<U: Real>(&self) -> NmtModel<U> {
        let mut params = ParamSet::new();
        for (n, t) in self.params.iter() {
            params.push(n, t.cast());
        }
        NmtModel {
            arch: self.arch,
            layout: self.layout,
            params,
            rng_seed: self.rng_seed,
        }
    }

    fn check_ids(ids: &[usize], size: usize, what: &'static str) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptySequence(what));
        }
        match ids.iter().find(|&&i| i >= size) {
            Some(&id) => Err(Error::InvalidTokenId { id, size }),
            None => Ok(()),
        }
    }

    fn gru(g: &mut Graph<'_, T>, ids: GruIds, h_dim: usize, x: NodeId, h: NodeId) -> NodeId {
        let gi = g.linear(ids.w_ih, Some(ids.b_ih), x);
        let gh = g.linear(ids.w_hh, Some(ids.b_hh), h);
        let (ir, iz, in_) = (g.slice(gi, 0, h_dim), g.slice(gi, h_dim, h_dim), g.slice(gi, 2 * h_dim, h_dim));
        let (hr, hz, hn) = (g.slice(gh, 0, h_dim), g.slice(gh, h_dim, h_dim), g.slice(gh, 2 * h_dim, h_dim));
        let r = g.add(ir, hr);
        let r = g.sigmoid(r);
        let z = g.add(iz, hz);
        let z = g.sigmoid(z);
        let rn = g.mul(r, hn);
        let n = g.add(in_, rn);
        let n = g.tanh(n);
        // h' = (1 - z) * n + z * h = n + z * (h - n)
        let diff = g.sub(h, n);
        let zd = g.mul(z, diff);
        g.add(n, zd)
    }

    pub(crate) fn encode(&self, g: &mut Graph<'_, T>, src: &[usize]) -> Result<Encoded> {
        Self::check_ids(src, self.arch.src_vocab, "source")?;
        let l = self.layout;
        let h_dim = self.arch.hidden_dim;
        let embs: Vec<NodeId> = src.iter().map(|&t| g.row(l.src_emb, t)).collect();
        let zero = g.constant(vec![T::zero(); h_dim]);

        let mut fwd = Vec::with_capacity(src.len());
        let mut h = zero;
        for &e in &embs {
            h = Self::gru(g, l.enc_fwd, h_dim, e, h);
            fwd.push(h);
        }
        let mut bwd = vec![zero; src.len()];
        let mut h = zero;
        for (j, &e) in embs.iter().enumerate().rev() {
            h = Self::gru(g, l.enc_bwd, h_dim, e, h);
            bwd[j] = h;
        }
        let annotations: Vec<NodeId> = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| g.concat(&[f, b]))
            .collect();
        let keys = annotations
            .iter()
            .map(|&a| g.linear(l.key, None, a))
            .collect();
        let summary = g.concat(&[fwd[src.len() - 1], bwd[0]]);
        let bridged = g.linear(l.bridge_w, Some(l.bridge_b), summary);
        let hidden = g.tanh(bridged);
        let feed = g.constant(vec![T::zero(); h_dim]);
        Ok(Encoded {
            annotations,
            keys,
            init: DecoderState { hidden, feed },
        })
    }

    /// One decoder step; returns the next state and the logits node.
    pub(crate) fn step(
        &self,
        g: &mut Graph<'_, T>,
        enc: &Encoded,
        state: DecoderState,
        prev: usize,
    ) -> (DecoderState, NodeId) {
        let l = self.layout;
        let h_dim = self.arch.hidden_dim;
        let e = g.row(l.tgt_emb, prev);
        let input = g.concat(&[e, state.feed]);
        let hidden = Self::gru(g, l.dec, h_dim, input, state.hidden);
        let scores = g.dots(&enc.keys, hidden);
        let weights = g.softmax(scores);
        let context = g.mix(weights, &enc.annotations);
        let joined = g.concat(&[hidden, context]);
        let comb = g.linear(l.comb_w, Some(l.comb_b), joined);
        let feed = g.tanh(comb);
        let logits = g.linear(l.out_w, Some(l.out_b), feed);
        (DecoderState { hidden, feed }, logits)
    }

    /// Teacher-forced logits: one row of size `tgt_vocab` per entry of
    /// `tgt_in` (the decoder inputs, normally starting with BOS).
    pub fn forward(&self, src: &[usize], tgt_in: &[usize]) -> Result<Vec<Vec<T>>> {
        Self::check_ids(tgt_in, self.arch.tgt_vocab, "target")?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, src)?;
        let mut state = enc.init;
        let mut rows = Vec::with_capacity(tgt_in.len());
        for &y in tgt_in {
            let (next, logits) = self.step(&mut g, &enc, state, y);
            state = next;
            let row = g.value(logits).to_vec();
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric("non-finite logits".into()));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    fn build_loss<'a>(&self, g: &mut Graph<'a, T>, src: &[usize], tgt: &[usize]) -> Result<NodeId> {
        Self::check_ids(tgt, self.arch.tgt_vocab, "target")?;
        let enc = self.encode(g, src)?;
        let mut state = enc.init;
        let mut prev = BOS;
        let mut losses = Vec::with_capacity(tgt.len() + 1);
        for &y in tgt.iter().chain(core::iter::once(&EOS)) {
            let (next, logits) = self.step(g, &enc, state, prev);
            losses.push(g.cross_entropy(logits, y));
            state = next;
            prev = y;
        }
        let loss = g.mean(&losses);
        if !g.value(loss)[0].is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }
        Ok(loss)
    }

    /// Mean token cross-entropy of `tgt` + EOS given `src`, teacher forced
    /// from BOS.
    pub fn loss(&self, src: &[usize], tgt: &[usize]) -> Result<T> {
        let mut g = Graph::new(&self.params);
        let root = self.build_loss(&mut g, src, tgt)?;
        Ok(g.value(root)[0])
    }

    pub fn loss_and_grad(&self, src: &[usize], tgt: &[usize]) -> Result<(T, Gradients<T>)> {
        let mut grads = self.params.zeros_like();
        let loss = self.accumulate_grad(src, tgt, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds this pair's gradient into `grads` and returns its loss.
    pub fn accumulate_grad(&self, src: &[usize], tgt: &[usize], grads: &mut Gradients<T>) -> Result<T> {
        let mut g = Graph::new(&self.params);
        let root = self.build_loss(&mut g, src, tgt)?;
        g.backward(root, grads)?;
        Ok(g.value(root)[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NmtModel<f64> {
        NmtModel::new(Arch::new(9, 11).with_dims(4, 5), 7).unwrap()
    }

    #[test]
    fn logits_shape() {
        let m = NmtModel::<f32>::new(Arch::new(12, 13).with_dims(8, 8), 1).unwrap();
        let logits = m.forward(&[4, 5, 6], &[BOS, 4, 5, 6, 7]).unwrap();
        assert_eq!(logits.len(), 5);
        assert!(logits.iter().all(|r| r.len() == 13));
    }

    #[test]
    fn zero_output_projection_gives_uniform_loss() {
        let mut m = tiny();
        for (name, t) in m.params.names().to_vec().iter().zip(m.params.tensors_mut()) {
            if name.starts_with("out.") {
                t.data_mut().iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let logits = m.forward(&[4, 5], &[BOS, 4, 6]).unwrap();
        for row in &logits {
            assert!(row.iter().all(|&x| x == row[0]));
        }
        let loss = m.loss(&[4, 5], &[4, 6]).unwrap();
        assert!((loss - (11f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_is_deterministic() {
        let a = NmtModel::<f32>::new(Arch::new(10, 10).with_dims(6, 6), 3).unwrap();
        let b = NmtModel::<f32>::new(Arch::new(10, 10).with_dims(6, 6), 3).unwrap();
        let x = a.forward(&[4, 5, 6], &[BOS, 7]).unwrap();
        assert_eq!(x, a.forward(&[4, 5, 6], &[BOS, 7]).unwrap());
        assert_eq!(x, b.forward(&[4, 5, 6], &[BOS, 7]).unwrap());
    }

    #[test]
    fn rejects_bad_ids() {
        let m = tiny();
        assert_eq!(
            m.loss(&[4, 99], &[4]),
            Err(Error::InvalidTokenId { id: 99, size: 9 })
        );
        assert!(matches!(m.loss(&[], &[4]), Err(Error::EmptySequence(_))));
        assert!(matches!(m.forward(&[4], &[11]), Err(Error::InvalidTokenId { .. })));
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let m = tiny();
        for t in m.params.tensors() {
            assert!(t.data().iter().all(|x| x.abs() <= INIT_RANGE));
        }
        assert_eq!(m.fingerprint(), tiny().fingerprint());
        assert_ne!(m.fingerprint(), NmtModel::<f64>::new(*m.arch(), 8).unwrap().fingerprint());
    }

    #[test]
    fn from_params_checks_layout() {
        let m = tiny();
        let other = Arch::new(9, 12).with_dims(4, 5);
        assert!(NmtModel::from_params(other, m.params().clone(), 0).is_err());
        assert!(NmtModel::from_params(*m.arch(), m.params().clone(), 7).is_ok());
    }

    #[test]
    fn loss_is_non_negative_and_softmax_normalized() {
        let m = tiny();
        for tgt in [&[4usize][..], &[5, 6, 7], &[10, 10]] {
            assert!(m.loss(&[4, 5, 6], tgt).unwrap() >= 0.0);
        }
        let logits = m.forward(&[4, 8], &[BOS, 5, 6]).unwrap();
        for row in logits {
            let p = super::super::autodiff::softmax(&row);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
