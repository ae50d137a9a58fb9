//! Graph construction for the bidirectional GRU encoder, feedforward
//! attention and GRU decoder with a tanh readout.
//!
//! Vectors are `1 × d` rows and weights multiply from the right (`x · W`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gru, GruPart, Hyperparameters, ModelParameters, Param};
use super::ModelError;
use crate::autodiff::{Gradients, Graph, NodeId};
use crate::tensor::Tensor;
use crate::vocab::{BOS_ID, EOS_ID};

/// Whether dropout masks are drawn, and from which generator.
pub enum Dropout<'r> {
    Off,
    On(&'r mut ChaCha8Rng),
}

impl Dropout<'_> {
    pub fn is_on(&self) -> bool {
        matches!(self, Dropout::On(_))
    }

    /// Inverted dropout: keep with probability `1 − p`, scale kept units by
    /// `1 / (1 − p)`.
    fn apply(&mut self, g: &mut Graph<'_>, x: NodeId, p: f64) -> Result<NodeId, ModelError> {
        match self {
            Dropout::Off => Ok(x),
            Dropout::On(rng) => {
                let shape = g.value(x).shape().to_vec();
                let n = g.value(x).numel();
                let keep = 1.0 - p;
                let data = (0..n).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                Ok(g.dropout(x, Tensor::new(shape, data))?)
            }
        }
    }
}

/// Parameter leaves registered in a graph, indexed by [`Param::index`].
pub(crate) struct Bound(Vec<NodeId>);

impl Bound {
    pub(crate) fn new<'a>(g: &mut Graph<'a>, params: &'a ModelParameters) -> Self {
        Bound(params.tensors().iter().enumerate().map(|(i, t)| g.param(i, t)).collect())
    }

    pub(crate) fn from_nodes(nodes: &[NodeId]) -> Self {
        Bound(nodes.to_vec())
    }

    fn get(&self, p: Param) -> NodeId {
        self.0[p.index()]
    }
}

pub(crate) struct EncodedNodes {
    pub annotations: NodeId,
    pub keys: NodeId,
    pub len: usize,
}

pub(crate) struct StepNodes {
    pub state: NodeId,
    pub context: NodeId,
    pub attention: NodeId,
    pub prev_embedding: NodeId,
    pub logits: NodeId,
    pub distribution: NodeId,
}

/// `x · W + b` for the three gate inputs of `gru`.
fn project(g: &mut Graph<'_>, b: &Bound, gru: Gru, x: NodeId) -> Result<[NodeId; 3], ModelError> {
    let mut out = [x; 3];
    let parts = [
        (GruPart::UpdateInput, GruPart::UpdateBias),
        (GruPart::ResetInput, GruPart::ResetBias),
        (GruPart::CandidateInput, GruPart::CandidateBias),
    ];
    for (slot, (w, bias)) in out.iter_mut().zip(parts) {
        let xw = g.matmul(x, b.get(Param::Gru(gru, w)))?;
        *slot = g.add(xw, b.get(Param::Gru(gru, bias)))?;
    }
    Ok(out)
}

/// One GRU transition given precomputed input projections.
///
/// z = σ(xW_z + hU_z + b_z), r = σ(xW_r + hU_r + b_r),
/// h̃ = tanh(xW_h + (r⊙h)U_h + b_h), h′ = (1−z)⊙h + z⊙h̃.
fn gru_step(
    g: &mut Graph<'_>,
    b: &Bound,
    gru: Gru,
    [xz, xr, xh]: [NodeId; 3],
    h: NodeId,
) -> Result<NodeId, ModelError> {
    let uz = g.matmul(h, b.get(Param::Gru(gru, GruPart::UpdateRecurrent)))?;
    let z = g.add(xz, uz)?;
    let z = g.sigmoid(z)?;
    let ur = g.matmul(h, b.get(Param::Gru(gru, GruPart::ResetRecurrent)))?;
    let r = g.add(xr, ur)?;
    let r = g.sigmoid(r)?;
    let rh = g.mul(r, h)?;
    let uh = g.matmul(rh, b.get(Param::Gru(gru, GruPart::CandidateRecurrent)))?;
    let cand = g.add(xh, uh)?;
    let cand = g.tanh(cand)?;
    // h + z⊙(h̃ − h)
    let diff = g.sub(cand, h)?;
    let step = g.mul(z, diff)?;
    Ok(g.add(h, step)?)
}

pub(crate) fn encode_nodes(
    g: &mut Graph<'_>,
    b: &Bound,
    h: &Hyperparameters,
    ids: &[usize],
    dropout: &mut Dropout<'_>,
) -> Result<EncodedNodes, ModelError> {
    if ids.is_empty() {
        return Err(ModelError::EmptySource);
    }
    if let Some(&id) = ids.iter().find(|&&id| id >= h.source_vocab_size) {
        return Err(ModelError::SourceIdOutOfRange { id, vocab_size: h.source_vocab_size });
    }
    let n = ids.len();
    let x = g.rows(b.get(Param::SourceEmbedding), ids)?;
    let x = dropout.apply(g, x, h.dropout_embedding_hidden)?;

    let mut forward = Vec::with_capacity(n);
    let mut backward = vec![x; n];
    for gru in [Gru::EncoderForward, Gru::EncoderBackward] {
        let proj = project(g, b, gru, x)?;
        let mut state = g.input(Tensor::zeros(&[1, h.hidden_dim]));
        let order: Vec<usize> = match gru {
            Gru::EncoderForward => (0..n).collect(),
            _ => (0..n).rev().collect(),
        };
        for i in order {
            let step_in = [g.row(proj[0], i)?, g.row(proj[1], i)?, g.row(proj[2], i)?];
            state = gru_step(g, b, gru, step_in, state)?;
            match gru {
                Gru::EncoderForward => forward.push(state),
                _ => backward[i] = state,
            }
        }
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        rows.push(g.concat(&[forward[i], backward[i]], 1)?);
    }
    let annotations = g.concat(&rows, 0)?;
    let annotations = dropout.apply(g, annotations, h.dropout_embedding_hidden)?;
    let keys = g.matmul(annotations, b.get(Param::AttentionKey))?;
    Ok(EncodedNodes { annotations, keys, len: n })
}

/// z₀ = tanh(mean(h_i) · W_init + b_init).
pub(crate) fn initial_state_nodes(g: &mut Graph<'_>, b: &Bound, enc: &EncodedNodes) -> Result<NodeId, ModelError> {
    let weights = g.input(Tensor::filled(&[1, enc.len], 1.0 / enc.len as f64));
    let mean = g.matmul(weights, enc.annotations)?;
    let pre = g.matmul(mean, b.get(Param::InitWeight))?;
    let pre = g.add(pre, b.get(Param::InitBias))?;
    Ok(g.tanh(pre)?)
}

/// Returns `(c_j, α_j)` with scores `v_a · tanh(W_a z_{j−1} + U_a h_i)`.
pub(crate) fn attention_nodes(
    g: &mut Graph<'_>,
    b: &Bound,
    z_prev: NodeId,
    enc: &EncodedNodes,
) -> Result<(NodeId, NodeId), ModelError> {
    let query = g.matmul(z_prev, b.get(Param::AttentionQuery))?;
    let hidden = g.add(enc.keys, query)?;
    let hidden = g.tanh(hidden)?;
    let scores = g.matmul(hidden, b.get(Param::AttentionScore))?;
    let scores = g.transpose(scores)?;
    let alpha = g.softmax_rows(scores)?;
    let context = g.matmul(alpha, enc.annotations)?;
    Ok((context, alpha))
}

pub(crate) fn decode_step_nodes(
    g: &mut Graph<'_>,
    b: &Bound,
    h: &Hyperparameters,
    z_prev: NodeId,
    y_prev: usize,
    enc: &EncodedNodes,
    dropout: &mut Dropout<'_>,
) -> Result<StepNodes, ModelError> {
    if y_prev >= h.target_vocab_size {
        return Err(ModelError::TargetIdOutOfRange { id: y_prev, vocab_size: h.target_vocab_size });
    }
    let t = g.row(b.get(Param::TargetEmbedding), y_prev)?;
    let t = dropout.apply(g, t, h.dropout_embedding_hidden)?;
    let (context, attention) = attention_nodes(g, b, z_prev, enc)?;
    let input = g.concat(&[t, context], 1)?;
    let proj = project(g, b, Gru::Decoder, input)?;
    let state = gru_step(g, b, Gru::Decoder, proj, z_prev)?;

    let z_out = dropout.apply(g, state, h.dropout_embedding_hidden)?;
    let readout_in = g.concat(&[z_out, t, context], 1)?;
    let readout_in = dropout.apply(g, readout_in, h.dropout_input_output)?;
    let readout = g.matmul(readout_in, b.get(Param::ReadoutWeight))?;
    let readout = g.add(readout, b.get(Param::ReadoutBias))?;
    let readout = g.tanh(readout)?;
    let readout = dropout.apply(g, readout, h.dropout_input_output)?;
    let logits = g.matmul(readout, b.get(Param::OutputWeight))?;
    let logits = g.add(logits, b.get(Param::OutputBias))?;
    let distribution = g.softmax_rows(logits)?;
    Ok(StepNodes { state, context, attention, prev_embedding: t, logits, distribution })
}

/// Teacher-forced sum of per-token cross-entropies.
pub(crate) fn sentence_loss_nodes(
    g: &mut Graph<'_>,
    b: &Bound,
    h: &Hyperparameters,
    source: &[usize],
    target: &[usize],
    dropout: &mut Dropout<'_>,
) -> Result<NodeId, ModelError> {
    if target.last() != Some(&EOS_ID) {
        return Err(ModelError::MissingEndOfSentence);
    }
    if let Some(&id) = target.iter().find(|&&id| id >= h.target_vocab_size) {
        return Err(ModelError::TargetIdOutOfRange { id, vocab_size: h.target_vocab_size });
    }
    let enc = encode_nodes(g, b, h, source, dropout)?;
    let mut z = initial_state_nodes(g, b, &enc)?;
    let mut y_prev = BOS_ID;
    let mut terms = Vec::with_capacity(target.len());
    for &y in target {
        let step = decode_step_nodes(g, b, h, z, y_prev, &enc, dropout)?;
        terms.push(g.cross_entropy(step.distribution, y)?);
        z = step.state;
        y_prev = y;
    }
    let stacked = g.concat(&terms, 0)?;
    Ok(g.sum(stacked)?)
}

/// Annotation vectors `h_i = [→h_i; ←h_i]` as rows, plus their attention
/// key projections `h_i · U_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSource {
    pub annotations: Tensor,
    pub keys: Tensor,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.annotations.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn annotation(&self, i: usize) -> &[f64] {
        self.annotations.row_slice(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStep {
    /// z_j
    pub state: Tensor,
    /// c_j
    pub context: Tensor,
    /// α_j over source positions
    pub attention: Tensor,
    /// t_{j−1}
    pub prev_embedding: Tensor,
    pub logits: Tensor,
    pub distribution: Tensor,
}

/// Hyperparameters together with the parameters they shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: Hyperparameters,
    pub params: ModelParameters,
}

impl Model {
    pub fn init(hyper: Hyperparameters) -> Result<Self, ModelError> {
        let params = ModelParameters::init(&hyper)?;
        Ok(Model { hyper, params })
    }

    pub fn encode(&self, source: &[usize], mut dropout: Dropout<'_>) -> Result<EncodedSource, ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let enc = encode_nodes(&mut g, &b, &self.hyper, source, &mut dropout)?;
        Ok(EncodedSource { annotations: g.value(enc.annotations).clone(), keys: g.value(enc.keys).clone() })
    }

    fn bind_encoded<'a>(g: &mut Graph<'a>, enc: &'a EncodedSource) -> EncodedNodes {
        EncodedNodes { annotations: g.input_ref(&enc.annotations), keys: g.input_ref(&enc.keys), len: enc.len() }
    }

    pub fn initial_decoder_state(&self, enc: &EncodedSource) -> Result<Tensor, ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let e = Self::bind_encoded(&mut g, enc);
        let z = initial_state_nodes(&mut g, &b, &e)?;
        Ok(g.value(z).clone())
    }

    /// Returns `(c_j, α_j)`.
    pub fn attention_step(&self, z_prev: &Tensor, enc: &EncodedSource) -> Result<(Tensor, Tensor), ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let e = Self::bind_encoded(&mut g, enc);
        let z = g.input_ref(z_prev);
        let (c, alpha) = attention_nodes(&mut g, &b, z, &e)?;
        Ok((g.value(c).clone(), g.value(alpha).clone()))
    }

    /// One inference step (no dropout).
    pub fn decode_step(&self, z_prev: &Tensor, y_prev: usize, enc: &EncodedSource) -> Result<DecoderStep, ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let e = Self::bind_encoded(&mut g, enc);
        let z = g.input_ref(z_prev);
        let s = decode_step_nodes(&mut g, &b, &self.hyper, z, y_prev, &e, &mut Dropout::Off)?;
        Ok(DecoderStep {
            state: g.value(s.state).clone(),
            context: g.value(s.context).clone(),
            attention: g.value(s.attention).clone(),
            prev_embedding: g.value(s.prev_embedding).clone(),
            logits: g.value(s.logits).clone(),
            distribution: g.value(s.distribution).clone(),
        })
    }

    /// Teacher-forced loss; `target` must end with the end-of-sentence id.
    pub fn sentence_loss(
        &self,
        source: &[usize],
        target: &[usize],
        mut dropout: Dropout<'_>,
    ) -> Result<f64, ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let loss = sentence_loss_nodes(&mut g, &b, &self.hyper, source, target, &mut dropout)?;
        Ok(g.value(loss).item())
    }

    pub fn sentence_loss_and_gradients(
        &self,
        source: &[usize],
        target: &[usize],
        mut dropout: Dropout<'_>,
    ) -> Result<(f64, Gradients), ModelError> {
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let loss = sentence_loss_nodes(&mut g, &b, &self.hyper, source, target, &mut dropout)?;
        let grads = g.backward(loss)?;
        Ok((g.value(loss).item(), grads))
    }
}
