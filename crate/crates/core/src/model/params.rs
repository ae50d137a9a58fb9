use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::tensor::{Precision, Tensor};

/// Weights are drawn uniformly from `[-INIT_SCALE, INIT_SCALE]`.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub source_vocab_size: usize,
    pub target_vocab_size: usize,
    pub embedding_dim: usize,
    /// GRU width per encoder direction, and of the decoder.
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// Width of the tanh readout layer before the output projection.
    pub readout_dim: usize,
    /// Applied to embedding outputs and recurrent states.
    pub dropout_embedding_hidden: f64,
    /// Applied to the readout input and the readout layer output.
    pub dropout_input_output: f64,
    pub precision: Precision,
    pub seed: u64,
}

impl Hyperparameters {
    /// Sizes as used at full scale: 1000-dim embeddings, 1024-cell GRUs,
    /// dropout 0.2 / 0.1.
    pub fn full_scale(source_vocab_size: usize, target_vocab_size: usize) -> Self {
        Self::new(source_vocab_size, target_vocab_size, 1000, 1024).with_dropout(0.2, 0.1)
    }

    /// No dropout; attention width follows `hidden_dim`, readout width follows
    /// `embedding_dim`.
    pub fn new(source_vocab_size: usize, target_vocab_size: usize, embedding_dim: usize, hidden_dim: usize) -> Self {
        Hyperparameters {
            source_vocab_size,
            target_vocab_size,
            embedding_dim,
            hidden_dim,
            attention_dim: hidden_dim,
            readout_dim: embedding_dim,
            dropout_embedding_hidden: 0.0,
            dropout_input_output: 0.0,
            precision: Precision::F64,
            seed: 1,
        }
    }

    pub fn with_dropout(mut self, embedding_hidden: f64, input_output: f64) -> Self {
        self.dropout_embedding_hidden = embedding_hidden;
        self.dropout_input_output = input_output;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("source_vocab_size", self.source_vocab_size),
            ("target_vocab_size", self.target_vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("attention_dim", self.attention_dim),
            ("readout_dim", self.readout_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::InvalidHyperparameter(format!("{name} must be at least 1")));
            }
        }
        for (name, p) in [
            ("dropout_embedding_hidden", self.dropout_embedding_hidden),
            ("dropout_input_output", self.dropout_input_output),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(ModelError::InvalidHyperparameter(format!("{name} = {p} is outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// The three GRUs of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gru {
    EncoderForward,
    EncoderBackward,
    Decoder,
}

/// The nine tensors of one GRU: input (`W`), recurrent (`U`) and bias (`b`)
/// for the update gate, reset gate and candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GruPart {
    UpdateInput,
    UpdateRecurrent,
    UpdateBias,
    ResetInput,
    ResetRecurrent,
    ResetBias,
    CandidateInput,
    CandidateRecurrent,
    CandidateBias,
}

const GRU_PARTS: [GruPart; 9] = [
    GruPart::UpdateInput,
    GruPart::UpdateRecurrent,
    GruPart::UpdateBias,
    GruPart::ResetInput,
    GruPart::ResetRecurrent,
    GruPart::ResetBias,
    GruPart::CandidateInput,
    GruPart::CandidateRecurrent,
    GruPart::CandidateBias,
];

/// Every learnable tensor, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    SourceEmbedding,
    TargetEmbedding,
    Gru(Gru, GruPart),
    InitWeight,
    InitBias,
    /// Projects the previous decoder state into attention space.
    AttentionQuery,
    /// Projects annotation vectors into attention space.
    AttentionKey,
    /// Reduces the attention hidden layer to one relevance score.
    AttentionScore,
    ReadoutWeight,
    ReadoutBias,
    OutputWeight,
    OutputBias,
}

pub const PARAM_COUNT: usize = 2 + 3 * 9 + 9;

impl Param {
    pub fn all() -> Vec<Param> {
        let mut out = vec![Param::SourceEmbedding, Param::TargetEmbedding];
        for gru in [Gru::EncoderForward, Gru::EncoderBackward, Gru::Decoder] {
            out.extend(GRU_PARTS.iter().map(|&part| Param::Gru(gru, part)));
        }
        out.extend([
            Param::InitWeight,
            Param::InitBias,
            Param::AttentionQuery,
            Param::AttentionKey,
            Param::AttentionScore,
            Param::ReadoutWeight,
            Param::ReadoutBias,
            Param::OutputWeight,
            Param::OutputBias,
        ]);
        out
    }

    pub fn index(self) -> usize {
        match self {
            Param::SourceEmbedding => 0,
            Param::TargetEmbedding => 1,
            Param::Gru(gru, part) => {
                let base = match gru {
                    Gru::EncoderForward => 2,
                    Gru::EncoderBackward => 11,
                    Gru::Decoder => 20,
                };
                base + GRU_PARTS.iter().position(|p| *p == part).expect("listed part")
            }
            Param::InitWeight => 29,
            Param::InitBias => 30,
            Param::AttentionQuery => 31,
            Param::AttentionKey => 32,
            Param::AttentionScore => 33,
            Param::ReadoutWeight => 34,
            Param::ReadoutBias => 35,
            Param::OutputWeight => 36,
            Param::OutputBias => 37,
        }
    }

    pub fn name(self) -> String {
        match self {
            Param::SourceEmbedding => "E_s".into(),
            Param::TargetEmbedding => "E_t".into(),
            Param::Gru(gru, part) => {
                let prefix = match gru {
                    Gru::EncoderForward => "encoder_forward",
                    Gru::EncoderBackward => "encoder_backward",
                    Gru::Decoder => "decoder",
                };
                let suffix = match part {
                    GruPart::UpdateInput => "W_z",
                    GruPart::UpdateRecurrent => "U_z",
                    GruPart::UpdateBias => "b_z",
                    GruPart::ResetInput => "W_r",
                    GruPart::ResetRecurrent => "U_r",
                    GruPart::ResetBias => "b_r",
                    GruPart::CandidateInput => "W_h",
                    GruPart::CandidateRecurrent => "U_h",
                    GruPart::CandidateBias => "b_h",
                };
                format!("{prefix}.{suffix}")
            }
            Param::InitWeight => "W_init".into(),
            Param::InitBias => "b_init".into(),
            Param::AttentionQuery => "W_a".into(),
            Param::AttentionKey => "U_a".into(),
            Param::AttentionScore => "v_a".into(),
            Param::ReadoutWeight => "W_o".into(),
            Param::ReadoutBias => "b_o".into(),
            Param::OutputWeight => "W_out".into(),
            Param::OutputBias => "b_out".into(),
        }
    }

    pub fn is_bias(self) -> bool {
        matches!(
            self,
            Param::Gru(_, GruPart::UpdateBias | GruPart::ResetBias | GruPart::CandidateBias)
                | Param::InitBias
                | Param::ReadoutBias
                | Param::OutputBias
        )
    }

    pub fn shape(self, h: &Hyperparameters) -> [usize; 2] {
        let (e, d, a) = (h.embedding_dim, h.hidden_dim, h.attention_dim);
        match self {
            Param::SourceEmbedding => [h.source_vocab_size, e],
            Param::TargetEmbedding => [h.target_vocab_size, e],
            Param::Gru(gru, part) => {
                let input = match gru {
                    Gru::EncoderForward | Gru::EncoderBackward => e,
                    Gru::Decoder => e + 2 * d,
                };
                match part {
                    GruPart::UpdateInput | GruPart::ResetInput | GruPart::CandidateInput => [input, d],
                    GruPart::UpdateRecurrent | GruPart::ResetRecurrent | GruPart::CandidateRecurrent => [d, d],
                    GruPart::UpdateBias | GruPart::ResetBias | GruPart::CandidateBias => [1, d],
                }
            }
            Param::InitWeight => [2 * d, d],
            Param::InitBias => [1, d],
            Param::AttentionQuery => [d, a],
            Param::AttentionKey => [2 * d, a],
            Param::AttentionScore => [a, 1],
            Param::ReadoutWeight => [d + e + 2 * d, h.readout_dim],
            Param::ReadoutBias => [1, h.readout_dim],
            Param::OutputWeight => [h.readout_dim, h.target_vocab_size],
            Param::OutputBias => [1, h.target_vocab_size],
        }
    }
}

/// Every learnable tensor of the encoder-attention-decoder network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    tensors: Vec<Tensor>,
}

impl ModelParameters {
    /// Weights uniform in `[-0.08, 0.08]` from the seeded generator, biases zero.
    pub fn init(h: &Hyperparameters) -> Result<Self, ModelError> {
        h.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
        let tensors = Param::all()
            .into_iter()
            .map(|p| {
                let shape = p.shape(h);
                let n = shape[0] * shape[1];
                let data = if p.is_bias() {
                    vec![0.0; n]
                } else {
                    (0..n).map(|_| h.precision.round(rng.gen_range(-INIT_SCALE..=INIT_SCALE))).collect()
                };
                Tensor::new(shape.to_vec(), data)
            })
            .collect();
        Ok(ModelParameters { tensors })
    }

    /// Wraps tensors given in [`Param::all`] order, checking every shape.
    pub fn from_tensors(h: &Hyperparameters, tensors: Vec<Tensor>) -> Result<Self, ModelError> {
        h.validate()?;
        if tensors.len() != PARAM_COUNT {
            return Err(ModelError::ShapeInconsistency(format!(
                "expected {PARAM_COUNT} tensors, got {}",
                tensors.len()
            )));
        }
        for (p, t) in Param::all().into_iter().zip(&tensors) {
            if t.shape() != p.shape(h) {
                return Err(ModelError::ShapeInconsistency(format!(
                    "{} has shape {:?}, hyperparameters imply {:?}",
                    p.name(),
                    t.shape(),
                    p.shape(h)
                )));
            }
        }
        Ok(ModelParameters { tensors })
    }

    pub fn get(&self, p: Param) -> &Tensor {
        &self.tensors[p.index()]
    }

    pub fn get_mut(&mut self, p: Param) -> &mut Tensor {
        &mut self.tensors[p.index()]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_follow_listing_order() {
        for (i, p) in Param::all().into_iter().enumerate() {
            assert_eq!(p.index(), i, "{}", p.name());
        }
        assert_eq!(Param::all().len(), PARAM_COUNT);
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let h = Hyperparameters::new(7, 9, 4, 5).with_seed(1);
        let a = ModelParameters::init(&h).unwrap();
        let b = ModelParameters::init(&h).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(Param::SourceEmbedding).shape(), &[7, 4]);
        assert_eq!(a.get(Param::OutputWeight).shape(), &[4, 9]);
        for p in Param::all() {
            let t = a.get(p);
            if p.is_bias() {
                assert!(t.data().iter().all(|&v| v == 0.0), "{}", p.name());
            } else {
                assert!(t.data().iter().all(|v| v.abs() <= INIT_SCALE));
                assert!(t.data().iter().any(|&v| v != 0.0));
            }
        }
        let c = ModelParameters::init(&h.clone().with_seed(2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn f32_init_stores_representable_values() {
        let h = Hyperparameters::new(5, 5, 3, 3).with_precision(Precision::F32);
        let p = ModelParameters::init(&h).unwrap();
        for t in p.tensors() {
            assert!(t.data().iter().all(|&v| v as f32 as f64 == v));
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let h = Hyperparameters::new(5, 5, 0, 3);
        assert!(ModelParameters::init(&h).is_err());
        let h = Hyperparameters::new(5, 5, 3, 3).with_dropout(1.0, 0.0);
        assert!(h.validate().is_err());
    }
}
