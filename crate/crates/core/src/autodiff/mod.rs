//! Reverse-mode differentiation over a tape of dense primitives.

mod gradcheck;
mod graph;

pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use graph::{
    cross_entropy, sigmoid, softmax_rows, Gradients, Graph, GraphError, NodeId, Primitive, PROBABILITY_FLOOR,
};
