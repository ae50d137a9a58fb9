pub mod autodiff;
pub mod bpe;
pub mod cli;
pub mod decode;
pub mod eval;
pub mod model;
pub mod multilingual;
pub mod synthetic;
pub mod tensor;
pub mod train;
pub mod vocab;
