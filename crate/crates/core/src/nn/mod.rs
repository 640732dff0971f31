//! A small reverse-mode engine and the layers the classifier and the
//! auxiliary probe networks are built from.

pub mod conv;
pub mod layers;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use conv::Padding;
pub use layers::{Bound, ParamStore};
pub use optim::{cosine_lr, Adam, AdamConfig};
pub use tape::{BatchStats, BnMode, Tape, Var};
pub use tensor::Tensor;
