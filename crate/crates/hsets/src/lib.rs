//! Hessian-guided feature-interaction detection (H-Sets), integrated
//! directional-gradient attribution (IDG-Vis), and a saliency evaluation
//! suite (Gini sparsity, ROAD faithfulness) for small image classifiers,
//! built on an in-crate reverse-mode autodiff tape with forward-over-reverse
//! Hessian-vector products.

pub mod attribution;
pub mod autodiff;
pub mod axioms;
pub mod cli;
pub mod config;
pub mod data;
pub mod detection;
pub mod error;
pub mod metrics;
pub mod model;
pub mod segmentation;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
