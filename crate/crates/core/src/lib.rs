//! Zero-shot scene reasoning over a shared vision-language embedding space.
//!
//! The pipeline scores text prompts against a scene's visual embedding,
//! keeps the best prompts, lets object embeddings attend over their tokens,
//! folds objects and language into a context vector, and predicts a label
//! with a temperature softmax. Alongside it sit toy trainable encoders with
//! a contrastive objective, a synthetic scene generator, evaluation metrics,
//! and the `VLEB` embedding bundle format.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod embedding;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod reasoner;
pub mod scenegen;
pub mod training;

pub use embedding::{cosine_sim, l2_normalize, pairwise_sim, stable_softmax, Embedding, ProbVector, SimMatrix};
pub use error::{Error, Result};
pub use reasoner::{reason_scene, PromptSet, ReasonConfig, ReasonResult, SceneBundle};
