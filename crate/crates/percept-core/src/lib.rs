//! Self-contained multimodal perception toolkit.
//!
//! Three model families are covered end to end: a CNN for eye open/closed
//! state, a CNN for facial expression recognition, and an MFCC + LSTM
//! speaker identifier. Every numerical component (tensor arithmetic, layer
//! forward/backward passes, the Adam optimizer, the audio DSP chain) is
//! implemented in this crate and verified against independent oracles in
//! the test suite.

pub mod audio;
pub mod imaging;
pub mod nn;
pub mod pipelines;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod util;
