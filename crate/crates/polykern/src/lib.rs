//! Typed stochastic diagrams of Markov kernels.
//!
//! `polykern` wires many-input, many-output Markov kernels into finite
//! acyclic diagrams, evaluates them exactly or by sampling, and estimates
//! gradients of expected scalar objectives by local reverse-mode rules.
//!
//! The crate is organized in layers:
//!
//! * [`space`] — measurable-space descriptors, typed values, tuple surgery.
//! * [`kernel`] — kernel representations and exact unary/slotwise composition.
//! * [`diagram`] — finite acyclic diagrams, validation, binary composition.
//! * [`trace`] — exact and sampled trace semantics.
//! * [`color`] — color systems, interface kernels, typed (colored) diagrams.
//! * [`ccmp`] — indexed families of typed registries with state and
//!   parameter pushforwards.
//! * [`learn`] — parameterized diagrams, expected objectives, score-function
//!   and pathwise gradient estimators, and a small training loop.
//! * [`project`] — the JSON project-file format tying everything together.
//! * [`builtin`] — the registry of named kernels, objectives, and transports
//!   that project files reference.
//! * [`cli`] — the `polykern` command-line surface.
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `gaussian_chain` and `diagnosis_workflow`.

pub mod builtin;
pub mod ccmp;
pub mod cli;
pub mod color;
pub mod diagram;
pub mod error;
pub mod fixtures;
pub mod kernel;
pub mod learn;
pub mod numeric;
pub mod project;
pub mod report;
pub mod space;
pub mod stream;
pub mod trace;

pub use error::{Error, Result};
