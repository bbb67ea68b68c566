//! The evaluation-node runtime: homomorphic program execution with
//! budget-tracked registers, refresh negotiation, fixed-point encoding,
//! and the encrypted logistic-regression demonstration.
//!
//! Structure:
//! - [`program`]: straight-line homomorphic programs — text format, parser,
//!   validation, a plaintext shadow executor, and a random generator.
//! - [`session`]: the register machine that executes operations on
//!   ciphertexts, applies the budget estimator after every step, and
//!   negotiates refreshes through a [`session::RefreshChannel`].
//! - [`run`]: one-call program execution producing decrypted outputs and a
//!   run report.
//! - [`codec`]: fixed-point scalar encoding.
//! - [`sigmoid`]: the cubic least-squares logistic approximation.
//! - [`lr`]: plain and encrypted logistic-regression trainers sharing one
//!   integer recurrence.
//! - [`link`]: the TCP client — handshake, provisioning, noise reports,
//!   and bootstrap shipping.

pub mod codec;
pub mod link;
pub mod lr;
pub mod program;
pub mod run;
pub mod session;
pub mod sigmoid;

pub use codec::FixedPointCodec;
pub use link::ServerLink;
pub use lr::{lr_train_encrypted, lr_train_plain, synth_dataset, LrConfig, LrDataset};
pub use program::{random_program, HomomorphicProgram, Instr};
pub use run::{run_program, RunOptions, RunReport};
pub use session::{EvalSession, LocalRefresh, RefreshChannel, Reg};
pub use sigmoid::SigmoidPoly3;
