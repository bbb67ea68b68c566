//! Somewhat-homomorphic encryption with enclave-assisted noise refresh.
//!
//! The library implements a lattice-based scheme over power-of-two
//! cyclotomic rings in which clients evaluate bounded-depth arithmetic on
//! ciphertexts, track the remaining noise budget, and — before the budget
//! runs out — ship ciphertexts to a (simulated) trusted execution enclave
//! that decrypts and re-encrypts them at fresh noise along audited,
//! secret-independent code paths. A noise-aware scheduler in front of the
//! enclave pool admits refresh requests by urgency, and a small framed TCP
//! protocol carries the client/enclave conversation end to end.
//!
//! Layer map:
//! - [`ring`]: moduli, polynomials, transforms, samplers, execution-trace
//!   instrumentation.
//! - [`she`]: parameters, keys, encryption, homomorphic evaluation, exact
//!   noise-budget measurement and its client-side estimator, serialization.
//! - [`enclave`]: the simulated trusted module that re-encrypts noisy
//!   ciphertexts.
//! - [`sched`]: admission policy and the bounded FCFS bootstrap service.
//! - [`proto`]: wire frames, messages, the attestation-style handshake, and
//!   authenticated encryption for provisioning.
//! - [`client`]: homomorphic program execution, fixed-point codecs, and the
//!   logistic-regression training demo.
//! - [`server`]: the TCP server wiring enclave, scheduler, and protocol
//!   together.
//! - [`bench`]: primitive operation timing.
//!
//! The `examples/` directory is the guided tour: each example exercises one
//! capability end to end.

pub mod bench;
pub mod client;
pub mod enclave;
pub mod error;
pub mod proto;
pub mod ring;
pub mod sched;
pub mod server;
pub mod she;

pub use error::{Error, Result};
