//! Ring arithmetic: moduli, polynomials, transforms, sampling, and the
//! traced constant-time word layer everything secret-touching is built on.

pub mod ct;
pub mod modulus;
pub mod ntt;
pub mod poly;
pub mod sampler;
pub mod trace;

pub use ct::{conditional_move, exponentiate_uint_mod, SecretSlice, SecretSliceMut};
pub use modulus::Modulus;
pub use ntt::NttTables;
pub use poly::{centered, negacyclic_convolve_i128, Poly};
pub use sampler::RandomStream;
pub use trace::{trace_capture, trace_equal, ExecutionTrace, TraceEvent, TraceOp};
