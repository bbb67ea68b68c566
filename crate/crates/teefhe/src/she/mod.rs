//! The somewhat-homomorphic encryption scheme: parameters, keys,
//! encryption, evaluation, noise accounting, and serialization.
//!
//! The scheme encrypts polynomials over a plaintext modulus `t` into pairs
//! (or, transiently, triples) of polynomials over a coefficient modulus
//! `q`, supports additions and a bounded number of multiplications, and
//! exposes both an exact (key-holder) noise budget and a calibrated
//! key-free estimator that drives refresh scheduling.

mod ciphertext;
mod context;
mod decrypt;
mod encode;
mod encrypt;
mod eval;
mod keys;
mod noise;
mod params;
mod serial;

pub use ciphertext::Ciphertext;
pub use context::{contexts_built, SheContext};
pub use decrypt::decrypt;
pub(crate) use decrypt::decrypt_traced;
pub use encode::Plaintext;
pub use encrypt::{encrypt, encrypt_symmetric};
pub(crate) use encrypt::encrypt_symmetric_traced;
pub use eval::{add, add_plain, multiply, multiply_plain, negate, relinearize};
pub use keys::{generate_eval_keys, generate_keys, EvalKeys, PublicKey, SecretKey};
pub use noise::{
    noise_budget_exact, noise_linf, BudgetEstimator, EvalOp, DEFAULT_MARGIN, DEFAULT_PROBES,
};
pub use params::{
    EncryptionParams, DEFAULT_NOISE_CLIP, DEFAULT_NOISE_WIDTH, DEFAULT_RELIN_WINDOW, MAX_DEGREE,
    MIN_DEGREE,
};
pub use serial::{
    deserialize_ciphertext, deserialize_ciphertext_for, deserialize_eval_keys,
    deserialize_params, deserialize_plaintext, deserialize_public_key, deserialize_secret_key,
    envelope_len, params_id_from_envelope, serialize_ciphertext, serialize_eval_keys,
    serialize_params,
    serialize_plaintext, serialize_public_key, serialize_secret_key, HEADER_LEN, KIND_CIPHERTEXT,
    KIND_EVAL_KEYS, KIND_PARAMS, KIND_PLAINTEXT, KIND_PUBLIC_KEY, KIND_SECRET_KEY, MAGIC, VERSION,
};
pub(crate) use serial::{deserialize_public_key_prefix, deserialize_secret_key_prefix};
