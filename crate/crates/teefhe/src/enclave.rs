//! The simulated trusted enclave that refreshes noisy ciphertexts.
//!
//! The enclave holds each client's provisioned secrets and exposes a narrow
//! three-call interface mirroring marshalled trusted-module entry points:
//! [`Enclave::configure_para`] accepts encryption parameters,
//! [`Enclave::set_key`] accepts the channel-sealed key pair, and
//! [`Enclave::decrease_noise`] performs the refresh — decrypt, pad to n + 1
//! logical slots, re-encrypt symmetrically at fresh noise. Everything
//! crossing the boundary is a byte buffer; rich objects never cross.
//!
//! The refresh path is the security-critical region: every touch of secret
//! data goes through the traced word layer (`ring::ct`), so its execution
//! trace can be captured and compared across secret inputs. With the
//! parameters and randomness stream fixed, the trace is identical for every
//! secret key and every plaintext, including the all-zero one — the padded
//! n + 1 buffer is always walked in full.
//!
//! ## Garbage in, garbage out
//!
//! `decrease_noise` cannot detect an input whose noise already exceeds the
//! decryption threshold: it decrypts to whatever the rounding yields and
//! re-encrypts that value faithfully. Keeping ciphertexts above zero budget
//! is the caller's job (the scheduler's admission policy exists for exactly
//! this reason).

use std::collections::HashMap;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::proto::aead;
use crate::ring::{RandomStream, SecretSlice, SecretSliceMut};
use crate::she::{
    deserialize_ciphertext_for, deserialize_params, deserialize_public_key_prefix,
    deserialize_secret_key_prefix, decrypt_traced, encrypt_symmetric, encrypt_symmetric_traced,
    noise_budget_exact, serialize_ciphertext, Plaintext, PublicKey, SecretKey, SheContext,
};

/// The enclave's serialized policy constants.
///
/// The attestation "measurement" is the digest of this block, standing in
/// for a build-time hash of the trusted module. Clients pin the digest and
/// refuse to provision secrets to a module whose policy differs.
const POLICY: &[u8] = b"teefhe-enclave policy v1\n\
    refresh = decrypt; pad to n+1 slots; re-encrypt symmetric fresh\n\
    secret access = traced word ops only (add/sub/mul/round-div/cmov)\n\
    randomness = counted stream, secret-independent consumption\n\
    key delivery = sealed, channel key, client-id bound\n";

/// One provisioned client session.
struct Session {
    /// Channel key agreed during the handshake; opens sealed key payloads.
    channel_key: [u8; aead::KEY_LEN],
    /// Evaluation context, present after `configure_para`.
    ctx: Option<SheContext>,
    /// Client key pair, present after `set_key`.
    keys: Option<(SecretKey, PublicKey)>,
}

/// Interior state behind the session-table lock.
struct EnclaveState {
    rng: RandomStream,
    sessions: HashMap<[u8; 16], Session>,
    /// Contexts by parameter identity, shared across sessions.
    contexts: HashMap<u64, SheContext>,
    /// How many contexts this enclave has actually built (cache misses).
    builds: u64,
}

/// The simulated trusted module.
///
/// All methods take `&self`; the session table sits behind a mutex that is
/// held only for map access and state snapshots, never across a refresh
/// computation, so a pool of worker threads can refresh different clients'
/// ciphertexts concurrently.
pub struct Enclave {
    state: Mutex<EnclaveState>,
}

impl Enclave {
    /// Creates an enclave with operating-system randomness.
    pub fn new() -> Self {
        Self::with_rng(RandomStream::from_entropy())
    }

    /// Creates an enclave with a caller-supplied randomness stream.
    ///
    /// Fixing the stream makes every refresh deterministic, which trace
    /// comparisons and reproducible tests rely on.
    pub fn with_rng(rng: RandomStream) -> Self {
        Enclave {
            state: Mutex::new(EnclaveState {
                rng,
                sessions: HashMap::new(),
                contexts: HashMap::new(),
                builds: 0,
            }),
        }
    }

    /// The module measurement: a digest over the serialized policy block.
    ///
    /// Clients pin this value and verify it during the handshake before any
    /// secret is provisioned.
    pub fn measurement() -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"teefhe-measurement-v1");
        h.update(POLICY);
        h.finalize().into()
    }

    /// Registers (or replaces) a session after a completed handshake.
    ///
    /// A replaced session starts unprovisioned: parameters and keys must be
    /// delivered again over the new channel.
    pub fn open_session(&self, client_id: [u8; 16], channel_key: [u8; aead::KEY_LEN]) {
        let mut state = self.state.lock().expect("enclave lock");
        state.sessions.insert(
            client_id,
            Session { channel_key, ctx: None, keys: None },
        );
    }

    /// Accepts encryption parameters for a client.
    ///
    /// The serialized parameters are fully re-validated. Contexts are cached
    /// by parameter identity: configuring the same parameters again — for
    /// this client or any other — reuses the existing transform tables.
    /// Reconfiguring a client with *different* parameters replaces its
    /// context and invalidates any provisioned keys.
    pub fn configure_para(&self, client_id: &[u8; 16], params_bytes: &[u8]) -> Result<()> {
        let params = deserialize_params(params_bytes)?;
        let id = params.params_id();
        let mut state = self.state.lock().expect("enclave lock");
        let state = &mut *state;
        if !state.sessions.contains_key(client_id) {
            return Err(Error::Enclave("no open session for client".into()));
        }
        let ctx = match state.contexts.get(&id) {
            Some(ctx) => ctx.clone(),
            None => {
                let ctx = SheContext::new(params)?;
                state.contexts.insert(id, ctx.clone());
                state.builds += 1;
                ctx
            }
        };
        let session = state.sessions.get_mut(client_id).expect("checked above");
        match &session.ctx {
            Some(current) if current.params().params_id() == id => {
                // Identical parameters: nothing to do, keys stay valid.
            }
            _ => {
                session.ctx = Some(ctx);
                session.keys = None;
            }
        }
        Ok(())
    }

    /// Accepts the client's sealed key pair.
    ///
    /// `sealed` carries the concatenated secret-key and public-key
    /// envelopes, encrypted under the session's channel key with the given
    /// nonce and bound to the client identifier as associated data. The
    /// call fails if parameters have not been configured, the seal does not
    /// verify, or the keys were generated for different parameters.
    pub fn set_key(
        &self,
        client_id: &[u8; 16],
        nonce: &[u8; aead::NONCE_LEN],
        sealed: &[u8],
    ) -> Result<()> {
        let mut state = self.state.lock().expect("enclave lock");
        let session = state
            .sessions
            .get_mut(client_id)
            .ok_or_else(|| Error::Enclave("no open session for client".into()))?;
        let ctx = session
            .ctx
            .clone()
            .ok_or_else(|| Error::Enclave("set_key before configure_para".into()))?;
        let opened = aead::open(&session.channel_key, nonce, client_id, sealed)?;
        let (sk, sk_len) = deserialize_secret_key_prefix(&opened)?;
        let (pk, pk_len) = deserialize_public_key_prefix(&opened[sk_len..])?;
        if sk_len + pk_len != opened.len() {
            return Err(Error::Deserialize {
                offset: sk_len + pk_len,
                reason: "trailing bytes after key pair".into(),
            });
        }
        let expected = ctx.params().params_id();
        if sk.params_id() != expected || pk.params_id() != expected {
            return Err(Error::ParameterMismatch(
                "provisioned keys were generated for different parameters".into(),
            ));
        }
        session.keys = Some((sk, pk));
        Ok(())
    }

    /// Refreshes one ciphertext: decrypt, pad, re-encrypt at fresh noise.
    ///
    /// Takes and returns serialized ciphertexts. The decrypted coefficients
    /// land in an n + 1 slot secret buffer (the extra slot fixed at zero) so
    /// every input, the all-zero plaintext included, drives the identical
    /// store/load pattern; re-encryption reads all n + 1 slots back through
    /// the traced secret layer. See the module notes on undetectable
    /// garbage inputs.
    pub fn decrease_noise(&self, client_id: &[u8; 16], ct_bytes: &[u8]) -> Result<Vec<u8>> {
        let (ctx, sk, seed) = self.snapshot(client_id)?;
        let ct = deserialize_ciphertext_for(&ctx, ct_bytes)?;
        let n = ctx.params().n();
        let mut padded = vec![0u64; n + 1];
        {
            let mut out = SecretSliceMut::new(&mut padded);
            decrypt_traced(&ctx, &sk, &ct, &mut out)?;
        }
        let mut rng = RandomStream::from_u64_seed(seed);
        let refreshed = {
            let slots = SecretSlice::new(&padded);
            encrypt_symmetric_traced(&ctx, &sk, &slots, &mut rng)?
        };
        serialize_ciphertext(ctx.params(), &refreshed)
    }

    /// Measures the exact noise budget of a fresh symmetric encryption
    /// under this client's key — the level `decrease_noise` restores to.
    ///
    /// The server derives its admission threshold from this value when the
    /// session is provisioned.
    pub fn fresh_budget(&self, client_id: &[u8; 16]) -> Result<u32> {
        let (ctx, sk, seed) = self.snapshot(client_id)?;
        let mut rng = RandomStream::from_u64_seed(seed);
        let zero = Plaintext::zero(ctx.params())?;
        let ct = encrypt_symmetric(&ctx, &sk, &zero, &mut rng)?;
        noise_budget_exact(&ctx, &sk, &ct)
    }

    /// Number of distinct contexts this enclave has built (cache misses).
    pub fn context_builds(&self) -> u64 {
        self.state.lock().expect("enclave lock").builds
    }

    /// Number of open sessions.
    pub fn session_count(&self) -> usize {
        self.state.lock().expect("enclave lock").sessions.len()
    }

    /// Snapshots a provisioned session (context, secret key, child seed)
    /// under a brief lock so the computation itself runs unlocked.
    fn snapshot(&self, client_id: &[u8; 16]) -> Result<(SheContext, SecretKey, u64)> {
        let mut state = self.state.lock().expect("enclave lock");
        let state = &mut *state;
        let session = state
            .sessions
            .get(client_id)
            .ok_or_else(|| Error::Enclave("no open session for client".into()))?;
        let ctx = session
            .ctx
            .clone()
            .ok_or_else(|| Error::Enclave("session has no parameters".into()))?;
        let (sk, _) = session
            .keys
            .as_ref()
            .ok_or_else(|| Error::Enclave("session has no keys".into()))?;
        Ok((ctx, sk.clone(), state.rng.next_word()))
    }
}

impl Default for Enclave {
    fn default() -> Self {
        Self::new()
    }
}
