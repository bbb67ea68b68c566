//! The refresh admission policy.
//!
//! A client reports two numbers before shipping a ciphertext: its estimated
//! remaining noise budget (bits) and the estimated cost (bits) of the next
//! homomorphic operation it wants to run. The server combines the report
//! with current queue pressure:
//!
//! - **Mandatory** admission when the next operation would exhaust the
//!   budget — deferring would leave the ciphertext undecryptable, so the
//!   queue cap does not apply.
//! - **Eager** admission when the budget has sunk to the eager threshold
//!   and the queue still has headroom (fewer waiting tasks than twice the
//!   worker-pool size). Refreshing early smooths load without risking
//!   anything.
//! - **Defer** otherwise: the ciphertext still has room, let it keep
//!   computing.

/// A client's self-reported noise state, as carried by the wire protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseReport {
    /// Estimated remaining budget of the ciphertext, in bits.
    pub budget: u32,
    /// Estimated budget cost of the client's next operation, in bits.
    pub next_cost: u32,
}

/// Admission verdict for one refresh request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Keep computing; the ciphertext does not need a refresh yet.
    Defer,
    /// Admitted early: budget is low and the queue has headroom.
    AdmitEager,
    /// Admitted unconditionally: the next operation would exhaust the
    /// budget.
    AdmitMandatory,
}

impl Decision {
    /// Single-byte wire encoding.
    pub fn code(self) -> u8 {
        match self {
            Decision::Defer => 0,
            Decision::AdmitEager => 1,
            Decision::AdmitMandatory => 2,
        }
    }

    /// Decodes the wire byte; anything above 2 is not a decision.
    pub fn from_code(code: u8) -> Option<Decision> {
        match code {
            0 => Some(Decision::Defer),
            1 => Some(Decision::AdmitEager),
            2 => Some(Decision::AdmitMandatory),
            _ => None,
        }
    }

    /// True for either admitted variant.
    pub fn admitted(self) -> bool {
        !matches!(self, Decision::Defer)
    }
}

/// Tunables of the admission rule.
#[derive(Clone, Copy, Debug)]
pub struct PolicyConfig {
    /// Worker-pool size; the eager queue cap is twice this.
    pub pool_size: usize,
    /// Budget (bits) at or below which eager admission applies.
    pub eager_threshold: u32,
    /// Safety margin (bits) for the mandatory rule; default zero.
    pub mandatory_margin: u32,
}

impl PolicyConfig {
    /// Policy with the given pool size and eager threshold, zero margin.
    pub fn new(pool_size: usize, eager_threshold: u32) -> Self {
        PolicyConfig { pool_size, eager_threshold, mandatory_margin: 0 }
    }
}

/// Evaluates the admission rule for one report.
///
/// Mandatory: `budget − next_cost ≤ mandatory_margin` (saturating — a cost
/// larger than the budget is always mandatory). Otherwise eager:
/// `budget ≤ eager_threshold` **and** `queue_len < 2·pool_size`. Otherwise
/// defer.
pub fn evaluate_policy(
    report: NoiseReport,
    queue_len: usize,
    config: &PolicyConfig,
) -> Decision {
    if report.budget.saturating_sub(report.next_cost) <= config.mandatory_margin {
        return Decision::AdmitMandatory;
    }
    if report.budget <= config.eager_threshold && queue_len < 2 * config.pool_size {
        return Decision::AdmitEager;
    }
    Decision::Defer
}
