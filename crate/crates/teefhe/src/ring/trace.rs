//! Differential execution-trace harness.
//!
//! Code that runs inside the (simulated) enclave must behave identically for
//! every secret it touches. We check that the way hardware tracers do:
//! record an event stream while the code runs, then compare streams obtained
//! under different secrets with identical public inputs and RNG seed. The
//! instrumented word layer ([`crate::ring::ct`]) emits one event per word
//! operation, and secret-tagged buffers emit the index of every element
//! access; public-buffer accesses are deliberately not recorded, because
//! public-dependent flow is allowed.
//!
//! The recorder is thread-confined: a capture only sees events produced on
//! the calling thread, and captures cannot nest.

use std::cell::RefCell;

/// Kind tag of one instrumented event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceOp {
    /// Read of a secret-tagged buffer element (index recorded).
    SecretLoad,
    /// Write of a secret-tagged buffer element (index recorded).
    SecretStore,
    /// Modular addition in the instrumented layer.
    AddMod,
    /// Modular subtraction in the instrumented layer.
    SubMod,
    /// Modular multiplication in the instrumented layer.
    MulMod,
    /// Branch-free conditional selection (index recorded for buffer moves).
    CondMove,
    /// Rounded division in the instrumented layer (decryption scaling).
    RoundDiv,
    /// One 64-bit word drawn from a random stream.
    RngWord,
}

/// One recorded event: operation kind plus the touched secret index, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    /// What ran.
    pub op: TraceOp,
    /// Secret-buffer element index, or `None` for scalar/word events.
    pub index: Option<u32>,
}

/// An ordered event stream captured from one traced computation.
#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    /// Free-form label; excluded from equality comparison.
    pub label: String,
    /// The recorded events, in program order.
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    /// Number of recorded events.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// True if nothing was recorded.
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

thread_local! {
    static RECORDER: RefCell<Option<Vec<TraceEvent>>> = const { RefCell::new(None) };
}

/// True while a capture is running on this thread.
#[inline]
pub fn trace_active() -> bool {
    RECORDER.with(|r| r.borrow().is_some())
}

/// Records one event if a capture is active on this thread.
#[inline]
pub(crate) fn record(op: TraceOp, index: Option<u32>) {
    RECORDER.with(|r| {
        if let Some(events) = r.borrow_mut().as_mut() {
            events.push(TraceEvent { op, index });
        }
    });
}

/// Runs `thunk` with the recorder armed and returns its trace and result.
///
/// Panics if a capture is already active on this thread — nesting would
/// silently merge two streams and make comparisons meaningless.
pub fn trace_capture<T>(label: &str, thunk: impl FnOnce() -> T) -> (ExecutionTrace, T) {
    RECORDER.with(|r| {
        let mut slot = r.borrow_mut();
        assert!(slot.is_none(), "trace_capture cannot nest");
        *slot = Some(Vec::new());
    });
    let result = thunk();
    let events = RECORDER.with(|r| r.borrow_mut().take().expect("recorder vanished"));
    (
        ExecutionTrace {
            label: label.to_string(),
            events,
        },
        result,
    )
}

/// Element-wise equality of two event streams. Labels are ignored.
pub fn trace_equal(t1: &ExecutionTrace, t2: &ExecutionTrace) -> bool {
    t1.events == t2.events
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traced_toy(values: &[u64]) -> u64 {
        let mut acc = 0u64;
        for (i, &v) in values.iter().enumerate() {
            record(TraceOp::SecretLoad, Some(i as u32));
            acc = acc.wrapping_add(v);
            record(TraceOp::AddMod, None);
        }
        acc
    }

    #[test]
    fn same_computation_twice_is_equal() {
        let (t1, s1) = trace_capture("first", || traced_toy(&[1, 2, 3]));
        let (t2, s2) = trace_capture("second", || traced_toy(&[9, 9, 9]));
        assert_eq!(s1, 6);
        assert_eq!(s2, 27);
        // Different data, same access pattern: traces match, labels differ.
        assert!(trace_equal(&t1, &t2));
        assert_eq!(t1.len(), 6);
    }

    #[test]
    fn data_dependent_flow_is_detected() {
        let leaky = |values: &[u64]| {
            let mut acc = 0u64;
            for (i, &v) in values.iter().enumerate() {
                record(TraceOp::SecretLoad, Some(i as u32));
                if v & 1 == 1 {
                    // Extra work only for odd values: classic leak.
                    record(TraceOp::MulMod, None);
                    acc = acc.wrapping_add(v * 3);
                } else {
                    acc = acc.wrapping_add(v);
                }
            }
            acc
        };
        let (t1, _) = trace_capture("even", || leaky(&[2, 4]));
        let (t2, _) = trace_capture("odd", || leaky(&[3, 4]));
        assert!(!trace_equal(&t1, &t2));
    }

    #[test]
    fn recording_outside_capture_is_dropped() {
        record(TraceOp::MulMod, None);
        let (t, _) = trace_capture("clean", || ());
        assert!(t.is_empty());
        assert!(!trace_active());
    }

    #[test]
    #[should_panic(expected = "cannot nest")]
    fn nesting_panics() {
        trace_capture("outer", || {
            trace_capture("inner", || ()).0;
        });
    }
}
