//! Evaluation context: a parameter set bundled with the precomputed
//! negacyclic transform tables for its ring.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::Result;
use crate::ring::NttTables;

use super::params::EncryptionParams;

/// Counts how many contexts have ever been built in this process.
///
/// Building transform tables is the expensive part of accepting a parameter
/// set, so callers that cache contexts (notably the enclave) can assert the
/// cache works by watching this counter.
static BUILD_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Returns the number of contexts built so far in this process.
pub fn contexts_built() -> u64 {
    BUILD_COUNTER.load(Ordering::SeqCst)
}

/// A parameter set together with its precomputed transform tables.
///
/// Contexts are cheap to clone (the tables sit behind an `Arc`) and are the
/// handle every key, encryption, and evaluation routine takes.
#[derive(Debug, Clone)]
pub struct SheContext {
    params: EncryptionParams,
    tables: Arc<NttTables>,
}

impl SheContext {
    /// Builds the context for a parameter set, precomputing transform tables.
    pub fn new(params: EncryptionParams) -> Result<Self> {
        let tables = Arc::new(NttTables::new(params.n(), params.q())?);
        BUILD_COUNTER.fetch_add(1, Ordering::SeqCst);
        Ok(Self { params, tables })
    }

    /// The parameter set this context was built for.
    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    /// The precomputed transform tables.
    pub fn tables(&self) -> &NttTables {
        &self.tables
    }

    /// True when both contexts share the same physical table allocation.
    ///
    /// Lets cache users assert reuse without relying on the global build
    /// counter, which other threads may advance concurrently.
    pub fn shares_tables(&self, other: &SheContext) -> bool {
        Arc::ptr_eq(&self.tables, &other.tables)
    }
}
