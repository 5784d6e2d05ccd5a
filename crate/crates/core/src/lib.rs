//! Profiling generative-model dispositions through repeated
//! constraint-selection elicitation.
//!
//! The pipeline:
//!
//! 1. [`pool`]: load a constraint pool and draw seeded permutations of it.
//! 2. [`providers`]: elicit one budget-sized selection per isolated session,
//!    from a live HTTP model or the offline simulator.
//! 3. [`harness`]: run model × instruction × replication grids into an
//!    append-only, resumable JSONL store.
//! 4. [`metrics`]: mean pairwise Jaccard consistency, Gini–Simpson and
//!    effective-number diversity per cell.
//! 5. [`landscape`]: a shared PCA embedding of constraint frequency
//!    profiles with per-cell weighted density contours, rendered to SVG or
//!    plot data.
//!
//! [`cli`] wires these into the `disposition` command.

pub mod cli;
pub mod harness;
pub mod landscape;
pub mod metrics;
pub mod pool;
pub mod providers;
pub mod seed;
