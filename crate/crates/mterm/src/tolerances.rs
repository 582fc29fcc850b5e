//! Pinned numeric tolerances and audit defaults shared by the library, the
//! command-line tool, and the acceptance suite. Every cross-check in the
//! workspace names its budget from here so a single change tightens or
//! relaxes the whole build consistently.

/// Relative agreement required between exact σ_m and the independent
/// plain-f64 scans (supremum scan, two-level balance scan).
pub const SIGMA_VS_ORACLE_REL: f64 = 1e-10;

/// Absolute slack allowed when checking ordering chains between exact
/// quantities (σ_m ≤ D_m ≤ E_γ, residual identities on random fields).
pub const CHAIN_TOL: f64 = 1e-12;

/// Absolute agreement between the grid L_2 norm and the ℓ_2 coefficient
/// norm (Parseval) on alias-free grids.
pub const PARSEVAL_ABS: f64 = 1e-8;

/// Default bounded-ratio spread for order audits of S^p quantities.
pub const SPREAD_DEFAULT: f64 = 32.0;

/// Wider spread for L_p audits: the computable upper chains contribute an
/// extra constant on top of the order equivalence.
pub const SPREAD_LP: f64 = 64.0;

/// Largest tolerated least-squares slope of log10(value/prediction) per
/// decade of m before an audit reports systematic drift.
pub const DRIFT_PER_DECADE: f64 = 0.05;

/// Default relative tolerance for certified infinite tail sums.
pub const TAIL_REL_DEFAULT: f64 = 1e-12;

/// Extremal constructions must come out with class norm 1 within this.
pub const EXTREMAL_CLASS_NORM_TOL: f64 = 1e-10;

/// Relative agreement between closed forms and brute-force enumerations
/// over truncated universes.
pub const BRUTE_REL: f64 = 1e-12;
