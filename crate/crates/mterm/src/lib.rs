//! Exact approximation characteristics of weighted Wiener classes of
//! multivariate periodic functions: best m-term trigonometric widths,
//! projection widths, greedy errors — exact formulas, brute-force oracles,
//! and bounded-ratio order audits.

pub mod asymptotics;
pub mod error;
pub mod exact_values;
pub mod lattice;
pub mod mag;
pub mod oracle;
pub mod spectral;
pub mod tolerances;
pub mod weights;

pub use asymptotics::{
    conjugate, geometric_grid, mid_shell_m, predict_lp, predict_sp, ratio_audit, upper_chain_lp,
    AuditRow, OrderAudit, OrderPredictor, Prediction, Quantity, Regime,
};
pub use error::{Error, Result};
pub use exact_values::{
    best_by_set, find_lm, masked_rearranged, sigma_m, widths, ClassParams, IndexSet, LmResult,
    MaskedSystem, Setting, Widths,
};
pub use lattice::{
    ball_count, c_rd, enumerate_shell, inverse_count, lr_norm, norm_le, shell_of, vol_constant,
    BallCounter, LatticeVector, R,
};
pub use mag::Mag;
pub use oracle::{
    balance_oracle, brute_best_subset, brute_width, oracle_head_sum, oracle_step_value,
    oracle_tail_sum, sup_scan_audit, BalanceScan, BruteWidth, SupScan, TruncatedUniverse,
};
pub use spectral::{
    class_norm, extremal, greedy_residual, lp_grid_norm, lp_grid_norm_auto, sp_norm,
    CoefficientField, ExtremalKind, GreedyOrder, GridNorm, Space,
};
pub use weights::{
    alpha, check_decay_condition, eta_mu, DecayCheck, Family, StepRearrangement, TailSum,
    WeightForm, WeightFunction,
};
