//! Closed-form order predictors for the approximation characteristics and
//! bounded-ratio audits of computed series against them.
//!
//! The order equivalences behind the predictors hold with existential
//! constants, so an audit does not test closeness to 1: it tests that
//! value/prediction stays inside a bounded window over a geometric grid of
//! m (spread) and shows no systematic slope in the log-ratio (drift).

use std::fmt;

use crate::error::{Error, Result};
use crate::exact_values::{ClassParams, Setting};
use crate::lattice::{vol_constant, BallCounter, R};
use crate::mag::Mag;
use crate::weights::{alpha, check_decay_condition, Family, WeightFunction};

/// Which approximation quantity a predictor describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    /// Best m-term approximation σ_m.
    Sigma,
    /// Best-basis width D_m (coincides with the orthogonal width in S^p).
    Width,
    /// Best m-term orthogonal-projection approximation σ_m^⊥ in L_p.
    SigmaPerp,
    /// Greedy m-term residual G_m in L_p.
    Greedy,
    /// Orthogonal basis width D_m^⊥ in L_p.
    WidthPerp,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Quantity::Sigma => "sigma",
            Quantity::Width => "width",
            Quantity::SigmaPerp => "sigma-perp",
            Quantity::Greedy => "greedy",
            Quantity::WidthPerp => "width-perp",
        };
        write!(f, "{name}")
    }
}

/// The resolved (weight family, space, quantity) regime of a predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Doubling weights in S^p: ψ(m^{1/d})·m^{1/p−1/q}.
    PowerSigma,
    /// Doubling weights in S^p: ψ(m^{1/d}), times m^{1/p−1/q} when p < q.
    PowerWidth,
    /// Sub-exponential/exponential decay in S^p:
    /// ψ(ñ_m)·(m·α(ψ,ñ_m))^{1/p−1/q} with ñ_m = (m/M_{r,d})^{1/d}.
    FastSigma,
    /// Same family, width for q ≤ p: ψ(ñ_m).
    FastWidth,
    /// Exact width for q ≤ p and any non-increasing weight: ψ(n_{m+1}).
    ExactShellWidth,
    /// Super-exponential decay in S^p: value concentrates on the boundary
    /// shell s with V_{s−1} ≤ m < V_s; branches on the shell-edge selector.
    ConcentratedSigma,
    /// Super-exponential width for p < q: ψ(s)·(V_s−m)^{1/p−1/q}.
    ConcentratedWidth,
    /// Doubling weights in L_p: σ_m^⊥ and the greedy residual.
    PowerLpResidual,
    /// Doubling weights in L_p: σ_m as a point order.
    PowerLpSigma,
    /// Doubling weights in L_p, 2 < p < ∞ without the strong slope: σ_m is
    /// only pinned between two orders; predictions are intervals.
    PowerLpSigmaGap,
    /// Doubling weights in L_p: D_m^⊥ for p′ < q.
    PowerLpWidthPerp,
    /// Exact L_p width for q ≤ p′ and any non-increasing weight: ψ(n_{m+1}).
    ExactShellWidthPerp,
    /// d = 1, exponential or faster decay in L_p: ψ(⌊(m+1)/2⌋).
    FastLpLine,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Regime::PowerSigma => "power-sigma",
            Regime::PowerWidth => "power-width",
            Regime::FastSigma => "fast-decay-sigma",
            Regime::FastWidth => "fast-decay-width",
            Regime::ExactShellWidth => "exact-shell-width",
            Regime::ConcentratedSigma => "shell-edge-sigma",
            Regime::ConcentratedWidth => "shell-edge-width",
            Regime::PowerLpResidual => "power-lp-residual",
            Regime::PowerLpSigma => "power-lp-sigma",
            Regime::PowerLpSigmaGap => "power-lp-sigma-gap",
            Regime::PowerLpWidthPerp => "power-lp-width-perp",
            Regime::ExactShellWidthPerp => "exact-shell-width-perp",
            Regime::FastLpLine => "fast-lp-line",
        };
        write!(f, "{name}")
    }
}

/// A predicted order: a point for most regimes, a two-sided window where
/// only sandwiching bounds are known.
#[derive(Clone, Copy, Debug)]
pub enum Prediction {
    Point(Mag),
    Interval { lower: Mag, upper: Mag },
}

impl Prediction {
    pub fn lower(&self) -> Mag {
        match self {
            Prediction::Point(v) => *v,
            Prediction::Interval { lower, .. } => *lower,
        }
    }

    pub fn upper(&self) -> Mag {
        match self {
            Prediction::Point(v) => *v,
            Prediction::Interval { upper, .. } => *upper,
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Prediction::Point(_))
    }
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Hölder conjugate: p′ = p/(p−1), with 1′ = ∞ and ∞′ = 1.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Horizon for the numeric vanishing-ratio check t^β·ψ(t+1)/ψ(t) → 0.
const DECAY_HORIZON: f64 = 4096.0;

fn require_power_slope(w: &WeightFunction, threshold: f64) -> Result<()> {
    if !w.form().is_eventually_convex() {
        return Err(Error::RegimeMismatch(
            "this regime needs an eventually convex weight".into(),
        ));
    }
    match w.form().liminf_slope() {
        Some(b) if b > threshold => Ok(()),
        Some(b) => Err(Error::RegimeMismatch(format!(
            "decay slope {b} does not exceed the required threshold {threshold}"
        ))),
        None => Err(Error::RegimeMismatch(
            "decay slope of the weight is not available in closed form".into(),
        )),
    }
}

fn require_vanishing_ratio(w: &WeightFunction, beta: f64, d: u32) -> Result<()> {
    // On the line (β = 0) the condition reduces to ψ(t+1)/ψ(t) → 0, which
    // every super-exponential weight satisfies.
    if d == 1 || beta <= 0.0 {
        return Ok(());
    }
    let chk = check_decay_condition(w, beta, DECAY_HORIZON)?;
    if chk.pass {
        Ok(())
    } else {
        Err(Error::RegimeMismatch(format!(
            "t^{beta}·ψ(t+1)/ψ(t) not vanishing by t = {DECAY_HORIZON} \
             (witness t = {:?}, last value {:.3e})",
            chk.witness_t, chk.last_value
        )))
    }
}

/// A validated order predictor: class parameters, weight, quantity, and the
/// regime resolved from the weight's decay family. Construction checks the
/// regime's validity conditions (convexity, slope thresholds,
/// vanishing-ratio conditions); `predict` then evaluates the closed form.
///
/// Predictions are positive. For the power and fast-decay regimes they are
/// non-increasing in m from small m on; the shell-edge regimes are
/// non-increasing up to the bounded shell-placement factor.
#[derive(Clone, Debug)]
pub struct OrderPredictor {
    params: ClassParams,
    weight: WeightFunction,
    quantity: Quantity,
    regime: Regime,
}

impl OrderPredictor {
    /// Predictor for σ_m or D_m in S^p.
    pub fn sp(params: &ClassParams, w: &WeightFunction, quantity: Quantity) -> Result<Self> {
        let (p, q) = (params.p, params.q);
        let d = params.d as f64;
        if !matches!(quantity, Quantity::Sigma | Quantity::Width) {
            return Err(Error::InvalidParameter(format!(
                "S^p predictors cover sigma and width; got {quantity}"
            )));
        }
        let regime = match (w.family(), quantity) {
            (Family::PowerType, Quantity::Sigma) => {
                if p < q {
                    require_power_slope(w, d * (inv(p) - inv(q)))?;
                }
                Regime::PowerSigma
            }
            (Family::PowerType, Quantity::Width) => {
                if p < q {
                    require_power_slope(w, d * (inv(p) - inv(q)))?;
                }
                Regime::PowerWidth
            }
            (Family::SubExponential | Family::Exponential, Quantity::Sigma) => Regime::FastSigma,
            (Family::SubExponential | Family::Exponential, Quantity::Width) => {
                if q <= p {
                    Regime::FastWidth
                } else {
                    // For p < q the width has the same order as σ_m.
                    Regime::FastSigma
                }
            }
            (Family::SuperExponential, Quantity::Sigma) => {
                let beta = (d - 1.0) * if p < q { inv(p) } else { inv(q) };
                require_vanishing_ratio(w, beta, params.d)?;
                Regime::ConcentratedSigma
            }
            (Family::SuperExponential, Quantity::Width) => {
                if q <= p {
                    Regime::ExactShellWidth
                } else {
                    require_vanishing_ratio(w, (d - 1.0) * (inv(p) - inv(q)), params.d)?;
                    Regime::ConcentratedWidth
                }
            }
            (Family::GenericMonotone, Quantity::Width) if q <= p => Regime::ExactShellWidth,
            (Family::GenericMonotone, Quantity::Sigma | Quantity::Width) => {
                return Err(Error::RegimeMismatch(
                    "no closed-form order predictor for tabulated weights in this regime".into(),
                ))
            }
            // Ruled out by the quantity guard above.
            (_, Quantity::SigmaPerp | Quantity::Greedy | Quantity::WidthPerp) => unreachable!(),
        };
        Ok(OrderPredictor { params: *params, weight: w.clone(), quantity, regime })
    }

    /// Predictor for σ_m, σ_m^⊥, the greedy residual, or D_m^⊥ in L_p.
    pub fn lp(params: &ClassParams, w: &WeightFunction, quantity: Quantity) -> Result<Self> {
        let (p, q) = (params.p, params.q);
        let d = params.d as f64;
        if p < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "L_p predictors need p ≥ 1, got {p}"
            )));
        }
        let pp = conjugate(p);
        let fam = w.family();
        let regime = match quantity {
            Quantity::Width => {
                return Err(Error::InvalidParameter(
                    "in L_p the basis width is width-perp; plain width is an S^p quantity".into(),
                ))
            }
            Quantity::WidthPerp => {
                if p.is_infinite() {
                    return Err(Error::InvalidParameter(
                        "the width-perp predictor needs p < ∞".into(),
                    ));
                }
                if q <= pp {
                    Regime::ExactShellWidthPerp
                } else {
                    match fam {
                        Family::PowerType => {
                            lp_residual_conditions(params, w)?;
                            Regime::PowerLpWidthPerp
                        }
                        Family::Exponential | Family::SuperExponential if params.d == 1 => {
                            Regime::FastLpLine
                        }
                        _ => {
                            return Err(Error::RegimeMismatch(format!(
                                "no width-perp order predictor for a {fam} weight at d = {}",
                                params.d
                            )))
                        }
                    }
                }
            }
            Quantity::SigmaPerp | Quantity::Greedy => {
                if p.is_infinite() {
                    return Err(Error::InvalidParameter(
                        "residual predictors in L_p need p < ∞".into(),
                    ));
                }
                match fam {
                    Family::PowerType => {
                        lp_residual_conditions(params, w)?;
                        Regime::PowerLpResidual
                    }
                    Family::Exponential | Family::SuperExponential if params.d == 1 => {
                        Regime::FastLpLine
                    }
                    Family::SuperExponential => {
                        return Err(Error::RegimeMismatch(
                            "for d > 1 the residual order depends on where m sits in its \
                             shell; no single-m predictor"
                                .into(),
                        ))
                    }
                    _ => {
                        return Err(Error::RegimeMismatch(format!(
                            "no L_p residual order predictor for a {fam} weight"
                        )))
                    }
                }
            }
            Quantity::Sigma => {
                if fam != Family::PowerType {
                    return Err(Error::RegimeMismatch(format!(
                        "σ_m in L_p has a predictor only for doubling weights, not {fam}"
                    )));
                }
                if p <= 2.0 {
                    lp_residual_conditions(params, w)?;
                    Regime::PowerLpSigma
                } else {
                    // Strong slope closes the gap for 2 < p ≤ ∞.
                    let strong = params.r.value() >= 1.0
                        && q.is_finite()
                        && w.form().is_eventually_convex()
                        && matches!(w.form().liminf_slope(),
                                    Some(b) if b > d * (1.0 - inv(q)).max(0.0));
                    if strong {
                        Regime::PowerLpSigma
                    } else if p.is_finite() {
                        lp_residual_conditions(params, w)?;
                        Regime::PowerLpSigmaGap
                    } else {
                        return Err(Error::RegimeMismatch(
                            "σ_m in L_∞ needs the strong slope condition".into(),
                        ));
                    }
                }
            }
        };
        Ok(OrderPredictor { params: *params, weight: w.clone(), quantity, regime })
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn params(&self) -> &ClassParams {
        &self.params
    }

    /// The predicted order at m ≥ 1.
    pub fn predict(&self, m: u128) -> Result<Prediction> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "order predictors are defined for m ≥ 1".into(),
            ));
        }
        let pr = &self.params;
        let w = &self.weight;
        let d = pr.d as f64;
        let (ip, iq) = (inv(pr.p), inv(pr.q));
        let mf = m as f64;
        let ln_m = mf.ln();
        let ln = match self.regime {
            Regime::PowerSigma => w.ln_eval(mf.powf(1.0 / d)) + (ip - iq) * ln_m,
            Regime::PowerWidth => {
                let base = w.ln_eval(mf.powf(1.0 / d));
                if pr.q <= pr.p { base } else { base + (ip - iq) * ln_m }
            }
            Regime::FastSigma => {
                let t = (mf / vol_constant(pr.r, pr.d)).powf(1.0 / d).max(1.0);
                let a = alpha(w, t)?;
                w.ln_eval(t) + (ip - iq) * (mf * a).ln()
            }
            Regime::FastWidth => {
                let t = (mf / vol_constant(pr.r, pr.d)).powf(1.0 / d).max(1.0);
                w.ln_eval(t)
            }
            Regime::ExactShellWidth | Regime::ExactShellWidthPerp => {
                let s = BallCounter::new(pr.r, pr.d).n_of(m + 1)?;
                w.ln_eval(s.max(1) as f64)
            }
            Regime::ConcentratedSigma => {
                let counter = BallCounter::new(pr.r, pr.d);
                let s = counter.n_of(m + 1)?;
                let v_s = counter.v(s)? as f64;
                let v_prev = if s == 0 { 0.0 } else { counter.v(s - 1)? as f64 };
                let psi = w.ln_eval(s.max(1) as f64);
                let early = pr.p.is_infinite()
                    || mf == v_prev
                    || pr.p * (v_s - mf) >= pr.q * (v_s - v_prev);
                if pr.q <= pr.p && early {
                    psi - (iq - ip) * (mf + 1.0 - v_prev).ln()
                } else {
                    psi + ip * (v_s - mf).ln() - (d - 1.0) / (pr.q * d) * ln_m
                }
            }
            Regime::ConcentratedWidth => {
                let counter = BallCounter::new(pr.r, pr.d);
                let s = counter.n_of(m + 1)?;
                let v_s = counter.v(s)? as f64;
                w.ln_eval(s.max(1) as f64) + (ip - iq) * (v_s - mf).ln()
            }
            Regime::PowerLpResidual => {
                let e = if pr.p <= 2.0 { 0.5 - iq } else { 1.0 - ip - iq };
                w.ln_eval(mf.powf(1.0 / d)) + e * ln_m
            }
            Regime::PowerLpSigma => w.ln_eval(mf.powf(1.0 / d)) + (0.5 - iq) * ln_m,
            Regime::PowerLpSigmaGap => {
                let base = w.ln_eval(mf.powf(1.0 / d));
                return Ok(Prediction::Interval {
                    lower: Mag::from_ln(base + (0.5 - iq) * ln_m),
                    upper: Mag::from_ln(base + (1.0 - ip - iq) * ln_m),
                });
            }
            Regime::PowerLpWidthPerp => {
                let e = if pr.p < 2.0 { 0.5 - iq } else { 1.0 - ip - iq };
                w.ln_eval(mf.powf(1.0 / d)) + e * ln_m
            }
            Regime::FastLpLine => w.ln_eval((((m + 1) / 2).max(1)) as f64),
        };
        Ok(Prediction::Point(Mag::from_ln(ln)))
    }
}

fn lp_residual_conditions(params: &ClassParams, w: &WeightFunction) -> Result<()> {
    let pp = conjugate(params.p);
    if params.q > pp {
        let d = params.d as f64;
        let thr = if params.p <= 2.0 {
            d * (0.5 - inv(params.q))
        } else {
            d * (1.0 - inv(params.p) - inv(params.q))
        };
        require_power_slope(w, thr)
    } else {
        Ok(())
    }
}

/// One-call S^p prediction (always a point).
pub fn predict_sp(
    params: &ClassParams,
    w: &WeightFunction,
    m: u128,
    quantity: Quantity,
) -> Result<Mag> {
    match OrderPredictor::sp(params, w, quantity)?.predict(m)? {
        Prediction::Point(v) => Ok(v),
        Prediction::Interval { .. } => Err(Error::InvalidParameter(
            "S^p predictions are points".into(),
        )),
    }
}

/// One-call L_p prediction (a point, or an interval where only sandwiching
/// bounds are known).
pub fn predict_lp(
    params: &ClassParams,
    w: &WeightFunction,
    m: u128,
    quantity: Quantity,
) -> Result<Prediction> {
    OrderPredictor::lp(params, w, quantity)?.predict(m)
}

/// Certified computable upper bound for σ_m^⊥ and the greedy residual in
/// L_p (1 ≤ p < ∞): the exact σ_m of the same class in S^2 when p ≤ 2, and
/// in S^{p′} when p ≥ 2.
pub fn upper_chain_lp(params: &ClassParams, w: &WeightFunction, m: u128) -> Result<Mag> {
    if params.p < 1.0 || params.p.is_infinite() {
        return Err(Error::InvalidParameter(
            "the computable upper chain needs 1 ≤ p < ∞".into(),
        ));
    }
    let chain_p = if params.p <= 2.0 { 2.0 } else { conjugate(params.p) };
    let chained = ClassParams::new(chain_p, params.q, params.r, params.d)?;
    Setting::new(chained, w.clone())?.sigma_m(m)
}

/// The default mid-shell sequence m(s) = V_{s−1} + ⌈ν_s/2⌉, which keeps
/// V_s − m(s) comparable to the shell size ν_s.
pub fn mid_shell_m(r: R, d: u32, s: u32) -> Result<u128> {
    if s == 0 {
        return Err(Error::InvalidParameter("mid-shell m needs a shell index s ≥ 1".into()));
    }
    let counter = BallCounter::new(r, d);
    Ok(counter.v(s - 1)? + (counter.nu(s)? + 1) / 2)
}

/// Strictly increasing integer grid from `lo` to `hi` with roughly constant
/// ratio `factor` between neighbors; both endpoints included.
pub fn geometric_grid(lo: u128, hi: u128, factor: f64) -> Result<Vec<u128>> {
    if lo == 0 || hi < lo {
        return Err(Error::InvalidParameter("grid needs 1 ≤ lo ≤ hi".into()));
    }
    if !(factor > 1.0) {
        return Err(Error::InvalidParameter("grid factor must exceed 1".into()));
    }
    let mut grid = Vec::new();
    let mut x = lo as f64;
    loop {
        let m = (x.round() as u128).clamp(lo, hi);
        if grid.last() != Some(&m) {
            grid.push(m);
        }
        if m >= hi {
            break;
        }
        x *= factor;
    }
    if grid.last() != Some(&hi) {
        grid.push(hi);
    }
    Ok(grid)
}

/// One audited point.
#[derive(Clone, Debug)]
pub struct AuditRow {
    pub m: u128,
    pub value: Mag,
    pub prediction: Prediction,
    /// value / prediction (geometric midpoint for interval predictions).
    pub ratio: f64,
}

/// Result of a bounded-ratio audit of a computed series against a
/// predictor: PASS means the ratios stayed inside the spread window and —
/// for point predictions — showed no systematic drift.
#[derive(Clone, Debug)]
pub struct OrderAudit {
    pub rows: Vec<AuditRow>,
    pub regime: Regime,
    pub quantity: Quantity,
    /// Smallest value / upper-prediction over the grid.
    pub ratio_min: f64,
    /// Largest value / lower-prediction over the grid.
    pub ratio_max: f64,
    /// ratio_max / ratio_min.
    pub spread: f64,
    pub spread_bound: f64,
    /// Least-squares slope of log10(ratio) against log10(m).
    pub drift_per_decade: f64,
    /// Whether the drift gate applied (point predictions only; interval
    /// predictions are checked for containment alone).
    pub drift_checked: bool,
    pub pass: bool,
}

fn lsq_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Audits a computed (m, value) series against a predictor. All values and
/// predictions must be positive and finite; ratios are formed in the log
/// domain so far-underflowing magnitudes audit exactly like moderate ones.
pub fn ratio_audit(
    series: &[(u128, Mag)],
    predictor: &OrderPredictor,
    spread_bound: f64,
) -> Result<OrderAudit> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("ratio audit needs a non-empty series".into()));
    }
    if !(spread_bound >= 1.0) {
        return Err(Error::InvalidParameter("spread bound must be ≥ 1".into()));
    }
    let mut rows = Vec::with_capacity(series.len());
    let mut min_vs_upper = f64::INFINITY;
    let mut max_vs_lower = f64::NEG_INFINITY;
    let mut pts = Vec::with_capacity(series.len());
    let mut interval_seen = false;
    for &(m, value) in series {
        if value.is_zero() || !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "audited value at m = {m} must be positive and finite"
            )));
        }
        let prediction = predictor.predict(m)?;
        let (lo, up) = (prediction.lower(), prediction.upper());
        if lo.is_zero() || !up.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prediction at m = {m} must be positive and finite"
            )));
        }
        interval_seen |= !prediction.is_point();
        let mid_ln = 0.5 * (lo.ln() + up.ln());
        let ratio_ln = value.ln() - mid_ln;
        min_vs_upper = min_vs_upper.min(value.ln() - up.ln());
        max_vs_lower = max_vs_lower.max(value.ln() - lo.ln());
        pts.push(((m as f64).log10(), ratio_ln / std::f64::consts::LN_10));
        rows.push(AuditRow { m, value, prediction, ratio: ratio_ln.exp() });
    }
    let drift = lsq_slope(&pts);
    let spread = (max_vs_lower - min_vs_upper).exp();
    let drift_checked = !interval_seen;
    let pass = spread <= spread_bound
        && (!drift_checked || drift.abs() <= crate::tolerances::DRIFT_PER_DECADE);
    Ok(OrderAudit {
        rows,
        regime: predictor.regime(),
        quantity: predictor.quantity(),
        ratio_min: min_vs_upper.exp(),
        ratio_max: max_vs_lower.exp(),
        spread,
        spread_bound,
        drift_per_decade: drift,
        drift_checked,
        pass,
    })
}
