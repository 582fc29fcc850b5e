//! Weight functions ψ, their decay-family classification, the stepwise
//! non-increasing rearrangement of the weight system {ψ(|k|_r)}, and
//! rigorously truncated weighted power sums.
//!
//! All series values are returned as log-domain magnitudes ([`Mag`]) because
//! quantities like Σ ψ(s)^{-q} overflow f64 immediately for exponential
//! weights.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{c_rd, count_sandwich, vol_constant, BallCounter, R};
use crate::mag::Mag;

/// Closed-form (or tabulated) weight ψ(t), positive and non-increasing on
/// t ≥ 1. The `s = 0` shell uses the convention ψ(0) := ψ(1).
#[derive(Clone, Debug, PartialEq)]
pub enum WeightForm {
    /// ψ(t) = t^{−s}, s ≥ 0.
    Pow { s: f64 },
    /// ψ(t) = t^{−s} · (1 + ln t)^{−eps}; requires s ≥ 0 and s + eps ≥ 0 so
    /// the weight is non-increasing from t = 1 on.
    PowLog { s: f64, eps: f64 },
    /// ψ(t) = exp(−a·t^sigma), a > 0, sigma > 0.
    Exp { a: f64, sigma: f64 },
    /// ψ(t) = c > 0.
    Const { c: f64 },
    /// ψ(n) = values[n−1] for integer n (positive, non-increasing);
    /// geometric interpolation between grid points, clamped past the end.
    Tabulated { values: Vec<f64> },
}

impl WeightForm {
    /// ln ψ(t) for real t ≥ 1.
    pub fn ln_eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 1.0 - 1e-12);
        match self {
            WeightForm::Pow { s } => -s * t.ln(),
            WeightForm::PowLog { s, eps } => -s * t.ln() - eps * t.ln().ln_1p(),
            WeightForm::Exp { a, sigma } => -a * t.powf(*sigma),
            WeightForm::Const { c } => c.ln(),
            WeightForm::Tabulated { values } => {
                let n = values.len();
                let i = (t.floor() as usize).min(n).max(1);
                let lo = values[i - 1].ln();
                if i >= n {
                    return values[n - 1].ln();
                }
                let hi = values[i].ln();
                lo + (t - i as f64) * (hi - lo)
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t).exp()
    }

    /// ψ(t) as a magnitude (safe for values far below f64 range).
    pub fn eval_mag(&self, t: f64) -> Mag {
        Mag::from_ln(self.ln_eval(t))
    }

    /// The local decay slope t·|ψ'(t)|/ψ(t) (right derivative for the
    /// tabulated form). `None` when ψ is locally constant.
    pub fn slope(&self, t: f64) -> Option<f64> {
        match self {
            WeightForm::Pow { s } => (*s > 0.0).then_some(*s),
            WeightForm::PowLog { s, eps } => {
                let v = s + eps / (1.0 + t.ln());
                (v != 0.0).then_some(v)
            }
            WeightForm::Exp { a, sigma } => Some(a * sigma * t.powf(*sigma)),
            WeightForm::Const { .. } => None,
            WeightForm::Tabulated { values } => {
                let i = (t.floor() as usize).max(1);
                if i >= values.len() {
                    return None;
                }
                let d = values[i - 1].ln() - values[i].ln();
                (d > 0.0).then_some(t * d)
            }
        }
    }

    /// ψ'(t+) ≤ 0 in plain f64 (may underflow to −0 for extreme weights;
    /// meant for reporting and grid verification, not certified bounds).
    pub fn deriv(&self, t: f64) -> f64 {
        match self.slope(t) {
            Some(b) => -(b / t) * self.eval(t),
            None => 0.0,
        }
    }

    /// lim_{t→∞} ψ(t) (the tabulated form clamps to its last entry).
    pub fn limit(&self) -> Mag {
        match self {
            WeightForm::Const { c } => Mag::from_value(*c),
            WeightForm::Tabulated { values } => Mag::from_value(*values.last().unwrap()),
            _ => Mag::ZERO,
        }
    }

    /// liminf of the decay slope t|ψ'|/ψ — the lower decay exponent that
    /// gates order predictors. `None` when no closed form is available.
    pub fn liminf_slope(&self) -> Option<f64> {
        match self {
            WeightForm::Pow { s } => Some(*s),
            WeightForm::PowLog { s, .. } => Some(*s),
            WeightForm::Exp { .. } => Some(f64::INFINITY),
            WeightForm::Const { .. } => Some(0.0),
            WeightForm::Tabulated { .. } => None,
        }
    }

    /// Whether ψ is convex from some point on (every closed form here is;
    /// the tabulated form checks second differences over its grid).
    pub fn is_eventually_convex(&self) -> bool {
        match self {
            WeightForm::Tabulated { values } => {
                let n = values.len();
                if n < 3 {
                    return true;
                }
                let start = 2 * n / 3;
                (start.max(1)..n - 1)
                    .all(|i| values[i + 1] - values[i] >= values[i] - values[i - 1] - 1e-12)
            }
            _ => true,
        }
    }
}

/// `Display` writes the same DSL the parser accepts.
impl fmt::Display for WeightForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightForm::Pow { s } => write!(f, "pow:s={s}"),
            WeightForm::PowLog { s, eps } => write!(f, "powlog:s={s},eps={eps}"),
            WeightForm::Exp { a, sigma } => write!(f, "exp:a={a},s={sigma}"),
            WeightForm::Const { c } => write!(f, "const:c={c}"),
            WeightForm::Tabulated { values } => {
                write!(f, "table:")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for WeightForm {
    type Err = Error;

    /// Grammar: `pow:s=2`, `powlog:s=2,eps=-1`, `exp:a=0.7,s=1` for
    /// ψ = exp(−a t^s), `const:c=0.5`, `table:1,0.5,0.25,...`.
    fn from_str(text: &str) -> Result<WeightForm> {
        let bad = |m: &str| Error::Parse(format!("weight spec `{text}`: {m}"));
        let (head, body) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| bad("expected `form:params`"))?;
        let fields = |body: &str| -> Result<Vec<(String, f64)>> {
            body.split(',')
                .map(|kv| {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    let x: f64 =
                        v.trim().parse().map_err(|_| bad(&format!("bad number `{v}`")))?;
                    Ok((k.trim().to_string(), x))
                })
                .collect()
        };
        let get = |fs: &[(String, f64)], k: &str| -> Result<f64> {
            fs.iter()
                .find(|(n, _)| n == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(&format!("missing `{k}`")))
        };
        match head.trim() {
            "pow" => {
                let s = get(&fields(body)?, "s")?;
                if !(s >= 0.0) {
                    return Err(bad("need s ≥ 0"));
                }
                Ok(WeightForm::Pow { s })
            }
            "powlog" => {
                let fs = fields(body)?;
                let (s, eps) = (get(&fs, "s")?, get(&fs, "eps")?);
                if !(s >= 0.0 && s + eps >= 0.0) {
                    return Err(bad("need s ≥ 0 and s+eps ≥ 0 for a non-increasing weight"));
                }
                Ok(WeightForm::PowLog { s, eps })
            }
            "exp" => {
                let fs = fields(body)?;
                let (a, sigma) = (get(&fs, "a")?, get(&fs, "s")?);
                if !(a > 0.0 && sigma > 0.0) {
                    return Err(bad("need a > 0 and s > 0"));
                }
                Ok(WeightForm::Exp { a, sigma })
            }
            "const" => {
                let c = get(&fields(body)?, "c")?;
                if !(c > 0.0) {
                    return Err(bad("need c > 0"));
                }
                Ok(WeightForm::Const { c })
            }
            "table" => {
                let values: Vec<f64> = body
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| bad(&format!("bad number `{v}`"))))
                    .collect::<Result<_>>()?;
                if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                    return Err(bad("need at least one positive value"));
                }
                if values.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
                    return Err(bad("values must be non-increasing"));
                }
                Ok(WeightForm::Tabulated { values })
            }
            other => Err(bad(&format!("unknown form `{other}`"))),
        }
    }
}

/// Decay family of a weight, deciding which exact-order regime applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Power-type decay with the doubling property ψ(t)/ψ(2t) ∈ [1, K]
    /// (includes constants and power-log corrections).
    PowerType,
    /// Faster than any power but exp(−a t^σ)-like with σ < 1:
    /// slope t|ψ'|/ψ → ∞ while ψ/|ψ'| still grows.
    SubExponential,
    /// ψ/|ψ'| pinched between constants (model: exp(−a t)).
    Exponential,
    /// ψ/|ψ'| ↓ 0 (model: exp(−a t^σ), σ > 1).
    SuperExponential,
    /// Tabulated monotone data with no declared closed form.
    GenericMonotone,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::PowerType => "power-type",
            Family::SubExponential => "sub-exponential",
            Family::Exponential => "exponential",
            Family::SuperExponential => "super-exponential",
            Family::GenericMonotone => "generic-monotone",
        };
        write!(f, "{name}")
    }
}

/// A verified weight: form plus family, checked on a sample grid at
/// construction. Classification is determined by the form; the grid check
/// guards against parameter combinations that break the family's defining
/// monotonicity properties.
#[derive(Clone, Debug)]
pub struct WeightFunction {
    form: WeightForm,
    family: Family,
}

const GRID_END: f64 = 64.0;

impl WeightFunction {
    pub fn new(form: WeightForm) -> Result<WeightFunction> {
        let family = match &form {
            WeightForm::Pow { .. } | WeightForm::PowLog { .. } | WeightForm::Const { .. } => {
                Family::PowerType
            }
            WeightForm::Exp { sigma, .. } => {
                if *sigma < 1.0 {
                    Family::SubExponential
                } else if *sigma == 1.0 {
                    Family::Exponential
                } else {
                    Family::SuperExponential
                }
            }
            WeightForm::Tabulated { .. } => Family::GenericMonotone,
        };
        let w = WeightFunction { form, family };
        w.verify_on_grid()?;
        Ok(w)
    }

    pub fn form(&self) -> &WeightForm {
        &self.form
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.form.eval(t)
    }

    pub fn ln_eval(&self, t: f64) -> f64 {
        self.form.ln_eval(t)
    }

    /// Grid verification of the family's defining inequalities on
    /// t ∈ {1, 1.5, 2, …, 64} (the tabulated form uses its own grid).
    fn verify_on_grid(&self) -> Result<()> {
        let fail = |m: String| Err(Error::FamilyMismatch(m));
        let grid: Vec<f64> = if let WeightForm::Tabulated { values } = &self.form {
            (1..=values.len()).map(|i| i as f64).collect()
        } else {
            let mut g = Vec::new();
            let mut t = 1.0;
            while t <= GRID_END {
                g.push(t);
                t += 0.5;
            }
            g
        };
        for w in grid.windows(2) {
            let (a, b) = (self.ln_eval(w[0]), self.ln_eval(w[1]));
            if !(a.is_finite() && b.is_finite()) || b > a + 1e-12 {
                return fail(format!("weight not positive non-increasing near t={}", w[0]));
            }
        }
        match self.family {
            Family::PowerType => {
                for &t in &grid {
                    let ratio_ln = self.ln_eval(t) - self.ln_eval(2.0 * t);
                    if ratio_ln < -1e-12 || ratio_ln > 60.0 {
                        return fail(format!("doubling ratio out of range at t={t}"));
                    }
                }
            }
            Family::SubExponential => {
                let alphas: Vec<f64> =
                    grid.iter().map(|&t| 1.0 / self.form.slope(t).unwrap_or(f64::MIN)).collect();
                if alphas.windows(2).any(|w| w[1] > w[0] + 1e-12) {
                    return fail("slope reciprocal α must be non-increasing".into());
                }
                if alphas[alphas.len() - 1] > 0.95 * alphas[0] {
                    return fail("α must decay toward 0 over the grid".into());
                }
                let ratios: Vec<f64> =
                    grid.iter().map(|&t| t / self.form.slope(t).unwrap()).collect();
                if ratios.windows(2).any(|w| w[1] < w[0] - 1e-12) {
                    return fail("ψ/|ψ'| must be non-decreasing".into());
                }
            }
            Family::Exponential => {
                let ratios: Vec<f64> =
                    grid.iter().map(|&t| t / self.form.slope(t).unwrap()).collect();
                let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| {
                    (l.min(x), h.max(x))
                });
                if hi > lo * (1.0 + 1e-9) {
                    return fail("ψ/|ψ'| must be constant for the exponential family".into());
                }
            }
            Family::SuperExponential => {
                let ratios: Vec<f64> =
                    grid.iter().map(|&t| t / self.form.slope(t).unwrap()).collect();
                if ratios.windows(2).any(|w| w[1] > w[0] + 1e-12) {
                    return fail("ψ/|ψ'| must be non-increasing".into());
                }
                if ratios[ratios.len() - 1] > 0.95 * ratios[0] {
                    return fail("ψ/|ψ'| must decay toward 0".into());
                }
            }
            Family::GenericMonotone => {}
        }
        Ok(())
    }
}

/// α(ψ, t) = ψ(t)/(t·|ψ'(t)|), the reciprocal decay slope.
pub fn alpha(w: &WeightFunction, t: f64) -> Result<f64> {
    match w.form().slope(t) {
        Some(b) => Ok(1.0 / b),
        None => Err(Error::InvalidParameter(format!(
            "α(ψ,t) undefined at t={t}: ψ is locally constant"
        ))),
    }
}

/// η(t) = ψ^{−1}(ψ(t)/2) and μ(t) = t/(η(t) − t), by bisection on ln ψ.
pub fn eta_mu(w: &WeightFunction, t: f64) -> Result<(f64, f64)> {
    let target = w.ln_eval(t) - std::f64::consts::LN_2;
    let mut hi = t.max(1.0) * 2.0;
    let t_max = 1e9;
    while w.ln_eval(hi) > target {
        hi *= 2.0;
        if hi > t_max {
            return Err(Error::InvalidParameter(format!(
                "ψ does not decay to ψ({t})/2 below t={t_max:e}"
            )));
        }
    }
    let mut lo = t;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w.ln_eval(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let eta = 0.5 * (lo + hi);
    if (w.ln_eval(eta) - target).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "bisection for η(t) did not converge (ψ not strictly decreasing here?)".into(),
        ));
    }
    Ok((eta, t / (eta - t)))
}

/// Result of the vanishing-ratio decay check: does
/// g(t) = t^β·ψ(t+1)/ψ(t) tend to 0?
#[derive(Clone, Debug)]
pub struct DecayCheck {
    pub pass: bool,
    /// First grid point witnessing the failure (g too large or increasing).
    pub witness_t: Option<f64>,
    /// g at the horizon.
    pub last_value: f64,
    /// Equivalent differential form |ψ'(T)|/ψ(T) − β·ln T at the horizon;
    /// g → 0 exactly when this diverges to +∞.
    pub remark_gap: f64,
    /// The sampled (t, g(t)) trace.
    pub trace: Vec<(f64, f64)>,
}

/// Checks lim_{t→∞} t^β·ψ(t+1)/ψ(t) = 0 on a geometric grid up to `horizon`:
/// PASS needs g below 1e−6 at the horizon and monotone decreasing over the
/// last third of the grid.
pub fn check_decay_condition(w: &WeightFunction, beta: f64, horizon: f64) -> Result<DecayCheck> {
    if horizon < 10.0 {
        return Err(Error::InvalidParameter("decay check horizon must be ≥ 10".into()));
    }
    let mut trace = Vec::new();
    let mut t = 1.0;
    while t < horizon {
        trace.push(t);
        t *= 1.3;
    }
    trace.push(horizon);
    let trace: Vec<(f64, f64)> = trace
        .into_iter()
        .map(|t| (t, (beta * t.ln() + w.ln_eval(t + 1.0) - w.ln_eval(t)).exp()))
        .collect();
    let last_value = trace.last().unwrap().1;
    let tail_start = 2 * trace.len() / 3;
    let mut witness_t = None;
    for i in tail_start..trace.len() - 1 {
        if trace[i + 1].1 > trace[i].1 * (1.0 + 1e-12) {
            witness_t = Some(trace[i + 1].0);
            break;
        }
    }
    if witness_t.is_none() && last_value >= 1e-6 {
        witness_t = Some(trace.last().unwrap().0);
    }
    let horizon_slope = w.form().slope(horizon).unwrap_or(0.0);
    let remark_gap = horizon_slope / horizon - beta * horizon.ln();
    Ok(DecayCheck { pass: witness_t.is_none(), witness_t, last_value, remark_gap, trace })
}

/// The stepwise non-increasing rearrangement Ψ̄ of the weight system
/// {ψ(|k|_r) : k ∈ Z^d}: Ψ̄_j = ψ(max(s,1)) for j in the index block
/// (V_{s−1}, V_s], where V_s counts the lattice ℓ_r-ball.
pub struct StepRearrangement {
    counter: BallCounter,
    weight: WeightFunction,
}

/// A certified truncated series: the true sum lies in
/// [value, value + remainder].
#[derive(Clone, Copy, Debug)]
pub struct TailSum {
    pub value: Mag,
    pub remainder: Mag,
}

/// Iteration caps for tail summation before giving up on certification.
const TAIL_SHELL_CAP_D1: u32 = 20_000_000;
const TAIL_SHELL_CAP: u32 = 200_000;

/// ln Γ(ν, x) — the upper incomplete gamma function in the log domain —
/// by the modified Lentz continued fraction. Any real ν (including ν ≤ 0);
/// the guard requires x ≥ 2 and x ≥ ν + 2, where the fraction converges
/// quickly. Staying in logs keeps huge x representable (the linear-scale
/// value underflows long before the formulas using it stop being exact).
pub(crate) fn ln_gamma_upper(nu: f64, x: f64) -> Option<f64> {
    if !(x >= 2.0 && x >= nu + 2.0) {
        return None;
    }
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - nu;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=500 {
        let an = -(i as f64) * (i as f64 - nu);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            return (h > 0.0).then(|| -x + nu * x.ln() + h.ln());
        }
    }
    None
}

/// ln ∫_x^∞ t^{−a}(1 + ln t)^{−b} dt for a > 1, x ≥ 1, via the substitution
/// v = (a−1)(1+ln t):  ∫ = e^{a−1}(a−1)^{b−1} Γ(1−b, (a−1)(1+ln x)).
pub(crate) fn powlog_ln_tail_integral(a: f64, b: f64, x: f64) -> Option<f64> {
    if !(a > 1.0 && x >= 1.0) {
        return None;
    }
    let am1 = a - 1.0;
    let lg = ln_gamma_upper(1.0 - b, am1 * (1.0 + x.ln()))?;
    Some(am1 + (b - 1.0) * am1.ln() + lg)
}

impl StepRearrangement {
    pub fn new(weight: WeightFunction, r: R, d: u32) -> Result<StepRearrangement> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        Ok(StepRearrangement { counter: BallCounter::new(r, d), weight })
    }

    pub fn counter(&self) -> &BallCounter {
        &self.counter
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    /// The step value ψ(max(s,1)) shared by all indices of shell s.
    pub fn psi_step(&self, s: u32) -> Mag {
        self.weight.form().eval_mag(s.max(1) as f64)
    }

    /// Ψ̄_j (j ≥ 1).
    pub fn rearranged(&self, j: u128) -> Result<Mag> {
        if j == 0 {
            return Err(Error::InvalidParameter("rearrangement index starts at 1".into()));
        }
        Ok(self.psi_step(self.counter.n_of(j)?))
    }

    /// Σ_{j=1}^{l} Ψ̄_j^σ, computed blockwise over shells.
    pub fn head_sum(&self, sigma: f64, l: u128) -> Result<Mag> {
        if l == 0 {
            return Err(Error::InvalidParameter("head sum needs l ≥ 1".into()));
        }
        let top = self.counter.n_of(l)?;
        let mut acc = Mag::ZERO;
        for s in 0..=top {
            let block = if s == top {
                l - if s == 0 { 0 } else { self.counter.v(s - 1)? }
            } else {
                self.counter.nu(s)?
            };
            acc = acc.add(Mag::from_value(block as f64).mul(self.psi_step(s).powf(sigma)));
        }
        Ok(acc)
    }

    /// Convergence precheck for Σ_{j} Ψ̄_j^σ (σ > 0): power-type weights
    /// need decay σ·s > d (or the log-corrected borderline), exponential-type
    /// always converge, constants never, tabulated data cannot certify an
    /// infinite tail.
    pub fn tail_converges(&self, sigma: f64) -> Result<()> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter("tail exponent must be positive".into()));
        }
        let d = self.counter.dim() as f64;
        match self.weight.form() {
            WeightForm::Const { .. } => Err(Error::Divergent(
                "constant weights give a divergent tail series".into(),
            )),
            WeightForm::Tabulated { .. } => Err(Error::TailCertification(
                "tabulated weights clamp to a constant and cannot certify an infinite tail".into(),
            )),
            WeightForm::Pow { s } => {
                if sigma * s > d + 1e-12 {
                    Ok(())
                } else {
                    Err(Error::Divergent(format!(
                        "Σ Ψ̄^σ needs σ·s > d (σ·s = {}, d = {d})",
                        sigma * s
                    )))
                }
            }
            WeightForm::PowLog { s, eps } => {
                let lead = sigma * s;
                if lead > d + 1e-9 || ((lead - d).abs() <= 1e-9 && sigma * eps > 1.0 + 1e-12) {
                    Ok(())
                } else {
                    Err(Error::Divergent(format!(
                        "Σ Ψ̄^σ needs σ·s > d or σ·s = d with σ·eps > 1 (got σ·s = {lead}, σ·eps = {})",
                        sigma * eps
                    )))
                }
            }
            WeightForm::Exp { .. } => Ok(()),
        }
    }

    /// Σ_{j>l} Ψ̄_j^σ with a certified remainder: sums shells exactly and
    /// stops once a rigorous tail bound drops below rel_tol × the value.
    /// The bound combines the shell-size envelope ν_s ≤ K·(s+c)^{d−1}, the
    /// monotone-versus-integral comparison with the closed-form
    /// integral bound Σ_{s>S} ≤ K·(1+c/S)^{d−1}·S^d·ψ^σ(S)/(σB−d) where B is
    /// the infimum decay slope past S, and for super-/exponential weights the
    /// geometric-domination bound with ratio ψ(t+1)/ψ(t) measured at the
    /// truncation point. One-dimensional power weights instead use a
    /// trapezoid/midpoint integral enclosure (exact shell size ν_s = 2),
    /// which converges much faster.
    pub fn tail_sum(&self, sigma: f64, l: u128, rel_tol: f64) -> Result<TailSum> {
        self.tail_converges(sigma)?;
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidParameter("rel_tol must be in (0,1)".into()));
        }
        let d = self.counter.dim();
        let mut partial = Mag::ZERO;
        // Finish the shell containing index l, then advance whole shells.
        let mut s = if l == 0 {
            0
        } else {
            let s0 = self.counter.n_of(l)?;
            let leftover = self.counter.v(s0)? - l;
            partial = partial.add(Mag::from_value(leftover as f64).mul(self.psi_step(s0).powf(sigma)));
            s0 + 1
        };
        let cap = if d == 1 { TAIL_SHELL_CAP_D1 } else { TAIL_SHELL_CAP };
        // d = 1 power-type weights certify through integral enclosures
        // whose engagement shell is predictable in advance, so they are
        // exempt from the rate projection below. All other power-type
        // cases — the d ≥ 2 enclosure and the one-sided envelope — decay
        // like known powers of the shell index, so a hopeless run can be
        // projected and bailed out early instead of crawling to the cap.
        let tight_d1 = d == 1
            && match self.weight.form() {
                WeightForm::Pow { .. } => true,
                WeightForm::PowLog { s: ps, eps } => {
                    let a = sigma * ps;
                    let nu = 1.0 - sigma * eps;
                    a > 1.0 + 1e-9 && {
                        let s_cf = (2.0f64.max(nu + 2.0) / (a - 1.0) - 1.0).exp();
                        s_cf <= cap as f64
                    }
                }
                _ => false,
            };
        let project = !tight_d1
            && matches!(
                self.weight.form(),
                WeightForm::Pow { .. } | WeightForm::PowLog { .. }
            );
        let mut iterations = 0u32;
        loop {
            // d = 1 exponential weights: the rest of the series is an exact
            // geometric sum (ν_s = 2, constant ratio); shell 0 is excluded
            // because it uses the ψ(0) := ψ(1) convention.
            if d == 1 && s >= 1 {
                if let WeightForm::Exp { a, sigma: se } = self.weight.form() {
                    if *se == 1.0 {
                        let q_ln = -a * sigma;
                        let rest =
                            Mag::from_ln((s as f64) * a * -sigma - (-q_ln.exp_m1()).ln() + 2f64.ln());
                        let value = partial.add(rest);
                        return Ok(TailSum { value, remainder: value.mul(Mag::from_value(1e-15)) });
                    }
                }
            }
            if s >= 1 && iterations > 0 {
                let env_rem = self.tail_bound_after(sigma, s - 1)?;
                if let Some(rem) = env_rem {
                    if rem <= partial.mul(Mag::from_value(rel_tol)) {
                        return Ok(TailSum { value: partial, remainder: rem });
                    }
                }
                let enclosure =
                    if d >= 2 { self.multi_dim_enclosure(sigma, s)? } else { None };
                if let Some((width, lower)) = enclosure {
                    let value = partial.add(lower);
                    if width <= value.mul(Mag::from_value(rel_tol)) {
                        return Ok(TailSum { value, remainder: width });
                    }
                }
                // Certification-rate projection: the governing bound decays
                // like a known power of the shell index, so when that rate
                // projects certification far past the cap, say so now rather
                // than after millions of shells. The checkpoint comes early
                // in d ≥ 2, where counting a shell costs real work.
                let check_every = if d == 1 { 4096 } else { 512 };
                if project && iterations % check_every == 0 {
                    let slope = match self.weight.form() {
                        WeightForm::Pow { s } => *s,
                        WeightForm::PowLog { s: ps, eps } => {
                            ps + eps.min(0.0) / (1.0 + (s as f64).ln())
                        }
                        _ => unreachable!(),
                    };
                    let rv = self.counter.r().value();
                    let governing = if let Some((width, lower)) = enclosure {
                        // Enclosure width over value shrinks like S^{−(β+min(r,1))}.
                        let value = partial.add(lower);
                        Some((
                            width.ln() - value.ln() - rel_tol.ln(),
                            sigma * slope - d as f64 + rv.min(1.0),
                        ))
                    } else if let Some(rem) = env_rem {
                        // Envelope over partial shrinks like S^{−(σB−e_b−1)}.
                        let e_b = if d == 1 {
                            0.0
                        } else if rv >= 1.0 {
                            d as f64 - 1.0
                        } else {
                            d as f64 - rv
                        };
                        Some((rem.ln() - partial.ln() - rel_tol.ln(), sigma * slope - e_b - 1.0))
                    } else {
                        None
                    };
                    match governing {
                        Some((ln_gap, rate)) => {
                            let projected = if rate > 0.02 {
                                (s as f64) * (ln_gap / rate).exp()
                            } else {
                                f64::INFINITY
                            };
                            if projected > 2.0 * cap as f64 {
                                return Err(Error::TailCertification(format!(
                                    "tail certification projects to ~{projected:.1e} shells \
                                     (cap {cap}); the decay margin is too thin"
                                )));
                            }
                        }
                        None => {
                            return Err(Error::TailCertification(format!(
                                "no closed-form tail bound engages by shell {s} (cap {cap})"
                            )));
                        }
                    }
                }
                // d = 1 power weights: certified integral enclosure of the
                // rest, far tighter than the generic envelope bound.
                if d == 1 {
                    if let WeightForm::Pow { s: ps } = self.weight.form() {
                        let a = sigma * ps;
                        let from = s as f64;
                        let lower = Mag::from_ln((1.0 - a) * from.ln() - (a - 1.0).ln())
                            .add(Mag::from_ln(-a * from.ln()).mul(Mag::from_value(0.5)));
                        let upper = Mag::from_ln((1.0 - a) * (from - 0.5).ln() - (a - 1.0).ln());
                        // If rounding makes the enclosure collapse, skip the
                        // early stop this round rather than claim a width.
                        if let Some(gap) = upper.checked_sub(lower) {
                            let width = gap.mul(Mag::from_value(2.0));
                            let value = partial.add(lower.mul(Mag::from_value(2.0)));
                            if width <= value.mul(Mag::from_value(rel_tol)) {
                                return Ok(TailSum { value, remainder: width });
                            }
                        }
                    }
                    // Log-corrected power weights take the same
                    // midpoint/trapezoid enclosure with the tail integral
                    // in closed form through the incomplete gamma function.
                    // Convexity of h(t) = t^{−a}(1+ln t)^{−b} (needed for
                    // both enclosure sides) holds iff
                    // (a+b/L)² + (a+b/L) + b/L² > 0 at L = 1+ln s, and is
                    // preserved as L grows.
                    if let WeightForm::PowLog { s: ps, eps } = self.weight.form() {
                        let a = sigma * ps;
                        let b = sigma * eps;
                        let from = s as f64;
                        let big_l = 1.0 + from.ln();
                        let g = a + b / big_l;
                        let convex = g > 0.0 && g * g + g + b / (big_l * big_l) > 0.0;
                        if a > 1.0 + 1e-9 && convex {
                            if let (Some(up_ln), Some(low_ln)) = (
                                powlog_ln_tail_integral(a, b, from - 0.5),
                                powlog_ln_tail_integral(a, b, from),
                            ) {
                                let lower = Mag::from_ln(low_ln).add(
                                    self.psi_step(s).powf(sigma).mul(Mag::from_value(0.5)),
                                );
                                let upper = Mag::from_ln(up_ln);
                                if let Some(gap) = upper.checked_sub(lower) {
                                    let width = gap.mul(Mag::from_value(2.0));
                                    let value = partial.add(lower.mul(Mag::from_value(2.0)));
                                    if width <= value.mul(Mag::from_value(rel_tol)) {
                                        return Ok(TailSum { value, remainder: width });
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if iterations >= cap {
                return Err(Error::TailCertification(format!(
                    "tail not certified within {cap} shells (rel_tol {rel_tol:e})"
                )));
            }
            let nu = self.counter.nu(s)?;
            partial = partial.add(Mag::from_value(nu as f64).mul(self.psi_step(s).powf(sigma)));
            s += 1;
            iterations += 1;
        }
    }

    /// Rigorous upper bound for Σ_{s>S} ν_s ψ(s)^σ, or `None` when no bound
    /// applies yet at this truncation point.
    fn tail_bound_after(&self, sigma: f64, big_s: u32) -> Result<Option<Mag>> {
        if big_s == 0 {
            return Ok(None);
        }
        let d = self.counter.dim();
        let df = d as f64;
        let r = self.counter.r();
        let rv = r.value();
        let c = c_rd(r, d);
        let sf = big_s as f64;
        // Per-shell envelope ν_t ≤ k_env·(t + c_pos)^{e_b} for t > S: exact
        // ν = 2 in one dimension; the count-sandwich increment with
        // exponent d−1 for r ≥ 1; and the belt form with exponent d−r for
        // r < 1, where only |·|_r^r is subadditive so the sandwich radii
        // shift in the r-th power and the boundary belt thickens like t^{1−r}.
        let (e_b, k_env, c_pos) = if d == 1 {
            (0.0, 2.0, 0.0)
        } else if rv >= 1.0 {
            (df - 1.0, vol_constant(r, d) * df * (1.0 + 2.0 * c), c)
        } else {
            let shift = c.powf(rv); // d/2^r
            let k_b = vol_constant(r, d)
                * (df / rv)
                * (1.0 + shift / sf.powf(rv)).powf(df / rv - 1.0)
                * (2.0 * shift + rv);
            (df - rv, k_b, 0.0)
        };
        let mut best: Option<Mag> = None;
        let mut consider = |b: Mag| {
            best = Some(match best {
                Some(cur) => cur.min(b),
                None => b,
            });
        };

        // Integral comparison with the infimum slope B on [S, ∞):
        // Σ_{t>S} ν_t ψ(t)^σ ≤ k_env·(1+c_pos/S)^{e_b}·S^{e_b+1}·ψ(S)^σ/(σB−e_b−1).
        let inf_slope = match self.weight.form() {
            WeightForm::Pow { s } => Some(*s),
            WeightForm::PowLog { s, eps } => Some(s + eps.min(0.0) / (1.0 + sf.ln())),
            WeightForm::Exp { a, sigma: se } => Some(a * se * sf.powf(*se)),
            _ => None,
        };
        if let Some(b) = inf_slope {
            if sigma * b > e_b + 1.0 {
                let factor = k_env * (1.0 + c_pos / sf).powf(e_b) * sf.powf(e_b + 1.0)
                    / (sigma * b - e_b - 1.0);
                consider(Mag::from_value(factor).mul(self.psi_step(big_s).powf(sigma)));
            }
        }

        // Borderline log-corrected power weights: σ·s = d, σ·eps > 1 gives
        // Σ (1+ln s)^{−σ·eps}/s ≤ (1+ln S)^{1−σ·eps}/(σ·eps − 1). Needs the
        // t^{d−1} shell envelope, so r ≥ 1 (exact in one dimension).
        if d == 1 || rv >= 1.0 {
            if let WeightForm::PowLog { s, eps } = self.weight.form() {
                let (lead, leps) = (sigma * s, sigma * eps);
                if (lead - df).abs() <= 1e-9 && leps > 1.0 + 1e-12 {
                    let ln_bound = (1.0 - leps) * (1.0 + sf.ln()).ln() - (leps - 1.0).ln();
                    let factor = k_env * (1.0 + c_pos / sf).powf(e_b);
                    consider(Mag::from_value(factor).mul(Mag::from_ln(ln_bound)));
                }
            }
        }

        // Geometric domination for exponential-type weights with
        // non-increasing step ratio (sigma exponent ≥ 1).
        if let WeightForm::Exp { a, sigma: se } = self.weight.form() {
            if *se >= 1.0 {
                let delta = (sf + 2.0).powf(*se) - (sf + 1.0).powf(*se);
                let g = 2f64.powf(e_b) * (-a * delta * sigma).exp();
                if g < 1.0 {
                    let factor = k_env * (sf + 1.0 + c_pos).powf(e_b) / (1.0 - g);
                    consider(Mag::from_value(factor).mul(self.psi_step(big_s + 1).powf(sigma)));
                }
            }
        }
        Ok(best)
    }

    /// Two-sided enclosure of the remainder R = Σ_{t≥from} ν_t ψ(t)^σ for
    /// power-type weights in d ≥ 2, far tighter than the one-sided envelope:
    /// Abel summation writes R = −V_{from−1}·g(from) + Σ_{t≥from} V_t·Δg(t)
    /// with g = ψ^σ, the count sandwich L ≤ V ≤ U turns each direction into
    /// a boundary term plus a sum of sandwich increments against g, and the
    /// mean value theorem plus the convex midpoint/trapezoid rules close
    /// those sums in the incomplete-gamma integral. The enclosure width
    /// shrinks relative to R like 1/S (r ≥ 1) or S^{−r} (r < 1), so
    /// certification needs exponentially fewer shells than the envelope.
    /// Returns (width, lower) with R ∈ [lower, lower + width], or None when
    /// no closed form engages at this truncation point.
    fn multi_dim_enclosure(&self, sigma: f64, from: u32) -> Result<Option<(Mag, Mag)>> {
        let d = self.counter.dim();
        if d < 2 || from < 1 {
            return Ok(None);
        }
        let (a, b) = match self.weight.form() {
            WeightForm::Pow { s } => (sigma * s, 0.0),
            WeightForm::PowLog { s, eps } => (sigma * s, sigma * eps),
            _ => return Ok(None),
        };
        let df = d as f64;
        let a_eff = a - (df - 1.0);
        if !(a_eff > 1.0 + 1e-9) {
            return Ok(None);
        }
        // First index covered by the integrals; φ(u) = u^{d−1}g(u)
        // = u^{−a_eff}(1+ln u)^{−b} must be decreasing and convex from the
        // leftmost integral point on (preserved as L = 1+ln u grows).
        let t_big = from as f64 + 1.0;
        let l0 = 1.0 + (t_big - 0.5).ln();
        let gc = a_eff + b / l0;
        if !(gc > 0.0 && gc * gc + gc + b / (l0 * l0) > 0.0) {
            return Ok(None);
        }
        let (up_ln, low_ln) = match (
            powlog_ln_tail_integral(a_eff, b, t_big - 0.5),
            powlog_ln_tail_integral(a_eff, b, t_big),
        ) {
            (Some(u), Some(l)) => (u, l),
            _ => return Ok(None),
        };
        let r = self.counter.r();
        let rv = r.value();
        let m_vol = vol_constant(r, d);
        let c = c_rd(r, d);
        // Sandwich increment rates: ΔU(t) ≤ du·t^{d−1} and ΔL(t) ≥ dl·t^{d−1}
        // for every t ≥ T, with the shift linear in the radius for r ≥ 1 and
        // in the r-th power of the radius for r < 1.
        let (du, dl) = if rv >= 1.0 {
            (
                m_vol * df * (1.0 + c / t_big).powi(d as i32 - 1),
                m_vol * df * ((1.0 - (1.0 + c) / t_big).max(0.0)).powi(d as i32 - 1),
            )
        } else {
            let shift = c.powf(rv); // d/2^r
            let base = (t_big - 1.0).powf(rv);
            let lam_plus = (1.0 + shift / base).powf(1.0 / rv);
            let lam_minus = ((1.0 - shift / base).max(0.0)).powf(1.0 / rv);
            (
                m_vol * df * lam_plus.powf(df - rv),
                m_vol * df * lam_minus.powf(df - rv) * (1.0 - 1.0 / t_big).powi(d as i32 - 1),
            )
        };
        let (l_cnt, u_cnt) = count_sandwich(r, d, from as f64);
        let v_prev = Mag::from_value(self.counter.v(from - 1)? as f64);
        let g_from = self.psi_step(from).powf(sigma);
        let phi_t = Mag::from_ln(-a_eff * t_big.ln() - b * (1.0 + t_big.ln()).ln());
        let int_upper = Mag::from_ln(up_ln);
        let int_lower = Mag::from_ln(low_ln).add(phi_t.mul(Mag::from_value(0.5)));
        // Upper boundary gap U(from) − V_{from−1} is ≥ ν_from > 0; a rounding
        // collapse would invalidate the upper claim, so give up instead.
        let upper_boundary = match Mag::from_value(u_cnt).checked_sub(v_prev) {
            Some(gap) => gap.mul(g_from),
            None => return Ok(None),
        };
        let upper = upper_boundary.add(Mag::from_value(du).mul(int_upper));
        let lower_pos =
            Mag::from_value(l_cnt).mul(g_from).add(Mag::from_value(dl).mul(int_lower));
        // The lower boundary term may be negative at small S; clamping to
        // zero keeps a valid (weaker) lower bound.
        let lower = lower_pos.checked_sub(v_prev.mul(g_from)).unwrap_or(Mag::ZERO);
        let width = match upper.checked_sub(lower) {
            Some(w) => w,
            None => return Ok(None),
        };
        Ok(Some((width, lower)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wf(spec: &str) -> WeightFunction {
        WeightFunction::new(spec.parse().unwrap()).unwrap()
    }

    fn sr(spec: &str, r: R, d: u32) -> StepRearrangement {
        StepRearrangement::new(wf(spec), r, d).unwrap()
    }

    #[test]
    fn dsl_round_trip_and_validation() {
        for spec in ["pow:s=2", "powlog:s=2,eps=-1", "exp:a=1,s=1", "const:c=0.5"] {
            let form: WeightForm = spec.parse().unwrap();
            assert_eq!(form.to_string(), spec);
        }
        assert!("pow:s=-1".parse::<WeightForm>().is_err());
        assert!("exp:a=0,s=1".parse::<WeightForm>().is_err());
        assert!("powlog:s=1,eps=-2".parse::<WeightForm>().is_err());
        assert!("table:1,2".parse::<WeightForm>().is_err());
        assert!("mystery:x=1".parse::<WeightForm>().is_err());
    }

    #[test]
    fn families_from_forms() {
        assert_eq!(wf("pow:s=2").family(), Family::PowerType);
        assert_eq!(wf("const:c=1").family(), Family::PowerType);
        assert_eq!(wf("exp:a=1,s=0.5").family(), Family::SubExponential);
        assert_eq!(wf("exp:a=0.693147,s=1").family(), Family::Exponential);
        assert_eq!(wf("exp:a=0.25,s=2").family(), Family::SuperExponential);
        assert_eq!(wf("table:1,0.5,0.25").family(), Family::GenericMonotone);
    }

    #[test]
    fn alpha_examples() {
        let e = wf("exp:a=1,s=1");
        assert!((alpha(&e, 4.0).unwrap() - 0.25).abs() < 1e-12);
        let p = wf("pow:s=3");
        assert!((alpha(&p, 17.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let g = wf("exp:a=1,s=2");
        assert!((alpha(&g, 3.0).unwrap() - 1.0 / 18.0).abs() < 1e-12);
        assert!(alpha(&wf("const:c=1"), 2.0).is_err());
    }

    #[test]
    fn eta_mu_examples() {
        let e = wf("exp:a=1,s=1");
        let (eta, _) = eta_mu(&e, 1.0).unwrap();
        assert!((eta - (1.0 + std::f64::consts::LN_2)).abs() < 1e-9);

        let p1 = wf("pow:s=1");
        let (eta, mu) = eta_mu(&p1, 3.0).unwrap();
        assert!((eta - 6.0).abs() < 1e-8);
        assert!((mu - 1.0).abs() < 1e-8);

        let p2 = wf("pow:s=2");
        let (eta, _) = eta_mu(&p2, 2.0).unwrap();
        assert!((eta - 2.0 * 2f64.sqrt()).abs() < 1e-9);

        assert!(eta_mu(&wf("const:c=1"), 2.0).is_err());
    }

    #[test]
    fn decay_condition_examples() {
        let gauss = wf("exp:a=1,s=2");
        assert!(check_decay_condition(&gauss, 3.0, 1e4).unwrap().pass);
        let exp = wf("exp:a=1,s=1");
        let res = check_decay_condition(&exp, 1.0, 1e4).unwrap();
        assert!(!res.pass);
        assert!(res.witness_t.is_some());
        let pow = wf("pow:s=5");
        assert!(!check_decay_condition(&pow, 0.5, 1e4).unwrap().pass);
    }

    #[test]
    fn rearranged_examples() {
        let a = sr("pow:s=1", R::Infinity, 1);
        for j in 1..=3 {
            assert!((a.rearranged(j).unwrap().value() - 1.0).abs() < 1e-15);
        }
        assert!((a.rearranged(4).unwrap().value() - 0.5).abs() < 1e-15);

        let b = sr("exp:a=0.6931471805599453,s=1", R::Infinity, 1);
        assert!((b.rearranged(6).unwrap().value() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn rearranged_matches_sorted_weights() {
        // Multiset check: sorting {ψ(|k|_r)} descending over a ball
        // reproduces Ψ̄_1..Ψ̄_V exactly (an integer-norm configuration).
        use crate::lattice::{enumerate_shell, shell_of};
        let r = R::Integer(1);
        let d = 2;
        let a = sr("exp:a=0.5,s=1", r, d);
        let mut weights: Vec<f64> = Vec::new();
        for s in 0..=4u32 {
            for k in enumerate_shell(s, r, d) {
                let t = (shell_of(&k, r) as f64).max(1.0);
                weights.push(a.weight().eval(t));
            }
        }
        weights.sort_by(|x, y| y.total_cmp(x));
        for (i, w) in weights.iter().enumerate() {
            let jbar = a.rearranged(i as u128 + 1).unwrap().value();
            assert!((jbar - w).abs() <= 1e-14 * w, "j={} {} vs {}", i + 1, jbar, w);
        }
    }

    #[test]
    fn head_sum_examples() {
        let b = sr("exp:a=0.6931471805599453,s=1", R::Infinity, 1);
        assert!((b.head_sum(-2.0, 3).unwrap().value() - 12.0).abs() < 1e-10);
        let a = sr("pow:s=1", R::Infinity, 1);
        assert!((a.head_sum(1.0, 5).unwrap().value() - 4.0).abs() < 1e-12);
        assert!((a.head_sum(7.5, 1).unwrap().value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_sum_geometric_examples() {
        let b = sr("exp:a=0.6931471805599453,s=1", R::Infinity, 1);
        let t2 = b.tail_sum(2.0, 3, 1e-12).unwrap();
        assert!((t2.value.value() - 1.0 / 6.0).abs() < 1e-12);
        let t1 = b.tail_sum(1.0, 3, 1e-12).unwrap();
        assert!((t1.value.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_sum_zeta_example() {
        // ψ = t^{−2}, d=1, σ=2: Σ_{j>V_S} Ψ̄_j² = 2·Σ_{s>S} s^{−4}.
        let a = sr("pow:s=2", R::Infinity, 1);
        let v_s = 2 * 10 + 1; // V_10
        let t = a.tail_sum(2.0, v_s, 1e-10).unwrap();
        let exact: f64 = (11..200_000).map(|s| 2.0 * (s as f64).powi(-4)).sum();
        assert!((t.value.value() - exact).abs() <= 1e-9 * exact);
        assert!(t.remainder.value() <= 1e-10 * t.value.value() * 1.0001);
    }

    #[test]
    fn incomplete_gamma_log_identities() {
        // Γ(1, x) = e^{−x}.
        for x in [3.0f64, 7.0, 40.0, 900.0] {
            let lg = ln_gamma_upper(1.0, x).unwrap();
            assert!((lg + x).abs() < 1e-12 * x.max(1.0), "x={x}: {lg}");
        }
        // Γ(2, x) = (x+1)e^{−x}.
        let lg = ln_gamma_upper(2.0, 9.0).unwrap();
        assert!((lg - ((10.0f64).ln() - 9.0)).abs() < 1e-12);
        // Recurrence Γ(ν+1, x) = ν Γ(ν, x) + x^ν e^{−x} at a negative ν.
        let nu = -1.3;
        let x = 6.0;
        let g_nu = ln_gamma_upper(nu, x).unwrap().exp();
        let g_nup = ln_gamma_upper(nu + 1.0, x).unwrap().exp();
        let rhs = nu * g_nu + x.powf(nu) * (-x).exp();
        assert!((g_nup - rhs).abs() < 1e-14 * g_nup.abs());
        // Guard region: nothing claimed for small x.
        assert!(ln_gamma_upper(4.0, 2.0).is_none());
    }

    #[test]
    fn powlog_tail_integral_matches_quadrature() {
        // ∫_x^∞ t^{−a}(1+ln t)^{−b} dt against fine Simpson quadrature in
        // u = ln t (integrand e^{(1−a)u}(1+u)^{−b}), truncated far out.
        for (a, b, x) in [(2.4, 1.5, 5.0), (3.0, -0.8, 9.0), (1.7, 0.3, 30.0)] {
            let got = powlog_ln_tail_integral(a, b, x).unwrap().exp();
            let u0 = (x as f64).ln();
            let u1 = u0 + 80.0 / (a - 1.0);
            let n = 400_000usize;
            let hstep = (u1 - u0) / n as f64;
            let f = |u: f64| ((1.0 - a) * u).exp() * (1.0 + u).powf(-b);
            let mut simpson = f(u0) + f(u1);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                simpson += w * f(u0 + i as f64 * hstep);
            }
            simpson *= hstep / 3.0;
            assert!(
                (got - simpson).abs() <= 1e-10 * simpson,
                "a={a} b={b} x={x}: {got} vs {simpson}"
            );
        }
    }

    #[test]
    fn powlog_tail_certifies_quickly_and_accurately() {
        // σ·s comfortably above d: the enclosure must certify at 1e−12 in
        // well under a second and match a long explicit reference sum.
        let a = sr("powlog:s=1.2,eps=0.5", R::Integer(1), 1);
        let t = a.tail_sum(3.0, 7, 1e-12).unwrap(); // after V_3 = 7
        let mut truth = 0.0f64;
        let mut comp = 0.0f64;
        for s in (4..3_000_000u64).rev() {
            let sf = s as f64;
            let y = 2.0 * sf.powf(-3.6) * (1.0 + sf.ln()).powf(-1.5) - comp;
            let tt = truth + y;
            comp = (tt - truth) - y;
            truth = tt;
        }
        assert!(
            (t.value.value() - truth).abs() <= 1e-10 * truth,
            "{} vs {truth}",
            t.value.value()
        );
        assert!(t.remainder.value() <= 1e-12 * t.value.value() * 1.0001);
    }

    #[test]
    fn thin_margin_tails_bail_out_fast() {
        // Borderline log-corrected decay (σ·s = d) converges but can never
        // certify at 1e−12; the projection reports that without crawling.
        let a = sr("powlog:s=1,eps=1.5", R::Integer(1), 1);
        let err = a.tail_sum(1.0, 5, 1e-12).unwrap_err();
        assert!(matches!(err, Error::TailCertification(_)), "{err:?}");
        // Thin positive margin in d = 2: same early report.
        let b = sr("pow:s=1.2", R::Integer(1), 2);
        let err2 = b.tail_sum(2.0, 13, 1e-12).unwrap_err();
        assert!(matches!(err2, Error::TailCertification(_)), "{err2:?}");
        // r < 1 thins every bound further (belt exponent d − r); still an
        // early report, not a crawl.
        let c = sr("pow:s=1.2", R::Rational { num: 1, den: 2 }, 2);
        let err3 = c.tail_sum(2.0, 13, 1e-12).unwrap_err();
        assert!(matches!(err3, Error::TailCertification(_)), "{err3:?}");
    }

    /// Kahan reference for Σ_{j>l} Ψ̄_j^σ truncated at shell `s_top`.
    fn reference_tail(t: &StepRearrangement, sigma: f64, l: u128, s_top: u32) -> f64 {
        let counter = t.counter();
        let s0 = counter.n_of(l).unwrap();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut add = |x: f64| {
            let y = x - comp;
            let tot = sum + y;
            comp = (tot - sum) - y;
            sum = tot;
        };
        add((counter.v(s0).unwrap() - l) as f64 * t.psi_step(s0).powf(sigma).value());
        for s in s0 + 1..=s_top {
            add(counter.nu(s).unwrap() as f64 * t.psi_step(s).powf(sigma).value());
        }
        sum
    }

    #[test]
    fn multi_dim_tail_enclosure_matches_reference() {
        // d = 2 power weight across the exponent classes of r: the two-sided
        // enclosure must certify at 1e−12 and agree with a long explicit
        // shell sum (truncation error of the reference ≈ 3e−15 relative).
        let rs = [
            R::Integer(1),
            R::Rational { num: 3, den: 2 },
            R::Rational { num: 1, den: 2 },
            R::Infinity,
        ];
        for r in rs {
            let t = sr("pow:s=2.4", r, 2);
            let l = t.counter().v(3).unwrap();
            let ts = t.tail_sum(3.0, l, 1e-12).unwrap();
            let reference = reference_tail(&t, 3.0, l, 2500);
            assert!(ts.remainder.value() <= 1.5e-12 * ts.value.value(), "r={r}");
            assert!(
                ts.value.value() <= reference * (1.0 + 5e-12),
                "r={r}: value {} above reference {reference}",
                ts.value.value()
            );
            assert!(
                reference <= (ts.value.value() + ts.remainder.value()) * (1.0 + 5e-12),
                "r={r}: reference {reference} above enclosure top"
            );
        }
    }

    #[test]
    fn multi_dim_powlog_tail_matches_reference() {
        let t = sr("powlog:s=2.4,eps=0.7", R::Integer(1), 2);
        let l = t.counter().v(3).unwrap();
        let ts = t.tail_sum(3.0, l, 1e-12).unwrap();
        let reference = reference_tail(&t, 3.0, l, 2500);
        assert!(ts.remainder.value() <= 1.5e-12 * ts.value.value());
        assert!(ts.value.value() <= reference * (1.0 + 5e-12));
        assert!(reference <= (ts.value.value() + ts.remainder.value()) * (1.0 + 5e-12));
    }

    #[test]
    fn multi_dim_enclosure_d3_rational_r() {
        let t = sr("pow:s=3", R::Rational { num: 3, den: 2 }, 3);
        let l = t.counter().v(2).unwrap();
        let ts = t.tail_sum(3.0, l, 1e-12).unwrap();
        let reference = reference_tail(&t, 3.0, l, 500);
        assert!(ts.remainder.value() <= 1.5e-12 * ts.value.value());
        assert!(ts.value.value() <= reference * (1.0 + 1e-11));
        assert!(reference <= (ts.value.value() + ts.remainder.value()) * (1.0 + 1e-11));
    }

    #[test]
    fn tail_certified_bound_contains_truth() {
        // d=2 power weight: compare against a long explicit shell sum.
        let a = sr("pow:s=3", R::Integer(1), 2);
        let t = a.tail_sum(2.0, 13, 1e-6).unwrap(); // after V_2 = 13
        let mut truth = 0.0;
        for s in 3..30_000u32 {
            truth += (4 * s) as f64 * (s as f64).powi(-6);
        }
        assert!(t.value.value() <= truth * (1.0 + 1e-9));
        assert!(truth <= (t.value.add(t.remainder)).value() * (1.0 + 1e-9));
    }

    #[test]
    fn tail_divergence_detection() {
        let a = sr("pow:s=1", R::Integer(1), 2);
        assert!(matches!(a.tail_sum(2.0, 5, 1e-6), Err(Error::Divergent(_))));
        let c = sr("const:c=1", R::Infinity, 1);
        assert!(matches!(c.tail_sum(1.0, 5, 1e-6), Err(Error::Divergent(_))));
        let t = sr("table:1,0.5", R::Infinity, 1);
        assert!(matches!(t.tail_sum(1.0, 5, 1e-6), Err(Error::TailCertification(_))));
        // Borderline log correction: σ·s = d with σ·eps > 1 converges.
        let bl = sr("powlog:s=1,eps=1.5", R::Infinity, 1);
        assert!(bl.tail_converges(1.0).is_ok());
        let bl2 = sr("powlog:s=1,eps=0.5", R::Infinity, 1);
        assert!(bl2.tail_converges(1.0).is_err());
    }

    #[test]
    fn head_plus_tail_is_stable_across_tolerances() {
        let a = sr("exp:a=0.3,s=1", R::Integer(1), 2);
        let head = a.head_sum(1.5, 40).unwrap();
        let t1 = a.tail_sum(1.5, 40, 1e-6).unwrap();
        let t2 = a.tail_sum(1.5, 40, 1e-10).unwrap();
        let a1 = head.add(t1.value).value();
        let a2 = head.add(t2.value).value();
        assert!((a1 - a2).abs() <= 1e-5 * a2);
    }

    #[test]
    fn subexponential_tail_certifies() {
        let a = sr("exp:a=1,s=0.5", R::Infinity, 1);
        let t = a.tail_sum(2.0, 9, 1e-10).unwrap();
        let exact: f64 = (5..4000).map(|s| 2.0 * (-2.0 * (s as f64).sqrt()).exp()).sum();
        assert!((t.value.value() - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn superexponential_tail_certifies() {
        let a = sr("exp:a=0.25,s=2", R::Integer(1), 2);
        let t = a.tail_sum(1.0, 5, 1e-12).unwrap(); // after V_1 = 5
        let mut truth = 0.0;
        for s in 2..200u32 {
            truth += (4 * s) as f64 * (-0.25 * (s as f64).powi(2)).exp();
        }
        assert!((t.value.value() - truth).abs() <= 1e-10 * truth.max(1e-300));
    }

    #[test]
    fn limit_values() {
        assert!(wf("pow:s=1").form().limit().is_zero());
        assert!((wf("const:c=0.3").form().limit().value() - 0.3).abs() < 1e-15);
        assert!((wf("table:1,0.5,0.125").form().limit().value() - 0.125).abs() < 1e-15);
    }
}
