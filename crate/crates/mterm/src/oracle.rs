//! Independent brute-force verification of the exact formulas on small
//! instances. Deliberately structure-free: plain f64 arithmetic, exhaustive
//! subset enumeration, and linear scans — no shared code with the
//! log-domain blockwise evaluators it certifies.

use crate::error::{Error, Result};
use crate::exact_values::{ClassParams, IndexSet};
use crate::lattice::{enumerate_shell, shell_of, BallCounter, LatticeVector, R};
use crate::spectral::CoefficientField;
use crate::weights::{StepRearrangement, WeightForm, WeightFunction};

/// All lattice points with |k|_r ≤ S_max, ordered by (shell, lex).
pub struct TruncatedUniverse {
    s_max: u32,
    points: Vec<LatticeVector>,
}

impl TruncatedUniverse {
    pub fn new(r: R, d: u32, s_max: u32) -> Result<TruncatedUniverse> {
        let counter = BallCounter::new(r, d);
        let expect = counter.v(s_max)?;
        if expect > 4096 {
            return Err(Error::TooLarge(format!(
                "truncated universe would hold {expect} points"
            )));
        }
        let mut points = Vec::with_capacity(expect as usize);
        for s in 0..=s_max {
            points.extend(enumerate_shell(s, r, d));
        }
        debug_assert_eq!(points.len() as u128, expect);
        Ok(TruncatedUniverse { s_max, points })
    }

    pub fn s_max(&self) -> u32 {
        self.s_max
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticeVector] {
        &self.points
    }
}

/// Stepwise weight of one lattice point: ψ(max(shell, 1)).
fn step_weight(w: &WeightFunction, k: &[i64], r: R) -> f64 {
    w.eval(shell_of(k, r).max(1) as f64)
}

/// σ_m^⊥(f)_{S^p} by exhaustive enumeration of every m-subset of the
/// support. Returns the first minimizing subset (in enumeration order) and
/// the minimum residual. Guards: |support| ≤ 14, m ≤ 6.
pub fn brute_best_subset(
    f: &CoefficientField,
    m: usize,
    p: f64,
) -> Result<(IndexSet, f64)> {
    let n = f.len();
    if n > 14 || m > 6 {
        return Err(Error::Guard(format!(
            "brute subset search limited to 14 terms / m ≤ 6, got {n} / {m}"
        )));
    }
    let terms: Vec<(LatticeVector, f64)> =
        f.iter().map(|(k, c)| (k.clone(), c.norm())).collect();
    if m >= n {
        let gamma = IndexSet::new(terms.into_iter().map(|(k, _)| k), f.dim())?;
        return Ok((gamma, 0.0));
    }
    let residual = |mask: u32| -> f64 {
        if p.is_infinite() {
            terms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, (_, a))| *a)
                .fold(0.0, f64::max)
        } else {
            let s: f64 = terms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, (_, a))| a.powf(p))
                .sum();
            s.powf(1.0 / p)
        }
    };
    let mut best = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let v = residual(mask);
        if v < best {
            best = v;
            best_mask = mask;
        }
    }
    let gamma = IndexSet::new(
        terms
            .iter()
            .enumerate()
            .filter(|(i, _)| best_mask & (1 << i) != 0)
            .map(|(_, (k, _))| k.clone()),
        f.dim(),
    )?;
    Ok((gamma, best))
}

/// Truncated-universe width by exhaustive enumeration: the minimum over
/// all m-subsets γ of the truncated best-approximation value, with both
/// sides of any comparison truncated identically. Guards: V_{S_max} ≤ 20,
/// m ≤ 5.
pub struct BruteWidth {
    pub minimizer: IndexSet,
    pub value: f64,
}

pub fn brute_width(
    params: &ClassParams,
    w: &WeightFunction,
    m: usize,
    s_max: u32,
) -> Result<BruteWidth> {
    let universe = TruncatedUniverse::new(params.r, params.d, s_max)?;
    let n = universe.len();
    if n > 20 || m > 5 {
        return Err(Error::Guard(format!(
            "brute width limited to 20 universe points / m ≤ 5, got {n} / {m}"
        )));
    }
    if m > n {
        return Err(Error::InvalidParameter("m exceeds the truncated universe".into()));
    }
    let weights: Vec<f64> = universe
        .points()
        .iter()
        .map(|k| step_weight(w, k, params.r))
        .collect();
    let (p, q) = (params.p, params.q);
    let value_of = |mask: u32| -> f64 {
        if q <= p {
            weights
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, x)| *x)
                .fold(0.0, f64::max)
        } else {
            let rho = if q.is_infinite() { p } else { p * q / (q - p) };
            let s: f64 = weights
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, x)| x.powf(rho))
                .sum();
            s.powf(1.0 / rho)
        }
    };
    let mut best = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let v = value_of(mask);
        if v < best {
            best = v;
            best_mask = mask;
        }
    }
    let minimizer = IndexSet::new(
        universe
            .points()
            .iter()
            .enumerate()
            .filter(|(i, _)| best_mask & (1 << i) != 0)
            .map(|(_, k)| k.clone()),
        params.d,
    )?;
    Ok(BruteWidth { minimizer, value: best })
}

/// Plain-f64 head sum Σ_{j≤l} Ψ̄_j^σ by walking shells index by index.
pub fn oracle_head_sum(w: &WeightFunction, r: R, d: u32, sigma: f64, l: u128) -> Result<f64> {
    let counter = BallCounter::new(r, d);
    let mut acc = 0.0f64;
    let mut idx = 0u128;
    let mut s = 0u32;
    while idx < l {
        let v_s = counter.v(s)?;
        let take = v_s.min(l) - idx;
        acc += take as f64 * w.eval(s.max(1) as f64).powf(sigma);
        idx = v_s.min(l);
        s += 1;
        if s > 2_000_000 {
            return Err(Error::ScanCap("oracle head sum ran away".into()));
        }
    }
    Ok(acc)
}

/// Plain-f64 tail sum Σ_{j>l} Ψ̄_j^σ. Power weights in d = 1 finish with
/// an Euler–Maclaurin remainder after 10⁴ shells; all other convergent
/// shapes are summed until the running term falls below 1e−18 of the
/// accumulator. Divergence is detected and reported.
pub fn oracle_tail_sum(w: &WeightFunction, r: R, d: u32, sigma: f64, l: u128) -> Result<f64> {
    let counter = BallCounter::new(r, d);
    // Divergence screen for power-type shapes: Σ ν_s ψ(s)^σ with
    // ν_s ≍ s^{d−1} and ψ(s)^σ = s^{−σ·slope} converges iff σ·slope > d.
    if let WeightForm::Pow { s } | WeightForm::PowLog { s, .. } = w.form() {
        if sigma * s <= d as f64 {
            return Err(Error::Divergent(format!(
                "oracle tail Σ Ψ̄^{sigma} diverges (decay exponent {} ≤ dimension {d})",
                sigma * s
            )));
        }
    }
    if let WeightForm::Const { .. } = w.form() {
        return Err(Error::Divergent("oracle tail over a constant weight diverges".into()));
    }

    let s_start = {
        // first shell containing indices > l, and how many of them
        let mut s = 0u32;
        while counter.v(s)? <= l {
            s += 1;
        }
        s
    };
    // Kahan-compensated accumulator: the horizons below add up to 10⁴–10⁵
    // terms and a naive sum would eat into the 1e−12 cross-check budget.
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |acc: &mut f64, x: f64| {
        let y = x - comp;
        let t = *acc + y;
        comp = (t - *acc) - y;
        *acc = t;
    };
    // partial first shell
    let head_in_shell = l - if s_start == 0 { 0 } else { counter.v(s_start - 1)? };
    let nu_start = counter.nu(s_start)?;
    add(
        &mut acc,
        (nu_start - head_in_shell) as f64 * w.eval(s_start.max(1) as f64).powf(sigma),
    );

    if let WeightForm::Pow { s: slope } = w.form() {
        if d == 1 {
            // Exact shell sizes ν_s = 2: acc + 2 Σ_{s>S} s^{−a} with the
            // Euler–Maclaurin remainder after an explicit horizon.
            let a = sigma * slope;
            let horizon = (s_start + 10_000) as u128;
            for s in (s_start as u128 + 1)..=horizon {
                add(&mut acc, 2.0 * (s as f64).powf(-a));
            }
            let big_s = horizon as f64;
            let rest = big_s.powf(1.0 - a) / (a - 1.0) - big_s.powf(-a) / 2.0
                + a * big_s.powf(-a - 1.0) / 12.0;
            return Ok(acc + 2.0 * rest);
        }
    }
    if let WeightForm::PowLog { s: slope, eps } = w.form() {
        if d == 1 {
            // Same scheme with the closed-form log-corrected tail integral:
            // after the horizon, the rest of Σ 2 s^{−a}(1+ln s)^{−b} is the
            // average of its midpoint upper and trapezoid lower enclosures.
            let a = sigma * slope;
            let b = sigma * eps;
            let horizon = (s_start + 10_000) as u128;
            let from = horizon as f64 + 1.0;
            let bounds = (
                crate::weights::powlog_ln_tail_integral(a, b, from - 0.5),
                crate::weights::powlog_ln_tail_integral(a, b, from),
            );
            if let (Some(up_ln), Some(low_ln)) = bounds {
                let h = |t: f64| t.powf(-a) * (1.0 + t.ln()).powf(-b);
                for s in (s_start as u128 + 1)..=horizon {
                    add(&mut acc, 2.0 * h(s as f64));
                }
                let rest = 0.5 * (up_ln.exp() + low_ln.exp() + h(from) / 2.0);
                return Ok(acc + 2.0 * rest);
            }
            // Thin decay margin: fall through to the generic loop, whose
            // own guard reports slow convergence honestly.
        }
    }
    // Generic convergent loop (exponential-type shapes, power in d ≥ 2
    // with comfortable margin).
    let mut s = s_start + 1;
    loop {
        let term = counter.nu(s)? as f64 * w.eval(s as f64).powf(sigma);
        add(&mut acc, term);
        if term <= 1e-18 * acc {
            return Ok(acc);
        }
        if term.is_nan() {
            return Err(Error::TailCertification("oracle tail produced NaN".into()));
        }
        s += 1;
        if s > 200_000 {
            return Err(Error::Guard(
                "oracle tail converges too slowly for the plain-f64 loop".into(),
            ));
        }
    }
}

/// Ψ̄_j in plain f64 (index → shell by linear search).
pub fn oracle_step_value(w: &WeightFunction, r: R, d: u32, j: u128) -> Result<f64> {
    let counter = BallCounter::new(r, d);
    let mut s = 0u32;
    while counter.v(s)? < j {
        s += 1;
        if s > 2_000_000 {
            return Err(Error::ScanCap("oracle step value ran away".into()));
        }
    }
    Ok(w.eval(s.max(1) as f64))
}

/// Result of the dumb supremum scan.
pub struct SupScan {
    pub l_star: u128,
    pub value: f64,
    pub certified: bool,
}

/// Linear scan of (l−m)^{1/p}/S_l^{1/q} for l = m+1..L_cap (the q ≤ p < ∞
/// case). `certified` is set when the closed-form bound on the remaining
/// range (or the exact constant-tail rule) confirms the scan maximum.
pub fn sup_scan_audit(
    sr: &StepRearrangement,
    params: &ClassParams,
    m: u128,
    l_cap: u128,
) -> Result<SupScan> {
    let (p, q) = (params.p, params.q);
    if !(q <= p) || p.is_infinite() {
        return Err(Error::RegimeMismatch(
            "supremum scan applies to q ≤ p < ∞ only".into(),
        ));
    }
    let w = sr.weight();
    let counter = sr.counter();
    let mut best = 0.0f64;
    let mut l_star = 0u128;
    let mut s_l = 0.0f64;
    let mut s = 0u32;
    let mut v_s = counter.v(0)?;
    for l in 1..=l_cap {
        while l > v_s {
            s += 1;
            v_s = counter.v(s)?;
        }
        s_l += w.eval(s.max(1) as f64).powf(-q);
        if l > m {
            let val = ((l - m) as f64).powf(1.0 / p) / s_l.powf(1.0 / q);
            if val > best {
                best = val;
                l_star = l;
            }
        }
    }
    // Weight of index l_cap + 1.
    let s_next = if l_cap + 1 > v_s { s + 1 } else { s };
    let psi_next = w.eval(s_next.max(1) as f64);
    let limit = w.form().limit().value();

    let mut value = best;
    let certified;
    if limit > 0.0 && psi_next == limit {
        // Constant past the cap: remaining supremum in closed form.
        let a = (l_cap - m) as f64;
        let wq = limit.powf(-q);
        if p == q {
            value = best.max(limit);
            certified = true;
        } else {
            let t_star = ((p * a - q * s_l / wq) / (q - p)).max(1.0);
            for t in [t_star.floor(), t_star.ceil()] {
                let v = (a + t).powf(1.0 / p) / (s_l + t * wq).powf(1.0 / q);
                value = value.max(v);
            }
            certified = true;
        }
    } else {
        // S_l ≥ S_{l_cap} + (l − l_cap)·Ψ̄_{l_cap+1}^{−q} beyond the cap.
        let a = (l_cap - m) as f64;
        let wq = psi_next.powf(-q);
        let bound = if !s_l.is_finite() || !wq.is_finite() {
            // Head sum overflow or next-weight underflow: every value
            // past the cap rounds to zero, so the scan maximum stands.
            0.0
        } else if p == q {
            psi_next.max(a.powf(1.0 / p) / s_l.powf(1.0 / q))
        } else {
            let t_star = ((p * a - q * s_l / wq) / (q - p)).max(0.0);
            (a + t_star).powf(1.0 / p) / (s_l + t_star * wq).powf(1.0 / q)
        };
        certified = bound <= best * (1.0 + 1e-12);
    }
    Ok(SupScan { l_star, value, certified })
}

/// Result of the two-level balance oracle.
pub struct BalanceScan {
    pub l_star: u128,
    pub value: f64,
}

/// Independent evaluation of σ_m for p < q < ∞: for every splitting index
/// l, the inner optimization over the worst class member has the
/// closed-form level u*, valid when the induced coefficient profile stays
/// monotone across index l+1; σ_m is the maximum over valid l.
pub fn balance_oracle(
    params: &ClassParams,
    w: &WeightFunction,
    m: u128,
    l_cap: u128,
) -> Result<BalanceScan> {
    let (p, q) = (params.p, params.q);
    if !(p < q) || q.is_infinite() {
        return Err(Error::RegimeMismatch("balance oracle applies to p < q < ∞ only".into()));
    }
    let (r, d) = (params.r, params.d);
    let rho = p * q / (q - p);
    let mut best = 0.0f64;
    let mut l_star = 0u128;
    for l in (m + 1)..=l_cap {
        let s_l = oracle_head_sum(w, r, d, -q, l)?;
        let t_l = oracle_tail_sum(w, r, d, rho, l)?;
        let c = s_l * t_l.powf(p / rho) / ((l - m) as f64);
        let u = 1.0 / (c.powf(q / (q - p)) + s_l);
        let next = oracle_step_value(w, r, d, l + 1)?;
        let valid = u * t_l >= (1.0 - u * s_l) * next.powf(rho * q / p) - 1e-15;
        if !valid {
            continue;
        }
        let vp = (l - m) as f64 * u.powf(p / q)
            + (1.0 - u * s_l).powf(p / q) * t_l.powf(p / rho);
        let v = vp.powf(1.0 / p);
        if v > best {
            best = v;
            l_star = l;
        }
    }
    if l_star == 0 {
        return Err(Error::ScanCap("no valid splitting index below the cap".into()));
    }
    Ok(BalanceScan { l_star, value: best })
}
