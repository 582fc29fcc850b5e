//! Integer lattice points in ℓ_r-balls of R^d: exact counting, shell
//! enumeration, and the ball-volume constants behind the count asymptotics.
//!
//! Shell boundaries decide shell sizes ν_s, and those feed every exact
//! formula downstream, so membership tests |k|_r ≤ s are exact: integer
//! arithmetic for integer r and r = ∞, escalating fixed-point interval
//! arithmetic on big-integer roots for rational r, and a guarded float
//! comparison (documented as approximate) for irrational r.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// An integer frequency vector; lexicographic `Ord` comes with `Vec`.
pub type LatticeVector = Vec<i64>;

/// The ℓ_r exponent, classified so boundary comparisons can pick an exact
/// arithmetic path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum R {
    /// r = ∞ (max norm).
    Infinity,
    /// r = n for an integer n ≥ 1.
    Integer(u32),
    /// r = num/den in lowest terms, den ≥ 2.
    Rational { num: u32, den: u32 },
    /// Any other positive real; comparisons fall back to guarded floats.
    Real(f64),
}

impl R {
    /// Classifies a float exponent, snapping to a small fraction (den ≤ 16)
    /// when the float represents it exactly.
    pub fn from_f64(r: f64) -> Result<R> {
        if !(r > 0.0) || r.is_nan() {
            return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
        }
        if r.is_infinite() {
            return Ok(R::Infinity);
        }
        for den in 1..=16u32 {
            let num = (r * den as f64).round();
            if num >= 1.0 && num <= 1e6 && num / den as f64 == r {
                return Ok(R::reduced(num as u32, den));
            }
        }
        Ok(R::Real(r))
    }

    pub fn from_fraction(num: u32, den: u32) -> Result<R> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter("r fraction parts must be positive".into()));
        }
        Ok(R::reduced(num, den))
    }

    fn reduced(num: u32, den: u32) -> R {
        let g = num_integer::gcd(num, den);
        let (num, den) = (num / g, den / g);
        if den == 1 { R::Integer(num) } else { R::Rational { num, den } }
    }

    /// The exponent as a float (∞ for the max norm).
    pub fn value(self) -> f64 {
        match self {
            R::Infinity => f64::INFINITY,
            R::Integer(n) => n as f64,
            R::Rational { num, den } => num as f64 / den as f64,
            R::Real(x) => x,
        }
    }
}

impl FromStr for R {
    type Err = Error;

    fn from_str(s: &str) -> Result<R> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(R::Infinity);
        }
        if let Some((a, b)) = t.split_once('/') {
            let num: u32 = a.trim().parse().map_err(|_| Error::Parse(format!("bad r fraction: {s}")))?;
            let den: u32 = b.trim().parse().map_err(|_| Error::Parse(format!("bad r fraction: {s}")))?;
            return R::from_fraction(num, den);
        }
        let x: f64 = t.parse().map_err(|_| Error::Parse(format!("bad r value: {s}")))?;
        R::from_f64(x)
    }
}

impl fmt::Display for R {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            R::Infinity => write!(f, "inf"),
            R::Integer(n) => write!(f, "{n}"),
            R::Rational { num, den } => write!(f, "{num}/{den}"),
            R::Real(x) => write!(f, "{x}"),
        }
    }
}

/// (Σ |k_i|^r)^{1/r}, max |k_i| for r = ∞. Exact-in-f64 fast paths cover the
/// cases where the value itself must be bit-reproducible: d = 1 (the norm is
/// |k|), r = 1, r = ∞ and perfect-square sums for r = 2.
pub fn lr_norm(k: &[i64], r: R) -> f64 {
    if k.len() == 1 {
        return k[0].unsigned_abs() as f64;
    }
    match r {
        R::Infinity => k.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0) as f64,
        R::Integer(1) => k.iter().map(|c| c.unsigned_abs() as f64).sum(),
        R::Integer(2) => {
            let s: u128 = k.iter().map(|c| (c.unsigned_abs() as u128).pow(2)).sum();
            (s as f64).sqrt()
        }
        _ => {
            let rv = r.value();
            let s: f64 = k.iter().map(|c| (c.unsigned_abs() as f64).powf(rv)).sum();
            s.powf(1.0 / rv)
        }
    }
}

fn pow_u128(base: u128, exp: u32) -> Option<u128> {
    base.checked_pow(exp)
}

/// Exact membership test |k|_r ≤ s.
pub fn norm_le(k: &[i64], r: R, s: u32) -> bool {
    match r {
        R::Infinity => k.iter().all(|c| c.unsigned_abs() <= s as u64),
        R::Integer(n) => {
            // Σ |k_i|^n ≤ s^n in integers; falls back to big integers on
            // overflow (only reachable for extreme exponents).
            let mut sum: u128 = 0;
            let mut overflow = false;
            for c in k {
                match pow_u128(c.unsigned_abs() as u128, n).and_then(|p| sum.checked_add(p)) {
                    Some(t) => sum = t,
                    None => {
                        overflow = true;
                        break;
                    }
                }
            }
            if !overflow {
                if let Some(rhs) = pow_u128(s as u128, n) {
                    return sum <= rhs;
                }
            }
            let lhs: BigUint = k.iter().map(|c| BigUint::from(c.unsigned_abs()).pow(n)).sum();
            lhs <= BigUint::from(s).pow(n)
        }
        R::Rational { num, den } => {
            // Fast float screen with a wide safety band, exact interval
            // arithmetic only near the boundary.
            let rv = r.value();
            let lhs: f64 = k.iter().map(|c| (c.unsigned_abs() as f64).powf(rv)).sum();
            let rhs = (s as f64).powf(rv);
            if lhs < rhs * (1.0 - 1e-9) - 1e-12 {
                return true;
            }
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
                return false;
            }
            let terms: Vec<BigUint> =
                k.iter().map(|c| BigUint::from(c.unsigned_abs()).pow(num)).collect();
            sum_roots_le(&terms, den, &BigUint::from(s).pow(num))
        }
        R::Real(rv) => {
            // Irrational exponents admit no exact integer reformulation;
            // compare compensated float sums and treat the tie band as on
            // the boundary. Deterministic, documented as approximate.
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for c in k {
                let term = (c.unsigned_abs() as f64).powf(rv);
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            let rhs = (s as f64).powf(rv);
            sum <= rhs * (1.0 + 1e-12) + 1e-300
        }
    }
}

/// Decides Σ terms_i^{1/v} ≤ rhs^{1/v} exactly via escalating fixed-point
/// intervals: floor roots of (x << v·K) bracket x^{1/v}·2^K within one unit.
/// Undecided at 384 fractional bits means the two sides are equal: for sums
/// of a few v-th roots of small integers, distinct algebraic values are
/// separated by far more than 2^{-384} (Liouville-type bound).
fn sum_roots_le(terms: &[BigUint], v: u32, rhs: &BigUint) -> bool {
    use num_traits::Zero;
    for k_bits in [64usize, 128, 256, 384] {
        let shift = v as usize * k_bits;
        let mut lo_sum = BigUint::zero();
        for a in terms {
            lo_sum += (a.clone() << shift).nth_root(v);
        }
        let hi_sum = &lo_sum + BigUint::from(terms.len());
        let rb_lo = (rhs.clone() << shift).nth_root(v);
        let rb_hi = &rb_lo + 1u32;
        if hi_sum <= rb_lo {
            return true;
        }
        if lo_sum >= rb_hi {
            return false;
        }
    }
    true
}

/// Smallest integer s with |k|_r ≤ s (the shell index of k).
pub fn shell_of(k: &[i64], r: R) -> u32 {
    let guess = lr_norm(k, r).ceil();
    let mut s = if guess.is_finite() && guess >= 0.0 { guess as u32 } else { 0 };
    while !norm_le(k, r, s) {
        s += 1;
    }
    while s > 0 && norm_le(k, r, s - 1) {
        s -= 1;
    }
    s
}

/// M_{r,d} = (2Γ(1+1/r))^d / Γ(1+d/r): the volume of the unit ℓ_r-ball,
/// which scales the lattice counts V_s ~ M_{r,d} s^d. The r = ∞ limit is 2^d.
pub fn vol_constant(r: R, d: u32) -> f64 {
    let inv_r = match r {
        R::Infinity => 0.0,
        _ => 1.0 / r.value(),
    };
    let df = d as f64;
    (df * (std::f64::consts::LN_2 + ln_gamma(1.0 + inv_r)) - ln_gamma(1.0 + df * inv_r)).exp()
}

/// c_{r,d} = d^{1/r}/2: the ℓ_r-circumradius of the half-open unit cube.
/// Covering each lattice point's unit cube gives the count sandwich
/// M_{r,d}·((s−c)_+)^d ≤ V_s ≤ M_{r,d}·(s+c)^d for r ≥ 1 (triangle
/// inequality). For r < 1 only |·|_r^r is subadditive, so the radius shifts
/// by c^r = d/2^r in the r-th power instead:
/// M·((s^r−c^r)_+)^{d/r} ≤ V_s ≤ M·(s^r+c^r)^{d/r}.
pub fn c_rd(r: R, d: u32) -> f64 {
    match r {
        R::Infinity => 0.5,
        _ => (d as f64).powf(1.0 / r.value()) / 2.0,
    }
}

/// The certified count sandwich: returns (lower, upper) with
/// lower ≤ V_t ≤ upper for the real radius t ≥ 0, picking the shift form
/// that the covering argument proves for this r (see [`c_rd`]).
pub fn count_sandwich(r: R, d: u32, t: f64) -> (f64, f64) {
    let m = vol_constant(r, d);
    let c = c_rd(r, d);
    let rv = r.value();
    if rv >= 1.0 {
        (m * ((t - c).max(0.0)).powi(d as i32), m * (t + c).powi(d as i32))
    } else {
        let shift = c.powf(rv); // d/2^r
        let dr = d as f64 / rv;
        let y = t.powf(rv);
        (m * ((y - shift).max(0.0)).powf(dr), m * (y + shift).powf(dr))
    }
}

/// Exact lattice-point counter with cached counts V_0, V_1, … and shell
/// sizes ν_s = V_s − V_{s−1}. The ℓ_1 ball has a closed-form count; every
/// other finite exponent is counted by a dimension recursion over one
/// coordinate against a cached table of coordinate powers, whose
/// two-dimensional base case sweeps a nonincreasing boundary pointer so a
/// whole plane costs O(s) comparisons. Interior mutability only grows the
/// caches; results are deterministic.
pub struct BallCounter {
    r: R,
    d: u32,
    counts: RefCell<Vec<u128>>,
    pow_u: RefCell<Vec<u128>>,
    pow_f: RefCell<Vec<f64>>,
}

impl BallCounter {
    pub fn new(r: R, d: u32) -> BallCounter {
        BallCounter {
            r,
            d,
            counts: RefCell::new(Vec::new()),
            pow_u: RefCell::new(Vec::new()),
            pow_f: RefCell::new(Vec::new()),
        }
    }

    pub fn r(&self) -> R {
        self.r
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    /// V_s: lattice points with |k|_r ≤ s.
    pub fn v(&self, s: u32) -> Result<u128> {
        if self.d == 1 {
            // 2s+1 for every r; skip the cache so huge one-dimensional
            // crawls cost no memory.
            return Ok(2 * s as u128 + 1);
        }
        {
            let counts = self.counts.borrow();
            if let Some(&v) = counts.get(s as usize) {
                return Ok(v);
            }
        }
        let from = self.counts.borrow().len() as u32;
        for t in from..=s {
            let v = self.count_ball(t)?;
            self.counts.borrow_mut().push(v);
        }
        Ok(self.counts.borrow()[s as usize])
    }

    /// ν_s = V_s − V_{s−1} (with V_{−1} = 0).
    pub fn nu(&self, s: u32) -> Result<u128> {
        if s == 0 {
            return self.v(0);
        }
        Ok(self.v(s)? - self.v(s - 1)?)
    }

    /// n_m: the smallest s with V_s ≥ m (m ≥ 1), so that m lands in the
    /// half-open index block (V_{n_m − 1}, V_{n_m}].
    pub fn n_of(&self, m: u128) -> Result<u32> {
        if m == 0 {
            return Err(Error::InvalidParameter("inverse count needs m ≥ 1".into()));
        }
        if self.d == 1 {
            // V_s = 2s+1 for every r in one dimension: s = ⌈(m−1)/2⌉ = ⌊m/2⌋.
            return Ok((m / 2) as u32);
        }
        // Counts grow like M s^d; start from the float estimate and fix up.
        let est = ((m as f64 / vol_constant(self.r, self.d)).powf(1.0 / self.d as f64)
            - c_rd(self.r, self.d))
        .floor()
        .max(0.0) as u32;
        let mut s = est;
        while self.v(s)? < m {
            s += 1;
        }
        while s > 0 && self.v(s - 1)? >= m {
            s -= 1;
        }
        Ok(s)
    }

    /// The two-sided count sandwich (see [`count_sandwich`]), checked with a
    /// small float slack for the transcendental constant.
    pub fn sandwich_holds(&self, s: u32) -> Result<bool> {
        let v = self.v(s)? as f64;
        let (lo, hi) = count_sandwich(self.r, self.d, s as f64);
        Ok(lo <= v * (1.0 + 1e-9) && v <= hi * (1.0 + 1e-9))
    }

    fn count_ball(&self, s: u32) -> Result<u128> {
        if self.d == 1 {
            return Ok(2 * s as u128 + 1);
        }
        match self.r {
            R::Infinity => (2 * s as u128 + 1)
                .checked_pow(self.d)
                .ok_or_else(|| Error::TooLarge(format!("V_{s} overflows the count type"))),
            R::Integer(1) => cross_polytope_count(self.d, s),
            R::Integer(n) => {
                self.grow_pow_u(s, n)?;
                let pows = self.pow_u.borrow();
                let budget = pows[s as usize];
                self.columns_u(&pows, budget, self.d)
            }
            _ => {
                self.grow_pow_f(s);
                let pows = self.pow_f.borrow();
                let mut prefix = Vec::with_capacity(self.d as usize);
                self.columns_f(&pows, s, 0.0, self.d, &mut prefix)
            }
        }
    }

    fn grow_pow_u(&self, s: u32, n: u32) -> Result<()> {
        let mut pows = self.pow_u.borrow_mut();
        while pows.len() <= s as usize {
            let x = pows.len() as u128;
            pows.push(
                pow_u128(x, n)
                    .ok_or_else(|| Error::TooLarge(format!("s^r overflows for s={x}")))?,
            );
        }
        Ok(())
    }

    fn grow_pow_f(&self, s: u32) {
        let rv = self.r.value();
        let mut pows = self.pow_f.borrow_mut();
        while pows.len() <= s as usize {
            let x = pows.len() as f64;
            pows.push(x.powf(rv));
        }
    }

    /// Integer exponents: #{x ∈ Z^k : Σ|x_i|^n ≤ budget}, iterating one
    /// coordinate against the cached power table. Budgets stay exact, so
    /// there are no boundary ties to arbitrate.
    fn columns_u(&self, pows: &[u128], budget: u128, k: u32) -> Result<u128> {
        let overflow = || Error::TooLarge("lattice count overflows the count type".into());
        // Largest value whose n-th power still fits (pows[0] = 0 always does).
        let root = |b: u128| pows.partition_point(|&p| p <= b) - 1;
        if k == 1 {
            return Ok(2 * root(budget) as u128 + 1);
        }
        if k == 2 {
            // The boundary y_max(x) is nonincreasing in x: one pointer sweep
            // counts the whole plane.
            let mut y = root(budget);
            let mut total: u128 = 2 * y as u128 + 1;
            for x in 1..pows.len() {
                if pows[x] > budget {
                    break;
                }
                while pows[x].checked_add(pows[y]).map_or(true, |v| v > budget) {
                    y -= 1;
                }
                total = total
                    .checked_add(2 * (2 * y as u128 + 1))
                    .ok_or_else(overflow)?;
            }
            return Ok(total);
        }
        let mut total = self.columns_u(pows, budget, k - 1)?; // this coordinate 0
        for x in 1..pows.len() {
            if pows[x] > budget {
                break;
            }
            let inner = self.columns_u(pows, budget - pows[x], k - 1)?;
            total = total
                .checked_add(inner.checked_mul(2).ok_or_else(overflow)?)
                .ok_or_else(overflow)?;
        }
        Ok(total)
    }

    /// Fractional and real exponents: the same column recursion on float
    /// power sums. Comparisons that land within a few ulps of the boundary
    /// fall back to the exact membership test, so the staircase stays exact
    /// wherever the norm itself is exactly decidable.
    fn columns_f(
        &self,
        pows: &[f64],
        s: u32,
        used: f64,
        k: u32,
        prefix: &mut Vec<i64>,
    ) -> Result<u128> {
        let overflow = || Error::TooLarge("lattice count overflows the count type".into());
        let rhs = pows[s as usize];
        let band = f64::EPSILON * rhs * 4.0 * self.d as f64;
        let fits = |prefix: &mut Vec<i64>, x: usize, y: Option<usize>| -> bool {
            let lhs = used + pows[x] + y.map_or(0.0, |y| pows[y]);
            if lhs <= rhs - band {
                return true;
            }
            if lhs > rhs + band {
                return false;
            }
            prefix.push(x as i64);
            if let Some(y) = y {
                prefix.push(y as i64);
            }
            let ok = norm_le(prefix, self.r, s);
            prefix.pop();
            if y.is_some() {
                prefix.pop();
            }
            ok
        };
        if k == 2 {
            // Sweep the nonincreasing boundary y_max(x) with one pointer.
            let mut y = s as usize;
            let mut total: u128 = 0;
            for x in 0..=s as usize {
                if !fits(prefix, x, None) {
                    break;
                }
                while y > 0 && !fits(prefix, x, Some(y)) {
                    y -= 1;
                }
                let w = if x == 0 { 1 } else { 2 };
                total = total
                    .checked_add(w * (2 * y as u128 + 1))
                    .ok_or_else(overflow)?;
            }
            return Ok(total);
        }
        let mut total: u128 = 0;
        for x in 0..=s as usize {
            if !fits(prefix, x, None) {
                break;
            }
            prefix.push(x as i64);
            let inner = self.columns_f(pows, s, used + pows[x], k - 1, prefix);
            prefix.pop();
            let w: u128 = if x == 0 { 1 } else { 2 };
            total = total
                .checked_add(inner?.checked_mul(w).ok_or_else(overflow)?)
                .ok_or_else(overflow)?;
        }
        Ok(total)
    }
}

/// Closed-form ℓ_1 ball count: V_s = Σ_k 2^k C(d,k) C(s,k), choosing the k
/// nonzero coordinates, their signs, and a composition of total magnitude
/// ≤ s into k positive parts.
fn cross_polytope_count(d: u32, s: u32) -> Result<u128> {
    let overflow = || Error::TooLarge(format!("V_{s} overflows the count type"));
    let mut total: u128 = 0;
    for k in 0..=d.min(s) {
        let term = binom_u128(d as u128, k as u128)
            .and_then(|c| c.checked_mul(binom_u128(s as u128, k as u128)?))
            .and_then(|c| c.checked_mul(1u128.checked_shl(k)?))
            .ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    Ok(total)
}

fn binom_u128(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for j in 0..k {
        // The running product of j+1 consecutive binomial steps is integral.
        out = out.checked_mul(n - j)? / (j + 1);
    }
    Some(out)
}

/// Exact count of lattice points with |k|_r ≤ s (one-shot; reuse a
/// [`BallCounter`] when calling repeatedly).
pub fn ball_count(s: u32, r: R, d: u32) -> Result<u128> {
    BallCounter::new(r, d).v(s)
}

/// n_m: the smallest s with V_s ≥ m.
pub fn inverse_count(m: u128, r: R, d: u32) -> Result<u32> {
    BallCounter::new(r, d).n_of(m)
}

/// All k with s−1 < |k|_r ≤ s (shell 0 is the origin), in lexicographic
/// order — the deterministic fill order for optimal index sets.
pub fn enumerate_shell(s: u32, r: R, d: u32) -> Vec<LatticeVector> {
    let mut out = Vec::new();
    let mut k = Vec::with_capacity(d as usize);
    walk_shell(s, r, d, &mut k, &mut out);
    out
}

fn walk_shell(s: u32, r: R, d: u32, k: &mut Vec<i64>, out: &mut Vec<LatticeVector>) {
    if k.len() as u32 == d {
        if norm_le(k, r, s) && (s == 0 || !norm_le(k, r, s - 1)) {
            out.push(k.clone());
        }
        return;
    }
    let rv = r.value();
    let prune_rhs = if rv.is_finite() { (s as f64).powf(rv) } else { s as f64 };
    for c in -(s as i64)..=(s as i64) {
        // Partial-norm prune: extending a vector only increases the norm.
        if rv.is_finite() {
            let partial: f64 =
                k.iter().chain(std::iter::once(&c)).map(|x| (x.unsigned_abs() as f64).powf(rv)).sum();
            if partial > prune_rhs * (1.0 + 1e-9) + 1e-9 {
                continue;
            }
        }
        k.push(c);
        walk_shell(s, r, d, k, out);
        k.pop();
    }
}
