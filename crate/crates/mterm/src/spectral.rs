//! Concrete trigonometric polynomials on the torus: coefficient fields,
//! S^p and grid L_p norms, greedy m-term approximation, and the flat
//! extremal constructions h₁–h₄ that realize lower bounds.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact_values::{ClassParams, IndexSet, MaskedSystem, Setting};
use crate::lattice::{enumerate_shell, lr_norm, shell_of, vol_constant, LatticeVector, R};
use crate::mag::Mag;
use crate::weights::WeightFunction;

/// A finitely supported field of Fourier coefficients f̂(k). Zero
/// coefficients are never stored; keys all have length d.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    entries: BTreeMap<LatticeVector, Complex64>,
    d: u32,
}

impl CoefficientField {
    pub fn new(
        pairs: impl IntoIterator<Item = (LatticeVector, Complex64)>,
        d: u32,
    ) -> Result<CoefficientField> {
        let mut entries = BTreeMap::new();
        for (k, c) in pairs {
            if k.len() as u32 != d {
                return Err(Error::InvalidParameter(format!(
                    "coefficient key {k:?} does not have dimension {d}"
                )));
            }
            if c.norm_sqr() == 0.0 {
                continue;
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidParameter("non-finite coefficient".into()));
            }
            if entries.insert(k, c).is_some() {
                return Err(Error::InvalidParameter("duplicate coefficient key".into()));
            }
        }
        Ok(CoefficientField { entries, d })
    }

    pub fn from_real(pairs: impl IntoIterator<Item = (LatticeVector, f64)>, d: u32) -> Result<Self> {
        CoefficientField::new(
            pairs.into_iter().map(|(k, x)| (k, Complex64::new(x, 0.0))),
            d,
        )
    }

    pub fn zero(d: u32) -> CoefficientField {
        CoefficientField { entries: BTreeMap::new(), d }
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.entries.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, &Complex64)> {
        self.entries.iter()
    }

    /// Largest |k_j| over the support (0 for the zero field).
    pub fn max_abs_coord(&self) -> i64 {
        self.entries
            .keys()
            .flat_map(|k| k.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> Result<CoefficientField> {
        CoefficientField::new(self.entries.iter().map(|(k, v)| (k.clone(), v * c)), self.d)
    }

    /// The field with the given keys removed.
    pub fn without(&self, keys: impl IntoIterator<Item = LatticeVector>) -> CoefficientField {
        let mut entries = self.entries.clone();
        for k in keys {
            entries.remove(&k);
        }
        CoefficientField { entries, d: self.d }
    }

    /// Serialization-friendly view: (index vector, re, im) triples.
    pub fn export_entries(&self) -> Vec<(Vec<i64>, f64, f64)> {
        self.entries.iter().map(|(k, c)| (k.clone(), c.re, c.im)).collect()
    }
}

/// ‖f‖_{S^p}: the ℓ_p (quasi-)norm of the coefficient moduli
/// (sup of moduli for p = ∞).
pub fn sp_norm(f: &CoefficientField, p: f64) -> f64 {
    if p.is_infinite() {
        return f.entries.values().map(|c| c.norm()).fold(0.0, f64::max);
    }
    let sum: f64 = f.entries.values().map(|c| c.norm().powf(p)).sum();
    sum.powf(1.0 / p)
}

/// ‖{f̂(k)/Ψ_k}‖_{ℓ_q} with Ψ_k = ψ(max(|k|_r, 1)): membership in the
/// class holds iff this is ≤ 1. Uses the true (not stepwise) norm |k|_r.
pub fn class_norm(f: &CoefficientField, w: &WeightFunction, params: &ClassParams) -> f64 {
    let q = params.q;
    let ratio = |k: &LatticeVector, c: &Complex64| -> f64 {
        let psi = w.eval(lr_norm(k, params.r).max(1.0));
        c.norm() / psi
    };
    if q.is_infinite() {
        return f.entries.iter().map(|(k, c)| ratio(k, c)).fold(0.0, f64::max);
    }
    let sum: f64 = f.entries.iter().map(|(k, c)| ratio(k, c).powf(q)).sum();
    sum.powf(1.0 / q)
}

/// Coefficients ranked by decreasing modulus; ties broken by
/// (shell index, lexicographic coordinates) for reproducibility.
pub struct GreedyOrder {
    ranked: Vec<(LatticeVector, f64)>,
}

impl GreedyOrder {
    pub fn new(f: &CoefficientField, r: R) -> GreedyOrder {
        let mut ranked: Vec<(LatticeVector, f64, u32)> = f
            .entries
            .iter()
            .map(|(k, c)| (k.clone(), c.norm(), shell_of(k, r)))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0))
        });
        GreedyOrder { ranked: ranked.into_iter().map(|(k, m, _)| (k, m)).collect() }
    }

    pub fn ranked(&self) -> &[(LatticeVector, f64)] {
        &self.ranked
    }

    pub fn indices(&self) -> impl Iterator<Item = &LatticeVector> {
        self.ranked.iter().map(|(k, _)| k)
    }

    /// The first m ranked frequency vectors (fewer if support is smaller).
    pub fn head(&self, m: usize) -> Vec<LatticeVector> {
        self.ranked.iter().take(m).map(|(k, _)| k.clone()).collect()
    }
}

/// Where a residual norm is taken.
#[derive(Clone, Copy, Debug)]
pub enum Space {
    Sp { p: f64 },
    LpGrid { p: f64, n: u32 },
}

/// ‖f − G_m(f)‖ for the greedy operator G_m: drops the m ranked largest
/// coefficients and measures the rest. In S^p this equals both σ_m(f)
/// and σ_m^⊥(f) exactly.
pub fn greedy_residual(f: &CoefficientField, m: usize, space: Space, r: R) -> Result<f64> {
    let order = GreedyOrder::new(f, r);
    let residual = f.without(order.head(m));
    match space {
        Space::Sp { p } => Ok(sp_norm(&residual, p)),
        Space::LpGrid { p, n } => lp_grid_norm(&residual, p, n),
    }
}

/// Bytes-free guard: total grid work n^d (points) and n^d·support (term
/// evaluations) stay within desk scale.
fn grid_guard(f: &CoefficientField, n: u32, d: u32) -> Result<u64> {
    let points = (n as u64).checked_pow(d).ok_or_else(|| {
        Error::TooLarge("grid point count overflows".into())
    })?;
    if points > 1 << 28 {
        return Err(Error::TooLarge(format!("grid has {points} points (cap 2^28)")));
    }
    let work = points.saturating_mul(f.len().max(1) as u64);
    if work > 1 << 33 {
        return Err(Error::TooLarge(format!("grid evaluation needs {work} term-ops (cap 2^33)")));
    }
    Ok(points)
}

/// Rectangle-rule L_p norm of f on the uniform n^d torus grid
/// ((2π)^{-d}∫|f|^p)^{1/p}; max over the grid for p = ∞. Exact for p = 2
/// whenever n is alias-free (n ≥ 2·max|k_j| + 1), by Parseval.
pub fn lp_grid_norm(f: &CoefficientField, p: f64, n: u32) -> Result<f64> {
    if !(p >= 1.0) && !p.is_infinite() {
        return Err(Error::InvalidParameter(format!("grid norm needs p ∈ [1, ∞], got {p}")));
    }
    let need = 2 * f.max_abs_coord() + 1;
    if (n as i64) < need {
        return Err(Error::InvalidParameter(format!(
            "grid size {n} is below the alias-free bound {need}"
        )));
    }
    let d = f.d as usize;
    let points = grid_guard(f, n, f.d)?;
    // e_k(x_t) = roots[(k·t) mod n] on the uniform grid x_t = 2π t / n.
    let roots: Vec<Complex64> = (0..n)
        .map(|t| {
            let a = TAU * t as f64 / n as f64;
            Complex64::new(a.cos(), a.sin())
        })
        .collect();
    let terms: Vec<(&LatticeVector, Complex64)> =
        f.entries.iter().map(|(k, c)| (k, *c)).collect();

    let mut t = vec![0u32; d];
    let mut sum = 0.0f64; // Σ |f|^p, Kahan-compensated
    let mut comp = 0.0f64;
    let mut sup = 0.0f64;
    for _ in 0..points {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &terms {
            let mut phase: i64 = 0;
            for (kj, tj) in k.iter().zip(t.iter()) {
                phase += kj * *tj as i64;
            }
            acc += c * roots[phase.rem_euclid(n as i64) as usize];
        }
        let a = acc.norm();
        if p.is_infinite() {
            sup = sup.max(a);
        } else {
            let y = a.powf(p) - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
        }
        // advance the grid multi-index
        for slot in t.iter_mut() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    if p.is_infinite() {
        Ok(sup)
    } else {
        Ok((sum / points as f64).powf(1.0 / p))
    }
}

/// Grid norm with an automatic grid: 8× the Nyquist bound, with one
/// doubling to expose quadrature drift (`delta`). For p = ∞ the doubled
/// grid nests the first, so `value` is the finer (larger) estimate.
pub struct GridNorm {
    pub value: f64,
    pub n: u32,
    pub delta: f64,
}

pub fn lp_grid_norm_auto(f: &CoefficientField, p: f64) -> Result<GridNorm> {
    let n0 = 8 * (2 * f.max_abs_coord() as u32 + 1);
    let a = lp_grid_norm(f, p, n0)?;
    let b = lp_grid_norm(f, p, 2 * n0)?;
    Ok(GridNorm { value: b, n: 2 * n0, delta: (a - b).abs() })
}

/// The four flat extremal constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremalKind {
    /// Flat on the whole ball |j|_r ≤ n_m with n_m = ⌊(2m/M_{r,d})^{1/d}⌋.
    H1,
    /// Flat on the m+1 smallest-norm frequencies.
    H2,
    /// The univariate variant of H2 (requires d = 1).
    H3,
    /// A single term ψ(|k₀|_r)·e_{k₀} at the lexicographically first
    /// maximizer of Ψ outside a supplied set γ_m.
    H4,
}

impl std::str::FromStr for ExtremalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ExtremalKind> {
        match s {
            "h1" => Ok(ExtremalKind::H1),
            "h2" => Ok(ExtremalKind::H2),
            "h3" => Ok(ExtremalKind::H3),
            "h4" => Ok(ExtremalKind::H4),
            _ => Err(Error::Parse(format!("unknown extremal kind '{s}' (h1..h4)"))),
        }
    }
}

impl std::fmt::Display for ExtremalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtremalKind::H1 => "h1",
            ExtremalKind::H2 => "h2",
            ExtremalKind::H3 => "h3",
            ExtremalKind::H4 => "h4",
        })
    }
}

/// Flat normalization over a frequency set: the constant coefficient that
/// puts the flat function exactly on the class boundary. q < ∞ gives
/// (Σ Ψ_k^{−q})^{−1/q}; q = ∞ gives min Ψ_k.
fn flat_level(set: &[LatticeVector], w: &WeightFunction, params: &ClassParams) -> Result<f64> {
    let psi_at = |k: &LatticeVector| -> Mag {
        Mag::from_value(w.eval(lr_norm(k, params.r).max(1.0)))
    };
    let level = if params.q.is_infinite() {
        set.iter().map(psi_at).fold(Mag::INFINITY, Mag::min)
    } else {
        Mag::sum(set.iter().map(|k| psi_at(k).powf(-params.q))).powf(-1.0 / params.q)
    };
    let c = level.value();
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Guard(format!(
            "flat coefficient level {c} is not representable at this scale"
        )));
    }
    Ok(c)
}

/// The m+1 frequencies of smallest true norm |k|_r, ties broken
/// lexicographically, gathered shell by shell.
fn smallest_norm_indices(params: &ClassParams, count: u128) -> Result<Vec<LatticeVector>> {
    if count > 1 << 22 {
        return Err(Error::TooLarge(format!("extremal support {count} exceeds the cap")));
    }
    let mut pool: Vec<(f64, LatticeVector)> = Vec::new();
    let mut s = 0u32;
    let mut have = 0u128;
    while have < count {
        let shell = enumerate_shell(s, params.r, params.d);
        have += shell.len() as u128;
        pool.extend(shell.into_iter().map(|k| (lr_norm(&k, params.r), k)));
        s += 1;
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(pool.into_iter().take(count as usize).map(|(_, k)| k).collect())
}

/// Build the extremal function of the given kind. `gamma` is used by H4
/// only (defaulting to the shell-greedy optimal set of size m).
pub fn extremal(
    kind: ExtremalKind,
    params: &ClassParams,
    w: &WeightFunction,
    m: u128,
    gamma: Option<&IndexSet>,
) -> Result<CoefficientField> {
    match kind {
        ExtremalKind::H1 => {
            let big_m = vol_constant(params.r, params.d);
            let n_m = ((2.0 * m as f64 / big_m).powf(1.0 / params.d as f64)).floor();
            let n_m = if n_m.is_finite() && n_m > 0.0 { n_m as u32 } else { 0 };
            let mut set = Vec::new();
            for s in 0..=n_m {
                set.extend(enumerate_shell(s, params.r, params.d));
            }
            if set.len() as u128 > 1 << 22 {
                return Err(Error::TooLarge("extremal ball is too large".into()));
            }
            let c = flat_level(&set, w, params)?;
            CoefficientField::from_real(set.into_iter().map(|k| (k, c)), params.d)
        }
        ExtremalKind::H2 | ExtremalKind::H3 => {
            if kind == ExtremalKind::H3 && params.d != 1 {
                return Err(Error::RegimeMismatch("h3 is a univariate construction (d = 1)".into()));
            }
            let set = smallest_norm_indices(params, m + 1)?;
            let c = flat_level(&set, w, params)?;
            CoefficientField::from_real(set.into_iter().map(|k| (k, c)), params.d)
        }
        ExtremalKind::H4 => {
            let setting = Setting::new(*params, w.clone())?;
            let owned;
            let gamma = match gamma {
                Some(g) => g,
                None => {
                    owned = setting.optimal_set(m)?;
                    &owned
                }
            };
            let ms = MaskedSystem::new(setting.rearrangement(), gamma)?;
            let mut s = 0u32;
            let s_first = loop {
                if ms.available(s)? > 0 {
                    break s;
                }
                s += 1;
                if s > 1_000_000 {
                    return Err(Error::ScanCap("no free frequency found".into()));
                }
            };
            let k0 = enumerate_shell(s_first, params.r, params.d)
                .into_iter()
                .filter(|k| !gamma.contains(k))
                .map(|k| (lr_norm(&k, params.r), k))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, k)| k)
                .expect("a shell with available frequencies contains one");
            let c = w.eval(lr_norm(&k0, params.r).max(1.0));
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Guard("extremal coefficient underflows".into()));
            }
            CoefficientField::from_real([(k0, c)], params.d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(pairs: &[(&[i64], f64, f64)], d: u32) -> CoefficientField {
        CoefficientField::new(
            pairs.iter().map(|(k, re, im)| (k.to_vec(), Complex64::new(*re, *im))),
            d,
        )
        .unwrap()
    }

    fn params(p: f64, q: f64, r: R, d: u32) -> ClassParams {
        ClassParams::new(p, q, r, d).unwrap()
    }

    fn weight(spec: &str) -> WeightFunction {
        WeightFunction::new(spec.parse().unwrap()).unwrap()
    }

    #[test]
    fn sp_norm_examples() {
        let f = field(&[(&[0], 3.0, 0.0), (&[1], 0.0, 4.0)], 1);
        assert!((sp_norm(&f, 2.0) - 5.0).abs() < 1e-14);
        assert!((sp_norm(&f, 1.0) - 7.0).abs() < 1e-14);
        assert!((sp_norm(&f, f64::INFINITY) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn sp_norm_is_nonincreasing_in_p() {
        let f = field(&[(&[0], 1.0, 0.0), (&[2], 0.4, 0.3), (&[-1], 0.0, 0.9)], 1);
        let ps = [0.5, 1.0, 2.0, 4.0, f64::INFINITY];
        let vals: Vec<f64> = ps.iter().map(|&p| sp_norm(&f, p)).collect();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "ℓ_p norm must not increase in p: {vals:?}");
        }
    }

    #[test]
    fn class_norm_normalized_single_term() {
        let w = weight("pow:s=1");
        for q in [1.0, 2.0, f64::INFINITY] {
            let pr = params(2.0, q, R::Integer(1), 1);
            let f = field(&[(&[2], 0.5, 0.0)], 1); // Ψ_2 = ψ(2) = 1/2
            assert!((class_norm(&f, &w, &pr) - 1.0).abs() < 1e-12, "q={q}");
        }
        let pr = params(2.0, 2.0, R::Integer(1), 1);
        assert_eq!(class_norm(&CoefficientField::zero(1), &w, &pr), 0.0);
    }

    #[test]
    fn greedy_order_breaks_ties_by_shell_then_lex() {
        let f = field(
            &[(&[1], 0.5, 0.0), (&[2], 0.0, 0.5), (&[-2], -0.5, 0.0), (&[0], 1.0, 0.0)],
            1,
        );
        let order = GreedyOrder::new(&f, R::Integer(1));
        let ranked: Vec<&LatticeVector> = order.indices().collect();
        assert_eq!(ranked, vec![&vec![0], &vec![1], &vec![-2], &vec![2]]);
        for pair in order.ranked().windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn greedy_order_is_scale_invariant() {
        let f = field(
            &[(&[1], 0.5, 0.0), (&[2], 0.0, 0.5), (&[-2], -0.5, 0.0), (&[0], 1.0, 0.0)],
            1,
        );
        let g = f.scale(Complex64::new(0.0, -0.5)).unwrap();
        let a: Vec<LatticeVector> = GreedyOrder::new(&f, R::Integer(1)).head(4);
        let b: Vec<LatticeVector> = GreedyOrder::new(&g, R::Integer(1)).head(4);
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_residual_examples() {
        let f = field(
            &[(&[0], 1.0, 0.0), (&[1], 0.5, 0.0), (&[-1], 0.5, 0.0), (&[2], 0.25, 0.0)],
            1,
        );
        let r = R::Integer(1);
        let got = greedy_residual(&f, 1, Space::Sp { p: 1.0 }, r).unwrap();
        assert!((got - 1.25).abs() < 1e-14);
        assert_eq!(greedy_residual(&f, 4, Space::Sp { p: 2.0 }, r).unwrap(), 0.0);
        assert_eq!(
            greedy_residual(&f, 4, Space::LpGrid { p: 2.0, n: 16 }, r).unwrap(),
            0.0
        );
        // |e_k| ≡ 1: the m = 0 residual of a single exponential is 1 in every L_p.
        let ek = field(&[(&[3], 1.0, 0.0)], 1);
        for p in [1.0, 2.0, f64::INFINITY] {
            let v = greedy_residual(&ek, 0, Space::LpGrid { p, n: 64 }, r).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn grid_norm_examples() {
        let c = Complex64::new(3.0, -4.0);
        let f0 = CoefficientField::new([(vec![0, 0], c)], 2).unwrap();
        for p in [1.0, 2.0, f64::INFINITY] {
            assert!((lp_grid_norm(&f0, p, 5).unwrap() - 5.0).abs() < 1e-12);
        }
        let f = field(&[(&[0], 1.0, 0.0), (&[1], 1.0, 0.0)], 1);
        assert!((lp_grid_norm(&f, 2.0, 8).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((lp_grid_norm(&f, f64::INFINITY, 4096).unwrap() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn grid_norm_guards() {
        let f = field(&[(&[0, 0], 1.0, 0.0), (&[2, 1], 0.5, 0.0)], 2);
        assert!(matches!(
            lp_grid_norm(&f, 2.0, 4),
            Err(Error::InvalidParameter(_))
        ));
        let z = CoefficientField::zero(6);
        assert!(matches!(lp_grid_norm(&z, 2.0, 40), Err(Error::TooLarge(_))));
    }

    #[test]
    fn parseval_on_grid() {
        let f = field(
            &[
                (&[0, 0], 0.7, 0.1),
                (&[1, -2], -0.3, 0.4),
                (&[-3, 1], 0.2, 0.0),
                (&[2, 2], 0.0, -0.6),
            ],
            2,
        );
        let auto = lp_grid_norm_auto(&f, 2.0).unwrap();
        assert!((auto.value - sp_norm(&f, 2.0)).abs() < 1e-8);
        assert!(auto.delta < 1e-8);
    }

    #[test]
    fn extremal_h1_small_ball() {
        let pr = params(1.0, 2.0, R::Integer(1), 2);
        let w = weight("pow:s=1");
        let f = extremal(ExtremalKind::H1, &pr, &w, 1, None).unwrap();
        assert_eq!(f.len(), 5);
        let c = 5f64.powf(-0.5);
        for (_, v) in f.iter() {
            assert!((v.re - c).abs() < 1e-12 && v.im == 0.0);
        }
        assert!((class_norm(&f, &w, &pr) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extremal_h2_h3_sit_on_the_class_boundary() {
        let w = weight("pow:s=1");
        let pr1 = params(1.0, 1.0, R::Integer(1), 1);
        let h2 = extremal(ExtremalKind::H2, &pr1, &w, 2, None).unwrap();
        assert_eq!(h2.len(), 3);
        for (_, v) in h2.iter() {
            assert!((v.re - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((class_norm(&h2, &w, &pr1) - 1.0).abs() < 1e-10);
        let h3 = extremal(ExtremalKind::H3, &pr1, &w, 2, None).unwrap();
        assert_eq!(h2, h3);
        assert!(matches!(
            extremal(ExtremalKind::H3, &params(1.0, 1.0, R::Integer(1), 2), &w, 2, None),
            Err(Error::RegimeMismatch(_))
        ));
        // True-norm weights keep the normalization exact for rational r too.
        let prr = params(1.0, 2.0, R::from_fraction(3, 2).unwrap(), 2);
        let hr = extremal(ExtremalKind::H2, &prr, &w, 4, None).unwrap();
        assert_eq!(hr.len(), 5);
        assert!((class_norm(&hr, &w, &prr) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extremal_h4_takes_first_free_maximizer() {
        let pr = params(1.0, 2.0, R::Integer(1), 1);
        let w = weight("pow:s=1");
        let f = extremal(ExtremalKind::H4, &pr, &w, 4, None).unwrap();
        assert_eq!(f.len(), 1);
        // γ*_4 = {0, ±1, -2}: the first free maximizer is (2) with ψ(2) = 1/2.
        assert!((f.coeff(&[2]).re - 0.5).abs() < 1e-12);
        assert!((class_norm(&f, &w, &pr) - 1.0).abs() < 1e-12);
        // Against an explicit γ that blocks (2), the next shell is used.
        let g = IndexSet::new(
            [vec![0], vec![1], vec![-1], vec![2], vec![-2]].to_vec(),
            1,
        )
        .unwrap();
        let f2 = extremal(ExtremalKind::H4, &pr, &w, 5, Some(&g)).unwrap();
        assert!((f2.coeff(&[-3]).re - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_chain_on_grid_norms() {
        // min over m-subsets of the leading coefficients (a stand-in for
        // σ_m^⊥ in L_p) never exceeds the greedy residual.
        let f = field(
            &[
                (&[0], 1.0, 0.0),
                (&[1], 0.8, 0.0),
                (&[-1], 0.0, 0.8),
                (&[2], 0.3, 0.0),
                (&[-3], 0.2, 0.0),
            ],
            1,
        );
        let r = R::Integer(1);
        let m = 2;
        for p in [1.0, 2.0, 4.0] {
            let n = 8 * (2 * f.max_abs_coord() as u32 + 1);
            let greedy = greedy_residual(&f, m, Space::LpGrid { p, n }, r).unwrap();
            let order = GreedyOrder::new(&f, r);
            let cands = order.head(m + 2);
            let mut best = f64::INFINITY;
            for i in 0..cands.len() {
                for j in (i + 1)..cands.len() {
                    let res = f.without([cands[i].clone(), cands[j].clone()]);
                    best = best.min(lp_grid_norm(&res, p, n).unwrap());
                }
            }
            assert!(best <= greedy + 1e-12, "p={p}: subset {best} vs greedy {greedy}");
        }
    }

    #[test]
    fn auto_grid_reports_small_drift() {
        let f = field(&[(&[0], 1.0, 0.0), (&[1], 1.0, 0.0)], 1);
        let g = lp_grid_norm_auto(&f, 4.0).unwrap();
        assert!(g.delta < 1e-3 * g.value);
        assert!(g.n == 2 * 8 * 3);
    }
}
