//! Exact approximation characteristics on the coefficient side: the
//! value of the best approximation by a fixed frequency set, the optimal-set
//! widths, and the best m-term quantity σ_m with its five parameter cases.
//!
//! All series appearing here reduce to shell-blocked sums of the stepwise
//! rearrangement Ψ̄; truncation is certified through
//! [`StepRearrangement::tail_sum`]. Values are log-domain magnitudes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lattice::{enumerate_shell, shell_of, LatticeVector, R};
use crate::mag::Mag;
use crate::weights::{StepRearrangement, WeightFunction};

/// The class/space exponents: target space S^p, class exponent q, lattice
/// norm r, dimension d. p and q live in (0, ∞] (f64::INFINITY allowed).
#[derive(Clone, Copy, Debug)]
pub struct ClassParams {
    pub p: f64,
    pub q: f64,
    pub r: R,
    pub d: u32,
}

impl ClassParams {
    pub fn new(p: f64, q: f64, r: R, d: u32) -> Result<ClassParams> {
        for (name, v) in [("p", p), ("q", q)] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in (0, ∞], got {v}"
                )));
            }
        }
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        Ok(ClassParams { p, q, r, d })
    }
}

/// 1/x with the convention 1/∞ = 0.
fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// A finite set of frequency vectors γ_m (all of the same dimension,
/// pairwise distinct).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    members: BTreeSet<LatticeVector>,
    d: u32,
}

impl IndexSet {
    pub fn new(vectors: impl IntoIterator<Item = LatticeVector>, d: u32) -> Result<IndexSet> {
        let mut members = BTreeSet::new();
        for k in vectors {
            if k.len() as u32 != d {
                return Err(Error::InvalidParameter(format!(
                    "index vector {k:?} does not have dimension {d}"
                )));
            }
            if !members.insert(k) {
                return Err(Error::InvalidParameter("duplicate frequency vector".into()));
            }
        }
        Ok(IndexSet { members, d })
    }

    pub fn empty(d: u32) -> IndexSet {
        IndexSet { members: BTreeSet::new(), d }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> u32 {
        self.d
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        self.members.contains(k)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticeVector> {
        self.members.iter()
    }

    /// How many members land on each shell of the given norm.
    pub fn shell_hits(&self, r: R) -> BTreeMap<u32, u128> {
        let mut hits = BTreeMap::new();
        for k in &self.members {
            *hits.entry(shell_of(k, r)).or_insert(0u128) += 1;
        }
        hits
    }
}

/// The weight system with an index set removed, rearranged: provides the
/// j-th largest remaining weight and masked power sums, all computed
/// per shell (remaining count × step value) so that nothing is ever
/// subtracted in the log domain.
pub struct MaskedSystem<'a> {
    sr: &'a StepRearrangement,
    hits: BTreeMap<u32, u128>,
    max_hit_shell: u32,
}

const MASK_SHELL_CAP: u32 = 1_000_000;

impl<'a> MaskedSystem<'a> {
    pub fn new(sr: &'a StepRearrangement, gamma: &IndexSet) -> Result<MaskedSystem<'a>> {
        if gamma.dim() != sr.counter().dim() {
            return Err(Error::InvalidParameter(
                "index set dimension does not match the lattice".into(),
            ));
        }
        let hits = gamma.shell_hits(sr.counter().r());
        let max_hit_shell = hits.keys().next_back().copied().unwrap_or(0);
        Ok(MaskedSystem { sr, hits, max_hit_shell })
    }

    /// Remaining multiplicity of shell s after removing the mask.
    pub fn available(&self, s: u32) -> Result<u128> {
        let nu = self.sr.counter().nu(s)?;
        let hit = self.hits.get(&s).copied().unwrap_or(0);
        debug_assert!(hit <= nu, "index set cannot exceed shell size");
        Ok(nu - hit.min(nu))
    }

    /// j-th largest masked weight (j ≥ 1).
    pub fn value(&self, j: u128) -> Result<Mag> {
        if j == 0 {
            return Err(Error::InvalidParameter("masked rearrangement index starts at 1".into()));
        }
        let mut remaining = j;
        for s in 0..MASK_SHELL_CAP {
            let avail = self.available(s)?;
            if remaining <= avail {
                return Ok(self.sr.psi_step(s));
            }
            remaining -= avail;
        }
        Err(Error::ScanCap("masked rearrangement scan exceeded the shell cap".into()))
    }

    /// Σ over all masked weights of Ψ̄_γ(j)^σ (σ > 0), certified:
    /// exact per-shell sums up to the last masked shell, certified tail
    /// beyond it.
    pub fn power_sum_all(&self, sigma: f64, rel_tol: f64) -> Result<Mag> {
        self.sr.tail_converges(sigma)?;
        let mut acc = Mag::ZERO;
        for s in 0..=self.max_hit_shell {
            let avail = self.available(s)?;
            acc = acc.add(Mag::from_value(avail as f64).mul(self.sr.psi_step(s).powf(sigma)));
        }
        let tail = self.sr.tail_sum(sigma, self.sr.counter().v(self.max_hit_shell)?, rel_tol)?;
        Ok(acc.add(tail.value))
    }

    /// Σ of Ψ̄_γ(j)^σ over the masked system truncated to shells ≤ s_max.
    pub fn power_sum_truncated(&self, sigma: f64, s_max: u32) -> Result<Mag> {
        let mut acc = Mag::ZERO;
        for s in 0..=s_max {
            let avail = self.available(s)?;
            acc = acc.add(Mag::from_value(avail as f64).mul(self.sr.psi_step(s).powf(sigma)));
        }
        Ok(acc)
    }

    /// Largest masked weight within shells ≤ s_max (zero if fully masked).
    pub fn top_value_truncated(&self, s_max: u32) -> Result<Mag> {
        for s in 0..=s_max {
            if self.available(s)? > 0 {
                return Ok(self.sr.psi_step(s));
            }
        }
        Ok(Mag::ZERO)
    }
}

/// j-th largest of the weight values with the set γ removed.
pub fn masked_rearranged(sr: &StepRearrangement, gamma: &IndexSet, j: u128) -> Result<Mag> {
    MaskedSystem::new(sr, gamma)?.value(j)
}

/// Where the balance-point search for σ_m landed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmResult {
    /// The smallest l > m with Ψ̄_l^{−q} ≤ (Σ_{j≤l} Ψ̄_j^{−q})/(l−m) < Ψ̄_{l+1}^{−q}.
    At(u128),
    /// The weight reaches its limiting value exactly (constant-like tail):
    /// the strict right inequality is never satisfied and the supremum
    /// formulation lives at infinity.
    Unbounded,
}

/// Exact-values engine for one (p, q, r, d, ψ) configuration. Holds the
/// shared step rearrangement (and its lattice count caches) across calls.
pub struct Setting {
    params: ClassParams,
    sr: StepRearrangement,
    tail_rel_tol: f64,
}

/// Shell cap for the balance-point and supremum scans. Counting a shell
/// costs O(s) per shell for d ≥ 2, so the multivariate cap is tighter.
fn scan_shell_cap(d: u32) -> u32 {
    if d == 1 {
        2_000_000
    } else {
        50_000
    }
}

/// Relative slack (in the log domain) for balance-point comparisons.
/// Exact ties Ψ̄_l^{−q} = S_l/(l−m) occur legitimately (equal head
/// weights); log-sum rounding must not flip them. Both neighbors of a
/// tie yield the same σ_m, so the slack does not move the value.
const BALANCE_LN_SLACK: f64 = 1e-12;

impl Setting {
    pub fn new(params: ClassParams, weight: WeightFunction) -> Result<Setting> {
        let sr = StepRearrangement::new(weight, params.r, params.d)?;
        Ok(Setting { params, sr, tail_rel_tol: crate::tolerances::TAIL_REL_DEFAULT })
    }

    /// Loosen/tighten the certified-tail tolerance (default 1e−12). Order
    /// audits use looser tails; exact-vs-oracle comparisons keep the default.
    pub fn with_tail_tol(mut self, rel_tol: f64) -> Setting {
        self.tail_rel_tol = rel_tol;
        self
    }

    pub fn params(&self) -> &ClassParams {
        &self.params
    }

    pub fn rearrangement(&self) -> &StepRearrangement {
        &self.sr
    }

    /// E_{γ}(F)_{S^p} = ℰ_{γ}(F)_{S^p} for an arbitrary finite γ:
    /// the largest remaining weight when q ≤ p, the ℓ_ρ tail norm of the
    /// masked system (ρ = 1/(1/p − 1/q)) when p < q.
    pub fn best_by_set(&self, gamma: &IndexSet) -> Result<Mag> {
        let (p, q) = (self.params.p, self.params.q);
        let ms = MaskedSystem::new(&self.sr, gamma)?;
        if q <= p {
            ms.value(1)
        } else {
            let rho = 1.0 / (inv(p) - inv(q));
            // The sum enters through exponent 1/ρ, so its tolerance relaxes
            // by ρ at no cost in the reported value.
            let tol = (self.tail_rel_tol * rho).min(1e-9);
            Ok(ms.power_sum_all(rho, tol)?.powf(1.0 / rho))
        }
    }

    /// `best_by_set` with the weight system truncated to shells ≤ s_max
    /// (for comparison against a truncated brute-force oracle).
    pub fn best_by_set_truncated(&self, gamma: &IndexSet, s_max: u32) -> Result<Mag> {
        let (p, q) = (self.params.p, self.params.q);
        let ms = MaskedSystem::new(&self.sr, gamma)?;
        if q <= p {
            ms.top_value_truncated(s_max)
        } else {
            let rho = 1.0 / (inv(p) - inv(q));
            Ok(ms.power_sum_truncated(rho, s_max)?.powf(1.0 / rho))
        }
    }

    /// The shell-greedy optimal set γ*_m: whole shells in increasing s,
    /// the last partial shell filled in lexicographic order.
    pub fn optimal_set(&self, m: u128) -> Result<IndexSet> {
        let mut members = Vec::with_capacity(m.min(1 << 22) as usize);
        let mut s = 0u32;
        let mut taken = 0u128;
        while taken < m {
            let shell = enumerate_shell(s, self.params.r, self.params.d);
            let need = (m - taken).min(shell.len() as u128) as usize;
            members.extend_from_slice(&shell[..need]);
            taken += need as u128;
            s += 1;
        }
        IndexSet::new(members, self.params.d)
    }

    /// D_m = D_m^⊥ together with the optimal set that attains them.
    pub fn widths(&self, m: u128) -> Result<Widths> {
        let gamma_star = self.optimal_set(m)?;
        let width = self.best_by_set(&gamma_star)?;
        Ok(Widths { width, width_perp: width, gamma_star })
    }

    /// Balance point l_m for the p < q < ∞ case of σ_m: the smallest l > m
    /// with Ψ̄_l^{−q} ≤ S_l/(l−m) < Ψ̄_{l+1}^{−q} where S_l = Σ_{j≤l} Ψ̄_j^{−q}.
    /// Only the last index of a run of equal weights can satisfy the pair of
    /// inequalities (they force Ψ̄_{l+1} < Ψ̄_l), so the scan visits run ends.
    pub fn find_lm(&self, q: f64, m: u128) -> Result<LmResult> {
        if !(q > 0.0) || q.is_infinite() {
            return Err(Error::InvalidParameter("balance point needs finite q > 0".into()));
        }
        let limit = self.sr.weight().form().limit();
        let mut s_head = Mag::ZERO;
        for s in 0..scan_shell_cap(self.params.d) {
            let step = self.sr.psi_step(s);
            let w = step.powf(-q);
            let nu = self.sr.counter().nu(s)?;
            s_head = s_head.add(Mag::from_value(nu as f64).mul(w));
            let v_s = self.sr.counter().v(s)?;
            let next = self.sr.psi_step(s + 1);
            if next < step && v_s > m {
                // Run of equal weights ends at l = V_s.
                let mid = s_head.div(Mag::from_value((v_s - m) as f64));
                if w.ln() <= mid.ln() + BALANCE_LN_SLACK
                    && mid.ln() < next.powf(-q).ln() - BALANCE_LN_SLACK
                {
                    return Ok(LmResult::At(v_s));
                }
            }
            if next == limit && !limit.is_zero() {
                // All later weights equal the limit exactly: the strict
                // right inequality can never hold again.
                return Ok(LmResult::Unbounded);
            }
        }
        Err(Error::ScanCap("balance-point scan exceeded the shell cap".into()))
    }

    /// σ_m(F_q^Ψ)_{S^p}, exact, routed over the five (p, q) cases.
    pub fn sigma_m(&self, m: u128) -> Result<Mag> {
        let (p, q) = (self.params.p, self.params.q);
        match (p.is_infinite(), q.is_infinite()) {
            (true, true) => self.sr.rearranged(m + 1),
            (true, false) => {
                // (Σ_{j≤m+1} Ψ̄_j^{−q})^{−1/q}
                Ok(self.sr.head_sum(-q, m + 1)?.powf(-1.0 / q))
            }
            (false, true) => {
                // (Σ_{j>m} Ψ̄_j^p)^{1/p}: the sum enters through exponent
                // 1/p, so its tolerance relaxes by p at no cost in the value.
                let tol = (self.tail_rel_tol * p).min(1e-9);
                Ok(self.sr.tail_sum(p, m, tol)?.value.powf(1.0 / p))
            }
            (false, false) => {
                if q <= p {
                    self.sigma_sup_case(m)
                } else {
                    self.sigma_balance_case(m)
                }
            }
        }
    }

    /// Case q ≤ p < ∞: σ_m = sup_{l>m} (l−m)^{1/p} / S_l^{1/q}. Shell-aware
    /// scan: within a shell the objective is unimodal (its log-derivative
    /// numerator is linear), so endpoints plus the integer neighbors of the
    /// interior critical point cover the shell. The scan stops when the
    /// closed-form maximum of the upper bound
    /// (a+x)^{1/p}/(S + x·Ψ̄_next^{−q})^{1/q} over the remaining range drops
    /// to the best value found.
    fn sigma_sup_case(&self, m: u128) -> Result<Mag> {
        let (p, q) = (self.params.p, self.params.q);
        let (inv_p, inv_q) = (1.0 / p, 1.0 / q);
        let limit = self.sr.weight().form().limit();
        let mut best = Mag::ZERO;
        let mut s_head = Mag::ZERO; // S_{V_{s-1}} entering shell s

        let eval = |l: u128, s_base: Mag, w: Mag, v_prev: u128| -> Mag {
            let s_l = s_base.add(Mag::from_value((l - v_prev) as f64).mul(w));
            Mag::from_value((l - m) as f64).powf(inv_p).div(s_l.powf(inv_q))
        };

        for s in 0..scan_shell_cap(self.params.d) {
            let v_prev = if s == 0 { 0 } else { self.sr.counter().v(s - 1)? };
            let v_s = self.sr.counter().v(s)?;
            let w = self.sr.psi_step(s).powf(-q);
            if v_s > m {
                let l_lo = (m + 1).max(v_prev + 1);
                let mut cands = vec![l_lo, v_s];
                if q < p {
                    // Interior critical point of (a0+t)^{1/p}(S+tw)^{−1/q}
                    // with t = l − v_prev.
                    let b_over_w = (s_head.ln() - w.ln()).exp();
                    let a0 = v_prev as f64 - m as f64;
                    let t_star = (p * a0 - q * b_over_w) / (q - p);
                    let len = (v_s - v_prev) as f64;
                    for t in [t_star.floor(), t_star.ceil()] {
                        if t.is_finite() && t >= 0.0 && t <= len {
                            let l = v_prev + t as u128;
                            if l >= l_lo && l <= v_s {
                                cands.push(l);
                            }
                        }
                    }
                }
                cands.sort_unstable();
                cands.dedup();
                for l in cands {
                    best = best.max(eval(l, s_head, w, v_prev));
                }
            }
            let nu = self.sr.counter().nu(s)?;
            s_head = s_head.add(Mag::from_value(nu as f64).mul(w));
            if v_s <= m {
                continue;
            }

            let next_step = self.sr.psi_step(s + 1);
            if next_step == limit && !limit.is_zero() {
                // Every remaining weight equals the limit exactly, so the
                // remaining supremum is computable in closed form.
                return Ok(self.sup_over_constant_tail(best, m, v_s, s_head, limit));
            }
            // Certified stop: for l > V_s, S_l ≥ S_{V_s} + (l−V_s)·w_next.
            let w_next = next_step.powf(-q);
            let a = (v_s - m) as f64;
            let bound = if q == p {
                // The bound is monotone in l; its supremum is the larger of
                // the current endpoint value and the l → ∞ limit Ψ̄_next.
                next_step.max(eval(v_s, s_head, w_next, v_s))
            } else {
                let b_over_w = (s_head.ln() - w_next.ln()).exp();
                let t_star = ((p * a - q * b_over_w) / (q - p)).max(0.0);
                let s_at = s_head.add(Mag::from_value(t_star).mul(w_next));
                Mag::from_value(a + t_star).powf(inv_p).div(s_at.powf(inv_q))
            };
            if bound <= best {
                return Ok(best);
            }
        }
        Err(Error::ScanCap(
            "unconfirmed supremum: σ_m scan exceeded the shell cap before certifying".into(),
        ))
    }

    /// Exact remaining supremum once all weights past l0 = V_s equal `flat`:
    /// for p = q the objective increases toward `flat` (or is already
    /// dominated); for q < p it is unimodal with a closed-form critical
    /// point, and the integer neighbors realize the remaining maximum.
    fn sup_over_constant_tail(&self, best: Mag, m: u128, l0: u128, s_at_l0: Mag, flat: Mag) -> Mag {
        let (p, q) = (self.params.p, self.params.q);
        let w = flat.powf(-q);
        let a = (l0 - m) as f64;
        let eval = |t: f64| -> Mag {
            Mag::from_value(a + t)
                .powf(1.0 / p)
                .div(s_at_l0.add(Mag::from_value(t).mul(w)).powf(1.0 / q))
        };
        if q == p {
            return best.max(flat);
        }
        let b_over_w = (s_at_l0.ln() - w.ln()).exp();
        let t_star = ((p * a - q * b_over_w) / (q - p)).max(1.0);
        best.max(eval(t_star.floor())).max(eval(t_star.ceil()))
    }

    /// Case p < q < ∞: balance point plus head/tail combination,
    /// σ_m = [(l_m−m)^{q/(q−p)} S_{l_m}^{p/(p−q)} + Σ_{j>l_m} Ψ̄_j^ρ]^{(q−p)/(pq)}.
    fn sigma_balance_case(&self, m: u128) -> Result<Mag> {
        let (p, q) = (self.params.p, self.params.q);
        let rho = 1.0 / (inv(p) - inv(q));
        self.sr.tail_converges(rho)?;
        let lm = match self.find_lm(q, m)? {
            LmResult::At(l) => l,
            LmResult::Unbounded => {
                return Err(Error::Divergent(
                    "no finite balance point: the weight tail is constant and Σ Ψ̄^ρ diverges"
                        .into(),
                ))
            }
        };
        let s_lm = self.sr.head_sum(-q, lm)?;
        let head = Mag::from_value((lm - m) as f64)
            .powf(q / (q - p))
            .mul(s_lm.powf(p / (p - q)));
        // The tail enters through exponent 1/ρ, so its tolerance relaxes by
        // ρ without moving the combined value past the requested precision.
        let tol = (self.tail_rel_tol * rho).min(1e-9);
        let tail = self.sr.tail_sum(rho, lm, tol)?.value;
        Ok(head.add(tail).powf((q - p) / (p * q)))
    }
}

/// Widths through one optimal frequency set: the basis width equals the
/// projection width and both are attained by the shell-greedy γ*_m.
pub struct Widths {
    pub width: Mag,
    pub width_perp: Mag,
    pub gamma_star: IndexSet,
}

/// One-shot wrappers mirroring the `Setting` methods.
pub fn best_by_set(params: &ClassParams, w: &WeightFunction, gamma: &IndexSet) -> Result<Mag> {
    Setting::new(*params, w.clone())?.best_by_set(gamma)
}

pub fn widths(params: &ClassParams, w: &WeightFunction, m: u128) -> Result<Widths> {
    Setting::new(*params, w.clone())?.widths(m)
}

pub fn sigma_m(params: &ClassParams, w: &WeightFunction, m: u128) -> Result<Mag> {
    Setting::new(*params, w.clone())?.sigma_m(m)
}

pub fn find_lm(sr: &StepRearrangement, q: f64, m: u128) -> Result<LmResult> {
    let params = ClassParams::new(1.0, q, sr.counter().r(), sr.counter().dim())?;
    let setting = Setting {
        params,
        sr: StepRearrangement::new(sr.weight().clone(), sr.counter().r(), sr.counter().dim())?,
        tail_rel_tol: crate::tolerances::TAIL_REL_DEFAULT,
    };
    setting.find_lm(q, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setting(p: f64, q: f64, r: R, d: u32, w: &str) -> Setting {
        let params = ClassParams::new(p, q, r, d).unwrap();
        let weight = WeightFunction::new(w.parse().unwrap()).unwrap();
        Setting::new(params, weight).unwrap()
    }

    fn vecs(ks: &[&[i64]]) -> Vec<LatticeVector> {
        ks.iter().map(|k| k.to_vec()).collect()
    }

    #[test]
    fn index_set_rejects_duplicates_and_bad_dims() {
        assert!(IndexSet::new(vecs(&[&[0], &[0]]), 1).is_err());
        assert!(IndexSet::new(vecs(&[&[0, 0]]), 1).is_err());
        let g = IndexSet::new(vecs(&[&[0], &[2], &[-1]]), 1).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.contains(&[2]));
    }

    #[test]
    fn masked_rearranged_examples() {
        let s = setting(1.0, 1.0, R::Integer(1), 1, "pow:s=1");
        let sr = s.rearrangement();
        // Removing only the origin leaves the shell-1 weights ψ(1) = 1 on top.
        let g0 = IndexSet::new(vecs(&[&[0]]), 1).unwrap();
        assert!(masked_rearranged(sr, &g0, 1).unwrap().approx_eq(Mag::from_value(1.0), 1e-14));
        // Removing {0, ±1} exposes ψ(2) = 1/2.
        let g1 = IndexSet::new(vecs(&[&[0], &[1], &[-1]]), 1).unwrap();
        assert!(masked_rearranged(sr, &g1, 1).unwrap().approx_eq(Mag::from_value(0.5), 1e-14));
        // Empty mask reproduces the plain rearrangement.
        let ge = IndexSet::empty(1);
        for j in 1..=9u128 {
            assert_eq!(masked_rearranged(sr, &ge, j).unwrap(), sr.rearranged(j).unwrap());
        }
        // A partial mask inside shell 1.
        let gp = IndexSet::new(vecs(&[&[1], &[-1]]), 1).unwrap();
        assert!(masked_rearranged(sr, &gp, 1).unwrap().approx_eq(Mag::from_value(1.0), 1e-14));
        assert!(masked_rearranged(sr, &gp, 2).unwrap().approx_eq(Mag::from_value(0.5), 1e-14));
    }

    #[test]
    fn masked_truncated_sums() {
        let s = setting(1.0, 1.0, R::Integer(1), 1, "pow:s=1");
        let g0 = IndexSet::new(vecs(&[&[0]]), 1).unwrap();
        let ms = MaskedSystem::new(s.rearrangement(), &g0).unwrap();
        // Shells ≤ 2 minus the origin: 2·ψ(1) + 2·ψ(2) = 3.
        let t = ms.power_sum_truncated(1.0, 2).unwrap();
        assert!(t.approx_eq(Mag::from_value(3.0), 1e-14));
    }

    #[test]
    fn best_by_set_matches_next_weight_when_q_le_p() {
        let s = setting(1.0, 1.0, R::Integer(1), 1, "pow:s=1");
        for m in [0u128, 1, 3, 4, 7, 12] {
            let w = s.widths(m).unwrap();
            assert_eq!(w.width, s.rearrangement().rearranged(m + 1).unwrap());
            assert_eq!(w.width, w.width_perp);
            assert_eq!(w.gamma_star.len() as u128, m);
        }
        // Ψ̄_5 = ψ(2) = 1/2 at m = 4.
        assert!(s.widths(4).unwrap().width.approx_eq(Mag::from_value(0.5), 1e-14));
    }

    #[test]
    fn best_by_set_tail_norm_examples() {
        // p = 1, q = ∞, ψ = 2^{-t}: Σ_{j>3} Ψ̄_j = 2(1/4 + 1/8 + …) = 1.
        let s = setting(1.0, f64::INFINITY, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        let g = s.optimal_set(3).unwrap();
        assert!(s.best_by_set(&g).unwrap().approx_eq(Mag::from_value(1.0), 1e-12));
        // p = 1, q = 2: (Σ_{j>3} Ψ̄_j²)^{1/2} = (1/6)^{1/2}.
        let s2 = setting(1.0, 2.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        let g2 = s2.optimal_set(3).unwrap();
        let expect = Mag::from_value(1.0 / 6.0).powf(0.5);
        assert!(s2.best_by_set(&g2).unwrap().approx_eq(expect, 1e-12));
        // m = 0 full-class value: 1/4 + 2 Σ_{s≥1} 4^{-s} = 11/12, then √.
        let w0 = s2.widths(0).unwrap();
        assert!(w0.width.approx_eq(Mag::from_value(11.0f64 / 12.0).powf(0.5), 1e-12));
    }

    #[test]
    fn optimal_set_fills_shells_lexicographically() {
        let s = setting(1.0, 1.0, R::Integer(1), 2, "pow:s=3");
        let g = s.optimal_set(4).unwrap();
        assert_eq!(g.len(), 4);
        assert!(g.contains(&[0, 0]));
        assert!(g.contains(&[-1, 0]));
        assert!(g.contains(&[0, -1]));
        assert!(g.contains(&[0, 1]));
        assert!(!g.contains(&[1, 0]));
        assert!(s.optimal_set(0).unwrap().is_empty());
    }

    #[test]
    fn balance_point_worked_instance() {
        let s = setting(1.0, 2.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        assert_eq!(s.find_lm(2.0, 1).unwrap(), LmResult::At(3));
    }

    #[test]
    fn balance_point_merges_runs_across_shells() {
        // ψ = 1/t, d = 1: Ψ̄ = 1,1,1,1/2,1/2,… — the first run spans shells
        // 0 and 1 and ends at l = 3, which is the smallest valid l for m=0.
        let s = setting(1.0, 2.0, R::Integer(1), 1, "pow:s=1");
        assert_eq!(s.find_lm(1.0, 0).unwrap(), LmResult::At(3));
        // Brute confirmation: smallest l > m satisfying both inequalities.
        let psi = |j: u128| -> f64 {
            if j == 1 {
                1.0
            } else {
                1.0 / ((j / 2) as f64)
            }
        };
        let mut s_l = 0.0;
        let mut first = None;
        for l in 1u128..=100 {
            s_l += psi(l).powi(-1);
            let mid = s_l / l as f64;
            if psi(l).powi(-1) <= mid + 1e-12 && mid < psi(l + 1).powi(-1) - 1e-12 {
                first = Some(l);
                break;
            }
        }
        assert_eq!(first, Some(3));
    }

    #[test]
    fn balance_point_constant_weight_is_unbounded() {
        let s = setting(1.0, 2.0, R::Integer(1), 1, "const:c=0.7");
        assert_eq!(s.find_lm(2.0, 0).unwrap(), LmResult::Unbounded);
    }

    #[test]
    fn sigma_both_infinite_is_next_weight() {
        let s = setting(f64::INFINITY, f64::INFINITY, R::Integer(1), 1, "pow:s=1");
        assert!(s.sigma_m(3).unwrap().approx_eq(Mag::from_value(0.5), 1e-14));
    }

    #[test]
    fn sigma_p_infinite_harmonic_head() {
        // q = 1, p = ∞, ψ = 1/t, m = 2: (Σ_{j≤3} Ψ̄_j^{-1})^{-1} = 1/3.
        let s = setting(f64::INFINITY, 1.0, R::Integer(1), 1, "pow:s=1");
        assert!(s.sigma_m(2).unwrap().approx_eq(Mag::from_value(1.0 / 3.0), 1e-13));
    }

    #[test]
    fn sigma_q_infinite_is_tail_norm() {
        let s = setting(1.0, f64::INFINITY, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        assert!(s.sigma_m(3).unwrap().approx_eq(Mag::from_value(1.0), 1e-12));
    }

    #[test]
    fn sigma_balance_case_worked_instance() {
        // p=1, q=2, ψ=2^{-t}, m=1: l_m = 3, S_3 = 12, σ = (4/12 + 1/6)^{1/2}.
        let s = setting(1.0, 2.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        let got = s.sigma_m(1).unwrap();
        assert!(got.approx_eq(Mag::from_value(0.5).powf(0.5), 1e-12));
    }

    #[test]
    fn sigma_sup_case_examples() {
        // p = q = 1, ψ = 2^{-t}, m = 1: sup (l-1)/S_l = 2/6 = 1/3 at l = 3.
        let s = setting(1.0, 1.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        assert!(s.sigma_m(1).unwrap().approx_eq(Mag::from_value(1.0 / 3.0), 1e-13));
        // p = 2, q = 1, ψ = 1/t, m = 2: sup (l-2)^{1/2}/S_l = 1/3 at l = 3.
        let s2 = setting(2.0, 1.0, R::Integer(1), 1, "pow:s=1");
        assert!(s2.sigma_m(2).unwrap().approx_eq(Mag::from_value(1.0 / 3.0), 1e-13));
    }

    #[test]
    fn sigma_sup_constant_weight_supremum() {
        // Constant ψ ≡ c, p = q: the objective c·(1−m/l)^{1/p} increases to c.
        let s = setting(1.0, 1.0, R::Integer(1), 1, "const:c=0.7");
        assert!(s.sigma_m(5).unwrap().approx_eq(Mag::from_value(0.7), 1e-14));
        // q < p: the supremum is attained at finite l (l = 1 for m = 0).
        let s2 = setting(2.0, 1.0, R::Integer(1), 1, "const:c=1");
        assert!(s2.sigma_m(0).unwrap().approx_eq(Mag::from_value(1.0), 1e-14));
    }

    #[test]
    fn sigma_sup_flat_step_table() {
        // Table: ψ(1)=1, ψ(2)=0.5, clamped after — shells 0..1 weigh 1,
        // shells ≥2 weigh 0.5 exactly. p=q=1, m=0: sup = 1 (l=1 and l=3).
        let s = setting(1.0, 1.0, R::Integer(1), 1, "table:1,0.5");
        assert!(s.sigma_m(0).unwrap().approx_eq(Mag::from_value(1.0), 1e-14));
    }

    #[test]
    fn sigma_sup_matches_long_dumb_scan() {
        // Structure-free oracle: plain f64 scan over every l up to a fixed
        // horizon, no run-end logic, no stopping rule.
        let psi_dyadic = |j: u128| -> f64 { 0.5f64.powi((j / 2) as i32 + i32::from(j == 1)) };
        for &(p, q) in &[(1.0, 1.0), (2.0, 1.0), (0.5, 0.5), (3.0, 2.0)] {
            for &m in &[0u128, 1, 4] {
                let s = setting(p, q, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
                let got = s.sigma_m(m).unwrap().value();
                let mut s_l = 0.0f64;
                let mut best = 0.0f64;
                for l in 1..=100_000u128 {
                    s_l += psi_dyadic(l).powf(-q);
                    if l > m {
                        let v = ((l - m) as f64).powf(1.0 / p) / s_l.powf(1.0 / q);
                        best = best.max(v);
                    }
                }
                assert!(
                    (got - best).abs() <= 1e-9 * best,
                    "p={p} q={q} m={m}: scan {got} vs dumb {best}"
                );
            }
        }
    }

    #[test]
    fn sigma_sup_dumb_scan_two_dimensional() {
        let s = setting(2.5, 1.5, R::Integer(1), 2, "pow:s=1");
        let got = s.sigma_m(3).unwrap().value();
        let counter = s.rearrangement().counter();
        let mut s_l = 0.0f64;
        let mut best = 0.0f64;
        let mut l = 0u128;
        for shell in 0..400u32 {
            let nu = counter.nu(shell).unwrap();
            let w = s.rearrangement().psi_step(shell).value().powf(-1.5);
            for _ in 0..nu {
                l += 1;
                s_l += w;
                if l > 3 {
                    best = best.max(((l - 3) as f64).powf(0.4) / s_l.powf(1.0 / 1.5));
                }
            }
        }
        assert!((got - best).abs() <= 1e-9 * best, "scan {got} vs dumb {best}");
    }

    #[test]
    fn sigma_divergent_class_reports_divergence() {
        // p=1, q=2, ψ=1/t, d=2: ρ = 2 = d, Σ Ψ̄^ρ ~ Σ 4s·s^{-2} diverges.
        let s = setting(1.0, 2.0, R::Integer(1), 2, "pow:s=1");
        assert!(matches!(s.sigma_m(5), Err(Error::Divergent(_))));
        let s2 = setting(1.0, 2.0, R::Integer(1), 1, "const:c=1");
        assert!(matches!(s2.sigma_m(2), Err(Error::Divergent(_))));
    }

    #[test]
    fn sigma_cases_agree_at_p_equals_q_boundary() {
        let exact = setting(2.0, 2.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1")
            .sigma_m(1)
            .unwrap()
            .value();
        // √(2/12) from the supremum side…
        assert!((exact - (1.0f64 / 6.0).sqrt()).abs() < 1e-13);
        // …approached from the balance side as q ↓ p.
        let near = setting(2.0, 2.0 + 1e-6, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1")
            .sigma_m(1)
            .unwrap()
            .value();
        assert!((near - exact).abs() < 1e-4 * exact, "near {near} vs exact {exact}");
    }

    #[test]
    fn sigma_and_widths_are_monotone_and_ordered() {
        for (p, q) in [(2.0, 1.0), (1.0, 2.0), (f64::INFINITY, 2.0)] {
            let s = setting(p, q, R::Integer(1), 2, "exp:a=0.8,s=1");
            let mut prev_sigma = Mag::INFINITY;
            let mut prev_width = Mag::INFINITY;
            for m in 0..8u128 {
                let sig = s.sigma_m(m).unwrap();
                let wid = s.widths(m).unwrap().width;
                assert!(sig <= prev_sigma, "σ must not increase in m");
                assert!(wid <= prev_width, "D must not increase in m");
                // Best m-term over all sets beats the fixed optimal set.
                assert!(sig.ln() <= wid.ln() + 1e-12, "σ_m ≤ D_m at m={m}");
                prev_sigma = sig;
                prev_width = wid;
            }
        }
    }

    #[test]
    fn arbitrary_sets_never_beat_the_optimal_set() {
        // E_γ for arbitrary γ is ≥ the width attained by γ*_m (same m).
        let s = setting(1.0, 2.0, R::Integer(1), 1, "exp:a=0.6931471805599453,s=1");
        let width = s.widths(3).unwrap().width;
        for g in [
            IndexSet::new(vecs(&[&[0], &[1], &[5]]), 1).unwrap(),
            IndexSet::new(vecs(&[&[2], &[-2], &[3]]), 1).unwrap(),
            IndexSet::new(vecs(&[&[0], &[-1], &[1]]), 1).unwrap(),
        ] {
            assert!(s.best_by_set(&g).unwrap().ln() >= width.ln() - 1e-12);
        }
    }
}
