//! Exact counting for non-interacting models `H = Σ_i h_i` with a diagonal
//! single-site Hamiltonian. Microcanonical subspaces are unions of type classes,
//! so dimensions and subsystem marginals reduce to multinomial sums and no
//! operator of size `d^n` is ever built.

use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{solve_beta_from_levels, EnergyWindow};
use crate::linalg::RelEntropy;
use crate::{Error, Result};

/// Maximal number of type classes enumerated for one window.
pub const CLASS_CAP: usize = 10_000_000;
/// Slack used when rounding window edges to integer class indices.
const EDGE_GUARD: f64 = 1e-9;

/// Single-site energy levels `0 = E_0 ≤ E_1 ≤ … ≤ E_{d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    energies: Vec<f64>,
}

impl LevelSpec {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::InvalidArgument("need at least two levels".into()));
        }
        if energies[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lowest level must be shifted to 0, got {}",
                energies[0]
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("levels must be finite and ascending".into()));
        }
        Ok(Self { energies })
    }

    /// Shifts and sorts arbitrary levels into the canonical form.
    pub fn shifted(mut energies: Vec<f64>) -> Result<Self> {
        energies.sort_by(f64::total_cmp);
        let e0 = energies.first().copied().unwrap_or(0.0);
        Self::new(energies.into_iter().map(|e| e - e0).collect())
    }

    /// Qubit levels `(0, 1)`.
    pub fn qubit() -> Self {
        Self { energies: vec![0.0, 1.0] }
    }

    pub fn d(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

/// Strings with `counts[j]` occurrences of symbol `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeClass {
    pub counts: Vec<u64>,
}

impl TypeClass {
    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn energy(&self, levels: &LevelSpec) -> f64 {
        self.counts.iter().zip(levels.energies()).map(|(&k, e)| k as f64 * e).sum()
    }

    /// `ln(n!/(k_0!…k_{d−1}!))`.
    pub fn ln_size(&self, table: &LnFactorial) -> f64 {
        table.ln_multinomial(self.n() as usize, &self.counts)
    }

    /// Exact size, `None` on overflow.
    pub fn exact_size(&self) -> Option<u128> {
        multinomial_u128(&self.counts)
    }
}

/// `ln k!` for `k ≤ n`, accumulated in double-double precision.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated (Neumaier) sum.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for x in xs {
        let (t, e) = two_sum(s, x);
        s = t;
        c += e;
    }
    s + c
}

impl LnFactorial {
    pub fn new(n: usize) -> Self {
        let mut hi = Vec::with_capacity(n + 1);
        let mut lo = Vec::with_capacity(n + 1);
        let (mut s, mut c) = (0.0, 0.0);
        hi.push(0.0);
        lo.push(0.0);
        for t in 1..=n {
            let (ns, e) = two_sum(s, (t as f64).ln());
            s = ns;
            c += e;
            hi.push(s);
            lo.push(c);
        }
        Self { hi, lo }
    }

    pub fn max(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.hi[k] + self.lo[k]
    }

    pub fn ln_multinomial(&self, n: usize, counts: &[u64]) -> f64 {
        let hi = std::iter::once(self.hi[n]).chain(counts.iter().map(|&k| -self.hi[k as usize]));
        let lo = std::iter::once(self.lo[n]).chain(counts.iter().map(|&k| -self.lo[k as usize]));
        compensated_sum(hi.chain(lo))
    }
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c·(n−i) is divisible by (i+1); split the factor to delay overflow.
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(c, den);
        c = (c / g).checked_mul(num / (den / g))?;
    }
    Some(c)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn multinomial_u128(counts: &[u64]) -> Option<u128> {
    let mut rest: u64 = counts.iter().sum();
    let mut acc: u128 = 1;
    for &k in counts {
        acc = acc.checked_mul(binomial_u128(rest, k)?)?;
        rest -= k;
    }
    Some(acc)
}

/// Whether every count for `n` strings over `d` symbols fits in `u128`.
fn exact_feasible(n: usize, d: usize) -> bool {
    n as f64 * (d as f64).log2() < 126.0
}

/// All compositions of `total` into `parts` nonnegative integers, lexicographic.
pub fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(total: u64, parts: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            cur.push(total);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=total {
            cur.push(k);
            rec(total - k, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Type classes of length-`n` strings whose energy density lies in the closed window.
pub fn type_classes(n: usize, levels: &LevelSpec, window: &EnergyWindow) -> Result<Vec<TypeClass>> {
    let e = levels.energies();
    let d = e.len();
    let nf = n as f64;
    let lo = nf * (window.u - window.delta);
    let hi = nf * window.u;
    let slack = EDGE_GUARD * nf.max(1.0) * e[d - 1].max(1.0);
    let mut out = Vec::new();
    let mut counts = vec![0u64; d];
    enumerate_classes(0, n as u64, 0.0, e, (lo - slack, hi + slack), &mut counts, &mut out)?;
    out.retain(|c| window.contains_density(c.energy(levels) / nf));
    Ok(out)
}

fn enumerate_classes(
    level: usize,
    remaining: u64,
    partial: f64,
    e: &[f64],
    (lo, hi): (f64, f64),
    counts: &mut Vec<u64>,
    out: &mut Vec<TypeClass>,
) -> Result<()> {
    let d = e.len();
    let push = |counts: &Vec<u64>, out: &mut Vec<TypeClass>| -> Result<()> {
        if out.len() >= CLASS_CAP {
            return Err(Error::SearchCap { cap: CLASS_CAP });
        }
        out.push(TypeClass { counts: counts.clone() });
        Ok(())
    };
    if level == d - 1 {
        counts[level] = remaining;
        let en = partial + remaining as f64 * e[level];
        if en >= lo && en <= hi {
            push(counts, out)?;
        }
        return Ok(());
    }
    if level == d - 2 {
        // Energy is affine and non-increasing in the count of the lower symbol.
        let (a, b) = (e[level], e[level + 1]);
        let r = remaining as f64;
        let (kmin, kmax) = if b > a {
            let top = partial + r * b;
            let kmin = ((top - hi) / (b - a) - EDGE_GUARD).ceil().max(0.0);
            let kmax = ((top - lo) / (b - a) + EDGE_GUARD).floor().min(r);
            (kmin, kmax)
        } else {
            (0.0, r)
        };
        if kmin > kmax {
            return Ok(());
        }
        for k in kmin as u64..=kmax as u64 {
            counts[level] = k;
            counts[level + 1] = remaining - k;
            let en = partial + k as f64 * a + (remaining - k) as f64 * b;
            if en >= lo && en <= hi {
                push(counts, out)?;
            }
        }
        return Ok(());
    }
    for k in 0..=remaining {
        let rest = (remaining - k) as f64;
        let base = partial + k as f64 * e[level];
        if base + rest * e[level + 1] > hi || base + rest * e[d - 1] < lo {
            continue;
        }
        counts[level] = k;
        enumerate_classes(level + 1, remaining - k, base, e, (lo, hi), counts, out)?;
    }
    Ok(())
}

/// A nonnegative count kept in log space, with the exact value when it fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateCount {
    pub ln: f64,
    pub exact: Option<u128>,
}

impl StateCount {
    pub fn value(&self) -> f64 {
        match self.exact {
            Some(x) => x as f64,
            None => self.ln.exp(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln == f64::NEG_INFINITY
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + compensated_sum(xs.iter().map(|x| (x - max).exp())).ln()
}

/// `dim T_n`: the number of length-`n` strings with energy density in the window.
pub fn microcanonical_dim(n: usize, levels: &LevelSpec, window: &EnergyWindow) -> Result<StateCount> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let classes = type_classes(n, levels, window)?;
    Ok(count_classes(n, levels.d(), &classes))
}

fn count_classes(n: usize, d: usize, classes: &[TypeClass]) -> StateCount {
    let exact = if exact_feasible(n, d) {
        classes.iter().try_fold(0u128, |acc, c| acc.checked_add(c.exact_size()?))
    } else {
        None
    };
    let ln = match exact {
        Some(0) => f64::NEG_INFINITY,
        Some(x) => (x as f64).ln(),
        None => {
            let table = LnFactorial::new(n);
            log_sum_exp(&classes.iter().map(|c| c.ln_size(&table)).collect::<Vec<_>>())
        }
    };
    StateCount { ln, exact }
}

/// Law of the first `m` symbols of a uniformly random in-window string, grouped
/// by the type of the prefix. Strings of the same type are equiprobable.
#[derive(Debug, Clone)]
pub struct MarginalLaw {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// Prefix types, compositions of `m` into `d` parts.
    pub types: Vec<Vec<u64>>,
    /// `ln Q(x)` for a single string `x` of each type.
    pub ln_q: Vec<f64>,
    /// Number of strings of each type.
    pub multiplicity: Vec<f64>,
}

/// Prefix law under the uniform mixture over the window's type classes.
pub fn marginal_law(n: usize, m: usize, levels: &LevelSpec, window: &EnergyWindow) -> Result<MarginalLaw> {
    if m > n {
        return Err(Error::InvalidArgument(format!("m = {m} exceeds n = {n}")));
    }
    let classes = type_classes(n, levels, window)?;
    if classes.is_empty() {
        return Err(Error::EmptyWindow { lo: window.u - window.delta, hi: window.u });
    }
    let d = levels.d();
    let types = compositions(m as u64, d);
    let table = LnFactorial::new(n);
    let multiplicity = types.iter().map(|t| table.ln_multinomial(m, t).exp().round()).collect();
    let ln_q = exact_prefix_law(n, d, &classes, &types)
        .unwrap_or_else(|| log_prefix_law(n, m, &classes, &types, &table));
    Ok(MarginalLaw { n, m, d, types, ln_q, multiplicity })
}

/// `Q_j = Σ_K C(n−m; K−j) / Σ_K C(n; K)` with integer arithmetic.
fn exact_prefix_law(
    n: usize,
    d: usize,
    classes: &[TypeClass],
    types: &[Vec<u64>],
) -> Option<Vec<f64>> {
    if !exact_feasible(n, d) {
        return None;
    }
    let den = classes.iter().try_fold(0u128, |acc, c| acc.checked_add(c.exact_size()?))?;
    let mut out = Vec::with_capacity(types.len());
    let mut rest = vec![0u64; d];
    for t in types {
        let mut num: u128 = 0;
        for c in classes {
            if c.counts.iter().zip(t).all(|(k, j)| k >= j) {
                for i in 0..d {
                    rest[i] = c.counts[i] - t[i];
                }
                num = num.checked_add(multinomial_u128(&rest)?)?;
            }
        }
        out.push(if num == 0 { f64::NEG_INFINITY } else { (num as f64 / den as f64).ln() });
    }
    Some(out)
}

/// Log-space form: class weights times the falling-factorial ratio
/// `Π_i k_i^(j_i) / n^(m)`.
fn log_prefix_law(n: usize, m: usize, classes: &[TypeClass], types: &[Vec<u64>], t: &LnFactorial) -> Vec<f64> {
    let ln_sizes: Vec<f64> = classes.iter().map(|c| c.ln_size(t)).collect();
    let ln_total = log_sum_exp(&ln_sizes);
    let ln_int: &[f64] = &(0..=n).map(|k| (k as f64).ln()).collect::<Vec<_>>();
    let ln_falling_n: f64 = compensated_sum((0..m).map(|s| ln_int[n - s]));
    types
        .par_iter()
        .map(|ty| {
            let terms: Vec<f64> = classes
                .iter()
                .zip(&ln_sizes)
                .filter(|(c, _)| c.counts.iter().zip(ty).all(|(k, j)| k >= j))
                .map(|(c, ls)| {
                    let falling = compensated_sum(c.counts.iter().zip(ty).flat_map(|(&k, &j)| {
                        (0..j).map(move |s| ln_int[(k - s) as usize])
                    }));
                    ls - ln_total + falling - ln_falling_n
                })
                .collect();
            log_sum_exp(&terms)
        })
        .collect()
}

impl MarginalLaw {
    /// Product law `Π_i p_i^{j_i}` per string, in log space.
    fn ln_product(&self, p: &[f64]) -> Vec<f64> {
        self.types
            .iter()
            .map(|t| {
                t.iter()
                    .zip(p)
                    .map(|(&j, &pi)| if j == 0 { 0.0 } else { j as f64 * pi.ln() })
                    .sum()
            })
            .collect()
    }

    /// `‖Q − p^{⊗m}‖₁`.
    pub fn distance_to_product(&self, p: &[f64]) -> f64 {
        let lp = self.ln_product(p);
        compensated_sum(
            self.ln_q
                .iter()
                .zip(&lp)
                .zip(&self.multiplicity)
                .map(|((q, p), c)| c * (q.exp() - p.exp()).abs()),
        )
    }

    /// `H(p^{⊗m} ‖ Q)`.
    pub fn relent_from_product(&self, p: &[f64]) -> RelEntropy {
        let lp = self.ln_product(p);
        let mut terms = Vec::with_capacity(lp.len());
        for ((q, p), c) in self.ln_q.iter().zip(&lp).zip(&self.multiplicity) {
            if *p == f64::NEG_INFINITY {
                continue;
            }
            if *q == f64::NEG_INFINITY {
                return RelEntropy::Infinite;
            }
            terms.push(c * p.exp() * (p - q));
        }
        RelEntropy::Finite(compensated_sum(terms).max(0.0))
    }

    /// Total probability, 1 up to rounding.
    pub fn total(&self) -> f64 {
        compensated_sum(self.ln_q.iter().zip(&self.multiplicity).map(|(q, c)| c * q.exp()))
    }

    /// Probabilities of all `d^m` strings, first symbol most significant.
    pub fn strings(&self) -> Vec<f64> {
        let size = self.d.pow(self.m as u32);
        let mut lookup = std::collections::HashMap::with_capacity(self.types.len());
        for (t, q) in self.types.iter().zip(&self.ln_q) {
            lookup.insert(t.clone(), q.exp());
        }
        let mut counts = vec![0u64; self.d];
        (0..size)
            .map(|mut x| {
                counts.iter_mut().for_each(|c| *c = 0);
                for _ in 0..self.m {
                    counts[x % self.d] += 1;
                    x /= self.d;
                }
                lookup[&counts]
            })
            .collect()
    }
}

/// Probability of every length-`m` string under the uniform mixture over
/// in-window strings of length `n`.
pub fn exact_marginal(n: usize, m: usize, levels: &LevelSpec, window: &EnergyWindow) -> Result<Vec<f64>> {
    Ok(marginal_law(n, m, levels, window)?.strings())
}

/// Single-site Gibbs state with energy density `u`: `(β, diagonal)`.
pub fn single_site_gibbs(levels: &LevelSpec, u: f64) -> Result<(f64, Vec<f64>)> {
    let e = levels.energies();
    if e.len() == 2 && e[1] > 0.0 {
        let p1 = u / e[1];
        if !(0.0..=0.5).contains(&p1) {
            return Err(Error::Bracketing { target: u, min: 0.0, max: 0.5 * e[1] });
        }
        let beta = if p1 == 0.0 { f64::INFINITY } else { ((1.0 - p1) / p1).ln() / e[1] };
        return Ok((beta, vec![1.0 - p1, p1]));
    }
    let beta = solve_beta_from_levels(e, e, 1, u)?;
    let (w, _) = crate::linalg::gibbs_weights(e, beta);
    Ok((beta, w))
}

/// A computed quantity next to the bound it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.value <= self.bound
    }
}

fn integer_energy(n: usize, u: f64) -> Result<u64> {
    let k = (n as f64 * u).round();
    if !(0.0..=1.0).contains(&u) || (n as f64 * u - k).abs() > EDGE_GUARD {
        return Err(Error::Precondition(format!("n·u = {} is not an integer in [0, n]", n as f64 * u)));
    }
    Ok(k as u64)
}

/// Qubit chain with a sharp window at `u`: `‖Q − P^{⊗m}‖₁` against `4m/n`,
/// with `P = (1−u, u)`.
pub fn definetti_check(n: usize, m: usize, u: f64) -> Result<BoundCheck> {
    let k = integer_energy(n, u)?;
    if m > n {
        return Err(Error::Precondition(format!("m = {m} exceeds n = {n}")));
    }
    let u = k as f64 / n as f64;
    let law = marginal_law(n, m, &LevelSpec::qubit(), &EnergyWindow { u, delta: 0.0 })?;
    Ok(BoundCheck { value: law.distance_to_product(&[1.0 - u, u]), bound: 4.0 * m as f64 / n as f64 })
}

/// Relative-entropy bound for qubits with window `[u − δ, u]`.
pub fn relent_bound(n: usize, m: usize, u: f64, delta: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    let r = m / (n - m);
    (1.0 - delta) * u / (u - delta) * r + m * u * delta / (u - delta) * (1.0 + r)
}

/// `H(P^{⊗m} ‖ Q)` against [`relent_bound`].
pub fn relent_bound_check(n: usize, m: usize, u: f64, delta: f64) -> Result<BoundCheck> {
    if !(0.0 <= delta && delta < u && u <= 0.5) {
        return Err(Error::Precondition(format!("need 0 ≤ δ < u ≤ 1/2, got u={u}, δ={delta}")));
    }
    if m as f64 > n as f64 * (u - delta) + EDGE_GUARD {
        return Err(Error::Precondition(format!("m = {m} exceeds n(u−δ) = {}", n as f64 * (u - delta))));
    }
    let law = marginal_law(n, m, &LevelSpec::qubit(), &EnergyWindow { u, delta })
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let value = law.relent_from_product(&[1.0 - u, u]).value();
    Ok(BoundCheck { value, bound: relent_bound(n, m, u, delta) })
}

/// Distance bound of the finite-size theorem; infinite where undefined.
pub fn finitesize_bound(n: usize, m: usize, u: f64, delta: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let gap = ((1.0 - u) / u).ln();
    if n <= m || !(gap > 0.0) {
        return f64::INFINITY;
    }
    2.0 * delta / (nf * u.sqrt()) + (mf / (nf - mf) * (1.0 + 4.0 * nf.ln() / gap)).sqrt()
}

/// Whether the theorem's hypotheses hold: `5 ≤ m ≤ n(u−δ)`, `0 ≤ δ < u < 1/2`
/// and `(20/m) ln(m/u) ≤ ln((1−u)/u)`.
pub fn finitesize_preconditions(n: usize, m: usize, u: f64, delta: f64) -> bool {
    let mf = m as f64;
    m >= 5
        && mf <= n as f64 * (u - delta) + EDGE_GUARD
        && 0.0 <= delta
        && delta < u
        && u < 0.5
        && 20.0 / mf * (mf / u).ln() <= ((1.0 - u) / u).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub distance: f64,
    pub bound: f64,
    pub preconditions_met: bool,
}

impl TheoremCheck {
    /// The bound holds, or the theorem makes no claim.
    pub fn consistent(&self) -> bool {
        !self.preconditions_met || self.distance <= self.bound
    }
}

/// Exact `‖Tr τ_n − γ_β^{⊗m}‖₁` for qubits next to the finite-size bound.
pub fn finitesize_theorem_check(n: usize, m: usize, u: f64, delta: f64) -> Result<TheoremCheck> {
    let law = marginal_law(n, m, &LevelSpec::qubit(), &EnergyWindow::new(u, delta)?)?;
    Ok(TheoremCheck {
        distance: law.distance_to_product(&[1.0 - u, u]),
        bound: finitesize_bound(n, m, u, delta),
        preconditions_met: finitesize_preconditions(n, m, u, delta),
    })
}

/// Sharp-window distance `‖Tr τ_n − γ_β^{⊗m}‖₁` at size `n`, `None` when the
/// window holds no string.
pub fn sharp_distance(n: usize, m: usize, levels: &LevelSpec, u: f64, gamma: &[f64]) -> Result<Option<f64>> {
    let window = EnergyWindow { u, delta: 0.0 };
    match marginal_law(n, m, levels, &window) {
        Ok(law) => Ok(Some(law.distance_to_product(gamma))),
        Err(Error::EmptyWindow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

const SCAN_CHUNK: usize = 32;

/// Smallest `n ≤ n_max` whose sharp microcanonical state at density `u` has an
/// `m`-site marginal within `eps` of `γ_β^{⊗m}`.
pub fn min_bath_size(m: usize, levels: &LevelSpec, u: f64, eps: f64, n_max: usize) -> Result<usize> {
    let (_, gamma) = single_site_gibbs(levels, u)?;
    let mut start = m.max(1);
    while start <= n_max {
        let end = (start + SCAN_CHUNK).min(n_max + 1);
        let hits: Vec<Option<usize>> = (start..end)
            .into_par_iter()
            .map(|n| -> Result<Option<usize>> {
                Ok(sharp_distance(n, m, levels, u, &gamma)?.filter(|&d| d <= eps).map(|_| n))
            })
            .collect::<Result<_>>()?;
        if let Some(n) = hits.into_iter().flatten().next() {
            return Ok(n);
        }
        start = end;
    }
    Err(Error::SearchCap { cap: n_max })
}

/// Sizes `n ≤ n_max` whose sharp window at `u` is non-empty.
pub fn feasible_sizes(levels: &LevelSpec, u: f64, n_max: usize) -> Result<Vec<usize>> {
    let window = EnergyWindow { u, delta: 0.0 };
    let mut out = Vec::new();
    for n in 1..=n_max {
        if !type_classes(n, levels, &window)?.is_empty() {
            out.push(n);
        }
    }
    Ok(out)
}

/// Whether no integer relation `Σ λ_i E_i = 0` with `0 < max|λ_i| ≤ max_denominator`
/// holds to within `1e−9·max|E|`. Small problems are searched exhaustively,
/// larger ones by LLL reduction, which may miss relations.
pub fn rationally_independent(energies: &[f64], max_denominator: u64) -> bool {
    let k = energies.len();
    let scale = energies.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if k == 0 {
        return true;
    }
    if scale == 0.0 {
        return false;
    }
    let tol = 1e-9 * scale;
    if energies.iter().any(|e| e.abs() <= tol) {
        return false;
    }
    let b = max_denominator as i64;
    if k == 1 || b == 0 {
        return true;
    }
    let span = (2 * b + 1) as f64;
    if span.powi(k as i32 - 1) <= 4e7 {
        return !exhaustive_relation(energies, b, tol);
    }
    !lll_relation(energies, b, tol)
}

/// Enumerates `λ_2..λ_k` and solves for the best integer `λ_1`.
fn exhaustive_relation(e: &[f64], b: i64, tol: f64) -> bool {
    let k = e.len();
    let mut lam = vec![-b; k - 1];
    loop {
        let s: f64 = lam.iter().zip(&e[1..]).map(|(&l, x)| l as f64 * x).sum();
        let l1 = (-s / e[0]).round();
        if l1.abs() <= b as f64 && (l1 != 0.0 || lam.iter().any(|&l| l != 0)) && (l1 * e[0] + s).abs() <= tol {
            return true;
        }
        let mut i = 0;
        loop {
            if i == lam.len() {
                return false;
            }
            lam[i] += 1;
            if lam[i] <= b {
                break;
            }
            lam[i] = -b;
            i += 1;
        }
    }
}

fn lll_relation(e: &[f64], b: i64, tol: f64) -> bool {
    let k = e.len();
    let weight = 1.0 / tol;
    let mut basis: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut v = vec![0.0; k + 1];
            v[i] = 1.0;
            v[k] = weight * e[i];
            v
        })
        .collect();
    lll_reduce(&mut basis, 0.75);
    basis.iter().any(|v| {
        let lam: Vec<f64> = v[..k].iter().map(|x| x.round()).collect();
        lam.iter().any(|&l| l != 0.0)
            && lam.iter().all(|l| l.abs() <= b as f64)
            && lam.iter().zip(e).map(|(l, x)| l * x).sum::<f64>().abs() <= tol
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook LLL on the rows of `basis`.
fn lll_reduce(basis: &mut [Vec<f64>], delta: f64) {
    let k = basis.len();
    let gram_schmidt = |basis: &[Vec<f64>]| {
        let mut star: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut mu = vec![vec![0.0; k]; k];
        for i in 0..k {
            let mut v = basis[i].clone();
            for j in 0..i {
                mu[i][j] = dot(&basis[i], &star[j]) / dot(&star[j], &star[j]);
                v.iter_mut().zip(&star[j]).for_each(|(a, s)| *a -= mu[i][j] * s);
            }
            star.push(v);
        }
        (star, mu)
    };
    let (mut star, mut mu) = gram_schmidt(basis);
    let mut i = 1;
    let mut guard = 0;
    while i < k && guard < 100_000 {
        guard += 1;
        for j in (0..i).rev() {
            let q = mu[i][j].round();
            if q != 0.0 {
                let row = basis[j].clone();
                basis[i].iter_mut().zip(&row).for_each(|(a, r)| *a -= q * r);
                (star, mu) = gram_schmidt(basis);
            }
        }
        let lhs = dot(&star[i], &star[i]);
        let rhs = (delta - mu[i][i - 1].powi(2)) * dot(&star[i - 1], &star[i - 1]);
        if lhs >= rhs {
            i += 1;
        } else {
            basis.swap(i, i - 1);
            (star, mu) = gram_schmidt(basis);
            i = (i - 1).max(1);
        }
    }
}
