//! Dense Hermitian linear algebra on top of `faer`.
//!
//! All logarithms are natural. Rank and support decisions use the cutoff
//! [`EIG_CUTOFF`] relative to the largest eigenvalue.

use faer::{Mat, MatRef, Side};

use crate::lattice::{Region, MAX_DIM};
use crate::{Error, Result, C64};

pub const EIG_CUTOFF: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
#[cfg(test)]
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone)]
pub struct HermitianOp {
    m: Mat<C64>,
}

impl HermitianOp {
    /// Wraps `m`, replacing it by `(m + m†)/2`. Panics if `m` is not square.
    pub fn new(m: Mat<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "Hermitian operator must be square");
        Self { m: hermitian_part(m.as_ref()) }
    }

    pub fn try_new(m: Mat<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        Ok(Self::new(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: Mat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: Mat::identity(dim, dim) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { m: Mat::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO }) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: Mat::from_fn(self.dim(), self.dim(), |i, j| self.m[(i, j)] * s) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self { m: &self.m - &other.m })
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(self)
    }

    /// `‖A‖∞ = max |eigenvalue|`.
    pub fn operator_norm(&self) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let ev = self.eigenvalues()?;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    }

    /// `‖A‖₁ = Σ |eigenvalue|`.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|x| x.abs()).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self.m.as_ref())
    }

    pub fn max_abs_entry(&self) -> f64 {
        max_abs_entry(self.m.as_ref())
    }
}

/// `A = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(f(λ)) V†`.
    pub fn apply_real(&self, f: impl Fn(f64) -> f64) -> Mat<C64> {
        let w: Vec<C64> = self.eigenvalues.iter().map(|&x| C64::new(f(x), 0.0)).collect();
        self.apply_weights(&w)
    }

    /// `V diag(w) V†` for arbitrary complex weights.
    pub fn apply_weights(&self, w: &[C64]) -> Mat<C64> {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * w[j]);
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> Mat<C64> {
        self.apply_real(|x| x)
    }

    /// `‖A − VΛV†‖_F`, an upper bound on the operator-norm residual.
    pub fn residual(&self, a: &HermitianOp) -> f64 {
        frobenius_norm((a.matrix() - self.reconstruct()).as_ref())
    }

    /// `‖V†V − 𝟙‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.adjoint() * v;
        frobenius_norm((g - Mat::<C64>::identity(v.ncols(), v.ncols())).as_ref())
    }

    /// Column `k` of `V`.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    /// Matrix elements `V† A V` in the eigenbasis.
    pub fn to_eigenbasis(&self, a: MatRef<'_, C64>) -> Mat<C64> {
        let v = &self.eigenvectors;
        v.adjoint() * a * v
    }

    /// Inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, a: MatRef<'_, C64>) -> Mat<C64> {
        let v = &self.eigenvectors;
        v * a * v.adjoint()
    }

    /// Diagonal elements `⟨v_i|A|v_i⟩` without forming `V†AV`.
    pub fn diagonal_expectations(&self, a: MatRef<'_, C64>) -> Vec<f64> {
        let av = a * &self.eigenvectors;
        (0..self.dim())
            .map(|k| {
                (0..self.dim())
                    .map(|i| (self.eigenvectors[(i, k)].conj() * av[(i, k)]).re)
                    .sum()
            })
            .collect()
    }
}

pub fn eigh(a: &HermitianOp) -> Result<SpectralDecomposition> {
    if a.dim() > MAX_DIM {
        return Err(Error::Infeasible { dim: a.dim() as u128 });
    }
    let evd = a
        .matrix()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence { residual: f64::INFINITY })?;
    let s = evd.S();
    let eigenvalues: Vec<f64> = (0..a.dim()).map(|i| s[i].re).collect();
    if eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence { residual: f64::NAN });
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: evd.U().to_owned() })
}

pub fn eigenvalues(a: &HermitianOp) -> Result<Vec<f64>> {
    if a.dim() > MAX_DIM {
        return Err(Error::Infeasible { dim: a.dim() as u128 });
    }
    let mut ev = a
        .matrix()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence { residual: f64::INFINITY })?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    m: Mat<C64>,
}

impl DensityMatrix {
    /// Validates trace and positivity after symmetrizing.
    pub fn new(m: Mat<C64>) -> Result<Self> {
        let h = HermitianOp::try_new(m)?;
        let tr = h.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("density matrix has trace {tr}")));
        }
        if let Some(&min) = h.eigenvalues()?.first() {
            if min < -1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "density matrix has eigenvalue {min}"
                )));
            }
        }
        Ok(Self { m: h.m })
    }

    /// Skips validation; for matrices that are states by construction.
    pub(crate) fn from_trusted(m: Mat<C64>) -> Self {
        Self { m: hermitian_part(m.as_ref()) }
    }

    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let inv = 1.0 / norm2;
        let n = psi.len();
        Ok(Self { m: Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() * inv) })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        Self { m: Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(w, 0.0) } else { ZERO }) }
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        let n = p.len();
        Self::new(Mat::from_fn(n, n, |i, j| if i == j { C64::new(p[i], 0.0) } else { ZERO }))
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|` for the eigenvector columns of `spec`.
    pub fn from_spectral(spec: &SpectralDecomposition, weights: &[f64]) -> Self {
        let w: Vec<C64> = weights.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_trusted(spec.apply_weights(&w))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(&HermitianOp { m: self.m.clone() })
    }

    /// `tr(ρA)`.
    pub fn expectation(&self, a: &HermitianOp) -> Result<f64> {
        check_dims(self.dim(), a.dim())?;
        Ok(trace_product(self.m.as_ref(), a.matrix().as_ref()).re)
    }

    pub fn as_op(&self) -> HermitianOp {
        HermitianOp { m: self.m.clone() }
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `(A + A†)/2`.
pub fn hermitian_part(a: MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// `tr(AB)` without forming the product.
pub fn trace_product(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> C64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius_norm(a: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn max_abs_entry(a: MatRef<'_, C64>) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Trace norm of a Hermitian matrix (symmetrized first).
pub fn hermitian_trace_norm(a: MatRef<'_, C64>) -> Result<f64> {
    HermitianOp::try_new(a.to_owned())?.trace_norm()
}

/// Operator norm of a Hermitian matrix (symmetrized first).
pub fn hermitian_operator_norm(a: MatRef<'_, C64>) -> Result<f64> {
    HermitianOp::try_new(a.to_owned())?.operator_norm()
}

/// Operator norm of an anti-Hermitian matrix such as a commutator `[A, B]`.
pub fn antihermitian_operator_norm(a: MatRef<'_, C64>) -> Result<f64> {
    let n = a.nrows();
    let ia = Mat::from_fn(n, n, |i, j| a[(i, j)] * C64::new(0.0, 1.0));
    hermitian_operator_norm(ia.as_ref())
}

/// `AB − BA`.
pub fn commutator(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    a * b - b * a
}

/// Reduced state on `keep`; the sites are sorted so the result follows the
/// region's tensor order.
pub fn partial_trace(rho: &DensityMatrix, region: &Region, keep: &[usize]) -> Result<DensityMatrix> {
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    partial_trace_ordered(rho, region, &sorted)
}

/// Reduced state on `keep`, with tensor factors in the order given.
pub fn partial_trace_ordered(
    rho: &DensityMatrix,
    region: &Region,
    keep: &[usize],
) -> Result<DensityMatrix> {
    Ok(DensityMatrix { m: partial_trace_matrix(rho.matrix().as_ref(), region, keep)? })
}

/// Partial trace of an arbitrary matrix over the complement of `keep`.
pub fn partial_trace_matrix(m: MatRef<'_, C64>, region: &Region, keep: &[usize]) -> Result<Mat<C64>> {
    check_dims(region.hilbert_dim(), m.nrows())?;
    let split = region.split(keep)?;
    let k = split.keep_dim();
    let mut out = Mat::<C64>::zeros(k, k);
    for b in 0..k {
        let kb = split.keep_offsets[b];
        for a in 0..k {
            let ka = split.keep_offsets[a];
            let mut acc = ZERO;
            for &r in &split.rest_offsets {
                acc += m[(ka + r, kb + r)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Reduced state of the pure state `psi` on `keep` (in the given order).
pub fn reduce_pure(psi: &[C64], region: &Region, keep: &[usize]) -> Result<DensityMatrix> {
    check_dims(region.hilbert_dim(), psi.len())?;
    let split = region.split(keep)?;
    let psi_mat = Mat::from_fn(split.keep_dim(), split.rest_dim(), |a, r| {
        psi[split.keep_offsets[a] + split.rest_offsets[r]]
    });
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let rho = &psi_mat * psi_mat.adjoint();
    let k = split.keep_dim();
    Ok(DensityMatrix::from_trusted(Mat::from_fn(k, k, |i, j| rho[(i, j)] / norm2)))
}

/// `‖ρ − σ‖₁`.
pub fn trace_norm_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    hermitian_trace_norm((rho.matrix() - sigma.matrix()).as_ref())
}

/// Clip tiny negatives and renormalize a probability vector.
fn clean_distribution(lambda: &[f64]) -> Result<Vec<f64>> {
    if lambda.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return Err(Error::InvalidArgument("probability vector has negative entries".into()));
    }
    let clipped: Vec<f64> = lambda.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
    }
    Ok(clipped.iter().map(|x| x / total).collect())
}

/// Rényi entropy `S_α` in nats; `α = ∞` gives the min-entropy.
pub fn entropy(lambda: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("Rényi order {alpha} < 0")));
    }
    let p = clean_distribution(lambda)?;
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    let cutoff = EIG_CUTOFF * pmax;
    let support = p.iter().filter(|&&x| x > cutoff);
    let s = if alpha == 0.0 {
        (support.count() as f64).ln()
    } else if alpha == 1.0 {
        -support.map(|&x| x * x.ln()).sum::<f64>()
    } else if alpha.is_infinite() {
        -pmax.ln()
    } else {
        // log Σ p^α computed relative to pmax to avoid underflow for large α.
        let sum: f64 = support.map(|&x| (x / pmax).powf(alpha)).sum();
        (alpha * pmax.ln() + sum.ln()) / (1.0 - alpha)
    };
    Ok(s.max(0.0))
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let ev = rho.eigenvalues()?;
    let total: f64 = ev.iter().map(|x| x.max(0.0)).sum();
    let p: Vec<f64> = ev.iter().map(|x| x.max(0.0) / total).collect();
    entropy(&p, 1.0)
}

/// Relative entropy, with support violation reported as `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelEntropy {
    Finite(f64),
    Infinite,
}

impl RelEntropy {
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(x) => x,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }
}

/// `S(ρ‖σ) = tr ρ log ρ − tr ρ log σ`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<RelEntropy> {
    check_dims(rho.dim(), sigma.dim())?;
    let r = eigh(&rho.as_op())?;
    let s = eigh(&sigma.as_op())?;
    let n = rho.dim();
    let lam: Vec<f64> = r.eigenvalues.iter().map(|x| x.max(0.0)).collect();
    let mu: Vec<f64> = s.eigenvalues.iter().map(|x| x.max(0.0)).collect();
    let lmax = lam.iter().cloned().fold(0.0, f64::max);
    let mmax = mu.iter().cloned().fold(0.0, f64::max);
    // overlap[i][j] = |⟨r_i|s_j⟩|²
    let ov = r.eigenvectors.adjoint() * &s.eigenvectors;
    let mut self_term = 0.0;
    for &l in &lam {
        if l > EIG_CUTOFF * lmax {
            self_term += l * l.ln();
        }
    }
    let mut cross = 0.0;
    for j in 0..n {
        let weight: f64 = (0..n).map(|i| lam[i] * ov[(i, j)].norm_sqr()).sum();
        if mu[j] > EIG_CUTOFF * mmax {
            cross += weight * mu[j].ln();
        } else if weight > 1e-10 {
            return Ok(RelEntropy::Infinite);
        }
    }
    Ok(RelEntropy::Finite((self_term - cross).max(0.0)))
}

/// Classical relative entropy `Σ p log(p/q)`.
pub fn classical_relative_entropy(p: &[f64], q: &[f64]) -> Result<RelEntropy> {
    check_dims(p.len(), q.len())?;
    let mut s = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Ok(RelEntropy::Infinite);
        }
        s += pi * (pi / qi).ln();
    }
    Ok(RelEntropy::Finite(s.max(0.0)))
}

/// Gibbs weights `exp(−β E_i)/Z` via log-sum-exp, and `log Z`.
pub fn gibbs_weights(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let shift = energies
        .iter()
        .map(|&e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = energies.iter().map(|&e| (-beta * e - shift).exp()).collect();
    let z: f64 = raw.iter().sum();
    (raw.iter().map(|w| w / z).collect(), shift + z.ln())
}

/// Inner product `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vector_norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use crate::lattice::make_region;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_diagonal() {
        let s = eigh(&HermitianOp::from_real_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigh_pauli_x() {
        let mut x = Mat::<C64>::zeros(2, 2);
        x[(0, 1)] = ONE;
        x[(1, 0)] = ONE;
        let s = eigh(&HermitianOp::new(x)).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.eigenvalues[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = s.vector(0);
        // (|0⟩ − |1⟩)/√2 up to phase
        assert_abs_diff_eq!(inner(&[C64::new(h, 0.0), C64::new(-h, 0.0)], &v0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigh_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 7, 64, 200] {
            let a = random_hermitian(&mut rng, n);
            let s = eigh(&a).unwrap();
            let norm = a.operator_norm().unwrap();
            assert!(s.residual(&a) <= 1e-9 * (1.0 + norm));
            assert!(s.orthogonality_defect() <= 1e-10);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn symmetrization() {
        let mut m = Mat::<C64>::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 1.0);
        let h = HermitianOp::new(m);
        assert_eq!(h.matrix()[(0, 1)], C64::new(0.5, 0.5));
        assert_eq!(h.matrix()[(1, 0)], C64::new(0.5, -0.5));
    }

    #[test]
    fn bell_state_reduces_to_mixed() {
        let r = make_region(1, &[2], 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)];
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        for keep in [[0], [1]] {
            let red = partial_trace(&rho, &r, &keep).unwrap();
            let pure = reduce_pure(&psi, &r, &keep).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let e = if i == j { 0.5 } else { 0.0 };
                    assert_abs_diff_eq!(red.matrix()[(i, j)].re, e, epsilon = 1e-15);
                    assert_abs_diff_eq!(pure.matrix()[(i, j)].re, e, epsilon = 1e-15);
                }
            }
        }
    }

    fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
        let (n, m) = (a.nrows(), b.nrows());
        Mat::from_fn(n * m, n * m, |i, j| a[(i / m, j / m)] * b[(i % m, j % m)])
    }

    #[test]
    fn product_state_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = make_region(1, &[3], 2).unwrap();
        let a = random_density(&mut rng, 2);
        let b = random_density(&mut rng, 4);
        let rho = DensityMatrix::from_trusted(kron(a.matrix(), b.matrix()));
        let red = partial_trace(&rho, &r, &[0]).unwrap();
        assert!(frobenius_norm((red.matrix() - a.matrix()).as_ref()) < 1e-14);
        let redb = partial_trace(&rho, &r, &[1, 2]).unwrap();
        assert!(frobenius_norm((redb.matrix() - b.matrix()).as_ref()) < 1e-14);
        let all = partial_trace(&rho, &r, &[0, 1, 2]).unwrap();
        assert!(frobenius_norm((all.matrix() - rho.matrix()).as_ref()) < 1e-15);
        assert!(partial_trace(&rho, &r, &[3]).is_err());
        assert!(partial_trace(&rho, &r, &[1, 1]).is_err());
    }

    #[test]
    fn partial_trace_of_product_operator() {
        // Tr_B(X_A ⊗ ρ_B) = X_A tr ρ_B
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (na, nb) in [(1usize, 1usize), (1, 2), (2, 1)] {
            let r = make_region(1, &[na + nb], 2).unwrap();
            let x = random_hermitian(&mut rng, 1 << na).into_matrix();
            let y = random_hermitian(&mut rng, 1 << nb).into_matrix();
            let tr_y: C64 = (0..y.nrows()).map(|i| y[(i, i)]).sum();
            let keep: Vec<usize> = (0..na).collect();
            let red = partial_trace_matrix(kron(&x, &y).as_ref(), &r, &keep).unwrap();
            let expect = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * tr_y);
            assert!(frobenius_norm((red - expect).as_ref()) < 1e-12);
        }
    }

    #[test]
    fn ordered_partial_trace_swaps_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = make_region(1, &[2], 2).unwrap();
        let a = random_density(&mut rng, 2);
        let b = random_density(&mut rng, 2);
        let rho = DensityMatrix::from_trusted(kron(a.matrix(), b.matrix()));
        let swapped = partial_trace_ordered(&rho, &r, &[1, 0]).unwrap();
        let expect = kron(b.matrix(), a.matrix());
        assert!(frobenius_norm((swapped.matrix() - expect).as_ref()) < 1e-15);
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::from_diagonal(&[0.6, 0.4]).unwrap();
        let b = DensityMatrix::from_diagonal(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(trace_norm_distance(&a, &b).unwrap(), 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_norm_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-15);
        let p0 = DensityMatrix::from_pure(&[ONE, ZERO]).unwrap();
        let p1 = DensityMatrix::from_pure(&[ZERO, ONE]).unwrap();
        assert_abs_diff_eq!(trace_norm_distance(&p0, &p1).unwrap(), 2.0, epsilon = 1e-14);
        assert!(trace_norm_distance(&p0, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..1000 {
            let n = 2 + t % 15;
            let (a, b, c) = (
                random_density(&mut rng, n),
                random_density(&mut rng, n),
                random_density(&mut rng, n),
            );
            let ab = trace_norm_distance(&a, &b).unwrap();
            let bc = trace_norm_distance(&b, &c).unwrap();
            let ac = trace_norm_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            assert!(ab <= 2.0 + 1e-12);
            assert_abs_diff_eq!(ab, trace_norm_distance(&b, &a).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn entropy_examples() {
        for n in [1usize, 2, 5, 16] {
            let u = vec![1.0 / n as f64; n];
            for alpha in [0.0, 0.5, 1.0, 2.0, 7.0, f64::INFINITY] {
                assert_abs_diff_eq!(entropy(&u, alpha).unwrap(), (n as f64).ln(), epsilon = 1e-12);
            }
        }
        for alpha in [0.5, 1.0, 2.0, f64::INFINITY] {
            assert_eq!(entropy(&[1.0, 0.0, 0.0], alpha).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(
            entropy(&[0.5, 0.25, 0.25], 1.0).unwrap(),
            1.5 * 2f64.ln(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(1.5 * 2f64.ln(), 1.03972, epsilon = 1e-5);
        assert!(entropy(&[0.5, 0.5], -1.0).is_err());
        assert!(entropy(&[0.7, 0.7], 1.0).is_err());
    }

    #[test]
    fn entropy_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for t in 0..10_000 {
            let p = random_distribution(&mut rng, 1 + t % 20);
            let s0 = entropy(&p, 0.0).unwrap();
            let s1 = entropy(&p, 1.0).unwrap();
            let s2 = entropy(&p, 2.0).unwrap();
            assert!(s0 + 1e-12 >= s1 && s1 + 1e-12 >= s2, "{p:?}");
        }
    }

    #[test]
    fn relative_entropy_examples() {
        let a = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let m = DensityMatrix::maximally_mixed(2);
        assert_abs_diff_eq!(relative_entropy(&a, &m).unwrap().value(), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(relative_entropy(&m, &m).unwrap().value(), 0.0, epsilon = 1e-12);
        assert_eq!(relative_entropy(&m, &a).unwrap(), RelEntropy::Infinite);
        let p = DensityMatrix::from_diagonal(&[0.25, 0.75]).unwrap();
        let expect = 0.25 * 0.5f64.ln() + 0.75 * 1.5f64.ln();
        assert_abs_diff_eq!(expect, 0.13081, epsilon = 1e-5);
        assert_abs_diff_eq!(relative_entropy(&p, &m).unwrap().value(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(
            classical_relative_entropy(&[0.25, 0.75], &[0.5, 0.5]).unwrap().value(),
            expect,
            epsilon = 1e-15
        );
    }

    #[test]
    fn pinsker() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in 0..300 {
            let n = 2 + t % 7;
            let a = random_density(&mut rng, n);
            let b = random_density(&mut rng, n);
            let d = trace_norm_distance(&a, &b).unwrap();
            let s = relative_entropy(&a, &b).unwrap().value();
            assert!(d <= (2.0 * s).sqrt() + 1e-9);
        }
    }

    #[test]
    fn gibbs_weights_stable() {
        let (w, logz) = gibbs_weights(&[0.0, 1.0, 1000.0], 50.0);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(w[2] == 0.0 && w[0] > 0.99);
        assert!(logz.is_finite());
        let (u, logz0) = gibbs_weights(&[3.0, -2.0], 0.0);
        assert_eq!(u, vec![0.5, 0.5]);
        assert_abs_diff_eq!(logz0, 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::from_diagonal(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::from_diagonal(&[1.5, -0.5]).is_err());
        assert!(DensityMatrix::from_diagonal(&[0.3, 0.7]).is_ok());
    }
}
