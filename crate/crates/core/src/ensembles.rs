//! Canonical and microcanonical ensembles, dephasing and block pseudonorms.

use std::ops::Range;

use faer::Mat;

use crate::lattice::{periodic_translations, Region};
use crate::linalg::{
    entropy, gibbs_weights, hermitian_trace_norm, partial_trace_matrix, DensityMatrix,
    HermitianOp, SpectralDecomposition,
};
use crate::{Error, Result, C64};

/// Tolerance on energy densities when testing window membership.
pub const WINDOW_TOL: f64 = 1e-12;
/// Required accuracy of [`solve_beta`] in energy density.
pub const BETA_TOL: f64 = 1e-10;
pub const BETA_MAX: f64 = 1e3;

/// The closed energy-density window `[u − δ, u]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub u: f64,
    pub delta: f64,
}

impl EnergyWindow {
    pub fn new(u: f64, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !u.is_finite() {
            return Err(Error::InvalidArgument(format!("bad window u={u}, delta={delta}")));
        }
        Ok(Self { u, delta })
    }

    pub fn contains_density(&self, x: f64) -> bool {
        x >= self.u - self.delta - WINDOW_TOL && x <= self.u + WINDOW_TOL
    }
}

#[derive(Debug, Clone)]
pub struct MicrocanonicalSubspace {
    pub basis: Mat<C64>,
    /// Indices of the selected eigenvectors.
    pub levels: Vec<usize>,
    pub window: EnergyWindow,
}

impl MicrocanonicalSubspace {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn projector(&self) -> Mat<C64> {
        &self.basis * self.basis.adjoint()
    }
}

/// `exp(−βH)/Z`, computed spectrally.
pub fn gibbs_state(spec: &SpectralDecomposition, beta: f64) -> Result<DensityMatrix> {
    let w = gibbs_level_weights(spec, beta)?;
    Ok(DensityMatrix::from_spectral(spec, &w))
}

/// Eigenvalue weights of the Gibbs state.
pub fn gibbs_level_weights(spec: &SpectralDecomposition, beta: f64) -> Result<Vec<f64>> {
    if !(0.0..=BETA_MAX).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta {beta} outside [0, {BETA_MAX}]")));
    }
    let (w, logz) = gibbs_weights(&spec.eigenvalues, beta);
    if !logz.is_finite() || w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { beta });
    }
    Ok(w)
}

/// `log Z / |Λ|`, the finite-size pressure proxy.
pub fn log_partition_density(spec: &SpectralDecomposition, region: &Region, beta: f64) -> f64 {
    gibbs_weights(&spec.eigenvalues, beta).1 / region.size() as f64
}

/// Inverse temperature whose Gibbs state has `tr(A γ(β))/|Λ| = u`, where `A` is
/// `energy_op` and `γ` is generated by the decomposed Hamiltonian.
pub fn solve_beta(
    spec: &SpectralDecomposition,
    energy_op: &HermitianOp,
    region: &Region,
    u: f64,
) -> Result<f64> {
    if energy_op.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: energy_op.dim() });
    }
    let expectations = spec.diagonal_expectations(energy_op.matrix().as_ref());
    solve_beta_from_levels(&spec.eigenvalues, &expectations, region.size(), u)
}

/// Energy density `Σ_i w_i(β) a_i / sites` for Gibbs weights over `levels`.
pub fn density_at_beta(levels: &[f64], expectations: &[f64], sites: usize, beta: f64) -> f64 {
    let (w, _) = gibbs_weights(levels, beta);
    w.iter().zip(expectations).map(|(w, a)| w * a).sum::<f64>() / sites as f64
}

/// [`solve_beta`] in terms of the generator's levels and the expectation values
/// of the energy observable in the corresponding eigenvectors.
pub fn solve_beta_from_levels(levels: &[f64], expectations: &[f64], sites: usize, u: f64) -> Result<f64> {
    let f = |b: f64| density_at_beta(levels, expectations, sites, b);
    let top = f(0.0);
    if u > top + BETA_TOL {
        return Err(Error::Bracketing { target: u, min: f(BETA_MAX.min(64.0)), max: top });
    }
    let mut lo = 0.0;
    let mut hi = 64.0;
    while f(hi) > u && hi < 65536.0 {
        lo = hi;
        hi *= 2.0;
    }
    let bottom = f(hi);
    if bottom > u + BETA_TOL {
        return Err(Error::Bracketing { target: u, min: bottom, max: top });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = ((f(lo) - u).abs(), (f(hi) - u).abs());
    let (beta, res) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    if res > BETA_TOL {
        return Err(Error::Bracketing { target: u, min: bottom, max: top });
    }
    Ok(beta)
}

/// Indices of the eigenvalues whose density lies in the window.
pub fn window_levels(spec: &SpectralDecomposition, region: &Region, window: &EnergyWindow) -> Vec<usize> {
    let n = region.size() as f64;
    (0..spec.dim()).filter(|&i| window.contains_density(spec.eigenvalues[i] / n)).collect()
}

/// Maximal mixture on the span of eigenvectors with density in the window.
pub fn microcanonical(
    spec: &SpectralDecomposition,
    region: &Region,
    window: EnergyWindow,
) -> Result<(MicrocanonicalSubspace, DensityMatrix)> {
    let levels = window_levels(spec, region, &window);
    if levels.is_empty() {
        return Err(Error::EmptyWindow { lo: window.u - window.delta, hi: window.u });
    }
    let basis = Mat::from_fn(spec.dim(), levels.len(), |i, k| spec.eigenvectors[(i, levels[k])]);
    let w = 1.0 / levels.len() as f64;
    let mut weights = vec![0.0; spec.dim()];
    for &k in &levels {
        weights[k] = w;
    }
    let tau = DensityMatrix::from_spectral(spec, &weights);
    Ok((MicrocanonicalSubspace { basis, levels, window }, tau))
}

/// Mixture of eigenprojectors weighted by `f(E_i/|Λ|)`; `f` must vanish above `u`.
pub fn weighted_microcanonical(
    spec: &SpectralDecomposition,
    region: &Region,
    f: &dyn Fn(f64) -> f64,
    u: f64,
) -> Result<DensityMatrix> {
    let n = region.size() as f64;
    let densities: Vec<f64> = spec.eigenvalues.iter().map(|e| e / n).collect();
    let top = densities.last().copied().unwrap_or(u).max(u);
    let span = (top - densities.first().copied().unwrap_or(u)).abs().max(1.0);
    for k in 1..=64 {
        let x = u + span * k as f64 / 64.0;
        if f(x) != 0.0 {
            return Err(Error::InvalidArgument(format!("weight function is nonzero at {x} > u")));
        }
    }
    let mut weights = Vec::with_capacity(spec.dim());
    for &x in &densities {
        let w = if x > u + WINDOW_TOL { 0.0 } else { f(x) };
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidArgument(format!("weight function gives {w} at {x}")));
        }
        weights.push(w);
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("all weights vanish".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(DensityMatrix::from_spectral(spec, &weights))
}

/// Default tolerance for treating two eigenvalues as equal.
pub fn default_degeneracy_tol(spec: &SpectralDecomposition) -> f64 {
    let norm = spec
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
    1e-10 * norm
}

/// Group ascending eigenvalues into eigenspaces; neighbours closer than `tol`
/// are chained together.
pub fn eigenspaces(eigenvalues: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=eigenvalues.len() {
        if i == eigenvalues.len() || eigenvalues[i] - eigenvalues[i - 1] > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// `Σ_i π_i ρ π_i`.
pub fn dephase(rho: &DensityMatrix, spec: &SpectralDecomposition, tol: f64) -> Result<DensityMatrix> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: rho.dim() });
    }
    let r = spec.to_eigenbasis(rho.matrix().as_ref());
    let mut block = Mat::<C64>::zeros(spec.dim(), spec.dim());
    for sp in eigenspaces(&spec.eigenvalues, tol) {
        for j in sp.clone() {
            for i in sp.clone() {
                block[(i, j)] = r[(i, j)];
            }
        }
    }
    Ok(DensityMatrix::from_trusted(spec.from_eigenbasis(block.as_ref())))
}

/// Populations `tr(ρ π_i)` of the eigenspaces.
pub fn eigenspace_populations(rho: &DensityMatrix, spec: &SpectralDecomposition, tol: f64) -> Result<Vec<f64>> {
    if rho.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: rho.dim() });
    }
    let diag = spec.diagonal_expectations(rho.matrix().as_ref());
    Ok(eigenspaces(&spec.eigenvalues, tol)
        .into_iter()
        .map(|sp| sp.map(|i| diag[i]).sum::<f64>().max(0.0))
        .collect())
}

/// Population entropy `−Σ λ_i log λ_i` of the eigenspace populations.
pub fn population_entropy(rho0: &DensityMatrix, spec: &SpectralDecomposition, tol: f64) -> Result<f64> {
    let mut p = eigenspace_populations(rho0, spec, tol)?;
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    entropy(&p, 1.0)
}

/// `(1/|Λ|) log #{E_i ≤ u|Λ|}`.
pub fn entropy_density_proxy(spec: &SpectralDecomposition, region: &Region, u: f64) -> Result<f64> {
    let n = region.size() as f64;
    let count = spec.eigenvalues.iter().filter(|&&e| e / n <= u + WINDOW_TOL).count();
    if count == 0 {
        return Err(Error::EmptyWindow { lo: f64::NEG_INFINITY, hi: u });
    }
    Ok((count as f64).ln() / n)
}

/// Lower bound `log n − log M` on the Shannon entropy of an `n`-outcome
/// distribution whose largest to smallest probability ratio is at most `M`.
pub fn entropy_floor(n: usize, ratio: f64) -> f64 {
    (n as f64).ln() - ratio.ln()
}

/// `S(ρ) − β tr(Hρ)`, maximized by the Gibbs state.
pub fn free_entropy(rho: &DensityMatrix, h: &HermitianOp, beta: f64) -> Result<f64> {
    Ok(crate::linalg::von_neumann_entropy(rho)? - beta * rho.expectation(h)?)
}

/// How translates of the block are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    /// All torus translations of the region.
    Periodic,
    /// Only translates contained in the region.
    Interior,
}

/// Site lists of the translates of `Λ_m` (the cube of side `m` at the
/// region's lower corner), each in `Λ_m`'s own site order.
pub fn block_translates(region: &Region, m: usize, mode: BlockMode) -> Result<Vec<Vec<usize>>> {
    let sides = region.sides();
    if m == 0 || sides.iter().any(|&s| m > s) {
        return Err(Error::InvalidArgument(format!("block side {m} does not fit in {sides:?}")));
    }
    let lower: Vec<i64> = region.intervals().iter().map(|iv| iv.0).collect();
    let block = Region::from_intervals(lower.iter().map(|&l| (l, l + m as i64 - 1)).collect(), region.local_dim())?;
    let offsets: Vec<Vec<i64>> = match mode {
        BlockMode::Periodic => periodic_translations(region).iter().map(|t| t.vector().to_vec()).collect(),
        BlockMode::Interior => {
            let inner: Vec<usize> = sides.iter().map(|&s| s - m + 1).collect();
            let total: usize = inner.iter().product();
            (0..total)
                .map(|mut k| {
                    let mut v = vec![0i64; inner.len()];
                    for a in (0..inner.len()).rev() {
                        v[a] = (k % inner[a]) as i64;
                        k /= inner[a];
                    }
                    v
                })
                .collect()
        }
    };
    Ok(offsets
        .iter()
        .map(|y| {
            (0..block.size())
                .map(|k| {
                    let c: Vec<i64> = block.coord(k).iter().zip(y).map(|(c, o)| c + o).collect();
                    region.index(&region.wrap(&c)).expect("wrapped into region")
                })
                .collect()
        })
        .collect())
}

/// `N = avg_y Tr_{Λ∖(Λ_m+y)} M`, as an operator on `Λ_m`.
pub fn block_average(m_op: &Mat<C64>, region: &Region, m: usize, mode: BlockMode) -> Result<Mat<C64>> {
    let translates = block_translates(region, m, mode)?;
    let k = region.local_dim().pow(translates[0].len() as u32);
    let mut acc = Mat::<C64>::zeros(k, k);
    for sites in &translates {
        acc += partial_trace_matrix(m_op.as_ref(), region, sites)?;
    }
    let w = 1.0 / translates.len() as f64;
    Ok(Mat::from_fn(k, k, |i, j| acc[(i, j)] * w))
}

/// Block pseudonorm `‖N‖₁` of a traceless Hermitian `M`.
pub fn block_pseudonorm(m_op: &HermitianOp, region: &Region, m: usize, mode: BlockMode) -> Result<f64> {
    let tr = m_op.trace();
    if tr.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("pseudonorm needs a traceless operator, trace {tr}")));
    }
    hermitian_trace_norm(block_average(m_op.matrix(), region, m, mode)?.as_ref())
}

/// `‖ρ − σ‖` in the block pseudonorm.
pub fn pseudonorm_distance(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    region: &Region,
    m: usize,
    mode: BlockMode,
) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: sigma.dim() });
    }
    let diff = HermitianOp::new(rho.matrix() - sigma.matrix());
    block_pseudonorm(&diff, region, m, mode)
}
