//! Weak local diagonality of energy eigenstates. The eigenstate is reduced to a
//! shell `Λ′` around the core `Λ`, smeared in time with a Gaussian under
//! `H_{Λ′}`, and compared with the plain reduction on `Λ`.

use std::collections::BTreeMap;

use faer::Mat;
use serde::Serialize;

use crate::hamiltonian::{placements, Interaction};
use crate::lattice::{add_embedded, embed_on_sites, make_region, Region};
use crate::linalg::{
    antihermitian_operator_norm, commutator, partial_trace, reduce_pure, trace_norm_distance, vector_norm,
    DensityMatrix, HermitianOp, SpectralDecomposition,
};
use crate::{Error, Result, C64};

/// Largest eigenvector residual `‖(H − E)ψ‖` accepted by [`omega_e`].
pub const EIGENVECTOR_TOL: f64 = 1e-8;

/// Core `Λ`, shell width `l` and the extended region `Λ′` inside a lattice.
#[derive(Debug, Clone, Serialize)]
pub struct ShellGeometry {
    #[serde(skip)]
    pub lattice: Region,
    pub periodic: bool,
    /// Lattice indices of `Λ`, ascending.
    pub core: Vec<usize>,
    /// Lattice indices of `Λ′`, ascending.
    pub extended: Vec<usize>,
    /// `Λ′ \ Λ`, ascending.
    pub shell: Vec<usize>,
    pub l: usize,
    pub range: usize,
    /// Number of supports of the interaction meeting both `Λ′` and its complement.
    pub boundary_terms: usize,
    /// `J = max_X ‖Φ(X)‖∞` over the lattice.
    pub coupling: f64,
}

impl ShellGeometry {
    /// Positions of the core sites among the extended sites.
    pub fn core_in_extended(&self) -> Vec<usize> {
        self.core
            .iter()
            .map(|s| self.extended.binary_search(s).expect("core inside shell"))
            .collect()
    }

    /// `Λ′` as a standalone one-axis box used for tensor bookkeeping.
    pub fn extended_region(&self) -> Result<Region> {
        make_region(1, &[self.extended.len()], self.lattice.local_dim())
    }
}

/// Total operator `Φ(X)` on every support `X`, keyed by the ascending site list.
fn supports(phi: &Interaction, lattice: &Region, periodic: bool) -> Result<BTreeMap<Vec<usize>, Mat<C64>>> {
    let d = lattice.local_dim();
    let mut out: BTreeMap<Vec<usize>, Mat<C64>> = BTreeMap::new();
    for term in phi.terms() {
        for sites in placements(term, lattice, periodic)? {
            let mut key = sites.clone();
            key.sort_unstable();
            let local = make_region(1, &[key.len()], d)?;
            let pos: Vec<usize> = sites.iter().map(|s| key.binary_search(s).expect("own site")).collect();
            let op = embed_on_sites(term.matrix.matrix(), &pos, &local)?;
            let dim = op.nrows();
            let acc = out.entry(key).or_insert_with(|| Mat::zeros(dim, dim));
            *acc += &op;
        }
    }
    Ok(out)
}

/// Builds `Λ′ = {x : dist(x, Λ) ≤ l}` and counts the cut supports.
pub fn shell_region(
    lattice: &Region,
    periodic: bool,
    core: &[usize],
    l: usize,
    phi: &Interaction,
) -> Result<ShellGeometry> {
    if core.is_empty() {
        return Err(Error::InvalidRegion("empty core".into()));
    }
    let mut core = core.to_vec();
    core.sort_unstable();
    core.dedup();
    if core.iter().any(|&s| s >= lattice.size()) {
        return Err(Error::InvalidSites("core site outside the lattice".into()));
    }
    let dist = |a: usize, b: usize| {
        if periodic {
            lattice.torus_distance(a, b)
        } else {
            lattice.distance(a, b)
        }
    };
    let extended: Vec<usize> = (0..lattice.size())
        .filter(|&x| core.iter().any(|&y| dist(x, y) <= l as i64))
        .collect();
    if extended.len() == lattice.size() {
        return Err(Error::InvalidRegion(format!(
            "shell of width {l} covers the whole lattice, leaving no complement"
        )));
    }
    let shell = extended.iter().copied().filter(|s| core.binary_search(s).is_err()).collect();
    let mut inside = vec![false; lattice.size()];
    extended.iter().for_each(|&s| inside[s] = true);
    let mut boundary_terms = 0;
    let mut coupling: f64 = 0.0;
    for (sites, op) in supports(phi, lattice, periodic)? {
        let norm = HermitianOp::new(op).operator_norm()?;
        if norm == 0.0 {
            continue;
        }
        coupling = coupling.max(norm);
        let n_in = sites.iter().filter(|&&s| inside[s]).count();
        if n_in > 0 && n_in < sites.len() {
            boundary_terms += 1;
        }
    }
    Ok(ShellGeometry {
        lattice: lattice.clone(),
        periodic,
        core,
        extended,
        shell,
        l,
        range: phi.range().max(0) as usize,
        boundary_terms,
        coupling,
    })
}

/// `H_{Λ′}`: every placement whose sites all lie in `Λ′`, on the extended box.
pub fn extended_hamiltonian(geom: &ShellGeometry, phi: &Interaction) -> Result<HermitianOp> {
    let region = geom.extended_region()?;
    let dim = region.hilbert_dim();
    let mut h = Mat::<C64>::zeros(dim, dim);
    for term in phi.terms() {
        for sites in placements(term, &geom.lattice, geom.periodic)? {
            let pos: Option<Vec<usize>> = sites.iter().map(|s| geom.extended.binary_search(s).ok()).collect();
            if let Some(pos) = pos {
                let split = region.split(&pos)?;
                add_embedded(&mut h, term.matrix.matrix(), &split, C64::new(1.0, 0.0));
            }
        }
    }
    Ok(HermitianOp::new(h))
}

/// `σ² = (l − r)/(4cv²)`; zero when `l ≤ r`.
pub fn smearing_width(l: usize, r: usize, c: f64, v: f64) -> f64 {
    if l <= r {
        return 0.0;
    }
    ((l - r) as f64 / (4.0 * c * v * v)).sqrt()
}

fn check_eigenvector(psi: &[C64], h: &HermitianOp) -> Result<f64> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.len() });
    }
    let norm = vector_norm(psi);
    if (norm - 1.0).abs() > EIGENVECTOR_TOL {
        return Err(Error::InvalidArgument(format!("state has norm {norm}")));
    }
    let col = Mat::from_fn(psi.len(), 1, |i, _| psi[i]);
    let hpsi = h.matrix() * &col;
    let e: C64 = (0..psi.len()).map(|i| psi[i].conj() * hpsi[(i, 0)]).sum();
    let residual = (0..psi.len()).map(|i| (hpsi[(i, 0)] - psi[i] * e.re).norm_sqr()).sum::<f64>().sqrt();
    if residual > EIGENVECTOR_TOL * e.re.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("not an eigenvector: residual {residual:e}")));
    }
    Ok(e.re)
}

/// Gaussian damping `e^{−(e₁−e₂)²σ²/2}` applied entrywise in the eigenbasis.
fn damp(m: &Mat<C64>, eigenvalues: &[f64], sigma: f64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let gap = eigenvalues[i] - eigenvalues[j];
        let f = if gap == 0.0 || sigma == 0.0 { 1.0 } else { (-0.5 * gap * gap * sigma * sigma).exp() };
        m[(i, j)] * f
    })
}

/// `ω_E = ∫ g_σ(t) e^{−iH_{Λ′}t} Tr_{Λ̄′}|E⟩⟨E| e^{iH_{Λ′}t} dt`, evaluated exactly
/// in the eigenbasis of `H_{Λ′}`. `σ = ∞` dephases completely.
pub fn omega_e(
    psi: &[C64],
    h_full: &HermitianOp,
    geom: &ShellGeometry,
    spec_prime: &SpectralDecomposition,
    sigma: f64,
) -> Result<DensityMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    check_eigenvector(psi, h_full)?;
    let reduced = reduce_pure(psi, &geom.lattice, &geom.extended)?;
    if reduced.dim() != spec_prime.dim() {
        return Err(Error::DimensionMismatch { expected: reduced.dim(), got: spec_prime.dim() });
    }
    let rotated = spec_prime.to_eigenbasis(reduced.matrix().as_ref());
    let damped = damp(&rotated, &spec_prime.eigenvalues, sigma);
    DensityMatrix::new(spec_prime.from_eigenbasis(damped.as_ref()))
}

/// Largest `|⟨e₁|ω|e₂⟩| − e^{−(l−r)(e₁−e₂)²/(8cv²)}` over all pairs.
pub fn coherence_check(
    omega: &DensityMatrix,
    spec_prime: &SpectralDecomposition,
    l: usize,
    r: usize,
    c: f64,
    v: f64,
) -> f64 {
    let m = spec_prime.to_eigenbasis(omega.matrix().as_ref());
    let width = l.saturating_sub(r) as f64 / (8.0 * c * v * v);
    let e = &spec_prime.eigenvalues;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let gap = e[i] - e[j];
            let bound = if gap == 0.0 || width == 0.0 { 1.0 } else { (-width * gap * gap).exp() };
            worst = worst.max(m[(i, j)].norm() - bound);
        }
    }
    worst
}

/// Lieb-Robinson constants in `C‖X‖‖Y‖min(|X|,|Y|)e^{−c(dist − v|t|)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LRConstants {
    pub big_c: f64,
    pub c: f64,
    pub v: f64,
    /// Set only by [`estimate_lr_constants`].
    pub certified: bool,
}

impl LRConstants {
    pub fn new(big_c: f64, c: f64, v: f64) -> Result<Self> {
        if !(big_c > 0.0 && c > 0.0 && v > 0.0) || !(big_c * c * v).is_finite() {
            return Err(Error::InvalidArgument(format!("LR constants must be positive: C={big_c}, c={c}, v={v}")));
        }
        Ok(Self { big_c, c, v, certified: false })
    }

    pub fn sigma(&self, l: usize, r: usize) -> f64 {
        smearing_width(l, r, self.c, self.v)
    }

    pub fn envelope(&self, dist: f64, t: f64) -> f64 {
        self.big_c * (-self.c * (dist - self.v * t.abs())).exp()
    }
}

/// `(2/√(2π))·A·J·σ·(CA+2)·e^{−c(l−r)/2}`.
pub fn locality_bound(geom: &ShellGeometry, lr: &LRConstants) -> f64 {
    let a = geom.boundary_terms as f64;
    let sigma = lr.sigma(geom.l, geom.range);
    let ell = geom.l.saturating_sub(geom.range) as f64;
    2.0 / (2.0 * std::f64::consts::PI).sqrt() * a * geom.coupling * sigma * (lr.big_c * a + 2.0) * (-lr.c * ell / 2.0).exp()
}

/// Summary form `κ·e^{−c(l−r)/2}` with `κ = 2AJ(CA+2)√((l−r)/(8cv²))`.
pub fn locality_bound_kappa(geom: &ShellGeometry, lr: &LRConstants) -> f64 {
    let a = geom.boundary_terms as f64;
    let ell = geom.l.saturating_sub(geom.range) as f64;
    let kappa = 2.0 * a * geom.coupling * (lr.big_c * a + 2.0) * (ell / (8.0 * lr.c * lr.v * lr.v)).sqrt();
    kappa * (-lr.c * ell / 2.0).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalityCheck {
    pub distance: f64,
    pub bound: f64,
    pub bound_kappa: f64,
    pub certified: bool,
}

impl LocalityCheck {
    /// The bound holds, or the constants carry no guarantee.
    pub fn consistent(&self) -> bool {
        !self.certified || self.distance <= self.bound
    }
}

/// `‖Tr_shell ω_E − Tr_{Λ̄}|E⟩⟨E|‖₁` against both forms of the bound.
pub fn locality_check(
    omega: &DensityMatrix,
    psi: &[C64],
    geom: &ShellGeometry,
    lr: &LRConstants,
) -> Result<LocalityCheck> {
    let region = geom.extended_region()?;
    let reduced_omega = partial_trace(omega, &region, &geom.core_in_extended())?;
    let direct = reduce_pure(psi, &geom.lattice, &geom.core)?;
    Ok(LocalityCheck {
        distance: trace_norm_distance(&reduced_omega, &direct)?,
        bound: locality_bound(geom, lr),
        bound_kappa: locality_bound_kappa(geom, lr),
        certified: lr.certified,
    })
}

/// Single-site probe pair for the Lieb-Robinson estimator.
#[derive(Debug, Clone)]
pub struct LrProbe {
    pub x_site: usize,
    pub y_site: usize,
    pub x_op: Mat<C64>,
    pub y_op: Mat<C64>,
}

/// One measured commutator norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrSample {
    pub dist: f64,
    pub t: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LrFit {
    pub constants: LRConstants,
    pub samples: Vec<LrSample>,
    /// Fraction of samples under the envelope.
    pub coverage: f64,
}

/// Commutator norms below this are treated as exact zeros.
const COMMUTATOR_FLOOR: f64 = 1e-12;

/// Measures `‖[X(t), Y]‖∞` for each probe and time, with `X(t) = e^{iHt}Xe^{−iHt}`
/// and `H` given by `spec` on `region`.
pub fn lr_samples(
    spec: &SpectralDecomposition,
    region: &Region,
    periodic: bool,
    probes: &[LrProbe],
    t_grid: &[f64],
) -> Result<Vec<LrSample>> {
    let mut out = Vec::with_capacity(probes.len() * t_grid.len());
    for p in probes {
        let x = embed_on_sites(&p.x_op, &[p.x_site], region)?;
        let y = embed_on_sites(&p.y_op, &[p.y_site], region)?;
        let (nx, ny) = (
            HermitianOp::try_new(p.x_op.clone())?.operator_norm()?,
            HermitianOp::try_new(p.y_op.clone())?.operator_norm()?,
        );
        if (nx - 1.0).abs() > 1e-9 || (ny - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("probe operators must have unit norm".into()));
        }
        let xe = spec.to_eigenbasis(x.as_ref());
        let ye = spec.to_eigenbasis(y.as_ref());
        let e = &spec.eigenvalues;
        let dist = if periodic {
            region.torus_distance(p.x_site, p.y_site)
        } else {
            region.distance(p.x_site, p.y_site)
        } as f64;
        for &t in t_grid {
            let xt = Mat::from_fn(xe.nrows(), xe.ncols(), |a, b| {
                xe[(a, b)] * C64::from_polar(1.0, (e[a] - e[b]) * t)
            });
            let norm = antihermitian_operator_norm(commutator(xt.as_ref(), ye.as_ref()).as_ref())?;
            out.push(LrSample { dist, t, norm });
        }
    }
    Ok(out)
}

/// Least-squares fit of `ln‖[X(t),Y]‖ = ln C − c·dist + cv|t|` over the nonzero
/// samples, after which `C` is raised until every sample lies under the envelope.
pub fn estimate_lr_constants(
    spec: &SpectralDecomposition,
    region: &Region,
    periodic: bool,
    probes: &[LrProbe],
    t_grid: &[f64],
) -> Result<LrFit> {
    let samples = lr_samples(spec, region, periodic, probes, t_grid)?;
    fit_lr_samples(samples)
}

pub fn fit_lr_samples(samples: Vec<LrSample>) -> Result<LrFit> {
    let pts: Vec<&LrSample> = samples.iter().filter(|s| s.norm > COMMUTATOR_FLOOR).collect();
    let mut dists: Vec<f64> = pts.iter().map(|s| s.dist).collect();
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    let mut times: Vec<f64> = pts.iter().map(|s| s.t.abs()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if pts.len() < 3 || dists.len() < 2 || times.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} nonzero commutators over {} distances and {} times",
            pts.len(),
            dists.len(),
            times.len()
        )));
    }
    // Normal equations for y = a + b·dist + w·|t|.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for s in &pts {
        let row = [1.0, s.dist, s.t.abs()];
        let y = s.norm.ln();
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let [_, b, w] = solve3(ata, atb).ok_or_else(|| Error::DegenerateFit("singular design".into()))?;
    let c = -b;
    if !(c > 0.0 && w > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted decay {c} and growth {w} must be positive")));
    }
    let v = w / c;
    let big_c = samples
        .iter()
        .map(|s| s.norm / (-c * (s.dist - v * s.t.abs())).exp())
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut constants = LRConstants::new(big_c, c, v)?;
    constants.certified = true;
    let covered = samples.iter().filter(|s| s.norm <= constants.envelope(s.dist, s.t) * (1.0 + 1e-12)).count();
    Ok(LrFit { constants, coverage: covered as f64 / samples.len() as f64, samples })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Probes from `x_site` to the sites at each distance along the first axis,
/// for every pair of operators in `ops`.
pub fn axis_probes(
    region: &Region,
    x_site: usize,
    dists: &[usize],
    ops: &[(Mat<C64>, Mat<C64>)],
) -> Result<Vec<LrProbe>> {
    let base = region.coord(x_site);
    let mut out = Vec::new();
    for &dd in dists {
        let mut c = base.clone();
        c[0] += dd as i64;
        let y_site = region
            .index(&c)
            .ok_or_else(|| Error::InvalidSites(format!("no site at distance {dd} from {x_site}")))?;
        for (x_op, y_op) in ops {
            out.push(LrProbe { x_site, y_site, x_op: x_op.clone(), y_op: y_op.clone() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, field_chain, pauli, transverse_ising_chain, BoundaryCondition};
    use crate::linalg::eigh;

    fn chain(n: usize) -> Region {
        make_region(1, &[n], 2).unwrap()
    }

    fn model() -> Interaction {
        transverse_ising_chain(1.0, 0.5, 0.3)
    }

    #[test]
    fn shell_of_two_middle_sites() {
        let g = shell_region(&chain(10), false, &[4, 5], 2, &model()).unwrap();
        assert_eq!(g.extended, vec![2, 3, 4, 5, 6, 7]);
        assert_eq!(g.shell, vec![2, 3, 6, 7]);
        assert_eq!(g.boundary_terms, 2);
        assert_eq!(g.range, 1);
        assert!((g.coupling - 1.0).abs() < 1e-12);
        assert_eq!(g.core_in_extended(), vec![2, 3]);
    }

    #[test]
    fn on_site_terms_are_grouped_by_support() {
        let g = shell_region(&chain(6), true, &[0], 1, &transverse_ising_chain(0.1, 0.5, 0.3)).unwrap();
        assert!((g.coupling - (0.5f64.powi(2) + 0.3f64.powi(2)).sqrt()).abs() < 1e-12);
        assert_eq!(g.extended, vec![0, 1, 5]);
        assert_eq!(g.boundary_terms, 2);
    }

    #[test]
    fn zero_width_shell_is_core() {
        let g = shell_region(&chain(10), false, &[4, 5], 0, &model()).unwrap();
        assert_eq!(g.extended, g.core);
        assert!(g.shell.is_empty());
    }

    #[test]
    fn shell_covering_lattice_is_rejected() {
        let lat = make_region(2, &[3, 3], 2).unwrap();
        let phi = Interaction::new(2, 2, vec![crate::hamiltonian::Term {
            offsets: vec![vec![0, 0]],
            matrix: HermitianOp::new(pauli(3)),
        }])
        .unwrap();
        let centre = lat.index(&[1, 1]).unwrap();
        assert!(matches!(shell_region(&lat, false, &[centre], 1, &phi), Err(Error::InvalidRegion(_))));
        let corner = lat.index(&[0, 0]).unwrap();
        assert_eq!(shell_region(&lat, false, &[corner], 1, &phi).unwrap().extended.len(), 4);
    }

    #[test]
    fn extended_hamiltonian_matches_open_chain() {
        let g = shell_region(&chain(10), false, &[4, 5], 2, &model()).unwrap();
        let h = extended_hamiltonian(&g, &model()).unwrap();
        let direct = build_hamiltonian(&model(), &chain(6), &BoundaryCondition::Open).unwrap();
        assert!((h.matrix() - direct.matrix()).norm_max() < 1e-14);
    }

    #[test]
    fn bound_arithmetic() {
        let lat = chain(10);
        let mut g = shell_region(&lat, false, &[4, 5], 2, &model()).unwrap();
        g.l = 5;
        let lr = LRConstants::new(1.0, 1.0, 1.0).unwrap();
        assert!((lr.sigma(5, 1) - 1.0).abs() < 1e-15);
        let b = locality_bound(&g, &lr);
        assert!((b - 2.0 / (2.0 * std::f64::consts::PI).sqrt() * 2.0 * 4.0 * (-2.0f64).exp()).abs() < 1e-14);
        assert!((b - 0.8635).abs() < 5e-4);
        let k = locality_bound_kappa(&g, &lr);
        assert!((k / b - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(LRConstants::new(0.0, 1.0, 1.0).is_err());
    }

    struct Setup {
        h: HermitianOp,
        spec: SpectralDecomposition,
        geom: ShellGeometry,
        spec_prime: SpectralDecomposition,
    }

    fn setup(n: usize, l: usize) -> Setup {
        let lat = chain(n);
        let h = build_hamiltonian(&model(), &lat, &BoundaryCondition::Open).unwrap();
        let spec = eigh(&h).unwrap();
        let core = [n / 2 - 1, n / 2];
        let geom = shell_region(&lat, false, &core, l, &model()).unwrap();
        let spec_prime = eigh(&extended_hamiltonian(&geom, &model()).unwrap()).unwrap();
        Setup { h, spec, geom, spec_prime }
    }

    #[test]
    fn omega_limits() {
        let s = setup(8, 2);
        let psi = s.spec.vector(100);
        let plain = reduce_pure(&psi, &s.geom.lattice, &s.geom.extended).unwrap();
        let w0 = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, 0.0).unwrap();
        assert!((w0.matrix() - plain.matrix()).norm_max() < 1e-12);
        let winf = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, f64::INFINITY).unwrap();
        let rot = s.spec_prime.to_eigenbasis(winf.matrix().as_ref());
        let e = &s.spec_prime.eigenvalues;
        for j in 0..rot.ncols() {
            for i in 0..rot.nrows() {
                if e[i] != e[j] {
                    assert!(rot[(i, j)].norm() < 1e-12);
                }
            }
        }
        let w = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, 0.7).unwrap();
        let d1 = s.spec_prime.diagonal_expectations(w.matrix().as_ref());
        let d0 = s.spec_prime.diagonal_expectations(plain.matrix().as_ref());
        for (a, b) in d1.iter().zip(&d0) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w.trace() - 1.0).abs() < 1e-12);
        assert!(w.eigenvalues().unwrap().iter().all(|&x| x > -1e-12));
    }

    #[test]
    fn omega_rejects_non_eigenvectors() {
        let s = setup(8, 2);
        let a = s.spec.vector(3);
        let b = s.spec.vector(200);
        let mix: Vec<C64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2f64.sqrt()).collect();
        assert!(omega_e(&mix, &s.h, &s.geom, &s.spec_prime, 0.5).is_err());
    }

    #[test]
    fn coherence_inequality_is_exact() {
        let s = setup(10, 3);
        let lr = LRConstants::new(1.0, 0.8, 1.5).unwrap();
        let sigma = lr.sigma(3, 1);
        for k in (0..1024).step_by(61) {
            let psi = s.spec.vector(k);
            let w = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, sigma).unwrap();
            assert!(coherence_check(&w, &s.spec_prime, 3, 1, lr.c, lr.v) <= 1e-9);
            let vacuous = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, 0.0).unwrap();
            assert!(coherence_check(&vacuous, &s.spec_prime, 1, 1, lr.c, lr.v) <= 1e-9);
        }
    }

    #[test]
    fn zero_smearing_gives_zero_distance() {
        let s = setup(8, 1);
        let lr = LRConstants::new(1.0, 1.0, 1.0).unwrap();
        let psi = s.spec.vector(77);
        let w = omega_e(&psi, &s.h, &s.geom, &s.spec_prime, lr.sigma(1, 1)).unwrap();
        let c = locality_check(&w, &psi, &s.geom, &lr).unwrap();
        assert!(c.distance < 1e-12);
        assert_eq!(c.bound, 0.0);
        assert!(c.consistent());
    }

    #[test]
    fn lr_estimator_on_interacting_chain() {
        let s = setup(8, 2);
        let region = s.geom.extended_region().unwrap();
        let ops = vec![(pauli(3), pauli(3)), (pauli(1), pauli(3))];
        let probes = axis_probes(&region, 0, &[0, 1, 2, 3], &ops).unwrap();
        let t_grid = [0.0, 0.25, 0.5, 1.0, 1.5];
        let fit = estimate_lr_constants(&s.spec_prime, &region, false, &probes, &t_grid).unwrap();
        assert!(fit.constants.certified);
        assert!(fit.coverage >= 0.99);
        assert!(fit.constants.c > 0.0 && fit.constants.v > 0.0);
        for smp in fit.samples.iter().filter(|s| s.t == 0.0 && s.dist >= 1.0) {
            assert!(smp.norm < 1e-12);
        }
        for smp in fit.samples.iter().filter(|s| s.dist == 0.0) {
            assert!(smp.norm <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn lr_estimator_degenerate_without_interactions() {
        let lat = chain(4);
        let phi = field_chain(&HermitianOp::new(pauli(1))).unwrap();
        let h = build_hamiltonian(&phi, &lat, &BoundaryCondition::Open).unwrap();
        let spec = eigh(&h).unwrap();
        let probes = axis_probes(&lat, 0, &[0, 1, 2], &[(pauli(3), pauli(3))]).unwrap();
        let r = estimate_lr_constants(&spec, &lat, false, &probes, &[0.0, 0.5, 1.0]);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn product_eigenstates_are_not_locally_thermal() {
        // h = diag(1, −1) on every site: computational states are eigenstates
        // with pure reductions.
        let n = 8;
        let lat = chain(n);
        let phi = field_chain(&HermitianOp::new(pauli(3))).unwrap();
        let h = build_hamiltonian(&phi, &lat, &BoundaryCondition::Open).unwrap();
        let diag: Vec<f64> = (0..h.dim()).map(|i| h.matrix()[(i, i)].re).collect();
        for (x, site) in [(0b1010_1010usize, 1), (0b1100_0011, 0), (0b1110_1111, 3)] {
            let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
            psi[x] = C64::new(1.0, 0.0);
            let u = diag[x] / n as f64;
            let beta = crate::ensembles::solve_beta_from_levels(&[1.0, -1.0], &[1.0, -1.0], 1, u).unwrap();
            let gamma = DensityMatrix::from_diagonal(&crate::linalg::gibbs_weights(&[1.0, -1.0], beta).0).unwrap();
            let reduced = reduce_pure(&psi, &lat, &[site]).unwrap();
            assert!(trace_norm_distance(&reduced, &gamma).unwrap() >= 0.5);
        }
    }
}
