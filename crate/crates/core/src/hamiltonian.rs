//! Finite-range translation-invariant Hamiltonians.
//!
//! An [`Interaction`] is a list of terms, each a support pattern (offsets
//! relative to an anchor) together with a Hermitian matrix on the pattern's
//! sites, tensor factors in pattern order.

use std::collections::HashSet;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lattice::{add_embedded, sup_distance, translation_generators, Region};
use crate::linalg::{HermitianOp, SpectralDecomposition};
use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct Term {
    pub offsets: Vec<Vec<i64>>,
    pub matrix: HermitianOp,
}

#[derive(Debug, Clone)]
pub struct Interaction {
    nu: usize,
    local_dim: usize,
    terms: Vec<Term>,
}

impl Interaction {
    pub fn new(nu: usize, local_dim: usize, terms: Vec<Term>) -> Result<Self> {
        if nu == 0 || local_dim < 2 {
            return Err(Error::InvalidArgument("need nu >= 1 and d >= 2".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if t.offsets.is_empty() {
                return Err(Error::InvalidArgument(format!("term {k} has an empty pattern")));
            }
            if t.offsets.iter().any(|o| o.len() != nu) {
                return Err(Error::InvalidArgument(format!("term {k} has offsets of wrong length")));
            }
            let distinct: HashSet<&Vec<i64>> = t.offsets.iter().collect();
            if distinct.len() != t.offsets.len() {
                return Err(Error::InvalidArgument(format!("term {k} repeats an offset")));
            }
            let expected = (local_dim as u128).checked_pow(t.offsets.len() as u32);
            if expected != Some(t.matrix.dim() as u128) {
                return Err(Error::DimensionMismatch {
                    expected: expected.unwrap_or(u128::MAX).min(usize::MAX as u128) as usize,
                    got: t.matrix.dim(),
                });
            }
        }
        Ok(Self { nu, local_dim, terms })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Largest pattern diameter in sup-distance.
    pub fn range(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| {
                let mut r = 0;
                for a in &t.offsets {
                    for b in &t.offsets {
                        r = r.max(sup_distance(a, b));
                    }
                }
                r
            })
            .max()
            .unwrap_or(0)
    }

    /// `J = max_X ‖Φ(X)‖∞`, recomputed from the term matrices.
    pub fn coupling_bound(&self) -> Result<f64> {
        let mut j: f64 = 0.0;
        for t in &self.terms {
            j = j.max(t.matrix.operator_norm()?);
        }
        Ok(j)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term { offsets: t.offsets.clone(), matrix: t.matrix.scaled(s) })
            .collect();
        Self { nu: self.nu, local_dim: self.local_dim, terms }
    }

    /// Interaction whose Hamiltonians are the sums of both.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.nu != other.nu || self.local_dim != other.local_dim {
            return Err(Error::InvalidArgument("interactions live on different lattices".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Self { nu: self.nu, local_dim: self.local_dim, terms })
    }

    pub fn to_record(&self) -> InteractionRecord {
        InteractionRecord {
            nu: self.nu,
            r: self.range(),
            d: self.local_dim,
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let m = t.matrix.matrix();
                    let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            entries.push([m[(i, j)].re, m[(i, j)].im]);
                        }
                    }
                    TermRecord { offsets: t.offsets.clone(), matrix: entries }
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &InteractionRecord) -> Result<Self> {
        let mut terms = Vec::with_capacity(rec.terms.len());
        for t in &rec.terms {
            let n = (t.matrix.len() as f64).sqrt().round() as usize;
            if n * n != t.matrix.len() {
                return Err(Error::Config(format!(
                    "term matrix has {} entries, not a square",
                    t.matrix.len()
                )));
            }
            let m = Mat::from_fn(n, n, |i, j| {
                let [re, im] = t.matrix[i * n + j];
                C64::new(re, im)
            });
            terms.push(Term { offsets: t.offsets.clone(), matrix: HermitianOp::new(m) });
        }
        let phi = Self::new(rec.nu, rec.d, terms)?;
        if phi.range() != rec.r {
            return Err(Error::Config(format!(
                "declared range {} but patterns have diameter {}",
                rec.r,
                phi.range()
            )));
        }
        Ok(phi)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(s)?)
    }
}

/// Serialized form of an [`Interaction`]; matrices are row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionRecord {
    pub nu: usize,
    pub r: i64,
    pub d: usize,
    pub terms: Vec<TermRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRecord {
    pub offsets: Vec<Vec<i64>>,
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Open,
    Periodic,
    /// Open-boundary Hamiltonian plus operators already embedded on the region.
    Custom(Vec<HermitianOp>),
}

/// Site lists of every placement of `term` that `build_hamiltonian` sums over.
pub fn placements(term: &Term, region: &Region, periodic: bool) -> Result<Vec<Vec<usize>>> {
    let nu = region.nu();
    let too_large = || {
        Error::PatternTooLarge(format!(
            "pattern {:?} does not fit in region {:?}",
            term.offsets,
            region.intervals()
        ))
    };
    let mut out = Vec::new();
    if periodic {
        let sides = region.sides();
        let lower: Vec<i64> = region.intervals().iter().map(|iv| iv.0).collect();
        // One anchor per class modulo the side lengths; translates of a finite
        // pattern by distinct anchors are distinct sets, so nothing repeats.
        for k in 0..region.size() {
            let anchor = region.coord(k);
            let sites: Vec<usize> = term
                .offsets
                .iter()
                .map(|o| {
                    let c: Vec<i64> = (0..nu)
                        .map(|a| lower[a] + (anchor[a] - lower[a] + o[a]).rem_euclid(sides[a] as i64))
                        .collect();
                    region.index(&c).expect("wrapped into region")
                })
                .collect();
            let mut key = sites.clone();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(too_large());
            }
            out.push(sites);
        }
    } else {
        let mut lo = Vec::with_capacity(nu);
        let mut hi = Vec::with_capacity(nu);
        for a in 0..nu {
            let omin = term.offsets.iter().map(|o| o[a]).min().expect("nonempty pattern");
            let omax = term.offsets.iter().map(|o| o[a]).max().expect("nonempty pattern");
            let (l, m) = region.intervals()[a];
            if l - omin > m - omax {
                return Err(too_large());
            }
            lo.push(l - omin);
            hi.push(m - omax);
        }
        let mut anchor = lo.clone();
        loop {
            let sites = term
                .offsets
                .iter()
                .map(|o| {
                    let c: Vec<i64> = (0..nu).map(|a| anchor[a] + o[a]).collect();
                    region.index(&c).expect("placement inside region")
                })
                .collect();
            out.push(sites);
            let mut axis = nu;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                if anchor[axis] < hi[axis] {
                    anchor[axis] += 1;
                    break;
                }
                anchor[axis] = lo[axis];
            }
        }
    }
    Ok(out)
}

pub fn build_hamiltonian(phi: &Interaction, region: &Region, bc: &BoundaryCondition) -> Result<HermitianOp> {
    if phi.nu() != region.nu() || phi.local_dim() != region.local_dim() {
        return Err(Error::InvalidArgument(
            "interaction and region disagree on lattice or local dimension".into(),
        ));
    }
    let dim = region.hilbert_dim();
    let mut h = Mat::<C64>::zeros(dim, dim);
    let periodic = matches!(bc, BoundaryCondition::Periodic);
    for term in phi.terms() {
        for sites in placements(term, region, periodic)? {
            let split = region.split(&sites)?;
            add_embedded(&mut h, term.matrix.matrix(), &split, C64::new(1.0, 0.0));
        }
    }
    if let BoundaryCondition::Custom(extra) = bc {
        for op in extra {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: op.dim() });
            }
            h += op.matrix();
        }
    }
    Ok(HermitianOp::new(h))
}

/// `max_j ‖T_j H T_j† − H‖∞` over the unit translations.
pub fn translation_invariance_check(h: &HermitianOp, region: &Region) -> Result<f64> {
    if h.dim() != region.hilbert_dim() {
        return Err(Error::DimensionMismatch { expected: region.hilbert_dim(), got: h.dim() });
    }
    let m = h.matrix();
    let mut worst: f64 = 0.0;
    for t in translation_generators(region) {
        let p = t.basis_permutation();
        let mut diff = Mat::<C64>::zeros(h.dim(), h.dim());
        for j in 0..h.dim() {
            for i in 0..h.dim() {
                diff[(p[i], p[j])] = m[(i, j)];
            }
        }
        diff -= m;
        worst = worst.max(HermitianOp::new(diff).operator_norm()?);
    }
    Ok(worst)
}

/// `(λ_min/|Λ|, tr H/(|Λ| d^{|Λ|}))`.
pub fn energy_density_extremes(spec: &SpectralDecomposition, region: &Region) -> (f64, f64) {
    let n = region.size() as f64;
    let lmin = spec.eigenvalues.first().copied().unwrap_or(0.0);
    let tr: f64 = spec.eigenvalues.iter().sum();
    (lmin / n, tr / (n * spec.dim() as f64))
}

/// Pauli matrices `σ_0 = 𝟙, σ_1 = X, σ_2 = Y, σ_3 = Z`.
pub fn pauli(k: usize) -> Mat<C64> {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let e = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("Pauli index {k} out of range"),
    };
    Mat::from_fn(2, 2, |r, c| e[2 * r + c])
}

pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

fn chain_term(offsets: &[i64], m: Mat<C64>) -> Term {
    Term { offsets: offsets.iter().map(|&o| vec![o]).collect(), matrix: HermitianOp::new(m) }
}

/// Single-site term `h` on a 1D chain.
pub fn field_chain(h: &HermitianOp) -> Result<Interaction> {
    Interaction::new(1, h.dim(), vec![Term { offsets: vec![vec![0]], matrix: h.clone() }])
}

/// `H = −J Σ Z_i Z_{i+1} − h Σ Z_i`.
pub fn ising_chain(j: f64, h: f64) -> Interaction {
    transverse_ising_chain(j, h, 0.0)
}

/// `H = −J Σ Z_i Z_{i+1} − h Σ Z_i − g Σ X_i`.
pub fn transverse_ising_chain(j: f64, h: f64, g: f64) -> Interaction {
    let zz = kron(&pauli(3), &pauli(3));
    let onsite = Mat::from_fn(2, 2, |r, c| -(pauli(3)[(r, c)] * h + pauli(1)[(r, c)] * g));
    let bond = Mat::from_fn(4, 4, |r, c| -zz[(r, c)] * j);
    Interaction::new(1, 2, vec![chain_term(&[0], onsite), chain_term(&[0, 1], bond)])
        .expect("well-formed chain interaction")
}

/// Random nearest-neighbour qubit chain with standard normal Pauli coefficients.
#[derive(Debug, Clone)]
pub struct RandomTwoLocal {
    pub n: usize,
    pub seed: u64,
    pub a: [f64; 3],
    pub b: [f64; 9],
    /// `‖H^p‖∞` before normalization; the stored interaction is divided by it.
    pub scale: f64,
    pub interaction: Interaction,
}

/// Coefficients `a_j` (j = X, Y, Z) and `b_{jk}` (row-major) for one seed.
pub fn random_2local_coefficients(seed: u64) -> ([f64; 3], [f64; 9]) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut a = [0.0; 3];
    let mut b = [0.0; 9];
    for x in a.iter_mut().chain(b.iter_mut()) {
        *x = rng.sample(StandardNormal);
    }
    (a, b)
}

fn two_local_interaction(a: &[f64; 3], b: &[f64; 9]) -> Interaction {
    let mut onsite = Mat::<C64>::zeros(2, 2);
    for (k, &ak) in a.iter().enumerate() {
        onsite += pauli(k + 1) * faer::Scale(C64::new(ak, 0.0));
    }
    let mut bond = Mat::<C64>::zeros(4, 4);
    for j in 0..3 {
        for k in 0..3 {
            bond += kron(&pauli(j + 1), &pauli(k + 1)) * faer::Scale(C64::new(b[3 * j + k], 0.0));
        }
    }
    Interaction::new(1, 2, vec![chain_term(&[0], onsite), chain_term(&[0, 1], bond)])
        .expect("well-formed chain interaction")
}

/// Draw a random model and normalize it so the periodic Hamiltonian on `n`
/// sites has unit operator norm.
pub fn sample_random_2local(n: usize, seed: u64) -> Result<RandomTwoLocal> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("chain length {n} < 2")));
    }
    let (a, b) = random_2local_coefficients(seed);
    let raw = two_local_interaction(&a, &b);
    let region = crate::lattice::make_region(1, &[n], 2)?;
    let scale = build_hamiltonian(&raw, &region, &BoundaryCondition::Periodic)?.operator_norm()?;
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("random Hamiltonian vanished".into()));
    }
    Ok(RandomTwoLocal { n, seed, a, b, scale, interaction: raw.scaled(1.0 / scale) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{boundary_sites, make_region};
    use crate::linalg::eigh;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sorted_eigs(h: &HermitianOp) -> Vec<f64> {
        h.eigenvalues().unwrap()
    }

    #[test]
    fn periodic_ising_three_sites() {
        let r = make_region(1, &[3], 2).unwrap();
        let h = build_hamiltonian(&ising_chain(1.0, 0.0), &r, &BoundaryCondition::Periodic).unwrap();
        let ev = sorted_eigs(&h);
        let expect = [-3.0, -3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn field_model_gives_hamming_weights() {
        let r = make_region(1, &[4], 2).unwrap();
        let phi = field_chain(&HermitianOp::from_real_diagonal(&[0.0, 1.0])).unwrap();
        let h = build_hamiltonian(&phi, &r, &BoundaryCondition::Open).unwrap();
        let mut expect: Vec<f64> = (0..16u32).map(|i| i.count_ones() as f64).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in sorted_eigs(&h).iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn open_and_periodic_differ_by_one_bond() {
        for n in 3..=6 {
            let r = make_region(1, &[n], 2).unwrap();
            let model = sample_random_2local(n, 11).unwrap();
            let phi = &model.interaction;
            let hp = build_hamiltonian(phi, &r, &BoundaryCondition::Periodic).unwrap();
            let ho = build_hamiltonian(phi, &r, &BoundaryCondition::Open).unwrap();
            let diff = hp.sub(&ho).unwrap().operator_norm().unwrap();
            let j = phi.coupling_bound().unwrap();
            assert!(diff <= j + 1e-12);
            assert!(diff <= j * boundary_sites(&r).len() as f64 + 1e-12);
        }
    }

    #[test]
    fn translation_invariance() {
        let r = make_region(1, &[4], 2).unwrap();
        let phi = ising_chain(1.0, 0.0);
        let hp = build_hamiltonian(&phi, &r, &BoundaryCondition::Periodic).unwrap();
        assert!(translation_invariance_check(&hp, &r).unwrap() <= 1e-12 * hp.operator_norm().unwrap());
        let ho = build_hamiltonian(&phi, &r, &BoundaryCondition::Open).unwrap();
        assert!(translation_invariance_check(&ho, &r).unwrap() > 0.1);
        assert_eq!(translation_invariance_check(&HermitianOp::identity(16), &r).unwrap(), 0.0);
    }

    #[test]
    fn periodic_two_dimensional_model_is_invariant() {
        let r = make_region(2, &[2, 3], 2).unwrap();
        let zz = kron(&pauli(3), &pauli(1));
        let phi = Interaction::new(
            2,
            2,
            vec![
                Term { offsets: vec![vec![0, 0], vec![0, 1]], matrix: HermitianOp::new(zz.clone()) },
                Term { offsets: vec![vec![0, 0], vec![1, 0]], matrix: HermitianOp::new(zz) },
            ],
        )
        .unwrap();
        let h = build_hamiltonian(&phi, &r, &BoundaryCondition::Periodic).unwrap();
        assert!(translation_invariance_check(&h, &r).unwrap() <= 1e-12 * h.operator_norm().unwrap());
    }

    #[test]
    fn pattern_too_large() {
        let r = make_region(1, &[1], 2).unwrap();
        let phi = ising_chain(1.0, 0.0);
        assert!(matches!(
            build_hamiltonian(&phi, &r, &BoundaryCondition::Open),
            Err(Error::PatternTooLarge(_))
        ));
        assert!(matches!(
            build_hamiltonian(&phi, &r, &BoundaryCondition::Periodic),
            Err(Error::PatternTooLarge(_))
        ));
    }

    #[test]
    fn periodic_placements_one_per_anchor() {
        let r = make_region(1, &[2], 2).unwrap();
        let phi = ising_chain(1.0, 0.0);
        let t = &phi.terms()[1];
        assert_eq!(placements(t, &r, true).unwrap(), vec![vec![0, 1], vec![1, 0]]);
        let r4 = make_region(1, &[4], 2).unwrap();
        assert_eq!(placements(t, &r4, true).unwrap().len(), 4);
        assert_eq!(placements(t, &r4, false).unwrap().len(), 3);
    }

    #[test]
    fn custom_boundary_adds_operators() {
        let r = make_region(1, &[3], 2).unwrap();
        let phi = ising_chain(1.0, 0.5);
        let hp = build_hamiltonian(&phi, &r, &BoundaryCondition::Periodic).unwrap();
        let ho = build_hamiltonian(&phi, &r, &BoundaryCondition::Open).unwrap();
        let wrap = hp.sub(&ho).unwrap();
        let hc = build_hamiltonian(&phi, &r, &BoundaryCondition::Custom(vec![wrap])).unwrap();
        assert!(hc.sub(&hp).unwrap().max_abs_entry() < 1e-14);
    }

    #[test]
    fn random_model_properties() {
        let a = sample_random_2local(5, 42).unwrap();
        let b = sample_random_2local(5, 42).unwrap();
        assert_eq!(a.a.map(f64::to_bits), b.a.map(f64::to_bits));
        assert_eq!(a.b.map(f64::to_bits), b.b.map(f64::to_bits));
        for seed in 0..20 {
            let m = sample_random_2local(5, seed).unwrap();
            let r = make_region(1, &[5], 2).unwrap();
            let h = build_hamiltonian(&m.interaction, &r, &BoundaryCondition::Periodic).unwrap();
            assert_abs_diff_eq!(h.operator_norm().unwrap(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn coefficient_mean_is_zero() {
        let mut sum = 0.0;
        let mut count = 0.0;
        for seed in 0..10_000 {
            let (a, b) = random_2local_coefficients(seed);
            sum += a.iter().chain(b.iter()).sum::<f64>();
            count += 12.0;
        }
        assert!((sum / count).abs() < 0.05);
    }

    #[test]
    fn energy_density_examples() {
        let r = make_region(1, &[3], 2).unwrap();
        let phi = field_chain(&HermitianOp::from_real_diagonal(&[0.0, 1.0])).unwrap();
        let s = eigh(&build_hamiltonian(&phi, &r, &BoundaryCondition::Open).unwrap()).unwrap();
        let (lo, hi) = energy_density_extremes(&s, &r);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-14);
        let r4 = make_region(1, &[4], 2).unwrap();
        let s = eigh(&build_hamiltonian(&ising_chain(1.0, 0.0), &r4, &BoundaryCondition::Periodic).unwrap())
            .unwrap();
        let (lo, hi) = energy_density_extremes(&s, &r4);
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = sample_random_2local(4, 3).unwrap();
        let s = m.interaction.to_json().unwrap();
        let back = Interaction::from_json(&s).unwrap();
        assert_eq!(back.to_record(), m.interaction.to_record());
        assert_eq!(back.to_json().unwrap(), s);
        assert!(Interaction::from_json("{\"nu\":1}").is_err());
    }

    #[test]
    fn build_is_linear() {
        let r = make_region(1, &[4], 2).unwrap();
        let p1 = sample_random_2local(4, 1).unwrap().interaction;
        let p2 = ising_chain(0.7, 0.2);
        for bc in [BoundaryCondition::Open, BoundaryCondition::Periodic] {
            let sum = build_hamiltonian(&p1.plus(&p2).unwrap(), &r, &bc).unwrap();
            let parts = build_hamiltonian(&p1, &r, &bc)
                .unwrap()
                .add(&build_hamiltonian(&p2, &r, &bc).unwrap())
                .unwrap();
            assert!(sum.sub(&parts).unwrap().max_abs_entry() < 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn periodic_random_models_commute_with_translations(seed in 0u64..1000, n in 2usize..7) {
            let r = make_region(1, &[n], 2).unwrap();
            let m = sample_random_2local(n, seed).unwrap();
            let h = build_hamiltonian(&m.interaction, &r, &BoundaryCondition::Periodic).unwrap();
            prop_assert!(translation_invariance_check(&h, &r).unwrap() <= 1e-12);
        }
    }
}
