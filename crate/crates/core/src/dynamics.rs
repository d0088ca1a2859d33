//! Gap statistics, equilibration bounds and exact time evolution.

use std::collections::BTreeMap;

use faer::Mat;

use crate::ensembles::{default_degeneracy_tol, dephase, pseudonorm_distance, BlockMode};
use crate::lattice::Region;
use crate::linalg::{
    entropy, partial_trace_ordered, reduce_pure, trace_norm_distance, DensityMatrix,
    SpectralDecomposition,
};
use crate::sampling::SeededSampler;
use crate::{Error, Result, C64};

/// Histogram bin width in `log10` units.
pub const HISTOGRAM_BIN: f64 = 0.25;

/// `(lower edge in log10, count)` pairs in increasing order.
pub type Histogram = Vec<(f64, usize)>;

#[derive(Debug, Clone, PartialEq)]
pub struct GapStatistics {
    /// Smallest spacing between consecutive eigenvalues.
    pub min_eigenvalue_gap: f64,
    /// Smallest spacing between consecutive sorted gaps `E_i − E_j`, `i > j`.
    pub min_gap_spacing: f64,
    pub gap_degeneracy: usize,
    /// Whether two eigenvalues coincide within tolerance.
    pub degenerate_levels: bool,
    pub eigenvalue_gap_histogram: Histogram,
    pub gap_gap_histogram: Histogram,
}

/// Bin positive values by `floor(log10 x / HISTOGRAM_BIN)`; zeros go to the
/// lowest representable bin.
pub fn log10_histogram(values: &[f64]) -> Histogram {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for &x in values {
        let l = x.max(f64::MIN_POSITIVE).log10();
        *bins.entry((l / HISTOGRAM_BIN).floor() as i64).or_default() += 1;
    }
    bins.into_iter().map(|(k, c)| (k as f64 * HISTOGRAM_BIN, c)).collect()
}

/// Default gap tolerance `1e-10 · (E_max − E_min)`.
pub fn default_gap_tol(eigenvalues: &[f64]) -> f64 {
    let (lo, hi) = eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    1e-10 * (hi - lo).max(0.0)
}

/// `D_G = max_E |{(i, j) : i ≠ j, E_i − E_j = E}|` with equality up to `tol`.
pub fn gap_degeneracy(eigenvalues: &[f64], tol: f64) -> Result<GapStatistics> {
    if eigenvalues.len() < 2 {
        return Err(Error::InvalidArgument("need at least two eigenvalues".into()));
    }
    let mut e = eigenvalues.to_vec();
    e.sort_by(f64::total_cmp);
    let level_gaps: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    let mut gaps = Vec::with_capacity(e.len() * (e.len() - 1) / 2);
    for i in 0..e.len() {
        for j in 0..i {
            gaps.push(e[i] - e[j]);
        }
    }
    gaps.sort_by(f64::total_cmp);
    let spacings: Vec<f64> = gaps.windows(2).map(|w| w[1] - w[0]).collect();

    // Chain-cluster the sorted nonnegative gaps. Pairs with equal levels occur
    // in both orders, so the cluster at zero counts twice.
    let mut dg = 0;
    let mut start = 0;
    for k in 1..=gaps.len() {
        if k == gaps.len() || gaps[k] - gaps[k - 1] > tol {
            let size = k - start;
            let weight = if gaps[start] <= tol { 2 } else { 1 };
            dg = dg.max(size * weight);
            start = k;
        }
    }
    let min_eigenvalue_gap = level_gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(GapStatistics {
        min_eigenvalue_gap,
        min_gap_spacing: spacings.iter().cloned().fold(f64::INFINITY, f64::min),
        gap_degeneracy: dg,
        degenerate_levels: min_eigenvalue_gap <= tol,
        eigenvalue_gap_histogram: log10_histogram(&level_gaps),
        gap_gap_histogram: log10_histogram(&spacings),
    })
}

/// `d_eff = 1/Σ λ_i² = exp(S_2)`.
pub fn effective_dimension(lambda: &[f64]) -> Result<f64> {
    Ok(entropy(lambda, 2.0)?.exp())
}

/// `d^m · √(D_G / d_eff)`.
pub fn equilibration_bound(m_sites: usize, d: usize, d_g: usize, d_eff: f64) -> f64 {
    (d as f64).powi(m_sites as i32) * (d_g as f64 / d_eff).sqrt()
}

/// `2ε(S − ε/(1+ε) · S_0)`, the proposed lower bound on `S_2`.
///
/// This is not a valid bound for every distribution: it can exceed `S_2`,
/// most easily at `ε = 1`. See [`renyi_floor_weak`].
pub fn renyi_floor(s: f64, s0: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(2.0 * eps * (s - eps / (1.0 + eps) * s0))
}

/// `2ε(S − ε S_0)`, the looser form used to lower-bound the effective
/// dimension. It holds on moderate supports but fails when `S_0` is huge.
pub fn renyi_floor_weak(s: f64, s0: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(2.0 * eps * (s - eps * s0))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside [0, 1]")));
    }
    Ok(())
}

/// `e^{−iHt} ρ e^{iHt}`.
pub fn time_evolve(rho0: &DensityMatrix, spec: &SpectralDecomposition, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: rho0.dim() });
    }
    let r = spec.to_eigenbasis(rho0.matrix().as_ref());
    let ph: Vec<C64> = spec.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    let n = spec.dim();
    let rt = Mat::from_fn(n, n, |i, j| r[(i, j)] * ph[i] * ph[j].conj());
    Ok(DensityMatrix::from_trusted(spec.from_eigenbasis(rt.as_ref())))
}

/// `e^{−iHt} ψ`.
pub fn time_evolve_pure(psi0: &[C64], spec: &SpectralDecomposition, t: f64) -> Vec<C64> {
    let n = spec.dim();
    let v = &spec.eigenvectors;
    let coeffs: Vec<C64> = (0..n)
        .map(|k| {
            let c: C64 = (0..n).map(|i| v[(i, k)].conj() * psi0[i]).sum();
            c * C64::from_polar(1.0, -spec.eigenvalues[k] * t)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|k| v[(i, k)] * coeffs[k]).sum()).collect()
}

/// Distance used to compare the evolved state with its time average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalMetric {
    /// `‖Tr_{Λ∖keep} ρ(t) − Tr_{Λ∖keep} ρ̄‖₁`.
    Reduced,
    /// `‖ρ(t) − ρ̄‖_[m]`, for degenerate Hamiltonians.
    Interior { m: usize },
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate of the finite-time average of
/// `‖Tr ρ(t) − Tr ρ̄‖₁` with `t` uniform on `[0, T]`; returns mean and standard error.
#[allow(clippy::too_many_arguments)]
pub fn mc_time_average_distance(
    rho0: &DensityMatrix,
    spec: &SpectralDecomposition,
    region: &Region,
    keep: &[usize],
    t_max: f64,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<(f64, f64)> {
    mc_time_average(rho0, spec, region, keep, LocalMetric::Reduced, t_max, samples, sampler)
}

#[allow(clippy::too_many_arguments)]
pub fn mc_time_average(
    rho0: &DensityMatrix,
    spec: &SpectralDecomposition,
    region: &Region,
    keep: &[usize],
    metric: LocalMetric,
    t_max: f64,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<(f64, f64)> {
    check_mc_args(t_max, samples)?;
    let avg = dephase(rho0, spec, default_degeneracy_tol(spec))?;
    let avg_red = partial_trace_ordered(&avg, region, keep)?;
    let mut xs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let t = sampler.uniform() * t_max;
        let rt = time_evolve(rho0, spec, t)?;
        xs.push(match metric {
            LocalMetric::Reduced => trace_norm_distance(&partial_trace_ordered(&rt, region, keep)?, &avg_red)?,
            LocalMetric::Interior { m } => pseudonorm_distance(&rt, &avg, region, m, BlockMode::Interior)?,
        });
    }
    Ok(mean_and_stderr(&xs))
}

/// Pure-state specialization of [`mc_time_average_distance`].
#[allow(clippy::too_many_arguments)]
pub fn mc_time_average_distance_pure(
    psi0: &[C64],
    spec: &SpectralDecomposition,
    region: &Region,
    keep: &[usize],
    t_max: f64,
    samples: usize,
    sampler: &mut SeededSampler,
) -> Result<(f64, f64)> {
    check_mc_args(t_max, samples)?;
    let rho0 = DensityMatrix::from_pure(psi0)?;
    let avg = dephase(&rho0, spec, default_degeneracy_tol(spec))?;
    let avg_red = partial_trace_ordered(&avg, region, keep)?;
    let mut xs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let t = sampler.uniform() * t_max;
        let psi = time_evolve_pure(psi0, spec, t);
        xs.push(trace_norm_distance(&reduce_pure(&psi, region, keep)?, &avg_red)?);
    }
    Ok(mean_and_stderr(&xs))
}

fn check_mc_args(t_max: f64, samples: usize) -> Result<()> {
    if !(t_max > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument(format!("need T > 0 and samples >= 1, got {t_max}, {samples}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{eigenspace_populations, microcanonical, EnergyWindow};
    use crate::hamiltonian::{build_hamiltonian, sample_random_2local, BoundaryCondition};
    use crate::lattice::make_region;
    use crate::linalg::test_util::{random_density, random_distribution, random_hermitian};
    use crate::linalg::eigh;
    use crate::sampling::haar_state_in_subspace;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gap_degeneracy_examples() {
        assert_eq!(gap_degeneracy(&[0.0, 1.0, 3.0], 1e-12).unwrap().gap_degeneracy, 1);
        assert_eq!(gap_degeneracy(&[0.0, 1.0, 2.0], 1e-12).unwrap().gap_degeneracy, 2);
        for k in 2..10 {
            let ladder: Vec<f64> = (0..k).map(|i| i as f64 * 0.7).collect();
            assert_eq!(gap_degeneracy(&ladder, 1e-10).unwrap().gap_degeneracy, k - 1);
        }
        let s = gap_degeneracy(&[0.0, 0.0, 1.0], 1e-12).unwrap();
        assert!(s.degenerate_levels);
        assert_eq!(s.gap_degeneracy, 2);
        assert!(gap_degeneracy(&[1.0], 1e-12).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = log10_histogram(&[1.0, 1.5, 0.01, 0.011]);
        assert_eq!(h, vec![(-2.0, 2), (0.0, 2)]);
        let stats = gap_degeneracy(&[0.0, 1.0, 3.0], 1e-12).unwrap();
        assert_eq!(stats.eigenvalue_gap_histogram.iter().map(|b| b.1).sum::<usize>(), 2);
        assert_eq!(stats.gap_gap_histogram.iter().map(|b| b.1).sum::<usize>(), 2);
    }

    #[test]
    fn effective_dimension_examples() {
        assert_abs_diff_eq!(effective_dimension(&[0.5, 0.5]).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(effective_dimension(&[1.0, 0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(effective_dimension(&[0.125; 8]).unwrap(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn equilibration_bound_examples() {
        assert_abs_diff_eq!(equilibration_bound(1, 2, 1, 16.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(equilibration_bound(2, 2, 3, 1.0), 4.0 * 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(equilibration_bound(2, 2, 1, 1e4), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn renyi_floor_examples() {
        let n = 7f64.ln();
        assert_abs_diff_eq!(renyi_floor(n, n, 1.0).unwrap(), n, epsilon = 1e-15);
        assert_eq!(renyi_floor(1.0, 2.0, 0.0).unwrap(), 0.0);
        assert!(renyi_floor(1.0, 2.0, 1.5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for t in 0..10_000 {
            let p = random_distribution(&mut rng, 2 + t % 30);
            let (s, s0, s2) = (entropy(&p, 1.0).unwrap(), entropy(&p, 0.0).unwrap(), entropy(&p, 2.0).unwrap());
            for k in 1..=10 {
                let eps = k as f64 / 10.0;
                assert!(renyi_floor_weak(s, s0, eps).unwrap() <= s2 + 1e-12);
                assert!(renyi_floor(s, s0, eps).unwrap() >= renyi_floor_weak(s, s0, eps).unwrap());
            }
        }
    }

    #[test]
    fn renyi_floor_fails_on_a_six_outcome_distribution() {
        let raw = [0.13043486, 0.16542718, 0.12080847, 0.36255769, 0.09373771, 0.1270341];
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let (s, s0, s2) = (entropy(&p, 1.0).unwrap(), entropy(&p, 0.0).unwrap(), entropy(&p, 2.0).unwrap());
        assert!(renyi_floor(s, s0, 1.0).unwrap() > s2 + 0.01);
        assert!(renyi_floor_weak(s, s0, 1.0).unwrap() < s2);
    }

    #[test]
    fn weak_renyi_floor_fails_on_huge_supports() {
        // half the mass on one outcome, the rest spread over e^30 outcomes
        let big = 30f64;
        let s = 2f64.ln() + 0.5 * big;
        let s2 = -(0.25f64).ln();
        let eps = s / (2.0 * big);
        assert!(renyi_floor_weak(s, big, eps).unwrap() > s2);
    }

    #[test]
    fn time_evolution_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = eigh(&random_hermitian(&mut rng, 8)).unwrap();
        let rho = random_density(&mut rng, 8);
        assert!(trace_norm_distance(&time_evolve(&rho, &spec, 0.0).unwrap(), &rho).unwrap() < 1e-12);
        let eig = DensityMatrix::from_pure(&spec.vector(3)).unwrap();
        for t in [0.3, 5.0, 100.0] {
            assert!(trace_norm_distance(&time_evolve(&eig, &spec, t).unwrap(), &eig).unwrap() < 1e-12);
        }
        let purity = |r: &DensityMatrix| crate::linalg::trace_product(r.matrix().as_ref(), r.matrix().as_ref()).re;
        let p0 = purity(&rho);
        for k in 0..20 {
            let rt = time_evolve(&rho, &spec, k as f64 * 0.77).unwrap();
            assert_abs_diff_eq!(purity(&rt), p0, epsilon = 1e-10);
            assert_abs_diff_eq!(rt.trace(), 1.0, epsilon = 1e-12);
        }
        let psi = crate::sampling::haar_coefficients(8, &mut SeededSampler::new(1, 1));
        let a = DensityMatrix::from_pure(&time_evolve_pure(&psi, &spec, 2.5)).unwrap();
        let b = time_evolve(&DensityMatrix::from_pure(&psi).unwrap(), &spec, 2.5).unwrap();
        assert!(trace_norm_distance(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn mc_average_examples() {
        let r = make_region(1, &[3], 2).unwrap();
        let m = sample_random_2local(3, 5).unwrap();
        let h = build_hamiltonian(&m.interaction, &r, &BoundaryCondition::Periodic).unwrap();
        let spec = eigh(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let rho = random_density(&mut rng, 8);
        let deph = dephase(&rho, &spec, default_degeneracy_tol(&spec)).unwrap();
        let (mean, _) = mc_time_average_distance(&deph, &spec, &r, &[0], 10.0, 20, &mut SeededSampler::new(1, 0)).unwrap();
        assert!(mean < 1e-9);
        let a = mc_time_average_distance(&rho, &spec, &r, &[0], 10.0, 1, &mut SeededSampler::new(2, 0)).unwrap();
        let b = mc_time_average_distance(&rho, &spec, &r, &[0], 10.0, 1, &mut SeededSampler::new(2, 0)).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        let (pm, _) = mc_time_average(&rho, &spec, &r, &[0], LocalMetric::Interior { m: 1 }, 10.0, 5, &mut SeededSampler::new(3, 0)).unwrap();
        assert!(pm.is_finite() && pm >= 0.0);
        assert!(mc_time_average_distance(&rho, &spec, &r, &[0], 0.0, 1, &mut SeededSampler::new(2, 0)).is_err());
    }

    #[test]
    fn mc_average_below_bound_for_flat_window_state() {
        let n = 6;
        let r = make_region(1, &[n], 2).unwrap();
        let m = sample_random_2local(n, 9).unwrap();
        let h = build_hamiltonian(&m.interaction, &r, &BoundaryCondition::Periodic).unwrap();
        let spec = eigh(&h).unwrap();
        let u = spec.eigenvalues.iter().sum::<f64>() / (spec.dim() * n) as f64;
        let (sub, _) = microcanonical(&spec, &r, EnergyWindow::new(u, 0.02 * n as f64).unwrap()).unwrap();
        let psi = haar_state_in_subspace(&sub, &mut SeededSampler::new(9, 0));
        let span = spec.eigenvalues[spec.dim() - 1] - spec.eigenvalues[0];
        let t_max = 1e3 / span * spec.dim() as f64;
        let (mean, se) = mc_time_average_distance_pure(&psi, &spec, &r, &[0], t_max, 200, &mut SeededSampler::new(9, 1)).unwrap();
        let tol = default_gap_tol(&spec.eigenvalues);
        let dg = gap_degeneracy(&spec.eigenvalues, tol).unwrap().gap_degeneracy;
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let pops = eigenspace_populations(&rho0, &spec, default_degeneracy_tol(&spec)).unwrap();
        let deff = effective_dimension(&pops).unwrap();
        assert!(mean <= equilibration_bound(1, 2, dg, deff) + 3.0 * se);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gap_degeneracy_is_affine_invariant(
            levels in proptest::collection::vec(-5i32..5, 2..12),
            a in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
            b in -10.0f64..10.0,
            shift in 0usize..12,
        ) {
            let e: Vec<f64> = levels.iter().map(|&x| x as f64).collect();
            let tol = 1e-9;
            let base = gap_degeneracy(&e, tol).unwrap().gap_degeneracy;
            let mut t: Vec<f64> = e.iter().map(|x| a * x + b).collect();
            let len = t.len();
            t.rotate_left(shift % len);
            prop_assert_eq!(gap_degeneracy(&t, tol * a.abs()).unwrap().gap_degeneracy, base);
        }
    }
}
