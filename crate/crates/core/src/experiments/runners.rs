use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Kind, ModelInstance, ModelSpec, SamplerKind};
use super::output::{mean_std, ExperimentRecord};
use super::svg::{line_plot, Series};
use crate::dynamics::{
    default_gap_tol, effective_dimension, equilibration_bound, gap_degeneracy, mc_time_average,
    mc_time_average_distance_pure, LocalMetric,
};
use crate::ensembles::{
    default_degeneracy_tol, density_at_beta, dephase, eigenspace_populations, gibbs_level_weights, gibbs_state,
    microcanonical, population_entropy, solve_beta_from_levels, weighted_microcanonical, EnergyWindow,
    MicrocanonicalSubspace,
};
use crate::error::{Error, Result};
use crate::eth::{
    axis_probes, coherence_check, estimate_lr_constants, extended_hamiltonian, locality_check, omega_e,
    shell_region,
};
use crate::hamiltonian::{build_hamiltonian, pauli, BoundaryCondition, Interaction, Term};
use crate::ising::{min_bath_size, sharp_distance, single_site_gibbs, LevelSpec};
use crate::lattice::{make_region, Region};
use crate::linalg::{
    eigh, entropy, partial_trace, reduce_pure, trace_norm_distance, DensityMatrix, HermitianOp,
    SpectralDecomposition,
};
use crate::sampling::{design_state_in_subspace, haar_state_in_subspace, stream_for, SeededSampler};
use crate::C64;

/// What a runner hands back before files are laid out.
#[derive(Debug, Default)]
pub struct Partial {
    pub records: Vec<ExperimentRecord>,
    pub flags: Vec<String>,
    pub notes: Value,
    /// Additional data files (name, body).
    pub files: Vec<(String, String)>,
    pub plots: Vec<(String, String)>,
}

struct Chain {
    region: Region,
    h: HermitianOp,
    model: ModelInstance,
    spec: SpectralDecomposition,
}

fn bc(periodic: bool) -> BoundaryCondition {
    if periodic {
        BoundaryCondition::Periodic
    } else {
        BoundaryCondition::Open
    }
}

fn model_seed(cfg: &ExperimentConfig, kind: Kind, n: usize, sample: usize) -> u64 {
    stream_for(&[cfg.master_seed, kind.tag(), 0x6d6f_6465_6c, n as u64, sample as u64])
}

fn state_sampler(cfg: &ExperimentConfig, kind: Kind, n: usize, sample: usize) -> SeededSampler {
    SeededSampler::for_labels(cfg.master_seed, &[kind.tag(), n as u64, sample as u64])
}

fn diagonalized_chain(cfg: &ExperimentConfig, model: &ModelSpec, kind: Kind, n: usize, sample: usize) -> Result<Chain> {
    let model = model.instantiate(n, model_seed(cfg, kind, n, sample))?;
    let region = make_region(1, &[n], model.interaction.local_dim())?;
    let h = build_hamiltonian(&model.interaction, &region, &bc(cfg.is_periodic()?))?;
    let spec = eigh(&h)?;
    Ok(Chain { region, h, model, spec })
}

fn gibbs_density(levels: &[f64], sites: usize, beta: f64) -> f64 {
    density_at_beta(levels, levels, sites, beta)
}

/// Gibbs state of the open Hamiltonian on `m` sites, keeping only the terms
/// that fit inside.
pub fn local_gibbs(phi: &Interaction, m: usize, beta: f64) -> Result<DensityMatrix> {
    let extent = |t: &Term| {
        let (lo, hi) = t.offsets.iter().fold((i64::MAX, i64::MIN), |(a, b), o| (a.min(o[0]), b.max(o[0])));
        (hi - lo + 1) as usize
    };
    let terms: Vec<Term> = phi.terms().iter().filter(|t| extent(t) <= m).cloned().collect();
    let region = make_region(1, &[m], phi.local_dim())?;
    let h = if terms.is_empty() {
        HermitianOp::zeros(region.hilbert_dim())
    } else {
        build_hamiltonian(&Interaction::new(1, phi.local_dim(), terms)?, &region, &BoundaryCondition::Open)?
    };
    gibbs_state(&eigh(&h)?, beta)
}

fn sample_state(cfg: &ExperimentConfig, sub: &MicrocanonicalSubspace, sampler: &mut SeededSampler) -> Vec<C64> {
    match cfg.sampler {
        SamplerKind::Haar => haar_state_in_subspace(sub, sampler),
        SamplerKind::Design { depth } => design_state_in_subspace(sub, depth, sampler),
    }
}

fn elapsed(cfg: &ExperimentConfig, start: Instant) -> u64 {
    if cfg.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn tasks(cfg: &ExperimentConfig, samples: usize) -> Vec<(usize, usize)> {
    cfg.n_values.iter().flat_map(|&n| (0..samples).map(move |s| (n, s))).collect()
}

fn per_n_series(records: &[ExperimentRecord], name: &str, f: impl Fn(&ExperimentRecord) -> Option<f64>) -> Series {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(v) = f(r) {
            by_n.entry(r.n).or_default().push(v);
        }
    }
    Series {
        name: name.into(),
        points: by_n
            .into_iter()
            .filter_map(|(n, v)| mean_std(v).map(|(m, s, _)| (n as f64, m, s)))
            .collect(),
    }
}

fn sorted(mut records: Vec<ExperimentRecord>) -> Vec<ExperimentRecord> {
    records.sort_by_key(|r| (r.n, r.sample));
    records
}

// ---------------------------------------------------------------------------

pub fn run_typicality(cfg: &ExperimentConfig) -> Result<Partial> {
    let model = cfg.model_spec()?;
    let records = tasks(cfg, cfg.samples)
        .into_par_iter()
        .map(|(n, sample)| typicality_task(cfg, &model, n, sample))
        .collect::<Result<Vec<_>>>()?;
    let records = sorted(records);
    let mut flags = Vec::new();
    for &n in &cfg.n_values {
        let skipped = records.iter().filter(|r| r.n == n && r.extra("skipped") == Some(1.0)).count();
        if 2 * skipped > cfg.samples {
            flags.push(format!("n={n}: {skipped} of {} samples had an empty window", cfg.samples));
        }
    }
    let plot = line_plot(
        "Distance of the reduced random state",
        "n",
        "trace distance",
        &[
            per_n_series(&records, "global Gibbs", |r| r.distance_global_gibbs),
            per_n_series(&records, "local Gibbs", |r| r.distance_local_gibbs),
        ],
    );
    Ok(Partial { records, flags, notes: Value::Null, files: vec![], plots: vec![("typicality.svg".into(), plot)] })
}

fn typicality_task(cfg: &ExperimentConfig, model: &ModelSpec, n: usize, sample: usize) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let kind = Kind::Typicality;
    let chain = diagonalized_chain(cfg, model, kind, n, sample)?;
    let e = &chain.spec.eigenvalues;
    let u = gibbs_density(e, n, cfg.beta);
    let delta = cfg.delta_schedule.delta(n);
    let mut sampler = state_sampler(cfg, kind, n, sample);
    let mut rec = ExperimentRecord::new(kind, n, cfg.m, sample);
    rec.model_id = chain.model.id;
    rec.seed = sampler.stream_index();
    rec.beta_used = Some(cfg.beta);
    rec.u = Some(u);
    rec.delta = Some(delta);
    let keep: Vec<usize> = (0..cfg.m).collect();
    let gamma = gibbs_state(&chain.spec, cfg.beta)?;
    let gamma_red = partial_trace(&gamma, &chain.region, &keep)?;
    let local = local_gibbs(&chain.model.interaction, cfg.m, cfg.beta)?;
    match microcanonical(&chain.spec, &chain.region, EnergyWindow::new(u, delta)?) {
        Ok((sub, tau)) => {
            let psi = sample_state(cfg, &sub, &mut sampler);
            let rho = reduce_pure(&psi, &chain.region, &keep)?;
            rec.dim_t = Some(sub.dim());
            rec.distance_global_gibbs = Some(trace_norm_distance(&rho, &gamma_red)?);
            rec.distance_local_gibbs = Some(trace_norm_distance(&rho, &local)?);
            let tau_red = partial_trace(&tau, &chain.region, &keep)?;
            rec.set("delta_mn", Some(trace_norm_distance(&tau_red, &gamma_red)?));
            rec.set("skipped", Some(0.0));
        }
        Err(Error::EmptyWindow { .. }) => {
            rec.dim_t = Some(0);
            rec.set("delta_mn", None);
            rec.set("skipped", Some(1.0));
        }
        Err(err) => return Err(err),
    }
    rec.runtime_ms = elapsed(cfg, start);
    Ok(rec)
}

// ---------------------------------------------------------------------------

pub fn run_gapstats(cfg: &ExperimentConfig) -> Result<Partial> {
    let model = cfg.model_spec()?;
    let results = tasks(cfg, cfg.samples)
        .into_par_iter()
        .map(|(n, sample)| gaps_task(cfg, &model, n, sample))
        .collect::<Result<Vec<_>>>()?;
    let mut hist: BTreeMap<usize, [BTreeMap<i64, usize>; 2]> = BTreeMap::new();
    let mut records = Vec::with_capacity(results.len());
    for (rec, stats) in results {
        let slot = hist.entry(rec.n).or_default();
        for (k, h) in [&stats.eigenvalue_gap_histogram, &stats.gap_gap_histogram].into_iter().enumerate() {
            for &(lo, c) in h {
                *slot[k].entry((lo * 4.0).round() as i64).or_default() += c;
            }
        }
        records.push(rec);
    }
    let records = sorted(records);
    let mut files = Vec::new();
    for (n, [ev, gg]) in &hist {
        let mut body = String::from("histogram,log10_lower,count\n");
        for (name, h) in [("eigenvalue_gaps", ev), ("gap_spacings", gg)] {
            for (k, c) in h {
                body.push_str(&format!("{name},{},{c}\n", *k as f64 / 4.0));
            }
        }
        files.push((format!("gaps_hist_n{n}.csv"), body));
    }
    let mut counts = serde_json::Map::new();
    for &n in &cfg.n_values {
        let rows: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n == n).collect();
        counts.insert(
            n.to_string(),
            json!({
                "models": rows.len(),
                "degenerate_eigenvalues": rows.iter().filter(|r| r.extra("degenerate_levels") == Some(1.0)).count(),
                "degenerate_gaps": rows.iter().filter(|r| r.d_g.unwrap_or(1) > 1).count(),
            }),
        );
    }
    let plot = line_plot(
        "Smallest eigenvalue gap",
        "n",
        "log10 min gap",
        &[per_n_series(&records, "min gap", |r| r.extra("min_eigenvalue_gap").map(|g| g.max(1e-300).log10()))],
    );
    Ok(Partial { records, flags: vec![], notes: json!({ "degeneracy_counts": counts }), files, plots: vec![("gaps.svg".into(), plot)] })
}

fn gaps_task(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    n: usize,
    sample: usize,
) -> Result<(ExperimentRecord, crate::dynamics::GapStatistics)> {
    let start = Instant::now();
    let kind = Kind::Gaps;
    let inst = model.instantiate(n, model_seed(cfg, kind, n, sample))?;
    let region = make_region(1, &[n], inst.interaction.local_dim())?;
    let eigs = build_hamiltonian(&inst.interaction, &region, &bc(cfg.is_periodic()?))?.eigenvalues()?;
    let tol = cfg.gap_tol * default_gap_tol(&eigs) / 1e-10;
    let stats = gap_degeneracy(&eigs, tol)?;
    let mut rec = ExperimentRecord::new(kind, n, cfg.m, sample);
    rec.model_id = inst.id;
    rec.d_g = Some(stats.gap_degeneracy);
    rec.set("min_eigenvalue_gap", Some(stats.min_eigenvalue_gap));
    rec.set("min_gap_spacing", Some(stats.min_gap_spacing));
    rec.set("degenerate_levels", Some(stats.degenerate_levels as u8 as f64));
    rec.set("tolerance", Some(tol));
    rec.runtime_ms = elapsed(cfg, start);
    Ok((rec, stats))
}

// ---------------------------------------------------------------------------

/// Triangular density: 1 at `u`, falling to 0 at `u − 2δ`, zero above `u`.
pub fn triangle_weight(u: f64, delta: f64) -> impl Fn(f64) -> f64 {
    move |x| if x > u { 0.0 } else { (1.0 - (u - x) / (2.0 * delta)).max(0.0) }
}

pub fn run_equivalence(cfg: &ExperimentConfig) -> Result<Partial> {
    if cfg.n_values.is_empty() {
        return Ok(Partial::default());
    }
    let model = cfg.model_spec()?;
    let n_ref = cfg.reference_size();
    let inst = model.instantiate(n_ref, model_seed(cfg, Kind::Equivalence, n_ref, 0))?;
    let ref_region = make_region(1, &[n_ref], inst.interaction.local_dim())?;
    let ref_levels = build_hamiltonian(&inst.interaction, &ref_region, &bc(cfg.is_periodic()?))?.eigenvalues()?;
    let u = gibbs_density(&ref_levels, n_ref, cfg.beta);
    let records = cfg
        .n_values
        .par_iter()
        .map(|&n| equivalence_task(cfg, &model, n, u))
        .collect::<Result<Vec<_>>>()?;
    let records = sorted(records);
    let plot = line_plot(
        "Reduced microcanonical vs canonical",
        "n",
        "trace distance",
        &[
            per_n_series(&records, "fixed beta", |r| r.extra("distance_fixed_beta")),
            per_n_series(&records, "beta_n", |r| r.distance_global_gibbs),
            per_n_series(&records, "triangle f", |r| r.extra("distance_triangle")),
            per_n_series(&records, "local Gibbs", |r| r.distance_local_gibbs),
        ],
    );
    Ok(Partial {
        records,
        flags: vec![],
        notes: json!({ "reference_n": n_ref, "u": u }),
        files: vec![],
        plots: vec![("equivalence.svg".into(), plot)],
    })
}

fn equivalence_task(cfg: &ExperimentConfig, model: &ModelSpec, n: usize, u: f64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let kind = Kind::Equivalence;
    let chain = diagonalized_chain(cfg, model, kind, n, 0)?;
    let e = &chain.spec.eigenvalues;
    let delta = cfg.delta_schedule.delta(n);
    let keep: Vec<usize> = (0..cfg.m).collect();
    let reduce = |rho: &DensityMatrix| partial_trace(rho, &chain.region, &keep);
    let beta_n = solve_beta_from_levels(e, e, n, u)?;
    let fixed = reduce(&gibbs_state(&chain.spec, cfg.beta)?)?;
    let solved = reduce(&gibbs_state(&chain.spec, beta_n)?)?;
    let local = local_gibbs(&chain.model.interaction, cfg.m, cfg.beta)?;
    let mut rec = ExperimentRecord::new(kind, n, cfg.m, 0);
    rec.model_id = chain.model.id;
    rec.beta_used = Some(beta_n);
    rec.u = Some(u);
    rec.delta = Some(delta);
    let (dist_n, dist_fixed, dist_local) = match microcanonical(&chain.spec, &chain.region, EnergyWindow::new(u, delta)?) {
        Ok((sub, tau)) => {
            rec.dim_t = Some(sub.dim());
            let t = reduce(&tau)?;
            (
                Some(trace_norm_distance(&t, &solved)?),
                Some(trace_norm_distance(&t, &fixed)?),
                Some(trace_norm_distance(&t, &local)?),
            )
        }
        Err(Error::EmptyWindow { .. }) => {
            rec.dim_t = Some(0);
            (None, None, None)
        }
        Err(err) => return Err(err),
    };
    rec.distance_global_gibbs = dist_n;
    rec.distance_local_gibbs = dist_local;
    let tri = reduce(&weighted_microcanonical(&chain.spec, &chain.region, &triangle_weight(u, delta), u)?)?;
    rec.set("beta_fixed", Some(cfg.beta));
    rec.set("beta_gap", Some((beta_n - cfg.beta).abs()));
    rec.set("beta_residual", Some((gibbs_density(e, n, beta_n) - u).abs()));
    rec.set("distance_fixed_beta", dist_fixed);
    rec.set("distance_triangle", Some(trace_norm_distance(&tri, &fixed)?));
    rec.set("distance_triangle_beta_n", Some(trace_norm_distance(&tri, &solved)?));
    rec.runtime_ms = elapsed(cfg, start);
    Ok(rec)
}

// ---------------------------------------------------------------------------

pub fn run_dynamics(cfg: &ExperimentConfig) -> Result<Partial> {
    let model = cfg.model_spec()?;
    let records = tasks(cfg, cfg.samples)
        .into_par_iter()
        .map(|(n, sample)| dynamics_task(cfg, &model, n, sample))
        .collect::<Result<Vec<_>>>()?;
    let records = sorted(records);
    let mut flags = Vec::new();
    for r in &records {
        if r.extra("pseudonorm") == Some(1.0) {
            flags.push(format!("n={} sample={}: degenerate spectrum, pseudonorm metric used", r.n, r.sample));
        }
    }
    let plot = line_plot(
        "Time-averaged distance from equilibrium",
        "n",
        "trace distance",
        &[
            per_n_series(&records, "MC mean", |r| r.extra("mc_mean")),
            per_n_series(&records, "bound", |r| r.extra("bound")),
            per_n_series(&records, "avg vs Gibbs", |r| r.extra("distance_avg_gibbs")),
        ],
    );
    Ok(Partial { records, flags, notes: Value::Null, files: vec![], plots: vec![("dynamics.svg".into(), plot)] })
}

/// Equal-weight superposition of the window eigenvectors with random phases.
pub fn flat_window_state(sub: &MicrocanonicalSubspace, sampler: &mut SeededSampler) -> Vec<C64> {
    let k = sub.dim();
    let amp = 1.0 / (k as f64).sqrt();
    let phases: Vec<C64> =
        (0..k).map(|_| C64::from_polar(amp, 2.0 * std::f64::consts::PI * sampler.uniform())).collect();
    (0..sub.basis.nrows()).map(|i| (0..k).map(|j| sub.basis[(i, j)] * phases[j]).sum()).collect()
}

fn dynamics_task(cfg: &ExperimentConfig, model: &ModelSpec, n: usize, sample: usize) -> Result<ExperimentRecord> {
    const COLUMNS: [&str; 9] = [
        "bound",
        "mc_mean",
        "mc_stderr",
        "beta_n",
        "s_gibbs_beta_n",
        "distance_avg_gibbs",
        "pseudonorm",
        "skipped",
        "t_max",
    ];
    let start = Instant::now();
    let kind = Kind::Dynamics;
    let chain = diagonalized_chain(cfg, model, kind, n, sample)?;
    let spec = &chain.spec;
    let e = &spec.eigenvalues;
    let u = gibbs_density(e, n, cfg.beta);
    let delta = cfg.delta_schedule.delta(n);
    let mut sampler = state_sampler(cfg, kind, n, sample);
    let mut rec = ExperimentRecord::new(kind, n, cfg.m, sample);
    rec.model_id = chain.model.id;
    rec.seed = sampler.stream_index();
    rec.beta_used = Some(cfg.beta);
    rec.u = Some(u);
    rec.delta = Some(delta);
    COLUMNS.iter().for_each(|c| rec.set(c, None));
    rec.set("t_max", Some(cfg.t_max));
    let sub = match microcanonical(spec, &chain.region, EnergyWindow::new(u, delta)?) {
        Ok((sub, _)) => sub,
        Err(Error::EmptyWindow { .. }) => {
            rec.dim_t = Some(0);
            rec.set("skipped", Some(1.0));
            return Ok(rec);
        }
        Err(err) => return Err(err),
    };
    rec.dim_t = Some(sub.dim());
    rec.set("skipped", Some(0.0));
    let psi0 = flat_window_state(&sub, &mut sampler);
    let rho0 = DensityMatrix::from_pure(&psi0)?;
    let tol = default_degeneracy_tol(spec);
    let pops = eigenspace_populations(&rho0, spec, tol)?;
    let d_eff = effective_dimension(&pops)?;
    let gaps = gap_degeneracy(e, default_gap_tol(e))?;
    let keep: Vec<usize> = (0..cfg.m).collect();
    let (mean, stderr) = if gaps.degenerate_levels {
        rec.set("pseudonorm", Some(1.0));
        let metric = LocalMetric::Interior { m: cfg.m };
        mc_time_average(&rho0, spec, &chain.region, &keep, metric, cfg.t_max, cfg.time_samples, &mut sampler)?
    } else {
        rec.set("pseudonorm", Some(0.0));
        mc_time_average_distance_pure(&psi0, spec, &chain.region, &keep, cfg.t_max, cfg.time_samples, &mut sampler)?
    };
    let d = chain.model.interaction.local_dim();
    rec.d_g = Some(gaps.gap_degeneracy);
    rec.d_eff = Some(d_eff);
    rec.s_pop = Some(population_entropy(&rho0, spec, tol)?);
    rec.set("bound", Some(equilibration_bound(cfg.m, d, gaps.gap_degeneracy, d_eff)));
    rec.set("mc_mean", Some(mean));
    rec.set("mc_stderr", Some(stderr));
    let energy: f64 = sub.levels.iter().map(|&k| e[k]).sum::<f64>() / sub.dim() as f64;
    let beta_n = solve_beta_from_levels(e, e, n, energy / n as f64)?;
    let w = gibbs_level_weights(spec, beta_n)?;
    rec.set("beta_n", Some(beta_n));
    rec.set("s_gibbs_beta_n", Some(entropy(&w, 1.0)?));
    let avg = partial_trace(&dephase(&rho0, spec, tol)?, &chain.region, &keep)?;
    let gibbs = partial_trace(&DensityMatrix::from_spectral(spec, &w), &chain.region, &keep)?;
    rec.set("distance_avg_gibbs", Some(trace_norm_distance(&avg, &gibbs)?));
    rec.runtime_ms = elapsed(cfg, start);
    Ok(rec)
}

// ---------------------------------------------------------------------------

pub fn run_ising(cfg: &ExperimentConfig) -> Result<Partial> {
    if cfg.m_values.is_empty() {
        return Ok(Partial::default());
    }
    let levels = LevelSpec::shifted(cfg.levels.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let shift = cfg.levels.iter().copied().fold(f64::INFINITY, f64::min);
    let u = cfg.u - shift;
    let (beta, gamma) = single_site_gibbs(&levels, u)?;
    let results = cfg
        .m_values
        .par_iter()
        .map(|&m| -> Result<ExperimentRecord> {
            let start = Instant::now();
            let f = min_bath_size(m, &levels, u, cfg.eps, cfg.n_max)?;
            let mut rec = ExperimentRecord::new(Kind::Ising, f, m, 0);
            rec.beta_used = Some(beta);
            rec.u = Some(cfg.u);
            rec.delta = Some(0.0);
            rec.distance_global_gibbs = sharp_distance(f, m, &levels, u, &gamma)?;
            rec.set("f_m", Some(f as f64));
            rec.set("eps", Some(cfg.eps));
            rec.runtime_ms = elapsed(cfg, start);
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = results;
    records.sort_by_key(|r| (r.n, r.m));
    let mut curve = String::from("m,f_m\n");
    for r in &records {
        curve.push_str(&format!("{},{}\n", r.m, r.n));
    }
    let series = Series { name: "f(m)".into(), points: records.iter().map(|r| (r.m as f64, r.n as f64, 0.0)).collect() };
    let plot = line_plot("Minimal bath size", "m", "f(m)", &[series]);
    let notes = json!({ "beta": beta, "gamma": gamma, "f": records.iter().map(|r| (r.m, r.n)).collect::<Vec<_>>() });
    Ok(Partial {
        records,
        flags: vec![],
        notes,
        files: vec![("ising_curve.csv".into(), curve)],
        plots: vec![("ising.svg".into(), plot)],
    })
}

// ---------------------------------------------------------------------------

/// Evenly spaced eigenstate indices, in ascending order.
pub fn eigenstate_indices(dim: usize, count: usize) -> Vec<usize> {
    let count = count.min(dim);
    (0..count).map(|i| (2 * i + 1) * dim / (2 * count)).collect()
}

pub fn run_eth(cfg: &ExperimentConfig) -> Result<Partial> {
    let model = cfg.model_spec()?;
    let pairs: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| cfg.l_values.iter().map(move |&l| (n, l))).collect();
    let chunks = pairs
        .into_par_iter()
        .map(|(n, l)| eth_task(cfg, &model, n, l))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<ExperimentRecord> = chunks.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.n, a.extra("l").unwrap_or(0.0) as usize, a.extra("eigen_index").unwrap_or(0.0) as usize).cmp(&(
            b.n,
            b.extra("l").unwrap_or(0.0) as usize,
            b.extra("eigen_index").unwrap_or(0.0) as usize,
        ))
    });
    let mut prev: Option<usize> = None;
    let mut k = 0;
    for r in records.iter_mut() {
        if prev != Some(r.n) {
            k = 0;
            prev = Some(r.n);
        }
        r.sample = k;
        k += 1;
    }
    let mut notes = serde_json::Map::new();
    let mut series = Vec::new();
    for &n in &cfg.n_values {
        let mut curve = Vec::new();
        for &l in &cfg.l_values {
            let rows: Vec<&ExperimentRecord> =
                records.iter().filter(|r| r.n == n && r.extra("l") == Some(l as f64)).collect();
            if rows.is_empty() {
                continue;
            }
            let mid = rows[rows.len() / 2];
            let mut d: Vec<f64> = rows.iter().filter_map(|r| r.extra("locality_distance")).collect();
            d.sort_by(f64::total_cmp);
            curve.push(json!({
                "l": l,
                "median_eigenstate": mid.extra("eigen_index"),
                "median_eigenstate_distance": mid.extra("locality_distance"),
                "median_distance": d.get(d.len() / 2),
                "max_coherence_violation": rows.iter().filter_map(|r| r.extra("coherence_violation")).fold(f64::NEG_INFINITY, f64::max),
                "bound_violations": rows.iter().filter(|r| locality_violated(r)).count(),
            }));
        }
        series.push(Series {
            name: format!("n={n}, median eigenstate"),
            points: curve
                .iter()
                .filter_map(|c| Some((c["l"].as_f64()?, c["median_eigenstate_distance"].as_f64()?, 0.0)))
                .collect(),
        });
        notes.insert(n.to_string(), Value::Array(curve));
    }
    let plot = line_plot("Smoothed reduced eigenstate", "shell width l", "trace distance", &series);
    Ok(Partial { records, flags: vec![], notes: Value::Object(notes), files: vec![], plots: vec![("eth.svg".into(), plot)] })
}

/// Certified, non-vacuous row whose distance exceeds the bound.
pub fn locality_violated(r: &ExperimentRecord) -> bool {
    r.extra("certified") == Some(1.0)
        && r.extra("vacuous") == Some(0.0)
        && r.extra("locality_distance").unwrap_or(0.0) > r.extra("bound").unwrap_or(f64::INFINITY)
}

fn eth_task(cfg: &ExperimentConfig, model: &ModelSpec, n: usize, l: usize) -> Result<Vec<ExperimentRecord>> {
    let start = Instant::now();
    let chain = diagonalized_chain(cfg, model, Kind::Eth, n, 0)?;
    let phi = &chain.model.interaction;
    let periodic = cfg.is_periodic()?;
    let first = (n - cfg.core_size) / 2;
    let core: Vec<usize> = (first..first + cfg.core_size).collect();
    let geom = shell_region(&chain.region, periodic, &core, l, phi)?;
    let spec_prime = eigh(&extended_hamiltonian(&geom, phi)?)?;
    let ext = geom.extended_region()?;
    let dists: Vec<usize> = (0..ext.size().min(4)).collect();
    let ops = vec![(pauli(3), pauli(3)), (pauli(1), pauli(3))];
    let probes = axis_probes(&ext, 0, &dists, &ops)?;
    let fit = estimate_lr_constants(&spec_prime, &ext, false, &probes, &cfg.lr_times)?;
    let lr = fit.constants;
    let sigma = lr.sigma(l, geom.range);
    let mut out = Vec::new();
    for k in eigenstate_indices(chain.spec.dim(), cfg.samples) {
        let psi = chain.spec.vector(k);
        let omega = omega_e(&psi, &chain.h, &geom, &spec_prime, sigma)?;
        let coh = coherence_check(&omega, &spec_prime, l, geom.range, lr.c, lr.v);
        let check = locality_check(&omega, &psi, &geom, &lr)?;
        let mut rec = ExperimentRecord::new(Kind::Eth, n, cfg.core_size, 0);
        rec.model_id = chain.model.id;
        rec.u = Some(chain.spec.eigenvalues[k] / n as f64);
        rec.set("l", Some(l as f64));
        rec.set("eigen_index", Some(k as f64));
        rec.set("sigma", Some(sigma));
        rec.set("coherence_violation", Some(coh));
        rec.set("locality_distance", Some(check.distance));
        rec.set("bound", Some(check.bound));
        rec.set("bound_kappa", Some(check.bound_kappa));
        rec.set("certified", Some(check.certified as u8 as f64));
        rec.set("vacuous", Some((l <= geom.range) as u8 as f64));
        rec.set("lr_C", Some(lr.big_c));
        rec.set("lr_c", Some(lr.c));
        rec.set("lr_v", Some(lr.v));
        rec.set("lr_coverage", Some(fit.coverage));
        rec.set("boundary_terms", Some(geom.boundary_terms as f64));
        out.push(rec);
    }
    let ms = elapsed(cfg, start);
    out.iter_mut().for_each(|r| r.runtime_ms = ms);
    Ok(out)
}
