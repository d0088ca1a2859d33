use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensembles::BETA_MAX;
use crate::error::{Error, Result};
use crate::hamiltonian::{sample_random_2local, transverse_ising_chain, Interaction};
use crate::lattice::MAX_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Typicality,
    Gaps,
    Equivalence,
    Dynamics,
    Ising,
    Eth,
}

impl Kind {
    pub const ALL: [Kind; 6] = [Kind::Typicality, Kind::Gaps, Kind::Equivalence, Kind::Dynamics, Kind::Ising, Kind::Eth];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Typicality => "typicality",
            Kind::Gaps => "gaps",
            Kind::Equivalence => "equivalence",
            Kind::Dynamics => "dynamics",
            Kind::Ising => "ising",
            Kind::Eth => "eth",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }

    /// Label mixed into every random stream so kinds never share draws.
    pub(crate) fn tag(self) -> u64 {
        self as u64 + 1
    }
}

/// Window width as a function of the chain length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaSchedule {
    Fixed(f64),
    /// `δ = coefficient · n`.
    Proportional(f64),
}

impl DeltaSchedule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            DeltaSchedule::Fixed(d) => d,
            DeltaSchedule::Proportional(c) => c * n as f64,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            DeltaSchedule::Fixed(d) | DeltaSchedule::Proportional(d) => d,
        }
    }
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        DeltaSchedule::Proportional(0.02)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerKind {
    #[default]
    Haar,
    Design { depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    pub j: f64,
    pub h: f64,
    pub g: f64,
}

impl Default for IsingParams {
    fn default() -> Self {
        Self { j: 1.0, h: 0.5, g: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Fresh random nearest-neighbour qubit chain per sample.
    Random2local,
    TransverseIsing(IsingParams),
    /// Interaction stored as JSON in the format of [`Interaction::to_json`].
    File(PathBuf),
}

/// A concrete interaction for one sample, with the id recorded alongside it.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub id: u64,
    pub interaction: Interaction,
    /// Factor the raw interaction was divided by.
    pub scale: f64,
}

impl ModelSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, ModelSpec::Random2local)
    }

    /// Interaction for chain length `n` and seed `seed`; fixed models ignore the seed.
    pub fn instantiate(&self, n: usize, seed: u64) -> Result<ModelInstance> {
        match self {
            ModelSpec::Random2local => {
                let m = sample_random_2local(n, seed)?;
                Ok(ModelInstance { id: seed, interaction: m.interaction, scale: m.scale })
            }
            ModelSpec::TransverseIsing(p) => {
                Ok(ModelInstance { id: 0, interaction: transverse_ising_chain(p.j, p.h, p.g), scale: 1.0 })
            }
            ModelSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", path.display())))?;
                let interaction = Interaction::from_json(&text).map_err(|e| Error::Config(e.to_string()))?;
                if interaction.nu() != 1 {
                    return Err(Error::Config("model files must describe a chain (nu = 1)".into()));
                }
                Ok(ModelInstance { id: 0, interaction, scale: 1.0 })
            }
        }
    }
}

fn default_m() -> usize {
    1
}
fn default_beta() -> f64 {
    0.1
}
fn default_samples() -> usize {
    50
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}
fn default_time_samples() -> usize {
    200
}
fn default_t_max() -> f64 {
    1e4
}
fn default_gap_tol() -> f64 {
    1e-10
}
fn default_levels() -> Vec<f64> {
    vec![0.0, 1.0, 2.0]
}
fn default_u() -> f64 {
    2.0 / 3.0
}
fn default_eps() -> f64 {
    0.01
}
fn default_n_max() -> usize {
    100_000
}
fn default_core() -> usize {
    2
}
fn default_lr_times() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0]
}

/// One experiment run. Kind-specific fields are ignored by the other kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub delta_schedule: DeltaSchedule,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// Defaults to `random2local` for typicality, gaps and dynamics and to the
    /// transverse-field Ising chain otherwise.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Periodic chains unless set; `eth` defaults to open.
    #[serde(default)]
    pub periodic: Option<bool>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_true")]
    pub plots: bool,
    /// Record wall-clock time; off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,

    /// dynamics: number of random times and the sampling horizon.
    #[serde(default = "default_time_samples")]
    pub time_samples: usize,
    #[serde(default = "default_t_max")]
    pub t_max: f64,

    /// gaps: degeneracy tolerance relative to the spectral width.
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,

    /// equivalence: chain length whose Gibbs energy density stands in for `u(β)`.
    #[serde(default)]
    pub reference_n: Option<usize>,

    /// ising: single-site levels, energy density, accuracy, subsystem sizes.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_u")]
    pub u: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub m_values: Vec<usize>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,

    /// eth: shell widths, core size and Lieb-Robinson probe times.
    #[serde(default)]
    pub l_values: Vec<usize>,
    #[serde(default = "default_core")]
    pub core_size: usize,
    #[serde(default = "default_lr_times")]
    pub lr_times: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Minimal config of the given kind; every other field takes its default.
    pub fn new(kind: Kind) -> Self {
        let mut c = Self::from_json("{}").expect("defaults parse");
        c.kind = Some(kind);
        c
    }

    pub fn kind(&self) -> Result<Kind> {
        self.kind.ok_or_else(|| Error::Config("experiment kind not set".into()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        Ok(match (&self.model, self.kind()?) {
            (Some(m), _) => m.clone(),
            (None, Kind::Typicality | Kind::Gaps | Kind::Dynamics) => ModelSpec::Random2local,
            (None, _) => ModelSpec::TransverseIsing(IsingParams::default()),
        })
    }

    pub fn is_periodic(&self) -> Result<bool> {
        Ok(self.periodic.unwrap_or(self.kind()? != Kind::Eth))
    }

    pub fn reference_size(&self) -> usize {
        self.reference_n
            .unwrap_or_else(|| self.n_values.iter().copied().max().unwrap_or(0) + 2)
    }

    /// Checks every field before any computation runs. Range problems are
    /// [`Error::Config`]; chains beyond the dense cap are [`Error::Infeasible`].
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=BETA_MAX).contains(&self.beta) {
            return bad(format!("beta must lie in [0, {BETA_MAX}], got {}", self.beta));
        }
        let d = self.delta_schedule.value();
        if !(d > 0.0) || !d.is_finite() {
            return bad(format!("delta must be positive, got {d}"));
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if let SamplerKind::Design { depth: 0 } = self.sampler {
            return bad("design depth must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.time_samples == 0 || !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return bad("need time_samples ≥ 1 and a finite t_max > 0".into());
        }
        if !(self.gap_tol > 0.0) {
            return bad(format!("gap_tol must be positive, got {}", self.gap_tol));
        }
        if let Some(ModelSpec::TransverseIsing(p)) = &self.model {
            if ![p.j, p.h, p.g].iter().all(|x| x.is_finite()) {
                return bad("Ising couplings must be finite".into());
            }
        }
        match kind {
            Kind::Ising => {
                if self.levels.len() < 2 || self.levels.iter().any(|x| !x.is_finite()) {
                    return bad("levels need at least two finite energies".into());
                }
                if !self.u.is_finite() {
                    return bad("u must be finite".into());
                }
                if !(self.eps > 0.0 && self.eps < 2.0) {
                    return bad(format!("eps must lie in (0, 2), got {}", self.eps));
                }
                if self.m_values.contains(&0) {
                    return bad("m_values must be positive".into());
                }
                if self.n_max == 0 {
                    return bad("n_max must be positive".into());
                }
            }
            _ => {
                for &n in &self.n_values {
                    if n < 2 {
                        return bad(format!("chain length {n} < 2"));
                    }
                    if self.m > n {
                        return bad(format!("m = {} exceeds n = {n}", self.m));
                    }
                    check_feasible(n)?;
                }
            }
        }
        if kind == Kind::Equivalence && !self.n_values.is_empty() {
            let r = self.reference_size();
            if r < 2 {
                return bad(format!("reference_n {r} < 2"));
            }
            check_feasible(r)?;
        }
        if kind == Kind::Eth {
            if self.core_size == 0 {
                return bad("core_size must be positive".into());
            }
            if self.lr_times.len() < 2 || self.lr_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return bad("lr_times needs at least two nonnegative times".into());
            }
            for &n in &self.n_values {
                if self.core_size >= n {
                    return bad(format!("core of {} sites does not fit in n = {n}", self.core_size));
                }
            }
        }
        Ok(())
    }
}

fn check_feasible(n: usize) -> Result<()> {
    if n >= 64 || (1usize << n) > MAX_DIM {
        return Err(Error::Infeasible { dim: 1u128 << n.min(127) });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let c = ExperimentConfig::from_json(
            r#"{"kind":"typicality","n_values":[4,5],"m":1,"beta":0.1,
                "delta_schedule":{"proportional":0.02},"samples":3,"master_seed":9,
                "sampler":{"design":{"depth":4}},"model":"random2local","output_dir":"x"}"#,
        )
        .unwrap();
        assert_eq!(c.kind, Some(Kind::Typicality));
        assert_eq!(c.sampler, SamplerKind::Design { depth: 4 });
        assert!((c.delta_schedule.delta(5) - 0.1).abs() < 1e-15);
        c.validate().unwrap();
        let t = ExperimentConfig::from_json(r#"{"kind":"eth","model":{"transverse_ising":{"j":1,"h":0.5,"g":0.3}}}"#)
            .unwrap();
        assert_eq!(t.model_spec().unwrap(), ModelSpec::TransverseIsing(IsingParams::default()));
        assert!(!t.is_periodic().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"kind":"gaps","bogus":1}"#), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"kind":"gaps","sampler":{"design":{"depth":2,"x":1}}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Kind::Typicality);
        c.n_values = vec![4];
        c.validate().unwrap();
        for f in [
            |c: &mut ExperimentConfig| c.beta = -1.0,
            |c: &mut ExperimentConfig| c.samples = 0,
            |c: &mut ExperimentConfig| c.delta_schedule = DeltaSchedule::Fixed(0.0),
            |c: &mut ExperimentConfig| c.m = 5,
            |c: &mut ExperimentConfig| c.sampler = SamplerKind::Design { depth: 0 },
            |c: &mut ExperimentConfig| c.n_values = vec![1],
            |c: &mut ExperimentConfig| c.workers = Some(0),
        ] {
            let mut bad = c.clone();
            f(&mut bad);
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
        c.n_values = vec![15];
        assert!(matches!(c.validate(), Err(Error::Infeasible { .. })));
        let mut e = ExperimentConfig::new(Kind::Equivalence);
        e.n_values = vec![13];
        assert!(matches!(e.validate(), Err(Error::Infeasible { .. })));
        e.reference_n = Some(13);
        e.validate().unwrap();
    }
}
