//! Experiment configuration (TOML). Every section is optional; missing keys
//! take the defaults of the hyperboloid experiment. Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hyperlangevin::algebra::{HamiltonianKind, LieAlgebra, ModelParams};
use hyperlangevin::coords::Sign;
use hyperlangevin::fpk::{GridSpec, ThetaBoundary};
use hyperlangevin::sde::{EnsembleConfig, Scheme};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraName {
    Affine,
    So3,
    Abelian2,
    Abelian3,
}

impl AlgebraName {
    pub fn build(self) -> LieAlgebra<f64> {
        match self {
            AlgebraName::Affine => LieAlgebra::affine(),
            AlgebraName::So3 => LieAlgebra::so3(),
            AlgebraName::Abelian2 => LieAlgebra::abelian(2),
            AlgebraName::Abelian3 => LieAlgebra::abelian(3),
        }
    }
}

/// A scalar (times the identity), a diagonal, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn dense(&self, n: usize, key: &str) -> Result<Vec<f64>, CliError> {
        let mut m = vec![0.0; n * n];
        match self {
            MatrixSpec::Scalar(s) => (0..n).for_each(|i| m[i * n + i] = *s),
            MatrixSpec::Diagonal(d) => {
                if d.len() != n {
                    return Err(CliError::Config(format!("{key}: expected {n} diagonal entries, got {}", d.len())));
                }
                (0..n).for_each(|i| m[i * n + i] = d[i]);
            }
            MatrixSpec::Full(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::Config(format!("{key}: expected a {n}x{n} matrix")));
                }
                for (i, r) in rows.iter().enumerate() {
                    m[i * n..(i + 1) * n].copy_from_slice(r);
                }
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSign {
    Plus,
    Minus,
    /// Sign for which the separated candidate is static.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSection {
    pub g: MatrixSpec,
    pub gamma: MatrixSpec,
    /// Defaults to `gamma / beta`.
    pub diffusion: Option<MatrixSpec>,
    pub beta: f64,
    pub einstein: bool,
    pub hamiltonian: HamiltonianKind,
    pub k: f64,
    pub drift_sign: DriftSign,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            g: MatrixSpec::Scalar(1.0),
            gamma: MatrixSpec::Scalar(1.0),
            diffusion: None,
            beta: 1.0,
            einstein: true,
            hamiltonian: HamiltonianKind::InverseRho,
            k: 0.0,
            drift_sign: DriftSign::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub initial: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    /// Write every n-th step.
    pub record_every: usize,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            initial: vec![0.0, 1.0],
            t_end: 5.0,
            dt: 1e-3,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub scheme: Scheme,
    pub n_traj: usize,
    pub t_burn: f64,
    pub t_sample: f64,
    pub sample_every: f64,
    pub dt: f64,
    pub seed: u64,
    pub rho_min: f64,
    pub theta_max: f64,
    pub theta_boundary: ThetaBoundary,
    pub initial: Option<Vec<f64>>,
    /// Write every sample to `samples.csv`.
    pub write_samples: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            scheme: Scheme::PolarFPK,
            n_traj: 100_000,
            t_burn: 10.0,
            t_sample: 9.0,
            sample_every: 1.0,
            dt: 2e-3,
            seed: 1,
            rho_min: 1e-3,
            theta_max: 8.0,
            theta_boundary: ThetaBoundary::Absorbing,
            initial: None,
            write_samples: true,
        }
    }
}

/// Missing grid keys follow `GridSpec::default_for(beta)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub n_rho: Option<usize>,
    pub theta_max: Option<f64>,
    pub n_theta: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FpkSection {
    pub t_max: f64,
    pub dt: f64,
    pub tol: f64,
    pub theta_boundary: ThetaBoundary,
}

impl Default for FpkSection {
    fn default() -> Self {
        Self {
            t_max: 30.0,
            dt: 0.01,
            tol: 1e-6,
            theta_boundary: ThetaBoundary::Absorbing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigensSection {
    /// Defaults to `k / D`.
    pub a: Option<f64>,
    pub n_grid: usize,
    pub n_modes: usize,
}

impl Default for EigensSection {
    fn default() -> Self {
        Self {
            a: None,
            n_grid: 800,
            n_modes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    /// Defaults to `k / D`.
    pub a: Option<f64>,
    /// Points per axis for the density tables and the mode scan.
    pub n_table: usize,
    /// Also solve the PDE and report its mode.
    pub include_pde: bool,
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        Self {
            a: None,
            n_table: 400,
            include_pde: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub bins_rho: usize,
    pub bins_theta: usize,
    /// Upper edge of the radial bins in units of `1/sqrt(beta)`.
    pub rho_extent: f64,
    /// Cartesian comparisons: cells per axis and half-width in standard
    /// deviations.
    pub bins_per_axis: usize,
    pub half_width: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            bins_rho: 40,
            bins_theta: 64,
            rho_extent: 6.0,
            bins_per_axis: 20,
            half_width: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_algebra")]
    pub algebra: AlgebraName,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub fpk: FpkSection,
    #[serde(default)]
    pub eigens: EigensSection,
    #[serde(default)]
    pub equilibrium: EquilibriumSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_algebra() -> AlgebraName {
    AlgebraName::Affine
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            algebra: default_algebra(),
            params: ParamsSection::default(),
            trajectory: TrajectorySection::default(),
            ensemble: EnsembleSection::default(),
            grid: GridSection::default(),
            fpk: FpkSection::default(),
            eigens: EigensSection::default(),
            equilibrium: EquilibriumSection::default(),
            compare: CompareSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Built objects shared by the commands.
pub struct Model {
    pub algebra: LieAlgebra<f64>,
    pub params: ModelParams<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without running an experiment.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let model = self.model()?;
        let n = model.algebra.dim();
        let t = &self.trajectory;
        if t.initial.len() != n {
            return Err(CliError::Config(format!("trajectory.initial: expected {n} entries")));
        }
        if !(t.dt > 0.0) || !(t.t_end >= 0.0) || t.record_every == 0 {
            return Err(CliError::Config("trajectory: need dt > 0, t_end >= 0, record_every >= 1".into()));
        }
        let e = self.ensemble_config(Sign::Minus);
        e.snapshot_times().map_err(CliError::from)?;
        if e.scheme == Scheme::PolarFPK && self.algebra != AlgebraName::Affine {
            return Err(CliError::Config("ensemble.scheme = \"polar_fpk\" needs algebra = \"affine\"".into()));
        }
        self.grid_spec()?.validate().map_err(|e| CliError::Config(format!("grid: {e}")))?;
        let f = &self.fpk;
        if !(f.t_max > 0.0) || !(f.dt > 0.0) || !(f.tol > 0.0) {
            return Err(CliError::Config("fpk: need t_max, dt, tol > 0".into()));
        }
        if self.eigens.n_grid < 200 || self.eigens.n_modes == 0 {
            return Err(CliError::Config("eigens: need n_grid >= 200 and n_modes >= 1".into()));
        }
        if self.equilibrium.n_table < 3 {
            return Err(CliError::Config("equilibrium.n_table must be at least 3".into()));
        }
        let c = &self.compare;
        if c.bins_rho == 0 || c.bins_theta == 0 || c.bins_per_axis == 0 || !(c.half_width > 0.0) || !(c.rho_extent > 0.0) {
            return Err(CliError::Config("compare: bin counts and extents must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let algebra = self.algebra.build();
        let n = algebra.dim();
        let p = &self.params;
        let g = p.g.dense(n, "params.g")?;
        let gamma = p.gamma.dense(n, "params.gamma")?;
        if !(p.beta > 0.0) {
            return Err(CliError::Config("params.beta must be positive".into()));
        }
        let diffusion = match &p.diffusion {
            Some(d) => d.dense(n, "params.diffusion")?,
            None => gamma.iter().map(|x| x / p.beta).collect(),
        };
        let params = ModelParams::new(n, g, gamma, diffusion, p.beta, p.k, p.hamiltonian, p.einstein)
            .map_err(|e| CliError::Config(format!("params: {e}")))?;
        Ok(Model { algebra, params })
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let d = GridSpec::default_for(self.params.beta);
        let g = &self.grid;
        Ok(GridSpec {
            rho_min: g.rho_min.unwrap_or(d.rho_min),
            rho_max: g.rho_max.unwrap_or(d.rho_max),
            n_rho: g.n_rho.unwrap_or(d.n_rho),
            theta_max: g.theta_max.unwrap_or(d.theta_max),
            n_theta: g.n_theta.unwrap_or(d.n_theta),
        })
    }

    pub fn ensemble_config(&self, sign: Sign) -> EnsembleConfig {
        let e = &self.ensemble;
        EnsembleConfig {
            n_traj: e.n_traj,
            t_burn: e.t_burn,
            t_sample: e.t_sample,
            sample_every: e.sample_every,
            dt: e.dt,
            seed: e.seed,
            scheme: e.scheme,
            rho_min: e.rho_min,
            theta_max: e.theta_max,
            theta_boundary: e.theta_boundary,
            drift_sign: sign,
            initial: e.initial.clone(),
        }
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.ensemble.seed = s;
        }
        if let Some(o) = out {
            self.output.dir = o;
        }
        self
    }
}
