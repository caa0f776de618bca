use std::path::{Path, PathBuf};

use serde::Serialize;

use hyperlangevin::algebra::{energy, HamiltonianKind};
use hyperlangevin::coords::{to_polar, Sign};
use hyperlangevin::dynamics::integrate_ode;
use hyperlangevin::equilibrium::{
    boltzmann_candidate, compare_density_to_samples, compare_gaussian_to_samples, find_mode, from_grid, separable_candidate,
    rotation_variation, CandidateEquilibrium, Chart, DensityComparison, Mode, NormalizabilityReport, SearchBox,
};
use hyperlangevin::fpk::{evolve_to_stationary, select_drift_sign, static_residual, ConvergenceReport, DensityGrid, FPKOperator, GridSpec, Stationary};
use hyperlangevin::quad::uniform_edges;
use hyperlangevin::sde::{run_ensemble, EnsembleResult, Scheme};
use hyperlangevin::specfun::solve_angular_eigen;
use hyperlangevin::stats::{bin_samples, bin_samples_nd, total_variation_masses};

use crate::config::{AlgebraName, DriftSign, ExperimentConfig, Model};
use crate::output::{ensure_dir, write_json, Cell, CsvWriter};
use crate::CliError;

/// Files written by a command plus the lines it prints.
pub struct Written {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path, CliError> {
    let d = cfg.output.dir.as_path();
    ensure_dir(d)?;
    Ok(d)
}

fn done(files: Vec<PathBuf>, mut lines: Vec<String>) -> Written {
    lines.extend(files.iter().map(|f| format!("wrote {}", f.display())));
    Written { files, lines }
}

fn require_affine(cfg: &ExperimentConfig, what: &str) -> Result<(), CliError> {
    if cfg.algebra != AlgebraName::Affine {
        return Err(CliError::Config(format!("{what} is defined for algebra = \"affine\" only")));
    }
    Ok(())
}

/// Angular drift parameter `k / D` of the separated solution.
fn angular_parameter(model: &Model, explicit: Option<f64>) -> Result<f64, CliError> {
    if let Some(a) = explicit {
        return Ok(a);
    }
    match model.params.hamiltonian() {
        HamiltonianKind::Quadratic => Ok(0.0),
        HamiltonianKind::InverseRho => Ok(model.params.k() / model.params.scalar_diffusion()?),
    }
}

/// Resolves `drift_sign = "auto"`: the sign for which the separated
/// candidate at `a = k/D` has the smaller static residual. Without an
/// inverse-rho drift the sign has no effect and `minus` is used.
pub fn resolve_sign(cfg: &ExperimentConfig, model: &Model) -> Result<Sign, CliError> {
    match cfg.params.drift_sign {
        DriftSign::Plus => Ok(Sign::Plus),
        DriftSign::Minus => Ok(Sign::Minus),
        DriftSign::Auto => {
            let p = &model.params;
            if cfg.algebra != AlgebraName::Affine || p.hamiltonian() != HamiltonianKind::InverseRho || p.k() == 0.0 {
                return Ok(Sign::Minus);
            }
            let a = angular_parameter(model, None)?;
            let cand = separable_candidate(p.beta(), a)?;
            let spec = GridSpec {
                rho_min: 0.5 / p.beta().sqrt(),
                n_rho: 200,
                n_theta: 200,
                ..GridSpec::default_for(p.beta())
            };
            let grid = DensityGrid::from_fn(spec, |r, t| cand.density(r, t))?;
            let op = FPKOperator::from_params(p, Sign::Plus, cfg.fpk.theta_boundary)?;
            Ok(select_drift_sign(&op, &grid)?.0)
        }
    }
}

#[derive(Serialize)]
struct TrajectoryReport {
    algebra: String,
    integrator: String,
    steps: usize,
    rows: usize,
    final_state: Vec<f64>,
    energy_initial: f64,
    energy_final: f64,
}

pub fn cmd_trajectory(cfg: &ExperimentConfig) -> Result<Written, CliError> {
    let model = cfg.model()?;
    let t = &cfg.trajectory;
    let traj = integrate_ode(&model.algebra, &model.params, &t.initial, (0.0, t.t_end), t.dt)?;
    let dir = out_dir(cfg)?;
    let n = model.algebra.dim();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("v{i}")));
    header.push("rho".into());
    if n == 2 {
        header.push("theta".into());
    }
    header.push("E".into());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(&dir.join("trajectory.csv"), &h)?;
    let last = traj.times.len() - 1;
    let mut rows = 0;
    for (k, (time, v)) in traj.times.iter().zip(&traj.states).enumerate() {
        if k % t.record_every != 0 && k != last {
            continue;
        }
        let mut cells = vec![Cell::F(*time)];
        cells.extend(v.iter().map(|&x| Cell::F(x)));
        cells.push(Cell::F(model.params.rho(v)));
        if n == 2 {
            cells.push(Cell::F(to_polar([v[0], v[1]]).map_or(f64::NAN, |p| p.theta)));
        }
        cells.push(Cell::F(energy(&model.params, v)));
        w.row(cells)?;
        rows += 1;
    }
    let csv = w.finish()?;
    let report = TrajectoryReport {
        algebra: traj.meta.algebra.clone(),
        integrator: traj.meta.integrator.clone(),
        steps: last,
        rows,
        final_state: traj.states[last].clone(),
        energy_initial: energy(&model.params, &traj.states[0]),
        energy_final: energy(&model.params, &traj.states[last]),
    };
    let json = write_json(&dir.join("trajectory.json"), "trajectory", cfg, &report)?;
    Ok(done(vec![csv, json], vec![]))
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    algebra: &'a str,
    scheme: Scheme,
    drift_sign: Sign,
    coordinates: &'a [String],
    snapshot_times: &'a [f64],
    n_samples: usize,
    diverged: usize,
    resampled: u64,
}

pub struct Simulated {
    pub result: EnsembleResult,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn polar_edges(cfg: &ExperimentConfig) -> (Vec<f64>, Vec<f64>) {
    let e = &cfg.ensemble;
    let c = &cfg.compare;
    (
        uniform_edges(e.rho_min, c.rho_extent / cfg.params.beta.sqrt(), c.bins_rho),
        uniform_edges(-e.theta_max, e.theta_max, c.bins_theta),
    )
}

fn cartesian_edges(cfg: &ExperimentConfig, model: &Model) -> Vec<Vec<f64>> {
    let n = model.algebra.dim();
    let g = model.params.g();
    let c = &cfg.compare;
    (0..n)
        .map(|i| {
            let s = 1.0 / (model.params.beta() * g[i * n + i]).sqrt();
            uniform_edges(-c.half_width * s, c.half_width * s, c.bins_per_axis)
        })
        .collect()
}

fn simulate(cfg: &ExperimentConfig, model: &Model) -> Result<EnsembleResult, CliError> {
    let sign = resolve_sign(cfg, model)?;
    Ok(run_ensemble(&model.algebra, &model.params, &cfg.ensemble_config(sign))?)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Simulated, CliError> {
    let model = cfg.model()?;
    let result = simulate(cfg, &model)?;
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    if cfg.ensemble.write_samples {
        let mut header = vec!["traj".to_string(), "snapshot".into(), "t".into()];
        header.extend(result.coordinates.iter().cloned());
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut w = CsvWriter::create(&dir.join("samples.csv"), &h)?;
        let (d, s) = (result.dim(), result.n_snapshots());
        for i in (0..result.config.n_traj).filter(|&i| result.valid[i]) {
            for k in 0..s {
                let row = &result.samples[(i * s + k) * d..(i * s + k + 1) * d];
                let mut cells = vec![Cell::U(i as u64), Cell::U(k as u64), Cell::F(result.snapshot_times[k])];
                cells.extend(row.iter().map(|&x| Cell::F(x)));
                w.row(cells)?;
            }
        }
        files.push(w.finish()?);
    }
    let hist_path = dir.join("histogram.json");
    if result.coordinates == ["rho", "theta"] {
        let (er, et) = polar_edges(cfg);
        let h = bin_samples(&result.pairs(), &er, &et)?;
        files.push(write_json(&hist_path, "simulate", cfg, &serde_json::json!({ "histogram": h }))?);
    } else {
        let flat: Vec<f64> = result.rows().flatten().copied().collect();
        let h = bin_samples_nd(&flat, cartesian_edges(cfg, &model))?;
        files.push(write_json(&hist_path, "simulate", cfg, &serde_json::json!({ "histogram": h }))?);
    }
    let report = SimulateReport {
        algebra: &result.algebra,
        scheme: result.config.scheme,
        drift_sign: result.config.drift_sign,
        coordinates: &result.coordinates,
        snapshot_times: &result.snapshot_times,
        n_samples: result.n_samples(),
        diverged: result.diverged,
        resampled: result.resampled,
    };
    files.push(write_json(&dir.join("simulate.json"), "simulate", cfg, &report)?);
    let lines = vec![format!(
        "{} samples, {} diverged, {} resampled",
        result.n_samples(),
        result.diverged,
        result.resampled
    )];
    let w = done(files, lines);
    Ok(Simulated {
        result,
        lines: w.lines,
        files: w.files,
    })
}

/// Total variation between the theta marginal of `grid` and `sech^2/2`
/// (renormalized to the grid's theta range).
pub fn theta_marginal_tv_sech2(grid: &DensityGrid) -> Result<f64, CliError> {
    let edges = grid.spec.theta_edges();
    let m = grid.theta_marginal();
    let exact: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[1].tanh() - w[0].tanh())).collect();
    Ok(total_variation_masses(&m, &exact)?)
}

fn solve_pde(cfg: &ExperimentConfig, model: &Model, sign: Sign) -> Result<(FPKOperator, Stationary), CliError> {
    require_affine(cfg, "fpk-solve")?;
    let op = FPKOperator::from_params(&model.params, sign, cfg.fpk.theta_boundary)?;
    let spec = cfg.grid_spec()?;
    let beta = model.params.beta();
    let p0 = DensityGrid::from_fn(spec, |r, _| (-0.5 * beta * r * r).exp())?;
    let f = &cfg.fpk;
    let st = evolve_to_stationary(&op, &p0, f.t_max, f.dt, f.tol)?;
    Ok((op, st))
}

#[derive(Serialize)]
struct FpkReport<'a> {
    drift_sign: Sign,
    grid: GridSpec,
    convergence: &'a ConvergenceReport,
    static_residual: f64,
    theta_marginal_tv_sech2: f64,
}

pub struct Solved {
    pub stationary: Stationary,
    pub theta_marginal_tv: f64,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_fpk_solve(cfg: &ExperimentConfig) -> Result<Solved, CliError> {
    require_affine(cfg, "fpk-solve")?;
    let model = cfg.model()?;
    let sign = resolve_sign(cfg, &model)?;
    let (op, st) = solve_pde(cfg, &model, sign)?;
    let dir = out_dir(cfg)?;
    let g = &st.density;
    let mut w = CsvWriter::create(&dir.join("stationary.csv"), &["rho", "theta", "P"])?;
    for (i, &r) in g.rho.iter().enumerate() {
        for (j, &t) in g.theta.iter().enumerate() {
            w.row([Cell::F(r), Cell::F(t), Cell::F(g.at(i, j))])?;
        }
    }
    let mut files = vec![w.finish()?];
    let mut w = CsvWriter::create(&dir.join("marginals_theta.csv"), &["theta", "P_theta", "sech2_over_2"])?;
    for (t, m) in g.theta.iter().zip(g.theta_marginal()) {
        let c = t.cosh();
        w.row([Cell::F(*t), Cell::F(m), Cell::F(0.5 / (c * c))])?;
    }
    files.push(w.finish()?);
    let tv = theta_marginal_tv_sech2(g)?;
    let report = FpkReport {
        drift_sign: sign,
        grid: g.spec,
        convergence: &st.report,
        static_residual: static_residual(&op, g)?,
        theta_marginal_tv_sech2: tv,
    };
    files.push(write_json(&dir.join("convergence.json"), "fpk-solve", cfg, &report)?);
    let lines = vec![format!(
        "t = {:.3}, decay rate {:.6}, theta-marginal TV to sech^2/2 {:.2e}",
        st.report.t_reached, st.report.decay_rate, tv
    )];
    let w = done(files, lines);
    Ok(Solved {
        stationary: st,
        theta_marginal_tv: tv,
        lines: w.lines,
        files: w.files,
    })
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    beta1: f64,
    integrable: bool,
    discrete_residual: f64,
}

pub fn cmd_eigens(cfg: &ExperimentConfig) -> Result<Written, CliError> {
    let model = cfg.model()?;
    let a = angular_parameter(&model, cfg.eigens.a)?;
    let modes = solve_angular_eigen(a, cfg.eigens.n_grid, cfg.eigens.n_modes)?;
    let dir = out_dir(cfg)?;
    let rows: Vec<EigenRow> = modes
        .iter()
        .enumerate()
        .map(|(index, m)| EigenRow {
            index,
            beta1: m.beta1,
            integrable: m.integrable,
            discrete_residual: m.discrete_residual,
        })
        .collect();
    let mut w = CsvWriter::create(&dir.join("eigens.csv"), &["index", "beta1", "integrable", "discrete_residual"])?;
    for r in &rows {
        w.row([Cell::U(r.index as u64), Cell::F(r.beta1), Cell::B(r.integrable), Cell::F(r.discrete_residual)])?;
    }
    let mut files = vec![w.finish()?];
    let modes_int: Vec<_> = modes.iter().filter(|m| m.integrable).collect();
    if let Some(first) = modes_int.first() {
        let mut header = vec!["u".to_string(), "theta".into()];
        header.extend((1..=modes_int.len()).map(|k| format!("q{k}")));
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut w = CsvWriter::create(&dir.join("eigenfunctions.csv"), &h)?;
        for (j, &u) in first.u.iter().enumerate() {
            let mut cells = vec![Cell::F(u), Cell::F(u.atanh())];
            cells.extend(modes_int.iter().map(|m| Cell::F(m.q[j])));
            w.row(cells)?;
        }
        files.push(w.finish()?);
    }
    files.push(write_json(&dir.join("eigens.json"), "eigens", cfg, &serde_json::json!({ "a": a, "modes": rows }))?);
    let lines = rows.iter().map(|r| format!("beta1[{}] = {} (integrable: {})", r.index, r.beta1, r.integrable)).collect();
    Ok(done(files, lines))
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSummary {
    pub name: String,
    pub normalizability: NormalizabilityReport,
    pub z: Option<f64>,
    pub beta1: Option<f64>,
    pub mode_polar: Option<Mode>,
    pub mode_cartesian: Option<Mode>,
    /// Relative variation of the Cartesian density on the circle through
    /// the Cartesian mode.
    pub rotation_variation: Option<f64>,
}

fn summarize(cand: &CandidateEquilibrium, beta: f64, n: usize) -> Result<CandidateSummary, CliError> {
    let mode_polar = find_mode(cand, Chart::Polar, SearchBox::default_for(Chart::Polar, beta), n).ok();
    let mode_cartesian = find_mode(cand, Chart::Cartesian, SearchBox::default_for(Chart::Cartesian, beta), n).ok();
    let rotation_variation = match &mode_cartesian {
        Some(m) => Some(rotation_variation(cand, m.speed(), 720)?),
        None => None,
    };
    Ok(CandidateSummary {
        name: cand.name.clone(),
        normalizability: cand.report.clone(),
        z: cand.z,
        beta1: cand.beta1,
        mode_polar,
        mode_cartesian,
        rotation_variation,
    })
}

pub struct Equilibria {
    pub candidates: Vec<CandidateSummary>,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_equilibrium(cfg: &ExperimentConfig) -> Result<Equilibria, CliError> {
    require_affine(cfg, "equilibrium")?;
    let model = cfg.model()?;
    let beta = model.params.beta();
    let a = angular_parameter(&model, cfg.equilibrium.a)?;
    let n = cfg.equilibrium.n_table;
    let mut cands = vec![boltzmann_candidate(beta)?, separable_candidate(beta, a)?];
    if cfg.equilibrium.include_pde {
        let sign = resolve_sign(cfg, &model)?;
        let (_, st) = solve_pde(cfg, &model, sign)?;
        cands.push(from_grid("pde", beta, st.density)?);
    }
    let summaries = cands.iter().map(|c| summarize(c, beta, n)).collect::<Result<Vec<_>, _>>()?;
    let dir = out_dir(cfg)?;
    let names: Vec<&str> = cands.iter().map(|c| c.name.as_str()).collect();

    let pb = SearchBox::default_for(Chart::Polar, beta);
    let mut header = vec!["rho", "theta"];
    header.extend(&names);
    let mut w = CsvWriter::create(&dir.join("density_polar.csv"), &header)?;
    for r in uniform_edges(pb.lo[0], pb.hi[0], n - 1) {
        for t in uniform_edges(pb.lo[1], pb.hi[1], n - 1) {
            let mut cells = vec![Cell::F(r), Cell::F(t)];
            cells.extend(cands.iter().map(|c| Cell::F(c.density(r, t))));
            w.row(cells)?;
        }
    }
    let mut files = vec![w.finish()?];
    let cb = SearchBox::default_for(Chart::Cartesian, beta);
    let mut header = vec!["v0", "v1"];
    header.extend(&names);
    let mut w = CsvWriter::create(&dir.join("density_cartesian.csv"), &header)?;
    for v0 in uniform_edges(cb.lo[0], cb.hi[0], n - 1) {
        for v1 in uniform_edges(cb.lo[1], cb.hi[1], n - 1) {
            let mut cells = vec![Cell::F(v0), Cell::F(v1)];
            for c in &cands {
                cells.push(Cell::F(c.cartesian_density([v0, v1])?));
            }
            w.row(cells)?;
        }
    }
    files.push(w.finish()?);
    files.push(write_json(
        &dir.join("equilibrium.json"),
        "equilibrium",
        cfg,
        &serde_json::json!({ "a": a, "candidates": summaries }),
    )?);
    let lines = summaries
        .iter()
        .map(|s| {
            let mode = s
                .mode_cartesian
                .as_ref()
                .map_or("none".to_string(), |m| format!("({:.4}, {:.4})", m.location[0], m.location[1]));
            format!(
                "{}: normalizable {:?}, Z {:?}, Cartesian mode {mode}, rotation variation {:?}",
                s.name, s.normalizability.status, s.z, s.rotation_variation
            )
        })
        .collect();
    let w = done(files, lines);
    Ok(Equilibria {
        candidates: summaries,
        lines: w.lines,
        files: w.files,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub tv_distance: f64,
    pub chi2_statistic: Option<f64>,
    pub chi2_dof: Option<usize>,
    pub chi2_p_value: Option<f64>,
}

impl CompareRow {
    fn from_samples(name: &str, c: &DensityComparison) -> Self {
        Self {
            name: name.into(),
            tv_distance: c.tv_distance,
            chi2_statistic: Some(c.chi2.statistic),
            chi2_dof: Some(c.chi2.dof),
            chi2_p_value: Some(c.chi2.p_value),
        }
    }

    fn masses(name: &str, tv: f64) -> Self {
        Self {
            name: name.into(),
            tv_distance: tv,
            chi2_statistic: None,
            chi2_dof: None,
            chi2_p_value: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub algebra: String,
    pub n_samples: usize,
    pub rows: Vec<CompareRow>,
    pub pde_theta_marginal_tv_sech2: Option<f64>,
    pub pde_decay_rate: Option<f64>,
    pub pde_converged: Option<bool>,
}

impl CompareReport {
    pub fn tv(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.tv_distance)
    }

    pub fn row(&self, name: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub struct Compared {
    pub report: CompareReport,
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn write_bins(path: &Path, c: &DensityComparison) -> Result<PathBuf, CliError> {
    let dim = c.bins.first().map_or(0, |b| b.cell.len());
    let mut header: Vec<String> = (0..dim).map(|d| format!("lo{d}")).collect();
    header.extend((0..dim).map(|d| format!("hi{d}")));
    header.extend(["observed".to_string(), "expected".into()]);
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::create(path, &h)?;
    for b in &c.bins {
        let mut cells: Vec<Cell> = b.lo.iter().chain(&b.hi).map(|&x| Cell::F(x)).collect();
        cells.push(Cell::U(b.observed));
        cells.push(Cell::F(b.expected));
        w.row(cells)?;
    }
    w.finish()
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Compared, CliError> {
    let model = cfg.model()?;
    let dir = out_dir(cfg)?;
    let mut files = Vec::new();
    let report = if cfg.ensemble.scheme == Scheme::CartesianNaive {
        let result = simulate(cfg, &model)?;
        let c = compare_gaussian_to_samples(&model.params, &result, cfg.compare.bins_per_axis, cfg.compare.half_width)?;
        files.push(write_bins(&dir.join("bins_mc_vs_boltzmann.csv"), &c)?);
        CompareReport {
            algebra: result.algebra.clone(),
            n_samples: result.n_samples(),
            rows: vec![CompareRow::from_samples("mc_vs_boltzmann", &c)],
            pde_theta_marginal_tv_sech2: None,
            pde_decay_rate: None,
            pde_converged: None,
        }
    } else {
        let sign = resolve_sign(cfg, &model)?;
        let beta = model.params.beta();
        let result = run_ensemble(&model.algebra, &model.params, &cfg.ensemble_config(sign))?;
        let (_, st) = solve_pde(cfg, &model, sign)?;
        let tv_marginal = theta_marginal_tv_sech2(&st.density)?;
        let (decay, converged) = (st.report.decay_rate, st.report.converged);
        let a = angular_parameter(&model, cfg.equilibrium.a)?;
        let pde = from_grid("pde", beta, st.density)?;
        let boltz = boltzmann_candidate(beta)?;
        let separable = separable_candidate(beta, a)?;
        let (er, et) = polar_edges(cfg);
        let mc_pde = compare_density_to_samples(&pde, &result, &er, &et)?;
        let mc_boltz = compare_density_to_samples(&boltz, &result, &er, &et)?;
        let mc_separable = compare_density_to_samples(&separable, &result, &er, &et)?;
        files.push(write_bins(&dir.join("bins_mc_vs_pde.csv"), &mc_pde)?);
        let pm = pde.cell_masses(&er, &et);
        let rows = vec![
            CompareRow::from_samples("mc_vs_pde", &mc_pde),
            CompareRow::from_samples("mc_vs_boltzmann", &mc_boltz),
            CompareRow::from_samples("mc_vs_separable", &mc_separable),
            CompareRow::masses("pde_vs_boltzmann", total_variation_masses(&pm, &boltz.cell_masses(&er, &et))?),
            CompareRow::masses("pde_vs_separable", total_variation_masses(&pm, &separable.cell_masses(&er, &et))?),
        ];
        CompareReport {
            algebra: result.algebra.clone(),
            n_samples: result.n_samples(),
            rows,
            pde_theta_marginal_tv_sech2: Some(tv_marginal),
            pde_decay_rate: Some(decay),
            pde_converged: Some(converged),
        }
    };
    files.push(write_json(&dir.join("compare.json"), "compare", cfg, &report)?);
    let mut lines: Vec<String> = report
        .rows
        .iter()
        .map(|r| match r.chi2_p_value {
            Some(p) => format!("{:<18} TV {:.4}  chi2 p {:.3e}", r.name, r.tv_distance, p),
            None => format!("{:<18} TV {:.4}", r.name, r.tv_distance),
        })
        .collect();
    if let Some(tv) = report.pde_theta_marginal_tv_sech2 {
        lines.push(format!("pde theta marginal vs sech^2/2: TV {tv:.2e}"));
    }
    let w = done(files, lines);
    Ok(Compared {
        report,
        lines: w.lines,
        files: w.files,
    })
}

pub fn cmd_check_config(cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    cfg.validate()?;
    Ok(vec!["config ok".into(), cfg.to_toml()])
}
