//! Experiment runner: executes a validated config and writes its result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::checks::{bridge_box_probabilities, coupling_check, critical_convergence, gmc_normalization, occupation_kernel_check, rn_weight_mean};
use super::config::{validate, EmbeddingKind, ExperimentConfig, ExperimentKind};
use crate::boundary::{boundary_lbm_path, boundary_spectral_dimension, build_phi, write_heat_kernel_csv, write_paths_csv, MonotoneMap};
use crate::bridge::{spectral_dimension_estimate, transform_table, write_transform_csv, FieldMode, TransformConfig, TransformEstimate};
use crate::chaos::{ball_mass_exponent, critical_boundary_measure, gmc_measure, multifractal_beta, Flavor, Region};
use crate::error::{Error, Result};
use crate::field::{CirculantSampler, CovarianceSpec, Dim, Embedding, FieldSample, GridSpec};
use crate::rng::{derive_seed, stream};
use crate::stats::{log_space, median};

/// Realizations tried before the critical map is given up.
pub const MAX_CRITICAL_REDRAWS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    /// Result files, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    /// Verdict of `identity_checks`; `None` for other experiments.
    pub checks_passed: Option<bool>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    warnings: Vec<String>,
    checks_passed: Option<bool>,
}

impl Outputs {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = self.dir.join(name);
        self.files.push(PathBuf::from(name));
        fs::write(&path, buf)?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value).map_err(|e| Error::Format(e.to_string()))?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn clipping(&mut self, what: &str, clipped: f64) {
        if clipped > 0.0 {
            self.warnings.push(format!("{what}: embedding eigenvalue clipping removed {clipped:.3e} of the spectral mass"));
        }
    }

    fn remove_all(&self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(f));
        }
    }
}

fn embedding(c: &ExperimentConfig) -> Embedding {
    match c.grid.embedding {
        EmbeddingKind::Padded => Embedding::Padded,
        EmbeddingKind::Periodic => Embedding::Periodic,
    }
}

fn line_grid(c: &ExperimentConfig) -> Result<GridSpec<f64>> {
    GridSpec::line(c.grid.origin_x, c.grid.extent, c.grid.resolution)
}

fn square_grid(c: &ExperimentConfig) -> Result<GridSpec<f64>> {
    GridSpec::square([c.grid.origin_x, c.grid.origin_y], c.grid.extent, c.grid.resolution)
}

fn square_sampler(c: &ExperimentConfig) -> Result<CirculantSampler<f64>> {
    CirculantSampler::new(square_grid(c)?, CovarianceSpec::new(Dim::Two, c.model.mass, c.model.eps)?, embedding(c))
}

fn center(c: &ExperimentConfig) -> [f64; 2] {
    [c.grid.origin_x + 0.5 * c.grid.extent, c.grid.origin_y + 0.5 * c.grid.extent]
}

fn transform_config(c: &ExperimentConfig) -> TransformConfig<f64> {
    TransformConfig {
        n_bridges: c.mc.n_bridges,
        n_steps: c.mc.n_steps,
        t_low: c.mc.t_low,
        t_high: c.mc.t_high,
        n_t_points: c.mc.n_t_points,
        seed: c.master_seed,
        tail_correction: c.mc.tail_correction,
    }
}

/// Runs the experiment named by `config`, writing results into its output
/// directory. On failure every file written so far is removed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let problems = validate(config);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let start = Instant::now();
    fs::create_dir_all(&config.output_dir)?;
    let mut out = Outputs { dir: config.output_dir.clone(), files: Vec::new(), warnings: Vec::new(), checks_passed: None };
    let result = dispatch(config, &mut out).and_then(|_| {
        let manifest = RunManifest {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
            files: out.files.clone(),
            warnings: out.warnings.clone(),
            checks_passed: out.checks_passed,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(config.output_dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(manifest)
    });
    result.map_err(|e| {
        out.remove_all();
        let _ = fs::remove_file(config.output_dir.join(MANIFEST_FILE));
        match e {
            Error::Config(_) => e,
            other => Error::Experiment { experiment: config.experiment.name(), source: Box::new(other) },
        }
    })
}

fn dispatch(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    match c.experiment {
        ExperimentKind::FieldCheck => field_check(c, out),
        ExperimentKind::BoundarySpecdim => boundary_specdim(c, out),
        ExperimentKind::CriticalBoundary => critical_boundary(c, out),
        ExperimentKind::BulkSpecdim => bulk_specdim(c, out),
        ExperimentKind::TransformTable => transform_tables(c, out),
        ExperimentKind::BallMass => ball_mass(c, out),
        ExperimentKind::CouplingCheck => coupling(c, out),
        ExperimentKind::IdentityChecks => identities(c, out),
    }
}

fn field_check(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let line = CirculantSampler::new(line_grid(c)?, CovarianceSpec::new(Dim::One, c.model.mass, c.model.eps)?, embedding(c))?;
    let square = square_sampler(c)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (j, &gamma) in c.model.gamma.iter().enumerate() {
        let r = gmc_normalization(gamma, &line, &square, c.mc.replicates, derive_seed(c.master_seed, j as u64))?;
        out.clipping("field_check", r.clipped_mass);
        for (i, (b, m)) in r.boundary_totals.iter().zip(&r.bulk_totals).enumerate() {
            rows.push(format!("{gamma},{i},{b},{m}"));
        }
        summary.push(json!({
            "gamma": gamma,
            "replicates": c.mc.replicates,
            "boundary_mass": r.boundary,
            "bulk_mass": r.bulk,
            "boundary_z": (r.boundary.mean - 1.0) / r.boundary.stderr,
            "bulk_z": (r.bulk.mean - 1.0) / r.bulk.stderr,
        }));
    }
    out.write("field_check.csv", |w| csv(w, "gamma,replicate,boundary_mass,bulk_mass", &rows))?;
    out.json("field_check.json", &summary)
}

fn csv(w: &mut Vec<u8>, header: &str, rows: &[String]) -> Result<()> {
    use std::io::Write;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

/// Critical map from the first realization whose derivative-form map is
/// strictly increasing; returns it with the number of rejected draws.
fn critical_map(sampler: &CirculantSampler<f64>, seed: u64) -> Result<(MonotoneMap<f64>, usize)> {
    for attempt in 0..MAX_CRITICAL_REDRAWS {
        let field = sampler.sample(derive_seed(seed, attempt as u64));
        match build_phi(&critical_boundary_measure(&field)?.derivative) {
            Ok(map) => return Ok((map, attempt)),
            Err(Error::NonMonotone { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NonFinite(format!("no strictly increasing critical map in {MAX_CRITICAL_REDRAWS} draws")))
}

fn boundary_specdim(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let b = &c.boundary;
    let sampler = CirculantSampler::new(line_grid(c)?, CovarianceSpec::new(Dim::One, c.model.mass, c.model.eps)?, embedding(c))?;
    out.clipping("boundary field", sampler.clipped_mass());
    let field_seed = derive_seed(c.master_seed, stream::FIELD);
    let mut t_grid = log_space(b.t_min, b.t_max, b.n_times);
    t_grid.reverse();
    let path_times: Vec<f64> = (0..=100).map(|i| b.t_max * i as f64 / 100.0).collect();
    let right = c.grid.origin_x + c.grid.extent;
    let points = [(b.x, b.x), (b.x, b.x + 0.25 * (right - b.x))];

    let mut maps: Vec<(String, f64, MonotoneMap<f64>, usize)> = Vec::new();
    let field = sampler.sample(field_seed);
    for &gamma in &c.model.gamma {
        maps.push(("boundary".into(), gamma, build_phi(&gmc_measure(&field, gamma, Flavor::Boundary)?)?, 0));
    }
    if c.model.include_critical {
        let (map, redraws) = critical_map(&sampler, field_seed)?;
        if redraws > 0 {
            out.warnings.push(format!("critical map: {redraws} realization(s) rejected as non-monotone"));
        }
        maps.push(("critical_boundary".into(), 2.0 * std::f64::consts::SQRT_2, map, redraws));
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (flavor, gamma, map, redraws) in &maps {
        let d_s = boundary_spectral_dimension(map, b.x, &t_grid)?;
        rows.push(format!("{flavor},{gamma},{d_s},{redraws}"));
        summary.push(json!({ "flavor": flavor, "gamma": gamma, "d_s": d_s, "redraws": redraws, "phi_range": map.range() }));
        let tag = format!("{flavor}_gamma{gamma}");
        out.write(&format!("heat_kernel_{tag}.csv"), |w| write_heat_kernel_csv(w, map, &t_grid, &points))?;
        let mut paths = Vec::new();
        let mut exits = 0;
        for p in 0..b.n_paths as u64 {
            match boundary_lbm_path(map, b.x, &path_times, derive_seed(derive_seed(c.master_seed, stream::PATH), p)) {
                Ok(path) => paths.push(path),
                Err(Error::RangeExit { .. }) => exits += 1,
                Err(e) => return Err(e),
            }
        }
        if exits > 0 {
            out.warnings.push(format!("{tag}: {exits} path(s) left the tabulated range and were dropped"));
        }
        out.write(&format!("paths_{tag}.csv"), |w| write_paths_csv(w, &path_times, &paths))?;
    }
    out.write("boundary_specdim.csv", |w| csv(w, "flavor,gamma,d_s,redraws", &rows))?;
    out.json("boundary_specdim.json", &json!({ "x": b.x, "t_grid": t_grid, "results": summary }))
}

fn critical_boundary(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = critical_convergence(line_grid(c)?, c.model.mass, &c.critical.levels, embedding(c), c.mc.replicates, c.master_seed)?;
    out.clipping("critical fields", r.clipped_mass);
    let mut rows = Vec::new();
    for (i, (d, s)) in r.derivative.iter().zip(&r.seneta_heyde).enumerate() {
        for (k, level) in r.levels.iter().enumerate() {
            rows.push(format!("{i},{level},{},{},{}", r.eps[k], d[k], s[k]));
        }
    }
    out.write("critical_boundary.csv", |w| csv(w, "replicate,level,eps,derivative,seneta_heyde", &rows))?;
    out.json(
        "critical_boundary.json",
        &json!({
            "levels": r.levels,
            "eps": r.eps,
            "replicates": c.mc.replicates,
            "median_normalization_gap": r.median_normalization_gap,
            "median_cauchy_derivative": r.median_cauchy_derivative,
            "median_cauchy_seneta_heyde": r.median_cauchy_seneta_heyde,
            "nonpositive_derivative": r.nonpositive_derivative,
        }),
    )
}

fn bulk_specdim(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let sampler = square_sampler(c)?;
    out.clipping("bulk field", sampler.clipped_mass());
    let quenched: Option<FieldSample<f64>> = c.mc.quenched.then(|| sampler.sample(derive_seed(c.master_seed, stream::FIELD)));
    let cfg = transform_config(c);
    let x = center(c);
    let mut all: Vec<TransformEstimate<f64>> = Vec::new();
    let mut summary = Vec::new();
    for &gamma in &c.model.gamma {
        for &alpha in &c.transform.alphas {
            let mode = match &quenched {
                Some(f) => FieldMode::Quenched(f),
                None => FieldMode::Annealed(&sampler),
            };
            let r = spectral_dimension_estimate(x, gamma, alpha, &c.transform.lambdas, &cfg, mode)?;
            summary.push(json!({
                "gamma": gamma,
                "alpha": alpha,
                "d_s": r.d_s,
                "slope": r.fit.slope,
                "slope_stderr": r.fit.slope_stderr,
                "intercept": r.fit.intercept,
                "r_squared": r.fit.r_squared,
                "estimates": r.estimates.iter().map(|e| json!({ "lambda": e.lambda, "value": e.value, "stderr": e.stderr })).collect::<Vec<Value>>(),
            }));
            all.extend(r.estimates);
        }
    }
    out.write("bulk_specdim.csv", |w| write_transform_csv(w, &all))?;
    out.json("bulk_specdim.json", &json!({ "x": x, "quenched": c.mc.quenched, "fits": summary }))
}

fn transform_tables(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let sampler = square_sampler(c)?;
    out.clipping("bulk field", sampler.clipped_mass());
    let quenched: Option<FieldSample<f64>> = c.mc.quenched.then(|| sampler.sample(derive_seed(c.master_seed, stream::FIELD)));
    let cfg = transform_config(c);
    let x = center(c);
    let mut all: Vec<TransformEstimate<f64>> = Vec::new();
    for &gamma in &c.model.gamma {
        for &d in &c.transform.offsets {
            let mode = match &quenched {
                Some(f) => FieldMode::Quenched(f),
                None => FieldMode::Annealed(&sampler),
            };
            all.extend(transform_table(x, [x[0] + d, x[1]], gamma, &c.transform.alphas, &c.transform.lambdas, &cfg, mode)?);
        }
    }
    out.write("transform_table.csv", |w| write_transform_csv(w, &all))?;
    out.json("transform_table.json", &all)
}

fn ball_mass(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let bm = &c.ballmass;
    let sampler = square_sampler(c)?;
    out.clipping("bulk field", sampler.clipped_mass());
    let radii = log_space(bm.r_min, bm.r_max, bm.n_radii);
    let region = Region { lo: [bm.region_lo; 2], hi: [bm.region_hi; 2] };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (j, &gamma) in c.model.gamma.iter().enumerate() {
        let seed = derive_seed(c.master_seed, j as u64);
        let reports = (0..c.mc.replicates as u64)
            .into_par_iter()
            .map(|i| ball_mass_exponent(&gmc_measure(&sampler.sample_replicate(seed, i), gamma, Flavor::Bulk)?, &radii, region))
            .collect::<Result<Vec<_>>>()?;
        let beta = multifractal_beta(gamma, Flavor::Bulk);
        let exps: Vec<f64> = reports.iter().map(|r| r.fitted_exponent).collect();
        for (i, r) in reports.iter().enumerate() {
            rows.push(format!("{gamma},{i},{},{},{beta}", r.fitted_exponent, r.r_squared));
        }
        summary.push(json!({
            "gamma": gamma,
            "beta": beta,
            "median_exponent": median(&exps),
            "min_exponent": exps.iter().copied().fold(f64::INFINITY, f64::min),
            "fraction_at_least_beta_minus_0.2": exps.iter().filter(|&&e| e >= beta - 0.2).count() as f64 / exps.len() as f64,
        }));
    }
    out.write("ball_mass.csv", |w| csv(w, "gamma,replicate,exponent,r_squared,beta", &rows))?;
    out.json("ball_mass.json", &json!({ "radii": radii, "results": summary }))
}

fn coupling(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let k = &c.coupling;
    let (s, taus) = coupling_check([0.0, 0.0], [k.gap_x, k.gap_y], k.horizon, k.n_steps, c.mc.replicates, c.master_seed)?;
    if s.met < s.replicates {
        out.warnings.push(format!("{} of {} pairs did not meet before the horizon", s.replicates - s.met, s.replicates));
    }
    let rows: Vec<String> = taus.iter().enumerate().map(|(i, t)| format!("{i},{},{},{}", t[0], t[1], t[2])).collect();
    let exceed = taus.iter().filter(|t| t[2] > k.eta).count() as f64 / taus.len().max(1) as f64;
    out.write("coupling.csv", |w| csv(w, "replicate,tau1,tau2,tau", &rows))?;
    out.json("coupling.json", &json!({ "summary": s, "eta": k.eta, "p_tau_exceeds_eta": exceed }))
}

fn identities(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let n = c.mc.replicates;
    let rn = rn_weight_mean(n, derive_seed(c.master_seed, 1))?;
    let boxes = bridge_box_probabilities(n, derive_seed(c.master_seed, 2))?;
    let occ = occupation_kernel_check(20, 100, derive_seed(c.master_seed, 3))?;
    let rn_ok = (rn.mean - 1.0).abs() <= 3.0 * rn.stderr;
    let box_ok = boxes.iter().all(|b| b.z.abs() <= 3.0);
    let occ_ok = occ.max_abs_error <= 1e-8 && occ.bound_violations == 0;
    out.checks_passed = Some(rn_ok && box_ok && occ_ok);
    out.json(
        "identity_checks.json",
        &json!({
            "rn_weight_mean": { "stats": rn, "passed": rn_ok },
            "box_probabilities": { "rows": boxes, "passed": box_ok },
            "occupation_kernel": { "stats": occ, "passed": occ_ok },
            "passed": rn_ok && box_ok && occ_ok,
        }),
    )
}

/// Reads a config file (`.json` or key/value text) from disk.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    super::config::parse_config(&text)
}
