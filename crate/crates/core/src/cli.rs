//! Command orchestration: run configuration, the offline/online/sweep/bench/scm
//! commands and the two demos. Every CSV starts with `#` lines holding the
//! resolved configuration, so a file can be regenerated from its own header.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::certify::{effectivity_ceiling, tridiag_demo, TridiagRecord};
use crate::error::{invalid, Error, Result};
use crate::fem::{apply_essential_bc, prolongation, solve_with, x_norm_gram, FeSpace};
use crate::mesh::refine_times;
use crate::problems::{
    poisson_1d_mesh, sample_test_set, sample_training_set, thermal_bc, thermal_family, AffineOperator, AffineRhs,
    ProblemDef, ProblemKind,
};
use crate::rb::{greedy_offline, online_output, Basis, FullOrderSolver, OfflineConfig, RbModel};
use crate::scm::{alpha_h, scm_offline};
use crate::sparse::{CsrMatrix, SparseCholesky};

pub const MODEL_FILE: &str = "model.json";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub n: usize,
    pub z_depth: usize,
    pub train_count: usize,
    pub train_seed: u64,
    pub delta0: f64,
    pub n_max: usize,
    pub scm_epsilon: f64,
    pub test_count: usize,
    pub test_seed: u64,
    /// Refinements of the X mesh for reference solutions; `None` means `z_depth + 1`.
    pub ref_depth: Option<usize>,
    pub scm_validation_count: usize,
    pub bench_queries: usize,
    pub bench_rb_repeats: usize,
    /// Required RB-over-full-order per-query speedup for `bench` to pass.
    pub bench_min_speedup: f64,
    /// Number of meshes in the coercivity demo, starting at 8 intervals.
    pub coercivity_levels: usize,
    pub tridiag_sizes: Vec<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn defaults(problem: ProblemKind) -> Self {
        Self {
            problem,
            n: 16,
            z_depth: crate::problems::DEFAULT_Z_DEPTH,
            train_count: if problem == ProblemKind::Thermal3 { 75 } else { 50 },
            train_seed: 0,
            delta0: 0.1,
            n_max: 30,
            scm_epsilon: 0.1,
            test_count: 100,
            test_seed: 1,
            ref_depth: None,
            scm_validation_count: 50,
            bench_queries: 10,
            bench_rb_repeats: 100,
            bench_min_speedup: 20.0,
            coercivity_levels: 6,
            tridiag_sizes: vec![4, 10, 100, 1000],
            out_dir: PathBuf::from("out"),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment. Defaults depend on
    /// the problem, so `problem` is resolved before the other keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return invalid(format!("config line {}: expected key = value", lineno + 1));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let problem = match pairs.iter().rev().find(|(k, _)| k == "problem") {
            Some((_, v)) => ProblemKind::from_name(v)?,
            None => ProblemKind::Thermal1,
        };
        let mut cfg = Self::defaults(problem);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::InvalidArgument(format!("config key {key}: cannot parse {v:?}")))
        }
        match key {
            "problem" => self.problem = ProblemKind::from_name(value)?,
            "n" => self.n = num(key, value)?,
            "z_depth" => self.z_depth = num(key, value)?,
            "train_count" => self.train_count = num(key, value)?,
            "train_seed" => self.train_seed = num(key, value)?,
            "delta0" => self.delta0 = num(key, value)?,
            "n_max" => self.n_max = num(key, value)?,
            "scm_epsilon" => self.scm_epsilon = num(key, value)?,
            "test_count" => self.test_count = num(key, value)?,
            "test_seed" => self.test_seed = num(key, value)?,
            "ref_depth" => self.ref_depth = if value == "auto" { None } else { Some(num(key, value)?) },
            "scm_validation_count" => self.scm_validation_count = num(key, value)?,
            "bench_queries" => self.bench_queries = num(key, value)?,
            "bench_rb_repeats" => self.bench_rb_repeats = num(key, value)?,
            "bench_min_speedup" => self.bench_min_speedup = num(key, value)?,
            "coercivity_levels" => self.coercivity_levels = num(key, value)?,
            "tridiag_sizes" => {
                self.tridiag_sizes = value.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?;
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return invalid(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.problem != ProblemKind::Poisson1d && (self.n < 2 || self.n % 2 != 0) {
            return invalid(format!("n must be even and at least 2, got {}", self.n));
        }
        if self.train_count < 2 && self.problem != ProblemKind::Poisson1d {
            return invalid("train_count must be at least 2");
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return invalid(format!("delta0 must lie in (0,1), got {}", self.delta0));
        }
        if !(self.scm_epsilon > 0.0 && self.scm_epsilon < 1.0) {
            return invalid(format!("scm_epsilon must lie in (0,1), got {}", self.scm_epsilon));
        }
        if self.n_max == 0 || self.test_count == 0 || self.scm_validation_count == 0 {
            return invalid("n_max, test_count and scm_validation_count must be positive");
        }
        if self.bench_queries == 0 || self.bench_rb_repeats == 0 || !(self.bench_min_speedup > 0.0) {
            return invalid("bench settings must be positive");
        }
        if self.coercivity_levels < 3 {
            return invalid("coercivity_levels must be at least 3");
        }
        if self.tridiag_sizes.iter().any(|&s| s < 2) {
            return invalid("tridiag sizes must be at least 2");
        }
        Ok(())
    }

    pub fn ref_depth(&self) -> usize {
        self.ref_depth.unwrap_or(self.z_depth + 1)
    }

    pub fn offline_config(&self) -> OfflineConfig {
        OfflineConfig { delta0: self.delta0, n_max: self.n_max, scm_epsilon: self.scm_epsilon, seed: self.train_seed }
    }

    /// Resolved configuration as `key = value` pairs, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let sizes: Vec<String> = self.tridiag_sizes.iter().map(usize::to_string).collect();
        vec![
            ("problem", self.problem.name().to_string()),
            ("n", self.n.to_string()),
            ("z_depth", self.z_depth.to_string()),
            ("train_count", self.train_count.to_string()),
            ("train_seed", self.train_seed.to_string()),
            ("train_sampling", sampling_kind(self.problem, true).to_string()),
            ("delta0", fmt_f64(self.delta0)),
            ("n_max", self.n_max.to_string()),
            ("scm_epsilon", fmt_f64(self.scm_epsilon)),
            ("test_count", self.test_count.to_string()),
            ("test_seed", self.test_seed.to_string()),
            ("test_sampling", sampling_kind(self.problem, false).to_string()),
            ("ref_depth", self.ref_depth().to_string()),
            ("scm_validation_count", self.scm_validation_count.to_string()),
            ("bench_queries", self.bench_queries.to_string()),
            ("bench_rb_repeats", self.bench_rb_repeats.to_string()),
            ("bench_min_speedup", fmt_f64(self.bench_min_speedup)),
            ("coercivity_levels", self.coercivity_levels.to_string()),
            ("tridiag_sizes", sizes.join(",")),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            // derived entries are informational only
            if k.ends_with("_sampling") {
                let _ = writeln!(s, "# {k} = {v}");
            } else {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }
}

fn sampling_kind(kind: ProblemKind, train: bool) -> &'static str {
    match (kind, train) {
        (ProblemKind::Thermal1, true) => "log-grid",
        (ProblemKind::Thermal1, false) => "log-uniform",
        (ProblemKind::Thermal3, true) => "lhs+vertices",
        (ProblemKind::Thermal3, false) => "lhs",
        (ProblemKind::Poisson1d, _) => "single",
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn mu_columns(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|k| format!("{prefix}{k}")).collect()
    }
}

struct Csv {
    header: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn new(command: &str, cfg: &RunConfig, columns: Vec<String>) -> Self {
        let mut header = vec![format!("lsrb {command} {}", env!("CARGO_PKG_VERSION"))];
        header.extend(cfg.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}")));
        Self { header, columns, rows: Vec::new() }
    }

    fn note(&mut self, k: &str, v: impl std::fmt::Display) {
        self.header.push(format!("{k} = {v}"));
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for h in &self.header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            debug_assert_eq!(r.len(), self.columns.len());
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn build_problem(cfg: &RunConfig) -> Result<ProblemDef> {
    ProblemDef::build(cfg.problem, cfg.n, cfg.z_depth)
}

#[derive(Clone, Debug)]
pub struct OfflineSummary {
    pub model_path: PathBuf,
    pub n: usize,
    pub n_error: usize,
    pub delta_final: f64,
    pub certified: bool,
    pub seconds: f64,
}

/// Trains a model and writes `model.json`, its basis sidecar and
/// `training_log.csv`. An uncertified model is still written, then reported
/// as an error.
pub fn cmd_offline(cfg: &RunConfig) -> Result<OfflineSummary> {
    ensure_dir(&cfg.out_dir)?;
    let start = Instant::now();
    let problem = build_problem(cfg)?;
    let train = sample_training_set(&problem, cfg.train_count, cfg.train_seed)?;
    let (model, basis) = greedy_offline(&problem, &train, &cfg.offline_config())?;
    let seconds = start.elapsed().as_secs_f64();

    let model_path = cfg.out_dir.join(MODEL_FILE);
    model.save(&model_path)?;
    basis.save(&RbModel::basis_path(&model_path))?;
    training_log(cfg, &model).write(&cfg.out_dir.join("training_log.csv"))?;

    if !model.certified {
        return Err(Error::Uncertified { delta: model.delta_final });
    }
    Ok(OfflineSummary { model_path, n: model.n, n_error: model.n_error, delta_final: model.delta_final, certified: model.certified, seconds })
}

fn training_log(cfg: &RunConfig, model: &RbModel) -> Csv {
    let dim = model.params.dim();
    let mut cols = vec!["iter".to_string()];
    cols.extend(mu_columns("chosen_mu", dim));
    cols.extend(["max_estimator", "delta", "n_primal", "n_error", "max_indicator"].map(String::from));
    cols.extend(mu_columns("snapshot_mu", dim));
    cols.push("snapshot_indicator".into());
    let mut csv = Csv::new("offline", cfg, cols);
    csv.note("stop_reason", format!("{:?}", model.stop_reason));
    csv.note("delta_final", fmt_f64(model.delta_final));
    csv.note("certified", model.certified);
    for s in &model.log {
        let mut row = vec![s.iteration.to_string()];
        match &s.chosen_mu {
            Some(mu) => row.extend(mu.iter().map(|&x| fmt_f64(x))),
            None => row.extend(std::iter::repeat_n(String::new(), dim)),
        }
        row.push(fmt_f64(s.max_estimator));
        row.push(fmt_f64(s.delta));
        row.push(s.n_primal.to_string());
        row.push(s.n_error.to_string());
        row.push(fmt_f64(s.max_indicator));
        row.extend(s.snapshot_mu.iter().map(|&x| fmt_f64(x)));
        row.push(s.snapshot_indicator.map(fmt_f64).unwrap_or_default());
        csv.rows.push(row);
    }
    csv
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineReport {
    pub mu: Vec<f64>,
    pub c: Vec<f64>,
    pub err_norm: f64,
    pub aux_res: f64,
    pub alpha_lb: f64,
    pub bound: f64,
    pub effectivity_ceiling: f64,
}

impl OnlineReport {
    pub fn render(&self) -> String {
        let c: Vec<String> = self.c.iter().map(|&x| fmt_f64(x)).collect();
        let mu: Vec<String> = self.mu.iter().map(|&x| fmt_f64(x)).collect();
        format!(
            "mu = {}\nc_N = {}\nerr_norm = {}\naux_res = {}\nalpha_lb = {}\nbound = {}\neffectivity_ceiling = {}\n",
            mu.join(" "),
            c.join(" "),
            fmt_f64(self.err_norm),
            fmt_f64(self.aux_res),
            fmt_f64(self.alpha_lb),
            fmt_f64(self.bound),
            fmt_f64(self.effectivity_ceiling),
        )
    }
}

/// Certified reduced solve from the model file alone; the basis sidecar and
/// mesh are never touched.
pub fn cmd_online(model_path: &Path, mu: &[f64]) -> Result<OnlineReport> {
    let model = RbModel::load(model_path)?;
    let (sol, cert) = crate::rb::online_solve(&model, mu)?;
    Ok(OnlineReport {
        mu: mu.to_vec(),
        c: sol.c,
        err_norm: cert.err_norm,
        aux_res: cert.aux_res,
        alpha_lb: cert.alpha_lb,
        bound: cert.bound,
        effectivity_ceiling: cert.effectivity_ceiling,
    })
}

/// Full-order solutions on a uniformly refined X mesh, standing in for the
/// exact solution. Factorizations reuse one symbolic analysis.
pub struct Reference {
    pub depth: usize,
    op: AffineOperator,
    rhs: AffineRhs,
    essential: Vec<usize>,
    gram: CsrMatrix,
    prolong: CsrMatrix,
    chol: Option<SparseCholesky>,
}

impl Reference {
    pub fn new(problem: &ProblemDef, depth: usize) -> Result<Self> {
        let Some(xs) = problem.x.space.as_ref() else {
            return invalid("reference solutions are only available for the 2D problems");
        };
        let (mesh, parent) = refine_times(xs.mesh(), depth)?;
        let rs = FeSpace::new(Arc::new(mesh), &thermal_bc());
        let prolong = prolongation(xs, &rs, &parent)?;
        let (op, rhs) = thermal_family(problem.kind, &rs);
        Ok(Self { depth, gram: x_norm_gram(&rs), essential: rs.essential_dofs().to_vec(), op, rhs, prolong, chol: None })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn solve(&mut self, mu: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = apply_essential_bc(&self.op.eval(mu), &self.rhs.eval(mu), &self.essential);
        let chol = match self.chol.take() {
            Some(c) => c.refactor(&a)?,
            None => SparseCholesky::factor(&a)?,
        };
        let u = solve_with(&chol, &a, &b);
        self.chol = Some(chol);
        u
    }

    /// `‖u_ref − P v‖_X` for X coefficients `v`.
    pub fn distance(&self, u_ref: &[f64], v: &[f64]) -> f64 {
        let pv = self.prolong.matvec(v);
        let d: Vec<f64> = u_ref.iter().zip(&pv).map(|(a, b)| a - b).collect();
        self.gram.quad_form(&d, &d).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub mu: Vec<f64>,
    pub true_err: f64,
    /// `None` when no certificate is available (`α_LB ≤ 0`).
    pub bound: Option<f64>,
    pub err_norm: f64,
    pub aux_res: f64,
    pub alpha_lb: f64,
}

impl SweepRow {
    pub fn effectivity(&self) -> Option<f64> {
        self.bound.map(|b| b / self.true_err)
    }
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub ref_depth: usize,
    pub ref_dim: usize,
    pub delta_final: f64,
    pub ceiling: f64,
}

impl SweepSummary {
    pub fn n_rigorous(&self) -> usize {
        self.rows.iter().filter(|r| r.bound.is_some_and(|b| b >= r.true_err)).count()
    }

    pub fn n_unavailable(&self) -> usize {
        self.rows.iter().filter(|r| r.bound.is_none()).count()
    }

    pub fn max_effectivity(&self) -> f64 {
        self.rows.iter().filter_map(SweepRow::effectivity).fold(0.0, f64::max)
    }
}

fn check_model_matches(cfg: &RunConfig, model: &RbModel) -> Result<()> {
    if model.problem != cfg.problem.name() || model.mesh_n != cfg.n || model.z_depth != cfg.z_depth {
        return invalid(format!(
            "model ({} n={} z_depth={}) does not match the configuration ({} n={} z_depth={})",
            model.problem,
            model.mesh_n,
            model.z_depth,
            cfg.problem.name(),
            cfg.n,
            cfg.z_depth
        ));
    }
    Ok(())
}

/// Reference solves and certified reduced solves at the configured test
/// parameters; writes `results.csv` sorted by true error.
pub fn cmd_sweep(cfg: &RunConfig, model_path: &Path) -> Result<SweepSummary> {
    let model = RbModel::load(model_path)?;
    check_model_matches(cfg, &model)?;
    if !model.certified {
        return Err(Error::Uncertified { delta: model.delta_final });
    }
    let basis = Basis::load(&RbModel::basis_path(model_path))?;
    if basis.xi.len() != model.n || basis.xi.first().is_some_and(|v| v.len() != model.x_dim) {
        return Err(Error::Format("basis file does not match the model".into()));
    }
    let coarse = ProblemDef::build(cfg.problem, cfg.n, 0)?;
    let test = sample_test_set(&coarse, cfg.test_count, cfg.test_seed);

    let outputs: Vec<_> = test.par_iter().map(|mu| online_output(&model, mu)).collect::<Result<_>>()?;
    let mut reference = Reference::new(&coarse, cfg.ref_depth())?;
    let mut rows = Vec::with_capacity(test.len());
    for (mu, out) in test.iter().zip(&outputs) {
        let u_ref = reference.solve(mu)?;
        let u_n = basis.primal(&out.solution.c);
        let bound = match out.certificate(model.delta_final) {
            Ok(c) => Some(c.bound),
            Err(Error::CertificateUnavailable { .. }) => None,
            Err(e) => return Err(e),
        };
        rows.push(SweepRow {
            mu: mu.clone(),
            true_err: reference.distance(&u_ref, &u_n),
            bound,
            err_norm: out.err_norm,
            aux_res: out.aux_res,
            alpha_lb: out.alpha_lb,
        });
    }
    rows.sort_by(|a, b| a.true_err.total_cmp(&b.true_err));
    let summary = SweepSummary {
        rows,
        ref_depth: reference.depth,
        ref_dim: reference.dim(),
        delta_final: model.delta_final,
        ceiling: effectivity_ceiling(model.delta_final)?,
    };

    let mut cols = mu_columns("mu", model.params.dim());
    cols.extend(["true_err", "bound", "err_norm", "aux_res", "alpha_lb", "effectivity", "status"].map(String::from));
    let mut csv = Csv::new("sweep", cfg, cols);
    csv.note("model_n", model.n);
    csv.note("delta_final", fmt_f64(model.delta_final));
    csv.note("effectivity_ceiling", fmt_f64(summary.ceiling));
    csv.note("reference_dofs", summary.ref_dim);
    for r in &summary.rows {
        let mut row: Vec<String> = r.mu.iter().map(|&x| fmt_f64(x)).collect();
        row.push(fmt_f64(r.true_err));
        row.push(r.bound.map(fmt_f64).unwrap_or_default());
        row.push(fmt_f64(r.err_norm));
        row.push(fmt_f64(r.aux_res));
        row.push(fmt_f64(r.alpha_lb));
        row.push(r.effectivity().map(fmt_f64).unwrap_or_default());
        row.push(if r.bound.is_some() { "ok" } else { "no_certificate" }.to_string());
        csv.rows.push(row);
    }
    ensure_dir(&cfg.out_dir)?;
    csv.write(&cfg.out_dir.join("results.csv"))?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct BenchSummary {
    pub offline_seconds: f64,
    pub full_per_query: f64,
    pub rb_per_query: f64,
    /// Smallest query count at which offline plus RB queries cost no more
    /// than full-order queries.
    pub breakeven: Option<usize>,
    pub reproduced: bool,
}

impl BenchSummary {
    pub fn speedup(&self) -> f64 {
        self.full_per_query / self.rb_per_query
    }
}

pub fn breakeven(offline: f64, full: f64, rb: f64) -> Option<usize> {
    if !(full > rb) {
        return None;
    }
    let k = (offline / (full - rb)).ceil().max(1.0);
    // guard against rounding right at the crossing
    let k = k as usize;
    Some(if offline + k as f64 * rb <= k as f64 * full { k } else { k + 1 })
}

/// Times retraining, full-order solves with certificates, and RB queries;
/// writes `runtime.csv` (cumulative cost curves) with the summary in the header.
pub fn cmd_bench(cfg: &RunConfig, model_path: &Path) -> Result<BenchSummary> {
    let model = RbModel::load(model_path)?;
    check_model_matches(cfg, &model)?;
    if !model.certified {
        return Err(Error::Uncertified { delta: model.delta_final });
    }

    let start = Instant::now();
    let problem = build_problem(cfg)?;
    let train = sample_training_set(&problem, cfg.train_count, cfg.train_seed)?;
    let (retrained, _) = greedy_offline(&problem, &train, &cfg.offline_config())?;
    let offline_seconds = start.elapsed().as_secs_f64();
    let reproduced = retrained == model;
    if !reproduced {
        eprintln!("warning: the configuration does not reproduce the model; timing the retrained offline stage anyway");
    }

    let test = sample_test_set(&problem, cfg.bench_queries, cfg.test_seed);
    let mut solver = FullOrderSolver::new(&problem);
    // one warm-up so both sides are measured with symbolic analysis done
    solver.snapshot(&test[0])?;
    let start = Instant::now();
    let mut sink = 0.0;
    for mu in &test {
        let s = solver.snapshot(mu)?;
        let alpha = model.scm.alpha_lb(mu)?;
        sink += s.err_norm + s.aux_res / alpha.max(f64::MIN_POSITIVE).sqrt();
    }
    let full_per_query = start.elapsed().as_secs_f64() / test.len() as f64;

    let start = Instant::now();
    for _ in 0..cfg.bench_rb_repeats {
        for mu in &test {
            sink += crate::rb::estimate(&model, mu).map(|c| c.bound).unwrap_or(0.0);
        }
    }
    let rb_per_query = start.elapsed().as_secs_f64() / (cfg.bench_rb_repeats * test.len()) as f64;
    std::hint::black_box(sink);

    let summary = BenchSummary { offline_seconds, full_per_query, rb_per_query, breakeven: breakeven(offline_seconds, full_per_query, rb_per_query), reproduced };
    let mut csv = Csv::new("bench", cfg, vec!["queries".into(), "full_cumulative_s".into(), "rb_cumulative_s".into()]);
    csv.note("offline_s", fmt_f64(offline_seconds));
    csv.note("full_per_query_s", fmt_f64(full_per_query));
    csv.note("rb_per_query_s", fmt_f64(rb_per_query));
    csv.note("speedup", fmt_f64(summary.speedup()));
    csv.note("breakeven_queries", summary.breakeven.map_or("none".to_string(), |k| k.to_string()));
    csv.note("model_reproduced", reproduced);
    let last = summary.breakeven.map_or(100, |k| (2 * k).clamp(10, 10_000));
    for k in 1..=last {
        let kf = k as f64;
        csv.rows.push(vec![k.to_string(), fmt_f64(kf * full_per_query), fmt_f64(offline_seconds + kf * rb_per_query)]);
    }
    ensure_dir(&cfg.out_dir)?;
    csv.write(&cfg.out_dir.join("runtime.csv"))?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScmRow {
    pub mu: Vec<f64>,
    pub alpha_lb: f64,
    pub alpha_h: f64,
    pub alpha_ub: f64,
}

#[derive(Clone, Debug)]
pub struct ScmSummary {
    pub rows: Vec<ScmRow>,
    pub epsilon_achieved: f64,
    pub anchors: usize,
}

impl ScmSummary {
    /// Largest `α_LB − α^h` over the validation parameters.
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.alpha_lb - r.alpha_h).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs the SCM on the training set and checks it against direct
/// eigensolves at validation parameters; writes `scm.csv` and `scm_anchors.csv`.
pub fn cmd_scm(cfg: &RunConfig) -> Result<ScmSummary> {
    let problem = ProblemDef::build(cfg.problem, cfg.n, 0)?;
    let candidates = sample_training_set(&problem, cfg.train_count, cfg.train_seed)?;
    let scm = scm_offline(&problem, &candidates, cfg.scm_epsilon)?;
    let validation = sample_test_set(&problem, cfg.scm_validation_count, cfg.test_seed);
    let rows: Vec<ScmRow> = validation
        .par_iter()
        .map(|mu| {
            Ok(ScmRow { mu: mu.clone(), alpha_lb: scm.alpha_lb(mu)?, alpha_h: alpha_h(&problem, mu)?, alpha_ub: scm.alpha_ub(mu) })
        })
        .collect::<Result<_>>()?;
    let summary = ScmSummary { rows, epsilon_achieved: scm.epsilon_achieved, anchors: scm.anchors.len() };

    let dim = problem.params.dim();
    let mut cols = mu_columns("mu", dim);
    cols.extend(["alpha_lb", "alpha_h", "alpha_ub", "relative_gap"].map(String::from));
    let mut csv = Csv::new("scm", cfg, cols);
    csv.note("anchors", scm.anchors.len());
    csv.note("epsilon_achieved", fmt_f64(scm.epsilon_achieved));
    csv.note("eigen_solves", scm.eigen_solves);
    for r in &summary.rows {
        let mut row: Vec<String> = r.mu.iter().map(|&x| fmt_f64(x)).collect();
        row.push(fmt_f64(r.alpha_lb));
        row.push(fmt_f64(r.alpha_h));
        row.push(fmt_f64(r.alpha_ub));
        row.push(fmt_f64((r.alpha_ub - r.alpha_lb) / r.alpha_ub));
        csv.rows.push(row);
    }
    ensure_dir(&cfg.out_dir)?;
    csv.write(&cfg.out_dir.join("scm.csv"))?;

    let mut cols = vec!["index".to_string()];
    cols.extend(mu_columns("mu", dim));
    cols.extend(["alpha".to_string(), "gap_before".to_string()]);
    let mut csv = Csv::new("scm", cfg, cols);
    for (i, a) in scm.anchors.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(a.mu.iter().map(|&x| fmt_f64(x)));
        row.push(fmt_f64(a.alpha));
        row.push(scm.gap_history.get(i).copied().map(fmt_f64).unwrap_or_default());
        csv.rows.push(row);
    }
    csv.write(&cfg.out_dir.join("scm_anchors.csv"))?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityRow {
    pub h: f64,
    pub alpha_h: f64,
    pub error: f64,
    /// From the error ratio with the previous (coarser) level.
    pub observed_order: Option<f64>,
}

/// `α^h` of the 1D first-order system on `8·2^k` intervals, `k < levels`;
/// writes `coercivity.csv`.
pub fn cmd_demo_coercivity(cfg: &RunConfig) -> Result<Vec<CoercivityRow>> {
    if cfg.coercivity_levels < 3 {
        return invalid("coercivity demo needs at least 3 levels");
    }
    let exact = crate::problems::poisson_1d_alpha();
    let mut rows: Vec<CoercivityRow> = Vec::with_capacity(cfg.coercivity_levels);
    for k in 0..cfg.coercivity_levels {
        let n = 8usize << k;
        let p = poisson_1d_mesh(n)?;
        let a = alpha_h(&p, &p.params.lower)?;
        let error = a - exact;
        let observed_order = rows.last().map(|prev| (prev.error / error).abs().log2());
        rows.push(CoercivityRow { h: 1.0 / n as f64, alpha_h: a, error, observed_order });
    }
    let cols = ["h", "alpha_h", "error", "observed_order"].map(String::from).to_vec();
    let mut csv = Csv::new("demo coercivity", cfg, cols);
    csv.note("alpha_exact", fmt_f64(exact));
    for r in &rows {
        csv.rows.push(vec![fmt_f64(r.h), fmt_f64(r.alpha_h), fmt_f64(r.error), r.observed_order.map(fmt_f64).unwrap_or_default()]);
    }
    ensure_dir(&cfg.out_dir)?;
    csv.write(&cfg.out_dir.join("coercivity.csv"))?;
    Ok(rows)
}

/// Writes `tridiag.csv` for the configured sizes.
pub fn cmd_demo_tridiag(cfg: &RunConfig) -> Result<Vec<TridiagRecord>> {
    let recs: Vec<TridiagRecord> = cfg.tridiag_sizes.iter().map(|&n| tridiag_demo(n)).collect::<Result<_>>()?;
    let cols = ["n", "error", "residual", "lambda_min", "ratio", "lower_bound"].map(String::from).to_vec();
    let mut csv = Csv::new("demo tridiag", cfg, cols);
    for r in &recs {
        csv.rows.push(vec![
            r.n.to_string(),
            fmt_f64(r.error),
            fmt_f64(r.residual),
            fmt_f64(r.lambda_min),
            fmt_f64(r.ratio),
            fmt_f64(r.lower_bound),
        ]);
    }
    ensure_dir(&cfg.out_dir)?;
    csv.write(&cfg.out_dir.join("tridiag.csv"))?;
    Ok(recs)
}
