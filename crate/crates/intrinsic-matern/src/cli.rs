//! The `iwm` command line: configuration, CSV/JSON files and subcommands.
//!
//! Every command reads a JSON run configuration (`"schema": 1`), optionally
//! overridden by flags, and writes CSV or JSON. CSV files start with a
//! `# config sha256:<hex>` line; JSON reports carry the same hash in
//! `config_hash`. Exit codes: 0 success, 2 input error, 3 numerical failure.

use crate::convergence::{variogram_convergence, ConvergenceError};
use crate::extremes::{self, chi, fem_variogram_column, ExceedanceData, ExtremesError, HuslerReiss};
use crate::fem::FemError;
use crate::igmrf::{IgmrfError, IntrinsicGmrf, ModelParams, Orders, ParamError};
use crate::inference::{self, FitMask, FitOptions, FitReport, InferenceError, ObservationSet};
use crate::mesh::{Mesh, MeshError};
use crate::rational::RationalError;
use crate::sparse_core::SparseError;
use crate::variogram::{closed_form, stationary, VariogramError};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        input(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        input(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        input(e)
    }
}

impl From<SparseError> for CliError {
    fn from(e: SparseError) -> Self {
        numerical(e)
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        input(e)
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        input(e)
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        input(e)
    }
}

impl From<VariogramError> for CliError {
    fn from(e: VariogramError) -> Self {
        match e {
            VariogramError::Quadrature { .. } => numerical(e),
            _ => input(e),
        }
    }
}

impl From<IgmrfError> for CliError {
    fn from(e: IgmrfError) -> Self {
        match e {
            IgmrfError::Sparse(_)
            | IgmrfError::Rational(RationalError::NonConvergence { .. })
            | IgmrfError::NotIntrinsic { .. } => numerical(e),
            _ => input(e),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Model(m) => m.into(),
            InferenceError::Sparse(_) | InferenceError::InfeasibleStart => numerical(e),
            _ => input(e),
        }
    }
}

impl From<ExtremesError> for CliError {
    fn from(e: ExtremesError) -> Self {
        match e {
            ExtremesError::Model(m) => m.into(),
            ExtremesError::Inference(i) => i.into(),
            ExtremesError::Sparse(_) => numerical(e),
            _ => input(e),
        }
    }
}

impl From<ConvergenceError> for CliError {
    fn from(e: ConvergenceError) -> Self {
        match e {
            ConvergenceError::Model(m) => m.into(),
            ConvergenceError::Variogram(v) => v.into(),
            _ => input(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "iwm", version, about = "Intrinsic Whittle–Matérn fields and Brown–Resnick extremes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Mesh file.
    #[arg(long, global = true, conflicts_with = "grid")]
    pub mesh: Option<PathBuf>,

    /// Uniform grid, `lo:hi:nodes` per axis joined by `x`.
    #[arg(long, global = true)]
    pub grid: Option<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Fix a parameter, e.g. `beta=1` (repeatable).
    #[arg(long, global = true, value_name = "NAME=VALUE")]
    pub fix: Vec<String>,

    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Observations (`s1[,s2],value`) or exceedances (`site_0,…`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,

    /// Prediction targets (`s1[,s2]`).
    #[arg(long, global = true)]
    pub targets: Option<PathBuf>,

    /// Site coordinates (`s1[,s2]`).
    #[arg(long, global = true)]
    pub sites: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary variogram table.
    Variogram,
    /// Field samples at the mesh nodes or at `--sites`.
    Simulate,
    /// Maximum-likelihood fit.
    Fit {
        /// Fit the Pareto surrogate likelihood to exceedances.
        #[arg(long)]
        extremes: bool,
    },
    /// Posterior mean and standard deviation at targets.
    Krige,
    /// Pareto exceedances for the single-site risk at the anchor.
    ExtremesSimulate,
    /// Surrogate-likelihood fit to exceedances.
    ExtremesFit,
    /// Conditional law of one event at targets.
    ExtremesKrige {
        /// Also write conditional samples here.
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Variogram error under mesh refinement.
    Convergence,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub tau: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub sigma2: f64,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSource {
    Grid(String),
    Path(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VariogramOptions {
    pub h: Option<Vec<f64>>,
    pub h_max: f64,
    pub count: usize,
}

impl Default for VariogramOptions {
    fn default() -> Self {
        VariogramOptions { h: None, h_max: 10.0, count: 51 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub samples: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { samples: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub fix: BTreeMap<String, f64>,
    pub restarts: usize,
    pub max_evaluations: usize,
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        FitConfig {
            fix: BTreeMap::new(),
            restarts: o.restarts,
            max_evaluations: o.max_evaluations,
            tolerance: o.tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExtremesOptions {
    pub anchor: usize,
    pub samples: usize,
    pub conditional_samples: usize,
    /// When set, `--data` holds raw observations: margins are rank-transformed
    /// to the log-exponential scale and rows whose anchor exceeds this
    /// quantile become exceedances.
    pub threshold: Option<f64>,
}

impl Default for ExtremesOptions {
    fn default() -> Self {
        ExtremesOptions { anchor: 0, samples: 1000, conditional_samples: 1000, threshold: None }
    }
}

/// Rank transform of each column to standard Gumbel-type margins
/// `−ln(−ln F̂)`, with `F̂ = rank/(n+1)`, then the rows whose anchor exceeds
/// the `q`-quantile `u`, shifted by `−u`.
pub fn exceedances_from_raw(raw: &[Vec<f64>], anchor: usize, q: f64) -> Result<Vec<Vec<f64>>, CliError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(input(format!("extremes.threshold must lie in (0, 1) (got {q})")));
    }
    let n = raw.len();
    let k = raw.first().map_or(0, Vec::len);
    if anchor >= k {
        return Err(input(format!("anchor {anchor} out of range for {k} sites")));
    }
    let mut scaled = vec![vec![0.0; k]; n];
    for j in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw[a][j].total_cmp(&raw[b][j]));
        for (rank, &i) in order.iter().enumerate() {
            let f = (rank + 1) as f64 / (n + 1) as f64;
            scaled[i][j] = -(-f.ln()).ln();
        }
    }
    let u = -(-q.ln()).ln();
    Ok(scaled
        .into_iter()
        .filter(|r| r[anchor] > u)
        .map(|r| r.into_iter().map(|y| y - u).collect())
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceOptions {
    pub levels: usize,
    pub side: f64,
    pub base_nodes: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { levels: 5, side: 10.0, base_nodes: 11 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub mesh: Option<MeshSource>,
    #[serde(default)]
    pub seed: u64,
    /// Rational orders `[m, m̃]`; chosen from the mesh width when absent.
    #[serde(default)]
    pub orders: Option<[usize; 2]>,
    #[serde(default)]
    pub variogram: VariogramOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub extremes: ExtremesOptions,
    #[serde(default)]
    pub convergence: ConvergenceOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA {
            return Err(input(format!("unsupported config schema {} (expected {SCHEMA})", cfg.schema)));
        }
        Ok(cfg)
    }

    /// SHA-256 of the serialized configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Model parameters with the fixed values applied.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let mut p = ModelParams { tau: m.tau, kappa: m.kappa, alpha: m.alpha, beta: m.beta, nugget: m.sigma2, dim: m.d };
        for (name, &v) in &self.fit.fix {
            match name.as_str() {
                "tau" => p.tau = v,
                "kappa" => p.kappa = v,
                "alpha" => p.alpha = v,
                "beta" => p.beta = v,
                "sigma2" => p.nugget = v,
                _ => return Err(input(format!("unknown parameter '{name}' (expected tau, kappa, alpha, beta or sigma2)"))),
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn mask(&self) -> FitMask {
        let f = |n: &str| self.fit.fix.contains_key(n);
        FitMask { tau: f("tau"), kappa: f("kappa"), alpha: f("alpha"), beta: f("beta"), nugget: f("sigma2") }
    }

    pub fn orders(&self) -> Orders {
        match self.orders {
            Some([m, mt]) => Orders::Fixed(m, mt),
            None => Orders::Auto,
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            restarts: self.fit.restarts,
            max_evaluations: self.fit.max_evaluations,
            tolerance: self.fit.tolerance,
            seed: self.seed,
            orders: self.orders(),
        }
    }

    fn mesh(&self) -> Result<Mesh, CliError> {
        match &self.mesh {
            Some(MeshSource::Grid(spec)) => parse_grid(spec),
            Some(MeshSource::Path(p)) => Ok(Mesh::read(BufReader::new(open(p)?))?),
            None => Err(input("this command needs a mesh (--mesh or --grid)")),
        }
    }
}

/// `lo:hi:nodes[x lo:hi:nodes]`.
pub fn parse_grid(spec: &str) -> Result<Mesh, CliError> {
    let mut extents = Vec::new();
    let mut nodes = Vec::new();
    for axis in spec.split('x') {
        let parts: Vec<&str> = axis.trim().split(':').collect();
        let bad = || input(format!("invalid grid '{spec}' (expected lo:hi:nodes per axis, joined by x)"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        extents.push((lo, hi));
        nodes.push(n);
    }
    Ok(Mesh::build_uniform(extents.len(), &extents, &nodes)?)
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Loads the configuration and applies flag overrides.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let path = common.config.as_ref().ok_or_else(|| input("--config is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(MeshSource::Path(p)) = &cfg.mesh {
        cfg.mesh = Some(MeshSource::Path(resolve(path.parent(), p)));
    }
    if let Some(p) = &common.mesh {
        cfg.mesh = Some(MeshSource::Path(p.clone()));
    }
    if let Some(g) = &common.grid {
        cfg.mesh = Some(MeshSource::Grid(g.clone()));
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    for f in &common.fix {
        let (name, value) = f
            .split_once('=')
            .ok_or_else(|| input(format!("--fix expects NAME=VALUE (got '{f}')")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| input(format!("--fix {name}: '{value}' is not a number")))?;
        cfg.fit.fix.insert(name.trim().to_string(), value);
    }
    Ok(cfg)
}

/// Numeric CSV with a header, `#` comments allowed.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| input(format!("{}: row {} is not numeric", path.display(), line + 1)))?;
        if row.len() != header.len() {
            return Err(input(format!("{}: row {} has {} fields", path.display(), line + 1, row.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn coordinate_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("s{i}")).collect()
}

fn read_sites(path: &Path, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let t = read_table(path)?;
    if t.header != coordinate_names(d) {
        return Err(input(format!("{}: expected columns {}", path.display(), coordinate_names(d).join(","))));
    }
    Ok(t.rows)
}

fn read_observations(path: &Path, d: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>), CliError> {
    let t = read_table(path)?;
    let mut want = coordinate_names(d);
    want.push("value".into());
    if t.header != want {
        return Err(input(format!("{}: expected columns {}", path.display(), want.join(","))));
    }
    Ok(t.rows.into_iter().map(|mut r| {
        let v = r.pop().expect("value column");
        (r, v)
    }).unzip())
}

fn read_exceedances(path: &Path, k: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let t = read_table(path)?;
    let want: Vec<String> = (0..k).map(|i| format!("site_{i}")).collect();
    if t.header != want {
        return Err(input(format!("{}: expected columns site_0..site_{} for {k} sites", path.display(), k.saturating_sub(1))));
    }
    Ok(t.rows)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| input(format!("this command needs --{flag}")))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| input(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_csv(
    out: &Option<PathBuf>,
    hash: &str,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
    trailer: Option<String>,
) -> Result<(), CliError> {
    let mut w = sink(out)?;
    writeln!(w, "# config sha256:{hash}")?;
    {
        let mut c = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut w);
        c.write_record(header)?;
        for r in rows {
            c.write_record(&r)?;
        }
        c.flush()?;
    }
    if let Some(t) = trailer {
        writeln!(w, "# {t}")?;
    }
    w.flush()?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Serialize)]
struct ParamsOut {
    tau: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
    sigma2: f64,
    d: usize,
}

impl From<&ModelParams> for ParamsOut {
    fn from(p: &ModelParams) -> Self {
        ParamsOut { tau: p.tau, kappa: p.kappa, alpha: p.alpha, beta: p.beta, sigma2: p.nugget, d: p.dim }
    }
}

#[derive(Debug, Serialize)]
struct ChiPoint {
    site: usize,
    distance: f64,
    chi: f64,
}

#[derive(Debug, Serialize)]
struct FitOut<'a> {
    schema: u32,
    config_hash: &'a str,
    command: &'a str,
    params: ParamsOut,
    fixed: Vec<&'a str>,
    loglik: f64,
    initial_loglik: f64,
    converged: bool,
    iterations: usize,
    evaluations: usize,
    orders: inference::OrderReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi: Option<Vec<ChiPoint>>,
}

fn write_json(out: &Option<PathBuf>, value: &impl Serialize) -> Result<(), CliError> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Generator for sample `i` under master seed `seed`.
fn stream(seed: u64, i: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn cmd_variogram(cfg: &RunConfig, out: &Option<PathBuf>) -> Result<(), CliError> {
    let p = cfg.params()?;
    let v = &cfg.variogram;
    let hs: Vec<f64> = match &v.h {
        Some(h) => h.clone(),
        None => {
            if v.count < 2 {
                return Err(input("variogram.count must be at least 2"));
            }
            (0..v.count).map(|i| v.h_max * i as f64 / (v.count - 1) as f64).collect()
        }
    };
    if let Some(h) = hs.iter().find(|h| !(**h >= 0.0 && h.is_finite())) {
        return Err(input(format!("lag {h} must be finite and non-negative")));
    }
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let (g, backend) = match closed_form(&p, h) {
            Ok(g) => (g, "closed_form"),
            Err(VariogramError::OutOfRegime(_)) => (stationary(&p, h)?, "quadrature"),
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![num(h), num(g), backend.to_string()]);
    }
    let header = ["h", "gamma", "backend"].map(String::from);
    write_csv(out, &cfg.hash(), &header, rows, None)
}

fn cmd_simulate(cfg: &RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let model = IntrinsicGmrf::build(&mesh, p, cfg.orders())?;
    let sampler = model.sampler()?;
    let n = cfg.simulate.samples.max(1);
    let noise_sd = (p.nugget / 2.0).sqrt();
    let (points, a) = match &common.sites {
        Some(path) => {
            let sites = read_sites(path, p.dim)?;
            let a = model.projection(&sites)?;
            (sites, Some(a))
        }
        None => ((0..mesh.n_vertices()).map(|i| mesh.vertex(i).to_vec()).collect(), None),
    };
    let mut columns = Vec::with_capacity(n);
    for s in 0..n {
        let mut rng = stream(cfg.seed, s);
        let w = sampler.draw(&mut rng)?;
        columns.push(match &a {
            Some(a) => a
                .mul_vec(&w)
                .into_iter()
                .map(|x| x + noise_sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            None => w,
        });
    }
    let mut header = coordinate_names(p.dim);
    if n == 1 {
        header.push("value".into());
    } else {
        header.extend((1..=n).map(|i| format!("value_{i}")));
    }
    let rows = points.iter().enumerate().map(|(i, pt)| {
        pt.iter().map(|x| num(*x)).chain(columns.iter().map(|c| num(c[i]))).collect()
    });
    write_csv(&common.out, &cfg.hash(), &header, rows, None)
}

fn fit_out<'a>(cfg: &'a RunConfig, hash: &'a str, command: &'a str, r: &FitReport) -> FitOut<'a> {
    FitOut {
        schema: SCHEMA,
        config_hash: hash,
        command,
        params: (&r.params).into(),
        fixed: cfg.fit.fix.keys().map(String::as_str).collect(),
        loglik: r.loglik,
        initial_loglik: r.initial_loglik,
        converged: r.converged,
        iterations: r.iterations,
        evaluations: r.evaluations,
        orders: r.orders,
        anchor: None,
        chi: None,
    }
}

fn cmd_fit(cfg: &RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let (sites, values) = read_observations(required(&common.data, "data")?, p.dim)?;
    let obs = ObservationSet::new(sites, values)?;
    let report = inference::fit(&mesh, &obs, p, cfg.mask(), &cfg.fit_options())?;
    let hash = cfg.hash();
    write_json(&common.out, &fit_out(cfg, &hash, "fit", &report))
}

fn cmd_krige(cfg: &RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let (sites, values) = read_observations(required(&common.data, "data")?, p.dim)?;
    let targets = read_sites(required(&common.targets, "targets")?, p.dim)?;
    let model = IntrinsicGmrf::build(&mesh, p, cfg.orders())?;
    let post = inference::posterior(&model, &ObservationSet::new(sites, values)?)?;
    let a = model.projection(&targets)?;
    let mean = post.predict(&a);
    let var = post.predictive_variance(&a)?;
    let mut header = coordinate_names(p.dim);
    header.extend(["mean", "sd"].map(String::from));
    let rows = targets.iter().enumerate().map(|(i, t)| {
        t.iter().map(|x| num(*x)).chain([num(mean[i]), num(var[i].max(0.0).sqrt())]).collect()
    });
    write_csv(&common.out, &cfg.hash(), &header, rows, None)
}

fn cmd_extremes_simulate(cfg: &RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let sites = read_sites(required(&common.sites, "sites")?, p.dim)?;
    let model = IntrinsicGmrf::build(&mesh, p, cfg.orders())?;
    let rows = extremes::simulate_pareto(&model, &sites, cfg.extremes.anchor, cfg.extremes.samples, cfg.seed)?;
    let header: Vec<String> = (0..sites.len()).map(|i| format!("site_{i}")).collect();
    write_csv(&common.out, &cfg.hash(), &header, rows.iter().map(|r| r.iter().map(|x| num(*x)).collect()), None)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn cmd_extremes_fit(cfg: &RunConfig, common: &CommonArgs) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let sites = read_sites(required(&common.sites, "sites")?, p.dim)?;
    let mut rows = read_exceedances(required(&common.data, "data")?, sites.len())?;
    let anchor = cfg.extremes.anchor;
    if let Some(q) = cfg.extremes.threshold {
        rows = exceedances_from_raw(&rows, anchor, q)?;
    }
    let data = ExceedanceData { sites, rows };
    let report = extremes::fit_pareto(&mesh, &data, anchor, p, cfg.mask(), &cfg.fit_options())?;
    let fitted = IntrinsicGmrf::build(
        &mesh,
        report.params,
        Orders::Fixed(report.orders.m, report.orders.m_tilde),
    )?;
    let column = fem_variogram_column(&fitted, &fitted.projection(&data.sites)?, anchor)?;
    let curve = data
        .sites
        .iter()
        .enumerate()
        .map(|(j, s)| ChiPoint { site: j, distance: distance(s, &data.sites[anchor]), chi: chi(column[j]) })
        .collect();
    let hash = cfg.hash();
    let mut out = fit_out(cfg, &hash, "extremes-fit", &report);
    out.anchor = Some(anchor);
    out.chi = Some(curve);
    write_json(&common.out, &out)
}

fn cmd_extremes_krige(cfg: &RunConfig, common: &CommonArgs, samples_out: &Option<PathBuf>) -> Result<(), CliError> {
    let p = cfg.params()?;
    let mesh = cfg.mesh()?;
    let (sites, values) = read_observations(required(&common.data, "data")?, p.dim)?;
    let targets = read_sites(required(&common.targets, "targets")?, p.dim)?;
    let model = IntrinsicGmrf::build(&mesh, p, cfg.orders())?;
    let mut all = sites.clone();
    all.extend(targets.iter().cloned());
    let gamma = model.fem_variogram(&model.projection(&all)?)?;
    let hr = HuslerReiss::from_variogram(&gamma)?;
    let observed: Vec<usize> = (0..sites.len()).collect();
    let law = hr.conditional_law(&observed, &values)?;
    let var = law.factor().inverse_diagonal()?;
    let mut header = coordinate_names(p.dim);
    header.extend(["mean", "sd"].map(String::from));
    let hash = cfg.hash();
    let rows = targets.iter().enumerate().map(|(i, t)| {
        t.iter().map(|x| num(*x)).chain([num(law.mean[i]), num(var[i].max(0.0).sqrt())]).collect()
    });
    write_csv(&common.out, &hash, &header, rows, None)?;
    if samples_out.is_some() {
        let draws = extremes::conditional_simulate(&hr, &observed, &values, cfg.extremes.conditional_samples, cfg.seed)?;
        let header: Vec<String> = (0..targets.len()).map(|i| format!("target_{i}")).collect();
        write_csv(samples_out, &hash, &header, draws.iter().map(|r| r.iter().map(|x| num(*x)).collect()), None)?;
    }
    Ok(())
}

fn cmd_convergence(cfg: &RunConfig, out: &Option<PathBuf>) -> Result<(), CliError> {
    let p = cfg.params()?;
    let c = &cfg.convergence;
    let study = variogram_convergence(&p, c.side, c.base_nodes, c.levels, cfg.orders())?;
    let header = ["delta", "error", "m", "m_tilde"].map(String::from);
    let rows = study
        .levels
        .iter()
        .map(|l| vec![num(l.delta), num(l.error), l.m.to_string(), l.m_tilde.to_string()]);
    write_csv(out, &cfg.hash(), &header, rows, Some(format!("slope {}", study.slope)))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let common = &cli.common;
    match &cli.command {
        Command::Variogram => cmd_variogram(&cfg, &common.out),
        Command::Simulate => cmd_simulate(&cfg, common),
        Command::Fit { extremes: false } => cmd_fit(&cfg, common),
        Command::Fit { extremes: true } | Command::ExtremesFit => cmd_extremes_fit(&cfg, common),
        Command::Krige => cmd_krige(&cfg, common),
        Command::ExtremesSimulate => cmd_extremes_simulate(&cfg, common),
        Command::ExtremesKrige { samples_out } => cmd_extremes_krige(&cfg, common, samples_out),
        Command::Convergence => cmd_convergence(&cfg, &common.out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig::from_json(r#"{"schema": 1, "model": {"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}}"#).unwrap()
    }

    #[test]
    fn config_schema_and_unknown_keys() {
        let cfg = config();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.extremes, ExtremesOptions::default());
        let bad = r#"{"schema": 1, "model": {"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}, "colour": 2}"#;
        assert_eq!(RunConfig::from_json(bad).unwrap_err().exit_code(), 2);
        let bad = r#"{"schema": 1, "model": {"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1, "nu": 1}}"#;
        assert!(RunConfig::from_json(bad).is_err());
        let bad = r#"{"schema": 2, "model": {"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn hash_tracks_the_resolved_config() {
        let a = config();
        let mut b = config();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn fixed_parameters() {
        let mut cfg = config();
        cfg.fit.fix.insert("beta".into(), 0.5);
        cfg.fit.fix.insert("sigma2".into(), 0.2);
        let p = cfg.params().unwrap();
        assert_eq!((p.beta, p.nugget), (0.5, 0.2));
        let m = cfg.mask();
        assert!(m.beta && m.nugget && !m.tau && !m.kappa && !m.alpha);
        cfg.fit.fix.insert("nu".into(), 1.0);
        assert_eq!(cfg.params().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn grids() {
        let m = parse_grid("0:10:11").unwrap();
        assert_eq!((m.dim(), m.n_vertices()), (1, 11));
        let m = parse_grid("0:1:3x0:2:4").unwrap();
        assert_eq!((m.dim(), m.n_vertices()), (2, 12));
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:x").is_err());
    }

    #[test]
    fn raw_data_to_exceedances() {
        let raw: Vec<Vec<f64>> = (0..99).map(|i| vec![i as f64, -(i as f64), ((i * 37) % 99) as f64]).collect();
        let rows = exceedances_from_raw(&raw, 0, 0.9).unwrap();
        // Ranks 90..99 of 100 exceed the 0.9 quantile.
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r[0] > 0.0 && r[1] < 0.0));
        let top = rows.iter().map(|r| r[0]).fold(f64::MIN, f64::max);
        let want = -(-(0.99f64).ln()).ln() + (-(0.9f64).ln()).ln();
        assert!((top - want).abs() < 1e-12);
        assert!(exceedances_from_raw(&raw, 3, 0.9).is_err());
        assert!(exceedances_from_raw(&raw, 0, 1.0).is_err());
    }

    #[test]
    fn error_classes() {
        let e: CliError = SparseError::UnknownNullSpace.into();
        assert_eq!(e.exit_code(), 3);
        let e: CliError = InferenceError::TooFewObservations(1).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = ExtremesError::Inference(InferenceError::InfeasibleStart).into();
        assert_eq!(e.exit_code(), 3);
    }
}
