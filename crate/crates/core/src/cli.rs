//! Batch driver: argument parsing, config-file merging, dispatch and serialization.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::dominant_quadratic_spectrum;
use crate::background::{
    constant_residual, solve_constant, solve_nonlinear, ModelParams, NewtonOptions,
};
use crate::error::{RgError, RgResult};
use crate::flow::{run_flow, FlowConfig};
use crate::lattice_ops::AveragingProfile;
use crate::norms::{coupling_constant, kernel_norm, kernel_norm_with, Kernel, TreeMetric};
use crate::spectral::FiberLayout;
use crate::symbols::{
    classify_regime, fit_symbol, soft_eigenvalue, symbol_one_minus_qsq, symbol_one_minus_qsquare,
    RegimeThresholds, SmallKFit, SymbolParams, TimeMode,
};
use crate::torus::{make_shape, Field, FieldPair, Level, Momentum, C64};

pub const SCHEMA_VERSION: u32 = 1;

const DELTA_FIXTURE: &str = include_str!("../fixtures/delta_kernel.txt");

#[derive(Debug, Parser)]
#[command(name = "prg", version, about = "Parabolic block-spin RG laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quadratic-level parameter flow with well geometry per step.
    Flow(FlowArgs),
    /// Momentum-space symbol table and small-k fits.
    Symbol(SymbolArgs),
    /// Constant-field roots and, optionally, a random small-field solve.
    Background(BackgroundArgs),
    /// Spectrum of the dominant quadratic kernel.
    Spectrum(CommonArgs),
    /// Tree-weighted kernel norms.
    Norms(NormsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long = "Nt")]
    pub nt: Option<usize>,
    #[arg(long = "Nx")]
    pub nx: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    /// discrete | continuum-pretend
    #[arg(long)]
    pub mode: Option<String>,
    /// sharp | smooth
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub v0: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "mu-star")]
    pub mu_star: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SymbolArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Half-width of the small-k fit window.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BackgroundArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Constant external field for the cubic.
    #[arg(long)]
    pub psi: Option<f64>,
    /// Amplitude of a random external field for a full solve (0 skips it).
    #[arg(long)]
    pub amp: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct NormsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sparse kernel file; the bundled delta kernel when absent.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub arity: Option<usize>,
    /// Decay rate of the tree weight.
    #[arg(long)]
    pub m: Option<f64>,
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "L")]
    pub l: Option<usize>,
    pub n: Option<u32>,
    #[serde(rename = "Nt")]
    pub nt: Option<usize>,
    #[serde(rename = "Nx")]
    pub nx: Option<usize>,
    pub mu: Option<f64>,
    pub v: Option<f64>,
    pub d: Option<f64>,
    pub mode: Option<String>,
    pub profile: Option<String>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub mu0: Option<f64>,
    pub v0: Option<f64>,
    pub eps: Option<f64>,
    pub mu_star: Option<f64>,
    pub threshold: Option<f64>,
    pub window: Option<f64>,
    pub psi: Option<f64>,
    pub amp: Option<f64>,
    pub kernel: Option<PathBuf>,
    pub arity: Option<usize>,
    pub m: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> RgResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RgError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| RgError::Config(format!("{}: {e}", path.display())))
    }
}

/// Validated settings after merging flags over the config file over defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub l: usize,
    pub n: u32,
    pub nt: usize,
    pub nx: usize,
    pub mu: f64,
    pub v: f64,
    pub d: f64,
    pub mode: TimeMode,
    pub profile: AveragingProfile,
    pub tol: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

fn positive(name: &str, x: f64) -> RgResult<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(RgError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn nonneg(name: &str, x: f64) -> RgResult<f64> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(RgError::Config(format!("{name} must be nonnegative and finite, got {x}")))
    }
}

impl RunConfig {
    fn resolve(c: &CommonArgs, f: &FileConfig) -> RgResult<Self> {
        let l = c.l.or(f.l).unwrap_or(3);
        let n = c.n.or(f.n).unwrap_or(1);
        let nt = c.nt.or(f.nt).unwrap_or(2);
        let nx = c.nx.or(f.nx).unwrap_or(2);
        make_shape(n, l, nt, nx)?;
        let mode = TimeMode::parse(c.mode.as_deref().or(f.mode.as_deref()).unwrap_or("discrete"))?;
        let profile = AveragingProfile::parse(c.profile.as_deref().or(f.profile.as_deref()).unwrap_or("sharp"))?;
        let d = c.d.or(f.d).unwrap_or(1.0);
        if !(d >= 1.0 && d.is_finite()) {
            return Err(RgError::Config(format!("d must be >= 1, got {d}")));
        }
        Ok(RunConfig {
            l,
            n,
            nt,
            nx,
            mu: nonneg("mu", c.mu.or(f.mu).unwrap_or(0.0))?,
            v: nonneg("v", c.v.or(f.v).unwrap_or(0.0))?,
            d,
            mode,
            profile,
            tol: positive("tol", c.tol.or(f.tol).unwrap_or(1e-10))?,
            out: c.out.clone().or(f.out.clone()),
            format: c.format.or(f.format).unwrap_or(Format::Json),
            seed: c.seed.or(f.seed).unwrap_or(0),
        })
    }

    fn shape(&self) -> RgResult<crate::torus::TorusShape> {
        make_shape(self.n, self.l, self.nt, self.nx)
    }

    fn symbol_params(&self) -> RgResult<SymbolParams> {
        Ok(SymbolParams {
            shape: self.shape()?,
            mu: self.mu,
            d: self.d,
            mode: self.mode,
            profile: self.profile,
        })
    }
}

fn file_config(c: &CommonArgs) -> RgResult<FileConfig> {
    match &c.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn schema(cmd: &str) -> String {
    format!("prg/{cmd}/v{SCHEMA_VERSION}")
}

fn emit(cfg: &RunConfig, json: &impl Serialize, csv_rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> RgResult<()>) -> RgResult<()> {
    let bytes = match cfg.format {
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(json).map_err(|e| RgError::Numerical(e.to_string()))?;
            s.push(b'\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            csv_rows(&mut w)?;
            w.into_inner().map_err(|e| RgError::Numerical(e.to_string()))?
        }
    };
    match &cfg.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> RgError {
    RgError::Numerical(format!("csv: {e}"))
}

#[derive(Debug, Clone, Serialize)]
struct FlowRow {
    schema: String,
    n: u32,
    mu: f64,
    mu_closed_form: f64,
    mu_ratio: Option<f64>,
    v: f64,
    a: Option<f64>,
    kappa: f64,
    kappa_prime: f64,
    radius: f64,
    depth: f64,
    depth_per_site: f64,
    regime: String,
}

#[derive(Debug, Serialize)]
struct FlowReport {
    schema: String,
    config: RunConfig,
    mu0: f64,
    v0: f64,
    n_max: u32,
    stop: crate::flow::StopReason,
    admissible: bool,
    rows: Vec<FlowRow>,
}

fn regime_name(r: crate::symbols::Regime) -> String {
    serde_json::to_value(r).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn cmd_flow(args: &FlowArgs) -> RgResult<()> {
    let file = file_config(&args.common)?;
    let cfg = RunConfig::resolve(&args.common, &file)?;
    let mu0 = nonneg("mu0", args.mu0.or(file.mu0).unwrap_or(1e-5))?;
    let v0 = positive("v0", args.v0.or(file.v0).unwrap_or(1e-5))?;
    let mut fc = FlowConfig::new(mu0, v0, cfg.l);
    fc.eps = args.eps.or(file.eps).unwrap_or(fc.eps);
    fc.mu_star = nonneg("mu_star", args.mu_star.or(file.mu_star).unwrap_or(0.0))?;
    fc.threshold = positive("threshold", args.threshold.or(file.threshold).unwrap_or(0.5))?;
    fc.d = cfg.d;
    fc.mode = cfg.mode;
    fc.profile = cfg.profile;
    if !crate::flow::in_admissible_window(mu0, v0, fc.mu_star) {
        eprintln!(
            "warning: mu0={mu0} lies outside the admissible window ({}, {})",
            fc.mu_star + v0.powf(1.25),
            v0.powf(0.9)
        );
    }
    let trace = run_flow(&fc, &cfg.shape()?)?;
    let sch = schema("flow");
    let rows: Vec<FlowRow> = trace
        .steps
        .iter()
        .map(|s| FlowRow {
            schema: sch.clone(),
            n: s.params.n,
            mu: s.params.mu,
            mu_closed_form: s.mu_closed_form,
            mu_ratio: s.mu_ratio,
            v: s.params.v,
            a: s.params.a,
            kappa: s.params.kappa,
            kappa_prime: s.params.kappa_prime,
            radius: s.well.radius,
            depth: s.well.depth,
            depth_per_site: s.well.depth_per_site,
            regime: regime_name(s.regime),
        })
        .collect();
    let report = FlowReport {
        schema: sch,
        config: cfg.clone(),
        mu0,
        v0,
        n_max: trace.n_max,
        stop: trace.stop,
        admissible: trace.admissible,
        rows: rows.clone(),
    };
    emit(&cfg, &report, |w| {
        for r in &rows {
            w.serialize(r).map_err(csv_err)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Default, Serialize)]
struct SymbolRow {
    schema: String,
    kind: String,
    k0: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
    s_re: Option<f64>,
    s_im: Option<f64>,
    m11_re: Option<f64>,
    m11_im: Option<f64>,
    m12_re: Option<f64>,
    m12_im: Option<f64>,
    m21_re: Option<f64>,
    m21_im: Option<f64>,
    m22_re: Option<f64>,
    m22_im: Option<f64>,
    target: Option<String>,
    window: Option<f64>,
    mass_re: Option<f64>,
    mass_im: Option<f64>,
    minus_ik0_re: Option<f64>,
    minus_ik0_im: Option<f64>,
    k0sq_re: Option<f64>,
    k0sq_im: Option<f64>,
    ksq_re: Option<f64>,
    ksq_im: Option<f64>,
    residual: Option<f64>,
    regime: Option<String>,
}

#[derive(Debug, Serialize)]
struct SymbolReport {
    schema: String,
    config: RunConfig,
    grid: Vec<SymbolRow>,
    fits: Vec<SymbolRow>,
}

fn fit_row(sch: &str, target: &str, fit: &SmallKFit, regime: Option<String>) -> SymbolRow {
    SymbolRow {
        schema: sch.to_string(),
        kind: "fit".into(),
        target: Some(target.into()),
        window: Some(fit.window),
        mass_re: Some(fit.mass().re),
        mass_im: Some(fit.mass().im),
        minus_ik0_re: Some(fit.minus_ik0().re),
        minus_ik0_im: Some(fit.minus_ik0().im),
        k0sq_re: Some(fit.k0_sq().re),
        k0sq_im: Some(fit.k0_sq().im),
        ksq_re: Some(fit.k_sq().re),
        ksq_im: Some(fit.k_sq().im),
        residual: Some(fit.residual),
        regime,
        ..Default::default()
    }
}

pub fn cmd_symbol(args: &SymbolArgs) -> RgResult<()> {
    let file = file_config(&args.common)?;
    let cfg = RunConfig::resolve(&args.common, &file)?;
    let window = positive("window", args.window.or(file.window).unwrap_or(0.1))?;
    if window > std::f64::consts::PI {
        return Err(RgError::Config("fit window must lie inside the first Brillouin zone".into()));
    }
    let sp = cfg.symbol_params()?;
    let sch = schema("symbol");
    let layout = FiberLayout::new(&sp.shape);
    let mut grid = Vec::new();
    for a in 0..layout.unit_count() {
        let k = layout.unit_momentum(a);
        let s = symbol_one_minus_qsq(k, &sp).ok();
        let m = symbol_one_minus_qsquare(k, &sp)?;
        grid.push(SymbolRow {
            schema: sch.clone(),
            kind: "grid".into(),
            k0: Some(k.k0),
            k1: Some(k.k[0]),
            k2: Some(k.k[1]),
            k3: Some(k.k[2]),
            s_re: s.map(|z| z.re),
            s_im: s.map(|z| z.im),
            m11_re: Some(m.m[0][0].re),
            m11_im: Some(m.m[0][0].im),
            m12_re: Some(m.m[0][1].re),
            m12_im: Some(m.m[0][1].im),
            m21_re: Some(m.m[1][0].re),
            m21_im: Some(m.m[1][0].im),
            m22_re: Some(m.m[1][1].re),
            m22_im: Some(m.m[1][1].im),
            ..Default::default()
        });
    }
    let th = RegimeThresholds::default();
    let fit_params = SymbolParams {
        shape: make_shape(cfg.n, cfg.l, 1, 1)?,
        ..sp
    };
    let soft = fit_symbol(window, |k| soft_eigenvalue(k, &fit_params))?;
    let tangential = fit_symbol(window, |k| Ok(symbol_one_minus_qsquare(k, &fit_params)?.m[1][1]))?;
    let mut fits = vec![
        fit_row(&sch, "soft_eigenvalue", &soft, Some(regime_name(classify_regime(&soft, &th)))),
        fit_row(&sch, "tangential", &tangential, None),
    ];
    if let Ok(scalar) = fit_symbol(window, |k| symbol_one_minus_qsq(k, &fit_params)) {
        fits.push(fit_row(&sch, "one_minus_qsq", &scalar, None));
    }
    let radial = symbol_one_minus_qsquare(Momentum::zero(), &fit_params)?.m[0][0];
    fits.push(SymbolRow {
        schema: sch.clone(),
        kind: "radial_zero".into(),
        mass_re: Some(radial.re),
        mass_im: Some(radial.im),
        ..Default::default()
    });
    let report = SymbolReport {
        schema: sch,
        config: cfg.clone(),
        grid: grid.clone(),
        fits: fits.clone(),
    };
    emit(&cfg, &report, |w| {
        for r in grid.iter().chain(&fits) {
            w.serialize(r).map_err(csv_err)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Serialize)]
struct BackgroundRow {
    schema: String,
    kind: String,
    value: f64,
    residual: f64,
    iterations: Option<usize>,
    converged: Option<bool>,
}

#[derive(Debug, Serialize)]
struct BackgroundReport {
    schema: String,
    config: RunConfig,
    psi: f64,
    roots: Vec<f64>,
    root_residuals: Vec<f64>,
    solve: Option<SolveSummary>,
}

#[derive(Debug, Clone, Serialize)]
struct SolveSummary {
    amplitude: f64,
    residual: [f64; 2],
    iterations: usize,
    converged: bool,
    phi_sup: f64,
}

pub fn cmd_background(args: &BackgroundArgs) -> RgResult<()> {
    let file = file_config(&args.common)?;
    let cfg = RunConfig::resolve(&args.common, &file)?;
    let psi = args.psi.or(file.psi).unwrap_or(0.0);
    let amp = nonneg("amp", args.amp.or(file.amp).unwrap_or(0.0))?;
    let params = ModelParams::new(cfg.mu, cfg.v, cfg.d)?;
    let roots = solve_constant(psi, &params);
    let root_residuals: Vec<f64> = roots.iter().map(|&r| constant_residual(r, psi, &params)).collect();
    let solve = if amp > 0.0 {
        let shape = cfg.shape()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let ext = FieldPair::new(
            Field::random(shape, Level::Unit, amp, &mut rng),
            Field::random(shape, Level::Unit, amp, &mut rng),
        )?;
        let opts = NewtonOptions {
            tol: cfg.tol,
            ..Default::default()
        };
        let sol = solve_nonlinear(&ext, &params, cfg.profile, &opts)?;
        if !sol.converged {
            return Err(RgError::NoConvergence {
                iterations: sol.iterations,
                residual: sol.residual[0].max(sol.residual[1]),
            });
        }
        Some(SolveSummary {
            amplitude: amp,
            residual: sol.residual,
            iterations: sol.iterations,
            converged: sol.converged,
            phi_sup: sol.phi.sup_norm().max(sol.phi_star.sup_norm()),
        })
    } else {
        None
    };
    let sch = schema("background");
    let mut rows: Vec<BackgroundRow> = roots
        .iter()
        .zip(&root_residuals)
        .map(|(&r, &e)| BackgroundRow {
            schema: sch.clone(),
            kind: "root".into(),
            value: r,
            residual: e,
            iterations: None,
            converged: None,
        })
        .collect();
    if let Some(s) = &solve {
        rows.push(BackgroundRow {
            schema: sch.clone(),
            kind: "solve".into(),
            value: s.phi_sup,
            residual: s.residual[0].max(s.residual[1]),
            iterations: Some(s.iterations),
            converged: Some(s.converged),
        });
    }
    let report = BackgroundReport {
        schema: sch,
        config: cfg.clone(),
        psi,
        roots,
        root_residuals,
        solve,
    };
    emit(&cfg, &report, |w| {
        for r in &rows {
            w.serialize(r).map_err(csv_err)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumRow {
    schema: String,
    eigenvalue_count: usize,
    min_distance: f64,
    sqrt_residual: f64,
    min_sqrt_real: f64,
    violation: bool,
}

#[derive(Debug, Serialize)]
struct SpectrumOut {
    schema: String,
    config: RunConfig,
    eigenvalue_count: usize,
    min_distance: f64,
    sqrt_residual: f64,
    min_sqrt_real: f64,
    violation: bool,
    zero_momentum: Vec<C64>,
}

pub fn cmd_spectrum(args: &CommonArgs) -> RgResult<()> {
    let file = file_config(args)?;
    let cfg = RunConfig::resolve(args, &file)?;
    if cfg.mode != TimeMode::Discrete {
        return Err(RgError::Config("spectrum is computed for the lattice operator; use --mode discrete".into()));
    }
    let r = dominant_quadratic_spectrum(&cfg.symbol_params()?)?;
    let sch = schema("spectrum");
    let row = SpectrumRow {
        schema: sch.clone(),
        eigenvalue_count: r.eigenvalue_count,
        min_distance: r.min_distance,
        sqrt_residual: r.sqrt_residual,
        min_sqrt_real: r.min_sqrt_real,
        violation: r.violation,
    };
    let out = SpectrumOut {
        schema: sch,
        config: cfg.clone(),
        eigenvalue_count: r.eigenvalue_count,
        min_distance: r.min_distance,
        sqrt_residual: r.sqrt_residual,
        min_sqrt_real: r.min_sqrt_real,
        violation: r.violation,
        zero_momentum: r.zero_momentum,
    };
    emit(&cfg, &out, |w| w.serialize(&row).map_err(csv_err))?;
    if r.violation {
        return Err(RgError::Numerical("spectrum touches the closed negative real axis".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct NormsRow {
    schema: String,
    arity: usize,
    entries: usize,
    m: f64,
    norm: f64,
    norm_mst_bound: f64,
    coupling_constant: f64,
}

pub fn cmd_norms(args: &NormsArgs) -> RgResult<()> {
    let file = file_config(&args.common)?;
    let cfg = RunConfig::resolve(&args.common, &file)?;
    let arity = args.arity.or(file.arity).unwrap_or(4);
    let m = nonneg("m", args.m.or(file.m).unwrap_or(0.0))?;
    let text = match args.kernel.clone().or(file.kernel.clone()) {
        Some(p) => std::fs::read_to_string(&p)
            .map_err(|e| RgError::Config(format!("{}: {e}", p.display())))?,
        None => DELTA_FIXTURE.to_string(),
    };
    let dims = cfg.shape()?.extents(Level::Unit);
    let k = Kernel::parse_text(&text, arity, dims, true)?;
    let row = NormsRow {
        schema: schema("norms"),
        arity,
        entries: k.entries.len(),
        m,
        norm: kernel_norm(&k, m)?,
        norm_mst_bound: kernel_norm_with(&k, m, TreeMetric::MstUpperBound)?,
        coupling_constant: coupling_constant(&k, m)?,
    };
    emit(&cfg, &row, |w| w.serialize(&row).map_err(csv_err))
}

pub fn run(cli: &Cli) -> RgResult<()> {
    match &cli.command {
        Command::Flow(a) => cmd_flow(a),
        Command::Symbol(a) => cmd_symbol(a),
        Command::Background(a) => cmd_background(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Norms(a) => cmd_norms(a),
    }
}

/// Exit code for a run result: 0 ok, 2 configuration error, 3 numerical failure.
pub fn exit_code(r: &RgResult<()>) -> i32 {
    match r {
        Ok(()) => 0,
        Err(e) if e.is_config() => 2,
        Err(_) => 3,
    }
}
