use std::fmt;
use std::path::Path;

use dqfi_core::dsl::{compile, parse_model, CompiledModel};
use dqfi_core::fisher::FisherResult;
use dqfi_core::liouville::{build_liouvillian, models};
use dqfi_core::pipeline::{EvalOptions, Evaluator, RoutePolicy};
use dqfi_core::spectral::biorthogonal_spectrum;
use dqfi_core::twolevel::{self, figure_data, FigureGrid, FigureKind, TwoLevelParams};
use rayon::prelude::*;

use crate::output::{num, opt, sha256, Table};
use crate::{GridArgs, ModelArgs};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input, bad flags, unwritable output.
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<dqfi_core::Error> for CliError {
    fn from(e: dqfi_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: Option<&Path>) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| match path {
        Some(p) => CliError::Input(format!("cannot write {}: {e}", p.display())),
        None => CliError::Input(format!("cannot write output: {e}")),
    }
}

struct Loaded {
    compiled: CompiledModel,
    theta: f64,
    hash: String,
    path: String,
}

fn load(args: &ModelArgs) -> CliResult<Loaded> {
    let path = args.model.display().to_string();
    let text = std::fs::read_to_string(&args.model).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let mut spec = parse_model(&text).map_err(|d| CliError::Input(format!("{path}:{d}")))?;
    for item in &args.set {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects NAME=VALUE, got '{item}'")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("--set {name}: '{value}' is not a number")))?;
        spec.set(name.trim(), v).map_err(CliError::Input)?;
    }
    let compiled = compile(&spec).map_err(|d| CliError::Input(format!("{path}:{d}")))?;
    let theta = args.theta.unwrap_or(compiled.default_theta);
    Ok(Loaded { hash: sha256(&spec.to_string()), compiled, theta, path })
}

fn model_meta(t: &mut Table, l: &Loaded) {
    t.meta("model", format!("{} sha256={}", l.path, l.hash));
    t.meta("parameter", l.compiled.param_name.clone());
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Numeric(e.to_string()))
}

pub fn spectrum(args: &ModelArgs, out: Option<&Path>) -> CliResult<()> {
    let l = load(args)?;
    let lm = build_liouvillian(&l.compiled.model, l.theta)?;
    let s = biorthogonal_spectrum(&lm.matrix)?;
    let mut t = Table::new(vec!["index", "re", "im", "left_norm", "ep_flag"]);
    model_meta(&mut t, &l);
    t.meta("theta", num(l.theta));
    t.meta("vectorization", lm.convention.to_string());
    for (k, z) in s.values.iter().enumerate() {
        let ep = s.ep_clusters.iter().any(|c| c.members.contains(&k));
        t.rows.push(vec![
            (k + 1).to_string(),
            num(z.re),
            num(z.im),
            num(s.left[k].norm()),
            u8::from(ep).to_string(),
        ]);
    }
    t.emit(out).map_err(io_err(out))
}

pub fn generator(args: &ModelArgs, time: f64, route: &str, out: Option<&Path>) -> CliResult<()> {
    let l = load(args)?;
    let policy: RoutePolicy = route.parse().map_err(|e: dqfi_core::Error| CliError::Input(e.to_string()))?;
    if !(time >= 0.0) {
        return Err(CliError::Input(format!("--t must be >= 0, got {time}")));
    }
    let ev = Evaluator::new(&l.compiled.model, l.theta, &l.compiled.probe, policy)?;
    let g = match policy {
        RoutePolicy::Auto => ev.generator_auto(time)?,
        RoutePolicy::Fixed(r) => ev.generator(r, time)?,
    };
    let mut t = Table::new(vec!["row", "col", "re", "im"]);
    model_meta(&mut t, &l);
    t.meta("theta", num(l.theta));
    t.meta("t", num(time));
    t.meta("route", g.route.to_string());
    let n = g.xi.rows();
    for i in 0..n {
        for j in 0..n {
            let z = g.xi[(i, j)];
            t.rows.push(vec![i.to_string(), j.to_string(), num(z.re), num(z.im)]);
        }
    }
    t.emit(out).map_err(io_err(out))
}

/// Linear time grid; start ≥ 0, stop > start, at least two points.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
    pub params: Vec<f64>,
    pub policy: RoutePolicy,
    pub protocols: u64,
}

impl SweepConfig {
    fn times(&self) -> Vec<f64> {
        twolevel::linspace(self.t0, self.t1, self.nt)
    }
}

fn sweep_config(l: &Loaded, g: &GridArgs, use_file_params: bool) -> CliResult<SweepConfig> {
    let s = &l.compiled.sweep;
    let t0 = g.t0.or(s.t0).unwrap_or(0.0);
    let t1 = g.t1.or(s.t1).ok_or_else(|| CliError::Input("no end time: pass --t1 or set t1 in [sweep]".into()))?;
    let nt = g.nt.or(s.nt).unwrap_or(101);
    if !(t0 >= 0.0) || !(t1 > t0) || nt < 2 || !t1.is_finite() {
        return Err(CliError::Input(format!("invalid grid t0={t0}, t1={t1}, nt={nt}: need 0 <= t0 < t1 and nt >= 2")));
    }
    let params = match (&g.params, use_file_params) {
        (Some(p), _) => p.clone(),
        (None, true) => s.params.clone().unwrap_or_else(|| vec![l.theta]),
        (None, false) => vec![l.theta],
    };
    if params.is_empty() || params.iter().any(|p| !p.is_finite()) {
        return Err(CliError::Input("parameter list must contain finite values".into()));
    }
    let route = g.route.clone().or_else(|| s.route.clone()).unwrap_or_else(|| "auto".into());
    let policy = route.parse().map_err(|e: dqfi_core::Error| CliError::Input(e.to_string()))?;
    if g.n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    Ok(SweepConfig { t0, t1, nt, params, policy, protocols: g.n })
}

fn route_label(r: &FisherResult, preferred: dqfi_core::generator::Route) -> String {
    if r.route == preferred {
        r.route.to_string()
    } else {
        format!("{}<-{}", r.route, preferred)
    }
}

pub fn dqfi(args: &ModelArgs, grid: &GridArgs, use_file_params: bool, out: Option<&Path>) -> CliResult<()> {
    let l = load(args)?;
    let cfg = sweep_config(&l, grid, use_file_params)?;
    let pool = thread_pool(grid.jobs)?;
    let times = cfg.times();
    let opts = EvalOptions { protocols: cfg.protocols, ..EvalOptions::default() };
    let rows: Vec<Vec<String>> = pool.install(|| -> CliResult<Vec<Vec<String>>> {
        let evals: Vec<Evaluator> = cfg
            .params
            .par_iter()
            .map(|&p| Evaluator::new(&l.compiled.model, p, &l.compiled.probe, cfg.policy))
            .collect::<Result<_, _>>()?;
        let jobs: Vec<(usize, f64)> =
            (0..evals.len()).flat_map(|k| times.iter().map(move |&t| (k, t))).collect();
        jobs.par_iter()
            .map(|&(k, t)| {
                let ev = &evals[k];
                let r = ev.evaluate(t, &opts).map_err(|e| {
                    CliError::Numeric(format!("{} = {}, t = {t}: {e}", l.compiled.param_name, ev.theta()))
                })?;
                Ok(vec![
                    num(t),
                    num(ev.theta()),
                    num(r.dqfi),
                    opt(r.cqfi),
                    num(r.purity),
                    opt(r.bound),
                    route_label(&r, ev.preferred_route()),
                    opt(r.route_residuals.values().next().copied()),
                    match r.var_bound {
                        dqfi_core::Extended::Finite(x) => num(x),
                        dqfi_core::Extended::Divergent => "inf".into(),
                    },
                ])
            })
            .collect()
    })?;
    let mut t = Table::new(vec!["t", "param", "dqfi", "cqfi", "purity", "bound", "route", "residual", "crb"]);
    model_meta(&mut t, &l);
    t.meta(
        "grid",
        format!("t0={} t1={} nt={} params=[{}]", num(cfg.t0), num(cfg.t1), cfg.nt, cfg.params.iter().map(|p| num(*p)).collect::<Vec<_>>().join(" ")),
    );
    t.meta("route", cfg.policy.to_string());
    t.meta("protocols", cfg.protocols.to_string());
    t.rows = rows;
    t.emit(out).map_err(io_err(out))
}

pub fn reproduce(figure: &str, dir: &Path, jobs: Option<usize>) -> CliResult<()> {
    let kinds: Vec<FigureKind> = match figure {
        "all" => vec![FigureKind::Fig1, FigureKind::Fig2, FigureKind::Fig3],
        other => vec![other.parse().map_err(|e: dqfi_core::Error| CliError::Input(e.to_string()))?],
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let pool = thread_pool(jobs)?;
    let grid = FigureGrid::default();
    for k in kinds {
        let (name, table) = match k {
            FigureKind::Fig1 => ("fig1.csv", fig1(&grid)?),
            FigureKind::Fig2 => ("fig2.csv", pool.install(|| fig23(&grid, false))?),
            FigureKind::Fig3 => ("fig3.csv", pool.install(|| fig23(&grid, true))?),
        };
        let path = dir.join(name);
        table.emit(Some(&path)).map_err(io_err(Some(&path)))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn builtin_meta(t: &mut Table, grid: &FigureGrid, what: &str) {
    t.meta("model", "built-in spin-flip, omega = 1, probe (|e>+|g>)/sqrt(2)");
    t.meta("grid", what.to_string());
    t.meta("rates", grid.rates.iter().map(|r| num(*r)).collect::<Vec<_>>().join(" "));
}

fn fig1(grid: &FigureGrid) -> CliResult<Table> {
    let curves = figure_data(FigureKind::Fig1, grid)?;
    let ratios = &curves[0].grid;
    let mut t = Table::new(vec!["gamma_ratio", "index", "re", "im", "ep_flag", "pipeline_residual"]);
    builtin_meta(&mut t, grid, &format!("gamma_ratio in [0, {}] with {} points", num(grid.ratio_max), grid.ratio_points));
    for (i, &r) in ratios.iter().enumerate() {
        let p = TwoLevelParams::new(1.0, r)?;
        let numeric = dqfi_core::linalg::eig_general(&models::spin_flip_matrix(1.0, r))?;
        for n in 0..4 {
            let (re, im) = (curves[2 * n].values[i], curves[2 * n + 1].values[i]);
            let z = dqfi_core::linalg::c(re, im);
            let resid = numeric.values.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            t.rows.push(vec![
                num(r),
                (n + 1).to_string(),
                num(re),
                num(im),
                u8::from(p.is_lep && n >= 2).to_string(),
                num(resid),
            ]);
        }
    }
    Ok(t)
}

fn fig23(grid: &FigureGrid, with_cqfi: bool) -> CliResult<Table> {
    let times = twolevel::linspace(0.0, grid.t_max, grid.t_points);
    let opts = EvalOptions { protocols: 1, with_cqfi, with_bound: false, with_residual: false };
    let mut blocks = Vec::new();
    for &g in &grid.rates {
        let ev = Evaluator::new(&models::spin_flip(g), 1.0, &models::plus_state(2), RoutePolicy::Auto)?;
        let p = TwoLevelParams::new(1.0, g)?;
        let rows: Vec<Vec<String>> = times
            .par_iter()
            .map(|&t| -> CliResult<Vec<String>> {
                let r = ev.evaluate(t, &opts).map_err(|e| CliError::Numeric(format!("gamma_x = {g}, t = {t}: {e}")))?;
                let mut row = vec![num(t), num(g), num(r.dqfi)];
                if with_cqfi {
                    row.push(opt(r.cqfi));
                }
                row.push(num(twolevel::analytic_dqfi(&p, t)));
                if with_cqfi {
                    row.push(num(twolevel::analytic_cqfi(&p, t)));
                }
                row.push(route_label(&r, ev.preferred_route()));
                Ok(row)
            })
            .collect::<CliResult<_>>()?;
        blocks.extend(rows);
    }
    let header = if with_cqfi {
        vec!["t", "gamma_x", "dqfi", "cqfi", "analytic_dqfi", "analytic_cqfi", "route"]
    } else {
        vec!["t", "gamma_x", "dqfi", "analytic_dqfi", "route"]
    };
    let mut t = Table::new(header);
    builtin_meta(&mut t, grid, &format!("t in [0, {}] with {} points", num(grid.t_max), grid.t_points));
    t.rows = blocks;
    Ok(t)
}
