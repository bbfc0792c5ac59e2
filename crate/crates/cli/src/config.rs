//! Experiment files: a TOML document with an `[experiment]` table and one
//! optional table per optimizer. Every problem found while loading is
//! reported with the line of the offending key.

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::path::{Path, PathBuf};

use cglo::baselines::{GpEiConfig, RandomSearchConfig};
use cglo::cglo::CgloConfig;
use cglo::objectives::{self, OBJECTIVE_NAMES};
use serde::Deserialize;
use toml::Spanned;

pub const OPTIMIZER_NAMES: [&str; 3] = ["cglo", "rs", "gp-ei-ocba"];
pub const DEFAULT_RS_REPS: u64 = 25;

/// A configuration problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(src: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Self {
        let (line, column) = match span {
            Some(s) => {
                let (l, c) = line_col(src, s.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        Self { path: None, line, column, message: message.into() }
    }

    pub fn with_path(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{l}:{c}: ")?,
            (Some(l), None) => write!(f, "{l}: ")?,
            _ if self.path.is_some() => f.write_str(" ")?,
            _ => {}
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    experiment: Spanned<RawExperiment>,
    cglo: Option<Spanned<RawCglo>>,
    rs: Option<Spanned<RawRs>>,
    #[serde(rename = "gp-ei-ocba")]
    gp: Option<Spanned<RawGp>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    objective: Spanned<String>,
    optimizers: Spanned<Vec<Spanned<String>>>,
    macroreps: Spanned<i64>,
    budget: Spanned<i64>,
    checkpoints: Option<Spanned<Vec<Spanned<i64>>>>,
    output_dir: Spanned<String>,
    seed: Option<Spanned<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCglo {
    n0: Option<Spanned<i64>>,
    k: Option<Spanned<i64>>,
    init_reps: Option<Spanned<i64>>,
    r_min: Option<Spanned<i64>>,
    b2: Option<Spanned<i64>>,
    kappa_coef: Option<Spanned<f64>>,
    v: Option<Spanned<f64>>,
    mean_lo: Option<Spanned<f64>>,
    mean_hi: Option<Spanned<f64>>,
    candidate_count: Option<Spanned<i64>>,
    local_grid_size: Option<Spanned<i64>>,
    refit_every: Option<Spanned<i64>>,
    fit_starts: Option<Spanned<i64>>,
    refit_starts: Option<Spanned<i64>>,
    max_local_points: Option<Spanned<i64>>,
    max_iterations: Option<Spanned<i64>>,
    noise_prior: Option<Spanned<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRs {
    reps_per_point: Option<Spanned<i64>>,
    points: Option<Spanned<i64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGp {
    grid_size: Option<Spanned<i64>>,
    refit_every: Option<Spanned<i64>>,
    fit_starts: Option<Spanned<i64>>,
    max_iterations: Option<Spanned<i64>>,
}

/// Fully resolved experiment, with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub objective: String,
    pub optimizers: Vec<String>,
    pub macroreps: usize,
    pub budget: u64,
    pub checkpoints: Vec<u64>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Driver settings; the seed is replaced per macroreplication.
    pub cglo: CgloConfig,
    pub rs: RandomSearchConfig,
    pub gp: GpEiConfig,
}

impl ExperimentSpec {
    /// Seed of macroreplication `m`.
    pub fn macrorep_seed(&self, m: usize) -> u64 {
        self.seed.wrapping_add(m as u64)
    }

    pub fn cglo_for(&self, seed: u64) -> CgloConfig {
        CgloConfig { seed, ..self.cglo.clone() }
    }

    pub fn rs_for(&self, seed: u64) -> RandomSearchConfig {
        RandomSearchConfig { seed, ..self.rs }
    }

    pub fn gp_for(&self, seed: u64) -> GpEiConfig {
        GpEiConfig { seed, ..self.gp.clone() }
    }

    /// The resolved configuration as TOML, loadable by [`parse_spec`].
    pub fn echo(&self) -> String {
        let c = &self.cglo;
        let mut s = String::new();
        let list = |v: &[String]| v.iter().map(|o| format!("{o:?}")).collect::<Vec<_>>().join(", ");
        let nums = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
        let opt_f = |name: &str, v: Option<f64>, unset: &str| match v {
            Some(x) => format!("{name} = {x:?}"),
            None => format!("# {name} = {unset}"),
        };
        let opt_u = |name: &str, v: Option<usize>| match v {
            Some(x) => format!("{name} = {x}"),
            None => format!("# {name} = none"),
        };
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "objective = {:?}", self.objective);
        let _ = writeln!(s, "optimizers = [{}]", list(&self.optimizers));
        let _ = writeln!(s, "macroreps = {}", self.macroreps);
        let _ = writeln!(s, "budget = {}", self.budget);
        let _ = writeln!(s, "checkpoints = [{}]", nums(&self.checkpoints));
        let _ = writeln!(s, "output_dir = {:?}", self.output_dir.display().to_string());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "\n[cglo]");
        let _ = writeln!(s, "n0 = {}", c.n0);
        let _ = writeln!(s, "k = {}", c.resolved_k(self.dim()));
        let _ = writeln!(s, "init_reps = {}", c.init_reps);
        let _ = writeln!(s, "r_min = {}", c.r_min);
        let _ = writeln!(s, "b2 = {}", c.b2);
        let _ = writeln!(s, "kappa_coef = {:?}", c.kappa_coef);
        let _ = writeln!(s, "v = {:?}", c.v);
        let _ = writeln!(s, "{}", opt_f("mean_lo", c.mean_lo, "auto"));
        let _ = writeln!(s, "{}", opt_f("mean_hi", c.mean_hi, "auto"));
        let _ = writeln!(s, "candidate_count = {}", c.resolved_candidate_count(self.dim()));
        let _ = writeln!(s, "local_grid_size = {}", c.resolved_local_grid_size(self.dim()));
        let _ = writeln!(s, "refit_every = {}", c.refit_every);
        let _ = writeln!(s, "fit_starts = {}", c.fit_starts);
        let _ = writeln!(s, "refit_starts = {}", c.refit_starts);
        let _ = writeln!(s, "{}", opt_u("max_local_points", c.max_local_points));
        let _ = writeln!(s, "{}", opt_u("max_iterations", c.max_iterations));
        let _ = writeln!(s, "{}", opt_f("noise_prior", c.noise_prior, "median sample variance"));
        let _ = writeln!(s, "\n[rs]");
        let _ = writeln!(s, "reps_per_point = {}", self.rs.reps_per_point);
        let _ = writeln!(s, "points = {}", self.rs.points);
        let _ = writeln!(s, "\n[gp-ei-ocba]");
        let _ = writeln!(s, "grid_size = {}", self.gp.grid_size.unwrap_or(100 * self.dim()));
        let _ = writeln!(s, "refit_every = {}", self.gp.refit_every);
        let _ = writeln!(s, "fit_starts = {}", self.gp.fit_starts);
        let _ = writeln!(s, "{}", opt_u("max_iterations", self.gp.max_iterations));
        s
    }

    pub fn dim(&self) -> usize {
        objectives::by_name(&self.objective, 0).map_or(1, |o| o.dim())
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: Some(path.to_path_buf()),
        line: None,
        column: None,
        message: format!("cannot read configuration: {e}"),
    })?;
    parse_spec(&src).map_err(|e| e.with_path(path))
}

/// Parses and checks an experiment file; the first problem found wins.
pub fn parse_spec(src: &str) -> Result<ExperimentSpec, ConfigError> {
    let raw: RawSpec = toml::from_str(src).map_err(|e| {
        let msg = e.message().to_string();
        ConfigError::at(src, e.span(), msg)
    })?;
    let err = |span: Range<usize>, msg: String| ConfigError::at(src, Some(span), msg);

    let exp_span = raw.experiment.span();
    let exp = raw.experiment.into_inner();
    let objective = exp.objective.get_ref().clone();
    let Some(dim) = objectives::by_name(&objective, 0).ok().map(|o| o.dim()) else {
        return Err(err(
            exp.objective.span(),
            format!("unknown objective {objective:?} (expected one of {})", OBJECTIVE_NAMES.join(", ")),
        ));
    };

    let mut optimizers = Vec::new();
    for o in exp.optimizers.get_ref() {
        if !OPTIMIZER_NAMES.contains(&o.get_ref().as_str()) {
            return Err(err(
                o.span(),
                format!("unknown optimizer {:?} (expected one of {})", o.get_ref(), OPTIMIZER_NAMES.join(", ")),
            ));
        }
        if optimizers.contains(o.get_ref()) {
            return Err(err(o.span(), format!("optimizer {:?} is listed twice", o.get_ref())));
        }
        optimizers.push(o.get_ref().clone());
    }
    if optimizers.is_empty() {
        return Err(err(exp.optimizers.span(), "at least one optimizer is required".into()));
    }

    let macroreps = positive(src, &exp.macroreps, "macroreps")? as usize;
    let budget = positive(src, &exp.budget, "budget")?;
    let seed = match &exp.seed {
        Some(s) => nonnegative(src, s, "seed")?,
        None => 0,
    };
    let checkpoints = match &exp.checkpoints {
        Some(cps) => {
            let mut out = Vec::new();
            for c in cps.get_ref() {
                let v = positive(src, c, "checkpoint")?;
                if v > budget {
                    return Err(err(c.span(), format!("checkpoint {v} exceeds the budget {budget}")));
                }
                out.push(v);
            }
            if out.is_empty() {
                return Err(err(cps.span(), "checkpoints must not be empty".into()));
            }
            out
        }
        None => vec![budget],
    };

    let base = match objective.as_str() {
        "paper1d" => CgloConfig::paper_1d(seed, budget),
        "sun2d" => CgloConfig::sun_2d(seed, budget),
        _ => CgloConfig { seed, total_budget: budget, ..CgloConfig::default() },
    };
    let (cglo_span, rc) = match raw.cglo {
        Some(c) => (c.span(), c.into_inner()),
        None => (exp_span.clone(), RawCglo::default()),
    };
    let cglo = resolve_cglo(src, base, &rc, dim, cglo_span, exp.budget.span())?;

    let (rs_span, rr) = match raw.rs {
        Some(r) => (r.span(), r.into_inner()),
        None => (exp_span.clone(), RawRs::default()),
    };
    let reps = match &rr.reps_per_point {
        Some(v) => positive(src, v, "reps_per_point")?,
        None => DEFAULT_RS_REPS,
    };
    let points = match &rr.points {
        Some(v) => positive(src, v, "points")? as usize,
        None => (budget / reps) as usize,
    };
    let rs = RandomSearchConfig { points, reps_per_point: reps, seed, total_budget: budget };
    if optimizers.iter().any(|o| o == "rs") {
        rs.validate().map_err(|e| err(rr.points.as_ref().map_or(rs_span, |p| p.span()), core_message(e)))?;
    }

    let mut gp = GpEiConfig::from_cglo(&cglo);
    let rg = raw.gp.map(Spanned::into_inner).unwrap_or_default();
    if let Some(v) = &rg.grid_size {
        gp.grid_size = Some(positive(src, v, "grid_size")? as usize);
    }
    if let Some(v) = &rg.refit_every {
        gp.refit_every = positive(src, v, "refit_every")? as usize;
    }
    if let Some(v) = &rg.fit_starts {
        gp.fit_starts = positive(src, v, "fit_starts")? as usize;
    }
    if let Some(v) = &rg.max_iterations {
        gp.max_iterations = Some(positive(src, v, "max_iterations")? as usize);
    }

    Ok(ExperimentSpec {
        objective,
        optimizers,
        macroreps,
        budget,
        checkpoints,
        output_dir: PathBuf::from(exp.output_dir.get_ref()),
        seed,
        cglo,
        rs,
        gp,
    })
}

fn core_message(e: cglo::Error) -> String {
    match e {
        cglo::Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn positive(src: &str, v: &Spanned<i64>, name: &str) -> Result<u64, ConfigError> {
    let x = *v.get_ref();
    if x <= 0 {
        return Err(ConfigError::at(src, Some(v.span()), format!("{name} = {x} must be a positive integer")));
    }
    Ok(x as u64)
}

fn nonnegative(src: &str, v: &Spanned<i64>, name: &str) -> Result<u64, ConfigError> {
    let x = *v.get_ref();
    if x < 0 {
        return Err(ConfigError::at(src, Some(v.span()), format!("{name} = {x} must not be negative")));
    }
    Ok(x as u64)
}

fn resolve_cglo(
    src: &str,
    mut c: CgloConfig,
    r: &RawCglo,
    dim: usize,
    section: Range<usize>,
    budget_span: Range<usize>,
) -> Result<CgloConfig, ConfigError> {
    let at = |span: Range<usize>, msg: String| ConfigError::at(src, Some(span), msg);
    let count = |v: &Option<Spanned<i64>>, name: &str, slot: &mut usize| -> Result<(), ConfigError> {
        if let Some(v) = v {
            *slot = positive(src, v, name)? as usize;
        }
        Ok(())
    };
    let reps = |v: &Option<Spanned<i64>>, name: &str, slot: &mut u64| -> Result<(), ConfigError> {
        if let Some(v) = v {
            *slot = positive(src, v, name)?;
        }
        Ok(())
    };
    count(&r.n0, "n0", &mut c.n0)?;
    if let Some(k) = &r.k {
        c.k = nonnegative(src, k, "k")? as usize;
    }
    reps(&r.init_reps, "init_reps", &mut c.init_reps)?;
    reps(&r.r_min, "r_min", &mut c.r_min)?;
    reps(&r.b2, "b2", &mut c.b2)?;
    count(&r.refit_every, "refit_every", &mut c.refit_every)?;
    count(&r.fit_starts, "fit_starts", &mut c.fit_starts)?;
    if let Some(v) = &r.refit_starts {
        c.refit_starts = nonnegative(src, v, "refit_starts")? as usize;
    }
    let opt_count = |v: &Option<Spanned<i64>>, name: &str| -> Result<Option<usize>, ConfigError> {
        v.as_ref().map(|v| positive(src, v, name).map(|x| x as usize)).transpose()
    };
    if r.candidate_count.is_some() {
        c.candidate_count = opt_count(&r.candidate_count, "candidate_count")?;
    }
    if r.local_grid_size.is_some() {
        c.local_grid_size = opt_count(&r.local_grid_size, "local_grid_size")?;
    }
    if r.max_local_points.is_some() {
        c.max_local_points = opt_count(&r.max_local_points, "max_local_points")?;
    }
    if r.max_iterations.is_some() {
        c.max_iterations = opt_count(&r.max_iterations, "max_iterations")?;
    }
    for (v, name, slot) in [(&r.kappa_coef, "kappa_coef", &mut c.kappa_coef), (&r.v, "v", &mut c.v)] {
        if let Some(v) = v {
            let x = *v.get_ref();
            if !(x > 0.0 && x.is_finite()) {
                return Err(at(v.span(), format!("{name} = {x} must be positive")));
            }
            *slot = x;
        }
    }
    c.mean_lo = r.mean_lo.as_ref().map(|v| *v.get_ref()).or(c.mean_lo);
    c.mean_hi = r.mean_hi.as_ref().map(|v| *v.get_ref()).or(c.mean_hi);
    if let Some(v) = &r.noise_prior {
        let x = *v.get_ref();
        if !(x >= 0.0 && x.is_finite()) {
            return Err(at(v.span(), format!("noise_prior = {x} must be nonnegative")));
        }
        c.noise_prior = Some(x);
    }

    let k = c.resolved_k(dim);
    let k_span = r.k.as_ref().map(|v| v.span());
    let n0_span = r.n0.as_ref().map(|v| v.span());
    if c.n0 < 2 * k {
        let span = n0_span.or(k_span).unwrap_or(section.clone());
        return Err(at(span, format!("n0 = {} is smaller than 2K = {} (K = {k})", c.n0, 2 * k)));
    }
    let need = c.n0 as u64 * c.init_reps;
    if c.total_budget < need {
        return Err(at(
            budget_span,
            format!(
                "budget {} is below n0 * init_reps = {} * {} = {need}",
                c.total_budget, c.n0, c.init_reps
            ),
        ));
    }
    if let (Some(lo), Some(hi)) = (c.mean_lo, c.mean_hi) {
        if !(lo < hi) {
            let span = r.mean_lo.as_ref().map_or(section.clone(), |v| v.span());
            return Err(at(span, format!("mean_lo = {lo} must be below mean_hi = {hi}")));
        }
    }
    let cands = c.resolved_candidate_count(dim);
    if cands < k {
        let span = r.candidate_count.as_ref().map_or(section.clone(), |v| v.span());
        return Err(at(span, format!("candidate_count = {cands} cannot cover K = {k} regions")));
    }
    c.validate(dim).map_err(|e| at(section, core_message(e)))?;
    Ok(c)
}
