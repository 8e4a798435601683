use std::fs;
use std::path::PathBuf;

use qmstree::dense::DenseBudget;
use qmstree::ising::{self, ModelSpec};
use qmstree::par::Execution;
use qmstree::pauli::{RegionOperator, C64};
use qmstree::state::{FiniteVolumeValue, QmsHandle};
use qmstree::tree::{Region, Tree, VertexWord};
use qmstree::verify::{self, Backend, CheckOptions, VerificationReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::spec::{self, Model, Observable, PathChoice, SpecError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_SOLVER: i32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Markov,
    LevelMarkov,
    Commutation,
    Translation,
    SubQms,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::Markov,
        CheckKind::LevelMarkov,
        CheckKind::Commutation,
        CheckKind::Translation,
        CheckKind::SubQms,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Evaluate,
    Verify { checks: Vec<CheckKind> },
    Fixpoint,
    Sweep { betas: Vec<f64>, js: Vec<f64> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evaluate => "evaluate",
            Command::Verify { .. } => "verify",
            Command::Fixpoint => "fixpoint",
            Command::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<PathBuf>,
    pub observable: Option<PathBuf>,
    pub tol: f64,
    pub n_max: Option<usize>,
    pub out: Option<PathBuf>,
    pub dense_budget: Option<usize>,
    pub backend: Backend,
    pub exec: Execution,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            model: None,
            observable: None,
            tol: verify::DEFAULT_TOL,
            n_max: None,
            out: None,
            dense_budget: None,
            backend: Backend::Pauli,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Failure::config(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.n_max == Some(0) {
            return Err(Failure::config("--nmax must be >= 1"));
        }
        if let Command::Sweep { betas, js } = &self.command {
            if betas.is_empty() || js.is_empty() {
                return Err(Failure::config("sweep needs at least one beta and one J"));
            }
            if betas.iter().chain(js).any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Failure::config("sweep values must be finite and >= 0"));
            }
        }
        Ok(())
    }

    fn budget(&self) -> DenseBudget {
        match self.dense_budget {
            Some(n) => DenseBudget::with_matrix_sites(n),
            None => DenseBudget::default(),
        }
    }

    fn options(&self) -> CheckOptions {
        CheckOptions {
            tol: self.tol,
            backend: self.backend,
            budget: self.budget(),
            exec: self.exec,
            translation_depth: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            kind: "config",
            message: message.into(),
        }
    }
}

impl From<qmstree::Error> for Failure {
    fn from(e: qmstree::Error) -> Self {
        use qmstree::Error as E;
        let (code, kind) = match &e {
            E::BudgetExceeded { .. } | E::TooDeep { .. } => (EXIT_BUDGET, "budget"),
            E::NoConvergence { .. } | E::NonPositiveIterate(_) | E::NoScale(_) => (EXIT_SOLVER, "solver"),
            _ => (EXIT_CONFIG, "model"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        match e {
            SpecError::Model(m) => m.into(),
            other => Failure::config(other.to_string()),
        }
    }
}

/// The report written for a run plus its exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
}

impl Outcome {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }
}

fn header(command: &str) -> Value {
    json!({ "tool": "qmstree", "version": env!("CARGO_PKG_VERSION"), "command": command })
}

pub fn run(config: &RunConfig) -> Outcome {
    let body = config.validate().and_then(|_| dispatch(config));
    let (code, body) = match body {
        Ok((code, body)) => (code, body),
        Err(f) => (f.code, json!({ "error": { "kind": f.kind, "message": f.message } })),
    };
    Outcome {
        code,
        report: json!({ "header": header(config.command.name()), "body": body }),
    }
}

/// Runs and writes the report to `--out` (or returns it for stdout).
pub fn run_and_write(config: &RunConfig) -> (Outcome, Option<String>) {
    let outcome = run(config);
    match &config.out {
        Some(path) => match fs::write(path, outcome.to_json()) {
            Ok(()) => (outcome, None),
            Err(e) => {
                let f = Failure::config(format!("cannot write {}: {e}", path.display()));
                let report = json!({ "header": header(config.command.name()),
                    "body": { "error": { "kind": f.kind, "message": f.message } } });
                (Outcome { code: f.code, report }, Some(format!("error: {}", f.message)))
            }
        },
        None => (outcome, None),
    }
}

fn read(path: &Option<PathBuf>, flag: &str) -> Result<String, Failure> {
    let path = path
        .as_ref()
        .ok_or_else(|| Failure::config(format!("{flag} is required")))?;
    fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn load_model(config: &RunConfig) -> Result<Model, Failure> {
    let text = read(&config.model, "--model")?;
    let fallback = match config.backend {
        Backend::Dense => spec::DEFAULT_DENSE_NMAX,
        Backend::Pauli => spec::DEFAULT_NMAX,
    };
    let mut model = spec::parse_model_spec_with_default(&text, config.n_max, fallback)?;
    model.handle = model.handle.clone().with_execution(config.exec);
    Ok(model)
}

fn dispatch(config: &RunConfig) -> Result<(i32, Value), Failure> {
    match &config.command {
        Command::Evaluate => evaluate(config),
        Command::Verify { checks } => verify_model(config, checks),
        Command::Fixpoint => fixpoint(config),
        Command::Sweep { betas, js } => sweep(config, betas, js),
    }
}

fn complex(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

fn model_summary(model: &Model) -> Value {
    let h = &model.handle;
    let marginal = h.initial_vector();
    let mut v = json!({
        "description": model.description,
        "k": h.tree().order(),
        "n_max": h.n_max(),
        "homogeneous": h.kernels().is_homogeneous(),
        "certificate": h.certificate(),
        "root_state": marginal.iter().map(|c| complex(*c)).collect::<Vec<_>>(),
    });
    if let Some(m) = &model.ising {
        v["alpha_closed_form"] = json!(ising::closed_form_alpha(m).ok());
    }
    v
}

#[derive(Serialize)]
struct ValueRecord {
    name: String,
    observable: String,
    value: [f64; 2],
    volume: usize,
    path: qmstree::state::EvaluationPath,
    fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    explicit_residual: Option<f64>,
}

fn evaluate_one(model: &Model, o: &Observable, budget: &DenseBudget) -> Result<FiniteVolumeValue, Failure> {
    let h = &model.handle;
    let a = &o.operator;
    let volume = |h: &QmsHandle| -> Result<usize, Failure> { Ok(o.volume.unwrap_or(h.depth_of(a)? + 1)) };
    let fv = match o.path {
        PathChoice::Nested => match o.volume {
            None => h.evaluate_nested(a)?,
            Some(n) => FiniteVolumeValue {
                observable: a.clone(),
                value: h.evaluate_at_volume(a, n)?,
                volume: n,
                path: qmstree::state::EvaluationPath::Nested,
                fallback: false,
            },
        },
        PathChoice::Localized => h.evaluate_localized(a, o.vertex.as_ref().expect("checked at parse"))?,
        PathChoice::Explicit => {
            let m = model
                .ising
                .as_ref()
                .filter(|_| model.overrides.is_empty())
                .ok_or_else(|| {
                    Failure::config(format!("{}: the explicit path needs a homogeneous Ising model", o.name))
                })?;
            let n = volume(h)?;
            let mut fv = ising::evaluate_explicit(m, a)?;
            if o.volume.is_some() {
                fv.value = ising::explicit_at_volume(m, a, n)?;
                fv.volume = n;
            }
            fv
        }
        PathChoice::Dense => {
            let n = volume(h)?;
            FiniteVolumeValue {
                observable: a.clone(),
                value: h.evaluate_dense_at_volume(a, n, budget)?,
                volume: n,
                path: qmstree::state::EvaluationPath::Dense,
                fallback: false,
            }
        }
    };
    Ok(fv)
}

fn label(a: &RegionOperator) -> String {
    if a.num_terms() == 0 {
        return "0".to_string();
    }
    a.terms()
        .map(|(s, c)| format!("({}{:+}i) {}", c.re, c.im, s.label()))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn evaluate(config: &RunConfig) -> Result<(i32, Value), Failure> {
    let model = load_model(config)?;
    let observables = spec::parse_observables(&read(&config.observable, "--observable")?)?;
    let budget = config.budget();
    let mut records = Vec::with_capacity(observables.len());
    for o in &observables {
        let fv = evaluate_one(&model, o, &budget)?;
        let explicit_residual = match &model.ising {
            Some(m) if model.overrides.is_empty() && fv.volume <= ising::EXPLICIT_MAX_VOLUME => {
                ising::explicit_at_volume(m, &o.operator, fv.volume)
                    .ok()
                    .map(|e| (e - fv.value).norm())
            }
            _ => None,
        };
        records.push(ValueRecord {
            name: o.name.clone(),
            observable: label(&o.operator),
            value: complex(fv.value),
            volume: fv.volume,
            path: fv.path,
            fallback: fv.fallback,
            explicit_residual,
        });
    }
    Ok((EXIT_OK, json!({ "model": model_summary(&model), "values": records })))
}

#[derive(Default)]
struct Tally {
    checks: Vec<Value>,
    skipped: Vec<Value>,
    failed: bool,
    over_budget: bool,
}

impl Tally {
    fn skip(&mut self, what: String, reason: impl Into<String>) {
        self.skipped.push(json!({ "check": what, "reason": reason.into() }));
    }

    fn push(&mut self, rep: &VerificationReport, ok: bool) {
        self.checks.push(serde_json::to_value(rep).expect("report serializes"));
        self.failed |= !ok;
    }

    /// Budget and applicability errors are recorded; anything else aborts the run.
    fn record(&mut self, what: String, result: qmstree::Result<VerificationReport>) -> Result<(), Failure> {
        use qmstree::Error as E;
        match result {
            Ok(rep) => {
                let ok = rep.pass && rep.consistent != Some(false);
                self.push(&rep, ok);
                Ok(())
            }
            Err(e @ (E::Unsupported(_) | E::NotHomogeneous)) => {
                self.skip(what, e.to_string());
                Ok(())
            }
            Err(e @ (E::BudgetExceeded { .. } | E::TooDeep { .. })) => {
                self.over_budget = true;
                self.skip(what, e.to_string());
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }
}

fn verify_model(config: &RunConfig, kinds: &[CheckKind]) -> Result<(i32, Value), Failure> {
    let model = load_model(config)?;
    let h = &model.handle;
    let opts = config.options();
    let kinds: Vec<CheckKind> = if kinds.is_empty() {
        CheckKind::ALL.to_vec()
    } else {
        let mut k = kinds.to_vec();
        k.sort();
        k.dedup();
        k
    };
    let tree = h.tree().clone();
    let k = tree.order();
    let mut t = Tally::default();
    for kind in kinds {
        match kind {
            CheckKind::Markov => {
                for d in 0..=1usize {
                    if d + 1 > h.n_max() {
                        t.skip(format!("markov depth {d}"), "beyond n_max");
                        continue;
                    }
                    for x in tree.level(d).iter() {
                        let r = verify::check_localized_markov(h, x, None, &opts);
                        t.record(format!("markov {x}"), r)?;
                    }
                }
            }
            CheckKind::LevelMarkov => {
                for n in 0..=1usize {
                    if n + 1 > h.n_max() {
                        t.skip(format!("level_markov {n}"), "beyond n_max");
                        continue;
                    }
                    let r = verify::check_level_markov(h, n, &opts);
                    t.record(format!("level_markov {n}"), r)?;
                }
            }
            CheckKind::Commutation => {
                for n in 1..=2usize {
                    if tree.ball(n).len() > opts.budget.matrix_sites {
                        t.over_budget = true;
                        t.skip(format!("commutation {n}"), "dense budget");
                        continue;
                    }
                    match verify::extract_potential(h, n, &opts.budget) {
                        Ok(d) => {
                            let mut rep = verify::check_commutation(&d, opts.tol);
                            rep.related.push(verify::check_potential(&d, opts.tol));
                            let ok = rep.pass && rep.related.iter().all(|r| r.pass);
                            t.push(&rep, ok);
                        }
                        Err(e) => {
                            t.record(format!("commutation {n}"), Err(e))?;
                        }
                    }
                }
            }
            CheckKind::Translation => {
                let r = verify::check_translation_invariance(h, &opts);
                t.record("translation".into(), r)?;
            }
            CheckKind::SubQms => {
                let first = VertexWord::new(&[1]);
                let path = Region::new(vec![
                    VertexWord::root(),
                    first.clone(),
                    first.child(1),
                    first.child(1).child(1),
                    first.child(1).child(2),
                ]);
                for sub in [Tree::future(first.clone(), k), Tree::finite(&path, k)] {
                    let sub = sub.map_err(qmstree::Error::from)?;
                    let r = verify::check_sub_qms(h, &sub, &opts);
                    t.record(format!("sub_qms {}", sub.describe()), r)?;
                }
            }
        }
    }
    let code = if t.failed {
        EXIT_VERIFY
    } else if t.over_budget {
        EXIT_BUDGET
    } else {
        EXIT_OK
    };
    Ok((
        code,
        json!({
            "model": model_summary(&model),
            "pass": !t.failed && !t.over_budget,
            "checks": t.checks,
            "skipped": t.skipped,
            "conventions": [
                "normalized trace",
                "level j stands for W_j",
                "state at volume n contracts the forks at depths 0..n-1",
            ],
        }),
    ))
}

fn fixpoint(config: &RunConfig) -> Result<(i32, Value), Failure> {
    let model = load_model(config)?;
    let base = model.handle.kernels().base();
    let fp = ising::solve_fixed_point(base.amplitude(), base.arity())?;
    let mut body = json!({
        "model": model_summary(&model),
        "h": fp.h.iter().map(|c| complex(*c)).collect::<Vec<_>>(),
        "alpha_solver": fp.scalar(),
        "residual": fp.residual,
        "iterations": fp.iterations,
        "eigenvalue": fp.eigenvalue,
    });
    let mut code = EXIT_OK;
    if let Some(m) = &model.ising {
        let closed = ising::closed_form_alpha(m)?;
        let diff = fp.scalar().map(|a| (a - closed).abs());
        body["alpha_closed_form"] = json!(closed);
        body["difference"] = json!(diff);
        if !matches!(diff, Some(d) if d < config.tol) {
            code = EXIT_VERIFY;
        }
    }
    Ok((code, body))
}

#[derive(Serialize)]
struct SweepPoint {
    beta: f64,
    #[serde(rename = "J")]
    j: f64,
    alpha_closed_form: f64,
    alpha_solver: Option<f64>,
    difference: Option<f64>,
    fixed_point_residual: f64,
    markov_residual: f64,
    pass: bool,
}

fn sweep(config: &RunConfig, betas: &[f64], js: &[f64]) -> Result<(i32, Value), Failure> {
    let depth = match &config.model {
        Some(_) => load_model(config)?.handle.n_max(),
        None => config.n_max.unwrap_or(spec::DEFAULT_NMAX),
    };
    let grid: Vec<(f64, f64)> = betas.iter().flat_map(|&b| js.iter().map(move |&j| (b, j))).collect();
    let mut opts = config.options();
    opts.exec = Execution::Sequential;
    let points = config.exec.map(&grid, |&(beta, j)| -> Result<SweepPoint, Failure> {
        let m = ModelSpec {
            beta,
            j,
            k: 2,
            depth: depth.max(2),
        };
        let closed = ising::closed_form_alpha(&m)?;
        let fp = ising::solve_fixed_point(&ising::build_amplitude(&m)?.operator, 2)?;
        let h = ising::build_qms(&m)?;
        let mut markov = 0.0f64;
        for x in [VertexWord::root(), VertexWord::new(&[1])] {
            markov = markov.max(verify::check_localized_markov(&h, &x, None, &opts)?.residual);
        }
        let diff = fp.scalar().map(|a| (a - closed).abs());
        let pass = matches!(diff, Some(d) if d < config.tol) && markov < config.tol;
        Ok(SweepPoint {
            beta,
            j,
            alpha_closed_form: closed,
            alpha_solver: fp.scalar(),
            difference: diff,
            fixed_point_residual: fp.residual,
            markov_residual: markov,
            pass,
        })
    });
    let points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    let passed = points.iter().filter(|p| p.pass).count();
    let code = if passed == points.len() { EXIT_OK } else { EXIT_VERIFY };
    Ok((
        code,
        json!({ "points": points, "summary": { "total": points.len(), "passed": passed } }),
    ))
}
