//! Batch front-end for the parametric-geometry toolkit.
//!
//! Subcommands wire the library modules into reproducible experiments:
//! `system` (validate / evaluate / dualize / rigidify / exponents / generate),
//! `profile` (parametric minima on a grid), `construct` (basis chains and the
//! synthesized point with its certificate), `extend` (scalar extension
//! verification and exact exponent transfer), `check` (cross-module
//! identities), and `experiment` (a TOML-scripted job list).
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on contract or assertion
//! failures.  Every failure path emits a JSON violation report naming the
//! invariant and its location.  Identical invocations produce identical
//! bytes; exact rationals travel as `"p/q"` strings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::json;

use parageo::construct::{
    build_chain, derive_schedule, synthesize_point, verify, ConstructionConstants, VerifyMode,
};
use parageo::extension::{
    exponent_transfer, pullback_comparability_check, uniform_identity_residual_f64,
    verify_profile_transfer, ExponentQuartet, ExtendedRational, ScalarExtension,
};
use parageo::minima::{
    duality_sum_check, product_comparability_check, profile, q_grid, EnumerationBudget,
    MinimaProfile, ProfileForm,
};
use parageo::nsystem::{
    doubling_system, random_periodic_system, random_self_similar_3system, random_valid_system,
    template_system, NSystem,
};
use parageo::numberfield::{
    parse_xi_expr, ApproximationTarget, FieldContext, Place, XiValue,
};
use parageo::scalar::{format_ratio, parse_ratio, Quad};

// ---------------------------------------------------------------------------
// argument grammar

#[derive(Parser)]
#[command(name = "parageo", version, about = "parametric geometry of numbers toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect, transform, and generate piecewise-linear systems.
    System {
        #[command(subcommand)]
        cmd: SystemCmd,
    },
    /// Compute parametric minima profiles.
    Profile {
        #[command(subcommand)]
        cmd: ProfileCmd,
    },
    /// Run the basis-chain construction and verify its certificate.
    Construct {
        #[command(subcommand)]
        cmd: ConstructCmd,
    },
    /// Extension of scalars: profile transfer and exponent arithmetic.
    Extend {
        #[command(subcommand)]
        cmd: ExtendCmd,
    },
    /// Cross-module identity checks.
    Check {
        #[command(subcommand)]
        cmd: CheckCmd,
    },
    /// Run a TOML-scripted list of jobs.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCmd,
    },
}

#[derive(Subcommand)]
enum SystemCmd {
    /// Check the defining conditions; report every violation.
    Validate(SystemIn),
    /// Evaluate the components on a point or a grid.
    Eval(SystemEval),
    /// Emit the dual system.
    Dual(SystemIn),
    /// Nudge switch values onto a rigid mesh.
    Rigidify(SystemRigidify),
    /// Exact exponent data (liminf / limsup ratios and derived exponents).
    Exponents(SystemIn),
    /// Generate a named or seeded system.
    Gen(SystemGen),
}

#[derive(Args)]
struct SystemIn {
    /// Input system (JSON).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SystemEval {
    #[arg(long = "in")]
    input: PathBuf,
    /// Single evaluation point (rational).
    #[arg(long)]
    q: Option<String>,
    /// Grid end (rational); used when --q is absent.
    #[arg(long)]
    qmax: Option<String>,
    /// Grid start (rational; default: the system's start).
    #[arg(long)]
    qfrom: Option<String>,
    /// Grid step (rational).
    #[arg(long, default_value = "1/4")]
    grid_step: String,
    /// Evaluate the dual map instead of the system itself.
    #[arg(long)]
    dual: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SystemRigidify {
    #[arg(long = "in")]
    input: PathBuf,
    /// Rigidity scale c′ (rational).
    #[arg(long, default_value = "1")]
    cprime: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SystemGen {
    /// template | doubling | valid | periodic | selfsimilar
    #[arg(long)]
    kind: GenKind,
    /// Ambient dimension (template / valid / periodic).
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Segment count for seeded finite systems.
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Template scale c′ (rational).
    #[arg(long, default_value = "1")]
    cprime: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Template,
    Doubling,
    Valid,
    Periodic,
    Selfsimilar,
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Successive-minima profile of one target on a parameter grid.
    Compute(ProfileCompute),
}

#[derive(Args)]
struct ProfileCompute {
    /// rational | D=<int>
    #[arg(long)]
    field: String,
    /// inf | inf2 | p:<prime>
    #[arg(long, default_value = "inf")]
    place: String,
    /// Comma-separated coordinate expressions.
    #[arg(long)]
    xi: String,
    #[arg(long)]
    qmax: f64,
    #[arg(long, default_value_t = 0.0)]
    qfrom: f64,
    #[arg(long, default_value_t = 0.25)]
    grid_step: f64,
    /// point | star | grade:<k>
    #[arg(long, default_value = "point")]
    form: String,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Enumeration height ceiling (natural log).
    #[arg(long, default_value_t = 64.0)]
    budget_height: f64,
    /// Enumeration candidate ceiling.
    #[arg(long, default_value_t = 4_000_000)]
    budget_candidates: u64,
}

impl BudgetArgs {
    fn to_budget(&self) -> EnumerationBudget {
        EnumerationBudget {
            max_height_log: self.budget_height,
            max_candidates: self.budget_candidates as usize,
            ..EnumerationBudget::default()
        }
    }
}

#[derive(Subcommand)]
enum ConstructCmd {
    /// Derive a schedule, build the chain, synthesize the point, verify.
    Run(ConstructRun),
}

#[derive(Args)]
struct ConstructRun {
    /// Rigid system to follow (JSON).
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = Mode::Certificate)]
    mode: Mode,
    /// Working precision in bits for the reported chain parameters.
    #[arg(long, default_value_t = 256)]
    precision: u32,
    /// Heuristic base C (omit for the rigorous dimension default).
    #[arg(long)]
    base: Option<u64>,
    /// Rigid mesh (rational; default: the system's declared mesh).
    #[arg(long)]
    mesh: Option<String>,
    /// Schedule start (rational; default: first workable bottom rise).
    #[arg(long)]
    from: Option<String>,
    /// Verification window end (default: 80% of the chain horizon).
    #[arg(long)]
    qmax: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Certificate,
    Enumeration,
}

#[derive(Subcommand)]
enum ExtendCmd {
    /// Verify that extended-target profiles track the base profiles.
    Verify(ExtendVerify),
    /// Exact exponent arithmetic under extension of scalars.
    Transfer(ExtendTransfer),
}

#[derive(Args)]
struct ExtendVerify {
    /// rational | D=<int>
    #[arg(long)]
    field: String,
    /// Comma-separated coordinate expressions over the field.
    #[arg(long)]
    xi: String,
    /// Comma-separated exact basis elements (default: 1,omega).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    qmax: f64,
    #[arg(long, default_value_t = 0.0)]
    qfrom: f64,
    #[arg(long, default_value_t = 0.5)]
    grid_step: f64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendTransfer {
    /// Degree of the extension.
    #[arg(long)]
    d: usize,
    #[arg(long)]
    omega_hat: String,
    #[arg(long)]
    lambda_hat: String,
    /// Defaults to --omega-hat.
    #[arg(long)]
    omega: Option<String>,
    /// Defaults to --lambda-hat.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Exact two-exponent identity on random periodic 3-systems.
    Jarnik(CheckJarnik),
    /// Profile sum and duality-sum boundedness across two horizons.
    Sumrule(CheckProfileTarget),
    /// Compound minima against products of point minima.
    Burger(CheckBurger),
    /// Pullback minima against field minima, block by block.
    Thunder(CheckThunder),
}

#[derive(Args)]
struct CheckJarnik {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    count: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckProfileTarget {
    #[arg(long)]
    field: String,
    #[arg(long, default_value = "inf")]
    place: String,
    #[arg(long)]
    xi: String,
    #[arg(long)]
    qmax: f64,
    #[arg(long, default_value_t = 0.0)]
    qfrom: f64,
    #[arg(long, default_value_t = 0.25)]
    grid_step: f64,
    /// Fail (exit 2) when a sup exceeds this bound.
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckBurger {
    #[arg(long)]
    field: String,
    #[arg(long, default_value = "inf")]
    place: String,
    #[arg(long)]
    xi: String,
    /// Compound grade to compare against point-minima products.
    #[arg(long, default_value_t = 2)]
    grade: usize,
    #[arg(long)]
    qmax: f64,
    #[arg(long, default_value_t = 0.0)]
    qfrom: f64,
    #[arg(long, default_value_t = 0.25)]
    grid_step: f64,
    #[arg(long)]
    tolerance: Option<f64>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckThunder {
    /// D=<int> (a real quadratic field) or rational.
    #[arg(long)]
    field: String,
    #[arg(long)]
    xi: String,
    /// Comma-separated ladder of parameter values.
    #[arg(long, default_value = "0,2,4")]
    q: String,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run every job listed in a TOML config, stopping at the first failure.
    Run(ExperimentRun),
}

#[derive(Args)]
struct ExperimentRun {
    #[arg(long)]
    config: PathBuf,
    /// Base directory for relative output paths (default: the config's dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plot,
}

// ---------------------------------------------------------------------------
// outcome plumbing

/// What a subcommand produced: text for the chosen sink, plus the exit code.
struct Outcome {
    text: String,
    code: u8,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, code: 0 }
    }
}

/// A contract/assertion failure: exit 2 with a machine-readable report.
fn violation_report(invariant: &str, location: &str, detail: serde_json::Value) -> Outcome {
    let report = json!({
        "ok": false,
        "violations": [{
            "invariant": invariant,
            "location": location,
            "detail": detail,
        }],
    });
    Outcome { text: pretty(&report), code: 2 }
}

fn violations_report(items: Vec<serde_json::Value>) -> Outcome {
    Outcome { text: pretty(&json!({"ok": false, "violations": items})), code: 2 }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialization is infallible");
    s.push('\n');
    s
}

fn write_sink(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                }
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// shared parsers

fn parse_rational(s: &str, what: &str) -> Result<BigRational> {
    parse_ratio(s).map_err(|e| anyhow!("bad {what} {s:?}: {e}"))
}

fn parse_field(s: &str) -> Result<FieldContext> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("rational") || t == "Q" || t == "q" {
        return Ok(FieldContext::rational());
    }
    if let Some(d) = t.strip_prefix("D=").or_else(|| t.strip_prefix("d=")) {
        let d: i64 = d.parse().with_context(|| format!("bad field parameter {t:?}"))?;
        return Ok(FieldContext::quadratic(d)?);
    }
    bail!("unknown field {s:?} (expected `rational` or `D=<int>`)")
}

fn parse_place(field: &FieldContext, s: &str) -> Result<Place> {
    let t = s.trim();
    let arch = field.archimedean_places();
    if t.eq_ignore_ascii_case("inf") || t == "∞" {
        return Ok(arch[0].clone());
    }
    if t.eq_ignore_ascii_case("inf2") {
        return arch
            .get(1)
            .cloned()
            .ok_or_else(|| anyhow!("the field has a single archimedean place"));
    }
    if let Some(p) = t.strip_prefix("p:") {
        let p: u64 = p.parse().with_context(|| format!("bad finite place {t:?}"))?;
        let places = field.places_above(p)?;
        return places.into_iter().next().ok_or_else(|| anyhow!("no place above {p}"));
    }
    bail!("unknown place {s:?} (expected `inf`, `inf2`, or `p:<prime>`)")
}

fn parse_xi_list(s: &str) -> Result<Vec<XiValue>> {
    s.split(',')
        .map(|part| parse_xi_expr(part.trim()).map_err(|e| anyhow!("bad coordinate {part:?}: {e}")))
        .collect()
}

fn parse_form(s: &str) -> Result<ProfileForm> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("point") {
        return Ok(ProfileForm::Grade(1));
    }
    if t.eq_ignore_ascii_case("star") {
        return Ok(ProfileForm::Star);
    }
    if let Some(k) = t.strip_prefix("grade:") {
        let k: usize = k.parse().with_context(|| format!("bad form {t:?}"))?;
        return Ok(ProfileForm::Grade(k));
    }
    bail!("unknown form {s:?} (expected `point`, `star`, or `grade:<k>`)")
}

fn build_target(field: &str, place: &str, xi: &str) -> Result<ApproximationTarget> {
    let field = parse_field(field)?;
    let place = parse_place(&field, place)?;
    let xi = parse_xi_list(xi)?;
    Ok(ApproximationTarget::new(field, place, xi)?)
}

fn load_system(path: &Path) -> Result<NSystem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    NSystem::from_json(&text).map_err(|e| anyhow!("parsing {}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// system subcommands

fn system_validate(a: &SystemIn) -> Result<Outcome> {
    let sys = load_system(&a.input)?;
    let violations = sys.validate();
    if violations.is_empty() {
        let report = json!({
            "ok": true,
            "n": sys.n,
            "switches": sys.switches.len(),
            "violations": [],
        });
        return Ok(Outcome::ok(pretty(&report)));
    }
    let items = violations
        .iter()
        .map(|v| {
            json!({
                "invariant": v.condition,
                "location": match v.switch {
                    Some(i) => format!("switch {i}"),
                    None => "system".to_string(),
                },
                "detail": v.detail,
            })
        })
        .collect();
    Ok(violations_report(items))
}

/// Rational evaluation grid from `from` to `to` in steps of `step`.
fn rational_grid(from: &BigRational, to: &BigRational, step: &BigRational) -> Vec<BigRational> {
    let mut grid = Vec::new();
    let mut t = from.clone();
    while t <= *to {
        grid.push(t.clone());
        t += step;
    }
    grid
}

fn system_eval(a: &SystemEval) -> Result<Outcome> {
    let sys = load_system(&a.input)?;
    let grid: Vec<BigRational> = if let Some(q) = &a.q {
        vec![parse_rational(q, "--q")?]
    } else {
        let qmax = a
            .qmax
            .as_deref()
            .ok_or_else(|| anyhow!("either --q or --qmax is required"))?;
        let to = parse_rational(qmax, "--qmax")?;
        let from = match &a.qfrom {
            Some(s) => parse_rational(s, "--qfrom")?,
            None => sys.q0.clone(),
        };
        let step = parse_rational(&a.grid_step, "--grid-step")?;
        if !step.is_positive() {
            bail!("--grid-step must be positive");
        }
        rational_grid(&from, &to, &step)
    };

    let dual = sys.dual();
    let mut exact_rows: Vec<(BigRational, Vec<BigRational>)> = Vec::with_capacity(grid.len());
    for q in &grid {
        let result = if a.dual { dual.evaluate(q) } else { sys.evaluate(q) };
        match result {
            Ok(vals) => exact_rows.push((q.clone(), vals)),
            Err(e) => {
                return Ok(violation_report(
                    "evaluation-domain",
                    &format!("q = {}", format_ratio(q)),
                    json!(e.to_string()),
                ))
            }
        }
    }

    let text = match a.format {
        Format::Json => {
            let rows: Vec<serde_json::Value> = exact_rows
                .iter()
                .map(|(q, vals)| {
                    json!({
                        "q": format_ratio(q),
                        "values": vals.iter().map(|v| format_ratio(v)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            pretty(&json!({"n": sys.n, "rows": rows}))
        }
        Format::Csv => {
            let mut s = csv_header(sys.n, "P");
            for (q, vals) in &exact_rows {
                s.push_str(&ratio_f64(q).to_string());
                for v in vals {
                    s.push(',');
                    s.push_str(&ratio_f64(v).to_string());
                }
                s.push('\n');
            }
            s
        }
        Format::Plot => {
            let mut s = plot_header(sys.n, "P");
            for (q, vals) in &exact_rows {
                s.push_str(&ratio_f64(q).to_string());
                for v in vals {
                    s.push(' ');
                    s.push_str(&ratio_f64(v).to_string());
                }
                s.push('\n');
            }
            s
        }
    };
    Ok(Outcome::ok(text))
}

fn csv_header(n: usize, label: &str) -> String {
    let mut s = String::from("q");
    for j in 1..=n {
        s.push_str(&format!(",{label}{j}"));
    }
    s.push('\n');
    s
}

fn plot_header(n: usize, label: &str) -> String {
    let mut s = String::from("# q");
    for j in 1..=n {
        s.push_str(&format!(" {label}{j}"));
    }
    s.push('\n');
    s
}

fn ratio_f64(r: &BigRational) -> f64 {
    parageo::scalar::ratio_to_f64(r)
}

fn system_dual(a: &SystemIn) -> Result<Outcome> {
    let sys = load_system(&a.input)?;
    Ok(Outcome::ok(pretty(&sys.dual().to_json_value())))
}

fn system_rigidify(a: &SystemRigidify) -> Result<Outcome> {
    let sys = load_system(&a.input)?;
    let cprime = parse_rational(&a.cprime, "--cprime")?;
    match sys.rigidify(&cprime) {
        Ok(rigid) => Ok(Outcome::ok(pretty(&rigid.to_json_value()))),
        Err(e) => Ok(violation_report("rigidify-contract", "system", json!(e.to_string()))),
    }
}

fn system_exponents(a: &SystemIn) -> Result<Outcome> {
    let sys = load_system(&a.input)?;
    match sys.exponents() {
        Ok(rep) => Ok(Outcome::ok(pretty(&rep.to_json_value()))),
        Err(e) => Ok(violation_report("exponent-domain", "system", json!(e.to_string()))),
    }
}

fn system_gen(a: &SystemGen) -> Result<Outcome> {
    let cprime = parse_rational(&a.cprime, "--cprime")?;
    let sys = match a.kind {
        GenKind::Template => template_system(a.n, &cprime),
        GenKind::Doubling => doubling_system(),
        GenKind::Valid => random_valid_system(a.n, a.seed, a.steps),
        GenKind::Periodic => random_periodic_system(a.n, a.seed),
        GenKind::Selfsimilar => random_self_similar_3system(a.seed),
    };
    Ok(Outcome::ok(pretty(&sys.to_json_value())))
}

// ---------------------------------------------------------------------------
// profile subcommand

fn profile_csv(p: &MinimaProfile, label: &str) -> String {
    let mut s = csv_header(p.count, label);
    for (i, &q) in p.q_grid.iter().enumerate() {
        s.push_str(&q.to_string());
        for v in &p.values[i] {
            s.push(',');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}

fn profile_json(p: &MinimaProfile) -> serde_json::Value {
    json!({
        "target": p.target_label,
        "ambient": p.ambient,
        "count": p.count,
        "grid": p.q_grid,
        "values": p.values,
        "exact": p.exact,
        "exact_per_q": p.exact_per_q,
    })
}

/// Columnar text for the combined graph: `q`, then the point family, then
/// (when given) the dual family — `2n+1` columns for a profile with both.
fn emit_plotdata(point: &MinimaProfile, star: Option<&MinimaProfile>) -> String {
    let mut s = String::from("# q");
    for j in 1..=point.count {
        s.push_str(&format!(" L{j}"));
    }
    if let Some(st) = star {
        for j in 1..=st.count {
            s.push_str(&format!(" Lstar{j}"));
        }
    }
    s.push('\n');
    for (i, &q) in point.q_grid.iter().enumerate() {
        s.push_str(&q.to_string());
        for v in &point.values[i] {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        if let Some(st) = star {
            for v in &st.values[i] {
                s.push(' ');
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    s
}

fn inexact_violation(p: &MinimaProfile) -> Outcome {
    let first = p
        .exact_per_q
        .iter()
        .position(|&e| !e)
        .map(|i| p.q_grid[i])
        .unwrap_or(f64::NAN);
    violation_report(
        "profile-certified",
        &format!("q = {first}"),
        json!("enumeration budget exhausted before the profile was certified; raise --budget-height / --budget-candidates"),
    )
}

fn profile_compute(a: &ProfileCompute) -> Result<Outcome> {
    let target = build_target(&a.field, &a.place, &a.xi)?;
    let grid = q_grid(a.qfrom, a.qmax, a.grid_step);
    if grid.is_empty() {
        bail!("empty parameter grid");
    }
    let budget = a.budget.to_budget();
    let form = parse_form(&a.form)?;
    let point = profile(&target, &form, &grid, &budget)?;
    if !point.exact {
        return Ok(inexact_violation(&point));
    }
    let text = match a.format {
        Format::Csv => {
            let label = if matches!(form, ProfileForm::Star) { "Lstar" } else { "L" };
            profile_csv(&point, label)
        }
        Format::Json => pretty(&profile_json(&point)),
        Format::Plot => {
            // the combined graph pairs the point family with its dual
            let star = profile(&target, &ProfileForm::Star, &grid, &budget)?;
            if !star.exact {
                return Ok(inexact_violation(&star));
            }
            emit_plotdata(&point, Some(&star))
        }
    };
    Ok(Outcome::ok(text))
}

// ---------------------------------------------------------------------------
// construct subcommand

/// First switch from which a schedule can start: a bottom rise whose
/// values sit on the rigid mesh.
fn infer_construction_start(sys: &NSystem, mesh: &BigRational) -> Option<BigRational> {
    sys.switches
        .iter()
        .filter(|s| s.k == 1)
        .map(|s| s.q.clone())
        .find(|q| derive_schedule(sys, mesh, q, 2).is_ok())
}

fn construct_run(a: &ConstructRun) -> Result<Outcome> {
    let sys = load_system(&a.system)?;
    let mesh = match &a.mesh {
        Some(s) => parse_rational(s, "--mesh")?,
        None => sys.mesh.clone().unwrap_or_else(|| BigRational::one()),
    };
    let from = match &a.from {
        Some(s) => parse_rational(s, "--from")?,
        None => infer_construction_start(&sys, &mesh).ok_or_else(|| {
            anyhow!("no switch starts a schedule; pass --from (and check --mesh)")
        })?,
    };
    let constants = match a.base {
        Some(c) => ConstructionConstants::heuristic(sys.n, c)?,
        None => ConstructionConstants::for_dimension(sys.n)?,
    };

    let schedule = match derive_schedule(&sys, &mesh, &from, a.steps) {
        Ok(s) => s,
        Err(e) => {
            return Ok(violation_report(
                "schedule-derivation",
                &format!("from = {}", format_ratio(&from)),
                json!(e.to_string()),
            ))
        }
    };
    let chain = match build_chain(&constants, &schedule, a.precision) {
        Ok(c) => c,
        Err(e) => return Ok(violation_report("chain-step", "construction", json!(e.to_string()))),
    };
    let problems = chain.verify_invariants(&constants);
    if !problems.is_empty() {
        return Ok(violations_report(
            problems
                .iter()
                .map(|p| json!({"invariant": "chain-invariant", "location": "chain", "detail": p}))
                .collect(),
        ));
    }
    let point = synthesize_point(&constants, &chain, None)?;
    let target = point.target()?;
    let horizon = 0.8 * chain.q_max();
    let q_max = a.qmax.map(|q| q.min(horizon)).unwrap_or(horizon);
    let mode = match a.mode {
        Mode::Certificate => VerifyMode::Certificate,
        Mode::Enumeration => VerifyMode::Enumeration,
    };
    let report = match verify(&constants, &sys, &mesh, &from, &chain, &target, q_max, mode) {
        Ok(r) => r,
        Err(e) => {
            return Ok(violation_report("verification", "sandwich window", json!(e.to_string())))
        }
    };

    let out = json!({
        "constants": {
            "n": constants.n,
            "base": constants.big_c.to_string(),
            "mesh_log": constants.mesh,
            "rigorous": constants.rigorous,
            "c7": constants.c7(),
        },
        "schedule_rows": schedule.len(),
        "from": format_ratio(&from),
        "rigid_mesh": format_ratio(&mesh),
        "chain": chain.to_json_value(),
        "point": point.to_json_value(),
        "verification": report.to_json_value(),
    });
    if !report.passes {
        return Ok(violation_report(
            "sandwich-bound",
            &format!("window = ({}, {})", report.window.0, report.window.1),
            out,
        ));
    }
    Ok(Outcome::ok(pretty(&out)))
}

// ---------------------------------------------------------------------------
// extend subcommands

fn parse_extension(field: &str, alpha: &Option<String>) -> Result<ScalarExtension> {
    let ctx = parse_field(field)?;
    match (&ctx, alpha) {
        (FieldContext::Rational, None) => Ok(ScalarExtension::rational()),
        (FieldContext::Rational, Some(_)) => {
            bail!("--alpha applies only to quadratic fields")
        }
        (FieldContext::Quadratic { d }, None) => Ok(ScalarExtension::real_quadratic(*d)?),
        (FieldContext::Quadratic { .. }, Some(list)) => {
            let mut alpha: Vec<Quad> = Vec::new();
            for part in list.split(',') {
                let part = part.trim();
                if part.eq_ignore_ascii_case("omega") {
                    alpha.push(ctx.omega()?);
                    continue;
                }
                let v = parse_xi_expr(part).map_err(|e| anyhow!("bad basis element {part:?}: {e}"))?;
                let q = v
                    .quad
                    .ok_or_else(|| anyhow!("basis element {part:?} is not exact in the field"))?;
                alpha.push(q);
            }
            Ok(ScalarExtension::with_basis(ctx, alpha)?)
        }
    }
}

fn extend_verify(a: &ExtendVerify) -> Result<Outcome> {
    let ext = parse_extension(&a.field, &a.alpha)?;
    let xi = parse_xi_list(&a.xi)?;
    let grid = q_grid(a.qfrom, a.qmax, a.grid_step);
    let budget = a.budget.to_budget();
    let report = match verify_profile_transfer(&ext, &xi, &grid, &budget) {
        Ok(r) => r,
        Err(e) => {
            return Ok(violation_report("profile-transfer", "grid", json!(e.to_string())))
        }
    };
    let payload = report.to_json_value();
    if !report.horizon_stable {
        return Ok(violation_report(
            "transfer-horizon-stability",
            "later half of the grid",
            payload,
        ));
    }
    Ok(Outcome::ok(pretty(&payload)))
}

fn parse_extended(s: &str, what: &str) -> Result<ExtendedRational> {
    ExtendedRational::parse(s).map_err(|e| anyhow!("bad {what} {s:?}: {e}"))
}

fn extend_transfer(a: &ExtendTransfer) -> Result<Outcome> {
    if a.d == 0 {
        bail!("--d must be at least 1");
    }
    let omega_hat = parse_extended(&a.omega_hat, "--omega-hat")?;
    let lambda_hat = parse_extended(&a.lambda_hat, "--lambda-hat")?;
    let omega = match &a.omega {
        Some(s) => parse_extended(s, "--omega")?,
        None => omega_hat.clone(),
    };
    let lambda = match &a.lambda {
        Some(s) => parse_extended(s, "--lambda")?,
        None => lambda_hat.clone(),
    };
    let input = ExponentQuartet { omega, omega_hat, lambda, lambda_hat };
    let output = exponent_transfer(&input, a.d);
    let residual = match (&output.omega_hat, &output.lambda_hat) {
        (ExtendedRational::Finite(_), ExtendedRational::Finite(_)) => {
            Some(uniform_identity_residual_f64(
                output.omega_hat.to_f64(),
                output.lambda_hat.to_f64(),
                a.d,
            ))
        }
        _ => None,
    };
    let quartet_json = |q: &ExponentQuartet| {
        json!({
            "omega": q.omega.to_string(),
            "omega_hat": q.omega_hat.to_string(),
            "lambda": q.lambda.to_string(),
            "lambda_hat": q.lambda_hat.to_string(),
        })
    };
    Ok(Outcome::ok(pretty(&json!({
        "d": a.d,
        "input": quartet_json(&input),
        "output": quartet_json(&output),
        "identity_residual": residual,
    }))))
}

// ---------------------------------------------------------------------------
// check subcommands

fn check_jarnik(a: &CheckJarnik) -> Result<Outcome> {
    if a.n != 3 {
        bail!("the two-exponent identity is specific to 3-systems");
    }
    let one: BigRational = One::one();
    let two = BigRational::from_integer(BigInt::from(2));
    let mut checked = 0u64;
    let mut skipped = 0u64;
    let mut failures: Vec<serde_json::Value> = Vec::new();
    for seed in a.seed..a.seed + a.count {
        let sys = random_periodic_system(3, seed);
        let rep = sys
            .exponents()
            .map_err(|e| anyhow!("exponents of seeded system {seed}: {e}"))?;
        if !rep.exact {
            bail!("periodic system {seed} produced non-exact exponents");
        }
        let pu1 = &rep.phi_upper[0];
        let pl3 = &rep.phi_lower[2];
        if Zero::is_zero(pu1) {
            // bottom component bounded: the identity's premise fails
            skipped += 1;
            continue;
        }
        checked += 1;
        let lhs = (&one - &two * pu1) * (&one - &two * pl3);
        let rhs = pu1 * pl3;
        if lhs != rhs {
            failures.push(json!({
                "invariant": "two-exponent-identity",
                "location": format!("seed {seed}"),
                "detail": format!(
                    "(1-2*{})(1-2*{}) = {} != {}",
                    format_ratio(pu1), format_ratio(pl3), format_ratio(&lhs), format_ratio(&rhs)
                ),
            }));
        }
    }
    if !failures.is_empty() {
        return Ok(violations_report(failures));
    }
    Ok(Outcome::ok(pretty(&json!({
        "ok": true,
        "checked": checked,
        "skipped_bounded_bottom": skipped,
        "exact": true,
    }))))
}

fn check_sumrule(a: &CheckProfileTarget) -> Result<Outcome> {
    let target = build_target(&a.field, &a.place, &a.xi)?;
    let grid = q_grid(a.qfrom, a.qmax, a.grid_step);
    let budget = a.budget.to_budget();
    let point = profile(&target, &ProfileForm::Grade(1), &grid, &budget)?;
    let star = profile(&target, &ProfileForm::Star, &grid, &budget)?;
    for p in [&point, &star] {
        if !p.exact {
            return Ok(inexact_violation(p));
        }
    }

    // structural bounds: 0 ≤ L₁ ≤ … ≤ L_n ≤ q
    let mut structure_ok = true;
    for (i, row) in point.values.iter().enumerate() {
        let q = point.q_grid[i];
        if row[0] < -1e-9 || row[row.len() - 1] > q + 1e-9 {
            structure_ok = false;
        }
        if row.windows(2).any(|w| w[1] + 1e-9 < w[0]) {
            structure_ok = false;
        }
    }

    // sups on the early half and on the full grid (two horizons)
    let mid = grid.len().div_ceil(2);
    let sum_gap = |upto: usize| -> f64 {
        point.values[..upto]
            .iter()
            .enumerate()
            .map(|(i, row)| (row.iter().sum::<f64>() - point.q_grid[i]).abs())
            .fold(0.0, f64::max)
    };
    let dual_gap = |upto: usize| -> f64 {
        let n = point.count;
        let mut sup: f64 = 0.0;
        for i in 0..upto {
            for j in 1..=n {
                let gap =
                    (star.values[i][j - 1] + point.values[i][n - j] - point.q_grid[i]).abs();
                sup = sup.max(gap);
            }
        }
        sup
    };
    let sum_early = sum_gap(mid);
    let sum_full = sum_gap(grid.len());
    let dual_early = dual_gap(mid);
    let dual_full = dual_gap(grid.len());
    let dual_check = duality_sum_check(&point, &star)?;

    let payload = json!({
        "structure_ok": structure_ok,
        "sum_gap_early": sum_early,
        "sum_gap_full": sum_full,
        "dual_sum_gap_early": dual_early,
        "dual_sum_gap_full": dual_full,
        "dual_sum_gap": dual_check,
        "growth_sum": sum_full - sum_early,
        "growth_dual": dual_full - dual_early,
    });
    if !structure_ok {
        return Ok(violation_report("profile-structure", "grid", payload));
    }
    if let Some(tol) = a.tolerance {
        if sum_full > tol || dual_full > tol {
            return Ok(violation_report(
                "sum-rule-tolerance",
                &format!("tolerance {tol}"),
                payload,
            ));
        }
    }
    Ok(Outcome::ok(pretty(&payload)))
}

fn check_burger(a: &CheckBurger) -> Result<Outcome> {
    let target = build_target(&a.field, &a.place, &a.xi)?;
    let grid = q_grid(a.qfrom, a.qmax, a.grid_step);
    let budget = a.budget.to_budget();
    let point = profile(&target, &ProfileForm::Grade(1), &grid, &budget)?;
    let compound = profile(&target, &ProfileForm::Grade(a.grade), &grid, &budget)?;
    for p in [&point, &compound] {
        if !p.exact {
            return Ok(inexact_violation(p));
        }
    }
    let cmp = product_comparability_check(&point, &compound)?;
    let payload = json!({
        "grade": a.grade,
        "sup_gap": cmp.sup_gap,
        "products_monotone": cmp.products_monotone,
    });
    if let Some(tol) = a.tolerance {
        if cmp.sup_gap > tol {
            return Ok(violation_report(
                "product-comparability-tolerance",
                &format!("tolerance {tol}"),
                payload,
            ));
        }
    }
    Ok(Outcome::ok(pretty(&payload)))
}

fn check_thunder(a: &CheckThunder) -> Result<Outcome> {
    let ext = parse_extension(&a.field, &None)?;
    let xi = parse_xi_list(&a.xi)?;
    let ladder: Vec<f64> = a
        .q
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad ladder value {s:?}: {e}")))
        .collect::<Result<_>>()?;
    let budget = a.budget.to_budget();
    let report = match pullback_comparability_check(&ext, &xi, &ladder, &budget) {
        Ok(r) => r,
        Err(e) => {
            return Ok(violation_report("pullback-comparability", "ladder", json!(e.to_string())))
        }
    };
    let payload = report.to_json_value();
    if !report.ordered {
        return Ok(violation_report("pullback-block-order", "ladder", payload));
    }
    Ok(Outcome::ok(pretty(&payload)))
}

// ---------------------------------------------------------------------------
// experiment runner

fn experiment_run(a: &ExperimentRun) -> Result<Outcome> {
    let text = fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))?;
    let value: toml::Value =
        toml::from_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    let base_dir: PathBuf = match &a.out_dir {
        Some(d) => d.clone(),
        None => a
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let jobs = value
        .get("jobs")
        .and_then(|j| j.as_array())
        .ok_or_else(|| anyhow!("the config needs a `jobs` array of argument lists"))?;

    let mut results: Vec<serde_json::Value> = Vec::new();
    for (i, job) in jobs.iter().enumerate() {
        let argv: Vec<String> = job
            .as_array()
            .ok_or_else(|| anyhow!("job {i} is not an array of strings"))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| anyhow!("job {i} holds a non-string argument"))
            })
            .collect::<Result<_>>()?;
        // resolve relative --out paths under the base directory
        let mut argv_resolved = Vec::with_capacity(argv.len() + 1);
        argv_resolved.push("parageo".to_string());
        let mut iter = argv.iter().peekable();
        while let Some(arg) = iter.next() {
            argv_resolved.push(arg.clone());
            if arg == "--out" || arg == "--system" || arg == "--in" || arg == "--config" {
                if let Some(path) = iter.next() {
                    let p = Path::new(path);
                    let resolved = if p.is_absolute() {
                        p.to_path_buf()
                    } else {
                        base_dir.join(p)
                    };
                    argv_resolved.push(resolved.display().to_string());
                }
            }
        }
        let code = dispatch_argv(&argv_resolved)?;
        results.push(json!({"job": i, "argv": argv, "exit": code}));
        if code != 0 {
            return Ok(Outcome {
                text: pretty(&json!({"ok": false, "completed": results})),
                code: 2,
            });
        }
    }
    Ok(Outcome::ok(pretty(&json!({"ok": true, "completed": results}))))
}

// ---------------------------------------------------------------------------
// dispatch

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::System { cmd } => match cmd {
            SystemCmd::Validate(a) => {
                let o = system_validate(a)?;
                write_sink(&a.out, &o.text)?;
                Ok(Outcome { text: String::new(), code: o.code })
            }
            SystemCmd::Eval(a) => finish(system_eval(a)?, &a.out),
            SystemCmd::Dual(a) => finish(system_dual(a)?, &a.out),
            SystemCmd::Rigidify(a) => finish(system_rigidify(a)?, &a.out),
            SystemCmd::Exponents(a) => finish(system_exponents(a)?, &a.out),
            SystemCmd::Gen(a) => finish(system_gen(a)?, &a.out),
        },
        Command::Profile { cmd } => match cmd {
            ProfileCmd::Compute(a) => finish(profile_compute(a)?, &a.out),
        },
        Command::Construct { cmd } => match cmd {
            ConstructCmd::Run(a) => finish(construct_run(a)?, &a.out),
        },
        Command::Extend { cmd } => match cmd {
            ExtendCmd::Verify(a) => finish(extend_verify(a)?, &a.out),
            ExtendCmd::Transfer(a) => finish(extend_transfer(a)?, &a.out),
        },
        Command::Check { cmd } => match cmd {
            CheckCmd::Jarnik(a) => finish(check_jarnik(a)?, &a.out),
            CheckCmd::Sumrule(a) => finish(check_sumrule(a)?, &a.out),
            CheckCmd::Burger(a) => finish(check_burger(a)?, &a.out),
            CheckCmd::Thunder(a) => finish(check_thunder(a)?, &a.out),
        },
        Command::Experiment { cmd } => match cmd {
            ExperimentCmd::Run(a) => finish(experiment_run(a)?, &None),
        },
    }
}

fn finish(outcome: Outcome, out: &Option<PathBuf>) -> Result<Outcome> {
    write_sink(out, &outcome.text)?;
    Ok(Outcome { text: String::new(), code: outcome.code })
}

fn dispatch_argv(argv: &[String]) -> Result<u8> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes; anything else is usage
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    Ok(0)
                }
                _ => {
                    let _ = e.print();
                    Ok(1)
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(o) => Ok(o.code),
        Err(e) => {
            eprintln!("error: {e:#}");
            Ok(1)
        }
    }
}

fn main() -> ExitCode {
    // PARAGEO_THREADS caps internal parallelism for reproducible timing
    if let Ok(threads) = std::env::var("PARAGEO_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
    let argv: Vec<String> = std::env::args().collect();
    match dispatch_argv(&argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
