//! `gamma-lab`: JSON in, JSON reports out.
//!
//! Exit status: 0 when every check passed or equivalence was certified, 2 when
//! something was falsified or no certificate was found, 1 on errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gamma_core::abstractmodel::{example1_counterexample, model_pipeline, EmbeddingMode};
use gamma_core::dilation::{extract_w, necessary1_check, representation_split, schaffer_dilate, verify_dilation};
use gamma_core::gammaops::{
    classify, fo_tuple, gen_diagonal, gen_diagonal_normal, gen_diagonal_unitary, gen_symmetrized_ando,
    sufficient_condition_check, verify_fundamental_identity, FundamentalTuple, GammaClass, PointLaw, VnConfig,
};
use gamma_core::hardy::{blh_intertwine, MatrixPolynomial};
use gamma_core::invariants::{char_fn, coincidence_grid, decide_equivalence, CoincidenceConfig, Equivalence};
use gamma_core::matcore::{op_norm, serde_fmt, CMatrixJson};
use gamma_core::{Mat, Tolerances, Tuple};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "gamma-lab", version, about = "Numerical experiments with Γₙ-contractions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit a generated tuple as JSON.
    Gen(GenArgs),
    /// F_O-tuples of a tuple and of its adjoint, with residuals.
    Fo(InputArgs),
    /// Classification, polynomial falsifier and the sufficient condition.
    Check(InputArgs),
    /// Truncated dilation with its compression, representation and recovery checks.
    Dilate(DilateArgs),
    /// Asymptotic limits, model embedding and intertwining residuals.
    Model(ModelArgs),
    /// The weighted-shift counterexample.
    Example1(Example1Args),
    /// Characteristic function on a disc grid.
    Charfn(InputArgs),
    /// Unitary equivalence of two tuples.
    Equiv(EquivArgs),
    /// Pencil intertwiner for an inner matrix polynomial.
    Blh(BlhArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Write the structured report to this file as well as standard output.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    eq_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    rank_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-6)]
    cert_tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Points per circle for torus and pencil grids.
    #[arg(long, global = true, default_value_t = 24)]
    resolution: usize,
    /// Random test polynomials for the falsifier.
    #[arg(long, global = true, default_value_t = 200)]
    samples: usize,
    #[arg(long, global = true, default_value_t = 3)]
    vn_degree: usize,
}

impl Common {
    fn tolerances(&self) -> Result<Tolerances> {
        Ok(Tolerances::new(self.eq_tol, self.rank_tol, self.cert_tol)?)
    }

    fn vn(&self) -> VnConfig {
        VnConfig {
            degree: self.vn_degree,
            samples: self.samples,
            resolution: self.resolution,
            seed: self.seed,
            ..VnConfig::default()
        }
    }

    fn validate(&self, depths: &[(&str, usize)]) -> Result<()> {
        if self.resolution < 8 {
            bail!("--resolution must be at least 8 (got {})", self.resolution);
        }
        for (name, d) in depths {
            if *d < 2 {
                bail!("--{name} must be at least 2 (got {d})");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    /// Symmetrization of (I, …, I, f(T), g(T)).
    Ando,
    /// Diagonal with joint eigenvalues inside the polydisc image.
    Diagonal,
    /// Diagonal conjugated by a random unitary.
    Normal,
    /// Diagonal with unimodular roots.
    Unitary,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Tuple JSON file.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DilateArgs {
    input: PathBuf,
    /// Number of defect copies N.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    /// Largest monomial degree for the compression check.
    #[arg(long, default_value_t = 5)]
    degree: usize,
    /// Weight of the split on the unitary part.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Toeplitz section depth for the necessary condition.
    #[arg(long, default_value_t = 6)]
    toeplitz: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ModelArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 40)]
    fourier: usize,
    #[arg(long, default_value_t = 40)]
    laurent: usize,
    /// Build the model even when S_i*P ≠ PS_i*.
    #[arg(long)]
    relaxed: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Example1Args {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 12)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EquivArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BlhArgs {
    /// JSON file `{"theta": {"coeffs": [...]}, "A": [...]}`.
    input: PathBuf,
    #[arg(long, default_value_t = 8)]
    depth: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlhInput {
    theta: MatrixPolynomial<f64>,
    #[serde(rename = "A", with = "serde_fmt::matrices")]
    a: Vec<Mat>,
}

/// F_O-tuple in interchange form.
#[derive(Serialize)]
struct FoJson {
    defect_dim: usize,
    #[serde(rename = "A")]
    a: Vec<CMatrixJson>,
    residuals: Vec<f64>,
    leakage: Vec<f64>,
    leakage_adjoint: Vec<f64>,
    leakage_detected: bool,
}

impl FoJson {
    fn new(f: &FundamentalTuple<f64>) -> Self {
        Self {
            defect_dim: f.k(),
            a: f.a.iter().map(CMatrixJson::from_matrix).collect(),
            residuals: f.residuals.clone(),
            leakage: f.leakage.clone(),
            leakage_adjoint: f.leakage_adjoint.clone(),
            leakage_detected: f.leakage_detected,
        }
    }
}

/// A finished run: whether its checks passed and the JSON body.
struct Outcome {
    passed: bool,
    body: Value,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed input in {}", path.display()))
}

fn read_tuple(path: &Path) -> Result<Tuple> {
    read_json(path)
}

fn to_value<S: Serialize>(x: &S) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

fn run_gen(a: &GenArgs) -> Result<Tuple> {
    let g = match a.kind {
        GenKind::Ando => gen_symmetrized_ando(a.dim, a.n, a.common.seed)?,
        GenKind::Diagonal => gen_diagonal(a.dim, a.n, a.common.seed, PointLaw::Interior)?,
        GenKind::Normal => gen_diagonal_normal(a.dim, a.n, a.common.seed)?,
        GenKind::Unitary => gen_diagonal_unitary(a.dim, a.n, a.common.seed)?,
    };
    Ok(g)
}

fn run_fo(a: &InputArgs) -> Result<Outcome> {
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.input)?;
    let f = fo_tuple(&g, &tol)?;
    let fadj = fo_tuple(&g.adjoint(), &tol)?;
    let id = verify_fundamental_identity(&g, &f, &tol)?;
    let scale = 1.0 + g.entries().iter().map(op_norm).fold(0.0, f64::max);
    let passed = !f.leakage_detected && !fadj.leakage_detected && id.max <= tol.eq_tol * scale;
    Ok(Outcome {
        passed,
        body: json!({
            "fo": FoJson::new(&f),
            "fo_adjoint": FoJson::new(&fadj),
            "identity": to_value(&id)?,
        }),
    })
}

fn run_check(a: &InputArgs) -> Result<Outcome> {
    a.common.validate(&[])?;
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.input)?;
    let report = classify(&g, a.common.vn(), &tol)?;
    let falsified = report.class == GammaClass::Falsified;
    // The sufficient condition needs both fundamental equations to be solvable.
    let sufficiency = match (fo_tuple(&g, &tol), fo_tuple(&g.adjoint(), &tol)) {
        (Ok(f), Ok(fadj)) if !f.leakage_detected && !fadj.leakage_detected => {
            to_value(&sufficient_condition_check(&g, &f, &fadj, a.common.resolution, a.common.vn(), &tol)?)?
        }
        _ => Value::Null,
    };
    Ok(Outcome {
        passed: !falsified,
        body: json!({ "classification": to_value(&report)?, "sufficiency": sufficiency }),
    })
}

fn run_dilate(a: &DilateArgs) -> Result<Outcome> {
    a.common.validate(&[("depth", a.depth), ("toeplitz", a.toeplitz)])?;
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.input)?;
    let f = fo_tuple(&g, &tol)?;
    let fadj = fo_tuple(&g.adjoint(), &tol)?;
    let d = schaffer_dilate(&g, &f, a.depth, &tol)?;
    let comp = verify_dilation(&d, a.degree, &tol);
    let rep = representation_split(&d, a.alpha, &tol)?;
    let w = if a.depth >= 3 {
        to_value(&extract_w(&d, &f, &tol)?)?
    } else {
        Value::Null
    };
    let n1 = necessary1_check(&fadj, a.toeplitz, a.common.resolution, a.common.vn(), &tol)?;
    let passed = comp.passed && rep.max_residual <= tol.cert_tol && n1.passed;
    Ok(Outcome {
        passed,
        body: json!({
            "dilation": to_value(&d)?,
            "compression": to_value(&comp)?,
            "representation": to_value(&rep)?,
            "extraction": w,
            "necessary_condition": to_value(&n1)?,
        }),
    })
}

fn run_model(a: &ModelArgs) -> Result<Outcome> {
    a.common.validate(&[("fourier", a.fourier), ("laurent", a.laurent)])?;
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.input)?;
    let mode = if a.relaxed { EmbeddingMode::Relaxed } else { EmbeddingMode::Strict };
    let out = model_pipeline(&g, a.fourier, a.laurent, mode, &tol)?;
    let passed = out.model.max_w1.max(out.model.max_w2) <= tol.cert_tol && out.lemma1.max <= tol.cert_tol;
    Ok(Outcome {
        passed,
        body: to_value(&out)?,
    })
}

fn run_example1(a: &Example1Args) -> Result<Outcome> {
    let tol = a.common.tolerances()?;
    let r = example1_counterexample::<f64>(a.dim, a.n, a.alpha, &tol)?;
    // The run passes when the closed forms reproduce and the obstruction is visible.
    let passed = r.max_formula_residual() <= tol.eq_tol
        && r.model.max_w1 <= tol.eq_tol
        && (r.gap - r.gap_closed_form).abs() <= tol.eq_tol
        && r.gap > tol.cert_tol;
    Ok(Outcome {
        passed,
        body: to_value(&r)?,
    })
}

fn run_charfn(a: &InputArgs) -> Result<Outcome> {
    a.common.validate(&[])?;
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.input)?;
    let th = char_fn(g.p(), &coincidence_grid::<f64>(), a.common.resolution, &tol)?;
    let max_norm = th.max_norm();
    let origin = th.origin_residual(g.p());
    let passed = max_norm <= 1.0 + tol.eq_tol && origin.is_some_and(|r| r <= tol.eq_tol);
    Ok(Outcome {
        passed,
        body: json!({ "theta": to_value(&th)?, "max_norm": max_norm, "origin_residual": origin }),
    })
}

fn run_equiv(a: &EquivArgs) -> Result<Outcome> {
    let tol = a.common.tolerances()?;
    let g = read_tuple(&a.first)?;
    let h = read_tuple(&a.second)?;
    let cfg = CoincidenceConfig {
        restarts: a.restarts,
        seed: a.common.seed,
        ..CoincidenceConfig::default()
    };
    let r = decide_equivalence(&g, &h, cfg, &tol)?;
    Ok(Outcome {
        passed: r.verdict == Equivalence::Equivalent,
        body: to_value(&r)?,
    })
}

fn run_blh(a: &BlhArgs) -> Result<Outcome> {
    a.common.validate(&[("depth", a.depth)])?;
    let tol = a.common.tolerances()?;
    let input: BlhInput = read_json(&a.input)?;
    let r1 = blh_intertwine(&input.theta, &input.a, a.depth, &tol)?;
    let r2 = blh_intertwine(&input.theta, &input.a, 2 * a.depth, &tol)?;
    let drift = r1
        .b
        .iter()
        .zip(&r2.b)
        .map(|(x, y)| op_norm(&(x - y)))
        .fold(0.0, f64::max);
    Ok(Outcome {
        passed: r1.residual <= tol.eq_tol && drift <= tol.eq_tol,
        body: json!({ "result": to_value(&r1)?, "depth_drift": drift }),
    })
}

fn emit(common: &Common, command: &str, out: Outcome) -> Result<bool> {
    let doc = json!({
        "schema": SCHEMA,
        "command": command,
        "passed": out.passed,
        "report": out.body,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    if let Some(path) = &common.report {
        fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{text}");
    Ok(out.passed)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("GAMMA_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("GAMMA_LAB_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("GAMMA_LAB_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => {
            let g = run_gen(a)?;
            let text = serde_json::to_string_pretty(&g)? + "\n";
            if let Some(path) = &a.common.report {
                fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            print!("{text}");
            Ok(true)
        }
        Command::Fo(a) => emit(&a.common, "fo", run_fo(a)?),
        Command::Check(a) => emit(&a.common, "check", run_check(a)?),
        Command::Dilate(a) => emit(&a.common, "dilate", run_dilate(a)?),
        Command::Model(a) => emit(&a.common, "model", run_model(a)?),
        Command::Example1(a) => emit(&a.common, "example1", run_example1(a)?),
        Command::Charfn(a) => emit(&a.common, "charfn", run_charfn(a)?),
        Command::Equiv(a) => emit(&a.common, "equiv", run_equiv(a)?),
        Command::Blh(a) => emit(&a.common, "blh", run_blh(a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
