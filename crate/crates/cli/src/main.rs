//! qre: decide embedding obstructions for ring presentations, classify simply
//! connected 4-manifolds by intersection form, and run the quasiregular map
//! labs. Exit code 0 means success, 1 a usage or tool failure, and 2 a
//! mathematically negative verdict backed by a certificate in the report.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qre_core::cohomology;
use qre_core::exterior::Multivector;
use qre_core::fourfold::{self, IntersectionForm};
use qre_core::measure::{self, LabConfig, TestFunction};
use qre_core::obstruction::{self, SearchConfig, Verdict};
use qre_core::pullback::{self, AffineMapSpec, PhiForm, RotatedFamilySpec, SequenceChoice, WaveForm};
use qre_core::quad;
use qre_core::rotation::plane_rotation;
use qre_core::RingQ;

const SCHEMA: &str = "qre-toolkit/1";

#[derive(Parser)]
#[command(name = "qre", version, about = "quasiregular ellipticity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, combine, and validate ring presentations.
    Ring {
        #[command(subcommand)]
        action: RingAction,
    },
    /// Decide the graded-algebra embedding obstruction for a presentation.
    Obstruct {
        #[command(subcommand)]
        action: ObstructAction,
    },
    /// Classify an intersection form, or print the decision table.
    Classify(ClassifyArgs),
    /// Print the decision table (same as `classify --table`).
    Table(TableArgs),
    /// Singular-limit lab for the winding map family.
    MeasureLab {
        #[command(subcommand)]
        action: MeasureAction,
    },
    /// Pullback verifier: invariance, rotated limits, norm bound, exact decay.
    Pullback {
        #[command(subcommand)]
        action: PullbackAction,
    },
}

#[derive(Subcommand)]
enum RingAction {
    /// Emit a standard presentation.
    New(RingNewArgs),
    /// Connected sum of two presentations.
    Sum(RingSumArgs),
    /// Check the presentation axioms.
    Validate(RingValidateArgs),
}

#[derive(Args)]
struct RingNewArgs {
    #[arg(long, value_enum)]
    kind: RingKind,
    /// Manifold dimension (sphere, torus) or degree-1 rank (zero-cup-dim3).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RingKind {
    Sphere,
    Torus,
    Cp2,
    Cp2bar,
    S2xs2,
    /// Dimension-3 duality algebra with vanishing degree-1 products.
    ZeroCupDim3,
}

#[derive(Args)]
struct RingSumArgs {
    left: PathBuf,
    right: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RingValidateArgs {
    /// Presentation file, or `-` for stdin.
    ring: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ObstructAction {
    /// Run the exact checks and, if they pass, the embedding search.
    Check(ObstructArgs),
}

#[derive(Args)]
struct ObstructArgs {
    /// Presentation file, or `-` for stdin.
    ring: String,
    /// Search configuration JSON (restarts, max_iters, tolerances, seed).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Intersection form file; omit with --table.
    form: Option<String>,
    /// Print the full decision table instead.
    #[arg(long)]
    table: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum MeasureAction {
    Run(MeasureArgs),
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Family indices, comma separated.
    #[arg(long, default_value = "1,2,4,8,16", value_delimiter = ',')]
    j: Vec<u32>,
    /// Cells across the diameter of the radius-2 ball.
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    #[arg(long, default_value_t = 4)]
    refine: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test-function battery JSON (array of {type, center, radius}).
    #[arg(long)]
    battery: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PullbackAction {
    Verify(PullbackArgs),
}

#[derive(Args)]
struct PullbackArgs {
    #[arg(long, value_enum)]
    case: PullbackCase,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    jmax: u32,
    /// Cells per axis for the pairing quadrature.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PullbackCase {
    Invariance,
    Rotated,
    NormBound,
    ExactDecay,
}

fn main() -> ExitCode {
    // usage errors exit 1; real help/version requests exit 0
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ring { action } => ring(action),
        Command::Obstruct { action } => match action {
            ObstructAction::Check(args) => obstruct(args),
        },
        Command::Classify(args) => classify(args),
        Command::Table(args) => {
            classify(ClassifyArgs { form: None, table: true, format: args.format, out: args.out })
        }
        Command::MeasureLab { action } => match action {
            MeasureAction::Run(args) => measure_lab(args),
        },
        Command::Pullback { action } => match action {
            PullbackAction::Verify(args) => pullback_verify(args),
        },
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).context("reading stdin")?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {path}"))
    }
}

fn read_json(path: &str) -> Result<Value> {
    let text = read_input(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing JSON from {path}"))
}

fn read_ring(path: &str) -> Result<RingQ> {
    let value = read_json(path)?;
    RingQ::from_json(&value).with_context(|| format!("decoding ring presentation from {path}"))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{content}"),
    }
    Ok(())
}

fn emit_json(out: &Option<PathBuf>, value: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(value)?)
}

fn ring(action: RingAction) -> Result<ExitCode> {
    match action {
        RingAction::New(args) => {
            let ring: RingQ = match args.kind {
                RingKind::Sphere => {
                    cohomology::build_sphere(args.dim.context("--dim required for sphere")?)?
                }
                RingKind::Torus => cohomology::build_torus(args.dim.context("--dim required for torus")?)?,
                RingKind::Cp2 => cohomology::build_cp2(),
                RingKind::Cp2bar => cohomology::build_cp2bar(),
                RingKind::S2xs2 => cohomology::build_s2xs2(),
                RingKind::ZeroCupDim3 => {
                    cohomology::build_dim3_zero_cup(args.dim.context("--dim gives the degree-1 rank")?)?
                }
            };
            emit_json(&args.out, &ring.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        RingAction::Sum(args) => {
            let left = read_ring(&args.left.to_string_lossy())?;
            let right = read_ring(&args.right.to_string_lossy())?;
            let sum = cohomology::connected_sum(&left, &right)?;
            emit_json(&args.out, &sum.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        RingAction::Validate(args) => {
            let ring = read_ring(&args.ring)?;
            let report = ring.validate();
            let value = json!({
                "schema": SCHEMA,
                "valid": report.is_valid(),
                "checks": report.checks.iter().map(|c| json!({
                    "name": c.name,
                    "passed": c.passed,
                    "witness": c.witness,
                })).collect::<Vec<_>>(),
            });
            emit_json(&args.out, &value)?;
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn obstruct(args: ObstructArgs) -> Result<ExitCode> {
    let ring = read_ring(&args.ring)?;
    let config = match &args.config {
        Some(path) => SearchConfig::from_json(&read_json(&path.to_string_lossy())?)?,
        None => SearchConfig::default(),
    };
    let report = obstruction::verdict(&ring, &config)?;
    emit_json(&args.out, &report.to_json())?;
    Ok(match report.verdict {
        Verdict::Obstructed { .. } => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn classify(args: ClassifyArgs) -> Result<ExitCode> {
    if args.table {
        let content = match args.format {
            OutputFormat::Text => fourfold::table_to_text(),
            _ => serde_json::to_string_pretty(&fourfold::table_to_json())?,
        };
        emit(&args.out, &content)?;
        return Ok(ExitCode::SUCCESS);
    }
    let Some(form_path) = args.form else {
        bail!("provide an intersection form file or --table");
    };
    let value = read_json(&form_path)?;
    let form = match IntersectionForm::from_json(&value) {
        Ok(f) => f,
        Err(err) => {
            let report = json!({
                "schema": SCHEMA,
                "valid": false,
                "certificate": err.to_string(),
            });
            emit_json(&args.out, &report)?;
            return Ok(ExitCode::from(2));
        }
    };
    let decision = fourfold::qre_ellipticity_decision(&form)?;
    let homeo = fourfold::classify_simply_connected(&form)?;
    let report = json!({
        "schema": SCHEMA,
        "form": form.to_json(),
        "homeomorphism_type": homeo.to_json(),
        "elliptic": decision.elliptic,
        "elliptic_homeo": decision.homeo.map(|h| h.to_json()),
    });
    emit_json(&args.out, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn measure_lab(args: MeasureArgs) -> Result<ExitCode> {
    let battery = match &args.battery {
        Some(path) => {
            let value = read_json(&path.to_string_lossy())?;
            value
                .as_array()
                .context("battery file must hold an array of test functions")?
                .iter()
                .map(TestFunction::from_json)
                .collect::<qre_core::Result<Vec<_>>>()?
        }
        None => measure::default_battery(args.n),
    };
    let config = LabConfig {
        n: args.n,
        j_values: args.j.clone(),
        grid: args.grid,
        refine_depth: args.refine,
        distortion_samples: 2000,
        seed: args.seed,
        battery,
    };
    let report = measure::run_lab(&config)?;
    let content = match args.format {
        OutputFormat::Csv => measure_csv(&report)?,
        _ => serde_json::to_string_pretty(&report.to_json())?,
    };
    emit(&args.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn measure_csv(report: &measure::MeasureReport) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# schema: {SCHEMA}\n"));
    out.push_str(&format!("# config: {}\n", serde_json::to_string(&report.config.to_json())?));
    out.push_str("j,A,total,doubling_ratio,K_est,psi_id,I_j,target,abs_err\n");
    for rec in &report.records {
        for psi in &rec.psi {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e}\n",
                rec.j,
                rec.area_unit,
                rec.total,
                rec.doubling_ratio,
                rec.distortion_estimate,
                psi.id.replace(',', ";"),
                psi.integral,
                psi.target,
                psi.abs_err,
            ));
        }
    }
    Ok(out)
}

fn pullback_verify(args: PullbackArgs) -> Result<ExitCode> {
    let case_name = match args.case {
        PullbackCase::Invariance => "invariance",
        PullbackCase::Rotated => "rotated",
        PullbackCase::NormBound => "norm-bound",
        PullbackCase::ExactDecay => "exact-decay",
    };
    let config = json!({
        "case": case_name,
        "n": args.n,
        "jmax": args.jmax,
        "grid": args.grid,
        "seed": args.seed,
    });
    let report = match args.case {
        PullbackCase::Invariance => {
            let (forms, identical) = pullback::invariance_probe(args.n, 100, args.seed)?;
            json!({
                "schema": SCHEMA,
                "config": config,
                "case": "invariance",
                "runs": 100,
                "bit_identical": identical,
                "pullbacks": forms.iter().map(|(idx, mv)| json!({
                    "form": idx,
                    "normalized_pullback": mv.to_json(),
                })).collect::<Vec<_>>(),
            })
        }
        PullbackCase::Rotated => {
            let spec = RotatedFamilySpec::new(plane_rotation(args.n, std::f64::consts::FRAC_PI_2), args.jmax)?;
            let form_idx = vec![1u8];
            let mut sequences = Vec::new();
            for choice in [SequenceChoice::Centered, SequenceChoice::BallFollowing] {
                let recs = pullback::limit_discrepancy(
                    &spec,
                    &form_idx,
                    choice,
                    choice.correct_target(),
                    args.jmax,
                    args.grid,
                )?;
                sequences.push(json!({
                    "sequence": match choice {
                        SequenceChoice::Centered => "centered",
                        SequenceChoice::BallFollowing => "ball_following",
                    },
                    "target": "correct",
                    "deltas": recs.iter().map(|r| json!({"j": r.j, "max": r.max(), "per_phi": r.per_phi})).collect::<Vec<_>>(),
                }));
            }
            let wrong = pullback::limit_discrepancy(
                &spec,
                &form_idx,
                SequenceChoice::BallFollowing,
                pullback::LimitTarget::Untwisted,
                args.jmax,
                args.grid,
            )?;
            let floors = pullback::pairing_floors(&spec, &form_idx, args.grid);
            json!({
                "schema": SCHEMA,
                "config": config,
                "case": "rotated",
                "test_battery": "eight bump-profile forms supported in the open unit ball, where both limit embeddings are exact",
                "sequences": sequences,
                "wrong_target": {
                    "sequence": "ball_following",
                    "target": "untwisted",
                    "deltas": wrong.iter().map(|r| json!({"j": r.j, "max": r.max(), "per_phi": r.per_phi})).collect::<Vec<_>>(),
                    "floors": floors,
                },
            })
        }
        PullbackCase::NormBound => {
            let mut cases = Vec::new();
            let alphas: Vec<Multivector<f64>> = vec![
                Multivector::basis(args.n, &[1])?,
                Multivector::basis(args.n, &[2])?,
                Multivector::basis(args.n, &[1])?.add(&Multivector::basis(args.n, &[2])?.scale(&2.0))?,
            ];
            let rescalings = [
                AffineMapSpec::new(vec![0.0; args.n], 1.0)?,
                AffineMapSpec::new({
                    let mut t = vec![0.0; args.n];
                    t[0] = 3.5;
                    t
                }, 2u64.pow(args.jmax.min(10)) as f64)?,
            ];
            for (ai, alpha) in alphas.iter().enumerate() {
                for (ri, rescale) in rescalings.iter().enumerate() {
                    let rep = pullback::norm_bound_check(None, rescale, alpha, args.grid.max(128), 1e-3)?;
                    cases.push(json!({
                        "alpha": ai,
                        "rescaling": ri,
                        "map": "torus covering",
                        "report": rep.to_json(),
                    }));
                }
            }
            let spec = RotatedFamilySpec::new(plane_rotation(args.n, std::f64::consts::FRAC_PI_2), 2)?;
            let rep = pullback::norm_bound_check(
                Some(&spec),
                &AffineMapSpec::new(spec.balls[1].center.clone(), spec.balls[1].radius / 2.0)?,
                &alphas[0],
                args.grid.max(128),
                1e-3,
            )?;
            cases.push(json!({"alpha": 0, "map": "rotated composite", "report": rep.to_json()}));
            let all_pass = cases.iter().all(|c| c["report"]["pass"].as_bool().unwrap_or(false));
            json!({
                "schema": SCHEMA,
                "config": config,
                "case": "norm-bound",
                "all_pass": all_pass,
                "cases": cases,
            })
        }
        PullbackCase::ExactDecay => {
            let battery: Vec<(WaveForm, PhiForm)> = vec![
                (
                    WaveForm::new(1, vec![2])?,
                    PhiForm { psi: TestFunction::Bump { center: vec![0.1, -0.2], radius: 0.5 }, idx: vec![] },
                ),
                (
                    WaveForm::new(1, vec![])?,
                    PhiForm { psi: TestFunction::Bump { center: vec![0.0, 0.0], radius: 0.45 }, idx: vec![2] },
                ),
                (
                    WaveForm::new(2, vec![])?,
                    PhiForm { psi: TestFunction::Bump { center: vec![-0.15, 0.1], radius: 0.4 }, idx: vec![1] },
                ),
            ];
            let mut cases = Vec::new();
            for (wi, (alpha, phi)) in battery.iter().enumerate() {
                let recs = pullback::exact_decay_check(alpha, phi, args.n, args.jmax, 12)?;
                let ratios: Vec<f64> = recs.iter().map(|r| r.ratio).collect();
                cases.push(json!({
                    "case": wi,
                    "alpha_axis": alpha.axis,
                    "alpha_idx": alpha.idx,
                    "phi": phi.label(),
                    "records": recs.iter().map(|r| json!({
                        "j": r.j, "scale": r.scale, "normalization": r.normalization,
                        "pairing": r.integral, "scaled_ratio": r.ratio,
                    })).collect::<Vec<_>>(),
                    "kendall_tau": quad::kendall_tau(&ratios),
                }));
            }
            json!({
                "schema": SCHEMA,
                "config": config,
                "case": "exact-decay",
                "cases": cases,
            })
        }
    };
    emit_json(&args.out, &report)?;
    Ok(ExitCode::SUCCESS)
}
