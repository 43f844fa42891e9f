use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use affineineq::bodies::{centroid_body_on, matrix_from_rows, BodySpec, ConvexBody};
use affineineq::inequalities::{evaluate, InequalityId, Options};
use affineineq::quadrature::{cached_sphere_rule, Levels};
use affineineq_cli::spec::{self, CaseArgs};
use affineineq_cli::suite::{render_jsonl, run_cases, Summary, SuiteConfig};
use affineineq_cli::sweep::{self, Axis};
use affineineq_cli::CliError;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "affineineq", version, about = "Numerical checks of affine functional inequalities")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every check of a suite config and write JSONL reports.
    Verify {
        config: PathBuf,
        /// Report file; overrides the config's output path ("-" for stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the coarse re-evaluation behind refinement deltas.
        #[arg(long)]
        no_refine: bool,
    },
    /// Evaluate one inequality and print its report.
    Deficit {
        id: String,
        #[command(flatten)]
        args: CaseArgs,
        #[arg(long)]
        no_refine: bool,
    },
    /// Vary one parameter and write CSV rows.
    Sweep {
        id: String,
        #[command(flatten)]
        args: CaseArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        geometric: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Body computations on JSON body documents.
    Body {
        #[arg(value_enum)]
        op: BodyOp,
        /// Body document to read; otherwise the body flags are used.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        args: CaseArgs,
        /// Matrix rows for `image`, e.g. "2,0;0,0.5".
        #[arg(long)]
        matrix: Option<String>,
        /// Direction for `support`, e.g. "1,0".
        #[arg(long)]
        direction: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BodyOp {
    Show,
    Volume,
    Centroid,
    Polar,
    Image,
    Support,
}

fn parse_id(s: &str) -> Result<InequalityId, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(format!("unknown inequality id {s:?}")))
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text)?,
        _ => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{s:?}: {e}"))))
        .collect()
}

fn verify(config: &PathBuf, out: Option<PathBuf>, refine: bool) -> Result<u8, CliError> {
    let cfg = SuiteConfig::load(config)?;
    let cases = cfg.expand()?;
    let results = run_cases(&cases, &Options { refine });
    let jsonl = render_jsonl(&results)?;
    let summary = Summary::new(&cfg.name, &results);
    let target = out.or_else(|| {
        cfg.output.as_ref().map(|p| match config.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        })
    });
    match &target {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::write(p, &jsonl)?;
            let mut sp = p.clone().into_os_string();
            sp.push(".summary.json");
            let js = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
            std::fs::write(PathBuf::from(sp), js + "\n")?;
            print!("{}", summary.render());
        }
        _ => {
            print!("{jsonl}");
            eprint!("{}", summary.render());
        }
    }
    Ok(summary.exit_code())
}

fn load_body(input: Option<&PathBuf>, args: &CaseArgs) -> Result<ConvexBody, CliError> {
    let spec: BodySpec = match input {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| CliError::Config(e.to_string()))?,
        None => {
            let kind = args.body.ok_or_else(|| CliError::Config("body needs --input or --body".into()))?;
            spec::body(args, kind)?
        }
    };
    Ok(spec.build()?)
}

fn body_cmd(
    op: BodyOp,
    input: Option<&PathBuf>,
    args: &CaseArgs,
    matrix: Option<&str>,
    direction: Option<&str>,
) -> Result<String, CliError> {
    let k = load_body(input, args)?;
    let doc = |b: &ConvexBody| -> Result<serde_json::Value, CliError> {
        Ok(serde_json::json!({ "volume": b.volume()?, "body": b.to_spec() }))
    };
    let value = match op {
        BodyOp::Show => serde_json::to_value(k.to_spec()).map_err(|e| CliError::Runtime(e.to_string()))?,
        BodyOp::Volume => serde_json::json!({ "kind": k.kind(), "n": k.dim(), "volume": k.volume()? }),
        BodyOp::Centroid => {
            let p = args.p.unwrap_or(2.0);
            let levels = match &args.levels {
                Some(l) => spec::parse_levels(l)?,
                None => Levels::default_for(k.dim()),
            };
            let rule = cached_sphere_rule(k.dim(), levels.sphere)?;
            doc(&centroid_body_on(&k, p, &rule)?)?
        }
        BodyOp::Polar => doc(&k.polar()?)?,
        BodyOp::Image => {
            let rows: Vec<Vec<f64>> = matrix
                .ok_or_else(|| CliError::Config("image needs --matrix".into()))?
                .split(';')
                .map(parse_floats)
                .collect::<Result<_, _>>()?;
            doc(&k.linear_image(&matrix_from_rows(&rows)?)?)?
        }
        BodyOp::Support => {
            let u = parse_floats(direction.ok_or_else(|| CliError::Config("support needs --direction".into()))?)?;
            if u.len() != k.dim() {
                return Err(CliError::Config("direction has the wrong dimension".into()));
            }
            serde_json::json!({ "support": k.support(&u)?, "radial": k.radial(&u)? })
        }
    };
    Ok(serde_json::to_string(&value).map_err(|e| CliError::Runtime(e.to_string()))? + "\n")
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Verify { config, out, no_refine } => verify(&config, out, !no_refine),
        Cmd::Deficit { id, args, no_refine } => {
            let case = spec::case(parse_id(&id)?, &args)?;
            let rep = evaluate(&case, &Options { refine: !no_refine })?;
            let line = serde_json::to_string(&rep).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{line}");
            Ok(if rep.pass { 0 } else { 1 })
        }
        Cmd::Sweep { id, args, axis, from, to, steps, geometric, out } => {
            let id = parse_id(&id)?;
            let params = sweep::values(from, to, steps, geometric)?;
            spec::case(id, &args)?;
            let results = sweep::run(id, &args, axis, &params);
            let csv = sweep::render_csv(&params, &results)?;
            write_out(out.as_ref(), &csv)?;
            Ok(if results.iter().all(|r| r.as_ref().map(|r| r.pass).unwrap_or(false)) { 0 } else { 1 })
        }
        Cmd::Body { op, input, args, matrix, direction, out } => {
            let text = body_cmd(op, input.as_ref(), &args, matrix.as_deref(), direction.as_deref())?;
            write_out(out.as_ref(), &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("affineineq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
