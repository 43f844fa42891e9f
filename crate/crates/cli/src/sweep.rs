//! One-parameter sweeps written as CSV.

use affineineq::inequalities::{evaluate, DeficitReport, InequalityId, Options};
use affineineq::parallel::par_tasks;
use affineineq::quadrature::Levels;
use clap::ValueEnum;

use crate::spec::{case, CaseArgs};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// Family parameter b (or the cone slope).
    B,
    /// Log-Sobolev extremal scale σ.
    Sigma,
    /// Ratio t of A = diag(√t, …, 1/√t).
    Anisotropy,
    Alpha,
    /// Multiplier applied to every default quadrature level.
    Level,
}

pub fn values(from: f64, to: f64, steps: usize, geometric: bool) -> Result<Vec<f64>, CliError> {
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Config("sweep needs finite bounds and at least one step".into()));
    }
    if geometric && (from <= 0.0 || to <= 0.0) {
        return Err(CliError::Config("geometric sweep needs positive bounds".into()));
    }
    Ok((0..steps)
        .map(|i| {
            let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
            if geometric {
                from * (to / from).powf(t)
            } else {
                from + (to - from) * t
            }
        })
        .collect())
}

fn scaled_levels(n: usize, m: f64) -> Levels {
    let d = Levels::default_for(n);
    let s = |x: usize| ((x as f64 * m).round() as usize).max(4);
    if n >= 4 {
        Levels { sphere: d.sphere, space_angular: d.space_angular, radial: s(d.radial) }
    } else {
        Levels { sphere: s(d.sphere), space_angular: s(d.space_angular), radial: s(d.radial) }
    }
}

pub fn run(id: InequalityId, base: &CaseArgs, axis: Axis, params: &[f64]) -> Vec<Result<DeficitReport, String>> {
    par_tasks(params.len(), |i| {
        let t = params[i];
        let mut args = base.clone();
        match axis {
            Axis::B => args.b = Some(t),
            Axis::Sigma => args.sigma = Some(t),
            Axis::Anisotropy => args.anisotropy = Some(t),
            Axis::Alpha => args.alpha = Some(t),
            Axis::Level => args.levels = None,
        }
        let mut c = case(id, &args).map_err(|e| e.to_string())?;
        if axis == Axis::Level {
            c.levels = Some(scaled_levels(args.n, t));
        }
        evaluate(&c, &Options { refine: true }).map_err(|e| e.to_string())
    })
}

pub const CSV_HEADER: &str = "param,lhs,rhs,deficit,scaled_deficit,ratio,refinement_delta,pass";

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

pub fn render_csv(params: &[f64], results: &[Result<DeficitReport, String>]) -> Result<String, CliError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (t, r) in params.iter().zip(results) {
        let r = r.as_ref().map_err(|e| CliError::Runtime(format!("param {t}: {e}")))?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            num(Some(*t)),
            num(Some(r.lhs)),
            num(Some(r.rhs)),
            num(Some(r.deficit)),
            num(Some(r.scaled_deficit)),
            num(r.ratio),
            num(r.refinement_delta),
            r.pass
        ));
    }
    Ok(out)
}
