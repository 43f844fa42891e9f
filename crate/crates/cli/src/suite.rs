//! Suite configs: parsing, expansion of replicated entries, evaluation and output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use affineineq::inequalities::{evaluate, Case, DeficitReport, InequalityId, Options, Scale};
use affineineq::parallel::par_tasks;
use affineineq::quadrature::Levels;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<f64>,
}

impl Tolerances {
    fn for_scale(&self, s: Scale) -> Option<f64> {
        match s {
            Scale::Entropy => self.entropy,
            Scale::Ratio => self.ratio,
            Scale::Body => self.body,
            Scale::Identity => self.identity,
        }
    }
}

/// One config entry: a case, optionally repeated with shifted seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    #[serde(flatten)]
    pub case: Value,
    /// Copy i adds i to every `seed` field of the case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub v: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<BTreeMap<usize, Levels>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cases: Vec<Entry>,
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.v != SCHEMA_VERSION {
            return Err(CliError::Config(format!("unsupported schema version {}", cfg.v)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Concrete cases with suite defaults applied, in descriptor order.
    pub fn expand(&self) -> Result<Vec<Case>, CliError> {
        let mut out = Vec::new();
        for entry in &self.cases {
            let copies = entry.replicate.unwrap_or(1);
            for i in 0..copies {
                let mut v = entry.case.clone();
                if entry.replicate.is_some() {
                    shift_seeds(&mut v, i);
                    if let Some(Value::String(l)) = v.get_mut("label") {
                        *l = format!("{l} #{i}");
                    }
                }
                let mut case: Case =
                    serde_json::from_value(v).map_err(|e| CliError::Config(format!("case: {e}")))?;
                if case.seed.is_none() && uses_case_seed(case.id) {
                    case.seed = Some(self.seed);
                }
                if case.tolerance.is_none() {
                    case.tolerance = self.tolerances.for_scale(case.id.scale());
                }
                if case.levels.is_none() {
                    if let Some(map) = &self.levels {
                        if let Ok(n) = case_dim(&case) {
                            case.levels = map.get(&n).copied();
                        }
                    }
                }
                out.push(case);
            }
        }
        out.sort_by_cached_key(descriptor);
        Ok(out)
    }
}

fn uses_case_seed(id: InequalityId) -> bool {
    matches!(id, InequalityId::SphereMoment | InequalityId::SlInvariance)
}

fn case_dim(case: &Case) -> Result<usize, CliError> {
    if let Some(n) = case.n {
        return Ok(n);
    }
    let v = serde_json::to_value(case).map_err(|e| CliError::Config(e.to_string()))?;
    for key in ["function", "body"] {
        if let Some(n) = v.get(key).and_then(|f| f.get("n")).and_then(Value::as_u64) {
            return Ok(n as usize);
        }
    }
    let rows = v.pointer("/body/matrix").and_then(Value::as_array).map(Vec::len);
    rows.ok_or_else(|| CliError::Config("case dimension unknown".into()))
}

fn shift_seeds(v: &mut Value, by: u64) {
    match v {
        Value::Object(map) => {
            for (k, x) in map.iter_mut() {
                if k == "seed" {
                    if let Some(s) = x.as_u64() {
                        *x = Value::from(s + by);
                    }
                } else {
                    shift_seeds(x, by);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| shift_seeds(x, by)),
        _ => {}
    }
}

/// Sort key: inequality id, then the canonical JSON of the case.
pub fn descriptor(case: &Case) -> (InequalityId, String) {
    (case.id, serde_json::to_string(case).unwrap_or_default())
}

/// Evaluates every case (in parallel across cases); results keep input order.
pub fn run_cases(cases: &[Case], opts: &Options) -> Vec<Result<DeficitReport, String>> {
    par_tasks(cases.len(), |i| evaluate(&cases[i], opts).map_err(|e| e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worst {
    pub label: Option<String>,
    pub scaled_deficit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub v: u32,
    pub suite: String,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    /// Smallest scaled deficit per inequality id (largest |deficit| for strict checks).
    pub worst: BTreeMap<String, Worst>,
    pub error_messages: Vec<String>,
}

impl Summary {
    pub fn new(suite: &str, results: &[Result<DeficitReport, String>]) -> Self {
        let mut s = Summary {
            v: SCHEMA_VERSION,
            suite: suite.to_string(),
            total: results.len(),
            passed: 0,
            failed: 0,
            errors: 0,
            worst: BTreeMap::new(),
            error_messages: Vec::new(),
        };
        for r in results {
            match r {
                Ok(rep) => {
                    if rep.pass {
                        s.passed += 1;
                    } else {
                        s.failed += 1;
                    }
                    let key = serde_json::to_value(rep.id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                    let badness = |w: f64, strict: bool| if strict { -w.abs() } else { w };
                    let strict = rep.expect == affineineq::inequalities::Expect::Strict;
                    let cand = Worst { label: rep.label.clone(), scaled_deficit: rep.scaled_deficit, pass: rep.pass };
                    let replace = match s.worst.get(&key) {
                        None => true,
                        Some(w) => {
                            (!rep.pass && w.pass)
                                || (rep.pass == w.pass
                                    && badness(rep.scaled_deficit, strict) < badness(w.scaled_deficit, strict))
                        }
                    };
                    if replace {
                        s.worst.insert(key, cand);
                    }
                }
                Err(e) => {
                    s.errors += 1;
                    s.error_messages.push(e.clone());
                }
            }
        }
        s
    }

    pub fn exit_code(&self) -> u8 {
        if self.errors > 0 {
            3
        } else if self.failed > 0 {
            1
        } else {
            0
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "suite {}: {} checks, {} passed, {} failed, {} errors\n",
            self.suite, self.total, self.passed, self.failed, self.errors
        );
        for (id, w) in &self.worst {
            out.push_str(&format!(
                "  {id:<20} worst {:+.3e} {}{}\n",
                w.scaled_deficit,
                if w.pass { "pass" } else { "FAIL" },
                w.label.as_deref().map(|l| format!(" ({l})")).unwrap_or_default()
            ));
        }
        for e in &self.error_messages {
            out.push_str(&format!("  error: {e}\n"));
        }
        out
    }
}

/// JSONL of the successful reports, in case order.
pub fn render_jsonl(results: &[Result<DeficitReport, String>]) -> Result<String, CliError> {
    let reports: Vec<DeficitReport> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    affineineq::inequalities::to_jsonl(&reports).map_err(|e| CliError::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_shifts_every_seed() {
        let cfg = SuiteConfig::parse(
            r#"{"v":1,"name":"t","seed":5,"cases":[
              {"id":"bp-centroid","p":2.0,"label":"r","replicate":3,
               "body":{"kind":"random","n":2,"seed":10,"body":"halfspace"}}]}"#,
        )
        .unwrap();
        let cases = cfg.expand().unwrap();
        let mut seeds: Vec<u64> = cases
            .iter()
            .map(|c| match c.body.as_ref().unwrap() {
                affineineq::bodies::BodySpec::Random { seed, .. } => *seed,
                _ => unreachable!(),
            })
            .collect();
        seeds.sort();
        assert_eq!(seeds, vec![10, 11, 12]);
    }

    #[test]
    fn seed_and_version_are_mandatory() {
        assert!(SuiteConfig::parse(r#"{"v":1,"name":"t","cases":[]}"#).is_err());
        assert!(SuiteConfig::parse(r#"{"v":2,"name":"t","seed":1,"cases":[]}"#).is_err());
        assert!(SuiteConfig::parse(r#"{"v":1,"name":"t","seed":1,"cases":[{"id":"main","matrix":{"kind":"random-sl"}}]}"#)
            .unwrap()
            .expand()
            .is_err());
    }
}
