//! Building cases from command-line flags.

use affineineq::bodies::{BodySpec, RandomKind};
use affineineq::functions::{BumpShape, FamilySpec, MatrixSpec};
use affineineq::inequalities::{Case, Expect, GentilCost, InequalityId};
use affineineq::quadrature::Levels;
use clap::{Args, ValueEnum};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    LogsobExtremal,
    SobolevExtremal,
    GnExtremal,
    GentilExtremal,
    Gaussian,
    Cone,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixKind {
    Identity,
    RandomSl,
    RandomGl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BodyKind {
    Ball,
    Cube,
    CrossPolytope,
    Ellipsoid,
    Halfspace,
    Hull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Ball,
    Cube,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    /// Cost built from the same matrix as the function.
    Matched,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpectKind {
    Holds,
    ExpectStrict,
    Positive,
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Linear part of the affine map applied to the family.
    #[arg(long = "A", value_enum, default_value = "identity")]
    pub a: MatrixKind,
    /// A = diag(√t, 1, …, 1, 1/√t) ∈ SL_n; overrides --A.
    #[arg(long)]
    pub anisotropy: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "b")]
    pub b: Option<f64>,
    #[arg(long, value_enum, default_value = "cube")]
    pub shape: Shape,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub smoothness: Option<u32>,
    #[arg(long, value_enum)]
    pub body: Option<BodyKind>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum, default_value = "matched")]
    pub cost: CostKind,
    /// Use ‖∇f‖_∞ instead of E_∞ in the L∞ log-Sobolev check.
    #[arg(long)]
    pub euclid: bool,
    /// Quadrature levels as sphere,space-angular,radial.
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum, default_value = "holds")]
    pub expect: ExpectKind,
}

fn seed_of(args: &CaseArgs, what: &str) -> Result<u64, CliError> {
    args.seed
        .ok_or_else(|| CliError::Config(format!("{what} is randomized and needs --seed")))
}

pub fn parse_levels(s: &str) -> Result<Levels, CliError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("levels {s:?}: {e}")))?;
    match parts[..] {
        [sphere, space_angular, radial] => Ok(Levels { sphere, space_angular, radial }),
        _ => Err(CliError::Config(format!("levels {s:?}: expected sphere,space-angular,radial"))),
    }
}

pub fn matrix(args: &CaseArgs) -> Result<MatrixSpec, CliError> {
    if let Some(t) = args.anisotropy {
        if !(t > 0.0) {
            return Err(CliError::Config("anisotropy must be positive".into()));
        }
        let mut diag = vec![1.0; args.n];
        diag[0] = t.sqrt();
        if args.n > 1 {
            diag[args.n - 1] = 1.0 / t.sqrt();
        }
        return Ok(MatrixSpec::Diag { diag });
    }
    let spread = args.spread.unwrap_or(0.5);
    Ok(match args.a {
        MatrixKind::Identity => MatrixSpec::Identity,
        MatrixKind::RandomSl => MatrixSpec::RandomSl { seed: seed_of(args, "--A random-sl")?, spread },
        MatrixKind::RandomGl => MatrixSpec::RandomGl { seed: seed_of(args, "--A random-gl")?, spread },
    })
}

fn default_p(id: InequalityId, n: usize) -> f64 {
    match id {
        InequalityId::AffineSobolev | InequalityId::AffineGn | InequalityId::GnSobolevLimit if n <= 2 => 1.5,
        _ => 2.0,
    }
}

pub fn family(args: &CaseArgs, id: InequalityId, family: Family) -> Result<FamilySpec, CliError> {
    let n = args.n;
    let p = args.p.unwrap_or_else(|| default_p(id, n));
    let m = matrix(args)?;
    Ok(match family {
        Family::LogsobExtremal => {
            FamilySpec::LogsobExtremal { n, p, sigma: args.sigma.unwrap_or(1.0), x0: None, matrix: m }
        }
        Family::SobolevExtremal => {
            FamilySpec::SobolevExtremal { n, p, a: 1.0, b: args.b.unwrap_or(1.0), x0: None, matrix: m }
        }
        Family::GnExtremal => FamilySpec::GnExtremal {
            n,
            p,
            alpha: args.alpha.ok_or_else(|| CliError::Config("gn-extremal needs --alpha".into()))?,
            a: 1.0,
            b: args.b.unwrap_or(1.0),
            x0: None,
            matrix: m,
        },
        Family::GentilExtremal => {
            FamilySpec::GentilExtremal { n, p, a: None, b: args.b.unwrap_or(1.0), matrix: m, xbar: None, q: None }
        }
        Family::Gaussian => FamilySpec::Gaussian { n, p, x0: None, matrix: m },
        Family::Cone => FamilySpec::Cone {
            n,
            c: None,
            b: args.b.unwrap_or(1.0),
            a_vec: None,
            matrix: m,
            beta: args.beta.unwrap_or(1.0),
        },
        Family::Bump => FamilySpec::Bump {
            n,
            p,
            radius: args.radius.unwrap_or(1.0),
            smoothness: args.smoothness.unwrap_or(3),
            shape: match args.shape {
                Shape::Ball => BumpShape::Ball,
                Shape::Cube => BumpShape::Cube,
            },
            x0: None,
            matrix: m,
        },
    })
}

pub fn body(args: &CaseArgs, kind: BodyKind) -> Result<BodySpec, CliError> {
    let n = args.n;
    let random = |body: RandomKind| -> Result<BodySpec, CliError> {
        Ok(BodySpec::Random { n, seed: seed_of(args, "random body")?, body, count: args.count.unwrap_or(8) })
    };
    match kind {
        BodyKind::Ball => Ok(BodySpec::Ball { n, radius: args.radius.unwrap_or(1.0) }),
        BodyKind::Cube => Ok(BodySpec::Cube { n, half_width: args.radius.unwrap_or(1.0) }),
        BodyKind::CrossPolytope => Ok(BodySpec::CrossPolytope { n }),
        BodyKind::Ellipsoid => random(RandomKind::Ellipsoid),
        BodyKind::Halfspace => random(RandomKind::Halfspace),
        BodyKind::Hull => random(RandomKind::Hull),
    }
}

fn default_family(id: InequalityId) -> Option<Family> {
    use InequalityId::*;
    match id {
        EuclidLogSobolev | AffineLogSobolev | ExpIntegral => Some(Family::LogsobExtremal),
        Gentil => Some(Family::GentilExtremal),
        AffineSobolev | GnSobolevLimit => Some(Family::SobolevExtremal),
        AffineGn => Some(Family::GnExtremal),
        LinfLogSobolev => Some(Family::Cone),
        Main | GradientIntegral | CstarCentroid | RouteAgreement | SlInvariance | EnergyBound => Some(Family::Bump),
        _ => None,
    }
}

fn needs_function(id: InequalityId) -> bool {
    default_family(id).is_some()
}

pub fn case(id: InequalityId, args: &CaseArgs) -> Result<Case, CliError> {
    let mut case = Case::new(id);
    if needs_function(id) {
        let fam = args.family.or_else(|| default_family(id)).expect("has default");
        let spec = family(args, id, fam)?;
        if id == InequalityId::Gentil {
            let m = match args.cost {
                CostKind::Matched => match &spec {
                    FamilySpec::GentilExtremal { matrix, .. } => matrix.clone(),
                    _ => MatrixSpec::Identity,
                },
                CostKind::Identity => MatrixSpec::Identity,
            };
            case.cost = Some(GentilCost { matrix: m, q: None });
        }
        if id == InequalityId::SlInvariance {
            case.matrix = Some(MatrixSpec::RandomSl {
                seed: seed_of(args, "sl-invariance")?,
                spread: args.spread.unwrap_or(0.5),
            });
        }
        case.function = Some(spec);
        case.p = args.p;
    } else if id == InequalityId::BpCentroid {
        let kind = args.body.ok_or_else(|| CliError::Config("bp-centroid needs --body".into()))?;
        case.body = Some(body(args, kind)?);
        case.p = Some(args.p.unwrap_or(2.0));
    } else {
        case.n = Some(args.n);
        case.p = Some(args.p.unwrap_or(2.0));
        if id == InequalityId::SphereMoment {
            case.seed = Some(args.seed.unwrap_or(0));
        }
    }
    case.alpha = args.alpha;
    case.beta = args.beta.filter(|_| id == InequalityId::LinfLogSobolev);
    if id == InequalityId::LinfLogSobolev {
        case.affine = Some(!args.euclid);
    }
    if let Some(l) = &args.levels {
        case.levels = Some(parse_levels(l)?);
    }
    case.tolerance = args.tolerance;
    case.expect = match args.expect {
        ExpectKind::Holds => Expect::Holds,
        ExpectKind::ExpectStrict => Expect::Strict,
        ExpectKind::Positive => Expect::Positive,
    };
    Ok(case)
}
