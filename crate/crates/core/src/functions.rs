//! Closed-form test functions: the extremal families, cones, bumps and
//! lattice-sampled data, with analytic gradients, norms and entropies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::{matrix_from_rows, matrix_to_rows, random_orthogonal, random_sl};
use crate::constants::{ball_volume, beta, conjugate_exponent, gamma, ln_gamma};
use crate::error::{Error, Result};
use crate::parallel::try_par_map;
use crate::quadrature::{
    abs_pow, dot, space_rule_for, CompensatedSum, Decay, DecayProfile, Levels, SpaceRule, SphericalRule,
};

/// Tail tolerance used for truncated space rules.
pub const SPACE_TOL: f64 = 1e-10;

/// A matrix in a family spec: explicit rows or a seeded random draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MatrixSpec {
    #[default]
    Identity,
    Rows {
        rows: Vec<Vec<f64>>,
    },
    Diag {
        diag: Vec<f64>,
    },
    /// Random element of SL_n.
    RandomSl {
        seed: u64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    /// Random element of GL_n (determinant not normalized).
    RandomGl {
        seed: u64,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_spread() -> f64 {
    0.5
}

impl MatrixSpec {
    pub fn build(&self, n: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            MatrixSpec::Identity => DMatrix::identity(n, n),
            MatrixSpec::Rows { rows } => matrix_from_rows(rows)?,
            MatrixSpec::Diag { diag } => DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            MatrixSpec::RandomSl { seed, spread } => random_sl(&mut ChaCha8Rng::seed_from_u64(*seed), n, *spread),
            MatrixSpec::RandomGl { seed, spread } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let q = random_orthogonal(&mut rng, n);
                let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-*spread..=*spread).exp()).collect();
                q * DMatrix::from_diagonal(&DVector::from_vec(d)) * random_orthogonal(&mut rng, n)
            }
        };
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidParameter(format!("matrix must be {n}x{n}")));
        }
        let det = m.determinant();
        if !(det.abs() > 1e-12) || !det.is_finite() {
            return Err(Error::InvalidParameter("matrix must be invertible".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    #[default]
    Ball,
    Cube,
}

/// Regular lattice: node k has coordinates origin + k ⊙ spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

fn default_smoothness() -> u32 {
    3
}

/// Parameters of a test function; this is also its JSON descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    /// ± c e^{-|A(x-x0)|^{p'}/σ}, amplitude normalized in L^p.
    LogsobExtremal {
        n: usize,
        p: f64,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
    },
    /// a (1 + b|A(x-x0)|^{p'})^{-(n-p)/p}.
    SobolevExtremal {
        n: usize,
        p: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
    },
    /// a (1 + b|A(x-x0)|^{p'})^{-(p-1)/(m-p)}, m = α(p-1)+1.
    GnExtremal {
        n: usize,
        p: f64,
        alpha: f64,
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
    },
    /// a e^{-b C(x - x̄)} with C(x) = |Mx|^q/q; a defaults to the L^p normalizer.
    GentilExtremal {
        n: usize,
        p: f64,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        matrix: MatrixSpec,
        #[serde(default)]
        xbar: Option<Vec<f64>>,
        #[serde(default)]
        q: Option<f64>,
    },
    /// e^{-|A(x-x0)|^2/2}, normalized in L^p; the Gaussian member of the Gentil family.
    Gaussian {
        n: usize,
        p: f64,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
    },
    /// c - b|Ax - a_vec|; c defaults to the value making ∫e^{βf} = 1.
    Cone {
        n: usize,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default = "one")]
        b: f64,
        #[serde(default)]
        a_vec: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
        #[serde(default = "one")]
        beta: f64,
    },
    /// (1 - |A(x-x0)/R|^2)^k on a ball, or a tensor product of such factors on a cube.
    Bump {
        n: usize,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "default_smoothness")]
        smoothness: u32,
        #[serde(default)]
        shape: BumpShape,
        #[serde(default)]
        x0: Option<Vec<f64>>,
        #[serde(default)]
        matrix: MatrixSpec,
    },
    /// Multilinear interpolation of lattice values; zero outside the lattice.
    GridSampled {
        n: usize,
        #[serde(default = "default_p")]
        p: f64,
        lattice: Lattice,
        values: Vec<f64>,
    },
}

fn default_p() -> f64 {
    2.0
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::LogsobExtremal { .. } => "logsob-extremal",
            FamilySpec::SobolevExtremal { .. } => "sobolev-extremal",
            FamilySpec::GnExtremal { .. } => "gn-extremal",
            FamilySpec::GentilExtremal { .. } => "gentil-extremal",
            FamilySpec::Gaussian { .. } => "gaussian",
            FamilySpec::Cone { .. } => "cone",
            FamilySpec::Bump { .. } => "bump",
            FamilySpec::GridSampled { .. } => "grid-sampled",
        }
    }
}

/// Radial profile φ of f(x) = amp·φ(|A(x - x0)|).
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// e^{-rate s^power}
    StretchedExp { rate: f64, power: f64 },
    /// (1 + b s^power)^{-exponent}
    PowerLaw { b: f64, power: f64, exponent: f64 },
    /// c - b s (amp = 1)
    Cone { c: f64, b: f64 },
    /// (1 - (s/R)^2)^k for s < R
    Bump { radius: f64, k: u32 },
}

impl Profile {
    fn value(&self, s: f64) -> f64 {
        match *self {
            Profile::StretchedExp { rate, power } => (-rate * s.powf(power)).exp(),
            Profile::PowerLaw { b, power, exponent } => (1.0 + b * s.powf(power)).powf(-exponent),
            Profile::Cone { c, b } => c - b * s,
            Profile::Bump { radius, k } => {
                let t = s / radius;
                if t < 1.0 {
                    (1.0 - t * t).powi(k as i32)
                } else {
                    0.0
                }
            }
        }
    }

    fn ln_abs(&self, s: f64) -> f64 {
        match *self {
            Profile::StretchedExp { rate, power } => -rate * s.powf(power),
            Profile::PowerLaw { b, power, exponent } => -exponent * (b * s.powf(power)).ln_1p(),
            _ => self.value(s).abs().ln(),
        }
    }

    /// φ'(s)/s, finite at s = 0 for the smooth profiles.
    fn slope_over_s(&self, s: f64) -> f64 {
        match *self {
            Profile::StretchedExp { rate, power } => {
                if s == 0.0 {
                    if power > 2.0 {
                        0.0
                    } else if power == 2.0 {
                        -2.0 * rate
                    } else {
                        0.0
                    }
                } else {
                    -rate * power * s.powf(power - 2.0) * (-rate * s.powf(power)).exp()
                }
            }
            Profile::PowerLaw { b, power, exponent } => {
                if s == 0.0 {
                    if power == 2.0 {
                        -2.0 * exponent * b
                    } else {
                        0.0
                    }
                } else {
                    -exponent * b * power * s.powf(power - 2.0) * (1.0 + b * s.powf(power)).powf(-exponent - 1.0)
                }
            }
            Profile::Cone { b, .. } => {
                if s == 0.0 {
                    0.0
                } else {
                    -b / s
                }
            }
            Profile::Bump { radius, k } => {
                let t = s / radius;
                if t < 1.0 {
                    -2.0 * k as f64 / (radius * radius) * (1.0 - t * t).powi(k as i32 - 1)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Radial { amp: f64, center: Vec<f64>, frame: DMatrix<f64>, profile: Profile },
    CubeBump { amp: f64, center: Vec<f64>, frame: DMatrix<f64>, radius: f64, k: u32 },
    Grid { lattice: Lattice, values: Vec<f64> },
}

/// A closed-form function on R^n with exponent context p.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub p: f64,
    family: &'static str,
    shape: Shape,
    /// Parameters that are not recoverable from the shape (σ, α, β, ...).
    extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Extra {
    sigma: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    gentil_b: Option<f64>,
    q: Option<f64>,
}

fn vec_or_zero(v: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    match v {
        None => Ok(vec![0.0; n]),
        Some(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
        Some(_) => Err(Error::InvalidParameter(format!("center must be a finite vector of length {n}"))),
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=5).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent p must be a finite real > 1, got {p}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// ∫_{R^n} e^{-λ|y|^s} dy = ω_n Γ(n/s + 1) λ^{-n/s}.
fn stretched_exp_integral(n: usize, lambda: f64, s: f64) -> Result<f64> {
    let nf = n as f64;
    Ok(ball_volume(nf)? * gamma(nf / s + 1.0)? * lambda.powf(-nf / s))
}

/// c_σ exactly as displayed: σ^{-n(p-1)/p} (∫ e^{-|x|^{p²/(p-1)}} dx)^{-1/p}.
pub fn c_sigma(n: usize, p: f64, sigma: f64) -> Result<f64> {
    check_p(p)?;
    check_positive("sigma", sigma)?;
    let nf = n as f64;
    let integral = stretched_exp_integral(n, 1.0, p * p / (p - 1.0))?;
    Ok(sigma.powf(-nf * (p - 1.0) / p) * integral.powf(-1.0 / p))
}

/// Amplitude c with ∫|c e^{-|A y|^{p'}/σ}|^p dy = 1.
pub fn logsob_amplitude(n: usize, p: f64, sigma: f64, det: f64) -> Result<f64> {
    let q = conjugate_exponent(p);
    Ok((det.abs() / stretched_exp_integral(n, p / sigma, q)?).powf(1.0 / p))
}

/// The value of c making ∫e^{β(c - b|Ax - a|)} dx = 1.
pub fn cone_normalizing_c(n: usize, beta_: f64, b: f64, det: f64) -> Result<f64> {
    let nf = n as f64;
    let mass = gamma(nf + 1.0)? * ball_volume(nf)? / ((beta_ * b).powf(nf) * det.abs());
    Ok(-mass.ln() / beta_)
}

pub fn make(spec: &FamilySpec) -> Result<TestFunction> {
    match spec {
        FamilySpec::LogsobExtremal { n, p, sigma, x0, matrix } => {
            check_n(*n)?;
            check_p(*p)?;
            check_positive("sigma", *sigma)?;
            let a = matrix.build(*n)?;
            let amp = logsob_amplitude(*n, *p, *sigma, a.determinant())?;
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "logsob-extremal",
                shape: Shape::Radial {
                    amp,
                    center: vec_or_zero(x0, *n)?,
                    frame: a,
                    profile: Profile::StretchedExp { rate: 1.0 / sigma, power: conjugate_exponent(*p) },
                },
                extra: Extra { sigma: Some(*sigma), ..Default::default() },
            })
        }
        FamilySpec::SobolevExtremal { n, p, a, b, x0, matrix } => {
            check_n(*n)?;
            check_p(*p)?;
            check_positive("b", *b)?;
            let nf = *n as f64;
            if !(*p < nf) {
                return Err(Error::InvalidParameter(format!("Sobolev extremal needs p < n, got p={p}, n={n}")));
            }
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "sobolev-extremal",
                shape: Shape::Radial {
                    amp: *a,
                    center: vec_or_zero(x0, *n)?,
                    frame: matrix.build(*n)?,
                    profile: Profile::PowerLaw { b: *b, power: conjugate_exponent(*p), exponent: (nf - p) / p },
                },
                extra: Extra::default(),
            })
        }
        FamilySpec::GnExtremal { n, p, alpha, a, b, x0, matrix } => {
            check_n(*n)?;
            check_p(*p)?;
            check_positive("b", *b)?;
            let m = alpha * (p - 1.0) + 1.0;
            if !(m - p > 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidParameter(format!("GN extremal needs m - p = (α-1)(p-1) > 0, got α={alpha}")));
            }
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "gn-extremal",
                shape: Shape::Radial {
                    amp: *a,
                    center: vec_or_zero(x0, *n)?,
                    frame: matrix.build(*n)?,
                    profile: Profile::PowerLaw { b: *b, power: conjugate_exponent(*p), exponent: (p - 1.0) / (m - p) },
                },
                extra: Extra { alpha: Some(*alpha), ..Default::default() },
            })
        }
        FamilySpec::GentilExtremal { n, p, a, b, matrix, xbar, q } => {
            check_n(*n)?;
            check_p(*p)?;
            check_positive("b", *b)?;
            let q = q.unwrap_or(conjugate_exponent(*p));
            if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("q = {q} is not conjugate to p = {p}")));
            }
            let m = matrix.build(*n)?;
            let amp = match a {
                Some(a) => *a,
                None => (m.determinant().abs() / stretched_exp_integral(*n, p * b / q, q)?).powf(1.0 / p),
            };
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "gentil-extremal",
                shape: Shape::Radial {
                    amp,
                    center: vec_or_zero(xbar, *n)?,
                    frame: m,
                    profile: Profile::StretchedExp { rate: b / q, power: q },
                },
                extra: Extra { gentil_b: Some(*b), q: Some(q), ..Default::default() },
            })
        }
        FamilySpec::Gaussian { n, p, x0, matrix } => {
            check_n(*n)?;
            check_p(*p)?;
            let a = matrix.build(*n)?;
            let amp = (a.determinant().abs() / stretched_exp_integral(*n, p / 2.0, 2.0)?).powf(1.0 / p);
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "gaussian",
                shape: Shape::Radial {
                    amp,
                    center: vec_or_zero(x0, *n)?,
                    frame: a,
                    profile: Profile::StretchedExp { rate: 0.5, power: 2.0 },
                },
                extra: Extra::default(),
            })
        }
        FamilySpec::Cone { n, c, b, a_vec, matrix, beta } => {
            check_n(*n)?;
            check_positive("b", *b)?;
            check_positive("beta", *beta)?;
            let a = matrix.build(*n)?;
            let c = match c {
                Some(c) => *c,
                None => cone_normalizing_c(*n, *beta, *b, a.determinant())?,
            };
            // c - b|Ax - a_vec| = c - b|A(x - A^{-1}a_vec)|
            let shift = vec_or_zero(a_vec, *n)?;
            let ainv = a.clone().try_inverse().ok_or_else(|| Error::InvalidParameter("singular matrix".into()))?;
            let center: Vec<f64> = (ainv * DVector::from_vec(shift)).iter().copied().collect();
            Ok(TestFunction {
                dim: *n,
                p: f64::INFINITY,
                family: "cone",
                shape: Shape::Radial { amp: 1.0, center, frame: a, profile: Profile::Cone { c, b: *b } },
                extra: Extra { beta: Some(*beta), ..Default::default() },
            })
        }
        FamilySpec::Bump { n, p, radius, smoothness, shape, x0, matrix } => {
            check_n(*n)?;
            check_positive("radius", *radius)?;
            if *smoothness < 2 {
                return Err(Error::InvalidParameter("bump smoothness must be at least 2".into()));
            }
            let a = matrix.build(*n)?;
            let center = vec_or_zero(x0, *n)?;
            let shape = match shape {
                BumpShape::Ball => Shape::Radial {
                    amp: 1.0,
                    center,
                    frame: a,
                    profile: Profile::Bump { radius: *radius, k: *smoothness },
                },
                BumpShape::Cube => Shape::CubeBump { amp: 1.0, center, frame: a, radius: *radius, k: *smoothness },
            };
            Ok(TestFunction { dim: *n, p: *p, family: "bump", shape, extra: Extra::default() })
        }
        FamilySpec::GridSampled { n, p, lattice, values } => {
            check_n(*n)?;
            if lattice.origin.len() != *n || lattice.spacing.len() != *n || lattice.counts.len() != *n {
                return Err(Error::InvalidParameter("lattice dimension mismatch".into()));
            }
            if lattice.counts.iter().any(|&c| c < 2) || lattice.spacing.iter().any(|&h| !(h > 0.0)) {
                return Err(Error::InvalidParameter("lattice needs >= 2 nodes and positive spacing per axis".into()));
            }
            let total: usize = lattice.counts.iter().product();
            if values.len() != total {
                return Err(Error::InvalidParameter(format!("expected {total} lattice values, got {}", values.len())));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
            Ok(TestFunction {
                dim: *n,
                p: *p,
                family: "grid-sampled",
                shape: Shape::Grid { lattice: lattice.clone(), values: values.clone() },
                extra: Extra::default(),
            })
        }
    }
}

fn apply(frame: &DMatrix<f64>, center: &[f64], x: &[f64], y: &mut [f64]) {
    let n = center.len();
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += frame[(i, j)] * (x[j] - center[j]);
        }
        y[i] = s;
    }
}

impl TestFunction {
    pub fn family(&self) -> &'static str {
        self.family
    }

    pub fn profile(&self) -> Option<&Profile> {
        match &self.shape {
            Shape::Radial { profile, .. } => Some(profile),
            _ => None,
        }
    }

    /// The matrix A of f(x) = amp·φ(|A(x - x0)|), when there is one.
    pub fn frame(&self) -> Option<&DMatrix<f64>> {
        match &self.shape {
            Shape::Radial { frame, .. } | Shape::CubeBump { frame, .. } => Some(frame),
            Shape::Grid { .. } => None,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match &self.shape {
            Shape::Radial { amp, .. } | Shape::CubeBump { amp, .. } => *amp,
            Shape::Grid { .. } => 1.0,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        self.extra.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.extra.beta
    }

    pub fn is_radially_symmetric(&self) -> bool {
        match &self.shape {
            Shape::Radial { frame, .. } => {
                let g = frame.transpose() * frame;
                let s = g[(0, 0)];
                (0..self.dim).all(|i| (0..self.dim).all(|j| (g[(i, j)] - if i == j { s } else { 0.0 }).abs() <= 1e-14 * s))
            }
            _ => false,
        }
    }

    /// Lipschitz families admit p = ∞ directional norms.
    pub fn is_lipschitz(&self) -> bool {
        matches!(&self.shape, Shape::Radial { profile: Profile::Cone { .. } | Profile::Bump { .. }, .. } | Shape::CubeBump { .. })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        match &self.shape {
            Shape::Radial { amp, center, frame, profile } => {
                let mut y = [0.0; 8];
                apply(frame, center, x, &mut y[..n]);
                amp * profile.value(y[..n].iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            Shape::CubeBump { amp, center, frame, radius, k } => {
                let mut y = [0.0; 8];
                apply(frame, center, x, &mut y[..n]);
                let mut v = *amp;
                for &yi in &y[..n] {
                    let t = yi / radius;
                    if t.abs() >= 1.0 {
                        return 0.0;
                    }
                    v *= (1.0 - t * t).powi(*k as i32);
                }
                v
            }
            Shape::Grid { lattice, values } => grid_eval(lattice, values, x, None),
        }
    }

    /// log|f(x)|, evaluated without underflow for the exponential families.
    pub fn ln_abs(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        match &self.shape {
            Shape::Radial { amp, center, frame, profile } => {
                let mut y = [0.0; 8];
                apply(frame, center, x, &mut y[..n]);
                amp.abs().ln() + profile.ln_abs(y[..n].iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            _ => self.value(x).abs().ln(),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        match &self.shape {
            Shape::Radial { amp, center, frame, profile } => {
                let mut y = [0.0; 8];
                apply(frame, center, x, &mut y[..n]);
                let s = y[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let k = amp * profile.slope_over_s(s);
                for j in 0..n {
                    let mut g = 0.0;
                    for i in 0..n {
                        g += frame[(i, j)] * y[i];
                    }
                    out[j] = k * g;
                }
            }
            Shape::CubeBump { amp, center, frame, radius, k } => {
                let mut y = [0.0; 8];
                apply(frame, center, x, &mut y[..n]);
                let mut fac = [0.0; 8];
                let mut dfac = [0.0; 8];
                for i in 0..n {
                    let t = y[i] / radius;
                    if t.abs() >= 1.0 {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        return;
                    }
                    fac[i] = (1.0 - t * t).powi(*k as i32);
                    dfac[i] = -2.0 * *k as f64 * t / radius * (1.0 - t * t).powi(*k as i32 - 1);
                }
                let mut gy = [0.0; 8];
                for i in 0..n {
                    let mut v = *amp * dfac[i];
                    for j in 0..n {
                        if j != i {
                            v *= fac[j];
                        }
                    }
                    gy[i] = v;
                }
                for j in 0..n {
                    out[j] = (0..n).map(|i| frame[(i, j)] * gy[i]).sum();
                }
            }
            Shape::Grid { lattice, values } => {
                grid_eval(lattice, values, x, Some(out));
            }
        }
    }

    pub fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient(x, &mut g);
        g
    }

    /// Where the function lives, for building space rules.
    pub fn decay_profile(&self) -> DecayProfile {
        let n = self.dim;
        match &self.shape {
            Shape::Radial { amp, center, frame, profile } => {
                let decay = match *profile {
                    Profile::StretchedExp { rate, power } => Decay::StretchedExp { rate, power },
                    Profile::PowerLaw { b, power, exponent } => {
                        Decay::Algebraic { exponent: exponent * power, scale: b.powf(-1.0 / power) }
                    }
                    Profile::Cone { .. } => Decay::AnalyticOnly,
                    Profile::Bump { radius, .. } => Decay::Compact { radius },
                };
                DecayProfile { dim: n, center: center.clone(), frame: frame.clone(), amplitude: amp.abs(), decay }
            }
            Shape::CubeBump { amp, center, frame, radius, .. } => DecayProfile {
                dim: n,
                center: center.clone(),
                frame: frame.clone(),
                amplitude: amp.abs(),
                decay: Decay::CompactBox { half_width: *radius },
            },
            Shape::Grid { lattice, .. } => {
                let half: Vec<f64> = (0..n).map(|i| 0.5 * lattice.spacing[i] * (lattice.counts[i] - 1) as f64).collect();
                let center = (0..n).map(|i| lattice.origin[i] + half[i]).collect();
                let frame = DMatrix::from_diagonal(&DVector::from_iterator(n, half.iter().map(|h| 1.0 / h)));
                DecayProfile { dim: n, center, frame, amplitude: 1.0, decay: Decay::CompactBox { half_width: 1.0 } }
            }
        }
    }

    pub fn space_rule(&self, levels: &Levels) -> Result<SpaceRule> {
        let p = if self.p.is_finite() { self.p } else { 2.0 };
        space_rule_for(&self.decay_profile(), SPACE_TOL, p, levels)
    }

    /// t·f.
    pub fn scaled(&self, t: f64) -> Result<TestFunction> {
        if !t.is_finite() || t == 0.0 {
            return Err(Error::InvalidParameter(format!("scale factor must be finite and non-zero, got {t}")));
        }
        let mut g = self.clone();
        match &mut g.shape {
            Shape::Radial { amp, profile, .. } => match profile {
                Profile::Cone { c, b } => {
                    *c *= t;
                    *b *= t;
                }
                _ => *amp *= t,
            },
            Shape::CubeBump { amp, .. } => *amp *= t,
            Shape::Grid { values, .. } => values.iter_mut().for_each(|v| *v *= t),
        }
        Ok(g)
    }

    /// x ↦ f(Mx + v).
    pub fn compose_affine(&self, m: &DMatrix<f64>, v: &[f64]) -> Result<TestFunction> {
        let n = self.dim;
        if m.nrows() != n || m.ncols() != n || v.len() != n {
            return Err(Error::InvalidParameter("affine map dimension mismatch".into()));
        }
        let minv = m.clone().try_inverse().ok_or_else(|| Error::InvalidParameter("singular matrix".into()))?;
        let mut g = self.clone();
        match &mut g.shape {
            Shape::Radial { center, frame, .. } | Shape::CubeBump { center, frame, .. } => {
                // A(Mx + v - c) = (AM)(x - M^{-1}(c - v))
                let shifted: Vec<f64> = center.iter().zip(v).map(|(c, v)| c - v).collect();
                *center = (&minv * DVector::from_vec(shifted)).iter().copied().collect();
                *frame = &*frame * m;
            }
            Shape::Grid { .. } => {
                return Err(Error::Unsupported("affine images of lattice-sampled data".into()));
            }
        }
        Ok(g)
    }

    /// x ↦ f(λx).
    pub fn dilated(&self, lambda: f64) -> Result<TestFunction> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("dilation must be positive, got {lambda}")));
        }
        self.compose_affine(&(DMatrix::identity(self.dim, self.dim) * lambda), &vec![0.0; self.dim])
    }

    /// Descriptor reproducing this function.
    pub fn to_spec(&self) -> FamilySpec {
        let n = self.dim;
        let p = self.p;
        let rows = |m: &DMatrix<f64>| MatrixSpec::Rows { rows: matrix_to_rows(m) };
        let opt = |c: &Vec<f64>| if c.iter().all(|v| *v == 0.0) { None } else { Some(c.clone()) };
        match &self.shape {
            Shape::Radial { amp, center, frame, profile } => match (self.family, profile) {
                ("logsob-extremal", _) => FamilySpec::LogsobExtremal {
                    n,
                    p,
                    sigma: self.extra.sigma.unwrap_or(1.0),
                    x0: opt(center),
                    matrix: rows(frame),
                },
                ("sobolev-extremal", Profile::PowerLaw { b, .. }) => {
                    FamilySpec::SobolevExtremal { n, p, a: *amp, b: *b, x0: opt(center), matrix: rows(frame) }
                }
                ("gn-extremal", Profile::PowerLaw { b, .. }) => FamilySpec::GnExtremal {
                    n,
                    p,
                    alpha: self.extra.alpha.unwrap_or(f64::NAN),
                    a: *amp,
                    b: *b,
                    x0: opt(center),
                    matrix: rows(frame),
                },
                ("gentil-extremal", _) => FamilySpec::GentilExtremal {
                    n,
                    p,
                    a: Some(*amp),
                    b: self.extra.gentil_b.unwrap_or(1.0),
                    matrix: rows(frame),
                    xbar: opt(center),
                    q: self.extra.q,
                },
                ("gaussian", _) => FamilySpec::Gaussian { n, p, x0: opt(center), matrix: rows(frame) },
                (_, Profile::Cone { c, b }) => {
                    let a_vec: Vec<f64> = (frame * DVector::from_column_slice(center)).iter().copied().collect();
                    FamilySpec::Cone {
                        n,
                        c: Some(*c),
                        b: *b,
                        a_vec: opt(&a_vec),
                        matrix: rows(frame),
                        beta: self.extra.beta.unwrap_or(1.0),
                    }
                }
                (_, Profile::Bump { radius, k }) => FamilySpec::Bump {
                    n,
                    p,
                    radius: *radius,
                    smoothness: *k,
                    shape: BumpShape::Ball,
                    x0: opt(center),
                    matrix: rows(frame),
                },
                _ => unreachable!("family and profile always agree"),
            },
            Shape::CubeBump { center, frame, radius, k, .. } => FamilySpec::Bump {
                n,
                p,
                radius: *radius,
                smoothness: *k,
                shape: BumpShape::Cube,
                x0: opt(center),
                matrix: rows(frame),
            },
            Shape::Grid { lattice, values } => {
                FamilySpec::GridSampled { n, p, lattice: lattice.clone(), values: values.clone() }
            }
        }
    }

    /// K with ‖∇_ξ f‖_p = K·|Aξ| for f = amp·φ(|A(x - x0)|), p in (1, ∞].
    pub fn directional_factor(&self, p: f64) -> Option<f64> {
        let Shape::Radial { amp, frame, profile, .. } = &self.shape else {
            return None;
        };
        let n = self.dim;
        let nf = n as f64;
        if p.is_infinite() {
            let sup = match *profile {
                Profile::Cone { b, .. } => b,
                Profile::Bump { radius, k } => {
                    let t = (1.0 / (2.0 * k as f64 - 1.0)).sqrt();
                    2.0 * k as f64 / radius * t * (1.0 - t * t).powi(k as i32 - 1)
                }
                _ => return None,
            };
            return Some(amp.abs() * sup);
        }
        // ∫_0^∞ |φ'(s)|^p s^{n-1} ds
        let radial = match *profile {
            Profile::StretchedExp { rate, power } => {
                let a = p * (power - 1.0) + nf - 1.0;
                let e = (a + 1.0) / power;
                (rate * power).powf(p) * gamma(e).ok()? / (power * (p * rate).powf(e))
            }
            Profile::PowerLaw { b, power, exponent } => {
                let a = p * (power - 1.0) + nf - 1.0;
                let e = (a + 1.0) / power;
                let m = p * (exponent + 1.0);
                if !(m > e) {
                    return None;
                }
                (exponent * b * power).powf(p) * b.powf(-e) / power * beta(e, m - e).ok()?
            }
            Profile::Bump { radius, k } => {
                (2.0 * k as f64 / radius).powf(p)
                    * radius.powf(nf)
                    * 0.5
                    * beta((p + nf) / 2.0, p * (k as f64 - 1.0) + 1.0).ok()?
            }
            Profile::Cone { .. } => return None,
        };
        // ∫_{S^{n-1}} |u_1|^p du
        let moment = 2.0 * std::f64::consts::PI.powf((nf - 1.0) / 2.0) * gamma((p + 1.0) / 2.0).ok()?
            / gamma((nf + p) / 2.0).ok()?;
        Some((amp.abs().powf(p) * radial * moment / frame.determinant().abs()).powf(1.0 / p))
    }

    /// Closed form of ∫|f|^r when the family admits one.
    pub fn lp_norm_closed(&self, r: f64) -> Option<f64> {
        let n = self.dim;
        let nf = n as f64;
        match &self.shape {
            Shape::Radial { amp, frame, profile, .. } => {
                let det = frame.determinant().abs();
                let base = match *profile {
                    Profile::StretchedExp { rate, power } => stretched_exp_integral(n, r * rate, power).ok()?,
                    Profile::PowerLaw { b, power, exponent } => {
                        let e = exponent * r;
                        if !(e > nf / power) {
                            return None;
                        }
                        nf * ball_volume(nf).ok()? / power * b.powf(-nf / power) * beta(nf / power, e - nf / power).ok()?
                    }
                    Profile::Bump { radius, k } => {
                        nf * ball_volume(nf).ok()? * radius.powf(nf) * 0.5 * beta(nf / 2.0, k as f64 * r + 1.0).ok()?
                    }
                    Profile::Cone { .. } => return None,
                };
                Some((amp.abs().powf(r) * base / det).powf(1.0 / r))
            }
            Shape::CubeBump { amp, frame, radius, k, .. } => {
                let det = frame.determinant().abs();
                let one = radius * beta(0.5, *k as f64 * r + 1.0).ok()?;
                Some((amp.abs().powf(r) * one.powi(n as i32) / det).powf(1.0 / r))
            }
            Shape::Grid { .. } => None,
        }
    }
}

fn grid_eval(lattice: &Lattice, values: &[f64], x: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = x.len();
    let mut base = [0usize; 8];
    let mut frac = [0.0; 8];
    for d in 0..n {
        let t = (x[d] - lattice.origin[d]) / lattice.spacing[d];
        let max = (lattice.counts[d] - 1) as f64;
        if !(0.0..=max).contains(&t) {
            if let Some(g) = grad {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            return 0.0;
        }
        let i = (t.floor() as usize).min(lattice.counts[d] - 2);
        base[d] = i;
        frac[d] = t - i as f64;
    }
    let mut value = 0.0;
    let mut g = [0.0; 8];
    for corner in 0..(1usize << n) {
        let mut idx = 0;
        let mut w = 1.0;
        let mut dw = [1.0; 8];
        for d in 0..n {
            let bit = (corner >> d) & 1;
            idx = idx * lattice.counts[d] + base[d] + bit;
            let (wd, dd) = if bit == 1 { (frac[d], 1.0) } else { (1.0 - frac[d], -1.0) };
            for e in 0..n {
                if e == d {
                    dw[e] *= dd / lattice.spacing[d];
                } else {
                    dw[e] *= wd;
                }
            }
            w *= wd;
        }
        value += w * values[idx];
        for e in 0..n {
            g[e] += dw[e] * values[idx];
        }
    }
    if let Some(out) = grad {
        out.copy_from_slice(&g[..n]);
    }
    value
}

// ---------------------------------------------------------------------------
// Norms and entropies
// ---------------------------------------------------------------------------

/// ‖f‖_r: closed form where available, otherwise space quadrature.
pub fn lp_norm(f: &TestFunction, r: f64) -> Result<f64> {
    lp_norm_with(f, r, &Levels::default_for(f.dim))
}

pub fn lp_norm_with(f: &TestFunction, r: f64, levels: &Levels) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!("norm exponent must be >= 1, got {r}")));
    }
    if let Some(v) = f.lp_norm_closed(r) {
        return Ok(v);
    }
    let rule = f.space_rule(levels)?;
    Ok(rule.integrate(|x| abs_pow(f.value(x), r))?.powf(1.0 / r))
}

/// f rescaled so that ∫|f|^p = 1.
pub fn normalize_lp(f: &TestFunction, p: f64) -> Result<TestFunction> {
    let norm = lp_norm(f, p)?;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NotNormalizable(format!("L^{p} norm is {norm}")));
    }
    f.scaled(1.0 / norm)
}

/// Ent(|f|^p) = ∫|f|^p log|f|^p, with t log t → 0 at t = 0.
pub fn entropy(f: &TestFunction, p: f64, levels: &Levels) -> Result<f64> {
    let rule = f.space_rule(levels)?;
    let mass = rule.integrate(|x| abs_pow(f.value(x), p))?;
    let g = if (mass - 1.0).abs() > 1e-6 { normalize_lp(f, p)? } else { f.clone() };
    rule.integrate(|x| {
        let v = abs_pow(g.value(x), p);
        if v > 0.0 {
            v * p * g.ln_abs(x)
        } else {
            0.0
        }
    })
}

/// ∫e^{βf} dx, closed form for cones.
pub fn exp_mass(f: &TestFunction, beta_: f64, levels: &Levels) -> Result<f64> {
    if let Shape::Radial { frame, profile: Profile::Cone { c, b }, .. } = &f.shape {
        let nf = f.dim as f64;
        return Ok((beta_ * c).exp() * gamma(nf + 1.0)? * ball_volume(nf)? / ((beta_ * b).powf(nf) * frame.determinant().abs()));
    }
    let rule = f.space_rule(levels)?;
    rule.integrate(|x| (beta_ * f.value(x)).exp())
}

/// f shifted by a constant so that ∫e^{βf} = 1.
pub fn normalize_exp(f: &TestFunction, beta_: f64) -> Result<TestFunction> {
    check_positive("beta", beta_)?;
    match &f.shape {
        Shape::Radial { frame, profile: Profile::Cone { b, .. }, .. } => {
            let c = cone_normalizing_c(f.dim, beta_, *b, frame.determinant())?;
            let mut g = f.clone();
            if let Shape::Radial { profile: Profile::Cone { c: cc, .. }, .. } = &mut g.shape {
                *cc = c;
            }
            g.extra.beta = Some(beta_);
            Ok(g)
        }
        _ => Err(Error::NotNormalizable(format!("e^(beta f) is not integrable for the {} family", f.family))),
    }
}

/// Ent(e^{βf}) = ∫e^{βf} βf; for cones the closed form mass·(βc - n).
pub fn entropy_exp(f: &TestFunction, beta_: f64, levels: &Levels) -> Result<f64> {
    check_positive("beta", beta_)?;
    let mass = exp_mass(f, beta_, levels)?;
    if (mass - 1.0).abs() > 1e-6 {
        return entropy_exp(&normalize_exp(f, beta_)?, beta_, levels);
    }
    if let Shape::Radial { profile: Profile::Cone { c, .. }, .. } = &f.shape {
        return Ok(mass * (beta_ * c - f.dim as f64));
    }
    let rule = f.space_rule(levels)?;
    rule.integrate(|x| {
        let v = beta_ * f.value(x);
        v.exp() * v
    })
}

// ---------------------------------------------------------------------------
// Gradient cache and directional norms
// ---------------------------------------------------------------------------

/// Memory ceiling for a gradient cache.
pub const CACHE_LIMIT_BYTES: usize = 1 << 30;

/// ∇f at every node of a space rule, stored once and reused for all directions.
#[derive(Debug, Clone)]
pub struct GradientCache {
    pub dim: usize,
    pub rule: SpaceRule,
    grads: Vec<f64>,
    /// Levels actually used (lowered if the cache would exceed the memory cap).
    pub levels: Levels,
}

impl GradientCache {
    pub fn new(f: &TestFunction, levels: &Levels) -> Result<Self> {
        let n = f.dim;
        let mut levels = *levels;
        let mut rule = f.space_rule(&levels)?;
        if rule.analytic_only {
            return Err(Error::Unsupported(format!("the {} family is handled analytically", f.family)));
        }
        while rule.len() * n * 8 > CACHE_LIMIT_BYTES {
            let lower = levels.coarser(n);
            if lower == levels {
                break;
            }
            eprintln!("warning: gradient cache over 1 GiB, lowering quadrature levels to {lower:?}");
            levels = lower;
            rule = f.space_rule(&levels)?;
        }
        let rows = try_par_map(rule.len(), |i| {
            let g = f.gradient_vec(rule.node(i));
            if g.iter().all(|v| v.is_finite()) {
                Ok(g)
            } else {
                Err(Error::NonFinite { index: i })
            }
        })?;
        let grads = rows.into_iter().flatten().collect();
        Ok(GradientCache { dim: n, rule, grads, levels })
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn grad(&self, i: usize) -> &[f64] {
        &self.grads[i * self.dim..(i + 1) * self.dim]
    }

    /// ∫|⟨∇f, ξ⟩|^p dx.
    pub fn directional_pth(&self, xi: &[f64], p: f64) -> f64 {
        let mut s = CompensatedSum::new();
        for (g, &w) in self.grads.chunks_exact(self.dim).zip(self.rule.weights()) {
            s.add(w * abs_pow(dot(g, xi), p));
        }
        s.value()
    }

    /// ∫∇f ∇fᵀ dx.
    pub fn moment_matrix(&self) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for (g, &w) in self.grads.chunks_exact(n).zip(self.rule.weights()) {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * g[i] * g[j];
                }
            }
        }
        m
    }

    /// ‖∇_ξ f‖_p at every node of a sphere rule.
    pub fn directional_norms(&self, sphere: &SphericalRule, p: f64) -> Result<Vec<f64>> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("directional norm exponent must be finite and >= 1, got {p}")));
        }
        if p == 2.0 {
            let m = self.moment_matrix();
            return Ok(sphere
                .nodes()
                .map(|x| {
                    let v = DVector::from_column_slice(x);
                    (v.transpose() * &m * &v)[(0, 0)].max(0.0).sqrt()
                })
                .collect());
        }
        Ok(crate::parallel::par_map(sphere.len(), |i| self.directional_pth(sphere.node(i), p).powf(1.0 / p)))
    }

    /// ∫|∇f|^p dx.
    pub fn gradient_pth(&self, p: f64) -> f64 {
        let mut s = CompensatedSum::new();
        for (g, &w) in self.grads.chunks_exact(self.dim).zip(self.rule.weights()) {
            s.add(w * abs_pow(dot(g, g).sqrt(), p));
        }
        s.value()
    }
}

/// ‖∇_ξ f‖_p for one direction; p = ∞ is the essential supremum.
pub fn directional_norm(f: &TestFunction, xi: &[f64], p: f64, levels: &Levels) -> Result<f64> {
    if xi.len() != f.dim {
        return Err(Error::InvalidParameter("direction dimension mismatch".into()));
    }
    if p.is_infinite() {
        return directional_sup(f, xi, levels);
    }
    if let (Some(k), Some(a)) = (f.directional_factor(p), f.frame()) {
        return Ok(k * (a * DVector::from_column_slice(xi)).norm());
    }
    let cache = GradientCache::new(f, levels)?;
    Ok(cache.directional_pth(xi, p).powf(1.0 / p))
}

/// sup_x |⟨∇f(x), ξ⟩|: b|Aξ| for cones, node maximum polished by pattern search otherwise.
pub fn directional_sup(f: &TestFunction, xi: &[f64], levels: &Levels) -> Result<f64> {
    if !f.is_lipschitz() {
        return Err(Error::Unsupported(format!("p = inf needs a Lipschitz family, got {}", f.family)));
    }
    if let Some(k) = f.directional_factor(f64::INFINITY) {
        return Ok(k * (f.frame().unwrap() * DVector::from_column_slice(xi)).norm());
    }
    let rule = f.space_rule(levels)?;
    let score = |x: &[f64]| dot(&f.gradient_vec(x), xi).abs();
    let (mut best_x, mut best) = (rule.node(0).to_vec(), 0.0);
    for x in rule.nodes() {
        let v = score(x);
        if v > best {
            best = v;
            best_x = x.to_vec();
        }
    }
    let mut step = 0.05 * rule.radius.min(1.0).max(1e-3);
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..f.dim {
            for sgn in [1.0, -1.0] {
                let mut y = best_x.clone();
                y[d] += sgn * step;
                let v = score(&y);
                if v > best {
                    best = v;
                    best_x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

/// ‖∇f‖_p; for radial profiles amp^p R_p ∫_S |Aᵀu|^p du / |det A| on the sphere rule.
pub fn gradient_norm(f: &TestFunction, p: f64, levels: &Levels) -> Result<f64> {
    let n = f.dim;
    if p.is_infinite() {
        let k = f
            .directional_factor(f64::INFINITY)
            .ok_or_else(|| Error::Unsupported(format!("p = inf needs a Lipschitz family, got {}", f.family)))?;
        let s = f.frame().unwrap().singular_values();
        return Ok(k * s.max());
    }
    if let (Some(k), Some(a)) = (f.directional_factor(p), f.frame()) {
        // K^p = amp^p R_p M_p/|det A| with M_p = ∫|u_1|^p; ‖∇f‖_p^p = K^p ∫|Aᵀu|^p du / M_p
        let nf = n as f64;
        let moment = 2.0 * std::f64::consts::PI.powf((nf - 1.0) / 2.0) * gamma((p + 1.0) / 2.0)?
            / gamma((nf + p) / 2.0)?;
        let rule = crate::quadrature::cached_sphere_rule(n, levels.sphere)?;
        let at = a.transpose();
        let s = rule.integrate(|u| abs_pow((&at * DVector::from_column_slice(u)).norm(), p))?;
        return Ok(k * (s / moment).powf(1.0 / p));
    }
    let cache = GradientCache::new(f, levels)?;
    Ok(cache.gradient_pth(p).powf(1.0 / p))
}

/// ∫|f|^r over a space rule (for cross-checks against closed forms).
pub fn lp_pth_quadrature(f: &TestFunction, r: f64, levels: &Levels) -> Result<f64> {
    f.space_rule(levels)?.integrate(|x| abs_pow(f.value(x), r))
}

/// ln Γ re-export used by reports that need Γ(n/q + 1).
pub fn ln_gamma_of(x: f64) -> Result<f64> {
    ln_gamma(x)
}
