//! Deterministic quadrature on S^{n-1} and R^n.
//!
//! Surface weights use the unnormalized measure: integrating 1 over S^{n-1}
//! gives n·ω_n. Space rules are polar (or box) products laid out in the
//! natural frame `y = frame · (x - center)` of the integrand.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{ball_volume, sphere_area};
use crate::error::{Error, Result};

/// Neumaier-compensated running sum; the summation order is the insertion order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// |t|^p with cheap paths for the exponents the suites use most.
#[inline]
pub fn abs_pow(t: f64, p: f64) -> f64 {
    let a = t.abs();
    if p == 2.0 {
        a * a
    } else if p == 3.0 {
        a * a * a
    } else if p == 1.0 {
        a
    } else if p == 1.5 {
        a * a.sqrt()
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(p)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m > 0, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            let dp = mf * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=m {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = if m > 1 {
            mf * (x * p1 - p0) / (x * x - 1.0)
        } else {
            1.0
        };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on [a, b] split at the given breakpoints.
pub fn composite_gauss(breaks: &[f64], per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(per_panel);
    let mut nodes = Vec::with_capacity(per_panel * breaks.len());
    let mut weights = Vec::with_capacity(per_panel * breaks.len());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// How a spherical rule is laid out; spectral routines need the structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    /// `count` equally spaced angles (k + 1/2)·2π/count.
    Circle { count: usize },
    /// Gauss–Legendre rings in cos θ times uniform azimuths; node index is
    /// `ring * azimuths + k`.
    GaussAzimuth {
        cos_nodes: Vec<f64>,
        cos_weights: Vec<f64>,
        azimuths: usize,
    },
    /// Equal-weight antipodal point set.
    Scattered,
}

/// Nodes and weights on S^{n-1}, weights in units of surface measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalRule {
    pub dim: usize,
    pub level: usize,
    pub layout: Layout,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub fn default_sphere_level(n: usize) -> usize {
    match n {
        2 => 256,
        3 => 48,
        _ => 14,
    }
}

const SCATTER_SEED: u64 = 0x5EED_0F_5_1EE7;

pub fn sphere_rule(n: usize, level: usize) -> Result<SphericalRule> {
    if level == 0 {
        return Err(Error::InvalidParameter(
            "sphere rule level must be >= 1".into(),
        ));
    }
    match n {
        2 => {
            let count = 2 * level;
            let step = 2.0 * PI / count as f64;
            let mut nodes = Vec::with_capacity(2 * count);
            for k in 0..count {
                let a = (k as f64 + 0.5) * step;
                nodes.push(a.cos());
                nodes.push(a.sin());
            }
            Ok(SphericalRule {
                dim: 2,
                level,
                layout: Layout::Circle { count },
                nodes,
                weights: vec![step; count],
            })
        }
        3 => {
            let (t, wt) = gauss_legendre(level);
            let azimuths = 2 * level;
            let step = 2.0 * PI / azimuths as f64;
            let mut nodes = Vec::with_capacity(3 * level * azimuths);
            let mut weights = Vec::with_capacity(level * azimuths);
            for (&tj, &wj) in t.iter().zip(&wt) {
                let s = (1.0 - tj * tj).max(0.0).sqrt();
                for k in 0..azimuths {
                    let phi = (k as f64 + 0.5) * step;
                    nodes.extend_from_slice(&[s * phi.cos(), s * phi.sin(), tj]);
                    weights.push(wj * step);
                }
            }
            Ok(SphericalRule {
                dim: 3,
                level,
                layout: Layout::GaussAzimuth {
                    cos_nodes: t,
                    cos_weights: wt,
                    azimuths,
                },
                nodes,
                weights,
            })
        }
        4 | 5 => {
            if level > 22 {
                return Err(Error::InvalidParameter(format!(
                    "scattered rule level {level} too large"
                )));
            }
            let pairs = 1usize << level.saturating_sub(1).max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(SCATTER_SEED ^ n as u64);
            let shift: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            const PRIMES: [u64; 5] = [2, 3, 5, 7, 11];
            let mut nodes = Vec::with_capacity(2 * pairs * n);
            let mut half = Vec::with_capacity(pairs * n);
            for i in 0..pairs {
                let mut v = [0.0f64; 5];
                let mut norm = 0.0;
                for d in 0..n {
                    let u = (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract();
                    let z = inverse_normal_cdf(u.clamp(1e-12, 1.0 - 1e-12));
                    v[d] = z;
                    norm += z * z;
                }
                let norm = norm.sqrt();
                for d in 0..n {
                    half.push(v[d] / norm);
                }
            }
            nodes.extend_from_slice(&half);
            nodes.extend(half.iter().map(|x| -x));
            let count = 2 * pairs;
            let w = sphere_area(n) / count as f64;
            Ok(SphericalRule {
                dim: n,
                level,
                layout: Layout::Scattered,
                nodes,
                weights: vec![w; count],
            })
        }
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

/// Shared, immutable rules keyed by (n, level).
pub fn cached_sphere_rule(n: usize, level: usize) -> Result<Arc<SphericalRule>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SphericalRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&(n, level)) {
        return Ok(r.clone());
    }
    let rule = Arc::new(sphere_rule(n, level)?);
    cache.lock().unwrap().insert((n, level), rule.clone());
    Ok(rule)
}

pub fn default_rule(n: usize) -> Result<Arc<SphericalRule>> {
    cached_sphere_rule(n, default_sphere_level(n))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

// Acklam's rational approximation; only used to spread low-discrepancy points,
// so its ~1e-9 accuracy is irrelevant to the rule's weights.
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

impl SphericalRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        let mut s = CompensatedSum::new();
        self.weights.iter().for_each(|&w| s.add(w));
        s.value()
    }

    /// Σ w_i g(ξ_i) in node order.
    pub fn integrate(&self, g: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        integrate_sphere(self, g)
    }

    /// Σ w_i v_i for values already sampled at the nodes.
    pub fn integrate_samples(&self, values: &[f64]) -> Result<f64> {
        assert_eq!(values.len(), self.len());
        let mut s = CompensatedSum::new();
        for (i, (&w, &v)) in self.weights.iter().zip(values).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            s.add(w * v);
        }
        Ok(s.value())
    }

    /// Index of the node with the largest inner product with `u`.
    pub fn nearest(&self, u: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, x) in self.nodes().enumerate() {
            let d = dot(x, u);
            if d > best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

pub fn integrate_sphere(rule: &SphericalRule, mut g: impl FnMut(&[f64]) -> f64) -> Result<f64> {
    let mut s = CompensatedSum::new();
    for (i, (x, &w)) in rule.nodes().zip(&rule.weights).enumerate() {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        s.add(w * v);
    }
    Ok(s.value())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// ---------------------------------------------------------------------------
// Space rules
// ---------------------------------------------------------------------------

/// Decay model of an integrand in its natural coordinate s = |y|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    /// Supported in the ball |y| ≤ radius.
    Compact {
        radius: f64,
    },
    /// Supported in the cube max|y_i| ≤ half_width.
    CompactBox {
        half_width: f64,
    },
    /// |f| ≤ amplitude · exp(-rate s^power).
    StretchedExp {
        rate: f64,
        power: f64,
    },
    /// |f| ≲ amplitude · (scale/s)^exponent for large s.
    Algebraic {
        exponent: f64,
        scale: f64,
    },
    /// Closed forms only (cone family); no space integration is performed.
    AnalyticOnly,
    None,
}

/// Where and how fast a function lives: y = frame·(x − center).
#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub dim: usize,
    pub center: Vec<f64>,
    pub frame: DMatrix<f64>,
    pub amplitude: f64,
    pub decay: Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceMode {
    Polar,
    Box,
}

/// Quadrature resolution knobs shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Levels {
    /// Level of the outer sphere rule (directions ξ).
    pub sphere: usize,
    /// Level of the angular factor of polar space rules.
    pub space_angular: usize,
    /// Gauss–Legendre nodes per radial panel (per axis panel in box mode).
    pub radial: usize,
}

impl Levels {
    pub fn default_for(n: usize) -> Self {
        match n {
            2 => Levels {
                sphere: 256,
                space_angular: 128,
                radial: 16,
            },
            3 => Levels {
                sphere: 48,
                space_angular: 20,
                radial: 8,
            },
            _ => Levels {
                sphere: 12,
                space_angular: 9,
                radial: 6,
            },
        }
    }

    /// Roughly half the resolution in every direction; used for refinement deltas.
    pub fn coarser(&self, n: usize) -> Self {
        let sphere = if n >= 4 {
            self.sphere.saturating_sub(1).max(2)
        } else {
            (self.sphere * 2 / 3).max(4)
        };
        let space_angular = if n >= 4 {
            self.space_angular.saturating_sub(1).max(2)
        } else {
            (self.space_angular * 2 / 3).max(4)
        };
        Levels {
            sphere,
            space_angular,
            radial: (self.radial * 2 / 3).max(4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceRule {
    pub dim: usize,
    pub mode: SpaceMode,
    /// Truncation radius in the natural frame; infinite for mapped rules.
    pub radius: f64,
    /// Estimated mass of the neglected tail.
    pub tail_bound: f64,
    /// Set for families that are handled by closed forms only.
    pub analytic_only: bool,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SpaceRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, g: impl FnMut(&[f64]) -> f64) -> Result<f64> {
        integrate_space(self, g)
    }

    fn analytic(dim: usize) -> Self {
        SpaceRule {
            dim,
            mode: SpaceMode::Polar,
            radius: 0.0,
            tail_bound: 0.0,
            analytic_only: true,
            nodes: vec![],
            weights: vec![],
        }
    }
}

pub fn integrate_space(rule: &SpaceRule, mut g: impl FnMut(&[f64]) -> f64) -> Result<f64> {
    if rule.analytic_only {
        return Err(Error::Unsupported("space rule is analytic-only".into()));
    }
    let mut s = CompensatedSum::new();
    for (i, (x, &w)) in rule.nodes().zip(&rule.weights).enumerate() {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        s.add(w * v);
    }
    Ok(s.value())
}

fn graded_breaks(radius: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    for k in (0..7).rev() {
        b.push(radius / f64::powi(2.0, k));
    }
    // split the outer panel, where most of the mass of decaying profiles sits
    let last = b.pop().unwrap();
    let prev = *b.last().unwrap();
    b.push(0.5 * (prev + last));
    b.push(last);
    b
}

fn mapped_breaks() -> Vec<f64> {
    let mut b = vec![0.0];
    for k in (1..7).rev() {
        b.push(f64::powi(0.5, k));
    }
    for k in 2..10 {
        b.push(1.0 - f64::powi(0.5, k));
    }
    b.push(1.0);
    b
}

/// Radial nodes/weights for ∫_0^∞ g(s) ds (weights carry no s^{n-1} factor).
fn radial_rule(decay: &Decay, radius: f64, per_panel: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
    match decay {
        Decay::Algebraic { .. } => {
            let (u, w) = composite_gauss(&mapped_breaks(), per_panel);
            u.iter()
                .zip(&w)
                .map(|(&u, &w)| (scale * u / (1.0 - u), w * scale / ((1.0 - u) * (1.0 - u))))
                .unzip()
        }
        _ => composite_gauss(&graded_breaks(radius), per_panel),
    }
}

/// Tail mass estimate over |y| > radius for integrands built from |f|^p,
/// |∇f|^p and |f|^p |log |f|^p|.
fn stretched_exp_tail(n: usize, amplitude: f64, rate: f64, power: f64, p: f64, radius: f64) -> f64 {
    let area = sphere_area(n);
    let (u, w) = composite_gauss(&[0.0, 0.25, 0.5, 0.75, 0.9, 1.0], 16);
    let lnamp = amplitude.max(1e-300).ln();
    let mut total = 0.0;
    for (&u, &w) in u.iter().zip(&w) {
        let s = radius + u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        let decay = (p * (lnamp - rate * s.powf(power))).exp();
        let grad = (rate * power * s.powf(power - 1.0)).max(1.0).powf(p);
        let log = (p * (lnamp - rate * s.powf(power))).abs().max(1.0);
        total += w * jac * s.powf(n as f64 - 1.0) * decay * (grad + log);
    }
    area * total
}

pub fn space_rule_for(
    profile: &DecayProfile,
    tol: f64,
    p: f64,
    levels: &Levels,
) -> Result<SpaceRule> {
    let n = profile.dim;
    let det = profile.frame.determinant().abs();
    if !(det > 0.0) {
        return Err(Error::InvalidParameter(
            "space frame must be invertible".into(),
        ));
    }
    let inv = profile
        .frame
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("space frame must be invertible".into()))?;

    let (radius, tail, mode) = match &profile.decay {
        Decay::AnalyticOnly => return Ok(SpaceRule::analytic(n)),
        Decay::None => return Err(Error::MissingDecay),
        Decay::Compact { radius } => (*radius, 0.0, SpaceMode::Polar),
        Decay::CompactBox { half_width } => (*half_width, 0.0, SpaceMode::Box),
        Decay::StretchedExp { rate, power } => {
            let target = tol * det;
            let mut r = 0.5;
            let mut t = stretched_exp_tail(n, profile.amplitude, *rate, *power, p, r);
            while t > target && r < 1e4 {
                r *= 1.05;
                t = stretched_exp_tail(n, profile.amplitude, *rate, *power, p, r);
            }
            (r, t / det, SpaceMode::Polar)
        }
        Decay::Algebraic { .. } => (f64::INFINITY, 0.0, SpaceMode::Polar),
    };

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut push = |y: &[f64], w: f64| {
        for i in 0..n {
            let mut xi = profile.center[i];
            for j in 0..n {
                xi += inv[(i, j)] * y[j];
            }
            nodes.push(xi);
        }
        weights.push(w / det);
    };

    match mode {
        SpaceMode::Polar => {
            let scale = match &profile.decay {
                Decay::Algebraic { scale, .. } => *scale,
                _ => 1.0,
            };
            let (rs, rw) = radial_rule(&profile.decay, radius, levels.radial, scale);
            if n == 1 {
                for (&r, &w) in rs.iter().zip(&rw) {
                    push(&[r], w);
                    push(&[-r], w);
                }
            } else {
                let ang = sphere_rule(n, levels.space_angular)?;
                let mut y = vec![0.0; n];
                for (&r, &w) in rs.iter().zip(&rw) {
                    let rad_w = w * r.powi(n as i32 - 1);
                    for (xi, &wa) in ang.nodes().zip(ang.weights()) {
                        for d in 0..n {
                            y[d] = r * xi[d];
                        }
                        push(&y, rad_w * wa);
                    }
                }
            }
        }
        SpaceMode::Box => {
            let panels = 4;
            let breaks: Vec<f64> = (0..=panels)
                .map(|k| -radius + 2.0 * radius * k as f64 / panels as f64)
                .collect();
            let per_panel = if n <= 2 { levels.radial * 2 } else { levels.radial };
            let (t, w) = composite_gauss(&breaks, per_panel);
            let m = t.len();
            let total = m.pow(n as u32);
            let mut idx = vec![0usize; n];
            let mut y = vec![0.0; n];
            for _ in 0..total {
                let mut wt = 1.0;
                for d in 0..n {
                    y[d] = t[idx[d]];
                    wt *= w[idx[d]];
                }
                push(&y, wt);
                for d in 0..n {
                    idx[d] += 1;
                    if idx[d] < m {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
    }

    Ok(SpaceRule {
        dim: n,
        mode,
        radius,
        tail_bound: tail,
        analytic_only: false,
        nodes,
        weights,
    })
}

/// Plain polar rule on the ball of the given radius, centred at the origin.
pub fn ball_rule(n: usize, radius: f64, levels: &Levels) -> Result<SpaceRule> {
    let profile = DecayProfile {
        dim: n,
        center: vec![0.0; n],
        frame: DMatrix::identity(n, n),
        amplitude: 1.0,
        decay: Decay::Compact { radius },
    };
    space_rule_for(&profile, 0.0, 1.0, levels)
}

/// ω_n R^n, the exact volume a ball rule should reproduce.
pub fn ball_measure(n: usize, radius: f64) -> f64 {
    ball_volume(n as f64).expect("valid dimension") * radius.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::gamma;

    fn beta_moment(n: usize, p: f64) -> f64 {
        let nf = n as f64;
        2.0 * PI.powf((nf - 1.0) / 2.0) * gamma((p + 1.0) / 2.0).unwrap()
            / gamma((nf + p) / 2.0).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in [1, 2, 5, 16, 48, 97] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * m - 1;
            let deg = deg - deg % 2;
            let val: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((val - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn circle_rule_total_and_exactness() {
        let r = sphere_rule(2, 64).unwrap();
        assert!((r.total_weight() - 2.0 * PI).abs() < 1e-12);
        // cos^{2k} is exact while 2k < 2·level
        for k in 1..20 {
            let val = r.integrate(|x| x[0].powi(2 * k)).unwrap();
            let exact = 2.0 * PI * gamma(k as f64 + 0.5).unwrap()
                / (PI.sqrt() * gamma(k as f64 + 1.0).unwrap());
            assert!((val - exact).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn rule_invariants() {
        for (n, level) in [(2, 16), (3, 12), (4, 8), (5, 8)] {
            let r = sphere_rule(n, level).unwrap();
            for x in r.nodes() {
                assert!((norm(x) - 1.0).abs() < 1e-12);
            }
            assert!((r.total_weight() - sphere_area(n)).abs() < 1e-8);
            assert!(r.weights().iter().all(|&w| w > 0.0));
            // antipodal symmetry
            for (i, x) in r.nodes().enumerate() {
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                let j = r.nearest(&neg);
                assert!(
                    r.node(j)
                        .iter()
                        .zip(&neg)
                        .all(|(a, b)| (a - b).abs() < 1e-12),
                    "n={n} node {i}"
                );
                assert!((r.weights()[i] - r.weights()[j]).abs() < 1e-14);
            }
        }
        assert!(matches!(
            sphere_rule(6, 4),
            Err(Error::UnsupportedDimension(6))
        ));
        assert!(sphere_rule(3, 0).is_err());
    }

    #[test]
    fn sphere_coordinate_moments() {
        let r = sphere_rule(3, 32).unwrap();
        let val = r.integrate(|x| x[0] * x[0]).unwrap();
        assert!((val - 4.0 * PI / 3.0).abs() < 1e-12);
        let odd = r.integrate(|x| x[0] * x[1] * x[1] + x[2].powi(3)).unwrap();
        assert!(odd.abs() < 1e-12);
        let vol = r.integrate(|_| 1.0).unwrap() / 3.0;
        assert!((vol - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_moment_matches_beta_reduction() {
        let r = sphere_rule(3, 32).unwrap();
        let u = [0.3, -0.5, 0.812_403_840_463_596];
        let un = norm(&u);
        let u: Vec<f64> = u.iter().map(|x| x / un).collect();
        let val = r.integrate(|x| abs_pow(dot(x, &u), 2.5)).unwrap();
        assert!((val / beta_moment(3, 2.5) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn refinement_is_stable_for_smooth_moments() {
        for n in [2, 3] {
            let lvl = default_sphere_level(n);
            let a = sphere_rule(n, lvl).unwrap();
            let b = sphere_rule(n, 2 * lvl).unwrap();
            let u: Vec<f64> = if n == 2 {
                vec![0.6, 0.8]
            } else {
                vec![0.48, 0.6, 0.64]
            };
            for p in [2.0, 4.0] {
                let ia = a.integrate(|x| abs_pow(dot(x, &u), p)).unwrap();
                let ib = b.integrate(|x| abs_pow(dot(x, &u), p)).unwrap();
                assert!((ia - ib).abs() < 1e-7, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn kinked_moments_converge_algebraically() {
        // |t|^p has a kink on a great circle; error decays like level^{-(p+1)}
        let u = [0.48, 0.6, 0.64];
        for p in [1.5, 3.0] {
            let exact = beta_moment(3, p);
            let err = |lvl: usize| {
                let r = sphere_rule(3, lvl).unwrap();
                (r.integrate(|x| abs_pow(dot(x, &u), p)).unwrap() - exact).abs()
            };
            let (e1, e2) = (err(48), err(96));
            assert!(e2 < e1);
            assert!(
                e1 / e2 > 0.75 * 2f64.powf(p + 1.0).min(8.0),
                "p={p}: {e1} {e2}"
            );
        }
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let r = sphere_rule(2, 8).unwrap();
        assert!(matches!(
            r.integrate(|x| if x[0] > 0.9 { f64::NAN } else { 1.0 }),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn determinism() {
        let a = sphere_rule(4, 10).unwrap();
        let b = sphere_rule(4, 10).unwrap();
        assert_eq!(a, b);
        let va = a.integrate(|x| x[0].powi(4) + x[3]).unwrap();
        let vb = b.integrate(|x| x[0].powi(4) + x[3]).unwrap();
        assert_eq!(va.to_bits(), vb.to_bits());
    }

    #[test]
    fn ball_rule_volume_and_radial_integrals() {
        for n in [2, 3] {
            let lv = Levels::default_for(n);
            let rule = ball_rule(n, 1.7, &lv).unwrap();
            let v = rule.integrate(|_| 1.0).unwrap();
            assert!((v - ball_measure(n, 1.7)).abs() < 1e-6 * v);
        }
        // ∫_{R^3} e^{-|x|} = 4π Γ(3) = 8π
        let profile = DecayProfile {
            dim: 3,
            center: vec![0.0; 3],
            frame: DMatrix::identity(3, 3),
            amplitude: 1.0,
            decay: Decay::StretchedExp {
                rate: 1.0,
                power: 1.0,
            },
        };
        let rule = space_rule_for(&profile, 1e-12, 1.0, &Levels::default_for(3)).unwrap();
        let v = rule.integrate(|x| (-norm(x)).exp()).unwrap();
        assert!((v / (8.0 * PI) - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gaussian_truncation_radius() {
        let profile = DecayProfile {
            dim: 3,
            center: vec![0.0; 3],
            frame: DMatrix::identity(3, 3),
            amplitude: 1.0,
            decay: Decay::StretchedExp {
                rate: 1.0,
                power: 2.0,
            },
        };
        let rule = space_rule_for(&profile, 1e-10, 2.0, &Levels::default_for(3)).unwrap();
        // oracle: ∫_{|x|>R} e^{-2|x|^2} dx = 4π ∫_R^∞ r^2 e^{-2r^2} dr
        let (u, w) = composite_gauss(&[0.0, 0.5, 1.0], 40);
        let tail: f64 = u
            .iter()
            .zip(&w)
            .map(|(&t, &w)| {
                let r = rule.radius + t / (1.0 - t);
                w / ((1.0 - t) * (1.0 - t)) * 4.0 * PI * r * r * (-2.0 * r * r).exp()
            })
            .sum();
        assert!(tail < 1e-10, "tail {tail} at R = {}", rule.radius);
        assert!(rule.radius < 8.0);
        assert!(rule.tail_bound < 1e-10);
    }

    #[test]
    fn compact_and_analytic_profiles() {
        let mut profile = DecayProfile {
            dim: 2,
            center: vec![0.0; 2],
            frame: DMatrix::identity(2, 2),
            amplitude: 1.0,
            decay: Decay::Compact { radius: 1.0 },
        };
        let rule = space_rule_for(&profile, 1e-10, 2.0, &Levels::default_for(2)).unwrap();
        assert_eq!(rule.radius, 1.0);
        profile.decay = Decay::AnalyticOnly;
        let rule = space_rule_for(&profile, 1e-10, 2.0, &Levels::default_for(2)).unwrap();
        assert!(rule.analytic_only);
        assert!(rule.integrate(|_| 1.0).is_err());
        profile.decay = Decay::None;
        assert!(matches!(
            space_rule_for(&profile, 1e-10, 2.0, &Levels::default_for(2)),
            Err(Error::MissingDecay)
        ));
    }

    #[test]
    fn generalized_gaussian_integral() {
        // ∫ e^{-|x|^q} = Γ(n/q + 1) ω_n
        for q in [1.5, 2.0, 3.0] {
            let profile = DecayProfile {
                dim: 2,
                center: vec![0.3, -0.2],
                frame: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 0.5]),
                amplitude: 1.0,
                decay: Decay::StretchedExp {
                    rate: 1.0,
                    power: q,
                },
            };
            let rule = space_rule_for(&profile, 1e-12, 1.0, &Levels::default_for(2)).unwrap();
            let a = &profile.frame;
            let v = rule
                .integrate(|x| {
                    let y0 = a[(0, 0)] * (x[0] - 0.3) + a[(0, 1)] * (x[1] + 0.2);
                    let y1 = a[(1, 0)] * (x[0] - 0.3) + a[(1, 1)] * (x[1] + 0.2);
                    (-(y0 * y0 + y1 * y1).sqrt().powf(q)).exp()
                })
                .unwrap();
            let exact = gamma(2.0 / q + 1.0).unwrap() * PI / a.determinant().abs();
            assert!((v / exact - 1.0).abs() < 1e-10, "q={q}: {v} vs {exact}");
        }
    }

    #[test]
    fn algebraic_mapped_rule() {
        // ∫_{R^3} (1 + |x|^2)^{-3} dx = π^2 / 4
        let profile = DecayProfile {
            dim: 3,
            center: vec![0.0; 3],
            frame: DMatrix::identity(3, 3),
            amplitude: 1.0,
            decay: Decay::Algebraic {
                exponent: 6.0,
                scale: 1.0,
            },
        };
        let rule = space_rule_for(&profile, 1e-10, 1.0, &Levels::default_for(3)).unwrap();
        let v = rule.integrate(|x| (1.0 + dot(x, x)).powi(-3)).unwrap();
        assert!((v / (PI * PI / 4.0) - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn box_rule_volume() {
        let profile = DecayProfile {
            dim: 3,
            center: vec![1.0, 0.0, 0.0],
            frame: DMatrix::identity(3, 3) * 2.0,
            amplitude: 1.0,
            decay: Decay::CompactBox { half_width: 1.0 },
        };
        let rule = space_rule_for(&profile, 0.0, 2.0, &Levels::default_for(3)).unwrap();
        assert_eq!(rule.mode, SpaceMode::Box);
        let v = rule.integrate(|_| 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
}
