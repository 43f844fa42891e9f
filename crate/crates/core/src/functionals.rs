//! Affine energy Z_p, E_p, E_∞, the functional C_f*, the bodies L_f and K_f,
//! q-homogeneous conjugation and the identities tying them together.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bodies::{centroid_support, envelope_min, grid_envelope, ConvexBody, Repr, SupportModel};
use crate::constants::{centroid_a1, conjugate_exponent, constants_for, ell_q, gamma, sphere_area};
use crate::error::{Error, Result};
use crate::functions::{GradientCache, TestFunction};
use crate::parallel::{par_map, try_par_map};
use crate::quadrature::{
    abs_pow, cached_sphere_rule, dot, norm, space_rule_for, CompensatedSum, Decay, DecayProfile, Levels,
    SphericalRule,
};
use crate::zonal::ZonalTransform;

/// Z_p, E_p and the directional norms ‖∇_ξ f‖_p on a sphere rule.
#[derive(Debug, Clone)]
pub struct AffineEnergy {
    pub n: usize,
    pub p: f64,
    pub z_p: f64,
    pub e_p: f64,
    pub rule: Arc<SphericalRule>,
    pub norms: Vec<f64>,
    pub levels: Levels,
    /// When ‖∇_ξ f‖_p = |Bξ| exactly, the matrix B (then L_f = B^{-1}·B^n).
    pub exact_frame: Option<DMatrix<f64>>,
}

/// c_{n,p}, or c_{n,∞} = (nω_n)^{1/n} for p = ∞.
pub fn energy_constant(n: usize, p: f64) -> Result<f64> {
    if p.is_infinite() {
        Ok(sphere_area(n).powf(1.0 / n as f64))
    } else {
        Ok(constants_for(n, p)?.c_np)
    }
}

pub fn affine_energy(f: &TestFunction, p: f64) -> Result<AffineEnergy> {
    affine_energy_with(f, p, &Levels::default_for(f.dim))
}

pub fn affine_energy_with(f: &TestFunction, p: f64, levels: &Levels) -> Result<AffineEnergy> {
    let n = f.dim;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p must be > 1 or inf, got {p}")));
    }
    let rule = cached_sphere_rule(n, levels.sphere)?;
    let (norms, exact_frame) = match (f.directional_factor(p), f.frame()) {
        (Some(k), Some(a)) => {
            let b = a * k;
            let norms = rule.nodes().map(|x| (&b * DVector::from_column_slice(x)).norm()).collect();
            (norms, Some(b))
        }
        _ => {
            let cache = GradientCache::new(f, levels)?;
            let norms = if p.is_infinite() {
                if !f.is_lipschitz() {
                    return Err(Error::Unsupported(format!("p = inf needs a Lipschitz family, got {}", f.family())));
                }
                sup_norms(f, &cache, &rule)
            } else {
                cache.directional_norms(&rule, p)?
            };
            (norms, None)
        }
    };
    if let Some(i) = norms.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate(format!("directional norm {} vanishes at sphere node {i}", norms[i])));
    }
    let inv: Vec<f64> = norms.iter().map(|v| v.powi(-(n as i32))).collect();
    let z_p = rule.integrate_samples(&inv)?.powf(-1.0 / n as f64);
    Ok(AffineEnergy { n, p, z_p, e_p: energy_constant(n, p)? * z_p, rule, norms, levels: *levels, exact_frame })
}

/// sup_x |⟨∇f(x), ξ⟩| per sphere node: cached node maximum, then a pattern search.
fn sup_norms(f: &TestFunction, cache: &GradientCache, rule: &SphericalRule) -> Vec<f64> {
    let n = f.dim;
    par_map(rule.len(), |k| {
        let xi = rule.node(k);
        let mut best = (0.0, 0usize);
        for i in 0..cache.len() {
            let v = dot(cache.grad(i), xi).abs();
            if v > best.0 {
                best = (v, i);
            }
        }
        let score = |x: &[f64]| dot(&f.gradient_vec(x), xi).abs();
        let mut x = cache.rule.node(best.1).to_vec();
        let mut val = best.0;
        let mut step = 0.02;
        while step > 1e-10 {
            let mut improved = false;
            for d in 0..n {
                for s in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[d] += s * step;
                    let v = score(&y);
                    if v > val {
                        val = v;
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        val
    })
}

/// C_f*(x) = ∫ ‖∇_ξ f‖_p^{-n-p} |⟨x, ξ⟩|^p dξ.
#[derive(Debug, Clone)]
pub struct CStar {
    pub p: f64,
    transform: Arc<ZonalTransform>,
}

impl CStar {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.transform.eval(x).max(0.0)
    }

    pub fn transform(&self) -> &Arc<ZonalTransform> {
        &self.transform
    }
}

impl AffineEnergy {
    fn cstar_samples(&self) -> Vec<f64> {
        let e = -(self.n as f64) - self.p;
        self.norms.iter().map(|v| v.powf(e)).collect()
    }

    /// C_f* by the spectral transform of the sphere samples (direct sum for n ≥ 4).
    pub fn cstar(&self) -> Result<CStar> {
        self.finite_p()?;
        Ok(CStar { p: self.p, transform: Arc::new(ZonalTransform::new(&self.rule, &self.cstar_samples(), self.p)?) })
    }

    /// C_f* by the plain quadrature sum of its defining integral.
    pub fn cstar_direct(&self) -> Result<CStar> {
        self.finite_p()?;
        Ok(CStar { p: self.p, transform: Arc::new(ZonalTransform::direct(&self.rule, &self.cstar_samples(), self.p)?) })
    }

    fn finite_p(&self) -> Result<()> {
        if self.p.is_finite() {
            Ok(())
        } else {
            Err(Error::Unsupported("C_f* needs a finite exponent".into()))
        }
    }

    /// L_f = {ξ : ‖∇_ξ f‖_p ≤ 1}.
    pub fn l_f(&self) -> Result<ConvexBody> {
        match &self.exact_frame {
            Some(b) => ConvexBody::ellipsoid(crate::bodies::inverse(b)?),
            None => ConvexBody::from_radial_samples(self.rule.clone(), self.norms.iter().map(|v| 1.0 / v).collect()),
        }
    }

    /// vol(L_f) = Z_p^{-n}/n.
    pub fn volume_l_f(&self) -> f64 {
        self.z_p.powi(-(self.n as i32)) / self.n as f64
    }
}

/// C_f*(x) for a single point.
pub fn cstar(energy: &AffineEnergy, x: &[f64]) -> Result<f64> {
    Ok(energy.cstar()?.eval(x))
}

// ---------------------------------------------------------------------------
// The bodies K_f
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    #[serde(rename = "lemma36")]
    Lemma36,
    #[serde(rename = "thm37-scaling")]
    Thm37Scaling,
}

#[derive(Debug, Clone)]
pub struct FunctionBodies {
    pub l_f: ConvexBody,
    pub k_f: ConvexBody,
    pub k_f_polar: ConvexBody,
    pub route: Route,
    /// max_i |r_1 - r_2|/r_1 over sphere nodes between the two routes.
    pub agreement: f64,
}

/// K_f from K_f° = {C_f* ≤ ℓ_q}: h_{K_f} = (C_f*/ℓ_q)^{1/p}.
pub fn k_f_lemma36(energy: &AffineEnergy) -> Result<ConvexBody> {
    let cs = energy.cstar()?;
    let model = SupportModel { transform: cs.transform.clone(), scale: 1.0 / ell_q(energy.p) };
    ConvexBody::from_support_model(energy.rule.clone(), model)
}

/// K_f = ((n+p) vol(L_f) a_1/ℓ_q)^{1/p} Γ_p L_f.
pub fn k_f_scaling(energy: &AffineEnergy) -> Result<ConvexBody> {
    let n = energy.n;
    let p = energy.p;
    let l_f = energy.l_f()?;
    let vol = l_f.volume()?;
    let factor = ((n as f64 + p) * vol * centroid_a1(n, p)? / ell_q(p)).powf(1.0 / p);
    let model = centroid_support(&l_f, p, &energy.rule)?;
    let scaled = SupportModel { transform: model.transform, scale: model.scale * factor.powf(p) };
    ConvexBody::from_support_model(energy.rule.clone(), scaled)
}

pub fn body_k(energy: &AffineEnergy, route: Route) -> Result<FunctionBodies> {
    let a = k_f_lemma36(energy)?;
    let b = k_f_scaling(energy)?;
    let ra = a.radial_on(&energy.rule)?;
    let rb = b.radial_on(&energy.rule)?;
    let agreement = ra.iter().zip(&rb).map(|(x, y)| (x - y).abs() / x).fold(0.0, f64::max);
    let k_f = match route {
        Route::Lemma36 => a,
        Route::Thm37Scaling => b,
    };
    let polar_radial = k_f.support_on(&energy.rule)?.iter().map(|h| 1.0 / h).collect();
    Ok(FunctionBodies {
        l_f: energy.l_f()?,
        k_f_polar: ConvexBody::from_radial_samples(energy.rule.clone(), polar_radial)?,
        k_f,
        route,
        agreement,
    })
}

// ---------------------------------------------------------------------------
// Conjugation of p-homogeneous functions
// ---------------------------------------------------------------------------

/// sup_y ⟨x, y⟩ - φ(y) for p-homogeneous φ sampled on `rule`: along each ray
/// the maximum is (1/q)(⟨x,u⟩/(pφ(u))^{1/p})^q; the outer maximum is a grid search.
pub fn conjugate_qhom(rule: &SphericalRule, phi: &[f64], p: f64, y: &[f64]) -> Result<f64> {
    check_phi(rule, phi, p)?;
    let q = conjugate_exponent(p);
    let mut best = 0.0f64;
    for (u, &f) in rule.nodes().zip(phi) {
        let d = dot(u, y);
        if d > 0.0 {
            best = best.max((d / (p * f).powf(1.0 / p)).powf(q) / q);
        }
    }
    Ok(best)
}

/// As [`conjugate_qhom`], with φ known off the grid and the outer maximum polished.
pub fn conjugate_qhom_refined(
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    rule: &SphericalRule,
    grid_phi: &[f64],
    p: f64,
    y: &[f64],
) -> Result<f64> {
    check_phi(rule, grid_phi, p)?;
    let q = conjugate_exponent(p);
    let r = norm(y);
    if r == 0.0 {
        return Ok(0.0);
    }
    // max_u ⟨y,u⟩/h(u) with h = (pφ)^{1/p} is the gauge of the body with support h
    let h = |u: &[f64]| {
        let s = norm(u);
        s * (p * phi(&u.iter().map(|x| x / s).collect::<Vec<_>>())).powf(1.0 / p)
    };
    let grid_h: Vec<f64> = grid_phi.iter().map(|f| (p * f).powf(1.0 / p)).collect();
    let radial = if rule.dim <= 3 {
        envelope_min(&h, y, rule, &grid_h)?
    } else {
        let u: Vec<f64> = y.iter().map(|x| x / r).collect();
        grid_envelope(rule, &grid_h, &u).map(|(v, _)| v).ok_or_else(|| Error::Unbounded("empty cone".into()))?
    };
    Ok((r / radial).powf(q) / q)
}

fn check_phi(rule: &SphericalRule, phi: &[f64], p: f64) -> Result<()> {
    if phi.len() != rule.len() {
        return Err(Error::InvalidParameter("one sample of phi per node required".into()));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p must be finite and > 1, got {p}")));
    }
    if let Some(i) = phi.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("phi must be positive on the grid (node {i})")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Identities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lhs: f64,
    pub rhs: f64,
    pub rel: f64,
}

impl Gap {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Gap { lhs, rhs, rel: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub p: f64,
    /// ∫ C_f*(∇f) = n vol(L_f).
    pub gradient_integral: Gap,
    /// ∫ C_f*(∇f) = Z_p^{-n}.
    pub z_identity: Gap,
    /// Worst pointwise C_f*(v) = (n+p) a_1 vol(L_f) h^p_{Γ_p L_f}(v) over random v.
    pub cstar_centroid: Gap,
    /// ∫ e^{-C_f} = Γ(n/q + 1) vol(K_f), when requested.
    pub exp_integral: Option<Gap>,
}

/// ∫ C_f*(∇f(x)) dx by space quadrature.
pub fn integral_cstar_gradient(f: &TestFunction, cs: &CStar, levels: &Levels) -> Result<f64> {
    let rule = f.space_rule(levels)?;
    let vals = try_par_map(rule.len(), |i| {
        let v = cs.eval(&f.gradient_vec(rule.node(i)));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { index: i })
        }
    })?;
    let mut s = CompensatedSum::new();
    for (v, w) in vals.iter().zip(rule.weights()) {
        s.add(v * w);
    }
    Ok(s.value())
}

/// (n+p) a_1 vol(L_f) h^p_{Γ_p L_f}(v) at the given points; Γ_p E = E for ellipsoids.
pub fn centroid_side(energy: &AffineEnergy, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = energy.n;
    let p = energy.p;
    let l_f = energy.l_f()?;
    let vol = l_f.volume()?;
    let c = (n as f64 + p) * centroid_a1(n, p)? * vol;
    if let Repr::Ellipsoid { .. } = l_f.repr() {
        return points.iter().map(|v| Ok(c * l_f.support(v)?.powf(p))).collect();
    }
    let model = centroid_support(&l_f, p, &energy.rule)?;
    Ok(points.iter().map(|v| c * model.eval(v).powf(p)).collect())
}

/// Seeded Gaussian directions scaled to random lengths in [0.5, 2].
pub fn random_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = norm(&g);
            let len = 0.5 + 1.5 * rand::Rng::gen::<f64>(&mut rng);
            g.iter().map(|x| x / r * len).collect()
        })
        .collect()
}

/// ∫ e^{-C_f(x)} dx with C_f obtained by conjugating C_f* at every space node.
pub fn integral_exp_neg_cf(energy: &AffineEnergy, levels: &Levels) -> Result<f64> {
    let n = energy.n;
    let p = energy.p;
    let q = conjugate_exponent(p);
    let cs = energy.cstar()?;
    let grid: Vec<f64> = energy.rule.nodes().map(|u| cs.eval(u)).collect();
    let phi = |u: &[f64]| cs.eval(u);
    let cmin = conjugate_qhom(&energy.rule, &grid, p, &energy.rule.node(0).to_vec())?;
    // e^{-C_f} ≤ e^{-c |x|^q} with c the smallest value of C_f on the unit sphere
    let mut c_lo = cmin;
    for u in energy.rule.nodes().step_by((energy.rule.len() / 64).max(1)) {
        c_lo = c_lo.min(conjugate_qhom(&energy.rule, &grid, p, u)?);
    }
    let profile = DecayProfile {
        dim: n,
        center: vec![0.0; n],
        frame: DMatrix::identity(n, n),
        amplitude: 1.0,
        decay: Decay::StretchedExp { rate: 0.5 * c_lo, power: q },
    };
    let rule = space_rule_for(&profile, crate::functions::SPACE_TOL, 1.0, levels)?;
    let vals = try_par_map(rule.len(), |i| {
        conjugate_qhom_refined(&phi, &energy.rule, &grid, p, rule.node(i)).map(|c| (-c).exp())
    })?;
    let mut s = CompensatedSum::new();
    for (v, w) in vals.iter().zip(rule.weights()) {
        s.add(v * w);
    }
    Ok(s.value())
}

pub fn lemma_identities(f: &TestFunction, p: f64, with_exp_integral: bool) -> Result<IdentityReport> {
    lemma_identities_with(f, p, &Levels::default_for(f.dim), with_exp_integral)
}

pub fn lemma_identities_with(f: &TestFunction, p: f64, levels: &Levels, with_exp_integral: bool) -> Result<IdentityReport> {
    let n = f.dim;
    let energy = affine_energy_with(f, p, levels)?;
    let cs = energy.cstar()?;
    let lhs = integral_cstar_gradient(f, &cs, levels)?;
    let vol_l = energy.l_f()?.volume()?;
    let gradient_integral = Gap::new(lhs, n as f64 * vol_l);
    let z_identity = Gap::new(lhs, energy.z_p.powi(-(n as i32)));

    let points = random_points(n, 50, 0x3535);
    let rhs = centroid_side(&energy, &points)?;
    let mut cstar_centroid = Gap { lhs: 0.0, rhs: 0.0, rel: 0.0 };
    for (v, r) in points.iter().zip(&rhs) {
        let g = Gap::new(cs.eval(v), *r);
        if g.rel >= cstar_centroid.rel {
            cstar_centroid = g;
        }
    }

    let exp_integral = if with_exp_integral {
        let lhs = integral_exp_neg_cf(&energy, levels)?;
        let k_f = k_f_lemma36(&energy)?;
        let q = conjugate_exponent(p);
        Some(Gap::new(lhs, gamma(n as f64 / q + 1.0)? * k_f.volume()?))
    } else {
        None
    };
    Ok(IdentityReport { n, p, gradient_integral, z_identity, cstar_centroid, exp_integral })
}

// ---------------------------------------------------------------------------
// Ellipsoid fit
// ---------------------------------------------------------------------------

/// Best ellipsoid {x : xᵀQx ≤ 1} through the radial samples of a body.
#[derive(Debug, Clone)]
pub struct EllipsoidFit {
    pub q: DMatrix<f64>,
    /// M with Q = MᵀM, so the ellipsoid is {|Mx| ≤ 1}.
    pub m: DMatrix<f64>,
    /// max |r_fit/r - 1| over the nodes.
    pub residual: f64,
}

pub fn fit_ellipsoid(body: &ConvexBody, rule: &SphericalRule) -> Result<EllipsoidFit> {
    let n = body.dim();
    let r = body.radial_on(rule)?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut a = DMatrix::zeros(rule.len(), pairs.len());
    let mut b = DVector::zeros(rule.len());
    for (k, u) in rule.nodes().enumerate() {
        let w = rule.weights()[k].sqrt();
        for (c, &(i, j)) in pairs.iter().enumerate() {
            a[(k, c)] = w * if i == j { u[i] * u[i] } else { 2.0 * u[i] * u[j] };
        }
        b[k] = w / (r[k] * r[k]);
    }
    let sol = a.svd(true, true).solve(&b, 1e-14).map_err(|e| Error::Degenerate(e.to_string()))?;
    let mut q = DMatrix::zeros(n, n);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        q[(i, j)] = sol[c];
        q[(j, i)] = sol[c];
    }
    let chol = q.clone().cholesky().ok_or_else(|| Error::Degenerate("fitted form is not positive definite".into()))?;
    let m = chol.l().transpose();
    let mut residual = 0.0f64;
    for (k, u) in rule.nodes().enumerate() {
        let uq = DVector::from_column_slice(u);
        let fit = 1.0 / (uq.transpose() * &q * &uq)[(0, 0)].sqrt();
        residual = residual.max((fit / r[k] - 1.0).abs());
    }
    Ok(EllipsoidFit { q, m, residual })
}

/// ∫|∇f|^p for reports that compare with the Euclidean energy.
pub fn euclidean_energy(f: &TestFunction, p: f64, levels: &Levels) -> Result<f64> {
    crate::functions::gradient_norm(f, p, levels)
}

/// Σ w |v|^p over a sphere rule; used by tests of the conjugation.
pub fn sphere_power_samples(rule: &SphericalRule, m: &DMatrix<f64>, p: f64) -> Vec<f64> {
    rule.nodes().map(|u| abs_pow((m * DVector::from_column_slice(u)).norm(), p) / p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::random_sl;
    use crate::functions::{make, BumpShape, FamilySpec, MatrixSpec};
    use crate::quadrature::default_rule;

    fn bump(n: usize, p: f64, shape: BumpShape) -> TestFunction {
        make(&FamilySpec::Bump { n, p, radius: 1.0, smoothness: 3, shape, x0: None, matrix: MatrixSpec::Identity }).unwrap()
    }

    #[test]
    fn radial_energy_is_constant_times_norm() {
        let f = make(&FamilySpec::LogsobExtremal { n: 2, p: 2.0, sigma: 1.0, x0: None, matrix: MatrixSpec::Identity }).unwrap();
        let e = affine_energy(&f, 2.0).unwrap();
        let lv = Levels::default_for(2);
        let d = crate::functions::directional_norm(&f, &[1.0, 0.0], 2.0, &lv).unwrap();
        let expect = constants_for(2, 2.0).unwrap().c_np * sphere_area(2).powf(-0.5) * d;
        assert!((e.e_p / expect - 1.0).abs() < 1e-12);
        let g = euclidean_energy(&f, 2.0, &lv).unwrap();
        assert!(e.e_p <= g * (1.0 + 1e-12));
        assert!((e.e_p / g - 1.0).abs() < 1e-10);
    }

    #[test]
    fn z_matches_volume_of_l_f() {
        for f in [bump(2, 2.0, BumpShape::Cube), bump(2, 3.0, BumpShape::Ball)] {
            let e = affine_energy(&f, f.p).unwrap();
            let v = e.l_f().unwrap().volume().unwrap();
            assert!((e.z_p.powi(-2) / (2.0 * v) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cstar_homogeneity() {
        let e = affine_energy(&bump(2, 1.5, BumpShape::Cube), 1.5).unwrap();
        let cs = e.cstar().unwrap();
        assert_eq!(cs.eval(&[0.0, 0.0]), 0.0);
        let x = [0.3, -0.7];
        let y = [0.6, -1.4];
        assert!((cs.eval(&y) / cs.eval(&x) - 2f64.powf(1.5)).abs() < 1e-10);
    }

    #[test]
    fn cstar_midpoint_convexity() {
        let e = affine_energy(&bump(2, 3.0, BumpShape::Cube), 3.0).unwrap();
        let cs = e.cstar().unwrap();
        let pts = random_points(2, 300, 11);
        for w in pts.windows(2) {
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            assert!(cs.eval(&mid) <= 0.5 * (cs.eval(&w[0]) + cs.eval(&w[1])) + 1e-10);
        }
    }

    #[test]
    fn conjugate_of_power_pairs() {
        let rule = default_rule(2).unwrap();
        let p = 3.0;
        let q = 1.5;
        let phi = vec![1.0 / p; rule.len()];
        let y = [0.4, -1.1];
        let exact = norm(&y).powf(q) / q;
        assert!((conjugate_qhom(&rule, &phi, p, &y).unwrap() / exact - 1.0).abs() < 1e-5);
        let c1 = conjugate_qhom(&rule, &phi, p, &y).unwrap();
        let c2 = conjugate_qhom(&rule, &phi, p, &[0.8, -2.2]).unwrap();
        assert!((c2 / c1 - 2f64.powf(q)).abs() < 1e-8);

        // C(x) = |Mx|^2/2 has C*(v) = |M^{-T}v|^2/2
        let m = random_sl(&mut ChaCha8Rng::seed_from_u64(5), 2, 0.5);
        let mit = m.clone().try_inverse().unwrap().transpose();
        let phi = sphere_power_samples(&rule, &mit, 2.0);
        let f = |u: &[f64]| (&mit * DVector::from_column_slice(u)).norm_squared() / 2.0;
        for y in random_points(2, 10, 3) {
            let exact = (&m * DVector::from_column_slice(&y)).norm_squared() / 2.0;
            let grid = conjugate_qhom(&rule, &phi, 2.0, &y).unwrap();
            let fine = conjugate_qhom_refined(&f, &rule, &phi, 2.0, &y).unwrap();
            assert!((grid / exact - 1.0).abs() < 1e-4);
            assert!((fine / exact - 1.0).abs() < 1e-9, "{fine} vs {exact}");
        }
    }

    #[test]
    fn routes_agree_and_radial_gives_ball() {
        let e = affine_energy(&bump(2, 2.0, BumpShape::Cube), 2.0).unwrap();
        let b = body_k(&e, Route::Lemma36).unwrap();
        assert!(b.agreement <= 1e-4, "{}", b.agreement);
        let e = affine_energy(&bump(2, 2.0, BumpShape::Ball), 2.0).unwrap();
        let k = k_f_lemma36(&e).unwrap();
        let r = k.radial_on(&e.rule).unwrap();
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo - 1.0 <= 1e-6);
    }

    #[test]
    fn identities_on_bumps() {
        for shape in [BumpShape::Ball, BumpShape::Cube] {
            let f = bump(2, 2.0, shape);
            let rep = lemma_identities(&f, 2.0, false).unwrap();
            assert!(rep.gradient_integral.rel <= 1e-4, "{shape:?} {:?}", rep.gradient_integral);
            assert!(rep.z_identity.rel <= 1e-4);
            assert!(rep.cstar_centroid.rel <= 1e-5, "{shape:?} {:?}", rep.cstar_centroid);
        }
    }

    #[test]
    fn gaussian_k_f_is_an_ellipsoid() {
        let f = make(&FamilySpec::Gaussian { n: 2, p: 2.0, x0: None, matrix: MatrixSpec::RandomSl { seed: 4, spread: 0.5 } }).unwrap();
        let e = affine_energy(&f, 2.0).unwrap();
        let k = k_f_lemma36(&e).unwrap();
        let fit = fit_ellipsoid(&k, &e.rule).unwrap();
        assert!(fit.residual <= 1e-3, "{}", fit.residual);
    }
}
