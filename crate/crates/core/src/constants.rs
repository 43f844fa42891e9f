//! Closed-form constants: unit-ball volumes, the centroid-body and energy
//! normalizations, and the sharp log-Sobolev, Sobolev and Gagliardo–Nirenberg
//! constants.
//!
//! Everything here is a pure function of `(n, p)` (and `α` for the
//! Gagliardo–Nirenberg family). The Gamma function is evaluated with a
//! fixed-coefficient Lanczos sum so that no external special-function
//! library is needed.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;

// Godfrey's coefficients for g = 607/128, relative error below 2e-15 on the
// positive half line.
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_923_517,
    -59.597_960_355_475_491_248,
    14.136_097_974_741_747_174,
    -0.491_913_816_097_620_199_78,
    0.339_946_499_848_118_886_99e-4,
    0.465_236_289_270_485_756_65e-4,
    -0.983_744_753_048_795_646_77e-4,
    0.158_088_703_224_912_488_84e-3,
    -0.210_264_441_724_104_883_19e-3,
    0.217_439_618_115_212_643_20e-3,
    -0.164_318_106_536_763_890_22e-3,
    0.844_182_239_838_527_432_93e-4,
    -0.261_908_384_015_814_086_70e-4,
    0.368_991_826_595_316_227_04e-5,
];

fn lanczos_sum(z: f64) -> f64 {
    LANCZOS_COEFFS
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_COEFFS[0], |acc, (i, &c)| acc + c / (z + i as f64))
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum on its accurate range.
        return Ok(gamma(x + 1.0)? / x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // Split the power so t^(z + 1/2) does not overflow before e^{-t} is applied.
    let half = t.powf(0.5 * (z + 0.5));
    Ok((2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(z))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        return Ok(ln_gamma(x + 1.0)? - x.ln());
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// Euler Beta function B(a, b) for positive arguments.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    Ok((ln_gamma(a)? + ln_gamma(b)? - ln_gamma(a + b)?).exp())
}

/// Volume ω_s = π^{s/2} / Γ(s/2 + 1) of the unit ball, extended to real s ≥ 0.
pub fn ball_volume(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!(
            "ball volume index must be >= 0, got {s}"
        )));
    }
    Ok((0.5 * s * PI.ln() - ln_gamma(0.5 * s + 1.0)?).exp())
}

/// Total (unnormalized) surface measure n·ω_n of S^{n-1}.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * ball_volume(n as f64).expect("n >= 0")
}

/// Hölder conjugate q with 1/p + 1/q = 1.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// ℓ_q = q^{-p/q} p^{-1}, the maximum of t^{1/q} - t over t ≥ 0.
pub fn ell_q(p: f64) -> f64 {
    let q = conjugate_exponent(p);
    q.powf(-p / q) / p
}

/// a_1 = ω_{n+p} / (ω_2 ω_n ω_{p-1}); defined for p ≥ 1 (Γ_p needs p = 1 too).
pub fn centroid_a1(n: usize, p: f64) -> Result<f64> {
    if n == 0 || !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "centroid normalization needs n >= 1, p >= 1 (n={n}, p={p})"
        )));
    }
    let nf = n as f64;
    Ok(ball_volume(nf + p)? / (ball_volume(2.0)? * ball_volume(nf)? * ball_volume(p - 1.0)?))
}

fn check_np(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent p must be a finite real > 1, got {p}"
        )));
    }
    Ok(())
}

/// Every scalar attached to a fixed pair (n, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    /// ω_k for the indices the formulas use: 2, n, p-1, n+p-2, n+p.
    pub omega: Vec<(f64, f64)>,
    /// Normalization of Γ_p so that Γ_p B = B.
    pub a1: f64,
    /// Constant of the volume inequality for K_f.
    pub a2: f64,
    pub ell_q: f64,
    /// Normalization of the affine energy E_p.
    pub c_np: f64,
    /// Sharp Euclidean L_p log-Sobolev constant.
    pub l_np: f64,
    /// Constant of the L_∞ log-Sobolev inequality.
    pub k_n: f64,
    /// Normalization of E_∞.
    pub c_n_inf: f64,
    /// Sharp Sobolev constant; only defined for p < n.
    pub s_np: Option<f64>,
}

impl ConstantSet {
    /// Looks up a stored ω_k; falls back to the Gamma formula.
    pub fn omega(&self, k: f64) -> f64 {
        self.omega
            .iter()
            .find(|(key, _)| (key - k).abs() < 1e-14)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| ball_volume(k).expect("non-negative index"))
    }

    pub fn omega_n(&self) -> f64 {
        self.omega(self.n as f64)
    }

    /// c_{n,p}^p · a_2^{-1} · ω_n^{-p/n} · ℓ_q, which equals one.
    pub fn closing_identity(&self) -> f64 {
        let n = self.n as f64;
        self.c_np.powf(self.p) / self.a2 * self.omega_n().powf(-self.p / n) * self.ell_q
    }
}

pub fn constants_for(n: usize, p: f64) -> Result<ConstantSet> {
    check_np(n, p)?;
    let nf = n as f64;
    let q = conjugate_exponent(p);
    let mut omega = Vec::new();
    for k in [2.0, nf, p - 1.0, nf + p - 2.0, nf + p] {
        if !omega
            .iter()
            .any(|(key, _): &(f64, f64)| (key - k).abs() < 1e-14)
        {
            omega.push((k, ball_volume(k)?));
        }
    }
    let w = |k: f64| ball_volume(k).expect("non-negative index");
    let omega_n = w(nf);

    let a1 = w(nf + p) / (w(2.0) * omega_n * w(p - 1.0));
    let lq = ell_q(p);
    let a2 = lq * nf.powf((nf + p) / nf) / (a1 * (nf + p));
    let area = nf * omega_n;
    let c_np = area.powf(1.0 / nf) * (area * w(p - 1.0) / (2.0 * w(nf + p - 2.0))).powf(1.0 / p);

    let l_np = (p / nf)
        * ((p - 1.0) / std::f64::consts::E).powf(p - 1.0)
        * PI.powf(-p / 2.0)
        * ((ln_gamma(nf / 2.0 + 1.0)? - ln_gamma(nf * (p - 1.0) / p + 1.0)?) * p / nf).exp();

    let k_n = (-(ln_gamma(nf + 1.0)? + omega_n.ln()) / nf).exp();
    let c_n_inf = area.powf(1.0 / nf);

    let s_np = if p < nf {
        let log_ratio = ln_gamma(nf / 2.0 + 1.0)? + ln_gamma(nf)?
            - ln_gamma(nf - nf / p + 1.0)?
            - ln_gamma(nf / p)?;
        Some(
            PI.powf(-0.5)
                * nf.powf(-1.0 / p)
                * ((p - 1.0) / (nf - p)).powf(1.0 - 1.0 / p)
                * (log_ratio / nf).exp(),
        )
    } else {
        None
    };

    Ok(ConstantSet {
        n,
        p,
        q,
        omega,
        a1,
        a2,
        ell_q: lq,
        c_np,
        l_np,
        k_n,
        c_n_inf,
        s_np,
    })
}

/// Constants of the affine Gagliardo–Nirenberg family r = αp, m = α(p−1)+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnConstantSet {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub m: f64,
    pub r: f64,
    pub theta: f64,
    /// σ_{α,p} for C(x) = |x|^q, i.e. vol{C ≤ 1} = ω_n.
    pub sigma_alpha_p: f64,
    pub c1: f64,
    pub c2: f64,
    /// G_{n,p,α} = c2^θ.
    pub g_npa: f64,
}

impl GnConstantSet {
    /// σ_{α,p} for a general q-homogeneous C with vol{C ≤ 1} = `volume`.
    pub fn sigma_for_volume(&self, volume: f64) -> Result<f64> {
        sigma_alpha_p(self.n, self.p, self.alpha, volume)
    }

    /// c2 recomputed as a_2^{1/p} / (c1 · c_{n,p}); agrees with the closed form.
    pub fn c2_from_c1(&self) -> Result<f64> {
        let base = constants_for(self.n, self.p)?;
        Ok(base.a2.powf(1.0 / self.p) / (self.c1 * base.c_np))
    }
}

pub fn gn_theta(n: f64, p: f64, m: f64, r: f64) -> f64 {
    n * p * (r - m) / (r * (m * (p - n) + n * p))
}

fn sigma_alpha_p(n: usize, p: f64, alpha: f64, volume: f64) -> Result<f64> {
    let nf = n as f64;
    let q = conjugate_exponent(p);
    let big_p = p * alpha / (alpha - 1.0);
    let log_base = q.ln() + (nf / q) * (alpha - 1.0).ln() + ln_gamma(big_p)?
        - nf.ln()
        - volume.ln()
        - ln_gamma(nf / q)?
        - ln_gamma(big_p - nf / q)?;
    let exponent = -(1.0 - alpha) * q / (alpha * nf - nf - alpha * p * q);
    Ok((log_base * exponent).exp())
}

pub fn gn_constants_for(n: usize, p: f64, alpha: f64) -> Result<GnConstantSet> {
    check_np(n, p)?;
    let nf = n as f64;
    if !(p < nf) {
        return Err(Error::InvalidParameter(format!(
            "Gagliardo–Nirenberg family needs 1 < p < n, got p = {p}, n = {n}"
        )));
    }
    let upper = nf / (nf - p);
    if !(alpha > 1.0 && alpha < upper) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (1, {upper}), got {alpha}"
        )));
    }
    let q = conjugate_exponent(p);
    let m = alpha * (p - 1.0) + 1.0;
    let r = alpha * p;
    let theta = gn_theta(nf, p, m, r);
    let big_p = p * alpha / (alpha - 1.0);
    let shifted = nf * (1.0 / p - 1.0) + big_p;

    // c1^θ: the displayed G_C^{-1} with the vol{C ≤ 1} factor removed.
    let log_c1_theta = -theta * (alpha - 1.0).ln() + (theta / p) * (nf / p).ln()
        - ln_gamma(shifted)? / (alpha * p)
        + theta * ((big_p - 1.0) / nf - 1.0) * ln_gamma(big_p)?
        + (theta + alpha * theta * p / (nf - alpha * nf)) * ln_gamma(big_p - 1.0)?
        + theta * (big_p / nf + 1.0 / p - 1.0) * ln_gamma(shifted - 1.0)?
        + (theta / nf) * ln_gamma(nf - nf / p + 1.0)?;
    let c1 = (log_c1_theta / theta).exp();

    let e1 = (alpha * nf - nf - alpha * p) / ((alpha - 1.0) * nf);
    let e2 = (alpha * nf - nf + alpha * p * p) / ((alpha - 1.0) * nf * p);
    let denominator = (p - 1.0) * (nf - alpha * nf + alpha * p) + p;
    let log_gamma_ratio = ln_gamma(nf - nf / p + 1.0)? + ln_gamma(shifted)?
        - ln_gamma(nf / 2.0 + 1.0)?
        - ln_gamma(big_p)?;
    let log_c2 = 2.0 * (alpha - 1.0).ln() + p.ln() - q.ln() / q - nf.ln() / p
        + e1 * (big_p - 1.0).ln()
        + e2 * (shifted - 1.0).ln()
        - 0.5 * PI.ln()
        - denominator.ln()
        - log_gamma_ratio / nf;
    let c2 = log_c2.exp();

    Ok(GnConstantSet {
        n,
        p,
        alpha,
        m,
        r,
        theta,
        sigma_alpha_p: sigma_alpha_p(n, p, alpha, ball_volume(nf)?)?,
        c1,
        c2,
        g_npa: c2.powf(theta),
    })
}

/// Sharp constant of the log-Sobolev inequality with a general cost C:
/// p^{p+1} / (n e^{p-1} (∫e^{-C})^{p/n}).
pub fn gentil_constant(n: usize, p: f64, exp_c_integral: f64) -> f64 {
    let nf = n as f64;
    p.powf(p + 1.0) / (nf * (p - 1.0).exp() * exp_c_integral.powf(p / nf))
}
