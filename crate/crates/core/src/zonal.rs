//! Zonal transforms S(v) = ∫_{S^{n-1}} g(ξ) |⟨v, ξ⟩|^p dξ for sampled g.
//!
//! On the structured rules (circle for n = 2, Gauss–azimuth for n = 3) the
//! samples are expanded in Fourier series / real spherical harmonics and the
//! kernel is applied through its Funk–Hecke multipliers, so the transform is
//! exact for band-limited g. Scattered rules fall back to the direct sum.

use std::f64::consts::PI;

use crate::constants::gamma;
use crate::error::{Error, Result};
use crate::quadrature::{abs_pow, composite_gauss, dot, norm, Layout, SphericalRule};

#[derive(Debug, Clone)]
enum Kind {
    Fourier {
        // (re, im) of the premultiplied even coefficients, index k/2
        coef: Vec<(f64, f64)>,
    },
    Harmonic {
        tables: LegendreTables,
        coef_c: Vec<f64>,
        coef_s: Vec<f64>,
    },
    Direct {
        nodes: Vec<f64>,
        wg: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ZonalTransform {
    pub dim: usize,
    pub p: f64,
    kind: Kind,
}

/// I_k = ∫_0^{π/2} cos^p t cos(kt) dt for even k = 0, 2, .., 2(count-1).
pub fn cosine_moments(p: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut ik =
        PI.sqrt() * gamma((p + 1.0) / 2.0).unwrap() / (2.0 * gamma(p / 2.0 + 1.0).unwrap());
    for j in 0..count {
        out.push(ik);
        let k = 2.0 * j as f64;
        ik *= (p - k) / (p + k + 2.0);
    }
    out
}

/// c_l = ∫_0^1 t^p P_l(t) dt for even l = 0, 2, .., 2(count-1).
pub fn legendre_moments(p: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut cl = 1.0 / (p + 1.0);
    for j in 0..count {
        out.push(cl);
        let l = 2.0 * j as f64;
        cl *= (p - l) / (p + l + 3.0);
    }
    out
}

/// Recurrence tables for orthonormal associated Legendre functions,
/// ∫_{-1}^{1} P̃_lm(t)^2 dt = 1, stored m-major.
#[derive(Debug, Clone)]
pub struct LegendreTables {
    lmax: usize,
    offset: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
    diag: Vec<f64>,
}

impl LegendreTables {
    pub fn new(lmax: usize) -> Self {
        let mut offset = Vec::with_capacity(lmax + 2);
        let mut acc = 0;
        for m in 0..=lmax {
            offset.push(acc);
            acc += lmax + 1 - m;
        }
        offset.push(acc);
        let mut a = vec![0.0; acc];
        let mut b = vec![0.0; acc];
        for m in 0..=lmax {
            for l in m + 2..=lmax {
                let (lf, mf) = (l as f64, m as f64);
                let i = offset[m] + (l - m);
                a[i] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let l1 = lf - 1.0;
                b[i] = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            }
        }
        let diag = (0..=lmax)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    ((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt()
                }
            })
            .collect();
        LegendreTables {
            lmax,
            offset,
            a,
            b,
            diag,
        }
    }

    pub fn len(&self) -> usize {
        *self.offset.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, l: usize, m: usize) -> usize {
        self.offset[m] + (l - m)
    }

    /// Σ_m Σ_{l ≡ 0 mod 2} P̃_lm(t) (c_lm cos mφ + s_lm sin mφ) without
    /// materializing the table.
    pub fn synthesize(&self, t: f64, cos_phi: f64, sin_phi: f64, c: &[f64], s: &[f64]) -> f64 {
        let st = (1.0 - t * t).max(0.0).sqrt();
        let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
        let (mut cm, mut sm) = (1.0, 0.0);
        let mut acc = 0.0;
        for m in 0..=self.lmax {
            if m > 0 {
                pmm *= self.diag[m] * st;
            }
            let base = self.offset[m];
            let (mut a, mut b) = (0.0, 0.0);
            let mut prev2 = pmm;
            if m % 2 == 0 {
                a += c[base] * pmm;
                b += s[base] * pmm;
            }
            if m < self.lmax {
                let mut prev1 = (2.0 * m as f64 + 3.0).sqrt() * t * pmm;
                if (m + 1) % 2 == 0 {
                    a += c[base + 1] * prev1;
                    b += s[base + 1] * prev1;
                }
                let ra = &self.a[base..base + self.lmax + 1 - m];
                let rb = &self.b[base..base + self.lmax + 1 - m];
                let rc = &c[base..base + self.lmax + 1 - m];
                let rs = &s[base..base + self.lmax + 1 - m];
                for k in 2..ra.len() {
                    let cur = ra[k] * (t * prev1 - rb[k] * prev2);
                    if (m + k) % 2 == 0 {
                        a += rc[k] * cur;
                        b += rs[k] * cur;
                    }
                    prev2 = prev1;
                    prev1 = cur;
                }
            }
            acc += a * cm + b * sm;
            let nc = cm * cos_phi - sm * sin_phi;
            sm = sm * cos_phi + cm * sin_phi;
            cm = nc;
        }
        acc
    }

    /// Fills `out[index(l, m)] = P̃_lm(t)` for all 0 ≤ m ≤ l ≤ lmax.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (1.0 - t * t).max(0.0).sqrt();
        let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
        for m in 0..=self.lmax {
            if m > 0 {
                pmm *= self.diag[m] * s;
            }
            let base = self.offset[m];
            out[base] = pmm;
            if m < self.lmax {
                out[base + 1] = (2.0 * m as f64 + 3.0).sqrt() * t * pmm;
            }
            for l in m + 2..=self.lmax {
                let i = base + (l - m);
                out[i] = self.a[i] * (t * out[i - 1] - self.b[i] * out[i - 2]);
            }
        }
    }
}

impl ZonalTransform {
    /// Spectral transform where the rule layout allows it, direct otherwise.
    pub fn new(rule: &SphericalRule, samples: &[f64], p: f64) -> Result<Self> {
        check_inputs(rule, samples, p)?;
        match &rule.layout {
            Layout::Circle { count } => Ok(Self::fourier(samples, p, *count)),
            Layout::GaussAzimuth {
                cos_nodes,
                cos_weights,
                azimuths,
            } => Ok(Self::harmonic(
                samples,
                p,
                cos_nodes,
                cos_weights,
                *azimuths,
            )),
            Layout::Scattered => Self::direct(rule, samples, p),
        }
    }

    /// Plain quadrature sum Σ w_i g_i |⟨v, ξ_i⟩|^p.
    pub fn direct(rule: &SphericalRule, samples: &[f64], p: f64) -> Result<Self> {
        check_inputs(rule, samples, p)?;
        let nodes: Vec<f64> = rule.nodes().flatten().copied().collect();
        let wg = rule
            .weights()
            .iter()
            .zip(samples)
            .map(|(w, g)| w * g)
            .collect();
        Ok(ZonalTransform {
            dim: rule.dim,
            p,
            kind: Kind::Direct { nodes, wg },
        })
    }

    pub fn is_spectral(&self) -> bool {
        !matches!(self.kind, Kind::Direct { .. })
    }

    fn fourier(samples: &[f64], p: f64, count: usize) -> Self {
        let step = 2.0 * PI / count as f64;
        let kmax = (count / 2).saturating_sub(1);
        let nk = kmax / 2 + 1;
        let mu = cosine_moments(p, nk);
        let mut coef = Vec::with_capacity(nk);
        for (j, mu_j) in mu.iter().enumerate() {
            let k = 2 * j;
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &g) in samples.iter().enumerate() {
                let a = k as f64 * (i as f64 + 0.5) * step;
                re += g * a.cos();
                im -= g * a.sin();
            }
            // ĝ_k = (1/N) Σ g e^{-ikφ}; μ_k = 4 I_k; the k > 0 terms pair with -k
            let scale = 4.0 * mu_j / count as f64 * if k == 0 { 1.0 } else { 2.0 };
            coef.push((scale * re, scale * im));
        }
        ZonalTransform {
            dim: 2,
            p,
            kind: Kind::Fourier { coef },
        }
    }

    /// Circle transform of a function of the angle, with Fourier coefficients
    /// up to `kmax` taken by Gauss quadrature split at the kink angles `breaks`.
    pub fn fourier_from_fn(
        g: &dyn Fn(f64) -> f64,
        breaks: &[f64],
        p: f64,
        kmax: usize,
    ) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "zonal exponent must be >= 1, got {p}"
            )));
        }
        let panels = (kmax / 2).max(64);
        let mut cuts: Vec<f64> = (0..=panels)
            .map(|i| 2.0 * PI * i as f64 / panels as f64)
            .collect();
        cuts.extend(breaks.iter().map(|b| b.rem_euclid(2.0 * PI)));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let (t, w) = composite_gauss(&cuts, 12);
        let vals: Vec<f64> = t.iter().zip(&w).map(|(&a, &wt)| wt * g(a)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: vals.iter().position(|v| !v.is_finite()).unwrap(),
            });
        }
        let nk = kmax / 2 + 1;
        let mu = cosine_moments(p, nk);
        let mut re = vec![0.0; nk];
        let mut im = vec![0.0; nk];
        for (&a, &v) in t.iter().zip(&vals) {
            let (c2, s2) = ((2.0 * a).cos(), (2.0 * a).sin());
            let (mut ck, mut sk) = (1.0, 0.0);
            for j in 0..nk {
                re[j] += v * ck;
                im[j] -= v * sk;
                let nc = ck * c2 - sk * s2;
                sk = sk * c2 + ck * s2;
                ck = nc;
            }
        }
        let coef = (0..nk)
            .map(|j| {
                let scale = 4.0 * mu[j] / (2.0 * PI) * if j == 0 { 1.0 } else { 2.0 };
                (scale * re[j], scale * im[j])
            })
            .collect();
        Ok(ZonalTransform {
            dim: 2,
            p,
            kind: Kind::Fourier { coef },
        })
    }

    fn harmonic(samples: &[f64], p: f64, t: &[f64], wt: &[f64], azimuths: usize) -> Self {
        let rings = t.len();
        let lmax = rings - 1;
        let tables = LegendreTables::new(lmax);
        let step = 2.0 * PI / azimuths as f64;
        let mut cos_tab = vec![0.0; (lmax + 1) * azimuths];
        let mut sin_tab = vec![0.0; (lmax + 1) * azimuths];
        for m in 0..=lmax {
            for k in 0..azimuths {
                let a = m as f64 * (k as f64 + 0.5) * step;
                cos_tab[m * azimuths + k] = a.cos();
                sin_tab[m * azimuths + k] = a.sin();
            }
        }
        let mut ac = vec![0.0; tables.len()];
        let mut asn = vec![0.0; tables.len()];
        let mut plm = vec![0.0; tables.len()];
        let mut gc = vec![0.0; lmax + 1];
        let mut gs = vec![0.0; lmax + 1];
        for j in 0..rings {
            let ring = &samples[j * azimuths..(j + 1) * azimuths];
            for m in 0..=lmax {
                let (mut c, mut s) = (0.0, 0.0);
                let ct = &cos_tab[m * azimuths..(m + 1) * azimuths];
                let st = &sin_tab[m * azimuths..(m + 1) * azimuths];
                for k in 0..azimuths {
                    c += ring[k] * ct[k];
                    s += ring[k] * st[k];
                }
                gc[m] = c * step;
                gs[m] = s * step;
            }
            tables.eval(t[j], &mut plm);
            for m in 0..=lmax {
                for l in m..=lmax {
                    let i = tables.index(l, m);
                    ac[i] += wt[j] * plm[i] * gc[m];
                    asn[i] += wt[j] * plm[i] * gs[m];
                }
            }
        }
        let lam = legendre_moments(p, lmax / 2 + 1);
        let mut coef_c = vec![0.0; tables.len()];
        let mut coef_s = vec![0.0; tables.len()];
        for m in 0..=lmax {
            // analysis and synthesis each carry one azimuthal normalization
            let norm2 = if m == 0 { 1.0 / (2.0 * PI) } else { 1.0 / PI };
            for l in (m..=lmax).filter(|l| l % 2 == 0) {
                let i = tables.index(l, m);
                let lambda = 4.0 * PI * lam[l / 2];
                coef_c[i] = lambda * norm2 * ac[i];
                coef_s[i] = lambda * norm2 * asn[i];
            }
        }
        ZonalTransform {
            dim: 3,
            p,
            kind: Kind::Harmonic {
                tables,
                coef_c,
                coef_s,
            },
        }
    }

    /// S(v); homogeneous of degree p in v.
    pub fn eval(&self, v: &[f64]) -> f64 {
        match &self.kind {
            Kind::Direct { nodes, wg } => {
                let n = self.dim;
                let mut s = 0.0;
                for (x, &w) in nodes.chunks_exact(n).zip(wg) {
                    s += w * abs_pow(dot(x, v), self.p);
                }
                s
            }
            Kind::Fourier { coef } => {
                let r = norm(v);
                if r == 0.0 {
                    return 0.0;
                }
                let (c2, s2) = {
                    let (c, s) = (v[0] / r, v[1] / r);
                    (c * c - s * s, 2.0 * c * s)
                };
                let (mut ck, mut sk) = (1.0, 0.0);
                let mut acc = 0.0;
                for &(re, im) in coef {
                    acc += re * ck - im * sk;
                    let nc = ck * c2 - sk * s2;
                    sk = sk * c2 + ck * s2;
                    ck = nc;
                }
                abs_pow(r, self.p) * acc
            }
            Kind::Harmonic {
                tables,
                coef_c,
                coef_s,
            } => {
                let r = norm(v);
                if r == 0.0 {
                    return 0.0;
                }
                let t = (v[2] / r).clamp(-1.0, 1.0);
                let rho = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let (c1, s1) = if rho > 0.0 {
                    (v[0] / rho, v[1] / rho)
                } else {
                    (1.0, 0.0)
                };
                let acc = tables.synthesize(t, c1, s1, coef_c, coef_s);
                abs_pow(r, self.p) * acc
            }
        }
    }
}

fn check_inputs(rule: &SphericalRule, samples: &[f64], p: f64) -> Result<()> {
    if samples.len() != rule.len() {
        return Err(Error::InvalidParameter(format!(
            "zonal transform needs {} samples, got {}",
            rule.len(),
            samples.len()
        )));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "exponent p = {p} must be >= 1"
        )));
    }
    if let Some(i) = samples.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{composite_gauss, gauss_legendre, sphere_rule};

    #[test]
    fn cosine_moments_match_quadrature() {
        let (x, w) = composite_gauss(&[0.0, 0.5, 1.0, 1.3, 1.5, PI / 2.0], 60);
        for p in [1.0, 1.5, 2.5, 3.0] {
            let m = cosine_moments(p, 6);
            for (j, mj) in m.iter().enumerate() {
                let k = 2.0 * j as f64;
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(t, w)| w * t.cos().powf(p) * (k * t).cos())
                    .sum();
                assert!((q - mj).abs() < 1e-9, "p={p} k={k}: {q} vs {mj}");
            }
        }
    }

    #[test]
    fn legendre_moments_match_quadrature() {
        let (x, w) = composite_gauss(&[0.0, 0.05, 0.2, 0.5, 1.0], 60);
        for p in [1.0, 1.5, 3.0] {
            let c = legendre_moments(p, 5);
            for (j, cj) in c.iter().enumerate() {
                let l = 2 * j;
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &w)| {
                        let (mut p0, mut p1) = (1.0, t);
                        if l == 0 {
                            return w * t.powf(p);
                        }
                        for k in 2..=l {
                            let kf = k as f64;
                            let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                            p0 = p1;
                            p1 = p2;
                        }
                        w * t.powf(p) * p1
                    })
                    .sum();
                assert!((q - cj).abs() < 1e-9, "p={p} l={l}");
            }
        }
    }

    #[test]
    fn associated_legendre_orthonormal() {
        let lmax = 20;
        let tab = LegendreTables::new(lmax);
        let (t, w) = gauss_legendre(32);
        let mut vals = vec![vec![0.0; tab.len()]; t.len()];
        for (j, &tj) in t.iter().enumerate() {
            tab.eval(tj, &mut vals[j]);
        }
        for m in 0..=lmax {
            for l1 in m..=lmax {
                for l2 in m..=lmax {
                    let (i1, i2) = (tab.index(l1, m), tab.index(l2, m));
                    let ip: f64 = (0..t.len()).map(|j| w[j] * vals[j][i1] * vals[j][i2]).sum();
                    let expect = if l1 == l2 { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-12, "l1={l1} l2={l2} m={m}");
                }
            }
        }
    }

    // Oracle: a rule with its pole at v and separate Gauss–Legendre panels on
    // each side of the kink, applied to the closed-form density.
    fn split_oracle(g: &dyn Fn(&[f64]) -> f64, v: &[f64], p: f64) -> f64 {
        let r = norm(v);
        let e3: Vec<f64> = v.iter().map(|x| x / r).collect();
        let helper = if e3[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let mut e1: Vec<f64> = helper
            .iter()
            .zip(&e3)
            .map(|(h, e)| h - dot(&helper, &e3) * e)
            .collect();
        let n1 = norm(&e1);
        e1.iter_mut().for_each(|x| *x /= n1);
        let e2 = [
            e3[1] * e1[2] - e3[2] * e1[1],
            e3[2] * e1[0] - e3[0] * e1[2],
            e3[0] * e1[1] - e3[1] * e1[0],
        ];
        let (t, wt) = composite_gauss(&[-1.0, -0.5, 0.0, 0.5, 1.0], 40);
        let m = 160;
        let step = 2.0 * PI / m as f64;
        let mut acc = 0.0;
        for (&tj, &wj) in t.iter().zip(&wt) {
            let s = (1.0 - tj * tj).sqrt();
            for k in 0..m {
                let phi = k as f64 * step;
                let x: Vec<f64> = (0..3)
                    .map(|d| s * phi.cos() * e1[d] + s * phi.sin() * e2[d] + tj * e3[d])
                    .collect();
                acc += wj * step * g(&x) * tj.abs().powf(p);
            }
        }
        acc * r.powf(p)
    }

    #[test]
    fn harmonic_transform_matches_split_oracle() {
        let rule = sphere_rule(3, 48).unwrap();
        let densities: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![
            Box::new(|_x: &[f64]| 1.0),
            Box::new(|x: &[f64]| 1.0 + 0.3 * x[0] + 0.2 * x[1] * x[2] - 0.1 * x[2].powi(3)),
            // radial function of an ellipsoid raised to n + p
            Box::new(|x: &[f64]| {
                let q = (x[0] / 1.5).powi(2)
                    + (x[1] / 0.8).powi(2)
                    + (x[2] * 1.2).powi(2)
                    + 0.3 * x[0] * x[1];
                q.powf(-(3.0 + 1.5) / 2.0)
            }),
        ];
        for p in [1.0, 1.5, 3.0] {
            for g in &densities {
                let samples: Vec<f64> = rule.nodes().map(|x| g(x)).collect();
                let zt = ZonalTransform::new(&rule, &samples, p).unwrap();
                assert!(zt.is_spectral());
                for v in [
                    [0.0, 0.0, 1.0],
                    [0.3, -0.4, 0.2],
                    [1.0, 1.0, -1.0],
                    [-0.7, 0.01, 0.0],
                ] {
                    let s = zt.eval(&v);
                    let o = split_oracle(g.as_ref(), &v, p);
                    assert!((s / o - 1.0).abs() < 1e-8, "p={p} v={v:?}: {s} vs {o}");
                }
            }
        }
    }

    #[test]
    fn fourier_transform_matches_oracle() {
        let rule = sphere_rule(2, 256).unwrap();
        let g = |phi: f64| 1.0 / (1.2 + 0.5 * (2.0 * phi).cos() + 0.3 * phi.sin()).powf(2.0);
        let samples: Vec<f64> = rule.nodes().map(|x| g(x[1].atan2(x[0]))).collect();
        for p in [1.0, 1.5, 3.0] {
            let zt = ZonalTransform::new(&rule, &samples, p).unwrap();
            for psi in [0.0, 0.4, 2.0, -2.5] {
                let v = [2.0 * f64::cos(psi), 2.0 * f64::sin(psi)];
                // split at the two kinks ψ ± π/2
                let a = psi - PI / 2.0;
                let (x, w) =
                    composite_gauss(&[a, a + PI / 2.0, a + PI, a + 1.5 * PI, a + 2.0 * PI], 200);
                let o: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&t, &w)| w * g(t) * (2.0 * (t - psi).cos()).abs().powf(p))
                    .sum();
                let s = zt.eval(&v);
                assert!((s / o - 1.0).abs() < 1e-10, "p={p} psi={psi}: {s} vs {o}");
            }
        }
    }

    #[test]
    fn kinked_fourier_matches_oracle() {
        // density with kinks at 0.3 and 2.0
        let g = |phi: f64| 1.0 + 0.4 * (phi - 0.3).sin().abs() + 0.2 * (phi - 2.0).cos().abs();
        let zt = ZonalTransform::fourier_from_fn(
            &g,
            &[0.3, 0.3 + PI, 2.0 + PI / 2.0, 2.0 - PI / 2.0],
            1.5,
            2048,
        )
        .unwrap();
        for psi in [0.1, 1.3, -2.0] {
            let v = [f64::cos(psi), f64::sin(psi)];
            let a = psi - PI / 2.0;
            let mut br = vec![a, a + PI / 2.0, a + PI, a + 1.5 * PI, a + 2.0 * PI];
            for k in [
                0.3,
                0.3 + PI,
                2.0 + PI / 2.0,
                2.0 - PI / 2.0,
                2.0 + 1.5 * PI,
            ] {
                let t = a + (k - a).rem_euclid(2.0 * PI);
                br.push(t);
            }
            br.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let (x, w) = composite_gauss(&br, 200);
            let o: f64 = x
                .iter()
                .zip(&w)
                .map(|(&t, &w)| w * g(t) * (t - psi).cos().abs().powf(1.5))
                .sum();
            assert!(
                (zt.eval(&v) / o - 1.0).abs() < 1e-7,
                "{} vs {o}",
                zt.eval(&v)
            );
        }
    }

    #[test]
    fn direct_and_spectral_agree_roughly() {
        let rule = sphere_rule(3, 40).unwrap();
        let samples: Vec<f64> = rule.nodes().map(|x| 2.0 + x[0] * x[1]).collect();
        let a = ZonalTransform::new(&rule, &samples, 2.5).unwrap();
        let b = ZonalTransform::direct(&rule, &samples, 2.5).unwrap();
        let v = [0.2, 0.5, -0.3];
        assert!((a.eval(&v) / b.eval(&v) - 1.0).abs() < 1e-5);
        assert_eq!(a.eval(&[0.0; 3]), 0.0);
    }

    #[test]
    fn ball_density_reproduces_beta_moment() {
        for (n, level) in [(2, 64), (3, 24)] {
            let rule = sphere_rule(n, level).unwrap();
            let zt = ZonalTransform::new(&rule, &vec![1.0; rule.len()], 1.0).unwrap();
            let nf = n as f64;
            let exact = 2.0 * PI.powf((nf - 1.0) / 2.0) * gamma(1.0).unwrap()
                / gamma((nf + 1.0) / 2.0).unwrap();
            let mut v = vec![0.0; n];
            v[0] = 0.6;
            v[n - 1] += 0.8;
            assert!((zt.eval(&v) / exact - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let rule = sphere_rule(2, 8).unwrap();
        assert!(ZonalTransform::new(&rule, &[1.0; 3], 2.0).is_err());
        assert!(ZonalTransform::new(&rule, &vec![1.0; rule.len()], 0.5).is_err());
        let mut s = vec![1.0; rule.len()];
        s[2] = f64::INFINITY;
        assert!(matches!(
            ZonalTransform::new(&rule, &s, 2.0),
            Err(Error::NonFinite { index: 2 })
        ));
    }
}
