//! Star and convex bodies: radial, gauge and support functions, polars,
//! volumes, linear images, L_p centroid bodies and seeded random bodies.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{ball_volume, centroid_a1, gamma};
use crate::error::{Error, Result};
use crate::parallel::try_par_map;
use crate::quadrature::{
    cached_sphere_rule, default_rule, dot, norm, CompensatedSum, Layout, SphericalRule,
};
use crate::zonal::ZonalTransform;

/// Support function of the form h(v) = (scale · S(v))^{1/p}, S a zonal transform.
#[derive(Debug, Clone)]
pub struct SupportModel {
    pub transform: Arc<ZonalTransform>,
    pub scale: f64,
}

impl SupportModel {
    pub fn p(&self) -> f64 {
        self.transform.p
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        (self.scale * self.transform.eval(v))
            .max(0.0)
            .powf(1.0 / self.transform.p)
    }
}

/// Exact evaluators behind a sampled body.
#[derive(Debug, Clone)]
pub enum Exact {
    Support(SupportModel),
    Polar(Arc<ConvexBody>),
    Linear {
        base: Arc<ConvexBody>,
        m: DMatrix<f64>,
        m_inv: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct RadialSamples {
    pub rule: Arc<SphericalRule>,
    pub radial: Vec<f64>,
    pub support: Option<Vec<f64>>,
    pub exact: Option<Exact>,
}

#[derive(Debug, Clone)]
pub enum Repr {
    /// A·B^n.
    Ellipsoid {
        a: DMatrix<f64>,
    },
    /// {x : ⟨x, v_j⟩ ≤ 1 for all j}; `vertices` is derived.
    Halfspaces {
        normals: Vec<Vec<f64>>,
        vertices: Vec<Vec<f64>>,
    },
    /// conv{±w_j}; `polar_vertices` are the vertices of {|⟨x, w_j⟩| ≤ 1}.
    SymmetricHull {
        vertices: Vec<Vec<f64>>,
        polar_vertices: Vec<Vec<f64>>,
    },
    /// A·{‖x‖_s ≤ 1}, 1 < s < ∞.
    LqBallImage {
        s: f64,
        a: DMatrix<f64>,
    },
    RadialSamples(RadialSamples),
}

#[derive(Debug, Clone)]
pub struct ConvexBody {
    dim: usize,
    repr: Repr,
}

fn check_matrix(a: &DMatrix<f64>, n: usize) -> Result<()> {
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "expected a {n}x{n} matrix"
        )));
    }
    let det = a.determinant();
    if !(det.abs() > 1e-14) || !det.is_finite() {
        return Err(Error::InvalidParameter("matrix must be invertible".into()));
    }
    Ok(())
}

fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

fn mat_t_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * x[i]).sum())
        .collect()
}

fn unit(u: &[f64]) -> Result<(Vec<f64>, f64)> {
    let r = norm(u);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(
            "direction must be a non-zero finite vector".into(),
        ));
    }
    Ok((u.iter().map(|x| x / r).collect(), r))
}

fn lq_norm(x: &[f64], s: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(s)).sum::<f64>().powf(1.0 / s)
}

fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Vertices of {x : ⟨x, a_j⟩ ≤ 1}, assuming the set is bounded.
pub fn enumerate_vertices(normals: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for_each_combination(normals.len(), n, |idx| {
        let a = DMatrix::from_fn(n, n, |i, j| normals[idx[i]][j]);
        let scale: f64 = idx.iter().map(|&i| norm(&normals[i])).product();
        if a.determinant().abs() <= 1e-12 * scale {
            return;
        }
        let Some(x) = a.lu().solve(&DVector::from_element(n, 1.0)) else {
            return;
        };
        let x: Vec<f64> = x.iter().copied().collect();
        let tol = 1e-9 * (1.0 + norm(&x));
        if normals.iter().all(|v| dot(v, &x) <= 1.0 + tol)
            && !out
                .iter()
                .any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= tol))
        {
            out.push(x);
        }
    });
    out
}

/// Exact volume of {⟨x, a_j⟩ ≤ 1} from its vertices (n = 2, 3).
fn polytope_volume(normals: &[Vec<f64>], vertices: &[Vec<f64>], n: usize) -> Option<f64> {
    if !(n == 2 || n == 3) {
        return None;
    }
    let mut total = CompensatedSum::new();
    for a in normals {
        let an = norm(a);
        let on: Vec<&Vec<f64>> = vertices
            .iter()
            .filter(|x| (dot(a, x) - 1.0).abs() <= 1e-9 * (1.0 + norm(x)))
            .collect();
        if on.len() < n {
            continue;
        }
        let area = if n == 2 {
            let t = [-a[1] / an, a[0] / an];
            let proj: Vec<f64> = on.iter().map(|x| dot(x, &t)).collect();
            let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        } else {
            let nrm: Vec<f64> = a.iter().map(|x| x / an).collect();
            let basis = tangent_basis(&nrm);
            let c: Vec<f64> = (0..3)
                .map(|d| on.iter().map(|x| x[d]).sum::<f64>() / on.len() as f64)
                .collect();
            let mut pts: Vec<(f64, f64)> = on
                .iter()
                .map(|x| {
                    let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
                    (dot(&d, &basis[0]), dot(&d, &basis[1]))
                })
                .collect();
            pts.sort_by(|p, q| p.1.atan2(p.0).partial_cmp(&q.1.atan2(q.0)).unwrap());
            let mut s = 0.0;
            for i in 0..pts.len() {
                let (x0, y0) = pts[i];
                let (x1, y1) = pts[(i + 1) % pts.len()];
                s += x0 * y1 - x1 * y0;
            }
            0.5 * s.abs()
        };
        total.add(area / (n as f64 * an));
    }
    Some(total.value())
}

/// Orthonormal basis of u^⊥ (u unit).
pub fn tangent_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let skip = (0..n)
        .max_by(|&i, &j| u[i].abs().partial_cmp(&u[j].abs()).unwrap())
        .unwrap();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in (0..n).filter(|&k| k != skip) {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let d = dot(&e, u);
        e.iter_mut().zip(u).for_each(|(x, y)| *x -= d * y);
        for b in &basis {
            let d = dot(&e, b);
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let r = norm(&e);
        e.iter_mut().for_each(|x| *x /= r);
        basis.push(e);
    }
    basis
}

/// min over grid nodes ξ with ⟨u, ξ⟩ > 0 of values_ξ / ⟨u, ξ⟩, with its node.
pub fn grid_envelope(rule: &SphericalRule, values: &[f64], u: &[f64]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, x) in rule.nodes().enumerate() {
        let d = dot(x, u);
        if d > 1e-12 {
            let v = values[i] / d;
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, i));
            }
        }
    }
    best
}

/// Halfspace envelope r(u) = min_{⟨u,ξ⟩>0} h(ξ)/⟨u, ξ⟩ at every rule node.
pub fn support_to_radial(rule: &SphericalRule, support: &[f64]) -> Result<Vec<f64>> {
    if support.len() != rule.len() {
        return Err(Error::InvalidParameter(
            "one support value per node required".into(),
        ));
    }
    if let Some(i) = support.iter().position(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::Domain(format!(
            "support value at node {i} must be positive"
        )));
    }
    try_par_map(rule.len(), |i| {
        grid_envelope(rule, support, rule.node(i))
            .map(|(v, _)| v)
            .ok_or_else(|| Error::Unbounded("empty positive cone".into()))
    })
}

/// min over the affine hyperplane {⟨u, v⟩ = 1} of a convex 1-homogeneous F,
/// started from the grid envelope and polished by a damped Newton iteration.
pub fn envelope_min(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    u: &[f64],
    rule: &SphericalRule,
    grid_values: &[f64],
) -> Result<f64> {
    let (u, _) = unit(u)?;
    let keep = keep_count(u.len());
    let mut best = Vec::with_capacity(keep + 1);
    for (i, x) in rule.nodes().enumerate() {
        offer(&mut best, keep, grid_values[i], dot(x, &u), i);
    }
    polish(f, &u, rule, &best)
}

fn keep_count(n: usize) -> usize {
    if n == 2 {
        6
    } else {
        14
    }
}

/// Inserts the plane value values_ξ/⟨u,ξ⟩ into the sorted list of the `keep` smallest.
fn offer(best: &mut Vec<(f64, usize)>, keep: usize, value: f64, d: f64, i: usize) {
    if d > 1e-12 {
        let v = value / d;
        if best.len() < keep || v < best[best.len() - 1].0 {
            let at = best.partition_point(|b| b.0 <= v);
            best.insert(at, (v, i));
            best.truncate(keep);
        }
    }
}

/// Grid nodes grouped into angular cells, so envelope scans can skip cells
/// whose plane values are provably above the current candidates.
pub struct EnvelopeIndex<'a> {
    rule: &'a SphericalRule,
    values: &'a [f64],
    cells: Vec<Cell>,
}

struct Cell {
    center: Vec<f64>,
    radius: f64,
    vmin: f64,
    members: Vec<usize>,
}

impl<'a> EnvelopeIndex<'a> {
    pub fn new(rule: &'a SphericalRule, values: &'a [f64]) -> Result<Self> {
        let coarse = cached_sphere_rule(rule.dim, if rule.dim == 2 { 16 } else { 6 })?;
        let mut cells: Vec<Cell> = coarse
            .nodes()
            .map(|c| Cell { center: c.to_vec(), radius: 0.0, vmin: f64::INFINITY, members: Vec::new() })
            .collect();
        for (i, x) in rule.nodes().enumerate() {
            let (c, d) = cells
                .iter()
                .enumerate()
                .map(|(j, c)| (j, dot(&c.center, x)))
                .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let cell = &mut cells[c];
            cell.radius = cell.radius.max(d.clamp(-1.0, 1.0).acos());
            cell.vmin = cell.vmin.min(values[i]);
            cell.members.push(i);
        }
        cells.retain(|c| !c.members.is_empty());
        Ok(EnvelopeIndex { rule, values, cells })
    }

    /// Same result as `envelope_min` on the indexed grid values.
    pub fn envelope_min(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync), u: &[f64]) -> Result<f64> {
        let (u, _) = unit(u)?;
        let keep = keep_count(u.len());
        let mut order: Vec<(f64, usize)> = self
            .cells
            .iter()
            .enumerate()
            .map(|(j, c)| (dot(&c.center, &u).clamp(-1.0, 1.0).acos(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(keep + 1);
        for (alpha, j) in order {
            let cell = &self.cells[j];
            let gap = alpha - cell.radius;
            if gap >= std::f64::consts::FRAC_PI_2 {
                continue;
            }
            if best.len() == keep {
                // every member has ⟨u,ξ⟩ ≤ cos(gap) and value ≥ vmin
                let dmax = if gap <= 0.0 { 1.0 } else { gap.cos() };
                if cell.vmin >= best[keep - 1].0 * dmax {
                    continue;
                }
            }
            for &i in &cell.members {
                offer(&mut best, keep, self.values[i], dot(self.rule.node(i), &u), i);
            }
        }
        polish(f, &u, self.rule, &best)
    }
}

fn polish(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    u: &[f64],
    rule: &SphericalRule,
    best: &[(f64, usize)],
) -> Result<f64> {
    let u = u.to_vec();
    let m = u.len() - 1;
    let Some(&(grid, i)) = best.first() else {
        return Err(Error::Unbounded("empty positive cone".into()));
    };
    let basis = tangent_basis(&u);
    let plane = |j: usize| -> Vec<f64> {
        let x = rule.node(j);
        let d = dot(x, &u);
        basis.iter().map(|b| dot(b, x) / d).collect()
    };
    let mut y0 = plane(i);
    if let Some(y) = quadratic_fit_min(&best.iter().map(|&(v, j)| (plane(j), v)).collect::<Vec<_>>(), m) {
        let step: f64 = y.iter().zip(&y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if step < 0.5 {
            y0 = y;
        }
    }
    let mut v0 = u.clone();
    for (k, b) in basis.iter().enumerate() {
        v0.iter_mut().zip(b).for_each(|(v, bb)| *v += y0[k] * bb);
    }
    let refined = refine_tangent_min(f, &u, &v0);
    Ok(if refined.is_finite() {
        grid.min(refined)
    } else {
        grid
    })
}

/// Minimizer of the least-squares quadratic through (y, F) pairs in R^m.
fn quadratic_fit_min(pts: &[(Vec<f64>, f64)], m: usize) -> Option<Vec<f64>> {
    let terms = 1 + m + m * (m + 1) / 2;
    if pts.len() < terms + 1 {
        return None;
    }
    let c = pts[0].0.clone();
    let row = |y: &[f64]| {
        let d: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - b).collect();
        let mut r = vec![1.0];
        r.extend(d.iter().copied());
        for a in 0..m {
            for b in a..m {
                r.push(d[a] * d[b]);
            }
        }
        r
    };
    let a = DMatrix::from_fn(pts.len(), terms, |i, j| row(&pts[i].0)[j]);
    let rhs = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = a.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let g = DVector::from_iterator(m, (0..m).map(|k| coef[1 + k]));
    let mut hess = DMatrix::zeros(m, m);
    let mut idx = 1 + m;
    for a in 0..m {
        for b in a..m {
            if a == b {
                hess[(a, a)] = 2.0 * coef[idx];
            } else {
                hess[(a, b)] = coef[idx];
                hess[(b, a)] = coef[idx];
            }
            idx += 1;
        }
    }
    let step = hess.cholesky()?.solve(&(-g));
    Some(c.iter().zip(step.iter()).map(|(a, b)| a + b).collect())
}

fn refine_tangent_min(f: &(dyn Fn(&[f64]) -> f64 + Sync), u: &[f64], v0: &[f64]) -> f64 {
    let n = u.len();
    let m = n - 1;
    let basis = tangent_basis(u);
    let eval = |y: &[f64]| {
        let mut v = u.to_vec();
        for (k, b) in basis.iter().enumerate() {
            for d in 0..n {
                v[d] += y[k] * b[d];
            }
        }
        f(&v)
    };
    let mut y: Vec<f64> = basis.iter().map(|b| dot(b, v0)).collect();
    let mut fy = eval(&y);
    for _ in 0..40 {
        let h = 1e-4 * (1.0 + norm(&y));
        let shifted = |y: &[f64], k: usize, a: f64, l: usize, b: f64| {
            let mut z = y.to_vec();
            z[k] += a;
            z[l] += b;
            eval(&z)
        };
        let mut g = vec![0.0; m];
        let mut hess = DMatrix::zeros(m, m);
        for k in 0..m {
            let fp = shifted(&y, k, h, k, 0.0);
            let fm = shifted(&y, k, -h, k, 0.0);
            g[k] = (fp - fm) / (2.0 * h);
            hess[(k, k)] = (fp - 2.0 * fy + fm) / (h * h);
            for l in 0..k {
                let v =
                    (shifted(&y, k, h, l, h) - shifted(&y, k, h, l, -h) - shifted(&y, k, -h, l, h)
                        + shifted(&y, k, -h, l, -h))
                        / (4.0 * h * h);
                hess[(k, l)] = v;
                hess[(l, k)] = v;
            }
        }
        let step: Vec<f64> = match hess.clone().cholesky() {
            Some(ch) => ch
                .solve(&DVector::from_vec(g.iter().map(|x| -x).collect()))
                .iter()
                .copied()
                .collect(),
            None => {
                let gn = norm(&g);
                if gn == 0.0 {
                    break;
                }
                g.iter().map(|x| -x * h / gn).collect()
            }
        };
        let decrement = -dot(&g, &step);
        if !(decrement > 1e-15 * fy.abs()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-3 {
            let z: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let fz = eval(&z);
            if fz < fy {
                accepted = Some((z, fz));
                break;
            }
            t *= 0.5;
        }
        let Some((z, fz)) = accepted else { break };
        let moved = t * norm(&step);
        y = z;
        fy = fz;
        // a full Newton step this short leaves a quadratically small error
        if moved < 1e-12 * (1.0 + norm(&y)) || (t == 1.0 && moved < 1e-3 * (1.0 + norm(&y))) {
            break;
        }
    }
    fy
}

/// Interpolates samples on a rule at an arbitrary unit direction.
fn interpolate(rule: &SphericalRule, values: &[f64], u: &[f64]) -> f64 {
    match &rule.layout {
        Layout::Circle { count } => {
            let step = 2.0 * std::f64::consts::PI / *count as f64;
            let mut a = u[1].atan2(u[0]);
            if a < 0.0 {
                a += 2.0 * std::f64::consts::PI;
            }
            let pos = a / step - 0.5;
            let k = pos.floor();
            let t = pos - k;
            let k = k as i64;
            let at = |j: i64| values[j.rem_euclid(*count as i64) as usize];
            cubic(at(k - 1), at(k), at(k + 1), at(k + 2), t)
        }
        Layout::GaussAzimuth {
            cos_nodes,
            azimuths,
            ..
        } => {
            let m = *azimuths as i64;
            let step = 2.0 * std::f64::consts::PI / *azimuths as f64;
            let mut a = u[1].atan2(u[0]);
            if a < 0.0 {
                a += 2.0 * std::f64::consts::PI;
            }
            let pos = a / step - 0.5;
            let k0 = pos.floor();
            let t = pos - k0;
            let k0 = k0 as i64;
            let rings = cos_nodes.len();
            let z = u[2].clamp(-1.0, 1.0);
            let j = cos_nodes.partition_point(|&c| c < z) as i64;
            let lo = (j - 2).clamp(0, rings as i64 - 4.min(rings as i64)) as usize;
            let hi = (lo + 4).min(rings);
            let ring_vals: Vec<(f64, f64)> = (lo..hi)
                .map(|r| {
                    let at = |q: i64| values[r * *azimuths + q.rem_euclid(m) as usize];
                    (
                        cos_nodes[r],
                        cubic(at(k0 - 1), at(k0), at(k0 + 1), at(k0 + 2), t),
                    )
                })
                .collect();
            lagrange(&ring_vals, z)
        }
        Layout::Scattered => values[rule.nearest(u)],
    }
}

fn cubic(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let pts = [(-1.0, p0), (0.0, p1), (1.0, p2), (2.0, p3)];
    lagrange(&pts, t)
}

fn lagrange(pts: &[(f64, f64)], x: f64) -> f64 {
    let mut s = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                l *= (x - xj) / (xi - xj);
            }
        }
        s += l * yi;
    }
    s
}

impl ConvexBody {
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        Self::ellipsoid(DMatrix::identity(n, n) * radius)
    }

    pub fn ellipsoid(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim(n)?;
        check_matrix(&a, n)?;
        Ok(ConvexBody {
            dim: n,
            repr: Repr::Ellipsoid { a },
        })
    }

    pub fn halfspaces(normals: Vec<Vec<f64>>) -> Result<Self> {
        let n = normals
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidParameter("no halfspaces".into()))?;
        check_dim(n)?;
        if normals
            .iter()
            .any(|v| v.len() != n || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "halfspace normals must share the dimension".into(),
            ));
        }
        let rule = default_rule(n)?;
        for x in rule.nodes() {
            if normals
                .iter()
                .map(|v| dot(v, x))
                .fold(f64::NEG_INFINITY, f64::max)
                <= 0.0
            {
                return Err(Error::Unbounded(format!(
                    "no halfspace bounds direction {x:?}"
                )));
            }
        }
        let vertices = enumerate_vertices(&normals, n);
        if vertices.len() < n + 1 {
            return Err(Error::Unbounded(
                "halfspace intersection has too few vertices".into(),
            ));
        }
        Ok(ConvexBody {
            dim: n,
            repr: Repr::Halfspaces { normals, vertices },
        })
    }

    pub fn symmetric_hull(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidParameter("no vertices".into()))?;
        check_dim(n)?;
        if vertices
            .iter()
            .any(|v| v.len() != n || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "vertices must share the dimension".into(),
            ));
        }
        let span = DMatrix::from_fn(n, vertices.len(), |i, j| vertices[j][i]);
        if span.rank(1e-10) < n {
            return Err(Error::Degenerate(
                "symmetric hull has empty interior".into(),
            ));
        }
        let both: Vec<Vec<f64>> = vertices
            .iter()
            .flat_map(|w| [w.clone(), w.iter().map(|x| -x).collect()])
            .collect();
        let polar_vertices = enumerate_vertices(&both, n);
        Ok(ConvexBody {
            dim: n,
            repr: Repr::SymmetricHull {
                vertices,
                polar_vertices,
            },
        })
    }

    pub fn lq_ball_image(s: f64, a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim(n)?;
        check_matrix(&a, n)?;
        if !(s > 1.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "l_s ball exponent must satisfy 1 < s < inf, got {s}"
            )));
        }
        Ok(ConvexBody {
            dim: n,
            repr: Repr::LqBallImage { s, a },
        })
    }

    /// The cube [-h, h]^n.
    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        let mut normals = Vec::new();
        for i in 0..n {
            for sgn in [1.0, -1.0] {
                let mut v = vec![0.0; n];
                v[i] = sgn / half_width;
                normals.push(v);
            }
        }
        Self::halfspaces(normals)
    }

    /// conv{±e_i}.
    pub fn cross_polytope(n: usize) -> Result<Self> {
        Self::symmetric_hull(
            (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn from_radial_samples(rule: Arc<SphericalRule>, radial: Vec<f64>) -> Result<Self> {
        check_radial(&rule, &radial)?;
        Ok(ConvexBody {
            dim: rule.dim,
            repr: Repr::RadialSamples(RadialSamples {
                rule,
                radial,
                support: None,
                exact: None,
            }),
        })
    }

    /// Body given by an exact support model; radial samples come from the
    /// refined halfspace envelope on `rule`.
    pub fn from_support_model(rule: Arc<SphericalRule>, model: SupportModel) -> Result<Self> {
        let support: Vec<f64> = try_par_map(rule.len(), |i| {
            let h = model.eval(rule.node(i));
            if h > 0.0 && h.is_finite() {
                Ok(h)
            } else {
                Err(Error::Degenerate(format!("support value {h} at node {i}")))
            }
        })?;
        let refine = rule.dim <= 3;
        let f = |v: &[f64]| model.eval(v);
        let index = if refine { Some(EnvelopeIndex::new(&rule, &support)?) } else { None };
        let radial = try_par_map(rule.len(), |i| {
            if let Some(index) = &index {
                index.envelope_min(&f, rule.node(i))
            } else {
                grid_envelope(&rule, &support, rule.node(i))
                    .map(|(v, _)| v)
                    .ok_or_else(|| Error::Unbounded("empty positive cone".into()))
            }
        })?;
        check_radial(&rule, &radial)?;
        Ok(ConvexBody {
            dim: rule.dim,
            repr: Repr::RadialSamples(RadialSamples {
                rule,
                radial,
                support: Some(support),
                exact: Some(Exact::Support(model)),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn kind(&self) -> &'static str {
        match &self.repr {
            Repr::Ellipsoid { .. } => "ellipsoid",
            Repr::Halfspaces { .. } => "halfspaces",
            Repr::SymmetricHull { .. } => "symmetric-hull",
            Repr::LqBallImage { .. } => "lq-ball-image",
            Repr::RadialSamples(_) => "radial-samples",
        }
    }

    /// The support model when the body was built from one.
    pub fn support_model(&self) -> Option<&SupportModel> {
        match &self.repr {
            Repr::RadialSamples(RadialSamples {
                exact: Some(Exact::Support(m)),
                ..
            }) => Some(m),
            _ => None,
        }
    }

    fn check_direction(&self, u: &[f64]) -> Result<(Vec<f64>, f64)> {
        if u.len() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "direction has dimension {}, body has {}",
                u.len(),
                self.dim
            )));
        }
        unit(u)
    }

    /// r_K(x) = max{λ > 0 : λx ∈ K}; homogeneous of degree -1.
    pub fn radial(&self, x: &[f64]) -> Result<f64> {
        let (u, r) = self.check_direction(x)?;
        Ok(self.radial_unit(&u)? / r)
    }

    /// ‖x‖_K = 1 / r_K(x).
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        Ok(1.0 / self.radial(x)?)
    }

    /// h_K(x) = max_{y ∈ K} ⟨x, y⟩; homogeneous of degree 1.
    pub fn support(&self, x: &[f64]) -> Result<f64> {
        let (u, r) = self.check_direction(x)?;
        Ok(self.support_unit(&u)? * r)
    }

    fn radial_unit(&self, u: &[f64]) -> Result<f64> {
        match &self.repr {
            Repr::Ellipsoid { a } => {
                let y = a
                    .clone()
                    .lu()
                    .solve(&DVector::from_column_slice(u))
                    .ok_or_else(|| Error::Degenerate("singular".into()))?;
                Ok(1.0 / y.norm())
            }
            Repr::Halfspaces { normals, .. } => {
                let m = normals
                    .iter()
                    .map(|v| dot(v, u))
                    .fold(f64::NEG_INFINITY, f64::max);
                if m > 0.0 {
                    Ok(1.0 / m)
                } else {
                    Err(Error::Unbounded(format!(
                        "direction {u:?} escapes every halfspace"
                    )))
                }
            }
            Repr::SymmetricHull { polar_vertices, .. } => {
                let m = polar_vertices
                    .iter()
                    .map(|x| dot(x, u))
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(1.0 / m)
            }
            Repr::LqBallImage { s, a } => {
                let y = a
                    .clone()
                    .lu()
                    .solve(&DVector::from_column_slice(u))
                    .ok_or_else(|| Error::Degenerate("singular".into()))?;
                Ok(1.0 / lq_norm(y.as_slice(), *s))
            }
            Repr::RadialSamples(rs) => match &rs.exact {
                None => Ok(interpolate(&rs.rule, &rs.radial, u)),
                Some(Exact::Polar(base)) => Ok(1.0 / base.support_unit(u)?),
                Some(Exact::Linear { base, m_inv, .. }) => base.radial(&mat_vec(m_inv, u)),
                Some(Exact::Support(model)) => {
                    let support = rs
                        .support
                        .as_ref()
                        .expect("support samples accompany a support model");
                    let f = |v: &[f64]| model.eval(v);
                    envelope_min(&f, u, &rs.rule, support)
                }
            },
        }
    }

    fn support_unit(&self, u: &[f64]) -> Result<f64> {
        match &self.repr {
            Repr::Ellipsoid { a } => Ok(norm(&mat_t_vec(a, u))),
            Repr::Halfspaces { vertices, .. } => Ok(vertices
                .iter()
                .map(|x| dot(x, u))
                .fold(f64::NEG_INFINITY, f64::max)),
            Repr::SymmetricHull { vertices, .. } => {
                Ok(vertices.iter().map(|x| dot(x, u).abs()).fold(0.0, f64::max))
            }
            Repr::LqBallImage { s, a } => Ok(lq_norm(&mat_t_vec(a, u), *s / (*s - 1.0))),
            Repr::RadialSamples(rs) => match &rs.exact {
                Some(Exact::Support(model)) => Ok(model.eval(u)),
                Some(Exact::Polar(base)) => Ok(1.0 / base.radial_unit(u)?),
                Some(Exact::Linear { base, m, .. }) => base.support(&mat_t_vec(m, u)),
                None => Ok(rs
                    .rule
                    .nodes()
                    .zip(&rs.radial)
                    .map(|(x, r)| r * dot(x, u))
                    .fold(f64::NEG_INFINITY, f64::max)),
            },
        }
    }

    /// Angles where the planar radial function may fail to be smooth; `None`
    /// for bodies known only through samples.
    fn kink_angles(&self) -> Option<Vec<f64>> {
        if self.dim != 2 {
            return None;
        }
        let angles = |pts: &[Vec<f64>]| pts.iter().map(|x| x[1].atan2(x[0])).collect::<Vec<_>>();
        match &self.repr {
            Repr::Ellipsoid { .. } => Some(vec![]),
            Repr::LqBallImage { a, .. } => Some(angles(&[
                (0..2).map(|i| a[(i, 0)]).collect(),
                (0..2).map(|i| a[(i, 1)]).collect(),
                (0..2).map(|i| -a[(i, 0)]).collect(),
                (0..2).map(|i| -a[(i, 1)]).collect(),
            ])),
            Repr::Halfspaces { vertices, .. } => Some(angles(vertices)),
            Repr::SymmetricHull { .. } => Some(angles(&self.hull_vertices())),
            Repr::RadialSamples(_) => None,
        }
    }

    /// Radial values at the nodes of `rule`.
    pub fn radial_on(&self, rule: &SphericalRule) -> Result<Vec<f64>> {
        if let Repr::RadialSamples(rs) = &self.repr {
            if *rs.rule == *rule {
                return Ok(rs.radial.clone());
            }
        }
        try_par_map(rule.len(), |i| self.radial_unit(rule.node(i)))
    }

    /// Support values at the nodes of `rule`.
    pub fn support_on(&self, rule: &SphericalRule) -> Result<Vec<f64>> {
        if let Repr::RadialSamples(rs) = &self.repr {
            if let Some(s) = &rs.support {
                if *rs.rule == *rule {
                    return Ok(s.clone());
                }
            }
        }
        try_par_map(rule.len(), |i| self.support_unit(rule.node(i)))
    }

    /// Sampling rule of a sampled body.
    pub fn rule(&self) -> Option<&Arc<SphericalRule>> {
        match &self.repr {
            Repr::RadialSamples(rs) => Some(&rs.rule),
            _ => None,
        }
    }

    /// vol(K) = (1/n) ∫ r_K^n, closed forms where available.
    pub fn volume(&self) -> Result<f64> {
        let n = self.dim;
        let nf = n as f64;
        match &self.repr {
            Repr::Ellipsoid { a } => Ok(a.determinant().abs() * ball_volume(nf)?),
            Repr::LqBallImage { s, a } => Ok(a.determinant().abs()
                * (2.0 * gamma(1.0 + 1.0 / s)?).powi(n as i32)
                / gamma(1.0 + nf / s)?),
            Repr::Halfspaces { normals, vertices } => match polytope_volume(normals, vertices, n) {
                Some(v) => Ok(v),
                None => self.volume_on(&*default_rule(n)?),
            },
            Repr::SymmetricHull { polar_vertices, .. } => {
                match polytope_volume(polar_vertices, &self.hull_vertices(), n) {
                    Some(v) => Ok(v),
                    None => self.volume_on(&*default_rule(n)?),
                }
            }
            Repr::RadialSamples(rs) => {
                let rule = rs.rule.clone();
                self.volume_on(&rule)
            }
        }
    }

    fn hull_vertices(&self) -> Vec<Vec<f64>> {
        match &self.repr {
            Repr::SymmetricHull { vertices, .. } => vertices
                .iter()
                .flat_map(|w| [w.clone(), w.iter().map(|x| -x).collect()])
                .collect(),
            _ => vec![],
        }
    }

    /// (1/n) Σ w r^n on a given rule.
    pub fn volume_on(&self, rule: &SphericalRule) -> Result<f64> {
        let r = self.radial_on(rule)?;
        let n = self.dim as i32;
        Ok(
            rule.integrate_samples(&r.iter().map(|x| x.powi(n)).collect::<Vec<_>>())?
                / self.dim as f64,
        )
    }

    /// K° = {x : ⟨x, y⟩ ≤ 1 for all y ∈ K}.
    pub fn polar(&self) -> Result<ConvexBody> {
        let n = self.dim;
        match &self.repr {
            Repr::Ellipsoid { a } => ConvexBody::ellipsoid(inverse(a)?.transpose()),
            Repr::LqBallImage { s, a } => {
                ConvexBody::lq_ball_image(*s / (*s - 1.0), inverse(a)?.transpose())
            }
            Repr::SymmetricHull { vertices, .. } => ConvexBody::halfspaces(
                vertices
                    .iter()
                    .flat_map(|w| [w.clone(), w.iter().map(|x| -x).collect()])
                    .collect(),
            ),
            Repr::Halfspaces { normals, .. } => {
                let symmetric = normals.iter().all(|v| {
                    normals
                        .iter()
                        .any(|w| w.iter().zip(v).all(|(a, b)| (a + b).abs() < 1e-14))
                });
                if symmetric {
                    let mut half: Vec<Vec<f64>> = Vec::new();
                    for v in normals {
                        if !half
                            .iter()
                            .any(|w| w.iter().zip(v).all(|(a, b)| (a + b).abs() < 1e-14))
                        {
                            half.push(v.clone());
                        }
                    }
                    ConvexBody::symmetric_hull(half)
                } else {
                    self.sampled_polar(&default_rule(n)?)
                }
            }
            Repr::RadialSamples(rs) => {
                let rule = rs.rule.clone();
                self.sampled_polar(&rule)
            }
        }
    }

    fn sampled_polar(&self, rule: &Arc<SphericalRule>) -> Result<ConvexBody> {
        let h = self.support_on(rule)?;
        if let Some(i) = h.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Domain(format!(
                "support vanishes at node {i}; origin not interior"
            )));
        }
        let radial = h.iter().map(|x| 1.0 / x).collect();
        let support = self.radial_on(rule)?.iter().map(|r| 1.0 / r).collect();
        Ok(ConvexBody {
            dim: self.dim,
            repr: Repr::RadialSamples(RadialSamples {
                rule: rule.clone(),
                radial,
                support: Some(support),
                exact: Some(Exact::Polar(Arc::new(self.clone()))),
            }),
        })
    }

    /// A·K.
    pub fn linear_image(&self, m: &DMatrix<f64>) -> Result<ConvexBody> {
        let n = self.dim;
        check_matrix(m, n)?;
        let m_inv = inverse(m)?;
        match &self.repr {
            Repr::Ellipsoid { a } => ConvexBody::ellipsoid(m * a),
            Repr::LqBallImage { s, a } => ConvexBody::lq_ball_image(*s, m * a),
            Repr::Halfspaces { normals, .. } => {
                ConvexBody::halfspaces(normals.iter().map(|v| mat_t_vec(&m_inv, v)).collect())
            }
            Repr::SymmetricHull { vertices, .. } => {
                ConvexBody::symmetric_hull(vertices.iter().map(|w| mat_vec(m, w)).collect())
            }
            Repr::RadialSamples(rs) => {
                let rule = rs.rule.clone();
                let base = Arc::new(self.clone());
                let radial =
                    try_par_map(rule.len(), |i| base.radial(&mat_vec(&m_inv, rule.node(i))))?;
                let support = match &rs.support {
                    Some(_) => Some(try_par_map(rule.len(), |i| {
                        base.support(&mat_t_vec(m, rule.node(i)))
                    })?),
                    None => None,
                };
                Ok(ConvexBody {
                    dim: n,
                    repr: Repr::RadialSamples(RadialSamples {
                        rule,
                        radial,
                        support,
                        exact: Some(Exact::Linear {
                            base,
                            m: m.clone(),
                            m_inv,
                        }),
                    }),
                })
            }
        }
    }

    /// λK for λ > 0.
    pub fn dilate(&self, lambda: f64) -> Result<ConvexBody> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        match &self.repr {
            Repr::RadialSamples(rs) => {
                let mut rs = rs.clone();
                rs.radial.iter_mut().for_each(|r| *r *= lambda);
                if let Some(s) = rs.support.as_mut() {
                    s.iter_mut().for_each(|h| *h *= lambda);
                }
                rs.exact = match rs.exact {
                    Some(Exact::Support(mut model)) => {
                        model.scale *= lambda.powf(model.p());
                        Some(Exact::Support(model))
                    }
                    None => None,
                    Some(_) => {
                        let m = DMatrix::identity(self.dim, self.dim) * lambda;
                        return self.linear_image(&m);
                    }
                };
                Ok(ConvexBody {
                    dim: self.dim,
                    repr: Repr::RadialSamples(rs),
                })
            }
            _ => self.linear_image(&(DMatrix::identity(self.dim, self.dim) * lambda)),
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (2..=5).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

fn check_radial(rule: &SphericalRule, radial: &[f64]) -> Result<()> {
    if radial.len() != rule.len() {
        return Err(Error::InvalidParameter(
            "one radial value per node required".into(),
        ));
    }
    if let Some(i) = radial.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!(
            "radial value at node {i} must be positive and finite"
        )));
    }
    Ok(())
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("matrix must be invertible".into()))
}

/// Γ_p K on the default rule of the dimension.
pub fn centroid_body(k: &ConvexBody, p: f64) -> Result<ConvexBody> {
    let rule = match k.rule() {
        Some(r) => r.clone(),
        None => default_rule(k.dim())?,
    };
    centroid_body_on(k, p, &rule)
}

/// Γ_p K with h^p(v) = (1/(a_1 (n+p) vol K)) ∫ r_K^{n+p}(ξ) |⟨v, ξ⟩|^p dξ.
pub fn centroid_body_on(k: &ConvexBody, p: f64, rule: &Arc<SphericalRule>) -> Result<ConvexBody> {
    let model = centroid_support(k, p, rule)?;
    ConvexBody::from_support_model(rule.clone(), model)
}

/// Fourier modes kept for planar bodies with exact radial functions.
const CIRCLE_MODES: usize = 2048;

pub fn centroid_support(k: &ConvexBody, p: f64, rule: &SphericalRule) -> Result<SupportModel> {
    let n = k.dim();
    let a1 = centroid_a1(n, p)?;
    let r = k.radial_on(rule)?;
    let vol = match k.rule() {
        Some(own) if **own == *rule => k.volume()?,
        Some(_) => k.volume_on(rule)?,
        None => k.volume()?,
    };
    let np = n as f64 + p;
    let transform = match k.kink_angles() {
        Some(breaks) if n == 2 => {
            let g = |a: f64| {
                k.radial_unit(&[a.cos(), a.sin()])
                    .map(|r| r.powf(np))
                    .unwrap_or(f64::NAN)
            };
            ZonalTransform::fourier_from_fn(&g, &breaks, p, CIRCLE_MODES)?
        }
        _ => {
            let g: Vec<f64> = r.iter().map(|x| x.powf(np)).collect();
            ZonalTransform::new(rule, &g, p)?
        }
    };
    Ok(SupportModel {
        transform: Arc::new(transform),
        scale: 1.0 / (a1 * np * vol),
    })
}

// ---------------------------------------------------------------------------
// Random bodies and serialization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomKind {
    Halfspace,
    Hull,
    Ellipsoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBodySpec {
    pub kind: RandomKind,
    pub n: usize,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_count() -> usize {
    8
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Q·D with Q orthogonal and D positive diagonal, det 1.
pub fn random_sl(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..=spread)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let q2 = random_orthogonal(rng, n);
    q * DMatrix::from_diagonal(&DVector::from_iterator(n, d.iter().map(|x| x.exp()))) * q2
}

pub fn random_body(seed: u64, spec: &RandomBodySpec) -> Result<ConvexBody> {
    let n = spec.n;
    check_dim(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.kind {
        RandomKind::Ellipsoid => ConvexBody::ellipsoid(random_sl(&mut rng, n, 0.6)),
        RandomKind::Halfspace => {
            let mut normals = Vec::with_capacity(spec.count + 2 * n);
            for _ in 0..spec.count {
                let g: Vec<f64> = (0..n)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let gn = norm(&g);
                let dist = rng.gen_range(0.5..1.5);
                normals.push(g.iter().map(|x| x / (gn * dist)).collect());
            }
            for i in 0..n {
                for sgn in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[i] = sgn / 2.0;
                    normals.push(v);
                }
            }
            ConvexBody::halfspaces(normals)
        }
        RandomKind::Hull => {
            let count = spec.count.max(n);
            let vertices = (0..count)
                .map(|_| {
                    (0..n)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            ConvexBody::symmetric_hull(vertices)
        }
    }
}

/// JSON document for body round-trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BodySpec {
    Ball {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    Cube {
        n: usize,
        #[serde(default = "one")]
        half_width: f64,
    },
    CrossPolytope {
        n: usize,
    },
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
    },
    Halfspaces {
        normals: Vec<Vec<f64>>,
    },
    SymmetricHull {
        vertices: Vec<Vec<f64>>,
    },
    LqBallImage {
        s: f64,
        matrix: Vec<Vec<f64>>,
    },
    RadialSamples {
        n: usize,
        level: usize,
        radial: Vec<f64>,
    },
    Random {
        n: usize,
        seed: u64,
        body: RandomKind,
        #[serde(default = "default_count")]
        count: usize,
    },
}

fn one() -> f64 {
    1.0
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter(
            "matrix must be square and non-empty".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

impl BodySpec {
    pub fn build(&self) -> Result<ConvexBody> {
        match self {
            BodySpec::Ball { n, radius } => ConvexBody::ball(*n, *radius),
            BodySpec::Cube { n, half_width } => ConvexBody::cube(*n, *half_width),
            BodySpec::CrossPolytope { n } => ConvexBody::cross_polytope(*n),
            BodySpec::Ellipsoid { matrix } => ConvexBody::ellipsoid(matrix_from_rows(matrix)?),
            BodySpec::Halfspaces { normals } => ConvexBody::halfspaces(normals.clone()),
            BodySpec::SymmetricHull { vertices } => ConvexBody::symmetric_hull(vertices.clone()),
            BodySpec::LqBallImage { s, matrix } => {
                ConvexBody::lq_ball_image(*s, matrix_from_rows(matrix)?)
            }
            BodySpec::RadialSamples { n, level, radial } => {
                ConvexBody::from_radial_samples(cached_sphere_rule(*n, *level)?, radial.clone())
            }
            BodySpec::Random {
                n,
                seed,
                body,
                count,
            } => random_body(
                *seed,
                &RandomBodySpec {
                    kind: *body,
                    n: *n,
                    count: *count,
                },
            ),
        }
    }
}

impl ConvexBody {
    /// Canonical document; sampled bodies keep their radial samples only.
    pub fn to_spec(&self) -> BodySpec {
        match &self.repr {
            Repr::Ellipsoid { a } => BodySpec::Ellipsoid {
                matrix: matrix_to_rows(a),
            },
            Repr::Halfspaces { normals, .. } => BodySpec::Halfspaces {
                normals: normals.clone(),
            },
            Repr::SymmetricHull { vertices, .. } => BodySpec::SymmetricHull {
                vertices: vertices.clone(),
            },
            Repr::LqBallImage { s, a } => BodySpec::LqBallImage {
                s: *s,
                matrix: matrix_to_rows(a),
            },
            Repr::RadialSamples(rs) => BodySpec::RadialSamples {
                n: self.dim,
                level: rs.rule.level,
                radial: rs.radial.clone(),
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_spec())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<BodySpec>(s)?.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::sphere_rule;
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn indexed_envelope_matches_full_scan() {
        for n in [2usize, 3] {
            let k = BodySpec::Random { n, seed: 4, body: RandomKind::Halfspace, count: 7 }.build().unwrap();
            let rule = cached_sphere_rule(n, if n == 2 { 64 } else { 16 }).unwrap();
            let model = centroid_support(&k, 1.5, &rule).unwrap();
            let values: Vec<f64> = rule.nodes().map(|x| model.eval(x)).collect();
            let f = |v: &[f64]| model.eval(v);
            let index = EnvelopeIndex::new(&rule, &values).unwrap();
            for i in 0..rule.len() {
                let a = envelope_min(&f, rule.node(i), &rule, &values).unwrap();
                let b = index.envelope_min(&f, rule.node(i)).unwrap();
                assert!((a - b).abs() <= 1e-12 * a, "n={n} node {i}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ball_functions() {
        for n in 2..=5 {
            let b = ConvexBody::ball(n, 2.0).unwrap();
            let mut u = vec![0.3; n];
            u[0] = -1.0;
            assert!((b.radial(&u).unwrap() * norm(&u) - 2.0).abs() < 1e-14);
            assert!((b.support(&u).unwrap() / norm(&u) - 2.0).abs() < 1e-14);
            assert!((b.gauge(&u).unwrap() / norm(&u) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn cube_diagonal_and_ellipse_axes() {
        for n in 2..=4 {
            let c = ConvexBody::cube(n, 1.0).unwrap();
            let d = vec![1.0 / (n as f64).sqrt(); n];
            assert!((c.radial(&d).unwrap() - (n as f64).sqrt()).abs() < 1e-12);
        }
        let e = ConvexBody::ellipsoid(diag(&[2.0, 0.5])).unwrap();
        assert!((e.support(&[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-14);
        assert!((e.radial(&[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-14);
        assert!((e.support(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn volumes() {
        for n in 2..=5 {
            let b = ConvexBody::ball(n, 1.0).unwrap();
            assert!((b.volume().unwrap() - ball_volume(n as f64).unwrap()).abs() < 1e-14);
        }
        for n in [2, 3] {
            let c = ConvexBody::cube(n, 1.0).unwrap();
            assert!((c.volume().unwrap() - 2f64.powi(n as i32)).abs() < 1e-12);
            let x = ConvexBody::cross_polytope(n).unwrap();
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            assert!((x.volume().unwrap() - 2f64.powi(n as i32) / fact).abs() < 1e-12);
            // quadrature agrees with the exact polytope volume at grid accuracy
            let q = x.volume_on(&default_rule(n).unwrap()).unwrap();
            assert!((q / x.volume().unwrap() - 1.0).abs() < 2e-3);
        }
        let l = ConvexBody::lq_ball_image(2.0, DMatrix::identity(3, 3)).unwrap();
        assert!((l.volume().unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    // Oracle: area of a convex polygon by fan triangulation of boundary points.
    #[test]
    fn polygon_volume_matches_fan_oracle() {
        let body = random_body(
            3,
            &RandomBodySpec {
                kind: RandomKind::Halfspace,
                n: 2,
                count: 7,
            },
        )
        .unwrap();
        let m = 20000;
        let mut area = 0.0;
        for k in 0..m {
            let a0 = 2.0 * PI * k as f64 / m as f64;
            let a1 = 2.0 * PI * (k + 1) as f64 / m as f64;
            let r0 = body.radial(&[a0.cos(), a0.sin()]).unwrap();
            let r1 = body.radial(&[a1.cos(), a1.sin()]).unwrap();
            area += 0.5 * r0 * r1 * (a1 - a0).sin();
        }
        assert!((body.volume().unwrap() / area - 1.0).abs() < 1e-6);
    }

    #[test]
    fn radial_support_consistency() {
        let bodies = vec![
            ConvexBody::ellipsoid(DMatrix::from_row_slice(
                3,
                3,
                &[1.5, 0.2, 0.0, 0.0, 0.7, 0.1, 0.3, 0.0, 1.1],
            ))
            .unwrap(),
            random_body(
                5,
                &RandomBodySpec {
                    kind: RandomKind::Halfspace,
                    n: 3,
                    count: 9,
                },
            )
            .unwrap(),
            random_body(
                5,
                &RandomBodySpec {
                    kind: RandomKind::Hull,
                    n: 3,
                    count: 9,
                },
            )
            .unwrap(),
            ConvexBody::lq_ball_image(3.0, diag(&[1.0, 2.0, 0.5])).unwrap(),
        ];
        let rule = sphere_rule(3, 12).unwrap();
        for b in &bodies {
            let polar = b.polar().unwrap();
            for x in rule.nodes() {
                let r = b.radial(x).unwrap();
                assert!((r * b.gauge(x).unwrap() - 1.0).abs() < 1e-12);
                assert!(
                    (b.support(x).unwrap() * polar.radial(x).unwrap() - 1.0).abs() < 1e-9,
                    "{}",
                    b.kind()
                );
                assert!(
                    (polar.support(x).unwrap() - 1.0 / r).abs() < 1e-9,
                    "{}",
                    b.kind()
                );
            }
        }
    }

    #[test]
    fn polar_examples() {
        let b = ConvexBody::ball(3, 2.0).unwrap().polar().unwrap();
        assert!((b.radial(&[0.0, 1.0, 0.0]).unwrap() - 0.5).abs() < 1e-14);
        let e = ConvexBody::ellipsoid(diag(&[2.0, 0.5]))
            .unwrap()
            .polar()
            .unwrap();
        match e.repr() {
            Repr::Ellipsoid { a } => {
                assert!((a[(0, 0)] - 0.5).abs() < 1e-14 && (a[(1, 1)] - 2.0).abs() < 1e-14);
            }
            _ => panic!("ellipsoid polar should stay closed form"),
        }
        let c = ConvexBody::cube(2, 1.0).unwrap().polar().unwrap();
        assert_eq!(c.kind(), "symmetric-hull");
        assert!((c.volume().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(c.polar().unwrap().kind(), "halfspaces");
    }

    #[test]
    fn sampled_polar_involution() {
        let rule = default_rule(2).unwrap();
        let e = ConvexBody::ellipsoid(diag(&[1.7, 0.6])).unwrap();
        let samples =
            ConvexBody::from_radial_samples(rule.clone(), e.radial_on(&rule).unwrap()).unwrap();
        let pp = samples.polar().unwrap().polar().unwrap();
        let a = pp.radial_on(&rule).unwrap();
        let b = samples.radial_on(&rule).unwrap();
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x / y - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn support_to_radial_examples() {
        let rule = default_rule(2).unwrap();
        let r = support_to_radial(&rule, &vec![1.0; rule.len()]).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-4));
        let cube = ConvexBody::cube(2, 1.0).unwrap();
        let r = support_to_radial(&rule, &cube.support_on(&rule).unwrap()).unwrap();
        let i = rule.nearest(&[1.0, 1.0]);
        let exact = cube.radial(rule.node(i)).unwrap();
        assert!((r[i] - exact).abs() < 1e-3);
        let e = ConvexBody::ellipsoid(diag(&[1.5, 0.75])).unwrap();
        let r = support_to_radial(&rule, &e.support_on(&rule).unwrap()).unwrap();
        let exact = e.radial_on(&rule).unwrap();
        let worst = r
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        assert!(support_to_radial(&rule, &vec![-1.0; rule.len()]).is_err());
    }

    #[test]
    fn refined_envelope_recovers_ellipse() {
        for n in [2, 3] {
            let rule = default_rule(n).unwrap();
            let a = if n == 2 {
                diag(&[1.5, 0.75])
            } else {
                diag(&[1.5, 0.75, 1.1])
            };
            let e = ConvexBody::ellipsoid(a).unwrap();
            let h = e.support_on(&rule).unwrap();
            let f = |v: &[f64]| e.support(v).unwrap();
            for k in 0..25 {
                let u = rule.node(k * 37 % rule.len());
                let r = envelope_min(&f, u, &rule, &h).unwrap();
                assert!((r - e.radial(u).unwrap()).abs() < 1e-10, "n={n}");
            }
        }
    }

    #[test]
    fn centroid_of_ball_is_ball() {
        for n in [2, 3] {
            for p in [1.0, 2.0, 3.0] {
                let g = centroid_body(&ConvexBody::ball(n, 1.0).unwrap(), p).unwrap();
                let rule = default_rule(n).unwrap();
                let h = g.support_on(&rule).unwrap();
                let worst = h.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-10, "n={n} p={p}: {worst}");
                assert!((g.volume().unwrap() / ball_volume(n as f64).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    // Oracle: ∫_K |⟨v,y⟩|^p dy for an ellipse by brute-force polar integration
    // with the kink lines split out.
    #[test]
    fn centroid_support_matches_brute_force() {
        let a = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, -0.2, 0.8]);
        let e = ConvexBody::ellipsoid(a.clone()).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let g = centroid_body(&e, p).unwrap();
            let a1 = centroid_a1(2, p).unwrap();
            for psi in [0.1, 1.0, 2.2] {
                let v = [f64::cos(psi), f64::sin(psi)];
                let kink = psi + PI / 2.0;
                let br = [kink - PI, kink - PI / 2.0, kink, kink + PI / 2.0, kink + PI];
                let (t, w) = crate::quadrature::composite_gauss(&br, 120);
                let integral: f64 = t
                    .iter()
                    .zip(&w)
                    .map(|(&th, &wt)| {
                        let xi = [th.cos(), th.sin()];
                        let r = e.radial(&xi).unwrap();
                        wt * r.powf(2.0 + p) / (2.0 + p) * dot(&xi, &v).abs().powf(p)
                    })
                    .sum();
                let h = (integral / (a1 * e.volume().unwrap())).powf(1.0 / p);
                assert!((g.support(&v).unwrap() / h - 1.0).abs() < 1e-9, "p={p}");
            }
        }
    }

    #[test]
    fn centroid_equivariance() {
        let rule = default_rule(2).unwrap();
        let k = random_body(
            11,
            &RandomBodySpec {
                kind: RandomKind::Halfspace,
                n: 2,
                count: 6,
            },
        )
        .unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.5, -0.3, 0.9]);
        let ak = k.linear_image(&a).unwrap();
        let g = centroid_body(&k, 2.0).unwrap();
        let ga = centroid_body(&ak, 2.0).unwrap();
        for x in rule.nodes().step_by(17) {
            let lhs = ga.support(x).unwrap();
            let rhs = g.support(&mat_t_vec(&a, x)).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 1e-5);
        }
        // ellipsoids: Γ_p(AB) = AB
        let e = ConvexBody::ellipsoid(a.clone()).unwrap();
        let ge = centroid_body(&e, 3.0).unwrap();
        for x in rule.nodes().step_by(13) {
            assert!((ge.support(x).unwrap() / e.support(x).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn busemann_petty_cube_and_ellipsoid() {
        let cube = ConvexBody::cube(2, 1.0).unwrap();
        let g = centroid_body(&cube, 2.0).unwrap();
        assert!(g.volume().unwrap() > 4.0 * (1.0 + 1e-3));
        let e = ConvexBody::ellipsoid(DMatrix::from_row_slice(
            3,
            3,
            &[1.4, 0.1, 0.0, 0.2, 0.6, 0.0, 0.0, 0.3, 1.2],
        ))
        .unwrap();
        let ge = centroid_body(&e, 1.0).unwrap();
        assert!((ge.volume().unwrap() / e.volume().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn linear_images() {
        let k = random_body(
            2,
            &RandomBodySpec {
                kind: RandomKind::Hull,
                n: 3,
                count: 7,
            },
        )
        .unwrap();
        let id = k.linear_image(&DMatrix::identity(3, 3)).unwrap();
        assert!((id.volume().unwrap() - k.volume().unwrap()).abs() < 1e-12);
        let a = diag(&[2.0, 1.0, 1.0]);
        assert!(
            (k.linear_image(&a).unwrap().volume().unwrap() / k.volume().unwrap() - 2.0).abs()
                < 1e-9
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_sl(&mut rng, 2, 0.5);
        let k2 = random_body(
            4,
            &RandomBodySpec {
                kind: RandomKind::Halfspace,
                n: 2,
                count: 5,
            },
        )
        .unwrap();
        assert!(
            (k2.linear_image(&s).unwrap().volume().unwrap() / k2.volume().unwrap() - 1.0).abs()
                < 1e-9
        );
        // sampled bodies follow through exact evaluators
        let rule = default_rule(2).unwrap();
        let e = ConvexBody::ellipsoid(diag(&[1.0, 0.5])).unwrap();
        let sampled =
            ConvexBody::from_radial_samples(rule.clone(), e.radial_on(&rule).unwrap()).unwrap();
        let img = sampled.linear_image(&s).unwrap();
        assert!((img.volume().unwrap() / e.volume().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn random_bodies() {
        let spec = RandomBodySpec {
            kind: RandomKind::Halfspace,
            n: 2,
            count: 8,
        };
        let a = random_body(1, &spec).unwrap();
        let b = random_body(1, &spec).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let rule = default_rule(2).unwrap();
        assert!(a.radial_on(&rule).unwrap().iter().all(|&r| r > 0.0));
        for seed in 0..5 {
            for n in 2..=5 {
                let e = random_body(
                    seed,
                    &RandomBodySpec {
                        kind: RandomKind::Ellipsoid,
                        n,
                        count: 0,
                    },
                )
                .unwrap();
                assert!((e.volume().unwrap() / ball_volume(n as f64).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let bodies = vec![
            ConvexBody::ellipsoid(diag(&[2.0, 0.5])).unwrap(),
            ConvexBody::cube(3, 1.0).unwrap(),
            ConvexBody::cross_polytope(2).unwrap(),
            ConvexBody::lq_ball_image(4.0, diag(&[1.0, 2.0])).unwrap(),
        ];
        for b in bodies {
            let s = b.to_json().unwrap();
            let c = ConvexBody::from_json(&s).unwrap();
            assert_eq!(s, c.to_json().unwrap());
            assert!((b.volume().unwrap() - c.volume().unwrap()).abs() < 1e-12);
        }
        let spec: BodySpec = serde_json::from_str(
            r#"{"kind":"random","n":2,"seed":1,"body":"halfspace","count":8}"#,
        )
        .unwrap();
        assert!(spec.build().is_ok());
        assert!(ConvexBody::from_json(r#"{"kind":"ellipsoid","matrix":[[1,0],[0,0]]}"#).is_err());
    }

    #[test]
    fn invalid_bodies() {
        assert!(matches!(
            ConvexBody::halfspaces(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::Unbounded(_))
        ));
        assert!(ConvexBody::symmetric_hull(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).is_err());
        assert!(matches!(
            ConvexBody::ball(6, 1.0),
            Err(Error::UnsupportedDimension(6))
        ));
        assert!(ConvexBody::lq_ball_image(1.0, DMatrix::identity(2, 2)).is_err());
    }
}
