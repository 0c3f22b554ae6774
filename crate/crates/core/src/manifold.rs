//! Grassmann and sphere geometry.
//!
//! Points of the Grassmannian `Gr(d, k)` are represented by `d x k` bases
//! with orthonormal columns. The geodesic from `span(P)` to `span(Q)` is
//! `exp_P(t log_P(Q))`; the geodesic flow kernel integrates the projection
//! onto that moving subspace over `t in [0, 1]` in closed form.
//!
//! The sphere and landmark-shape geodesics at the bottom back the demo
//! generators, which emit the true great-circle path next to a chord-based
//! path for comparison.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, orthogonal_complement, orthonormality_defect, orthonormalize};

pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Below this principal angle the kernel blocks use their `theta -> 0`
/// limits.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis whose columns are orthonormal to within `1e-10`.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (d, k) = basis.shape();
        if k == 0 || k > d {
            return Err(Error::invalid(format!("subspace basis must satisfy 1 <= k <= d, got {d}x{k}")));
        }
        let defect = orthonormality_defect(&basis);
        if defect.is_nan() || defect > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("basis columns not orthonormal (defect {defect:e})")));
        }
        Ok(Self { basis })
    }

    /// Orthonormalises an arbitrary full-column-rank matrix.
    pub fn from_span(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(orthonormalize(m))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `P P'`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Principal angles in increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles(pub Vec<f64>);

impl PrincipalAngles {
    pub fn max(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GfkKernel {
    g: DMatrix<f64>,
}

impl GfkKernel {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.g
    }
}

fn same_shape(p: &Subspace, q: &Subspace) -> Result<()> {
    if p.ambient_dim() != q.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "subspace ambient dimension",
            left: p.ambient_dim(),
            right: q.ambient_dim(),
        });
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            context: "subspace dimension",
            left: p.dim(),
            right: q.dim(),
        });
    }
    Ok(())
}

/// Top-`k` principal directions of the column-centred data. Each basis
/// column is signed so its largest-magnitude entry is positive.
pub fn pca_subspace(x: &DMatrix<f64>, k: usize) -> Result<Subspace> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::invalid(format!("subspace dimension {k} outside 1..={}", n.min(d))));
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let svd = linalg::svd(&centered);
    let mut basis = svd.v.columns(0, k).into_owned();
    for mut col in basis.column_iter_mut() {
        let mut pivot = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
    Subspace::new(basis)
}

/// Principal angles between two equal-dimension subspaces.
///
/// Cosines come from the singular values of `P'Q` and sines from those of
/// `(I - PP')Q`; each angle is read from whichever is better conditioned
/// (arcsin below `pi/4`, arccos above), which keeps tiny angles accurate.
pub fn principal_angles(p: &Subspace, q: &Subspace) -> Result<PrincipalAngles> {
    same_shape(p, q)?;
    let pq = p.basis.transpose() * &q.basis;
    let cosines = linalg::svd(&pq).singular_values;
    let residual = &q.basis - &p.basis * &pq;
    let mut sines: Vec<f64> = linalg::svd(&residual).singular_values.iter().copied().collect();
    sines.sort_by(f64::total_cmp);
    let k = p.dim();
    let angles = (0..k)
        .map(|i| {
            let c = cosines[i].clamp(0.0, 1.0);
            let s = sines[i].clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(PrincipalAngles(angles))
}

fn gfk_blocks(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        return (2.0, 0.0, 0.0);
    }
    let two = 2.0 * theta;
    let sinc = two.sin() / two;
    (1.0 + sinc, (two.cos() - 1.0) / two, 1.0 - sinc)
}

/// Geodesic flow kernel `G = 2 * integral_0^1 Phi(t) Phi(t)' dt` between
/// `span(P_S)` and `span(P_T)`, with the orthonormal complement of `P_S`
/// taken from a full Householder QR.
pub fn gfk_kernel(source: &Subspace, target: &Subspace) -> Result<GfkKernel> {
    same_shape(source, target)?;
    if 2 * source.dim() > source.ambient_dim() {
        return Err(Error::invalid(format!(
            "GFK needs 2k <= d, got k={}, d={}",
            source.dim(),
            source.ambient_dim()
        )));
    }
    let complement = orthogonal_complement(&source.basis);
    gfk_kernel_with_complement(source, target, &complement)
}

/// [`gfk_kernel`] with a caller-supplied orthonormal complement of the
/// source basis. The result does not depend on which complement is used.
pub fn gfk_kernel_with_complement(
    source: &Subspace,
    target: &Subspace,
    complement: &DMatrix<f64>,
) -> Result<GfkKernel> {
    same_shape(source, target)?;
    let (d, k) = source.basis.shape();
    if 2 * k > d {
        return Err(Error::invalid(format!("GFK needs 2k <= d, got k={k}, d={d}")));
    }
    if complement.shape() != (d, d - k) {
        return Err(Error::DimensionMismatch {
            context: "orthogonal complement columns",
            left: complement.ncols(),
            right: d - k,
        });
    }
    let ps = &source.basis;
    let pt = &target.basis;

    let svd = linalg::svd(&(ps.transpose() * pt));
    let (u1, cosines, v) = (svd.u, svd.singular_values, svd.v);
    // R_S' P_T V = -U2 Sigma: columns are mutually orthogonal with norms sin(theta).
    let b = complement.transpose() * pt * &v;

    let mut u2 = DMatrix::zeros(d - k, k);
    let mut thetas = Vec::with_capacity(k);
    let mut degenerate = Vec::new();
    for i in 0..k {
        let s = b.column(i).norm();
        thetas.push(s.atan2(cosines[i].max(0.0)));
        if s > 1e-12 {
            u2.set_column(i, &(-b.column(i) / s));
        } else {
            degenerate.push(i);
        }
    }
    complete_orthonormal(&mut u2, &degenerate)?;

    let omega1 = ps * &u1;
    let omega2 = complement * &u2;
    let (mut l1, mut l2, mut l3) = (
        DVector::zeros(k),
        DVector::zeros(k),
        DVector::zeros(k),
    );
    for (i, &t) in thetas.iter().enumerate() {
        let (a, b, c) = gfk_blocks(t);
        l1[i] = a;
        l2[i] = b;
        l3[i] = c;
    }
    let scale = |m: &DMatrix<f64>, w: &DVector<f64>| {
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * w[c])
    };
    let g = scale(&omega1, &l1) * omega1.transpose()
        + scale(&omega1, &l2) * omega2.transpose()
        + scale(&omega2, &l2) * omega1.transpose()
        + scale(&omega2, &l3) * omega2.transpose();
    Ok(GfkKernel {
        g: linalg::symmetrize(&g),
    })
}

/// Fills the listed columns of `m` with unit vectors orthogonal to every
/// other column, by Gram-Schmidt over the standard basis.
fn complete_orthonormal(m: &mut DMatrix<f64>, missing: &[usize]) -> Result<()> {
    let rows = m.nrows();
    let mut filled: Vec<usize> = (0..m.ncols()).filter(|c| !missing.contains(c)).collect();
    let mut candidate = 0;
    for &col in missing {
        loop {
            if candidate >= rows {
                return Err(Error::invalid("degenerate SVD: cannot complete complement basis"));
            }
            let mut v = DVector::zeros(rows);
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj = m.column(f).dot(&v);
                    v -= m.column(f) * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                m.set_column(col, &(v / norm));
                filled.push(col);
                break;
            }
        }
    }
    Ok(())
}

/// Maps rows through `G^(1/2)`, so that `X' X'^T = X G X^T`.
pub fn gfk_transform(g: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() != g.ncols() {
        return Err(Error::invalid("GFK matrix must be square"));
    }
    if x.ncols() != g.nrows() {
        return Err(Error::DimensionMismatch {
            context: "GFK transform feature dimension",
            left: x.ncols(),
            right: g.nrows(),
        });
    }
    Ok(x * linalg::sym_sqrt(g))
}

/// Horizontal tangent `Delta` at `P` with `exp_P(Delta) = span(Q)`.
pub fn grassmann_log(p: &Subspace, q: &Subspace) -> Result<DMatrix<f64>> {
    same_shape(p, q)?;
    let pq = p.basis.transpose() * &q.basis;
    let smallest = linalg::svd(&pq)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if smallest < 1e-12 {
        return Err(Error::CutLocus);
    }
    let residual = &q.basis - &p.basis * &pq;
    // residual * (P'Q)^-1, via (P'Q)' Z' = residual'
    let m = linalg::solve(pq.transpose(), &residual.transpose())
        .map_err(|_| Error::CutLocus)?
        .transpose();
    let svd = linalg::svd(&m);
    let atan = svd.singular_values.map(f64::atan);
    Ok(&svd.u * DMatrix::from_diagonal(&atan) * svd.v.transpose())
}

/// Point reached from `P` along the geodesic with initial velocity `Delta`.
/// `Delta` is first projected onto the horizontal space at `P`.
pub fn grassmann_exp(p: &Subspace, delta: &DMatrix<f64>) -> Result<Subspace> {
    if delta.shape() != p.basis.shape() {
        return Err(Error::DimensionMismatch {
            context: "tangent shape",
            left: delta.ncols(),
            right: p.dim(),
        });
    }
    let horizontal = delta - &p.basis * (p.basis.transpose() * delta);
    let svd = linalg::svd(&horizontal);
    let cos = DMatrix::from_diagonal(&svd.singular_values.map(f64::cos));
    let sin = DMatrix::from_diagonal(&svd.singular_values.map(f64::sin));
    let vt = svd.v.transpose();
    let y = &p.basis * &svd.v * cos * &vt + &svd.u * sin * &vt;
    Subspace::new(orthonormalize(&y))
}

/// `exp_P(t log_P(Q))`.
pub fn grassmann_geodesic(p: &Subspace, q: &Subspace, t: f64) -> Result<Subspace> {
    let delta = grassmann_log(p, q)?;
    grassmann_exp(p, &(delta * t))
}

// ---------------------------------------------------------------------------
// Sphere and shape geodesics

pub const UNIT_TOL: f64 = 1e-10;

fn check_unit(v: &DVector<f64>) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!("expected a unit vector, norm is {n}")));
    }
    Ok(())
}

/// Angle between two vectors, accurate for nearly (anti)parallel inputs.
pub fn vector_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ua = a.normalize();
    let ub = b.normalize();
    2.0 * (&ua - &ub).norm().atan2((&ua + &ub).norm())
}

/// Great-circle interpolation between unit vectors.
pub fn sphere_geodesic(p1: &DVector<f64>, p2: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if p1.len() != p2.len() {
        return Err(Error::DimensionMismatch {
            context: "sphere points",
            left: p1.len(),
            right: p2.len(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("t must lie in [0, 1], got {t}")));
    }
    check_unit(p1)?;
    check_unit(p2)?;
    if p1.dot(p2) <= -1.0 + 1e-12 {
        return Err(Error::Antipodal);
    }
    let omega = vector_angle(p1, p2);
    if omega < SMALL_ANGLE {
        return Ok(p1.clone());
    }
    let s = omega.sin();
    Ok(p1 * (((1.0 - t) * omega).sin() / s) + p2 * ((t * omega).sin() / s))
}

/// Chord interpolation followed by projection back to the sphere.
pub fn sphere_chord(p1: &DVector<f64>, p2: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let v = p1 * (1.0 - t) + p2 * t;
    let n = v.norm();
    if n < 1e-12 {
        return Err(Error::Antipodal);
    }
    Ok(v / n)
}

/// Landmark order starting at the rightmost point (ties: closest to the
/// centroid's height, then lowest index) and proceeding counterclockwise
/// around the centroid.
fn contour_order(pts: &DMatrix<f64>, centroid: (f64, f64)) -> Vec<usize> {
    let n = pts.nrows();
    let start = (0..n)
        .min_by(|&a, &b| {
            pts[(b, 0)]
                .total_cmp(&pts[(a, 0)])
                .then((pts[(a, 1)] - centroid.1).abs().total_cmp(&(pts[(b, 1)] - centroid.1).abs()))
                .then(a.cmp(&b))
        })
        .unwrap_or(0);
    let angle = |i: usize| (pts[(i, 1)] - centroid.1).atan2(pts[(i, 0)] - centroid.0);
    let a0 = angle(start);
    let rel = |i: usize| {
        let r = (angle(i) - a0).rem_euclid(2.0 * PI);
        if i == start {
            0.0
        } else {
            r
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rel(a).total_cmp(&rel(b)).then(a.cmp(&b)));
    order
}

struct PreShape {
    order: Vec<usize>,
    centroid: (f64, f64),
    scale: f64,
    /// Centred, unit-norm landmarks in contour order, flattened `x0, y0, ...`.
    z: DVector<f64>,
}

fn pre_shape(pts: &DMatrix<f64>) -> Result<PreShape> {
    if pts.ncols() != 2 || pts.nrows() == 0 {
        return Err(Error::invalid("landmarks must be an N x 2 matrix with N >= 1"));
    }
    let n = pts.nrows() as f64;
    let centroid = (pts.column(0).sum() / n, pts.column(1).sum() / n);
    let order = contour_order(pts, centroid);
    let mut z = DVector::zeros(2 * pts.nrows());
    for (k, &i) in order.iter().enumerate() {
        z[2 * k] = pts[(i, 0)] - centroid.0;
        z[2 * k + 1] = pts[(i, 1)] - centroid.1;
    }
    let scale = z.norm();
    if scale.is_nan() || scale <= 1e-12 {
        return Err(Error::DegenerateShape);
    }
    z /= scale;
    Ok(PreShape {
        order,
        centroid,
        scale,
        z,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapePath {
    Geodesic,
    /// Chord between pre-shapes, renormalised.
    Chord,
}

/// Interpolated landmarks at time `t`, indexed like the source landmarks.
pub fn shape_geodesic(source: &DMatrix<f64>, target: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    shape_path(source, target, t, ShapePath::Geodesic)
}

pub fn shape_path(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    t: f64,
    path: ShapePath,
) -> Result<DMatrix<f64>> {
    if source.nrows() != target.nrows() {
        return Err(Error::DimensionMismatch {
            context: "landmark counts",
            left: source.nrows(),
            right: target.nrows(),
        });
    }
    let s = pre_shape(source)?;
    let g = pre_shape(target)?;
    let z = match path {
        ShapePath::Geodesic => sphere_geodesic(&s.z, &g.z, t)?,
        ShapePath::Chord => sphere_chord(&s.z, &g.z, t)?,
    };
    let cx = (1.0 - t) * s.centroid.0 + t * g.centroid.0;
    let cy = (1.0 - t) * s.centroid.1 + t * g.centroid.1;
    let scale = (1.0 - t) * s.scale + t * g.scale;
    let mut out = DMatrix::zeros(source.nrows(), 2);
    for (k, &i) in s.order.iter().enumerate() {
        out[(i, 0)] = cx + scale * z[2 * k];
        out[(i, 1)] = cy + scale * z[2 * k + 1];
    }
    Ok(out)
}

/// Unit-norm pre-shape of a landmark set, flattened in contour order.
pub fn pre_shape_vector(pts: &DMatrix<f64>) -> Result<DVector<f64>> {
    pre_shape(pts).map(|p| p.z)
}

/// Landmarks along the boundary of the square `[-h, h]^2`, equally spaced by
/// arc length, starting at `(h, 0)` and running counterclockwise.
pub fn square_landmarks(n: usize, half_side: f64) -> DMatrix<f64> {
    let perimeter = 8.0 * half_side;
    DMatrix::from_fn(n, 2, |i, j| {
        // arc length measured from (h, 0)
        let s = (i as f64 * perimeter / n as f64 + half_side).rem_euclid(perimeter);
        let side = (s / (2.0 * half_side)).floor() as usize;
        let u = s - side as f64 * 2.0 * half_side - half_side;
        let (x, y) = match side {
            0 => (half_side, u),
            1 => (-u, half_side),
            2 => (-half_side, -u),
            _ => (u, -half_side),
        };
        if j == 0 {
            x
        } else {
            y
        }
    })
}

/// Landmarks on a circle, starting at `(r, 0)` and running counterclockwise.
pub fn circle_landmarks(n: usize, radius: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, 2, |i, j| {
        let a = 2.0 * PI * i as f64 / n as f64;
        if j == 0 {
            radius * a.cos()
        } else {
            radius * a.sin()
        }
    })
}

// ---------------------------------------------------------------------------
// Demo emission

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoKind {
    Sphere,
    Shape,
}

impl std::str::FromStr for DemoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "shape" => Ok(Self::Shape),
            other => Err(Error::invalid(format!("unknown demo kind {other:?}"))),
        }
    }
}

/// Sample times shown for the square-to-circle comparison.
pub const SHAPE_SAMPLE_TIMES: [f64; 5] = [0.0, 0.05, 0.5, 0.95, 1.0];
pub const SHAPE_LANDMARKS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct DemoRow {
    pub curve: &'static str,
    pub t: f64,
    pub coords: Vec<f64>,
}

fn uniform_grid(steps: usize) -> Vec<f64> {
    (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect()
}

/// Sampled curves for a demo. Sphere: `steps` uniform times. Shape: the
/// uniform grid merged with [`SHAPE_SAMPLE_TIMES`].
pub fn demo_rows(kind: DemoKind, steps: usize) -> Result<Vec<DemoRow>> {
    if steps < 2 {
        return Err(Error::invalid(format!("steps must be >= 2, got {steps}")));
    }
    let mut rows = Vec::new();
    match kind {
        DemoKind::Sphere => {
            let p1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
            let p2 = DVector::from_vec(vec![0.0, 0.6, 0.8]);
            let grid = uniform_grid(steps);
            for &t in &grid {
                rows.push(DemoRow {
                    curve: "geodesic",
                    t,
                    coords: sphere_geodesic(&p1, &p2, t)?.iter().copied().collect(),
                });
            }
            for &t in &grid {
                rows.push(DemoRow {
                    curve: "naive",
                    t,
                    coords: sphere_chord(&p1, &p2, t)?.iter().copied().collect(),
                });
            }
        }
        DemoKind::Shape => {
            let mut grid = uniform_grid(steps);
            grid.extend(SHAPE_SAMPLE_TIMES);
            grid.sort_by(f64::total_cmp);
            grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let square = square_landmarks(SHAPE_LANDMARKS, 1.0);
            let circle = circle_landmarks(SHAPE_LANDMARKS, 1.0);
            for (curve, path) in [("geodesic", ShapePath::Geodesic), ("naive", ShapePath::Chord)] {
                for &t in &grid {
                    let pts = shape_path(&square, &circle, t, path)?;
                    let coords = (0..pts.nrows())
                        .flat_map(|i| [pts[(i, 0)], pts[(i, 1)]])
                        .collect();
                    rows.push(DemoRow { curve, t, coords });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_demo_csv(rows: &[DemoRow], w: &mut impl Write) -> std::io::Result<()> {
    let width = rows.first().map_or(0, |r| r.coords.len());
    write!(w, "curve,t")?;
    for c in 0..width {
        write!(w, ",c{c}")?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "{},{}", row.curve, row.t)?;
        for v in &row.coords {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn demo_emit(kind: DemoKind, steps: usize, out_path: impl AsRef<Path>) -> Result<()> {
    let path = out_path.as_ref();
    let rows = demo_rows(kind, steps)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_demo_csv(&rows, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;

    fn e(d: usize, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, 1, |r, _| if r == i { 1.0 } else { 0.0 })
    }

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn pca_single_axis() {
        let x = DMatrix::from_row_slice(4, 3, &[
            -2.0, 1.0, 1.0, //
            -1.0, 1.0, 1.0, //
            3.0, 1.0, 1.0, //
            5.0, 1.0, 1.0,
        ]);
        let s = pca_subspace(&x, 1).unwrap();
        assert!((s.basis() - e(3, 0)).amax() < 1e-12);
        assert!(pca_subspace(&x, 0).is_err());
        assert!(pca_subspace(&x, 4).is_err());
    }

    #[test]
    fn pca_full_rank_is_orthonormal() {
        let x = pseudo_random(5, 8, 3);
        let s = pca_subspace(&x, 5).unwrap();
        assert!(orthonormality_defect(s.basis()) < 1e-12);
        let x = pseudo_random(9, 4, 4);
        let s = pca_subspace(&x, 4).unwrap();
        assert!(orthonormality_defect(s.basis()) < 1e-12);
    }

    #[test]
    fn angles_basic() {
        let p = Subspace::new(e(3, 0)).unwrap();
        let q = Subspace::new(e(3, 1)).unwrap();
        assert_eq!(principal_angles(&p, &p).unwrap().0, vec![0.0]);
        assert!((principal_angles(&p, &q).unwrap().0[0] - PI / 2.0).abs() < 1e-15);
        let wide = Subspace::new(DMatrix::identity(3, 2)).unwrap();
        assert!(principal_angles(&p, &wide).is_err());
    }

    #[test]
    fn angle_of_planted_rotation() {
        let alpha: f64 = 0.3;
        let rotated = DMatrix::from_column_slice(3, 1, &[alpha.cos(), alpha.sin(), 0.0]);
        let p = Subspace::new(e(3, 0)).unwrap();
        let q = Subspace::new(rotated).unwrap();
        assert!((principal_angles(&p, &q).unwrap().0[0] - alpha).abs() < 1e-15);
    }

    #[test]
    fn gfk_identical_limit() {
        let p = Subspace::from_span(&pseudo_random(10, 3, 5)).unwrap();
        let g = gfk_kernel(&p, &p).unwrap();
        assert!((g.matrix() - p.projector() * 2.0).amax() < 1e-10);
        let wide = Subspace::from_span(&pseudo_random(5, 3, 6)).unwrap();
        assert!(gfk_kernel(&wide, &wide).is_err());
    }

    #[test]
    fn gfk_is_symmetric_psd() {
        let p = Subspace::from_span(&pseudo_random(12, 4, 7)).unwrap();
        let q = Subspace::from_span(&pseudo_random(12, 4, 8)).unwrap();
        let g = gfk_kernel(&p, &q).unwrap();
        assert_eq!(g.matrix(), &g.matrix().transpose());
        assert!(min_eigenvalue(g.matrix()) >= -1e-8);
    }

    #[test]
    fn gfk_with_shared_directions() {
        // one direction shared exactly, one rotated: exercises the degenerate U2 column
        let mut p = DMatrix::zeros(6, 2);
        p[(0, 0)] = 1.0;
        p[(1, 1)] = 1.0;
        let mut q = DMatrix::zeros(6, 2);
        q[(0, 0)] = 1.0;
        q[(1, 1)] = 0.8;
        q[(2, 1)] = 0.6;
        let (p, q) = (Subspace::new(p).unwrap(), Subspace::new(q).unwrap());
        let g = gfk_kernel(&p, &q).unwrap();
        assert!((g.matrix()[(0, 0)] - 2.0).abs() < 1e-12);
        assert!(min_eigenvalue(g.matrix()) >= -1e-8);
    }

    #[test]
    fn transform_examples() {
        let x = pseudo_random(4, 6, 9);
        let same = gfk_transform(&DMatrix::identity(6, 6), &x).unwrap();
        assert!((same - &x).amax() < 1e-12);

        let p = Subspace::from_span(&pseudo_random(6, 2, 10)).unwrap();
        let g = p.projector() * 2.0;
        let mapped = gfk_transform(&g, &x).unwrap();
        let expected = (&x * p.basis()) * p.basis().transpose() * 2f64.sqrt();
        assert!((mapped - expected).amax() < 1e-10);

        let a = pseudo_random(6, 6, 11);
        let g = &a * a.transpose();
        let mapped = gfk_transform(&g, &x).unwrap();
        let direct = &x * &g * x.transpose();
        assert!((&mapped * mapped.transpose() - direct).amax() < 1e-8);
        assert!(gfk_transform(&g, &pseudo_random(2, 5, 1)).is_err());
    }

    #[test]
    fn log_exp_identities() {
        let p = Subspace::from_span(&pseudo_random(7, 3, 12)).unwrap();
        let delta = grassmann_log(&p, &p).unwrap();
        assert!(delta.amax() < 1e-12);
        let back = grassmann_exp(&p, &DMatrix::zeros(7, 3)).unwrap();
        assert!((back.basis() - p.basis()).amax() < 1e-12);
    }

    #[test]
    fn log_rejects_cut_locus() {
        let p = Subspace::new(e(3, 0)).unwrap();
        let q = Subspace::new(e(3, 1)).unwrap();
        assert!(matches!(grassmann_log(&p, &q), Err(Error::CutLocus)));
    }

    #[test]
    fn geodesic_endpoints() {
        let p = Subspace::from_span(&pseudo_random(8, 2, 13)).unwrap();
        let q = Subspace::from_span(&(p.basis() + pseudo_random(8, 2, 14) * 0.4)).unwrap();
        let start = grassmann_geodesic(&p, &q, 0.0).unwrap();
        let end = grassmann_geodesic(&p, &q, 1.0).unwrap();
        assert!(principal_angles(&start, &p).unwrap().max() < 1e-10);
        assert!(principal_angles(&end, &q).unwrap().max() < 1e-10);
    }

    #[test]
    fn sphere_examples() {
        let p1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let p2 = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(sphere_geodesic(&p1, &p2, 0.0).unwrap(), p1);
        assert_eq!(sphere_geodesic(&p1, &p2, 1.0).unwrap(), p2);
        let mid = sphere_geodesic(&p1, &p2, 0.5).unwrap();
        let h = 0.5f64.sqrt();
        assert!((mid - DVector::from_vec(vec![h, h, 0.0])).amax() < 1e-15);
        assert!(matches!(sphere_geodesic(&p1, &(-&p1), 0.5), Err(Error::Antipodal)));
        assert!(sphere_geodesic(&p1, &(p2.clone() * 2.0), 0.5).is_err());
        assert_eq!(sphere_geodesic(&p1, &p1, 0.7).unwrap(), p1);
    }

    #[test]
    fn shape_identical_is_constant() {
        let sq = square_landmarks(16, 2.0);
        for t in [0.0, 0.3, 1.0] {
            let out = shape_geodesic(&sq, &sq, t).unwrap();
            assert!((out - &sq).amax() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let sq = square_landmarks(8, 1.0);
        assert!(shape_geodesic(&sq, &circle_landmarks(9, 1.0), 0.5).is_err());
        let flat = DMatrix::from_element(8, 2, 3.0);
        assert!(matches!(shape_geodesic(&sq, &flat, 0.5), Err(Error::DegenerateShape)));
    }

    #[test]
    fn shape_endpoints_follow_source_indexing() {
        let sq = square_landmarks(12, 1.0);
        // shuffle the source; output must stay indexed like the input
        let perm = [5, 0, 11, 3, 7, 1, 9, 2, 10, 4, 8, 6];
        let shuffled = sq.select_rows(&perm);
        let circ = circle_landmarks(12, 2.0);
        let start = shape_geodesic(&shuffled, &circ, 0.0).unwrap();
        assert!((start - &shuffled).amax() < 1e-10);
        let end = shape_geodesic(&shuffled, &circ, 1.0).unwrap();
        assert!((end - circ.select_rows(&perm)).amax() < 1e-10);
    }

    #[test]
    fn square_landmarks_walk_counterclockwise() {
        let sq = square_landmarks(8, 1.0);
        assert_eq!((sq[(0, 0)], sq[(0, 1)]), (1.0, 0.0));
        assert_eq!((sq[(2, 0)], sq[(2, 1)]), (0.0, 1.0));
        assert_eq!((sq[(4, 0)], sq[(4, 1)]), (-1.0, 0.0));
    }

    #[test]
    fn demo_shapes() {
        let rows = demo_rows(DemoKind::Sphere, 2).unwrap();
        let geo: Vec<_> = rows.iter().filter(|r| r.curve == "geodesic").collect();
        assert_eq!(geo.len(), 2);
        assert_eq!(geo[0].coords, vec![1.0, 0.0, 0.0]);
        assert_eq!(geo[1].coords, vec![0.0, 0.6, 0.8]);

        let rows = demo_rows(DemoKind::Shape, 2).unwrap();
        let ts: Vec<f64> = rows.iter().filter(|r| r.curve == "geodesic").map(|r| r.t).collect();
        assert_eq!(ts, SHAPE_SAMPLE_TIMES.to_vec());
        assert!(demo_rows(DemoKind::Sphere, 1).is_err());

        let mut buf = Vec::new();
        write_demo_csv(&demo_rows(DemoKind::Sphere, 3).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("curve,t,c0,c1,c2\n"));
        assert_eq!(text.lines().count(), 1 + 6);
    }
}
