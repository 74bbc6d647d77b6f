//! Model Riemannian manifolds: Euclidean spaces, odd spheres, SU(2) with a
//! bi-invariant metric, and Riemannian products of these.
//!
//! Every factor is realised in ambient coordinates. A sphere of radius `R`
//! lives in `R^{2k}` as `{|x| = R}` with the induced metric; SU(2) is the unit
//! quaternions in `R^4` with metric `s^2 <.,.>`, so that `d(1, -1) = s * pi`.
//! A product concatenates the ambient coordinates of its factors and carries
//! the orthogonal sum metric. Tangent vectors are ambient vectors orthogonal
//! to the normal directions of each compact factor.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling;
use crate::{Error, Result};

/// Tolerance on `|x| = R` (relative to `R`) and on tangency.
pub const MANIFOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupName {
    SU2,
}

/// One irreducible factor of a model space.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Euclidean { n: usize },
    /// `S^dim` of radius `radius`, embedded in `R^{dim+1}`; `dim` is odd.
    Sphere { dim: usize, radius: f64 },
    /// Compact simple group with bi-invariant metric; `d(1, -1) = scale * pi`.
    Group { name: GroupName, scale: f64 },
}

impl Factor {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Factor::Euclidean { n } => n,
            Factor::Sphere { dim, .. } => dim + 1,
            Factor::Group { .. } => 4,
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match *self {
            Factor::Euclidean { n } => n,
            Factor::Sphere { dim, .. } => dim,
            Factor::Group { .. } => 3,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, Factor::Euclidean { .. })
    }

    /// Radius of the ambient sphere carrying a compact factor.
    pub fn ambient_radius(&self) -> f64 {
        match *self {
            Factor::Euclidean { .. } => f64::INFINITY,
            Factor::Sphere { radius, .. } => radius,
            Factor::Group { .. } => 1.0,
        }
    }

    /// `h = scale^2 * <.,.>` on ambient tangent vectors.
    pub fn metric_scale(&self) -> f64 {
        match *self {
            Factor::Group { scale, .. } => scale,
            _ => 1.0,
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match *self {
            Factor::Euclidean { .. } => f64::INFINITY,
            Factor::Sphere { radius, .. } => PI * radius,
            Factor::Group { scale, .. } => PI * scale,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Factor::Euclidean { n: 0 } => {
                Err(Error::InvalidSpace("euclidean dimension must be >= 1".into()))
            }
            Factor::Sphere { dim, radius } => {
                if dim % 2 == 0 {
                    return Err(Error::InvalidSpace(format!("sphere dimension {dim} is not odd")));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidSpace(format!("sphere radius {radius} must be > 0")));
                }
                Ok(())
            }
            Factor::Group { scale, .. } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::InvalidSpace(format!("group scale {scale} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Factor::Euclidean { .. } => x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            _ => {
                let r = self.ambient_radius();
                self.metric_scale() * r * unit_angle(x, y, r)
            }
        }
    }
}

/// Angle between `x/r` and `y/r`, accurate near 0 and near pi.
fn unit_angle(x: &[f64], y: &[f64], r: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        diff += ((a - b) / r).powi(2);
        sum += ((a + b) / r).powi(2);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// A model space: a Riemannian product of one or more factors.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct SpaceDescriptor {
    factors: Vec<Factor>,
    offsets: Vec<usize>,
    ambient_dim: usize,
}

impl fmt::Debug for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.factors).finish()
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self
            .factors
            .iter()
            .map(|factor| match *factor {
                Factor::Euclidean { n } => format!("E{n}"),
                Factor::Sphere { dim, radius } => format!("S{dim}(R={radius})"),
                Factor::Group { scale, .. } => format!("SU2(s={scale})"),
            })
            .collect();
        f.write_str(&names.join(" x "))
    }
}

impl SpaceDescriptor {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSpace("a product needs at least one factor".into()));
        }
        for factor in &factors {
            factor.validate()?;
        }
        let mut offsets = Vec::with_capacity(factors.len());
        let mut ambient_dim = 0;
        for factor in &factors {
            offsets.push(ambient_dim);
            ambient_dim += factor.ambient_dim();
        }
        Ok(Self { factors, offsets, ambient_dim })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(vec![Factor::Euclidean { n }])
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![Factor::Sphere { dim, radius }])
    }

    pub fn su2(scale: f64) -> Result<Self> {
        Self::new(vec![Factor::Group { name: GroupName::SU2, scale }])
    }

    /// Product of spaces; nested products are flattened.
    pub fn product(spaces: impl IntoIterator<Item = SpaceDescriptor>) -> Result<Self> {
        Self::new(spaces.into_iter().flat_map(|s| s.factors).collect())
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.factors[i].ambient_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    /// Injectivity radius of `h`; infinite for purely Euclidean spaces.
    pub fn injectivity_radius(&self) -> f64 {
        self.factors
            .iter()
            .map(Factor::injectivity_radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Validates coordinates and wraps them as a point.
    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        if coords.len() != self.ambient_dim {
            return Err(Error::Domain(format!(
                "point has {} coordinates, space {} needs {}",
                coords.len(),
                self,
                self.ambient_dim
            )));
        }
        for (i, factor) in self.factors.iter().enumerate() {
            if factor.is_compact() {
                let r = factor.ambient_radius();
                let norm = coords.rows_range(self.factor_range(i)).norm();
                if (norm - r).abs() > MANIFOLD_TOL * r.max(1.0) {
                    return Err(Error::Domain(format!(
                        "factor {i} coordinates have norm {norm}, expected {r}"
                    )));
                }
            }
        }
        Ok(Point(coords))
    }

    /// Like [`SpaceDescriptor::point`] but renormalises compact factors first.
    pub fn point_normalized(&self, coords: DVector<f64>) -> Result<Point> {
        if coords.len() != self.ambient_dim {
            return self.point(coords);
        }
        Ok(self.normalize(coords))
    }

    pub(crate) fn normalize(&self, mut coords: DVector<f64>) -> Point {
        for (i, factor) in self.factors.iter().enumerate() {
            if factor.is_compact() {
                let r = factor.ambient_radius();
                let mut block = coords.rows_range_mut(self.factor_range(i));
                let norm = block.norm();
                if norm > 0.0 {
                    block *= r / norm;
                }
            }
        }
        Point(coords)
    }

    /// Orthogonal projection of an ambient vector onto `T_x`.
    pub fn project(&self, x: &Point, w: &DVector<f64>) -> DVector<f64> {
        let mut out = w.clone();
        for (i, factor) in self.factors.iter().enumerate() {
            if factor.is_compact() {
                let range = self.factor_range(i);
                let r2 = factor.ambient_radius().powi(2);
                let xb = x.0.rows_range(range.clone());
                let coef = out.rows_range(range.clone()).dot(&xb) / r2;
                out.rows_range_mut(range).axpy(-coef, &xb, 1.0);
            }
        }
        out
    }

    pub fn is_tangent(&self, x: &Point, v: &DVector<f64>) -> bool {
        self.factors.iter().enumerate().all(|(i, factor)| {
            if !factor.is_compact() {
                return true;
            }
            let range = self.factor_range(i);
            let xb = x.0.rows_range(range.clone());
            let vb = v.rows_range(range);
            vb.dot(&xb).abs() <= MANIFOLD_TOL * (1.0 + vb.norm() * xb.norm())
        })
    }

    /// Riemannian inner product of tangent vectors (the metric is the same at
    /// every base point in ambient coordinates).
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, factor)| {
                let range = self.factor_range(i);
                factor.metric_scale().powi(2) * u.rows_range(range.clone()).dot(&v.rows_range(range))
            })
            .sum()
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).sqrt()
    }

    /// `h`-geodesic `gamma(t)` with `gamma(0) = x`, `gamma'(0) = v`.
    pub fn exp(&self, x: &Point, v: &DVector<f64>, t: f64) -> Point {
        let mut out = DVector::zeros(self.ambient_dim);
        for (i, factor) in self.factors.iter().enumerate() {
            let range = self.factor_range(i);
            let xb = x.0.rows_range(range.clone());
            let vb = v.rows_range(range.clone());
            let mut ob = out.rows_range_mut(range);
            if factor.is_compact() {
                let r = factor.ambient_radius();
                let speed = vb.norm();
                if speed * t.abs() < 1e-300 {
                    ob.copy_from(&xb);
                    continue;
                }
                let theta = speed * t / r;
                ob.copy_from(&(xb * theta.cos() + vb * (r * theta.sin() / speed)));
            } else {
                ob.copy_from(&(xb + vb * t));
            }
        }
        self.normalize(out)
    }

    /// Inverse of `exp` at `x`: the initial velocity of the minimising
    /// geodesic reaching `y` at time 1. At antipodes the direction is the
    /// first frame vector.
    pub fn log(&self, x: &Point, y: &Point) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim);
        for (i, factor) in self.factors.iter().enumerate() {
            let range = self.factor_range(i);
            let xb = x.0.rows_range(range.clone()).into_owned();
            let yb = y.0.rows_range(range.clone()).into_owned();
            if !factor.is_compact() {
                out.rows_range_mut(range).copy_from(&(yb - xb));
                continue;
            }
            let r = factor.ambient_radius();
            let angle = unit_angle(xb.as_slice(), yb.as_slice(), r);
            if angle == 0.0 {
                continue;
            }
            let xh = &xb / r;
            let mut w = &yb / r - &xh * (yb.dot(&xh) / r);
            let wn = w.norm();
            if wn < 1e-14 {
                w = first_tangent(&xh);
            } else {
                w /= wn;
            }
            out.rows_range_mut(range).copy_from(&(w * (r * angle)));
        }
        out
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        self.factor_distances(x, y).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    pub fn factor_distances(&self, x: &Point, y: &Point) -> Vec<f64> {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, factor)| {
                let range = self.factor_range(i);
                factor.distance(&x.0.as_slice()[range.clone()], &y.0.as_slice()[range])
            })
            .collect()
    }

    /// Midpoint of the minimising geodesic from `x` to `y` and its velocity
    /// there, for the parametrisation on `[0, 1]`.
    pub fn geodesic_midpoint(&self, x: &Point, y: &Point) -> (Point, DVector<f64>) {
        let v = self.log(x, y);
        let mid = self.exp(x, &v, 0.5);
        let mut vel = DVector::zeros(self.ambient_dim);
        for (i, factor) in self.factors.iter().enumerate() {
            let range = self.factor_range(i);
            let vb = v.rows_range(range.clone());
            if !factor.is_compact() {
                vel.rows_range_mut(range).copy_from(&vb);
                continue;
            }
            // Along a great circle the tangent at the midpoint is parallel to
            // the chord; the speed is the arc length.
            let chord = y.0.rows_range(range.clone()) - x.0.rows_range(range.clone());
            let cn = chord.norm();
            if cn > 1e-300 {
                vel.rows_range_mut(range).copy_from(&(chord * (vb.norm() / cn)));
            } else {
                let mb = mid.0.rows_range(range.clone()).into_owned();
                let r = factor.ambient_radius();
                #[allow(clippy::op_ref)]
                let proj = &vb - &mb * (vb.dot(&mb) / (r * r));
                vel.rows_range_mut(range).copy_from(&proj);
            }
        }
        (mid, vel)
    }

    /// `h`-orthonormal basis of `T_x` (columns are ambient vectors), built by
    /// Gram-Schmidt from the projected ambient basis in index order.
    pub fn orthonormal_frame(&self, x: &Point) -> DMatrix<f64> {
        let mut frame = self.chart_frame(x);
        let mut col = 0;
        for factor in &self.factors {
            let s = factor.metric_scale();
            for _ in 0..factor.dim() {
                frame.column_mut(col).unscale_mut(s);
                col += 1;
            }
        }
        frame
    }

    /// Ambient-orthonormal basis of `T_x`, block diagonal over factors.
    pub fn chart_frame(&self, x: &Point) -> DMatrix<f64> {
        let mut frame = DMatrix::zeros(self.ambient_dim, self.dim());
        let mut col = 0;
        for (i, factor) in self.factors.iter().enumerate() {
            let range = self.factor_range(i);
            let n = factor.ambient_dim();
            if !factor.is_compact() {
                for j in 0..n {
                    frame[(range.start + j, col + j)] = 1.0;
                }
                col += n;
                continue;
            }
            let xh = x.0.rows_range(range.clone()) / factor.ambient_radius();
            let block = tangent_basis(&xh, factor.dim());
            frame
                .view_mut((range.start, col), (n, factor.dim()))
                .copy_from(&block);
            col += factor.dim();
        }
        frame
    }

    /// Retraction chart centred at `x` with ambient-orthonormal frame `e`:
    /// `p(xi) = x + e xi` on Euclidean factors and the radial projection of
    /// `x + e xi` on compact factors.
    pub fn chart_point(&self, x: &Point, e: &DMatrix<f64>, xi: &DVector<f64>) -> Point {
        self.normalize(&x.0 + e * xi)
    }

    /// Differential of [`SpaceDescriptor::chart_point`] at `xi` applied to `eta`.
    pub fn chart_push(&self, x: &Point, e: &DMatrix<f64>, xi: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let z = &x.0 + e * xi;
        let mut dz = e * eta;
        for (i, factor) in self.factors.iter().enumerate() {
            if !factor.is_compact() {
                continue;
            }
            let range = self.factor_range(i);
            let r = factor.ambient_radius();
            let zb = z.rows_range(range.clone());
            let zn = zb.norm();
            let coef = zb.dot(&dz.rows_range(range.clone())) / (zn * zn);
            let block = (dz.rows_range(range.clone()) - zb * coef) * (r / zn);
            dz.rows_range_mut(range).copy_from(&block);
        }
        dz
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.sample_point_in(rng, sampling::DEFAULT_BOX)
    }

    /// Quasi-uniform point; Euclidean factors are drawn from `[-half_width, half_width]^n`.
    pub fn sample_point_in<R: Rng + ?Sized>(&self, rng: &mut R, half_width: f64) -> Point {
        let mut coords = DVector::zeros(self.ambient_dim);
        for (i, factor) in self.factors.iter().enumerate() {
            let block = match factor {
                Factor::Euclidean { n } => sampling::in_box(rng, *n, half_width),
                _ => sampling::on_sphere(rng, factor.ambient_dim(), factor.ambient_radius()),
            };
            coords.rows_range_mut(self.factor_range(i)).copy_from(&block);
        }
        Point(coords)
    }

    /// Random `h`-unit tangent vector at `x`.
    pub fn sample_unit_tangent<R: Rng + ?Sized>(&self, rng: &mut R, x: &Point) -> DVector<f64> {
        let frame = self.orthonormal_frame(x);
        let c = sampling::on_sphere(rng, self.dim(), 1.0);
        frame * c
    }
}

fn first_tangent(xh: &DVector<f64>) -> DVector<f64> {
    tangent_basis(xh, xh.len() - 1).column(0).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the unit vector `xh`.
fn tangent_basis(xh: &DVector<f64>, dim: usize) -> DMatrix<f64> {
    let n = xh.len();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for j in 0..n {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(n);
        v[j] = 1.0;
        // Two Gram-Schmidt passes keep the basis orthonormal to rounding.
        for _ in 0..2 {
            let c = v.dot(xh);
            v.axpy(-c, xh, 1.0);
            for b in &basis {
                let c = v.dot(b);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_columns(&basis)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SpaceRepr {
    Euclidean {
        n: usize,
    },
    Sphere {
        dim: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Group {
        name: GroupName,
        #[serde(default = "unit")]
        scale: f64,
    },
    Product {
        factors: Vec<SpaceRepr>,
    },
}

fn unit() -> f64 {
    1.0
}

impl SpaceRepr {
    fn flatten_into(self, out: &mut Vec<Factor>) {
        match self {
            SpaceRepr::Euclidean { n } => out.push(Factor::Euclidean { n }),
            SpaceRepr::Sphere { dim, radius } => out.push(Factor::Sphere { dim, radius }),
            SpaceRepr::Group { name, scale } => out.push(Factor::Group { name, scale }),
            SpaceRepr::Product { factors } => factors.into_iter().for_each(|f| f.flatten_into(out)),
        }
    }
}

impl From<&Factor> for SpaceRepr {
    fn from(factor: &Factor) -> Self {
        match *factor {
            Factor::Euclidean { n } => SpaceRepr::Euclidean { n },
            Factor::Sphere { dim, radius } => SpaceRepr::Sphere { dim, radius },
            Factor::Group { name, scale } => SpaceRepr::Group { name, scale },
        }
    }
}

impl TryFrom<SpaceRepr> for SpaceDescriptor {
    type Error = Error;

    fn try_from(repr: SpaceRepr) -> Result<Self> {
        let mut factors = Vec::new();
        repr.flatten_into(&mut factors);
        SpaceDescriptor::new(factors)
    }
}

impl From<SpaceDescriptor> for SpaceRepr {
    fn from(space: SpaceDescriptor) -> Self {
        if space.factors.len() == 1 {
            SpaceRepr::from(&space.factors[0])
        } else {
            SpaceRepr::Product { factors: space.factors.iter().map(SpaceRepr::from).collect() }
        }
    }
}

/// A point of a model space in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub(crate) DVector<f64>);

impl Point {
    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    vector: DVector<f64>,
}

impl Tangent {
    pub fn new(space: &SpaceDescriptor, base: Point, vector: DVector<f64>) -> Result<Self> {
        if vector.len() != space.ambient_dim() {
            return Err(Error::Domain("tangent vector has the wrong dimension".into()));
        }
        if !space.is_tangent(&base, &vector) {
            return Err(Error::Domain("vector is not tangent at its base point".into()));
        }
        Ok(Self { base, vector })
    }

    /// Projects an arbitrary ambient vector onto `T_base`.
    pub fn projected(space: &SpaceDescriptor, base: Point, ambient: &DVector<f64>) -> Self {
        let vector = space.project(&base, ambient);
        Self { base, vector }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.vector
    }
}

/// Riemannian inner product of two tangent vectors at the same point.
pub fn h_inner(space: &SpaceDescriptor, u: &Tangent, v: &Tangent) -> Result<f64> {
    let gap = (&u.base.0 - &v.base.0).amax();
    if gap > MANIFOLD_TOL {
        return Err(Error::Domain(format!("tangent vectors based at different points (gap {gap:e})")));
    }
    Ok(space.inner(&u.vector, &v.vector))
}

pub fn h_exp(space: &SpaceDescriptor, v: &Tangent, t: f64) -> Point {
    space.exp(&v.base, &v.vector, t)
}

pub fn h_distance(space: &SpaceDescriptor, x: &Point, y: &Point) -> f64 {
    space.distance(x, y)
}

pub fn tangent_project(space: &SpaceDescriptor, x: &Point, w: &DVector<f64>) -> Tangent {
    Tangent::projected(space, x.clone(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn s3() -> SpaceDescriptor {
        SpaceDescriptor::sphere(3, 1.0).unwrap()
    }

    #[test]
    fn euclidean_basis_vectors_are_orthogonal() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let x = e2.point(dv(&[0.3, 0.4])).unwrap();
        let u = Tangent::new(&e2, x.clone(), dv(&[1.0, 0.0])).unwrap();
        let v = Tangent::new(&e2, x, dv(&[0.0, 1.0])).unwrap();
        assert_eq!(h_inner(&e2, &u, &v).unwrap(), 0.0);
    }

    #[test]
    fn sphere_inner_is_ambient_restriction() {
        let s = s3();
        let x = s.point(dv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let u = Tangent::new(&s, x, dv(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(h_inner(&s, &u, &u).unwrap(), 1.0);
    }

    #[test]
    fn product_inner_is_sum_of_factors() {
        let p = SpaceDescriptor::product([SpaceDescriptor::euclidean(1).unwrap(), s3()]).unwrap();
        let x = p.point(dv(&[2.0, 1.0, 0.0, 0.0, 0.0])).unwrap();
        let u = Tangent::new(&p, x.clone(), dv(&[3.0, 0.0, 1.0, 2.0, 0.0])).unwrap();
        let v = Tangent::new(&p, x, dv(&[-1.0, 0.0, 0.5, 0.0, 1.0])).unwrap();
        assert_eq!(h_inner(&p, &u, &v).unwrap(), -3.0 + 0.5);
    }

    #[test]
    fn mismatched_base_points_are_rejected() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let u = Tangent::new(&e2, e2.point(dv(&[0.0, 0.0])).unwrap(), dv(&[1.0, 0.0])).unwrap();
        let v = Tangent::new(&e2, e2.point(dv(&[1.0, 0.0])).unwrap(), dv(&[1.0, 0.0])).unwrap();
        assert!(matches!(h_inner(&e2, &u, &v), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_geodesics() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let x = e2.point(dv(&[1.0, 2.0])).unwrap();
        assert_eq!(e2.exp(&x, &dv(&[0.5, -1.0]), 2.0).coords(), &dv(&[2.0, 0.0]));

        let s = s3();
        let x = s.point(dv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let y = s.exp(&x, &dv(&[0.0, 1.0, 0.0, 0.0]), PI / 2.0);
        assert!((y.coords() - dv(&[0.0, 1.0, 0.0, 0.0])).norm() < 1e-15);

        let g = SpaceDescriptor::su2(1.0).unwrap();
        let one = g.point(dv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let minus_one = g.exp(&one, &dv(&[0.0, 1.0, 0.0, 0.0]), PI);
        assert!((minus_one.coords() + dv(&[1.0, 0.0, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn closed_form_distances() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let a = e2.point(dv(&[0.0, 0.0])).unwrap();
        let b = e2.point(dv(&[3.0, 4.0])).unwrap();
        assert_eq!(e2.distance(&a, &b), 5.0);

        let s = s3();
        let x = s.point(dv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let y = s.point(dv(&[-1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((s.distance(&x, &y) - PI).abs() < 1e-15);

        // d(1, -1) = s * pi pins the bi-invariant scale.
        let g = SpaceDescriptor::su2(2.5).unwrap();
        assert!((g.distance(&x, &y) - 2.5 * PI).abs() < 1e-14);
    }

    #[test]
    fn su2_distance_is_half_rotation_angle() {
        // x^-1 y = cos(theta/2) + sin(theta/2) n, distance = s * theta / 2.
        let g = SpaceDescriptor::su2(1.0).unwrap();
        let mut r = rng(3);
        for _ in 0..20 {
            let x = g.sample_point(&mut r);
            let y = g.sample_point(&mut r);
            let q = crate::quat::mul(&crate::quat::conj(&crate::quat::from_slice(x.as_slice())), &crate::quat::from_slice(y.as_slice()));
            let theta = 2.0 * q[0].clamp(-1.0, 1.0).acos();
            assert!((g.distance(&x, &y) - theta / 2.0).abs() < 1e-7);
        }
    }

    #[test]
    fn projection_kills_radial_direction_and_is_idempotent() {
        let s = SpaceDescriptor::sphere(5, 2.0).unwrap();
        let mut r = rng(11);
        for _ in 0..100 {
            let x = s.sample_point(&mut r);
            assert!(s.project(&x, x.coords()).norm() < 1e-14);
            let w = crate::sampling::gaussian_vector(&mut r, 6);
            let p = s.project(&x, &w);
            assert!((s.project(&x, &p) - &p).norm() < 1e-14);
            assert!(s.is_tangent(&x, &p));
        }
        let e = SpaceDescriptor::euclidean(3).unwrap();
        let x = e.sample_point(&mut r);
        let w = dv(&[1.0, -2.0, 3.0]);
        assert_eq!(e.project(&x, &w), w);
    }

    #[test]
    fn frames_are_h_orthonormal() {
        let p = SpaceDescriptor::product([
            s3(),
            SpaceDescriptor::su2(1.7).unwrap(),
            SpaceDescriptor::euclidean(2).unwrap(),
        ])
        .unwrap();
        let mut r = rng(5);
        for _ in 0..50 {
            let x = p.sample_point(&mut r);
            let f = p.orthonormal_frame(&x);
            assert_eq!(f.ncols(), 8);
            for i in 0..8 {
                assert!(p.is_tangent(&x, &f.column(i).into_owned()));
                for j in 0..8 {
                    let g = p.inner(&f.column(i).into_owned(), &f.column(j).into_owned());
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn log_inverts_exp() {
        let p = SpaceDescriptor::product([s3(), SpaceDescriptor::euclidean(2).unwrap()]).unwrap();
        let mut r = rng(8);
        for _ in 0..100 {
            let x = p.sample_point(&mut r);
            let y = p.sample_point(&mut r);
            let v = p.log(&x, &y);
            assert!((p.exp(&x, &v, 1.0).coords() - y.coords()).norm() < 1e-10);
            assert!((p.norm(&v) - p.distance(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_velocity_has_geodesic_length() {
        let s = s3();
        let mut r = rng(9);
        for _ in 0..20 {
            let x = s.sample_point(&mut r);
            let y = s.sample_point(&mut r);
            let (m, v) = s.geodesic_midpoint(&x, &y);
            assert!(s.is_tangent(&m, &v));
            assert!((s.norm(&v) - s.distance(&x, &y)).abs() < 1e-12);
            assert!((s.distance(&x, &m) - s.distance(&m, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn chart_push_matches_finite_difference() {
        let p = SpaceDescriptor::product([s3(), SpaceDescriptor::euclidean(2).unwrap()]).unwrap();
        let mut r = rng(12);
        let x = p.sample_point(&mut r);
        let e = p.chart_frame(&x);
        let xi = crate::sampling::gaussian_vector(&mut r, 5) * 0.1;
        let eta = crate::sampling::gaussian_vector(&mut r, 5);
        let h = 1e-6;
        let fd = (p.chart_point(&x, &e, &(&xi + &eta * h)).0 - p.chart_point(&x, &e, &(&xi - &eta * h)).0) / (2.0 * h);
        assert!((fd - p.chart_push(&x, &e, &xi, &eta)).norm() < 1e-8);
        // At the centre the differential is the frame itself.
        let zero = DVector::zeros(5);
        assert!((p.chart_push(&x, &e, &zero, &eta) - &e * &eta).norm() < 1e-14);
    }

    #[test]
    fn invalid_descriptors_are_rejected() {
        assert!(SpaceDescriptor::sphere(2, 1.0).is_err());
        assert!(SpaceDescriptor::sphere(3, 0.0).is_err());
        assert!(SpaceDescriptor::euclidean(0).is_err());
        assert!(SpaceDescriptor::su2(-1.0).is_err());
        assert!(SpaceDescriptor::new(vec![]).is_err());
        let s = s3();
        assert!(s.point(dv(&[1.0, 1.0, 0.0, 0.0])).is_err());
        assert!(s.point(dv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn json_descriptor_flattens_nested_products() {
        let json = r#"{"kind":"product","factors":[{"kind":"sphere","dim":3,"radius":1.0},
            {"kind":"product","factors":[{"kind":"euclidean","n":2},{"kind":"group","name":"SU2","scale":2.0}]}]}"#;
        let space: SpaceDescriptor = serde_json::from_str(json).unwrap();
        assert_eq!(space.factors().len(), 3);
        assert_eq!(space.ambient_dim(), 10);
        let back: SpaceDescriptor = serde_json::from_str(&serde_json::to_string(&space).unwrap()).unwrap();
        assert_eq!(back, space);
        let single: SpaceDescriptor = serde_json::from_str(r#"{"kind":"sphere","dim":3}"#).unwrap();
        assert_eq!(single, s3());
        assert!(serde_json::from_str::<SpaceDescriptor>(r#"{"kind":"sphere","dim":4}"#).is_err());
    }

    #[test]
    fn injectivity_radius_is_minimum_over_compact_factors() {
        assert!(SpaceDescriptor::euclidean(3).unwrap().injectivity_radius().is_infinite());
        let p = SpaceDescriptor::product([
            SpaceDescriptor::sphere(3, 2.0).unwrap(),
            SpaceDescriptor::su2(0.5).unwrap(),
            SpaceDescriptor::euclidean(1).unwrap(),
        ])
        .unwrap();
        assert!((p.injectivity_radius() - 0.5 * PI).abs() < 1e-15);
    }
}
