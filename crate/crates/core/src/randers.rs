//! Randers metrics in navigation form `(h, W)` and defining form
//! `F = sqrt(a_ij y^i y^j) + b_i y^i`, with the conversions between them.
//!
//! Pointwise tensors are expressed in a tangent frame at the base point.
//! [`NavigationData::defining_form`] uses the `h`-orthonormal Gram-Schmidt
//! frame of [`SpaceDescriptor::orthonormal_frame`]; arbitrary frames are
//! accepted by [`NavigationData::components`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::killing::KillingField;
use crate::sampling;
use crate::space::{Point, SpaceDescriptor, Tangent};
use crate::{Error, Result};

/// Winds with `|W|_h` at or above this are rejected as degenerate.
pub const DEGENERATE_WIND: f64 = 0.98;

/// Samples used when a navigation datum is validated on construction.
pub const VALIDATION_SAMPLES: usize = 256;

/// Relative finite-difference step for the fundamental tensor.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Navigation data: the model metric `h` of the wind's space and a Killing
/// wind `W` with `h(W, W) < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationData {
    wind: KillingField,
    /// Sampled supremum of `|W|_h`.
    wind_bound: f64,
}

impl NavigationData {
    /// Validates the wind on [`VALIDATION_SAMPLES`] points and rejects
    /// winds that are too strong or degenerate.
    pub fn new(wind: KillingField) -> Result<Self> {
        let nav = Self::unchecked(wind);
        let report = validate(&nav, VALIDATION_SAMPLES, 0);
        match report.status {
            WindStatus::Ok => Ok(nav),
            _ => Err(Error::WindTooStrong { lambda: report.lambda_margin }),
        }
    }

    /// Navigation data without the strength check; for diagnostics only.
    pub fn unchecked(wind: KillingField) -> Self {
        let mut nav = Self { wind, wind_bound: 0.0 };
        nav.wind_bound = validate(&nav, VALIDATION_SAMPLES, 0).max_wind_sq.sqrt();
        nav
    }

    /// The Riemannian case `W = 0`.
    pub fn riemannian(space: &SpaceDescriptor) -> Self {
        Self { wind: KillingField::zero(space), wind_bound: 0.0 }
    }

    /// Sampled supremum of `|W|_h`; exact for constant-length winds.
    pub fn wind_bound(&self) -> f64 {
        self.wind_bound
    }

    pub fn space(&self) -> &SpaceDescriptor {
        self.wind.space()
    }

    pub fn wind(&self) -> &KillingField {
        &self.wind
    }

    pub fn wind_at(&self, x: &Point) -> DVector<f64> {
        self.wind.evaluate(x)
    }

    /// `lambda(x) = 1 - h(W, W)(x)`.
    pub fn lambda(&self, x: &Point) -> f64 {
        let w = self.wind_at(x);
        1.0 - self.space().inner(&w, &w)
    }

    /// Finsler norm of the ambient tangent vector `y` at `x`.
    pub fn norm(&self, x: &Point, y: &DVector<f64>) -> f64 {
        let space = self.space();
        let w = self.wind_at(x);
        randers_norm(space.inner(y, y), space.inner(y, &w), 1.0 - space.inner(&w, &w))
    }

    /// `h_ij` and `W^i` in the frame whose columns are the ambient vectors of `frame`.
    pub fn components(&self, x: &Point, frame: &DMatrix<f64>) -> NavigationComponents {
        let space = self.space();
        let h = gram(space, frame);
        let w = frame_coordinates(space, frame, &self.wind_at(x));
        NavigationComponents { h, w }
    }

    /// Defining form at `x` in the orthonormal frame at `x`.
    pub fn defining_form(&self, x: &Point) -> Result<DefiningForm> {
        from_navigation(&self.components(x, &self.space().orthonormal_frame(x)))
    }
}

/// Evaluates `F = (sqrt(h(y,W)^2 + lambda h(y,y)) - h(y,W)) / lambda`.
///
/// When `h(y, W) > 0` the equivalent form `h(y,y) / (sqrt(..) + h(y,W))`
/// avoids cancellation.
pub fn randers_norm(h_yy: f64, h_yw: f64, lambda: f64) -> f64 {
    let s = (h_yw * h_yw + lambda * h_yy).sqrt();
    if h_yw <= 0.0 {
        (s - h_yw) / lambda
    } else {
        h_yy / (s + h_yw)
    }
}

/// Gram matrix `h(E_i, E_j)` of a frame.
pub fn gram(space: &SpaceDescriptor, frame: &DMatrix<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = frame.column_iter().map(|c| c.into_owned()).collect();
    DMatrix::from_fn(cols.len(), cols.len(), |i, j| space.inner(&cols[i], &cols[j]))
}

/// Coordinates of a tangent vector in a frame (least squares in `h`).
pub fn frame_coordinates(space: &SpaceDescriptor, frame: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let g = gram(space, frame);
    let rhs = DVector::from_iterator(frame.ncols(), frame.column_iter().map(|c| space.inner(&c.into_owned(), v)));
    g.cholesky().expect("frame vectors are linearly independent").solve(&rhs)
}

/// Navigation data at a point: `h_ij` and `W^i` in some frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationComponents {
    pub h: DMatrix<f64>,
    pub w: DVector<f64>,
}

impl NavigationComponents {
    pub fn lambda(&self) -> f64 {
        1.0 - self.w.dot(&(&self.h * &self.w))
    }

    pub fn norm(&self, y: &DVector<f64>) -> f64 {
        let hy = &self.h * y;
        randers_norm(y.dot(&hy), hy.dot(&self.w), self.lambda())
    }
}

/// Defining form at a point: `a_ij` symmetric positive definite, `b_i` a covector.
#[derive(Debug, Clone, PartialEq)]
pub struct DefiningForm {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DefiningForm {
    /// `|beta|_alpha = sqrt(a^ij b_i b_j)`.
    pub fn beta_norm(&self) -> Result<f64> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("a_ij is not positive definite".into()))?;
        Ok(self.b.dot(&chol.solve(&self.b)).sqrt())
    }

    pub fn norm(&self, y: &DVector<f64>) -> f64 {
        y.dot(&(&self.a * y)).sqrt() + self.b.dot(y)
    }
}

/// `a_ij = h_ij / lambda + W_i W_j / lambda^2`, `b_i = -W_i / lambda` with `W_i = h_ij W^j`.
pub fn from_navigation(nav: &NavigationComponents) -> Result<DefiningForm> {
    let lambda = nav.lambda();
    if !(lambda > 0.0) {
        return Err(Error::WindTooStrong { lambda });
    }
    let w_low = &nav.h * &nav.w;
    let a = &nav.h / lambda + &w_low * w_low.transpose() / (lambda * lambda);
    let b = -w_low / lambda;
    Ok(DefiningForm { a: symmetrize(a), b })
}

/// `h_ij = (1 - |b|^2)(a_ij - b_i b_j)`, `W^i = -a^ij b_j / (1 - |b|^2)`.
pub fn to_navigation(df: &DefiningForm) -> Result<NavigationComponents> {
    let chol = df
        .a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("a_ij is not positive definite".into()))?;
    let b_up = chol.solve(&df.b);
    let b2 = df.b.dot(&b_up);
    if b2 >= 1.0 {
        return Err(Error::NotRanders { norm: b2.sqrt() });
    }
    let eps = 1.0 - b2;
    let h = (&df.a - &df.b * df.b.transpose()) * eps;
    let w = -b_up / eps;
    Ok(NavigationComponents { h: symmetrize(h), w })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Finsler norm of a tangent vector.
pub fn finsler_norm(nav: &NavigationData, y: &Tangent) -> f64 {
    nav.norm(y.base(), y.vector())
}

/// `F = alpha + beta` evaluated on frame coordinates.
pub fn finsler_norm_defining(df: &DefiningForm, y: &DVector<f64>) -> f64 {
    df.norm(y)
}

/// `g_ij(x, y) = 1/2 [F^2]_{y^i y^j}` in the orthonormal frame at `x`.
#[derive(Debug, Clone)]
pub struct FundamentalTensor {
    pub base: Point,
    pub direction: DVector<f64>,
    pub frame: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl FundamentalTensor {
    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.g.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }
}

/// Central finite-difference Hessian of `F^2 / 2` in the direction
/// coordinates, step [`HESSIAN_STEP`] relative to `|y|`, symmetrised.
pub fn fundamental_tensor(nav: &NavigationData, x: &Point, y: &DVector<f64>) -> Result<FundamentalTensor> {
    let space = nav.space();
    let frame = space.orthonormal_frame(x);
    let comps = nav.components(x, &frame);
    let c = frame_coordinates(space, &frame, y);
    let scale = c.norm();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::UndefinedDirection);
    }
    let energy = |v: &DVector<f64>| 0.5 * comps.norm(v).powi(2);
    let g = finite_difference_hessian(&energy, &c, HESSIAN_STEP * scale);
    Ok(FundamentalTensor { base: x.clone(), direction: y.clone(), frame, g })
}

/// Central-difference Hessian of a scalar function, symmetrised.
pub fn finite_difference_hessian(f: &dyn Fn(&DVector<f64>) -> f64, at: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let n = at.len();
    let f0 = f(at);
    let mut g = DMatrix::zeros(n, n);
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut p = at.clone();
        p[i] += si * step;
        p[j] += sj * step;
        f(&p)
    };
    for i in 0..n {
        let mut p = at.clone();
        p[i] += step;
        let fp = f(&p);
        p[i] -= 2.0 * step;
        let fm = f(&p);
        g[(i, i)] = (fp - 2.0 * f0 + fm) / (step * step);
        for j in 0..i {
            let v = (shifted(i, 1.0, j, 1.0) - shifted(i, 1.0, j, -1.0) - shifted(i, -1.0, j, 1.0)
                + shifted(i, -1.0, j, -1.0))
                / (4.0 * step * step);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindStatus {
    Ok,
    /// `DEGENERATE_WIND <= |W|_h < 1`: still Randers but rejected.
    Degenerate,
    NotRanders,
}

/// Sampled wind diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub max_wind_sq: f64,
    /// Smallest sampled `lambda = 1 - h(W, W)`.
    pub lambda_margin: f64,
    /// `max - min` of the sampled `|W|_h`.
    pub length_deviation: f64,
    pub samples: usize,
    pub status: WindStatus,
}

/// Reports the largest sampled `h(W, W)`, the `lambda` margin, and how far
/// the wind is from constant length.
pub fn validate(nav: &NavigationData, samples: usize, seed: u64) -> Diagnostics {
    let space = nav.space();
    let mut rng = sampling::rng(seed);
    let (mut max_sq, mut min_len, mut max_len) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..samples.max(1) {
        let x = space.sample_point(&mut rng);
        let w = nav.wind_at(&x);
        let sq = space.inner(&w, &w);
        max_sq = max_sq.max(sq);
        min_len = min_len.min(sq.sqrt());
        max_len = max_len.max(sq.sqrt());
    }
    let status = if max_sq >= 1.0 {
        WindStatus::NotRanders
    } else if max_sq.sqrt() >= DEGENERATE_WIND {
        WindStatus::Degenerate
    } else {
        WindStatus::Ok
    };
    Diagnostics {
        max_wind_sq: max_sq,
        lambda_margin: 1.0 - max_sq,
        length_deviation: max_len - min_len,
        samples: samples.max(1),
        status,
    }
}
