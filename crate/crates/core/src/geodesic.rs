//! Finsler geodesics and the asymmetric distance of a Randers space whose
//! wind is a Killing field.
//!
//! For a Killing wind the set reachable from `x` in time `t` is
//! `phi_{W;t}(B_h(x, t))`, so the `F`-distance from `x` to `y` is the
//! smallest `t >= 0` with
//!
//! ```text
//! g(t) = d_h(x, phi_{W;-t}(y)) - t = 0.
//! ```
//!
//! Because `phi_{W;-t}(y)` moves at `h`-speed at most `|W|_h < 1`, `g` is
//! strictly decreasing and the root lies in `[0, d_h(x, y) / (1 - |W|_h)]`.

use nalgebra::{DMatrix, DVector};

use crate::killing::{finsler_length_stats, ConstantLengthFamily, KillingField};
use crate::optimize;
use crate::randers::{finite_difference_hessian, NavigationData};
use crate::space::Point;
use crate::{Error, Result};

/// Bisection tolerance on `t`.
pub const BISECTION_TOL: f64 = 1e-10;

/// The bracketing scan uses `injectivity radius / SCAN_DIVISIONS` steps.
pub const SCAN_DIVISIONS: f64 = 64.0;

/// Matching residual accepted by [`f_geodesic_flowcurve`].
pub const FLOWCURVE_MATCH_TOL: f64 = 1e-8;

/// Allowed spread of `F(X + W)` over sampled points for a flow curve.
pub const FLOWCURVE_LENGTH_TOL: f64 = 1e-9;
const FLOWCURVE_LENGTH_SAMPLES: usize = 64;

/// Relative drift of `F(gamma')` that flags an ODE path as diverged.
pub const ODE_DIVERGENCE_TOL: f64 = 1e-6;

/// `g(t) = d_h(x, phi_{W;-t}(y)) - t`.
pub fn distance_residual(nav: &NavigationData, x: &Point, y: &Point, t: f64) -> f64 {
    let moved = nav.wind().flow(y, -t);
    nav.space().distance(x, &moved) - t
}

/// `F`-distance from `x` to `y` with the default tolerance.
pub fn f_distance(nav: &NavigationData, x: &Point, y: &Point) -> Result<f64> {
    f_distance_with_tol(nav, x, y, BISECTION_TOL)
}

/// Smallest root of [`distance_residual`]: a scan brackets the first sign
/// change, then bisection narrows it to `tol`.
pub fn f_distance_with_tol(nav: &NavigationData, x: &Point, y: &Point, tol: f64) -> Result<f64> {
    let space = nav.space();
    let d_h = space.distance(x, y);
    if d_h == 0.0 {
        return Ok(0.0);
    }
    let speed = nav.wind_bound();
    let upper = d_h / (1.0 - speed).max(1e-12);
    let step = (space.injectivity_radius() / SCAN_DIVISIONS).min(upper / SCAN_DIVISIONS);
    let mut g = |t: f64| distance_residual(nav, x, y, t);
    // The sampled wind bound may undershoot for non-constant winds, so the
    // scan is allowed to run past the nominal bracket.
    let limit = 2.0 * upper;
    let (lo, hi) = optimize::scan_for_root(&mut g, 0.0, step, limit).ok_or(Error::RootNotBracketed { upper: limit })?;
    if lo == hi {
        return Ok(lo);
    }
    Ok(optimize::bisect(&mut g, lo, hi, tol))
}

/// Length below which unit-speed flow-curve geodesics are minimising: the
/// injectivity radius of `h` (infinite on Euclidean spaces).
pub fn minimality_horizon(nav: &NavigationData) -> f64 {
    nav.space().injectivity_radius()
}

#[derive(Debug, Clone)]
pub enum GeodesicRepr {
    /// `t -> phi_{field;t}(start)` for a Killing field of constant `F`-length.
    FlowCurve { field: KillingField },
    /// Points and velocities on the grid `k * step`.
    OdePath { points: Vec<Point>, velocities: Vec<DVector<f64>>, step: f64 },
}

#[derive(Debug, Clone)]
pub struct GeodesicCurve {
    pub start: Point,
    pub repr: GeodesicRepr,
    pub duration: f64,
    pub unit_speed: bool,
    /// Set when an ODE path drifted in `F`-speed beyond [`ODE_DIVERGENCE_TOL`].
    pub diverged: bool,
}

impl GeodesicCurve {
    /// Point at time `t`; ODE paths interpolate linearly between grid
    /// points and renormalise.
    pub fn at(&self, nav: &NavigationData, t: f64) -> Point {
        match &self.repr {
            GeodesicRepr::FlowCurve { field } => field.flow(&self.start, t),
            GeodesicRepr::OdePath { points, step, .. } => {
                let s = (t / step).clamp(0.0, (points.len() - 1) as f64);
                let k = (s.floor() as usize).min(points.len() - 1);
                if k + 1 >= points.len() {
                    return points[k].clone();
                }
                let frac = s - k as f64;
                let mix = points[k].coords() * (1.0 - frac) + points[k + 1].coords() * frac;
                nav.space().normalize(mix)
            }
        }
    }

    pub fn velocity(&self, nav: &NavigationData, t: f64) -> DVector<f64> {
        match &self.repr {
            GeodesicRepr::FlowCurve { field } => field.evaluate(&self.at(nav, t)),
            GeodesicRepr::OdePath { velocities, step, .. } => {
                let k = ((t / step).round().max(0.0) as usize).min(velocities.len() - 1);
                velocities[k].clone()
            }
        }
    }

    /// `n + 1` equally spaced samples `(t, point)` over `[0, duration]`.
    pub fn sample(&self, nav: &NavigationData, n: usize) -> Vec<(f64, Point)> {
        (0..=n)
            .map(|k| {
                let t = self.duration * k as f64 / n.max(1) as f64;
                (t, self.at(nav, t))
            })
            .collect()
    }
}

/// `F`-arc-length of a curve on `[0, t]` by composite Simpson quadrature.
pub fn finsler_length(nav: &NavigationData, curve: &GeodesicCurve, t: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = t / n as f64;
    let speed = |s: f64| nav.norm(&curve.at(nav, s), &curve.velocity(nav, s));
    let mut sum = speed(0.0) + speed(t);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * speed(k as f64 * h);
    }
    sum * h / 3.0
}

/// The unit-speed geodesic from `x` in direction `y` as the flow curve of
/// `X + W`, with `X` the constant-length family member realising
/// `y / F(y) - W(x)`.
pub fn f_geodesic_flowcurve(nav: &NavigationData, x: &Point, y: &DVector<f64>, duration: f64) -> Result<GeodesicCurve> {
    let family = ConstantLengthFamily::new(nav)?;
    let space = nav.space();
    let y = space.project(x, y);
    let fy = nav.norm(x, &y);
    if !(fy > 0.0) {
        return Err(Error::UndefinedDirection);
    }
    let unit = &y / fy;
    let member = family.member_for_direction(x, &(&unit - nav.wind_at(x)));
    let field = member.add(nav.wind());
    let residual = space.norm(&(field.evaluate(x) - &unit));
    if residual > FLOWCURVE_MATCH_TOL {
        return Err(Error::NoMatchingField { residual });
    }
    let spread = finsler_length_stats(nav, &field, FLOWCURVE_LENGTH_SAMPLES, 0).deviation();
    if spread > FLOWCURVE_LENGTH_TOL {
        return Err(Error::NoMatchingField { residual: spread });
    }
    Ok(GeodesicCurve {
        start: x.clone(),
        repr: GeodesicRepr::FlowCurve { field },
        duration,
        unit_speed: true,
        diverged: false,
    })
}

/// `L(xi, eta) = F(p(xi), Dp(xi) eta)^2 / 2` in a retraction chart.
struct ChartLagrangian<'a> {
    nav: &'a NavigationData,
    center: Point,
    frame: DMatrix<f64>,
}

impl ChartLagrangian<'_> {
    fn value(&self, xi: &DVector<f64>, eta: &DVector<f64>) -> f64 {
        let space = self.nav.space();
        let p = space.chart_point(&self.center, &self.frame, xi);
        let v = space.chart_push(&self.center, &self.frame, xi, eta);
        0.5 * self.nav.norm(&p, &v).powi(2)
    }

    /// Solves the Euler-Lagrange equations
    /// `L_{eta eta} xi'' = L_xi - L_{eta xi} eta` with every derivative
    /// taken by central differences.
    fn acceleration(&self, xi: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        let n = xi.len();
        let hv = 1e-4 * eta.norm().max(1e-8);
        let hx = 1e-4;
        let g = finite_difference_hessian(&|v: &DVector<f64>| self.value(xi, v), eta, hv);
        let mut rhs = DVector::zeros(n);
        for j in 0..n {
            let mut xp = xi.clone();
            xp[j] += hx;
            let mut xm = xi.clone();
            xm[j] -= hx;
            rhs[j] += (self.value(&xp, eta) - self.value(&xm, eta)) / (2.0 * hx);
            // Column j of L_{eta xi}, contracted with eta.
            let mut mixed_col = DVector::zeros(n);
            for i in 0..n {
                let mut ep = eta.clone();
                ep[i] += hv;
                let mut em = eta.clone();
                em[i] -= hv;
                mixed_col[i] = (self.value(&xp, &ep) - self.value(&xp, &em) - self.value(&xm, &ep) + self.value(&xm, &em))
                    / (4.0 * hx * hv);
            }
            rhs -= mixed_col * eta[j];
        }
        g.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(n, f64::NAN))
    }
}

/// Fixed-step RK4 integration of the geodesic equations of `F^2 / 2`.
///
/// Each step works in a retraction chart centred at the current point and
/// maps the result back to the manifold, which re-projects it exactly. The
/// `F`-speed is a first integral; its relative drift above
/// [`ODE_DIVERGENCE_TOL`] sets the divergence flag.
pub fn f_geodesic_ode(nav: &NavigationData, x: &Point, y: &DVector<f64>, duration: f64, step: f64) -> Result<GeodesicCurve> {
    let space = nav.space();
    let y = space.project(x, y);
    let speed0 = nav.norm(x, &y);
    if !(speed0 > 0.0) {
        return Err(Error::UndefinedDirection);
    }
    if !(step > 0.0) || !(duration >= 0.0) {
        return Err(Error::Config(format!("invalid step {step} or duration {duration}")));
    }
    let steps = (duration / step).round().max(1.0) as usize;
    let h = duration / steps as f64;
    let mut points = vec![x.clone()];
    let mut velocities = vec![y.clone()];
    let mut diverged = false;
    let (mut p, mut v) = (x.clone(), y);
    for _ in 0..steps {
        let frame = space.chart_frame(&p);
        let chart = ChartLagrangian { nav, center: p.clone(), frame };
        let xi0 = DVector::zeros(space.dim());
        let eta0 = chart.frame.transpose() * &v;
        let accel = |xi: &DVector<f64>, eta: &DVector<f64>| chart.acceleration(xi, eta);
        let k1x = eta0.clone();
        let k1v = accel(&xi0, &eta0);
        let k2x = &eta0 + &k1v * (h / 2.0);
        let k2v = accel(&(&xi0 + &k1x * (h / 2.0)), &k2x);
        let k3x = &eta0 + &k2v * (h / 2.0);
        let k3v = accel(&(&xi0 + &k2x * (h / 2.0)), &k3x);
        let k4x = &eta0 + &k3v * h;
        let k4v = accel(&(&xi0 + &k3x * h), &k4x);
        let xi1 = (&k1x + &k2x * 2.0 + &k3x * 2.0 + &k4x) * (h / 6.0);
        let eta1 = &eta0 + (&k1v + &k2v * 2.0 + &k3v * 2.0 + &k4v) * (h / 6.0);
        let next = space.chart_point(&chart.center, &chart.frame, &xi1);
        let next_v = space.chart_push(&chart.center, &chart.frame, &xi1, &eta1);
        if !next.coords().iter().chain(next_v.iter()).all(|c| c.is_finite()) {
            diverged = true;
            break;
        }
        let speed = nav.norm(&next, &next_v);
        if (speed - speed0).abs() > ODE_DIVERGENCE_TOL * speed0 {
            diverged = true;
        }
        p = next;
        v = next_v;
        points.push(p.clone());
        velocities.push(v.clone());
    }
    let duration = h * (points.len() - 1) as f64;
    Ok(GeodesicCurve {
        start: x.clone(),
        repr: GeodesicRepr::OdePath { points, velocities, step: h },
        duration,
        unit_speed: (speed0 - 1.0).abs() < 1e-12,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::killing::Generator;
    use crate::sampling;
    use crate::space::SpaceDescriptor;
    use std::f64::consts::PI;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn euclid_nav() -> NavigationData {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        NavigationData::new(KillingField::translation(&e2, 0, dv(&[0.5, 0.0])).unwrap()).unwrap()
    }

    fn hopf_nav(c: f64) -> NavigationData {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        NavigationData::new(KillingField::hopf(&s3, 0, c).unwrap()).unwrap()
    }

    #[test]
    fn euclidean_distance_fixtures() {
        let nav = euclid_nav();
        let o = nav.space().point(dv(&[0.0, 0.0])).unwrap();
        let e1 = nav.space().point(dv(&[1.0, 0.0])).unwrap();
        assert!((f_distance(&nav, &o, &e1).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        assert!((f_distance(&nav, &e1, &o).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(f_distance(&nav, &o, &o).unwrap(), 0.0);
    }

    #[test]
    fn minkowski_distance_is_norm_of_displacement() {
        let nav = euclid_nav();
        let mut rng = sampling::rng(3);
        for _ in 0..50 {
            let x = nav.space().sample_point(&mut rng);
            let y = nav.space().sample_point(&mut rng);
            let d = f_distance(&nav, &x, &y).unwrap();
            let expect = nav.norm(&x, &(y.coords() - x.coords()));
            assert!((d - expect).abs() < 1e-9, "{d} vs {expect}");
        }
    }

    #[test]
    fn riemannian_distance_is_symmetric() {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let nav = NavigationData::riemannian(&s3);
        let mut rng = sampling::rng(4);
        for _ in 0..20 {
            let x = s3.sample_point(&mut rng);
            let y = s3.sample_point(&mut rng);
            let d = f_distance(&nav, &x, &y).unwrap();
            assert!((d - s3.distance(&x, &y)).abs() < 1e-10);
            assert!((d - f_distance(&nav, &y, &x).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn hopf_wind_breaks_symmetry_along_fibres() {
        let nav = hopf_nav(0.3);
        let x = nav.space().point(dv(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let y = nav.wind().flow(&x, 1.0 / 0.3);
        let forward = f_distance(&nav, &x, &y).unwrap();
        let backward = f_distance(&nav, &y, &x).unwrap();
        // Along the fibre the wind helps one way (speed 1.3) and hinders the other (0.7).
        assert!((forward - 1.0 / 1.3).abs() < 1e-9);
        assert!((backward - 1.0 / 0.7).abs() < 1e-9);
    }

    #[test]
    fn flowcurve_on_euclidean_space() {
        let nav = euclid_nav();
        let x = nav.space().point(dv(&[0.0, 0.0])).unwrap();
        let curve = f_geodesic_flowcurve(&nav, &x, &dv(&[1.5, 0.0]), 1.0).unwrap();
        let GeodesicRepr::FlowCurve { field } = &curve.repr else { panic!() };
        let member = field.sub(nav.wind());
        assert_eq!(member.generator(0), &Generator::Euclidean { rotation: DMatrix::zeros(2, 2), translation: dv(&[1.0, 0.0]) });
        assert!((curve.at(&nav, 0.6).coords() - dv(&[0.9, 0.0])).norm() < 1e-15);
        assert!((finsler_length(&nav, &curve, 1.0, 16) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn riemannian_flowcurve_is_great_circle() {
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let nav = NavigationData::riemannian(&s3);
        let mut rng = sampling::rng(5);
        let x = s3.sample_point(&mut rng);
        let u = s3.sample_unit_tangent(&mut rng, &x);
        let curve = f_geodesic_flowcurve(&nav, &x, &u, PI).unwrap();
        for k in 0..10 {
            let t = 0.3 * k as f64;
            assert!((curve.at(&nav, t).coords() - s3.exp(&x, &u, t).coords()).norm() < 1e-13);
        }
    }

    #[test]
    fn flowcurve_has_unit_finsler_speed() {
        let nav = hopf_nav(0.3);
        let mut rng = sampling::rng(6);
        let x = nav.space().sample_point(&mut rng);
        let y = nav.space().sample_unit_tangent(&mut rng, &x);
        let curve = f_geodesic_flowcurve(&nav, &x, &y, 1.0).unwrap();
        assert!((finsler_length(&nav, &curve, 0.7, 32) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ode_paths_are_straight_on_minkowski_space() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        for nav in [NavigationData::riemannian(&e2), euclid_nav()] {
            let x = e2.point(dv(&[0.2, -0.1])).unwrap();
            let y = dv(&[0.3, 0.8]);
            let curve = f_geodesic_ode(&nav, &x, &y, 1.0, 1e-2).unwrap();
            assert!(!curve.diverged);
            for (t, p) in curve.sample(&nav, 10) {
                assert!((p.coords() - (x.coords() + &y * t)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn ode_matches_flowcurve_on_hopf_sphere() {
        let nav = hopf_nav(0.3);
        let mut rng = sampling::rng(7);
        let x = nav.space().sample_point(&mut rng);
        let u = nav.space().sample_unit_tangent(&mut rng, &x);
        let y = &u + nav.wind_at(&x);
        let flow = f_geodesic_flowcurve(&nav, &x, &y, 1.0).unwrap();
        let ode = f_geodesic_ode(&nav, &x, &y, 1.0, 1e-3).unwrap();
        assert!(!ode.diverged);
        for (t, p) in ode.sample(&nav, 20) {
            assert!((p.coords() - flow.at(&nav, t).coords()).norm() < 1e-5);
        }
    }

    #[test]
    fn distance_along_flowcurve_equals_time() {
        let nav = hopf_nav(0.3);
        let mut rng = sampling::rng(8);
        let horizon = minimality_horizon(&nav);
        for _ in 0..20 {
            let x = nav.space().sample_point(&mut rng);
            let y = nav.space().sample_unit_tangent(&mut rng, &x) + nav.wind_at(&x);
            let curve = f_geodesic_flowcurve(&nav, &x, &y, horizon).unwrap();
            for t in [0.1, 1.0, 0.9 * horizon] {
                let d = f_distance(&nav, &x, &curve.at(&nav, t)).unwrap();
                assert!((d - t).abs() < 1e-6, "t = {t}, d = {d}");
            }
        }
    }
}
