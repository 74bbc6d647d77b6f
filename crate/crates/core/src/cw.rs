//! Executable Clifford-Wolf checks: displacement constancy of an isometry,
//! the small-time threshold, exhaustion of tangent directions by
//! constant-length fields, and connecting two points by a CW flow.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geodesic::f_distance;
use crate::killing::{finsler_length_stats, ConstantLengthFamily, KillingField, LENGTH_SAMPLES};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::oracle::WeightedGraph;
use crate::randers::NavigationData;
use crate::sampling;
use crate::space::Point;
use crate::{Error, Result};

/// Default relative tolerance on `(max - min) / mean`.
pub const CW_TOL: f64 = 1e-4;
pub const EXHAUSTION_TOL: f64 = 1e-6;
pub const CONNECT_TOL: f64 = 1e-6;
/// Starts of the multi-start search in [`cw_connect`].
pub const CONNECT_STARTS: usize = 8;

/// A composition of Killing flows, applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    steps: Vec<(KillingField, f64)>,
}

impl Isometry {
    pub fn flow(field: &KillingField, t: f64) -> Self {
        Self { steps: vec![(field.clone(), t)] }
    }

    /// `other` applied after `self`.
    pub fn then(mut self, field: &KillingField, t: f64) -> Self {
        self.steps.push((field.clone(), t));
        self
    }

    pub fn apply(&self, x: &Point) -> Point {
        self.steps.iter().fold(x.clone(), |p, (field, t)| field.flow(&p, *t))
    }

    pub fn describe(&self) -> String {
        self.steps
            .iter()
            .map(|(field, t)| format!("flow(t={t}) of {:?}", field.generators()))
            .collect::<Vec<_>>()
            .join(" then ")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DisplacementSample {
    pub point: Vec<f64>,
    pub displacement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpotCheck {
    pub sample: usize,
    pub analytic: f64,
    pub oracle: f64,
    pub error_hint: f64,
    /// `analytic <= oracle + 1e-9` and `|oracle - analytic| <= error_hint`.
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CwReport {
    pub isometry: String,
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// `(max - min) / mean`, zero when every displacement vanishes.
    pub spread: f64,
    pub tolerance: f64,
    pub cw: bool,
    pub table: Vec<DisplacementSample>,
    pub spot_checks: Vec<SpotCheck>,
}

/// Samples `d(x, rho(x))` with [`f_distance`] at `samples` random points.
pub fn cw_displacement_check(nav: &NavigationData, isometry: &Isometry, samples: usize, tol: f64, seed: u64) -> Result<CwReport> {
    if !(tol > 0.0) || samples == 0 {
        return Err(Error::Config(format!("need tol > 0 and samples > 0, got {tol}, {samples}")));
    }
    let space = nav.space();
    let mut rng = sampling::rng(seed);
    let points: Vec<Point> = (0..samples).map(|_| space.sample_point(&mut rng)).collect();
    let table = points
        .par_iter()
        .map(|x| {
            let d = f_distance(nav, x, &isometry.apply(x))?;
            Ok(DisplacementSample { point: x.as_slice().to_vec(), displacement: d })
        })
        .collect::<Result<Vec<_>>>()?;
    let min = table.iter().map(|s| s.displacement).fold(f64::INFINITY, f64::min);
    let max = table.iter().map(|s| s.displacement).fold(0.0, f64::max);
    let mean = table.iter().map(|s| s.displacement).sum::<f64>() / samples as f64;
    let spread = if max == 0.0 { 0.0 } else { (max - min) / mean };
    Ok(CwReport {
        isometry: isometry.describe(),
        samples,
        min,
        max,
        mean,
        spread,
        tolerance: tol,
        cw: spread < tol,
        table,
        spot_checks: Vec::new(),
    })
}

/// Compares the first `count` samples of a report against the oracle.
pub fn spot_check(report: &mut CwReport, nav: &NavigationData, isometry: &Isometry, oracle: &WeightedGraph, count: usize) -> Result<()> {
    let space = nav.space();
    for (i, s) in report.table.iter().take(count).enumerate() {
        let x = space.point(DVector::from_column_slice(&s.point))?;
        let est = oracle.distance(&x, &isometry.apply(&x));
        report.spot_checks.push(SpotCheck {
            sample: i,
            analytic: s.displacement,
            oracle: est.estimate,
            error_hint: est.error_hint,
            agrees: s.displacement <= est.estimate + 1e-9 && (est.estimate - s.displacement).abs() <= est.error_hint,
        });
    }
    Ok(())
}

/// `inj(h) / L` for a field of constant `F`-length `L`; infinite on
/// Euclidean spaces and for the zero field.
pub fn small_time_threshold(nav: &NavigationData, field: &KillingField) -> f64 {
    let stats = finsler_length_stats(nav, field, LENGTH_SAMPLES, 0);
    if stats.max == 0.0 {
        return f64::INFINITY;
    }
    nav.space().injectivity_radius() / stats.max
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionResidual {
    pub direction: Vec<f64>,
    /// Angle between `(X + W)(x)` and the target direction.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionReport {
    pub base: Vec<f64>,
    pub directions: Vec<DirectionResidual>,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `h`-angle between two tangent vectors, stable near zero.
fn h_angle(nav: &NavigationData, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let space = nav.space();
    let a = a / space.norm(a);
    let b = b / space.norm(b);
    2.0 * space.norm(&(&a - &b)).atan2(space.norm(&(&a + &b)))
}

/// For `n_directions` random `F`-unit directions `y` at `x`, realises `y` as
/// `(X + W)(x)` with `X` from the family and records the angular residual.
pub fn direction_exhaustion_check(
    nav: &NavigationData,
    x: &Point,
    family: &ConstantLengthFamily,
    n_directions: usize,
    tol: f64,
    seed: u64,
) -> Result<ExhaustionReport> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("need tol > 0, got {tol}")));
    }
    let space = nav.space();
    let mut rng = sampling::rng(seed);
    let w = nav.wind_at(x);
    let directions = (0..n_directions)
        .map(|_| {
            let u = space.sample_unit_tangent(&mut rng, x) * rng.random_range(0.1..2.0);
            let y = &u / nav.norm(x, &u);
            let member = family.member_for_direction(x, &(&y - &w));
            let realised = member.evaluate(x) + &w;
            DirectionResidual { residual: h_angle(nav, &realised, &y), direction: y.as_slice().to_vec() }
        })
        .collect::<Vec<_>>();
    let worst = directions.iter().map(|d| d.residual).fold(0.0, f64::max);
    Ok(ExhaustionReport { base: x.as_slice().to_vec(), directions, worst, tolerance: tol, pass: worst < tol })
}

#[derive(Debug, Clone)]
pub struct Connection {
    /// Family member `X`; the connecting flow is that of `X + W`.
    pub member: KillingField,
    pub time: f64,
    /// `d_h(phi_{X+W;t}(x0), x1)`.
    pub residual: f64,
}

impl Connection {
    pub fn field(&self, nav: &NavigationData) -> KillingField {
        self.member.add(nav.wind())
    }

    pub fn isometry(&self, nav: &NavigationData) -> Isometry {
        Isometry::flow(&self.field(nav), self.time)
    }
}

/// Finds `X` in the constant-length family with `phi_{X+W;t}(x0) = x1` at
/// `t = f_distance(x0, x1)`.
///
/// Members are parametrised by their value at `x0` in an orthonormal frame.
/// The geodesic through `x0` and `phi_{W;-t}(x1)` gives the first start; the
/// others perturb it with seeded noise. Each start is refined by Nelder-Mead
/// and the best residual wins, ties going to the smallest parameter.
pub fn cw_connect(nav: &NavigationData, x0: &Point, x1: &Point, seed: u64) -> Result<Connection> {
    let space = nav.space();
    let family = ConstantLengthFamily::new(nav)?;
    let t = f_distance(nav, x0, x1)?;
    if t == 0.0 {
        return Ok(Connection { member: KillingField::zero(space), time: 0.0, residual: 0.0 });
    }
    let frame = space.orthonormal_frame(x0);
    let member_at = |theta: &DVector<f64>| {
        let u = &frame * theta;
        let len = space.norm(&u);
        family.member_for_direction(x0, &(u / len.max(f64::MIN_POSITIVE)))
    };
    let wind = nav.wind();
    let mut residual = |theta: &DVector<f64>| {
        let field = member_at(theta).add(wind);
        space.distance(&field.flow(x0, t), x1)
    };
    let target = wind.flow(x1, -t);
    let guess_u = space.log(x0, &target) / t;
    let gram = frame.transpose() * &frame;
    let guess = gram.clone().lu().solve(&(frame.transpose() * &guess_u)).unwrap_or_else(|| DVector::zeros(frame.ncols()));
    let guess = if guess.norm() > 0.0 { guess.normalize() } else { DVector::from_element(frame.ncols(), 1.0).normalize() };

    let mut rng = sampling::rng(seed);
    let opts = NelderMeadOptions { initial_step: 0.05, max_evals: 600, f_tol: 1e-18, target: 1e-13 };
    let mut best: Option<(f64, DVector<f64>)> = None;
    for start in 0..CONNECT_STARTS {
        let x_start = if start == 0 {
            guess.clone()
        } else {
            let noise = sampling::gaussian_vector(&mut rng, guess.len()) * 0.2;
            (&guess + noise).normalize()
        };
        let m = nelder_mead(&mut residual, &x_start, &opts);
        let theta = m.x.normalize();
        let value = residual(&theta);
        let better = match &best {
            None => true,
            Some((v, b)) => value < *v - 1e-15 || ((value - v).abs() <= 1e-15 && theta.norm() < b.norm()),
        };
        if better {
            best = Some((value, theta));
        }
    }
    let (value, theta) = best.expect("at least one start");
    if value >= CONNECT_TOL {
        return Err(Error::SearchFailed { residual: value });
    }
    Ok(Connection { member: member_at(&theta), time: t, residual: value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::killing::Generator;
    use crate::space::SpaceDescriptor;
    use nalgebra::{DMatrix, Vector3};
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

    fn su2_nav() -> NavigationData {
        let g = SpaceDescriptor::su2(1.0).unwrap();
        let w = Generator::Group { left: Vector3::new(0.3, 0.0, 0.0), right: Vector3::zeros() };
        NavigationData::new(KillingField::new(&g, vec![w]).unwrap()).unwrap()
    }

    fn rot12() -> DMatrix<f64> {
        let mut a = DMatrix::zeros(4, 4);
        a[(1, 0)] = 1.0;
        a[(0, 1)] = -1.0;
        a[(3, 2)] = 2.0;
        a[(2, 3)] = -2.0;
        a
    }

    #[test]
    fn euclidean_translation_is_cw() {
        let nav = euclid_nav();
        let field = KillingField::translation(nav.space(), 0, dv(&[1.5, 0.0])).unwrap();
        let report = cw_displacement_check(&nav, &Isometry::flow(&field, 1.0), 20, CW_TOL, 1).unwrap();
        assert!(report.cw);
        assert!((report.min - 1.0).abs() < 1e-9 && (report.max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hopf_family_flow_is_cw_and_rotation_is_not() {
        let nav = hopf_nav(0.3);
        let family = ConstantLengthFamily::new(&nav).unwrap();
        let member = family.sample_member(&mut sampling::rng(2), 1.0);
        let report = cw_displacement_check(&nav, &Isometry::flow(&member.add(nav.wind()), 0.1), 100, CW_TOL, 3).unwrap();
        assert!(report.cw, "{}", report.spread);
        assert!(report.max - report.min < 1e-5);

        let s3 = nav.space().clone();
        let riemannian = NavigationData::riemannian(&s3);
        let rot = KillingField::new(&s3, vec![Generator::Sphere(rot12())]).unwrap();
        let control = cw_displacement_check(&riemannian, &Isometry::flow(&rot, 0.1), 100, CW_TOL, 3).unwrap();
        assert!(!control.cw);
        assert!(control.max - control.min > 0.05);
    }

    #[test]
    fn negative_controls_fail_on_every_space() {
        let e2 = euclid_nav();
        let mut rot = DMatrix::zeros(2, 2);
        rot[(1, 0)] = 1.0;
        rot[(0, 1)] = -1.0;
        let e_rot = KillingField::new(e2.space(), vec![Generator::Euclidean { rotation: rot, translation: dv(&[0.0, 0.0]) }]).unwrap();

        let g = su2_nav();
        let both = Generator::Group { left: Vector3::new(1.0, 0.0, 0.0), right: Vector3::new(1.0, 0.0, 0.0) };
        let g_both = KillingField::new(g.space(), vec![both]).unwrap();

        let s = hopf_nav(0.3);
        let s_rot = KillingField::new(s.space(), vec![Generator::Sphere(rot12())]).unwrap();

        for (nav, field) in [(&e2, &e_rot), (&g, &g_both), (&s, &s_rot)] {
            let report = cw_displacement_check(nav, &Isometry::flow(field, 0.5), 50, CW_TOL, 4).unwrap();
            assert!(!report.cw, "{}: spread {}", nav.space(), report.spread);
        }
    }

    #[test]
    fn small_time_thresholds() {
        assert!(small_time_threshold(&euclid_nav(), &KillingField::translation(euclid_nav().space(), 0, dv(&[1.5, 0.0])).unwrap()).is_infinite());
        let s3 = SpaceDescriptor::sphere(3, 1.0).unwrap();
        let nav = NavigationData::riemannian(&s3);
        let hopf = KillingField::hopf(&s3, 0, 1.0).unwrap();
        assert!((small_time_threshold(&nav, &hopf) - PI).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_sufficient_for_random_members() {
        let nav = hopf_nav(0.3);
        let family = ConstantLengthFamily::new(&nav).unwrap();
        let mut rng = sampling::rng(9);
        for i in 0..20 {
            let field = family.sample_member(&mut rng, 1.0).add(nav.wind());
            let t = 0.5 * small_time_threshold(&nav, &field);
            let report = cw_displacement_check(&nav, &Isometry::flow(&field, t), 10, CW_TOL, i).unwrap();
            assert!(report.cw, "member {i}: spread {}", report.spread);
        }
    }

    #[test]
    fn exhaustion_on_model_spaces() {
        let e2 = SpaceDescriptor::euclidean(2).unwrap();
        let s3e2 = SpaceDescriptor::product([SpaceDescriptor::sphere(3, 1.0).unwrap(), e2.clone()]).unwrap();
        let prod_wind = KillingField::hopf(&s3e2, 0, 0.3).unwrap().add(&KillingField::translation(&s3e2, 1, dv(&[0.2, 0.1])).unwrap());
        let navs = [euclid_nav(), hopf_nav(0.3), su2_nav(), NavigationData::new(prod_wind).unwrap()];
        for (i, nav) in navs.iter().enumerate() {
            let x = nav.space().sample_point(&mut sampling::rng(i as u64));
            let family = ConstantLengthFamily::new(nav).unwrap();
            let report = direction_exhaustion_check(nav, &x, &family, 50, EXHAUSTION_TOL, 5).unwrap();
            assert!(report.pass, "{}: {}", nav.space(), report.worst);
        }
        let nav = euclid_nav();
        let x = nav.space().point(dv(&[0.3, 0.4])).unwrap();
        let report = direction_exhaustion_check(&nav, &x, &ConstantLengthFamily::new(&nav).unwrap(), 20, EXHAUSTION_TOL, 6).unwrap();
        assert!(report.worst < 1e-15);
    }

    #[test]
    fn euclidean_connection_is_minkowski_solution() {
        let nav = euclid_nav();
        let x0 = nav.space().point(dv(&[0.2, -0.3])).unwrap();
        let x1 = nav.space().point(dv(&[1.1, 0.4])).unwrap();
        let c = cw_connect(&nav, &x0, &x1, 0).unwrap();
        let d = x1.coords() - x0.coords();
        assert!((c.time - nav.norm(&x0, &d)).abs() < 1e-9);
        let expected = &d / c.time - dv(&[0.5, 0.0]);
        let Generator::Euclidean { translation, .. } = c.member.generator(0) else { panic!() };
        assert!((translation - expected).norm() < 1e-6);
        assert!(c.residual < CONNECT_TOL);
        assert_eq!(cw_connect(&nav, &x0, &x0, 0).unwrap().time, 0.0);
    }

    #[test]
    fn hopf_connection_for_nearby_pair() {
        let nav = hopf_nav(0.3);
        let mut rng = sampling::rng(10);
        let x0 = nav.space().sample_point(&mut rng);
        let u = nav.space().sample_unit_tangent(&mut rng, &x0);
        let x1 = nav.space().exp(&x0, &u, 0.3);
        let c = cw_connect(&nav, &x0, &x1, 1).unwrap();
        assert!(c.residual < CONNECT_TOL);
        let report = cw_displacement_check(&nav, &c.isometry(&nav), 30, CW_TOL, 2).unwrap();
        assert!(report.cw);
        assert!((report.mean - c.time).abs() < 1e-8);
    }

    #[test]
    fn composition_of_connections_is_cw() {
        let e2 = euclid_nav();
        let s1e2 = SpaceDescriptor::product([SpaceDescriptor::sphere(1, 1.0).unwrap(), SpaceDescriptor::euclidean(2).unwrap()]).unwrap();
        let prod = NavigationData::new(KillingField::hopf(&s1e2, 0, 0.3).unwrap()).unwrap();
        for nav in [&e2, &prod] {
            let mut rng = sampling::rng(11);
            let x0 = nav.space().sample_point_in(&mut rng, 1.0);
            let x1 = nav.space().sample_point_in(&mut rng, 1.0);
            let x2 = nav.space().sample_point_in(&mut rng, 1.0);
            let a = cw_connect(nav, &x0, &x1, 2).unwrap();
            let b = cw_connect(nav, &x1, &x2, 3).unwrap();
            let (fa, fb) = (a.field(nav), b.field(nav));
            assert!(fa.commutator(&fb).generator_norm() < 1e-12);
            let composed = a.isometry(nav).then(&fb, b.time);
            assert!(nav.space().distance(&composed.apply(&x0), &x2) < 1e-6);
            // Commuting flows compose to the flow of the time-weighted sum.
            let total = a.time + b.time;
            let sum = fa.combine(&fb, a.time / total, b.time / total);
            let report = cw_displacement_check(nav, &Isometry::flow(&sum, total), 30, CW_TOL, 4).unwrap();
            assert!(report.cw, "{}: {}", nav.space(), report.spread);
            let seq = cw_displacement_check(nav, &composed, 30, CW_TOL, 4).unwrap();
            assert!(seq.cw);
        }
    }
}
