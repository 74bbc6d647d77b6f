//! Acceptance criteria as plain functions, run by the `acceptance` test
//! target and the `selftest` command.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cw::{self, Isometry, CW_TOL};
use crate::geodesic::f_distance;
use crate::killing::{ConstantLengthFamily, Generator, KillingField};
use crate::oracle::{GraphKey, NetGraph};
use crate::randers::{self, fundamental_tensor, NavigationComponents, NavigationData};
use crate::sampling;
use crate::space::{Point, SpaceDescriptor};

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub budget: Option<Duration>,
}

impl Outcome {
    /// `PASS [3] name (0.12 s): detail`
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget: Option<Duration>,
    check: fn() -> (bool, String),
}

impl Criterion {
    pub fn run(&self) -> Outcome {
        let start = Instant::now();
        let (ok, mut detail) = (self.check)();
        let elapsed = start.elapsed();
        let in_time = self.budget.is_none_or(|b| elapsed < b);
        if !in_time {
            detail = format!("{detail}; over budget {:?}", self.budget.unwrap());
        }
        Outcome { id: self.id, name: self.name, passed: ok && in_time, detail, elapsed, budget: self.budget }
    }
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, secs: Option<u64>, check| Criterion { id, name, budget: secs.map(Duration::from_secs), check };
    vec![
        c(1, "conversion round trip", Some(1), conversion_round_trip),
        c(2, "norm fixtures and indicatrix", Some(1), norm_fixtures),
        c(3, "fundamental tensor", None, fundamental_tensor_pd),
        c(4, "flow identity", None, flow_identity),
        c(5, "CW displacement constancy", Some(120), cw_constancy),
        c(6, "distance oracle agreement", Some(300), oracle_agreement),
        c(7, "direction exhaustion", None, direction_exhaustion),
        c(8, "CW connection", None, cw_connection),
        c(9, "quasi-metric axioms", None, quasi_metric),
    ]
}

pub fn run(id: u32) -> Option<Outcome> {
    criteria().into_iter().find(|c| c.id == id).map(|c| c.run())
}

pub fn run_all() -> Vec<Outcome> {
    criteria().iter().map(Criterion::run).collect()
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn e2() -> SpaceDescriptor {
    SpaceDescriptor::euclidean(2).unwrap()
}

fn s3() -> SpaceDescriptor {
    SpaceDescriptor::sphere(3, 1.0).unwrap()
}

fn s3e2() -> SpaceDescriptor {
    SpaceDescriptor::product([s3(), e2()]).unwrap()
}

pub fn euclidean_fixture() -> NavigationData {
    NavigationData::new(KillingField::translation(&e2(), 0, dv(&[0.5, 0.0])).unwrap()).unwrap()
}

pub fn hopf_fixture(c: f64) -> NavigationData {
    NavigationData::new(KillingField::hopf(&s3(), 0, c).unwrap()).unwrap()
}

pub fn su2_fixture() -> NavigationData {
    let g = SpaceDescriptor::su2(1.0).unwrap();
    let w = Generator::Group { left: Vector3::new(0.3, 0.0, 0.0), right: Vector3::zeros() };
    NavigationData::new(KillingField::new(&g, vec![w]).unwrap()).unwrap()
}

pub fn product_fixture() -> NavigationData {
    let space = s3e2();
    let w = KillingField::hopf(&space, 0, 0.3).unwrap().add(&KillingField::translation(&space, 1, dv(&[0.2, 0.0])).unwrap());
    NavigationData::new(w).unwrap()
}

/// The fixture of every model space kind, with a wind of constant length.
pub fn fixtures() -> Vec<(&'static str, NavigationData)> {
    let s5 = SpaceDescriptor::sphere(5, 2.0).unwrap();
    vec![
        ("E2", euclidean_fixture()),
        ("S3 Hopf", hopf_fixture(0.3)),
        ("S5(R=2) Hopf", NavigationData::new(KillingField::hopf(&s5, 0, 0.2).unwrap()).unwrap()),
        ("SU2", su2_fixture()),
        ("S3xE2", product_fixture()),
    ]
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn conversion_round_trip() -> (bool, String) {
    let mut worst = 0.0f64;
    for (i, (_, nav)) in fixtures().iter().enumerate() {
        let space = nav.space();
        let mut rng = sampling::rng(100 + i as u64);
        for _ in 0..200 {
            let x = space.sample_point(&mut rng);
            // A random, generally non-orthonormal frame makes h a full matrix.
            let mixing = DMatrix::from_fn(space.dim(), space.dim(), |_, _| rng.random_range(-1.0..1.0))
                + DMatrix::identity(space.dim(), space.dim()) * 2.0;
            let frame = space.orthonormal_frame(&x) * mixing;
            let h = randers::gram(space, &frame);
            let dir = sampling::gaussian_vector(&mut rng, space.dim());
            let h_norm = (dir.transpose() * &h * &dir)[(0, 0)].sqrt();
            let w = dir * (rng.random_range(0.0..0.95) / h_norm);
            let comps = NavigationComponents { h: h.clone(), w: w.clone() };
            let back = randers::from_navigation(&comps).and_then(|df| randers::to_navigation(&df));
            match back {
                Ok(b) => worst = worst.max(max_abs(&(&b.h - &h))).max((&b.w - &w).amax()),
                Err(e) => return (false, format!("conversion failed: {e}")),
            }
        }
    }
    let nav = euclidean_fixture();
    let o = nav.space().point(dv(&[0.0, 0.0])).unwrap();
    let df = nav.defining_form(&o).unwrap();
    let a_err = max_abs(&(&df.a - DMatrix::from_row_slice(2, 2, &[16.0 / 9.0, 0.0, 0.0, 4.0 / 3.0])));
    let b_err = (&df.b - dv(&[-2.0 / 3.0, 0.0])).amax();
    let ok = worst < 1e-10 && a_err < 1e-14 && b_err < 1e-14;
    (ok, format!("round-trip max error {worst:.2e} over 5x200; fixture a err {a_err:.1e}, b err {b_err:.1e}"))
}

fn norm_fixtures() -> (bool, String) {
    let nav = euclidean_fixture();
    let o = nav.space().point(dv(&[0.0, 0.0])).unwrap();
    let fixture_err = [(dv(&[1.0, 0.0]), 2.0 / 3.0), (dv(&[-1.0, 0.0]), 2.0), (dv(&[0.5, 0.0]), 1.0 / 3.0)]
        .iter()
        .map(|(y, f)| (nav.norm(&o, y) - f).abs())
        .fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (i, (_, nav)) in fixtures().iter().enumerate() {
        let space = nav.space();
        let mut rng = sampling::rng(200 + i as u64);
        for _ in 0..500 {
            let x = space.sample_point(&mut rng);
            let u = space.sample_unit_tangent(&mut rng, &x);
            worst = worst.max((nav.norm(&x, &(nav.wind_at(&x) + u)) - 1.0).abs());
        }
    }
    let ok = fixture_err < 1e-14 && worst < 1e-12;
    (ok, format!("fixture error {fixture_err:.1e}; indicatrix max error {worst:.2e} over 5x500"))
}

/// A random wind of `h`-length at most `bound` on one of the fixture spaces.
fn random_wind<R: Rng>(rng: &mut R, kind: usize, bound: f64) -> NavigationData {
    let c = rng.random_range(0.0..bound);
    let space = fixtures()[kind].1.space().clone();
    let wind = match kind {
        0 => KillingField::translation(&space, 0, sampling::on_sphere(rng, 2, c)).unwrap(),
        1 | 2 => KillingField::hopf(&space, 0, c / space.factors()[0].ambient_radius()).unwrap(),
        3 => {
            let v = sampling::on_sphere(rng, 3, c);
            KillingField::new(&space, vec![Generator::Group { left: Vector3::new(v[0], v[1], v[2]), right: Vector3::zeros() }])
                .unwrap()
        }
        _ => {
            let split = sampling::on_sphere(rng, 2, c);
            KillingField::hopf(&space, 0, split[0].abs())
                .unwrap()
                .add(&KillingField::translation(&space, 1, sampling::on_sphere(rng, 2, split[1].abs())).unwrap())
        }
    };
    NavigationData::new(wind).unwrap()
}

fn fundamental_tensor_pd() -> (bool, String) {
    let mut rng = sampling::rng(300);
    let mut min_eig = f64::INFINITY;
    for i in 0..500 {
        let nav = random_wind(&mut rng, i % 5, 0.9);
        let x = nav.space().sample_point(&mut rng);
        let y = nav.space().sample_unit_tangent(&mut rng, &x) * rng.random_range(0.1..3.0);
        match fundamental_tensor(&nav, &x, &y) {
            Ok(g) => min_eig = min_eig.min(g.min_eigenvalue()),
            Err(e) => return (false, format!("sample {i}: {e}")),
        }
    }
    let mut riemann_err = 0.0f64;
    for (_, nav) in fixtures() {
        let nav = NavigationData::riemannian(nav.space());
        for _ in 0..20 {
            let x = nav.space().sample_point(&mut rng);
            let y = nav.space().sample_unit_tangent(&mut rng, &x);
            let g = fundamental_tensor(&nav, &x, &y).unwrap();
            let id = DMatrix::identity(g.g.nrows(), g.g.ncols());
            riemann_err = riemann_err.max(max_abs(&(&g.g - id)));
        }
    }
    let ok = min_eig > 0.0 && riemann_err < 1e-6;
    (ok, format!("min eigenvalue {min_eig:.3e} over 500 samples; |g - h| = {riemann_err:.1e} for W = 0"))
}

fn flow_identity() -> (bool, String) {
    let mut worst = 0.0f64;
    for (i, nav) in [hopf_fixture(0.3), su2_fixture()].iter().enumerate() {
        let family = ConstantLengthFamily::new(nav).unwrap();
        let mut rng = sampling::rng(400 + i as u64);
        for _ in 0..100 {
            let x = nav.space().sample_point(&mut rng);
            let member = family.sample_member(&mut rng, 1.0);
            let t = rng.random_range(0.0..=2.0);
            let joint = member.add(nav.wind()).flow(&x, t);
            let split = member.flow(&nav.wind().flow(&x, t), t);
            worst = worst.max((joint.coords() - split.coords()).norm());
        }
    }
    (worst < 1e-9, format!("max deviation {worst:.2e} over 2x100 samples"))
}

fn rotation_control(space: &SpaceDescriptor) -> KillingField {
    let mut a = DMatrix::zeros(4, 4);
    a[(1, 0)] = 1.0;
    a[(0, 1)] = -1.0;
    a[(3, 2)] = 2.0;
    a[(2, 3)] = -2.0;
    KillingField::new(space, vec![Generator::Sphere(a)]).unwrap()
}

fn cw_constancy() -> (bool, String) {
    let nav = hopf_fixture(0.3);
    let family = ConstantLengthFamily::new(&nav).unwrap();
    let member = family.sample_member(&mut sampling::rng(500), 1.0);
    let field = member.add(nav.wind());
    let report = match cw::cw_displacement_check(&nav, &Isometry::flow(&field, 0.1), 100, CW_TOL, 501) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let control = rotation_control(nav.space());
    let neg = match cw::cw_displacement_check(&nav, &Isometry::flow(&control, 0.1), 100, CW_TOL, 501) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let ok = report.cw && !neg.cw && neg.spread > 0.05;
    (ok, format!("family spread {:.2e}; rotation control spread {:.3}", report.spread, neg.spread))
}

/// Graph parameters used by the oracle criterion.
pub const ORACLE_NODES: usize = 20_000;
pub const ORACLE_PAIRS: usize = 20;

/// The three-dimensional product used where a five-dimensional one would
/// need far more graph nodes.
pub fn small_product_fixture() -> NavigationData {
    let space = SpaceDescriptor::product([SpaceDescriptor::sphere(1, 1.0).unwrap(), e2()]).unwrap();
    let w = KillingField::hopf(&space, 0, 0.3).unwrap().add(&KillingField::translation(&space, 1, dv(&[0.2, 0.0])).unwrap());
    NavigationData::new(w).unwrap()
}

/// `(fixture, k, half width of the Euclidean box)`.
pub fn oracle_setups() -> Vec<(&'static str, NavigationData, usize, f64)> {
    vec![
        ("E2", euclidean_fixture(), 48, 2.0),
        ("S3 Hopf", hopf_fixture(0.3), 300, 1.0),
        ("SU2", su2_fixture(), 300, 1.0),
        ("S1xE2", small_product_fixture(), 300, 1.0),
    ]
}

fn oracle_agreement() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, nav, k, half_width)) in oracle_setups().into_iter().enumerate() {
        let key = GraphKey::new(nav.space(), ORACLE_NODES, k, 600 + i as u64).with_box(half_width);
        let graph = match NetGraph::build(key) {
            Ok(g) => g,
            Err(e) => return (false, format!("{name}: {e}")),
        };
        let oracle = graph.weigh(&nav).unwrap();
        let mut rng = sampling::rng(650 + i as u64);
        let pairs: Vec<(Point, Point)> = (0..ORACLE_PAIRS)
            .map(|_| (nav.space().sample_point_in(&mut rng, 0.8 * half_width), nav.space().sample_point_in(&mut rng, 0.8 * half_width)))
            .collect();
        let errors: Vec<f64> = pairs
            .par_iter()
            .map(|(x, y)| {
                let exact = f_distance(&nav, x, y).unwrap();
                let est = oracle.distance(x, y).estimate;
                (est - exact).abs() / exact
            })
            .collect();
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        ok &= worst < 0.03;
        let mut detail = format!("{name} {worst:.4}");
        if i == 0 {
            let o = nav.space().point(dv(&[0.0, 0.0])).unwrap();
            let e1 = nav.space().point(dv(&[1.0, 0.0])).unwrap();
            let fwd = oracle.distance(&o, &e1).estimate;
            let back = oracle.distance(&e1, &o).estimate;
            let fixture_err = (fwd / (2.0 / 3.0) - 1.0).abs().max((back / 2.0 - 1.0).abs());
            ok &= fixture_err < 0.03;
            detail.push_str(&format!(" (fixture {fwd:.4}/{back:.4})"));
        }
        parts.push(detail);
    }
    (ok, format!("worst relative error per space: {}", parts.join(", ")))
}

fn direction_exhaustion() -> (bool, String) {
    let navs = [euclidean_fixture(), hopf_fixture(0.3), su2_fixture(), product_fixture()];
    let mut worst = 0.0f64;
    for (i, nav) in navs.iter().enumerate() {
        let x = nav.space().sample_point(&mut sampling::rng(700 + i as u64));
        let family = ConstantLengthFamily::new(nav).unwrap();
        match cw::direction_exhaustion_check(nav, &x, &family, 50, cw::EXHAUSTION_TOL, 710 + i as u64) {
            Ok(r) => worst = worst.max(r.worst),
            Err(e) => return (false, e.to_string()),
        }
    }
    (worst < 1e-6, format!("worst residual {worst:.2e} over 4x50 directions"))
}

fn cw_connection() -> (bool, String) {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_spread = 0.0f64;
    for (i, nav) in [hopf_fixture(0.3), euclidean_fixture()].iter().enumerate() {
        let space = nav.space();
        let mut rng = sampling::rng(800 + i as u64);
        for j in 0..10 {
            let x0 = space.sample_point(&mut rng);
            let x1 = if i == 0 {
                let u = space.sample_unit_tangent(&mut rng, &x0);
                space.exp(&x0, &u, rng.random_range(0.01..=0.3))
            } else {
                space.sample_point(&mut rng)
            };
            let seed = 820 + 10 * i as u64 + j;
            match cw::cw_connect(nav, &x0, &x1, seed) {
                Ok(c) => {
                    worst = worst.max(c.residual);
                    let report = cw::cw_displacement_check(nav, &c.isometry(nav), 100, CW_TOL, seed).unwrap();
                    worst_spread = worst_spread.max(report.spread);
                    if !report.cw {
                        failures.push(format!("{} pair {j}: not CW", space));
                    }
                }
                Err(e) => failures.push(format!("{} pair {j}: {e}", space)),
            }
        }
    }
    let ok = failures.is_empty() && worst < cw::CONNECT_TOL;
    let mut detail = format!("worst residual {worst:.2e}, worst displacement spread {worst_spread:.1e} over 2x10 pairs");
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    (ok, detail)
}

fn quasi_metric() -> (bool, String) {
    let mut worst_violation = f64::NEG_INFINITY;
    let navs = [euclidean_fixture(), hopf_fixture(0.3), su2_fixture(), product_fixture()];
    for (i, nav) in navs.iter().enumerate() {
        let mut rng = sampling::rng(900 + i as u64);
        let triples: Vec<[Point; 3]> = (0..1000)
            .map(|_| [(); 3].map(|_| nav.space().sample_point_in(&mut rng, 1.0)))
            .collect();
        let v = triples
            .par_iter()
            .map(|[x, y, z]| {
                let d = |a, b| f_distance(nav, a, b).unwrap();
                d(x, z) - d(x, y) - d(y, z)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        worst_violation = worst_violation.max(v);
    }
    let asym = |nav: &NavigationData, seed| {
        let mut rng = sampling::rng(seed);
        (0..100)
            .map(|_| {
                let x = nav.space().sample_point_in(&mut rng, 1.0);
                let y = nav.space().sample_point_in(&mut rng, 1.0);
                (f_distance(nav, &x, &y).unwrap() - f_distance(nav, &y, &x).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    };
    let hopf_gap = asym(&hopf_fixture(0.3), 950).min(asym(&hopf_fixture(0.5), 951));
    let sym_gap = asym(&NavigationData::riemannian(&s3()), 952).max(asym(&NavigationData::riemannian(&s3e2()), 953));
    let ok = worst_violation <= 1e-9 && hopf_gap > 0.05 && sym_gap <= 1e-9;
    (
        ok,
        format!(
            "worst triangle excess {worst_violation:.2e} over 4x1000 triples; max asymmetry {hopf_gap:.3} (c >= 0.3), {sym_gap:.1e} (W = 0)"
        ),
    )
}
