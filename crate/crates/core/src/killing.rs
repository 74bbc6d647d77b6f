//! Killing fields of the model spaces in closed form.
//!
//! Each factor carries a generator of its isometry algebra:
//!
//! - Euclidean: an affine field `x -> A x + v` with `A` skew. Winds and the
//!   constant-length families only use the translational part; rotations are
//!   kept so that non-constant-length negative controls can be built.
//! - Sphere: a skew matrix `A`, field `x -> A x`, flow `exp(tA) x`.
//! - SU(2): a pair of pure imaginary quaternions `(l, r)`, field
//!   `q -> l q - q r`, flow `q -> exp(tl) q exp(-tr)`.
//!
//! The vector-field bracket follows `[X, Y] = DY.X - DX.Y`, which for linear
//! fields `Ax`, `Bx` is the field of `BA - AB`.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::quat;
use crate::randers::NavigationData;
use crate::sampling;
use crate::space::{Factor, Point, SpaceDescriptor};
use crate::{Error, Result};

/// Tolerance on `|A + A^T|` for sphere and Euclidean rotation generators.
pub const SKEW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Euclidean { rotation: DMatrix<f64>, translation: DVector<f64> },
    Sphere(DMatrix<f64>),
    Group { left: Vector3<f64>, right: Vector3<f64> },
}

impl Generator {
    fn zero_for(factor: &Factor) -> Self {
        match *factor {
            Factor::Euclidean { n } => Generator::Euclidean {
                rotation: DMatrix::zeros(n, n),
                translation: DVector::zeros(n),
            },
            Factor::Sphere { dim, .. } => Generator::Sphere(DMatrix::zeros(dim + 1, dim + 1)),
            Factor::Group { .. } => Generator::Group { left: Vector3::zeros(), right: Vector3::zeros() },
        }
    }

    fn check(&self, factor: &Factor) -> Result<()> {
        let n = factor.ambient_dim();
        let skew_ok = |a: &DMatrix<f64>| a.nrows() == n && a.ncols() == n && (a + a.transpose()).norm() < SKEW_TOL * (1.0 + a.norm());
        let ok = match (self, factor) {
            (Generator::Euclidean { rotation, translation }, Factor::Euclidean { .. }) => {
                skew_ok(rotation) && translation.len() == n
            }
            (Generator::Sphere(a), Factor::Sphere { .. }) => skew_ok(a),
            (Generator::Group { .. }, Factor::Group { .. }) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("generator {self:?} does not fit factor {factor:?}")))
        }
    }

    fn combine(&self, other: &Generator, a: f64, b: f64) -> Generator {
        match (self, other) {
            (
                Generator::Euclidean { rotation: r1, translation: t1 },
                Generator::Euclidean { rotation: r2, translation: t2 },
            ) => Generator::Euclidean { rotation: r1 * a + r2 * b, translation: t1 * a + t2 * b },
            (Generator::Sphere(a1), Generator::Sphere(a2)) => Generator::Sphere(a1 * a + a2 * b),
            (Generator::Group { left: l1, right: r1 }, Generator::Group { left: l2, right: r2 }) => {
                Generator::Group { left: l1 * a + l2 * b, right: r1 * a + r2 * b }
            }
            _ => unreachable!("generators of different factor kinds"),
        }
    }

    fn bracket(&self, other: &Generator) -> Generator {
        match (self, other) {
            (
                Generator::Euclidean { rotation: a, translation: u },
                Generator::Euclidean { rotation: b, translation: v },
            ) => Generator::Euclidean { rotation: b * a - a * b, translation: b * u - a * v },
            (Generator::Sphere(a), Generator::Sphere(b)) => Generator::Sphere(b * a - a * b),
            (Generator::Group { left: l1, right: r1 }, Generator::Group { left: l2, right: r2 }) => {
                Generator::Group { left: quat::bracket(l2, l1), right: quat::bracket(r2, r1) }
            }
            _ => unreachable!("generators of different factor kinds"),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Generator::Euclidean { rotation, translation } => rotation.norm() + translation.norm(),
            Generator::Sphere(a) => a.norm(),
            Generator::Group { left, right } => left.norm() + right.norm(),
        }
    }

    fn eval(&self, x: &[f64]) -> DVector<f64> {
        match self {
            Generator::Euclidean { rotation, translation } => {
                rotation * DVector::from_column_slice(x) + translation
            }
            Generator::Sphere(a) => a * DVector::from_column_slice(x),
            Generator::Group { left, right } => {
                let q = quat::from_slice(x);
                let v = quat::mul(&quat::pure(left), &q) - quat::mul(&q, &quat::pure(right));
                quat::to_dvector(&v)
            }
        }
    }

    fn flow(&self, x: &[f64], t: f64) -> DVector<f64> {
        match self {
            Generator::Euclidean { rotation, translation } => {
                let xv = DVector::from_column_slice(x);
                if rotation.norm() == 0.0 {
                    return xv + translation * t;
                }
                let n = x.len();
                let mut aug = DMatrix::zeros(n + 1, n + 1);
                aug.view_mut((0, 0), (n, n)).copy_from(&(rotation * t));
                aug.view_mut((0, n), (n, 1)).copy_from(&(translation * t));
                let e = aug.exp();
                e.view((0, 0), (n, n)) * xv + e.view((0, n), (n, 1))
            }
            Generator::Sphere(a) => (a * t).exp() * DVector::from_column_slice(x),
            Generator::Group { left, right } => {
                let q = quat::from_slice(x);
                let out = quat::mul(&quat::mul(&quat::exp_pure(&(left * t)), &q), &quat::exp_pure(&(-right * t)));
                quat::to_dvector(&out)
            }
        }
    }
}

/// The standard complex structure `J = diag([[0,-1],[1,0]], ...)` on `R^{2k}`,
/// pairing coordinates as `(x1 + i x2, x3 + i x4, ...)`.
pub fn standard_complex_structure(n: usize) -> DMatrix<f64> {
    assert!(n.is_multiple_of(2), "complex structures need even dimension");
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n / 2 {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// A vector field on a model space, evaluated in ambient coordinates.
pub trait VectorField {
    fn space(&self) -> &SpaceDescriptor;

    /// Value at an ambient point; implementations extend off the manifold
    /// by their natural formula.
    fn at(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// A Killing field given by one closed-form generator per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct KillingField {
    space: SpaceDescriptor,
    generators: Vec<Generator>,
}

impl KillingField {
    pub fn new(space: &SpaceDescriptor, generators: Vec<Generator>) -> Result<Self> {
        if generators.len() != space.factors().len() {
            return Err(Error::Domain("one generator per factor is required".into()));
        }
        for (g, f) in generators.iter().zip(space.factors()) {
            g.check(f)?;
        }
        Ok(Self { space: space.clone(), generators })
    }

    pub fn zero(space: &SpaceDescriptor) -> Self {
        let generators = space.factors().iter().map(Generator::zero_for).collect();
        Self { space: space.clone(), generators }
    }

    /// Replaces the generator of one factor.
    pub fn with_generator(mut self, factor: usize, generator: Generator) -> Result<Self> {
        let f = self
            .space
            .factors()
            .get(factor)
            .ok_or_else(|| Error::Domain(format!("no factor {factor}")))?;
        generator.check(f)?;
        self.generators[factor] = generator;
        Ok(self)
    }

    /// Hopf field `c J x` on a sphere factor.
    pub fn hopf(space: &SpaceDescriptor, factor: usize, c: f64) -> Result<Self> {
        let n = match space.factors().get(factor) {
            Some(Factor::Sphere { dim, .. }) => dim + 1,
            _ => return Err(Error::Domain(format!("factor {factor} is not a sphere"))),
        };
        Self::zero(space).with_generator(factor, Generator::Sphere(standard_complex_structure(n) * c))
    }

    pub fn translation(space: &SpaceDescriptor, factor: usize, v: DVector<f64>) -> Result<Self> {
        let n = v.len();
        Self::zero(space).with_generator(factor, Generator::Euclidean { rotation: DMatrix::zeros(n, n), translation: v })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator(&self, factor: usize) -> &Generator {
        &self.generators[factor]
    }

    pub fn is_zero(&self) -> bool {
        self.generators.iter().all(|g| g.norm() == 0.0)
    }

    /// Sum of generator norms; zero iff the field vanishes.
    pub fn generator_norm(&self) -> f64 {
        self.generators.iter().map(Generator::norm).sum()
    }

    pub fn evaluate(&self, x: &Point) -> DVector<f64> {
        self.at(x.coords())
    }

    /// Time-`t` flow, evaluated exactly by matrix and quaternion exponentials.
    pub fn flow(&self, x: &Point, t: f64) -> Point {
        let mut out = DVector::zeros(self.space.ambient_dim());
        for (i, g) in self.generators.iter().enumerate() {
            let range = self.space.factor_range(i);
            let block = g.flow(&x.as_slice()[range.clone()], t);
            out.rows_range_mut(range).copy_from(&block);
        }
        self.space.normalize(out)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, other: &KillingField, a: f64, b: f64) -> KillingField {
        assert_eq!(self.space, other.space, "fields on different spaces");
        let generators = self
            .generators
            .iter()
            .zip(&other.generators)
            .map(|(g, h)| g.combine(h, a, b))
            .collect();
        KillingField { space: self.space.clone(), generators }
    }

    pub fn add(&self, other: &KillingField) -> KillingField {
        self.combine(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &KillingField) -> KillingField {
        self.combine(other, 1.0, -1.0)
    }

    pub fn scale(&self, s: f64) -> KillingField {
        self.combine(self, s, 0.0)
    }

    /// Vector-field bracket `[self, other]`, componentwise on products.
    pub fn commutator(&self, other: &KillingField) -> KillingField {
        assert_eq!(self.space, other.space, "fields on different spaces");
        let generators = self
            .generators
            .iter()
            .zip(&other.generators)
            .map(|(g, h)| g.bracket(h))
            .collect();
        KillingField { space: self.space.clone(), generators }
    }
}

impl VectorField for KillingField {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn at(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.space.ambient_dim());
        for (i, g) in self.generators.iter().enumerate() {
            let range = self.space.factor_range(i);
            let block = g.eval(&x.as_slice()[range.clone()]);
            out.rows_range_mut(range).copy_from(&block);
        }
        out
    }
}

/// Arbitrary vector field given by a closure; used for negative controls.
pub struct FnField<F> {
    space: SpaceDescriptor,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FnField<F> {
    pub fn new(space: &SpaceDescriptor, f: F) -> Self {
        Self { space: space.clone(), f }
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> VectorField for FnField<F> {
    fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    fn at(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
}

/// Directional derivative `DX(x) . u` by central differences in ambient space.
pub fn directional_derivative<V: VectorField + ?Sized>(field: &V, x: &DVector<f64>, u: &DVector<f64>, step: f64) -> DVector<f64> {
    (field.at(&(x + u * step)) - field.at(&(x - u * step))) / (2.0 * step)
}

/// Largest sampled value of `|(L_X h)(u, v)| = |h(D_u X, v) + h(u, D_v X)|`,
/// the time derivative of `h(dphi_t u, dphi_t v)` at `t = 0`, over `h`-unit
/// tangent pairs. Vanishes (to finite-difference accuracy) iff `X` is Killing.
pub fn killing_residual<V: VectorField + ?Sized>(field: &V, samples: usize, seed: u64) -> f64 {
    let space = field.space();
    let mut rng = sampling::rng(seed);
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = space.sample_point(&mut rng);
        let u = space.sample_unit_tangent(&mut rng, &x);
        let v = space.sample_unit_tangent(&mut rng, &x);
        let du = directional_derivative(field, x.coords(), &u, step);
        let dv = directional_derivative(field, x.coords(), &v, step);
        let r = space.inner(&du, &v) + space.inner(&u, &dv);
        let self_u = 2.0 * space.inner(&du, &u);
        worst = worst.max(r.abs()).max(self_u.abs());
    }
    worst
}

/// Sampled minimum and maximum of a field's length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthStats {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
}

impl LengthStats {
    pub fn deviation(&self) -> f64 {
        self.max - self.min
    }

    fn collect(samples: usize, mut len: impl FnMut() -> f64) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..samples {
            let l = len();
            min = min.min(l);
            max = max.max(l);
        }
        Self { min, max, samples }
    }
}

/// Default sample count for length statistics.
pub const LENGTH_SAMPLES: usize = 1000;

/// `h`-length statistics of a field.
pub fn length_stats<V: VectorField + ?Sized>(field: &V, samples: usize, seed: u64) -> LengthStats {
    let space = field.space();
    let mut rng = sampling::rng(seed);
    LengthStats::collect(samples, || {
        let x = space.sample_point(&mut rng);
        space.norm(&field.at(x.coords()))
    })
}

/// `F`-length statistics of a field under the Randers metric of `nav`.
pub fn finsler_length_stats<V: VectorField + ?Sized>(nav: &NavigationData, field: &V, samples: usize, seed: u64) -> LengthStats {
    let space = nav.space();
    let mut rng = sampling::rng(seed);
    LengthStats::collect(samples, || {
        let x = space.sample_point(&mut rng);
        nav.norm(&x, &field.at(x.coords()))
    })
}

/// Which generator slot of an SU(2) factor the family members use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSide {
    /// Members `q -> l q`, commuting with right-translation winds.
    Left,
    /// Members `q -> -q r`, commuting with left-translation winds.
    Right,
}

/// Constant-length Killing fields of one factor that commute with the wind.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorFamily {
    /// All constant vectors.
    Euclidean,
    /// Skew matrices `J (2P - I)` with `J` the wind's complex structure and
    /// `P` a `J`-complex orthogonal projection, scaled to the target length.
    Sphere { structure: DMatrix<f64>, radius: f64, wind_scale: f64 },
    /// One-sided translations on the side opposite to the wind.
    Group { side: GroupSide },
}

/// Constant-length family for a single factor of the navigation data.
pub fn constant_length_family(nav: &NavigationData, factor: usize) -> Result<FactorFamily> {
    let space = nav.space();
    let f = space
        .factors()
        .get(factor)
        .ok_or_else(|| Error::Domain(format!("no factor {factor}")))?;
    factor_family(f, nav.wind().generator(factor))
}

fn factor_family(factor: &Factor, wind: &Generator) -> Result<FactorFamily> {
    match (factor, wind) {
        (Factor::Euclidean { .. }, Generator::Euclidean { rotation, .. }) => {
            if rotation.norm() > 0.0 {
                return Err(Error::UnsupportedWind("Euclidean wind with a rotational part".into()));
            }
            Ok(FactorFamily::Euclidean)
        }
        (Factor::Sphere { radius, .. }, Generator::Sphere(a)) => {
            let n = a.nrows();
            if a.norm() == 0.0 {
                return Ok(FactorFamily::Sphere { structure: standard_complex_structure(n), radius: *radius, wind_scale: 0.0 });
            }
            let a2 = a * a;
            let c2 = -a2.trace() / n as f64;
            let defect = (&a2 + DMatrix::identity(n, n) * c2).norm();
            if c2 <= 0.0 || defect > 1e-9 * c2 {
                return Err(Error::UnsupportedWind(format!(
                    "sphere wind is not a multiple of a complex structure (|A^2 + c^2 I| = {defect:e})"
                )));
            }
            let c = c2.sqrt();
            Ok(FactorFamily::Sphere { structure: a / c, radius: *radius, wind_scale: c })
        }
        (Factor::Group { .. }, Generator::Group { left, right }) => match (left.norm() > 0.0, right.norm() > 0.0) {
            (_, false) => Ok(FactorFamily::Group { side: GroupSide::Right }),
            (false, true) => Ok(FactorFamily::Group { side: GroupSide::Left }),
            (true, true) => Err(Error::UnsupportedWind(
                "SU(2) wind with both left and right parts has non-constant length".into(),
            )),
        },
        _ => Err(Error::Domain("wind generator does not fit its factor".into())),
    }
}

/// Orthogonal projection onto the `J`-complex span of `vectors`.
pub fn complex_projection(structure: &DMatrix<f64>, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    let n = structure.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm < 1e-10 {
            continue;
        }
        w /= norm;
        let jw = structure * &w;
        basis.push(w);
        basis.push(jw);
    }
    let mut p = DMatrix::zeros(n, n);
    for b in &basis {
        p += b * b.transpose();
    }
    p
}

/// Members of the constant-length families of every factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantLengthFamily {
    space: SpaceDescriptor,
    factors: Vec<FactorFamily>,
}

impl ConstantLengthFamily {
    pub fn new(nav: &NavigationData) -> Result<Self> {
        Self::for_wind(nav.wind())
    }

    pub fn for_wind(wind: &KillingField) -> Result<Self> {
        let space = wind.space().clone();
        let factors = space
            .factors()
            .iter()
            .zip(wind.generators())
            .map(|(f, g)| factor_family(f, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { space, factors })
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn factor(&self, i: usize) -> &FactorFamily {
        &self.factors[i]
    }

    /// Sphere member `(length / R) J (2P - I)` for a `J`-complex projection `P`.
    pub fn sphere_generator(&self, factor: usize, projection: &DMatrix<f64>, length: f64) -> Result<Generator> {
        match &self.factors[factor] {
            FactorFamily::Sphere { structure, radius, .. } => {
                let n = structure.nrows();
                let reflection = projection * 2.0 - DMatrix::identity(n, n);
                let m = structure * reflection * (length / radius);
                // Symmetrise away rounding so the skewness check is exact.
                Ok(Generator::Sphere((&m - m.transpose()) * 0.5))
            }
            _ => Err(Error::Domain(format!("factor {factor} is not a sphere"))),
        }
    }

    /// The member `X` of constant `h`-length `|u|_h` with `X(x) = u`, where
    /// `u` is first projected onto `T_x`. On products each factor gets the
    /// member matching its block of `u`.
    pub fn member_for_direction(&self, x: &Point, u: &DVector<f64>) -> KillingField {
        let u = self.space.project(x, u);
        let mut generators = Vec::with_capacity(self.factors.len());
        for (i, (family, factor)) in self.factors.iter().zip(self.space.factors()).enumerate() {
            let range = self.space.factor_range(i);
            let xb = x.coords().rows_range(range.clone()).into_owned();
            let ub = u.rows_range(range).into_owned();
            let g = match family {
                FactorFamily::Euclidean => {
                    let n = ub.len();
                    Generator::Euclidean { rotation: DMatrix::zeros(n, n), translation: ub }
                }
                FactorFamily::Sphere { structure, radius, .. } => {
                    let len = ub.norm();
                    if len < 1e-300 {
                        Generator::zero_for(factor)
                    } else {
                        // J (2P - I) x^ = u^  <=>  (2P - I) x^ = -J u^ =: v, and the
                        // rank-one projection onto the complex line of x^ + v solves it.
                        let xh = &xb / *radius;
                        let v = -(structure * &ub) / len;
                        let m = &xh + &v;
                        let p = if m.norm() < 1e-12 {
                            DMatrix::zeros(xb.len(), xb.len())
                        } else {
                            complex_projection(structure, &[m])
                        };
                        self.sphere_generator(i, &p, len).expect("sphere factor")
                    }
                }
                FactorFamily::Group { side } => {
                    let q = quat::from_slice(xb.as_slice());
                    let uq = quat::from_slice(ub.as_slice());
                    match side {
                        GroupSide::Left => Generator::Group {
                            left: quat::imag(&quat::mul(&uq, &quat::conj(&q))),
                            right: Vector3::zeros(),
                        },
                        GroupSide::Right => Generator::Group {
                            left: Vector3::zeros(),
                            right: -quat::imag(&quat::mul(&quat::conj(&q), &uq)),
                        },
                    }
                }
            };
            generators.push(g);
        }
        KillingField { space: self.space.clone(), generators }
    }

    /// Random member of total constant `h`-length `length`. Sphere factors
    /// draw a uniformly random rank and a random complex subspace.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R, length: f64) -> KillingField {
        let weights = sampling::on_sphere(rng, self.factors.len(), length);
        let mut generators = Vec::with_capacity(self.factors.len());
        for (i, (family, factor)) in self.factors.iter().zip(self.space.factors()).enumerate() {
            let len = weights[i].abs();
            let g = match family {
                FactorFamily::Euclidean => {
                    let n = factor.ambient_dim();
                    Generator::Euclidean { rotation: DMatrix::zeros(n, n), translation: sampling::on_sphere(rng, n, len) }
                }
                FactorFamily::Sphere { structure, .. } => {
                    let n = structure.nrows();
                    let rank = rng.random_range(0..=n / 2);
                    let vectors: Vec<_> = (0..rank).map(|_| sampling::gaussian_vector(rng, n)).collect();
                    let p = complex_projection(structure, &vectors);
                    self.sphere_generator(i, &p, len).expect("sphere factor")
                }
                FactorFamily::Group { side } => {
                    let s = factor.metric_scale();
                    let dir = sampling::on_sphere(rng, 3, len / s);
                    let v = Vector3::new(dir[0], dir[1], dir[2]);
                    match side {
                        GroupSide::Left => Generator::Group { left: v, right: Vector3::zeros() },
                        GroupSide::Right => Generator::Group { left: Vector3::zeros(), right: v },
                    }
                }
            };
            generators.push(g);
        }
        KillingField { space: self.space.clone(), generators }
    }
}
