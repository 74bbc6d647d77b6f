//! Quaternion arithmetic on ambient 4-vectors ordered `(w, x, y, z)`.

use nalgebra::{DVector, Vector3, Vector4};

pub type Quat = Vector4<f64>;

pub fn from_slice(s: &[f64]) -> Quat {
    Quat::new(s[0], s[1], s[2], s[3])
}

pub fn to_dvector(q: &Quat) -> DVector<f64> {
    DVector::from_column_slice(q.as_slice())
}

pub fn pure(v: &Vector3<f64>) -> Quat {
    Quat::new(0.0, v[0], v[1], v[2])
}

pub fn imag(q: &Quat) -> Vector3<f64> {
    Vector3::new(q[1], q[2], q[3])
}

pub fn identity() -> Quat {
    Quat::new(1.0, 0.0, 0.0, 0.0)
}

pub fn mul(a: &Quat, b: &Quat) -> Quat {
    Quat::new(
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    )
}

pub fn conj(q: &Quat) -> Quat {
    Quat::new(q[0], -q[1], -q[2], -q[3])
}

/// `exp(v)` for a pure imaginary quaternion `v`.
pub fn exp_pure(v: &Vector3<f64>) -> Quat {
    let theta = v.norm();
    if theta < 1e-300 {
        return identity();
    }
    let s = theta.sin() / theta;
    Quat::new(theta.cos(), s * v[0], s * v[1], s * v[2])
}

/// Imaginary part of the commutator `ab - ba = 2 a x b` of pure quaternions.
pub fn bracket(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    2.0 * a.cross(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamilton_products() {
        let i = Quat::new(0.0, 1.0, 0.0, 0.0);
        let j = Quat::new(0.0, 0.0, 1.0, 0.0);
        let k = Quat::new(0.0, 0.0, 0.0, 1.0);
        assert_eq!(mul(&i, &j), k);
        assert_eq!(mul(&j, &i), -k);
        assert_eq!(mul(&i, &i), -identity());
    }

    #[test]
    fn bracket_matches_product_commutator() {
        let a = Vector3::new(0.3, -1.0, 2.0);
        let b = Vector3::new(1.5, 0.2, -0.7);
        let c = mul(&pure(&a), &pure(&b)) - mul(&pure(&b), &pure(&a));
        assert!(c[0].abs() < 1e-15);
        assert!((imag(&c) - bracket(&a, &b)).norm() < 1e-14);
    }

    #[test]
    fn exp_of_pi_i_is_minus_one() {
        let q = exp_pure(&Vector3::new(std::f64::consts::PI, 0.0, 0.0));
        assert!((q + identity()).norm() < 1e-15);
    }
}
