//! Quaternion arithmetic over `f64`.
//!
//! Hamilton convention `ij = k` throughout. Quaternions serialize as `[w, x, y, z]`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};

/// Tolerance for admitting a quaternion as a unit quaternion.
pub const UNIT_TOL: f64 = 1e-9;
/// Norms below this are treated as zero by [`Quaternion::renormalize`].
pub const RENORM_MIN: f64 = 1e-12;
/// Largest real part accepted when converting to an [`ImQuaternion`].
pub const IM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const ONE: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const I: Quaternion = Quaternion { w: 0.0, x: 1.0, y: 0.0, z: 0.0 };
    pub const J: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 1.0, z: 0.0 };
    pub const K: Quaternion = Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub const fn from_im(v: [f64; 3]) -> Self {
        Quaternion { w: 0.0, x: v[0], y: v[1], z: v[2] }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn im(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Euclidean inner product on ℝ⁴.
    pub fn dot(self, o: Quaternion) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn inverse(self) -> Result<Self> {
        let n2 = self.norm_sq();
        if n2 == 0.0 {
            return Err(NkError::ZeroQuaternion);
        }
        Ok(self.conj() / n2)
    }

    /// Conjugate and inverse together; for unit input the two coincide.
    pub fn conj_inv(self) -> Result<(Self, Self)> {
        Ok((self.conj(), self.inverse()?))
    }

    pub fn renormalize(self) -> Result<UnitQuaternion> {
        let n = self.norm();
        if n <= RENORM_MIN {
            return Err(NkError::ZeroQuaternion);
        }
        Ok(UnitQuaternion(self / n))
    }

    /// `exp` of the imaginary quaternion `v`, i.e. `cos|v| + sin|v| v/|v|`.
    pub fn exp_im(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = sinc(r);
        Quaternion::new(r.cos(), s * v[0], s * v[1], s * v[2])
    }

    pub fn max_abs_diff(self, o: Quaternion) -> f64 {
        let d = self - o;
        d.w.abs().max(d.x.abs()).max(d.y.abs()).max(d.z.abs())
    }
}

/// `sin r / r` with a series near zero.
pub(crate) fn sinc(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        1.0 - r * r / 6.0 + r.powi(4) / 120.0
    } else {
        r.sin() / r
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        q * self
    }
}

impl Div<f64> for Quaternion {
    type Output = Quaternion;
    fn div(self, s: f64) -> Quaternion {
        Quaternion::new(self.w / s, self.x / s, self.y / s, self.z / s)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Quaternion) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
pub fn mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// A point of S³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion(Quaternion::ONE);

    pub fn new(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(NkError::NotUnit { norm: n });
        }
        Ok(UnitQuaternion(q))
    }

    /// Used where the norm is known to be 1 up to rounding.
    pub(crate) fn new_unchecked(q: Quaternion) -> Self {
        UnitQuaternion(q)
    }

    pub fn get(self) -> Quaternion {
        self.0
    }

    pub fn inverse(self) -> Self {
        UnitQuaternion(self.0.conj())
    }

    pub fn conj(self) -> Self {
        self.inverse()
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.0.to_array()
    }
}

impl<'de> Deserialize<'de> for UnitQuaternion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = Quaternion::deserialize(d)?;
        UnitQuaternion::new(q).map_err(serde::de::Error::custom)
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, o: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(self.0 * o.0)
    }
}

impl Mul<Quaternion> for UnitQuaternion {
    type Output = Quaternion;
    fn mul(self, o: Quaternion) -> Quaternion {
        self.0 * o
    }
}

impl Mul<UnitQuaternion> for Quaternion {
    type Output = Quaternion;
    fn mul(self, o: UnitQuaternion) -> Quaternion {
        self * o.0
    }
}

/// An element of Im ℍ.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ImQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ImQuaternion {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ImQuaternion { x, y, z }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        ImQuaternion::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn quat(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    pub fn dot(self, o: ImQuaternion) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl TryFrom<Quaternion> for ImQuaternion {
    type Error = NkError;
    fn try_from(q: Quaternion) -> Result<Self> {
        if q.w.abs() > IM_TOL * (1.0 + q.norm()) {
            return Err(NkError::NotImaginary { re: q.w });
        }
        Ok(ImQuaternion::new(q.x, q.y, q.z))
    }
}

impl From<ImQuaternion> for Quaternion {
    fn from(a: ImQuaternion) -> Self {
        a.quat()
    }
}

/// Cross product of imaginary quaternions, `½(ab − ba)`.
pub fn im_cross(a: ImQuaternion, b: ImQuaternion) -> ImQuaternion {
    let (a, b) = (a.quat(), b.quat());
    let c = (a * b - b * a) * 0.5;
    ImQuaternion::new(c.x, c.y, c.z)
}

/// [`im_cross`] on general quaternions, rejecting non-imaginary input.
pub fn im_cross_checked(a: Quaternion, b: Quaternion) -> Result<ImQuaternion> {
    Ok(im_cross(a.try_into()?, b.try_into()?))
}

/// Commutator cross product without the imaginary check; used inside integrators.
pub(crate) fn cross_q(a: Quaternion, b: Quaternion) -> Quaternion {
    (a * b - b * a) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quat() -> impl Strategy<Value = Quaternion> {
        prop::array::uniform4(-2.0f64..2.0).prop_map(Quaternion::from)
    }

    fn unit() -> impl Strategy<Value = Quaternion> {
        quat()
            .prop_filter("non-zero", |q| q.norm() > 0.1)
            .prop_map(|q| q / q.norm())
    }

    fn imag() -> impl Strategy<Value = ImQuaternion> {
        prop::array::uniform3(-2.0f64..2.0).prop_map(ImQuaternion::from_array)
    }

    #[test]
    fn basis_relations() {
        use Quaternion as Q;
        assert_eq!(Q::I * Q::J, Q::K);
        assert_eq!(Q::J * Q::K, Q::I);
        assert_eq!(Q::K * Q::I, Q::J);
        assert_eq!(Q::I * Q::I, -Q::ONE);
        let q = Q::new(0.3, -1.0, 2.0, 0.5);
        assert_eq!(Q::ONE * q, q);
        assert_eq!(mul(q, Q::ONE), q);
    }

    #[test]
    fn conj_inv_examples() {
        let (c, inv) = Quaternion::I.conj_inv().unwrap();
        assert_eq!(c, -Quaternion::I);
        assert_eq!(inv, -Quaternion::I);
        let (c, inv) = (Quaternion::I * 2.0).conj_inv().unwrap();
        assert_eq!(c, Quaternion::I * -2.0);
        assert!(inv.max_abs_diff(Quaternion::I * -0.5) < 1e-16);
        assert!(matches!(Quaternion::ZERO.inverse(), Err(NkError::ZeroQuaternion)));
    }

    #[test]
    fn renormalize_examples() {
        let u = Quaternion::new(2.0, 0.0, 0.0, 0.0).renormalize().unwrap();
        assert_eq!(u.get(), Quaternion::ONE);
        let u = Quaternion::new(1.0, 1.0, 1.0, 1.0).renormalize().unwrap();
        for c in u.get().to_array() {
            assert!((c - 0.5).abs() < 1e-16);
        }
        assert!(Quaternion::new(1e-13, 0.0, 0.0, 0.0).renormalize().is_err());
    }

    #[test]
    fn cross_examples() {
        let i = ImQuaternion::new(1.0, 0.0, 0.0);
        let j = ImQuaternion::new(0.0, 1.0, 0.0);
        assert_eq!(im_cross(i, j), ImQuaternion::new(0.0, 0.0, 1.0));
        let a = ImQuaternion::new(0.3, -0.2, 0.9);
        assert_eq!(im_cross(a, a), ImQuaternion::default());
        assert!(im_cross_checked(Quaternion::ONE, Quaternion::I).is_err());
    }

    #[test]
    fn unit_admission() {
        assert!(UnitQuaternion::new(Quaternion::new(1.0 + 1e-10, 0.0, 0.0, 0.0)).is_ok());
        assert!(UnitQuaternion::new(Quaternion::new(1.0 + 1e-8, 0.0, 0.0, 0.0)).is_err());
        let q: UnitQuaternion = serde_json::from_str("[0.0, 0.0, 1.0, 0.0]").unwrap();
        assert_eq!(q.get(), Quaternion::J);
        assert!(serde_json::from_str::<UnitQuaternion>("[0.0, 0.0, 2.0, 0.0]").is_err());
        assert_eq!(serde_json::to_string(&Quaternion::K).unwrap(), "[0.0,0.0,0.0,1.0]");
    }

    proptest! {
        #[test]
        fn associative_and_distributive(a in quat(), b in quat(), c in quat()) {
            prop_assert!(((a * b) * c).max_abs_diff(a * (b * c)) < 1e-12);
            prop_assert!((a * (b + c)).max_abs_diff(a * b + a * c) < 1e-12);
        }

        #[test]
        fn norm_is_multiplicative(a in unit(), b in unit()) {
            prop_assert!(((a * b).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn unit_inverse_is_conjugate(a in unit()) {
            let (c, inv) = a.conj_inv().unwrap();
            prop_assert!(c.max_abs_diff(inv) < 1e-12);
            prop_assert!((a * inv).max_abs_diff(Quaternion::ONE) < 1e-12);
            prop_assert!(a.renormalize().unwrap().get().max_abs_diff(a) < 1e-15);
        }

        #[test]
        fn cross_matches_r3(a in imag(), b in imag()) {
            let c = im_cross(a, b);
            let oracle = [a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x];
            for (x, y) in c.to_array().iter().zip(oracle) {
                prop_assert!((x - y).abs() < 1e-13);
            }
            let d = im_cross(b, a);
            prop_assert!((c.x + d.x).abs() + (c.y + d.y).abs() + (c.z + d.z).abs() < 1e-13);
            prop_assert!(c.dot(a).abs() < 1e-12 && c.dot(b).abs() < 1e-12);
        }

        #[test]
        fn left_translation_is_tangent(p in unit(), a in imag()) {
            prop_assert!((p * a.quat()).dot(p).abs() < 1e-12);
        }
    }
}
