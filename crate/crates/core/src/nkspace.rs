//! The homogeneous nearly Kähler structure on S³×S³.
//!
//! Tangent vectors at `(p, q)` are pairs `(U, V) = (pα, qβ)` with `α, β` imaginary.
//! The global frame is `Ẽᵢ = (pαᵢ, 0)`, `F̃ᵢ = (0, qαᵢ)` where `α₁ = i`, `α₂ = j`,
//! `α₃ = −k`. In that frame `g`, `J`, `P` and `G = ∇̃J` all have constant coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};
use crate::quat::{Quaternion, UnitQuaternion};

/// Components at or below this are silently projected away.
pub const TANGENCY_PROJECT_TOL: f64 = 1e-6;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Coefficients on `(Ẽ₁, Ẽ₂, Ẽ₃, F̃₁, F̃₂, F̃₃)`.
pub type Coeffs6 = [f64; 6];

/// The imaginary quaternions `α₁, α₂, α₃`.
pub const ALPHA: [Quaternion; 3] = [Quaternion::I, Quaternion::J, Quaternion::new(0.0, 0.0, 0.0, -1.0)];

/// `εᵢⱼₖ` on zero-based indices.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// The index `k` completing `{i, j, k} = {0, 1, 2}`; only meaningful for `i ≠ j`.
pub(crate) fn third(i: usize, j: usize) -> usize {
    3 - i - j
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub p: UnitQuaternion,
    pub q: UnitQuaternion,
}

impl SurfacePoint {
    pub fn new(p: UnitQuaternion, q: UnitQuaternion) -> Self {
        SurfacePoint { p, q }
    }

    pub fn from_quaternions(p: Quaternion, q: Quaternion) -> Result<Self> {
        Ok(SurfacePoint { p: UnitQuaternion::new(p)?, q: UnitQuaternion::new(q)? })
    }

    pub fn identity() -> Self {
        SurfacePoint { p: UnitQuaternion::IDENTITY, q: UnitQuaternion::IDENTITY }
    }

    pub fn to_array(&self) -> [f64; 8] {
        let (p, q) = (self.p.get().to_array(), self.q.get().to_array());
        [p[0], p[1], p[2], p[3], q[0], q[1], q[2], q[3]]
    }

    /// Frame basis vector `a` (0..3 are `Ẽ`, 3..6 are `F̃`).
    pub fn basis(&self, a: usize) -> TangentVec {
        let mut c = [0.0; 6];
        c[a] = 1.0;
        from_coeffs(*self, FrameCoeffs::from_array(c))
    }

    pub(crate) fn same_as(&self, o: &SurfacePoint) -> bool {
        self.p.get().max_abs_diff(o.p.get()) <= 1e-12 && self.q.get().max_abs_diff(o.q.get()) <= 1e-12
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVec {
    pub base: SurfacePoint,
    pub U: Quaternion,
    pub V: Quaternion,
}

#[allow(non_snake_case)]
impl TangentVec {
    /// Builds a tangent vector, projecting out normal components up to
    /// [`TANGENCY_PROJECT_TOL`] and rejecting anything larger.
    pub fn new(base: SurfacePoint, U: Quaternion, V: Quaternion) -> Result<Self> {
        let (p, q) = (base.p.get(), base.q.get());
        let (nu, nv) = (U.dot(p), V.dot(q));
        let scale = 1.0f64.max(U.norm()).max(V.norm());
        let residual = nu.abs().max(nv.abs());
        if residual > TANGENCY_PROJECT_TOL * scale {
            return Err(NkError::NotTangent { residual });
        }
        Ok(TangentVec { base, U: U - p * nu, V: V - q * nv })
    }

    pub(crate) fn raw(base: SurfacePoint, U: Quaternion, V: Quaternion) -> Self {
        TangentVec { base, U, V }
    }

    pub fn zero(base: SurfacePoint) -> Self {
        TangentVec::raw(base, Quaternion::ZERO, Quaternion::ZERO)
    }

    pub fn scale(self, s: f64) -> Self {
        TangentVec::raw(self.base, self.U * s, self.V * s)
    }

    /// Sum of two vectors at the same base point.
    pub fn add(self, o: TangentVec) -> Result<Self> {
        if !self.base.same_as(&o.base) {
            return Err(NkError::BaseMismatch);
        }
        Ok(TangentVec::raw(self.base, self.U + o.U, self.V + o.V))
    }

    pub fn sub(self, o: TangentVec) -> Result<Self> {
        self.add(o.scale(-1.0))
    }

    pub fn coeffs(&self) -> Coeffs6 {
        frame_coeffs(self).to_array()
    }

    /// Largest absolute component difference in ℝ⁸.
    pub fn max_abs_diff(&self, o: &TangentVec) -> f64 {
        self.U.max_abs_diff(o.U).max(self.V.max_abs_diff(o.V))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameCoeffs {
    pub e: [f64; 3],
    pub f: [f64; 3],
}

impl FrameCoeffs {
    pub fn from_array(c: Coeffs6) -> Self {
        FrameCoeffs { e: [c[0], c[1], c[2]], f: [c[3], c[4], c[5]] }
    }

    pub fn to_array(self) -> Coeffs6 {
        [self.e[0], self.e[1], self.e[2], self.f[0], self.f[1], self.f[2]]
    }
}

fn im_coords(a: Quaternion) -> [f64; 3] {
    [a.x, a.y, -a.z]
}

fn from_im_coords(c: [f64; 3]) -> Quaternion {
    Quaternion::new(0.0, c[0], c[1], -c[2])
}

pub fn frame_coeffs(z: &TangentVec) -> FrameCoeffs {
    let (p, q) = (z.base.p.get(), z.base.q.get());
    FrameCoeffs { e: im_coords(p.conj() * z.U), f: im_coords(q.conj() * z.V) }
}

pub fn from_coeffs(base: SurfacePoint, c: FrameCoeffs) -> TangentVec {
    TangentVec::raw(base, base.p * from_im_coords(c.e), base.q * from_im_coords(c.f))
}

fn check_base(a: &TangentVec, b: &TangentVec) -> Result<()> {
    if a.base.same_as(&b.base) {
        Ok(())
    } else {
        Err(NkError::BaseMismatch)
    }
}

fn retangent(z: &TangentVec) -> Result<TangentVec> {
    TangentVec::new(z.base, z.U, z.V)
}

/// `J(U, V) = (2pq⁻¹V − U, −2qp⁻¹U + V)/√3`.
#[allow(non_snake_case)]
pub fn apply_J(z: &TangentVec) -> Result<TangentVec> {
    let z = retangent(z)?;
    Ok(apply_J_unchecked(&z))
}

#[allow(non_snake_case)]
pub(crate) fn apply_J_unchecked(z: &TangentVec) -> TangentVec {
    let (p, q) = (z.base.p.get(), z.base.q.get());
    let u = (p * q.conj() * z.V * 2.0 - z.U) / SQRT3;
    let v = (z.V - q * p.conj() * z.U * 2.0) / SQRT3;
    TangentVec::raw(z.base, u, v)
}

/// `P(U, V) = (pq⁻¹V, qp⁻¹U)`.
#[allow(non_snake_case)]
pub fn apply_P(z: &TangentVec) -> Result<TangentVec> {
    let z = retangent(z)?;
    Ok(apply_P_unchecked(&z))
}

#[allow(non_snake_case)]
pub(crate) fn apply_P_unchecked(z: &TangentVec) -> TangentVec {
    let (p, q) = (z.base.p.get(), z.base.q.get());
    TangentVec::raw(z.base, p * q.conj() * z.V, q * p.conj() * z.U)
}

/// The nearly Kähler metric.
pub fn metric_g(a: &TangentVec, b: &TangentVec) -> Result<f64> {
    check_base(a, b)?;
    Ok(metric_unchecked(a, b))
}

pub(crate) fn metric_unchecked(a: &TangentVec, b: &TangentVec) -> f64 {
    let (pc, qc) = (a.base.p.get().conj(), a.base.q.get().conj());
    4.0 / 3.0 * (a.U.dot(b.U) + a.V.dot(b.V))
        - 2.0 / 3.0 * ((pc * a.U).dot(qc * b.V) + (pc * b.U).dot(qc * a.V))
}

/// Frame Gram matrix: `4/3` on the diagonal blocks, `−2/3` on the off-diagonal ones.
pub fn frame_metric(a: usize, b: usize) -> f64 {
    if a == b {
        4.0 / 3.0
    } else if a % 3 == b % 3 {
        -2.0 / 3.0
    } else {
        0.0
    }
}

pub fn metric_coeffs(x: &Coeffs6, y: &Coeffs6) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        s += 4.0 / 3.0 * (x[i] * y[i] + x[i + 3] * y[i + 3]) - 2.0 / 3.0 * (x[i] * y[i + 3] + x[i + 3] * y[i]);
    }
    s
}

/// Coefficients of `J` applied to basis vector `b`.
pub fn j_column(b: usize) -> Coeffs6 {
    let mut c = [0.0; 6];
    let i = b % 3;
    if b < 3 {
        c[i] = -1.0 / SQRT3;
        c[i + 3] = -2.0 / SQRT3;
    } else {
        c[i] = 2.0 / SQRT3;
        c[i + 3] = 1.0 / SQRT3;
    }
    c
}

pub fn j_coeffs(x: &Coeffs6) -> Coeffs6 {
    let mut out = [0.0; 6];
    for (b, xb) in x.iter().enumerate() {
        let col = j_column(b);
        for c in 0..6 {
            out[c] += xb * col[c];
        }
    }
    out
}

/// `G(basis a, basis b)` in frame coefficients.
pub fn g_table(a: usize, b: usize) -> Coeffs6 {
    let mut out = [0.0; 6];
    let (i, j) = (a % 3, b % 3);
    if i == j {
        return out;
    }
    let k = third(i, j);
    let s = -2.0 / (3.0 * SQRT3) * levi_civita(i, j, k);
    let (ce, cf) = match (a < 3, b < 3) {
        (true, true) => (1.0, 2.0),
        (true, false) | (false, true) => (1.0, -1.0),
        (false, false) => (-2.0, -1.0),
    };
    out[k] = s * ce;
    out[k + 3] = s * cf;
    out
}

pub fn g_coeffs(x: &Coeffs6, y: &Coeffs6) -> Coeffs6 {
    let mut out = [0.0; 6];
    for a in 0..6 {
        if x[a] == 0.0 {
            continue;
        }
        for b in 0..6 {
            let w = x[a] * y[b];
            if w == 0.0 {
                continue;
            }
            let t = g_table(a, b);
            for c in 0..6 {
                out[c] += w * t[c];
            }
        }
    }
    out
}

/// `G = ∇̃J`, evaluated from its constant frame table.
#[allow(non_snake_case)]
pub fn apply_G(x: &TangentVec, y: &TangentVec) -> Result<TangentVec> {
    check_base(x, y)?;
    let (x, y) = (retangent(x)?, retangent(y)?);
    Ok(apply_G_unchecked(&x, &y))
}

#[allow(non_snake_case)]
pub(crate) fn apply_G_unchecked(x: &TangentVec, y: &TangentVec) -> TangentVec {
    let c = g_coeffs(&x.coeffs(), &y.coeffs());
    from_coeffs(x.base, FrameCoeffs::from_array(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> impl Strategy<Value = UnitQuaternion> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-zero", |a| a.iter().map(|x| x * x).sum::<f64>() > 0.01)
            .prop_map(|a| Quaternion::from(a).renormalize().unwrap())
    }

    fn point() -> impl Strategy<Value = SurfacePoint> {
        (unit(), unit()).prop_map(|(p, q)| SurfacePoint::new(p, q))
    }

    fn coeffs() -> impl Strategy<Value = Coeffs6> {
        prop::array::uniform6(-2.0f64..2.0)
    }

    fn vec_at(b: SurfacePoint, c: Coeffs6) -> TangentVec {
        from_coeffs(b, FrameCoeffs::from_array(c))
    }

    fn close(a: &TangentVec, b: &TangentVec, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    fn id() -> SurfacePoint {
        SurfacePoint::identity()
    }

    #[test]
    fn j_examples() {
        let z = apply_J(&id().basis(0)).unwrap();
        assert!(z.U.max_abs_diff(Quaternion::I * (-1.0 / SQRT3)) < 1e-15);
        assert!(z.V.max_abs_diff(Quaternion::I * (-2.0 / SQRT3)) < 1e-15);
        let z = apply_J(&TangentVec::new(id(), Quaternion::ZERO, Quaternion::I).unwrap()).unwrap();
        assert!(z.U.max_abs_diff(Quaternion::I * (2.0 / SQRT3)) < 1e-15);
        assert!(z.V.max_abs_diff(Quaternion::I * (1.0 / SQRT3)) < 1e-15);
    }

    #[test]
    fn p_on_diagonal_is_identity() {
        let u = Quaternion::new(0.5, 0.5, -0.5, 0.5).renormalize().unwrap();
        let b = SurfacePoint::new(u, u);
        let alpha = Quaternion::new(0.0, 0.3, -1.2, 0.4);
        let z = TangentVec::new(b, u * alpha, u * alpha).unwrap();
        assert!(close(&apply_P(&z).unwrap(), &z, 1e-15));
    }

    #[test]
    fn g_examples() {
        let b = id();
        let c = 2.0 / (3.0 * SQRT3);
        let g12 = apply_G(&b.basis(0), &b.basis(1)).unwrap().coeffs();
        let want = [0.0, 0.0, -c, 0.0, 0.0, -2.0 * c];
        for k in 0..6 {
            assert!((g12[k] - want[k]).abs() < 1e-15);
        }
        let g1f2 = apply_G(&b.basis(0), &b.basis(4)).unwrap().coeffs();
        let want = [0.0, 0.0, -c, 0.0, 0.0, c];
        for k in 0..6 {
            assert!((g1f2[k] - want[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficient_examples() {
        let b = SurfacePoint::new(
            Quaternion::new(0.1, 0.7, -0.7, 0.1).renormalize().unwrap(),
            UnitQuaternion::IDENTITY,
        );
        let c = frame_coeffs(&b.basis(1));
        assert_eq!(c.f, [0.0; 3]);
        assert!((c.e[1] - 1.0).abs() < 1e-15 && c.e[0].abs() < 1e-15 && c.e[2].abs() < 1e-15);
        let p = b.p.get();
        let z = TangentVec::new(b, p * Quaternion::I + p * Quaternion::J, Quaternion::ZERO).unwrap();
        let c = frame_coeffs(&z);
        assert!((c.e[0] - 1.0).abs() < 1e-15 && (c.e[1] - 1.0).abs() < 1e-15 && c.e[2].abs() < 1e-15);
    }

    #[test]
    fn tangency_enforcement() {
        let b = id();
        let small = TangentVec::new(b, Quaternion::new(1e-8, 1.0, 0.0, 0.0), Quaternion::ZERO).unwrap();
        assert_eq!(small.U.w, 0.0);
        assert!(TangentVec::new(b, Quaternion::new(1e-3, 1.0, 0.0, 0.0), Quaternion::ZERO).is_err());
        let other = SurfacePoint::new(UnitQuaternion::IDENTITY, Quaternion::I.renormalize().unwrap());
        assert!(metric_g(&b.basis(0), &other.basis(0)).is_err());
    }

    #[test]
    fn frame_metric_values() {
        let b = SurfacePoint::new(
            Quaternion::new(0.2, -0.3, 0.9, 0.1).renormalize().unwrap(),
            Quaternion::new(-0.6, 0.2, 0.1, 0.7).renormalize().unwrap(),
        );
        for a in 0..6 {
            for c in 0..6 {
                let g = metric_g(&b.basis(a), &b.basis(c)).unwrap();
                assert!((g - frame_metric(a, c)).abs() < 1e-14);
            }
            let j = apply_J(&b.basis(a)).unwrap().coeffs();
            let want = j_column(a);
            for k in 0..6 {
                assert!((j[k] - want[k]).abs() < 1e-14);
            }
            if a < 3 {
                let pz = apply_P(&b.basis(a)).unwrap();
                assert!(close(&pz, &b.basis(a + 3), 1e-15));
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(b in point(), c in coeffs()) {
            let back = vec_at(b, c).coeffs();
            for k in 0..6 {
                prop_assert!((back[k] - c[k]).abs() < 1e-13);
            }
        }

        #[test]
        fn j_is_complex_and_isometric(b in point(), x in coeffs(), y in coeffs()) {
            let (zx, zy) = (vec_at(b, x), vec_at(b, y));
            let jx = apply_J(&zx).unwrap();
            prop_assert!(close(&apply_J(&jx).unwrap(), &zx.scale(-1.0), 1e-12));
            let gj = metric_g(&jx, &apply_J(&zy).unwrap()).unwrap();
            prop_assert!((gj - metric_g(&zx, &zy).unwrap()).abs() < 1e-12);
            prop_assert!((metric_coeffs(&x, &y) - metric_g(&zx, &zy).unwrap()).abs() < 1e-12);
            prop_assert!(metric_g(&zx, &zx).unwrap() >= 0.0);
        }

        #[test]
        fn p_properties(b in point(), x in coeffs(), y in coeffs()) {
            let (zx, zy) = (vec_at(b, x), vec_at(b, y));
            let (px, py) = (apply_P(&zx).unwrap(), apply_P(&zy).unwrap());
            prop_assert!(close(&apply_P(&px).unwrap(), &zx, 1e-13));
            prop_assert!((metric_g(&px, &py).unwrap() - metric_g(&zx, &zy).unwrap()).abs() < 1e-12);
            prop_assert!((metric_g(&px, &zy).unwrap() - metric_g(&zx, &py).unwrap()).abs() < 1e-12);
            let pj = apply_P(&apply_J(&zx).unwrap()).unwrap();
            let jp = apply_J(&px).unwrap();
            prop_assert!(close(&pj, &jp.scale(-1.0), 1e-12));
        }

        #[test]
        fn g_properties(b in point(), x in coeffs(), y in coeffs()) {
            let (zx, zy) = (vec_at(b, x), vec_at(b, y));
            let gxy = apply_G(&zx, &zy).unwrap();
            prop_assert!(apply_G(&zx, &zx).unwrap().coeffs().iter().all(|c| c.abs() < 1e-13));
            prop_assert!(metric_g(&gxy, &zx).unwrap().abs() < 1e-12);
            prop_assert!(metric_g(&gxy, &zy).unwrap().abs() < 1e-12);
            let lhs = apply_G(&zx, &apply_J(&zy).unwrap()).unwrap();
            let rhs = apply_J(&gxy).unwrap().scale(-1.0);
            prop_assert!(close(&lhs, &rhs, 1e-12));
        }

        #[test]
        fn metric_positive_definite(x in coeffs()) {
            let n2: f64 = x.iter().map(|c| c * c).sum();
            prop_assume!(n2 > 1e-6);
            prop_assert!(metric_coeffs(&x, &x) >= n2 / 3.0 - 1e-12);
        }
    }
}
