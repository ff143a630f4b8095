//! The Levi-Civita connection of the nearly Kähler metric.

use nalgebra::{Matrix6, Vector6};
use num_rational::Rational64;
use serde::Serialize;

use crate::error::Result;
use crate::jet::dexp_im;
use crate::nkspace::{
    apply_J_unchecked, frame_coeffs, from_coeffs, g_coeffs, levi_civita, metric_unchecked, third, Coeffs6,
    FrameCoeffs, SurfacePoint, TangentVec, ALPHA,
};
use crate::quat::{Quaternion, UnitQuaternion};

/// A frame field `Ẽᵢ` (index 0..3) or `F̃ᵢ` (index 3..6).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FrameIndex(usize);

impl FrameIndex {
    /// `Ẽᵢ` for `i` in 1..=3.
    pub fn e(i: usize) -> Self {
        assert!((1..=3).contains(&i), "frame index out of range");
        FrameIndex(i - 1)
    }

    /// `F̃ᵢ` for `i` in 1..=3.
    pub fn f(i: usize) -> Self {
        assert!((1..=3).contains(&i), "frame index out of range");
        FrameIndex(i + 2)
    }

    pub fn from_flat(a: usize) -> Self {
        assert!(a < 6, "frame index out of range");
        FrameIndex(a)
    }

    pub fn flat(self) -> usize {
        self.0
    }
}

/// Christoffel data `∇̃_{a} b = Σ_c Γ[a][b][c] c` in the global frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTable {
    pub gamma: [[Coeffs6; 6]; 6],
}

impl Default for StructureTable {
    fn default() -> Self {
        Self::new()
    }
}

impl StructureTable {
    pub fn new() -> Self {
        let mut gamma = [[[0.0; 6]; 6]; 6];
        for (a, row) in gamma.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let (i, j) = (a % 3, b % 3);
                if i == j {
                    continue;
                }
                let k = third(i, j);
                let eps = levi_civita(i, j, k);
                match (a < 3, b < 3) {
                    (true, true) => entry[k] = -eps,
                    (false, false) => entry[k + 3] = -eps,
                    (true, false) => {
                        entry[k] = eps / 3.0;
                        entry[k + 3] = -eps / 3.0;
                    }
                    (false, true) => {
                        entry[k] = -eps / 3.0;
                        entry[k + 3] = eps / 3.0;
                    }
                }
            }
        }
        StructureTable { gamma }
    }

    /// `∇̃_X Y` for constant-coefficient fields `X`, `Y`.
    pub fn apply(&self, x: &Coeffs6, y: &Coeffs6) -> Coeffs6 {
        let mut out = [0.0; 6];
        for a in 0..6 {
            for b in 0..6 {
                let w = x[a] * y[b];
                if w != 0.0 {
                    for c in 0..6 {
                        out[c] += w * self.gamma[a][b][c];
                    }
                }
            }
        }
        out
    }
}

pub fn nabla_frame(i: FrameIndex, j: FrameIndex) -> FrameCoeffs {
    FrameCoeffs::from_array(StructureTable::new().gamma[i.flat()][j.flat()])
}

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn frame_metric_exact(a: usize, b: usize) -> Rational64 {
    if a == b {
        q(4, 3)
    } else if a % 3 == b % 3 {
        q(-2, 3)
    } else {
        q(0, 1)
    }
}

fn inverse_frame_metric_exact(a: usize, b: usize) -> Rational64 {
    if a == b {
        q(1, 1)
    } else if a % 3 == b % 3 {
        q(1, 2)
    } else {
        q(0, 1)
    }
}

/// `[a, b]` for frame fields: `[Ẽᵢ,Ẽⱼ] = −2εẼₖ`, `[F̃ᵢ,F̃ⱼ] = −2εF̃ₖ`, mixed brackets vanish.
fn bracket_exact(a: usize, b: usize) -> [Rational64; 6] {
    let mut out = [q(0, 1); 6];
    if (a < 3) != (b < 3) || a % 3 == b % 3 {
        return out;
    }
    let (i, j) = (a % 3, b % 3);
    let k = third(i, j);
    let eps = levi_civita(i, j, k) as i64;
    out[if a < 3 { k } else { k + 3 }] = q(-2 * eps, 1);
    out
}

fn pair_exact(x: &[Rational64; 6], c: usize) -> Rational64 {
    (0..6).map(|d| x[d] * frame_metric_exact(d, c)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KoszulReport {
    /// Largest `|table − Koszul|` with the Koszul side computed in exact rationals.
    pub max_residual: f64,
    /// Whether every rational Koszul coefficient equals the table entry exactly.
    pub exact_match: bool,
    /// Largest violation of `ĝ(∇ₐb, c) + ĝ(b, ∇ₐc) = 0`.
    pub metric_residual: f64,
    /// Largest violation of `∇ₐb − ∇_b a = [a, b]`.
    pub torsion_residual: f64,
    /// Number of coefficients `Γᵉₐᵦ` compared.
    pub coefficients: usize,
}

/// Recomputes every coefficient from the Koszul formula for the constant frame metric.
pub fn koszul_check() -> KoszulReport {
    let table = StructureTable::new();
    let mut max_residual: f64 = 0.0;
    let mut exact_match = true;
    let mut metric_residual: f64 = 0.0;
    let mut torsion_residual: f64 = 0.0;
    let mut coefficients = 0;
    for a in 0..6 {
        for b in 0..6 {
            // 2ĝ(∇ₐb, c) = ĝ([a,b],c) − ĝ([b,c],a) + ĝ([c,a],b)
            let lowered: Vec<Rational64> = (0..6)
                .map(|c| {
                    (pair_exact(&bracket_exact(a, b), c) - pair_exact(&bracket_exact(b, c), a)
                        + pair_exact(&bracket_exact(c, a), b))
                        / 2
                })
                .collect();
            for e in 0..6 {
                let exact: Rational64 = (0..6).map(|c| inverse_frame_metric_exact(e, c) * lowered[c]).sum();
                let value = *exact.numer() as f64 / *exact.denom() as f64;
                let entry = table.gamma[a][b][e];
                coefficients += 1;
                max_residual = max_residual.max((entry - value).abs());
                let entry_exact = Rational64::approximate_float(entry).unwrap_or(q(i64::MAX, 1));
                if entry_exact != exact {
                    exact_match = false;
                }
            }
            let br = bracket_exact(a, b);
            for e in 0..6 {
                let bracket = *br[e].numer() as f64 / *br[e].denom() as f64;
                let t = table.gamma[a][b][e] - table.gamma[b][a][e] - bracket;
                torsion_residual = torsion_residual.max(t.abs());
            }
            for c in 0..6 {
                let mut s = 0.0;
                for d in 0..6 {
                    s += table.gamma[a][b][d] * crate::nkspace::frame_metric(d, c)
                        + table.gamma[a][c][d] * crate::nkspace::frame_metric(b, d);
                }
                metric_residual = metric_residual.max(s.abs());
            }
        }
    }
    KoszulReport { max_residual, exact_match, metric_residual, torsion_residual, coefficients }
}

/// Ambient covariant derivative `∇̃_X W` at `f(at)` for a vector field `W` along a map.
///
/// The base points of `W` trace out the map itself, so `df(X)` is taken from them.
pub fn covariant_derivative<W>(w: W, x: &[f64], at: &[f64], h: f64) -> Result<TangentVec>
where
    W: Fn(&[f64]) -> Result<TangentVec>,
{
    let shifted = |s: f64| -> Vec<f64> { at.iter().zip(x).map(|(a, d)| a + s * d).collect() };
    let w0 = w(at)?;
    let wp = w(&shifted(h))?;
    let wm = w(&shifted(-h))?;
    let (cp, cm, c0) = (wp.coeffs(), wm.coeffs(), w0.coeffs());
    let base = w0.base;
    let u = (wp.base.p.get() - wm.base.p.get()) / (2.0 * h);
    let v = (wp.base.q.get() - wm.base.q.get()) / (2.0 * h);
    let velocity = TangentVec::new(base, u, v)?.coeffs();
    Ok(from_coeffs(base, FrameCoeffs::from_array(covariant_from_parts(&velocity, &c0, &cp, &cm, h))))
}

/// `X(wᵏ)eₖ + wᵏ∇̃_{X}eₖ` from central-difference coefficient samples.
pub(crate) fn covariant_from_parts(velocity: &Coeffs6, c0: &Coeffs6, cp: &Coeffs6, cm: &Coeffs6, h: f64) -> Coeffs6 {
    let mut out = StructureTable::new().apply(velocity, c0);
    for k in 0..6 {
        out[k] += (cp[k] - cm[k]) / (2.0 * h);
    }
    out
}

/// Exponential chart `y ↦ (p·exp(Σ yᵢαᵢ), q·exp(Σ y₃₊ᵢαᵢ))` around a base point.
struct ExpChart {
    p: Quaternion,
    q: Quaternion,
}

impl ExpChart {
    fn im(y: &[f64]) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (k, a) in ALPHA.iter().enumerate() {
            v[0] += y[k] * a.x;
            v[1] += y[k] * a.y;
            v[2] += y[k] * a.z;
        }
        v
    }

    fn point(&self, y: &[f64; 6]) -> SurfacePoint {
        let (a, b) = (Self::im(&y[..3]), Self::im(&y[3..]));
        SurfacePoint::new(
            UnitQuaternion::new_unchecked(self.p * Quaternion::exp_im(a)),
            UnitQuaternion::new_unchecked(self.q * Quaternion::exp_im(b)),
        )
    }

    fn coordinate_vectors(&self, y: &[f64; 6]) -> [TangentVec; 6] {
        let base = self.point(y);
        let (a, b) = (Self::im(&y[..3]), Self::im(&y[3..]));
        std::array::from_fn(|c| {
            let dir = ALPHA[c % 3].im();
            if c < 3 {
                TangentVec::raw(base, self.p * dexp_im(a, dir), Quaternion::ZERO)
            } else {
                TangentVec::raw(base, Quaternion::ZERO, self.q * dexp_im(b, dir))
            }
        })
    }

    fn metric(&self, y: &[f64; 6]) -> Matrix6<f64> {
        let d = self.coordinate_vectors(y);
        Matrix6::from_fn(|a, b| metric_unchecked(&d[a], &d[b]))
    }

    /// `J` in coordinates: `J^c_b = g^{cd} g(∂_d, J∂_b)`.
    fn complex_structure(&self, y: &[f64; 6]) -> Matrix6<f64> {
        let d = self.coordinate_vectors(y);
        let g = Matrix6::from_fn(|a, b| metric_unchecked(&d[a], &d[b]));
        let lowered = Matrix6::from_fn(|dd, b| metric_unchecked(&d[dd], &apply_J_unchecked(&d[b])));
        g.try_inverse().expect("chart metric is invertible") * lowered
    }
}

fn offset(a: usize, s: f64) -> [f64; 6] {
    let mut y = [0.0; 6];
    y[a] = s;
    y
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NablaJReport {
    pub h: f64,
    /// Max coefficient deviation of finite-difference `(∇̃_X J)Y` from the `G` table.
    pub residual: f64,
    /// Max coefficient of finite-difference `(∇̃_X J)X`; skewness requires this to vanish.
    pub skew_residual: f64,
}

/// `(∇̃_X J)Y` by second-order central differences in the exponential chart, compared with `G(X, Y)`.
///
/// The chart's coordinate lines through the base point are the frame flows, and its
/// Christoffel symbols come from differentiating the metric itself, so neither the
/// connection table nor the `G` table enters the computation.
pub fn nabla_j_check(point: SurfacePoint, x: &TangentVec, y: &TangentVec, h: f64) -> NablaJReport {
    let chart = ExpChart { p: point.p.get(), q: point.q.get() };
    let g0 = chart.metric(&[0.0; 6]);
    let ginv = g0.try_inverse().expect("frame metric is invertible");
    let j0 = chart.complex_structure(&[0.0; 6]);
    let mut dg = Vec::with_capacity(6);
    let mut dj = Vec::with_capacity(6);
    for a in 0..6 {
        dg.push((chart.metric(&offset(a, h)) - chart.metric(&offset(a, -h))) / (2.0 * h));
        dj.push((chart.complex_structure(&offset(a, h)) - chart.complex_structure(&offset(a, -h))) / (2.0 * h));
    }
    // Γ^c_{ab} = ½ g^{cd}(∂_a g_db + ∂_b g_da − ∂_d g_ab)
    let mut chris = [[[0.0; 6]; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            let lower = Vector6::from_fn(|d, _| 0.5 * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]));
            let up = ginv * lower;
            for c in 0..6 {
                chris[c][a][b] = up[c];
            }
        }
    }
    let nabla = |xc: &Coeffs6, yc: &Coeffs6| -> Coeffs6 {
        let mut out = [0.0; 6];
        for (c, oc) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..6 {
                for b in 0..6 {
                    let w = xc[a] * yc[b];
                    if w == 0.0 {
                        continue;
                    }
                    let mut t = dj[a][(c, b)];
                    for d in 0..6 {
                        t += chris[c][a][d] * j0[(d, b)] - chris[d][a][b] * j0[(c, d)];
                    }
                    s += w * t;
                }
            }
            *oc = s;
        }
        out
    };
    let (xc, yc) = (frame_coeffs(x).to_array(), frame_coeffs(y).to_array());
    let fd = nabla(&xc, &yc);
    let table = g_coeffs(&xc, &yc);
    let residual = fd.iter().zip(table).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let skew_residual = nabla(&xc, &xc).iter().map(|v| v.abs()).fold(0.0, f64::max);
    NablaJReport { h, residual, skew_residual }
}

/// `G(a, b)` rebuilt from `(∇̃_a J)b = ∇̃_a(Jb) − J∇̃_a b` with the connection table.
pub fn g_from_connection(a: usize, b: usize) -> Coeffs6 {
    let t = StructureTable::new();
    let mut ea = [0.0; 6];
    ea[a] = 1.0;
    let jb = crate::nkspace::j_column(b);
    let first = t.apply(&ea, &jb);
    let second = crate::nkspace::j_coeffs(&t.gamma[a][b]);
    std::array::from_fn(|c| first[c] - second[c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nkspace::{g_table, metric_g};
    use proptest::prelude::*;

    fn fc(c: Coeffs6) -> FrameCoeffs {
        FrameCoeffs::from_array(c)
    }

    #[test]
    fn table_entries() {
        assert_eq!(nabla_frame(FrameIndex::e(1), FrameIndex::e(2)), fc([0.0, 0.0, -1.0, 0.0, 0.0, 0.0]));
        assert_eq!(
            nabla_frame(FrameIndex::e(1), FrameIndex::f(2)),
            fc([0.0, 0.0, 1.0 / 3.0, 0.0, 0.0, -1.0 / 3.0])
        );
        assert_eq!(
            nabla_frame(FrameIndex::f(1), FrameIndex::e(2)),
            fc([0.0, 0.0, -1.0 / 3.0, 0.0, 0.0, 1.0 / 3.0])
        );
        assert_eq!(nabla_frame(FrameIndex::f(2), FrameIndex::f(3)), fc([0.0, 0.0, 0.0, -1.0, 0.0, 0.0]));
        assert_eq!(nabla_frame(FrameIndex::e(1), FrameIndex::e(1)), FrameCoeffs::default());
    }

    #[test]
    fn koszul_exact() {
        let r = koszul_check();
        assert!(r.exact_match);
        assert_eq!(r.max_residual, 0.0);
        assert!(r.metric_residual < 1e-15);
        assert!(r.torsion_residual < 1e-15);
    }

    #[test]
    fn g_table_agrees_with_connection() {
        for a in 0..6 {
            for b in 0..6 {
                let (x, y) = (g_from_connection(a, b), g_table(a, b));
                for c in 0..6 {
                    assert!((x[c] - y[c]).abs() < 1e-15, "entry {a} {b} {c}");
                }
            }
        }
    }

    fn sample_point() -> SurfacePoint {
        SurfacePoint::new(
            Quaternion::new(0.3, -0.5, 0.7, 0.2).renormalize().unwrap(),
            Quaternion::new(-0.4, 0.1, 0.6, -0.5).renormalize().unwrap(),
        )
    }

    #[test]
    fn nabla_j_second_order() {
        let b = sample_point();
        let r1 = nabla_j_check(b, &b.basis(0), &b.basis(1), 1e-4);
        let r2 = nabla_j_check(b, &b.basis(0), &b.basis(1), 5e-5);
        assert!(r1.residual < 1e-6, "{r1:?}");
        assert!(r1.residual / r2.residual >= 3.5, "{r1:?} {r2:?}");
        assert!(r1.skew_residual < 1e-6);
    }

    #[test]
    fn nabla_j_every_frame_pair() {
        let b = sample_point();
        for a in 0..6 {
            for c in 0..6 {
                let r = nabla_j_check(b, &b.basis(a), &b.basis(c), 1e-4);
                assert!(r.residual < 1e-6, "pair {a} {c}: {r:?}");
            }
        }
    }

    #[test]
    fn constant_field_has_table_derivative() {
        let b = sample_point();
        // W = Ẽ₂ along the constant map: only the table term survives, and it vanishes.
        let w = |_: &[f64]| -> Result<TangentVec> { Ok(b.basis(1)) };
        let d = covariant_derivative(w, &[1.0, 0.0, 0.0], &[0.0; 3], 1e-3).unwrap();
        assert!(d.coeffs().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn frame_field_along_flow() {
        // W = Ẽ₂ along the flow of Ẽ₁, so ∇̃W = ∇̃_{Ẽ₁}Ẽ₂ = −Ẽ₃.
        let b = sample_point();
        let curve = move |x: &[f64]| {
            let p = b.p.get() * Quaternion::exp_im([x[0], 0.0, 0.0]);
            SurfacePoint::new(UnitQuaternion::new_unchecked(p), b.q)
        };
        let w = |x: &[f64]| -> Result<TangentVec> { Ok(curve(x).basis(1)) };
        let d = covariant_derivative(w, &[1.0], &[0.0], 1e-3).unwrap().coeffs();
        let want = [0.0, 0.0, -1.0, 0.0, 0.0, 0.0];
        for k in 0..6 {
            assert!((d[k] - want[k]).abs() < 1e-6);
        }
    }

    fn metric_compat_defect(c1: Coeffs6, c2: Coeffs6, h: f64) -> f64 {
        let b = sample_point();
        let curve = move |t: f64| {
            let p = b.p.get() * Quaternion::exp_im([0.3 * t, -0.2 * t, 0.5 * t * t]);
            let q = b.q.get() * Quaternion::exp_im([t, 0.1 * t * t, 0.0]);
            SurfacePoint::new(UnitQuaternion::new_unchecked(p), UnitQuaternion::new_unchecked(q))
        };
        let field = move |c: Coeffs6| {
            move |x: &[f64]| -> Result<TangentVec> {
                let t = x[0];
                let varied: Coeffs6 = std::array::from_fn(|k| c[k] * (1.0 + (k as f64 + 1.0) * t).cos());
                Ok(from_coeffs(curve(t), fc(varied)))
            }
        };
        let (w1, w2) = (field(c1), field(c2));
        let gw = |t: f64| metric_g(&w1(&[t]).unwrap(), &w2(&[t]).unwrap()).unwrap();
        let lhs = (gw(h) - gw(-h)) / (2.0 * h);
        let d1 = covariant_derivative(&w1, &[1.0], &[0.0], h).unwrap();
        let d2 = covariant_derivative(&w2, &[1.0], &[0.0], h).unwrap();
        let rhs = metric_g(&d1, &w2(&[0.0]).unwrap()).unwrap() + metric_g(&w1(&[0.0]).unwrap(), &d2).unwrap();
        (lhs - rhs).abs()
    }

    #[test]
    fn covariant_derivative_is_metric() {
        let c1 = [0.3, -1.0, 0.2, 0.7, 0.1, -0.4];
        let c2 = [-0.5, 0.2, 0.9, 0.0, 0.6, 0.3];
        let d1 = metric_compat_defect(c1, c2, 1e-2);
        let d2 = metric_compat_defect(c1, c2, 5e-3);
        assert!(d1 < 1e-3 && d2 < d1 / 3.0, "{d1} {d2}");
    }

    proptest! {
        #[test]
        fn covariant_derivative_linear(s in -2.0f64..2.0, c in prop::array::uniform6(-1.0f64..1.0)) {
            let b = sample_point();
            let curve = move |x: &[f64]| {
                let p = b.p.get() * Quaternion::exp_im([x[0], 0.5 * x[1], 0.0]);
                let q = b.q.get() * Quaternion::exp_im([0.0, x[1], x[0] * x[1]]);
                SurfacePoint::new(UnitQuaternion::new_unchecked(p), UnitQuaternion::new_unchecked(q))
            };
            let field = move |x: &[f64]| -> Result<TangentVec> {
                let v: Coeffs6 = std::array::from_fn(|k| c[k] * (x[0] + 2.0 * x[1] + k as f64).sin());
                Ok(from_coeffs(curve(x), fc(v)))
            };
            let at = [0.1, -0.2];
            let d = |dir: [f64; 2]| covariant_derivative(field, &dir, &at, 1e-4).unwrap().coeffs();
            let (dx, dy, dxy) = (d([1.0, 0.0]), d([0.0, 1.0]), d([s, 1.0]));
            let scaled = covariant_derivative(|x: &[f64]| field(x).map(|w| w.scale(s)), &[1.0, 0.0], &at, 1e-4)
                .unwrap()
                .coeffs();
            for k in 0..6 {
                prop_assert!((dxy[k] - (s * dx[k] + dy[k])).abs() < 1e-6);
                prop_assert!((scaled[k] - s * dx[k]).abs() < 1e-9);
            }
        }
    }
}
