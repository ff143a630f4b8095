//! Minimal surfaces in S³ from sinh-Gordon data by integrating an adapted frame.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sinh_gordon::{sinh_gordon_residual, Grid2, SinhGordonField};
use crate::error::{NkError, Result};
use crate::quat::{Quaternion, UnitQuaternion};

/// `σ(∂z, ∂z) = −1` in real coordinates: `⟨p_uu, N⟩ = −⟨p_vv, N⟩ = L`, `⟨p_uv, N⟩ = 0`.
pub const HOPF_L: f64 = -2.0;
/// Allowed frame drift per unit length before re-orthonormalization.
pub const FRAME_DRIFT_GATE: f64 = 1e-6;
/// Solver residual required of the input field.
pub const FIELD_RESIDUAL_GATE: f64 = 1e-8;

/// Conformal factor `|p_u|² = |p_v|² = 2e^ω`.
pub fn conformal_factor(omega: f64) -> f64 {
    2.0 * omega.exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CliffordChart {
    /// `(cos u cos w, cos u sin w, sin u cos w, sin u sin w)`.
    Native,
    /// The native torus at `(u − v, u + v)`, matching the frame normalization for `ω ≡ 0`.
    Conformal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSurfaceData {
    pub grid: Grid2,
    pub p: Vec<UnitQuaternion>,
    pub pu: Vec<Quaternion>,
    pub pv: Vec<Quaternion>,
}

impl MinimalSurfaceData {
    /// `α₂ = p̄ p_u`.
    pub fn alpha2(&self, k: usize) -> Quaternion {
        self.p[k].get().conj() * self.pu[k]
    }

    /// `α₃ = p̄ p_v`.
    pub fn alpha3(&self, k: usize) -> Quaternion {
        self.p[k].get().conj() * self.pv[k]
    }

    /// Largest violation of `|p| = 1`, `p_u, p_v ⊥ p` and `Re α = 0`.
    pub fn invariant_defect(&self) -> f64 {
        (0..self.p.len())
            .map(|k| {
                let p = self.p[k].get();
                [(p.norm() - 1.0).abs(), p.dot(self.pu[k]).abs(), p.dot(self.pv[k]).abs(), self.alpha2(k).w.abs(), self.alpha3(k).w.abs()]
                    .into_iter()
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max |⟨p_u, p_v⟩|` and `max ||p_u|² − |p_v|²|`.
    pub fn conformality_defect(&self) -> f64 {
        (0..self.p.len())
            .map(|k| self.pu[k].dot(self.pv[k]).abs().max((self.pu[k].norm_sq() - self.pv[k].norm_sq()).abs()))
            .fold(0.0, f64::max)
    }
}

fn native(u: f64, w: f64) -> (Quaternion, Quaternion, Quaternion) {
    let (cu, su, cw, sw) = (u.cos(), u.sin(), w.cos(), w.sin());
    (
        Quaternion::new(cu * cw, cu * sw, su * cw, su * sw),
        Quaternion::new(-su * cw, -su * sw, cu * cw, cu * sw),
        Quaternion::new(-cu * sw, cu * cw, -su * sw, su * cw),
    )
}

/// `(p, p_u, p_v)` of the Clifford torus in the given chart.
pub fn clifford_point(chart: CliffordChart, u: f64, v: f64) -> (Quaternion, Quaternion, Quaternion) {
    match chart {
        CliffordChart::Native => native(u, v),
        CliffordChart::Conformal => {
            let (p, pa, pb) = native(u - v, u + v);
            (p, pa + pb, pb - pa)
        }
    }
}

pub fn clifford_torus_surface(grid: Grid2, chart: CliffordChart) -> MinimalSurfaceData {
    let mut out = MinimalSurfaceData {
        grid,
        p: Vec::with_capacity(grid.len()),
        pu: Vec::with_capacity(grid.len()),
        pv: Vec::with_capacity(grid.len()),
    };
    for i in 0..grid.nu {
        for j in 0..grid.nv {
            let (u, v) = grid.coord(i, j);
            let (p, pu, pv) = clifford_point(chart, u, v);
            out.p.push(UnitQuaternion::new_unchecked(p));
            out.pu.push(pu);
            out.pv.push(pv);
        }
    }
    out
}

/// Frame `(p, f₁, f₂, N)` at the origin used for every reconstruction.
pub fn initial_frame() -> Matrix4<f64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Matrix4::from_columns(&[
        Vector4::new(1.0, 0.0, 0.0, 0.0),
        Vector4::new(0.0, r, r, 0.0),
        Vector4::new(0.0, r, -r, 0.0),
        Vector4::new(0.0, 0.0, 0.0, -1.0),
    ])
}

/// Right-multiplied generator of the frame along `u` (`dir = 0`) or `v` (`dir = 1`), from `(ω, ω_u, ω_v)`.
pub fn frame_generator(dir: usize, w: &[f64; 3]) -> Matrix4<f64> {
    let l = conformal_factor(w[0]).sqrt();
    let c = HOPF_L / l;
    let mut m = Matrix4::zeros();
    if dir == 0 {
        m[(1, 0)] = l;
        m[(0, 1)] = -l;
        m[(2, 1)] = -w[2] / 2.0;
        m[(1, 2)] = w[2] / 2.0;
        m[(3, 1)] = c;
        m[(1, 3)] = -c;
    } else {
        m[(2, 0)] = l;
        m[(0, 2)] = -l;
        m[(2, 1)] = w[1] / 2.0;
        m[(1, 2)] = -w[1] / 2.0;
        m[(3, 2)] = -c;
        m[(2, 3)] = c;
    }
    m
}

/// Midpoint value between samples `k` and `k + 1` of a line, to fourth order where neighbours exist.
pub(crate) fn midpoint<const N: usize>(y: &[[f64; N]], k: usize) -> [f64; N] {
    let n = y.len();
    std::array::from_fn(|m| {
        if n >= 4 && k >= 1 && k + 2 < n {
            (-y[k - 1][m] + 9.0 * y[k][m] + 9.0 * y[k + 1][m] - y[k + 2][m]) / 16.0
        } else if n >= 3 && k == 0 {
            (3.0 * y[0][m] + 6.0 * y[1][m] - y[2][m]) / 8.0
        } else if n >= 3 && k + 2 == n {
            (3.0 * y[n - 1][m] + 6.0 * y[n - 2][m] - y[n - 3][m]) / 8.0
        } else {
            0.5 * (y[k][m] + y[k + 1][m])
        }
    })
}

fn orthonormalize(f: &Matrix4<f64>) -> Matrix4<f64> {
    let mut cols: Vec<Vector4<f64>> = Vec::with_capacity(4);
    for c in 0..4 {
        let mut v = f.column(c).into_owned();
        for d in &cols {
            v -= d * d.dot(&v);
        }
        cols.push(v.normalize());
    }
    Matrix4::from_columns(&cols)
}

/// Frames along one coordinate line, starting from `f0` at sample 0.
fn frame_line(f0: Matrix4<f64>, coeffs: &[[f64; 3]], dir: usize, h: f64) -> Result<Vec<Matrix4<f64>>> {
    let mut out = Vec::with_capacity(coeffs.len());
    out.push(f0);
    let mut f = f0;
    for k in 0..coeffs.len().saturating_sub(1) {
        let mid = midpoint(coeffs, k);
        let (m0, m1, m2) = (frame_generator(dir, &coeffs[k]), frame_generator(dir, &mid), frame_generator(dir, &coeffs[k + 1]));
        let k1 = f * m0;
        let k2 = (f + k1 * (h / 2.0)) * m1;
        let k3 = (f + k2 * (h / 2.0)) * m1;
        let k4 = (f + k3 * h) * m2;
        let next = f + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let drift = (next.transpose() * next - Matrix4::identity()).amax();
        if drift / h.abs() > FRAME_DRIFT_GATE {
            return Err(NkError::Drift { drift: drift / h.abs(), gate: FRAME_DRIFT_GATE });
        }
        f = orthonormalize(&next);
        out.push(f);
    }
    Ok(out)
}

fn quat_of(v: Vector4<f64>) -> Quaternion {
    Quaternion::new(v[0], v[1], v[2], v[3])
}

/// Integrates the frame along `u` at `v = v₀`, then along every `v`-line.
pub fn reconstruct_minimal_surface(field: &SinhGordonField) -> Result<MinimalSurfaceData> {
    let residual = sinh_gordon_residual(field);
    if residual > FIELD_RESIDUAL_GATE {
        return Err(NkError::InvalidInput(format!("sinh-Gordon residual {residual:.3e} above {FIELD_RESIDUAL_GATE:e}")));
    }
    let g = field.grid;
    let w = field.with_gradient();
    let row: Vec<[f64; 3]> = (0..g.nu).map(|i| w[g.idx(i, 0)]).collect();
    let spine = frame_line(initial_frame(), &row, 0, g.du)?;
    let lines: Vec<Vec<Matrix4<f64>>> = (0..g.nu)
        .into_par_iter()
        .map(|i| {
            let col: Vec<[f64; 3]> = (0..g.nv).map(|j| w[g.idx(i, j)]).collect();
            frame_line(spine[i], &col, 1, g.dv)
        })
        .collect::<Result<_>>()?;
    let mut out = MinimalSurfaceData {
        grid: g,
        p: Vec::with_capacity(g.len()),
        pu: Vec::with_capacity(g.len()),
        pv: Vec::with_capacity(g.len()),
    };
    for (i, line) in lines.iter().enumerate() {
        for (j, f) in line.iter().enumerate() {
            let l = conformal_factor(w[g.idx(i, j)][0]).sqrt();
            out.p.push(UnitQuaternion::new_unchecked(quat_of(f.column(0).into_owned())));
            out.pu.push(quat_of(f.column(1).into_owned()) * l);
            out.pv.push(quat_of(f.column(2).into_owned()) * l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::sinh_gordon::{sinh_gordon_solve, BoundaryKind, BoundarySpec};

    #[test]
    fn native_origin_values() {
        let (p, pu, pv) = clifford_point(CliffordChart::Native, 0.0, 0.0);
        assert_eq!(p.to_array(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(pu.to_array(), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(pv.to_array(), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn clifford_is_conformal_and_minimal() {
        for chart in [CliffordChart::Native, CliffordChart::Conformal] {
            let s = clifford_torus_surface(Grid2::new(100, 100, 0.063, 0.041), chart);
            assert!(s.invariant_defect() < 1e-14);
            assert!(s.conformality_defect() < 1e-14);
            let h = 1e-4;
            for (u, v) in [(0.3, -0.2), (1.1, 0.7)] {
                let f = |a: f64, b: f64| clifford_point(chart, a, b).0;
                let lap = (f(u + h, v) + f(u - h, v) + f(u, v + h) + f(u, v - h) - f(u, v) * 4.0) / (h * h);
                let (p, pu, _) = clifford_point(chart, u, v);
                let tangential = lap - p * lap.dot(p);
                assert!(tangential.norm() < 1e-6, "{chart:?}");
                assert!((lap.dot(p) + 2.0 * pu.norm_sq()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn generator_is_skew() {
        let w = [0.3, -0.7, 1.1];
        for dir in 0..2 {
            let m = frame_generator(dir, &w);
            assert!((m + m.transpose()).amax() < 1e-15);
        }
    }

    #[test]
    fn zero_field_reproduces_clifford() {
        let g = Grid2::square(1001, 1.0);
        let s = reconstruct_minimal_surface(&SinhGordonField::constant(g, 0.0)).unwrap();
        let c = clifford_torus_surface(g, CliffordChart::Conformal);
        let worst = (0..g.len()).map(|k| s.p[k].get().max_abs_diff(c.p[k].get())).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
        assert!(s.invariant_defect() < 1e-8);
    }

    /// Frame compatibility: derivative along `u` of the reconstructed `p` away from the spine, on stencils clear of the boundary lines.
    fn compat(n: usize) -> f64 {
        let g = Grid2::square(n, 0.5);
        let b = BoundarySpec { kind: BoundaryKind::Sinusoidal, amplitude: 0.2 };
        let f = sinh_gordon_solve(g, &b, None, 1e-11).unwrap();
        let s = reconstruct_minimal_surface(&f).unwrap();
        let mut worst: f64 = 0.0;
        for i in 2..n - 2 {
            for j in 1..n {
                let d = (s.p[g.idx(i + 1, j)].get() - s.p[g.idx(i - 1, j)].get()) / (2.0 * g.du);
                worst = worst.max((d - s.pu[g.idx(i, j)]).norm());
            }
        }
        worst
    }

    #[test]
    fn solver_field_is_compatible() {
        let (a, b) = (compat(33), compat(65));
        assert!(a / b > 3.0, "{a} {b}");
    }
}
