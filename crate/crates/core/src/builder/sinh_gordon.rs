//! Newton solver for `Δω = −8 sinh ω` on a rectangle with Dirichlet data.

use nalgebra::DMatrix;
use nalgebra_sparse::{factorization::CscCholesky, CooMatrix, CscMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};

/// Largest boundary amplitude the solver accepts.
pub const MAX_AMPLITUDE: f64 = 0.5;
pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Node `(i, j)` sits at `(u0 + i·du, v0 + j·dv)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub nu: usize,
    pub nv: usize,
    pub du: f64,
    pub dv: f64,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub v0: f64,
}

impl Grid2 {
    pub fn new(nu: usize, nv: usize, du: f64, dv: f64) -> Self {
        Grid2 { nu, nv, du, dv, u0: 0.0, v0: 0.0 }
    }

    /// `n × n` nodes spanning `[0, side]²`.
    pub fn square(n: usize, side: f64) -> Self {
        let h = side / (n - 1) as f64;
        Grid2::new(n, n, h, h)
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        (self.u0 + i as f64 * self.du, self.v0 + j as f64 * self.dv)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nu || j + 1 == self.nv
    }

    pub fn same_as(&self, o: &Grid2) -> bool {
        self.nu == o.nu
            && self.nv == o.nv
            && (self.du - o.du).abs() < 1e-14
            && (self.dv - o.dv).abs() < 1e-14
            && (self.u0 - o.u0).abs() < 1e-14
            && (self.v0 - o.v0).abs() < 1e-14
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinhGordonField {
    pub grid: Grid2,
    pub omega: Vec<f64>,
}

/// Derivative of `y` at sample `k` of a line with spacing `h`: fourth order, with biased five-node stencils near the ends.
pub(crate) fn line_derivative(y: &[f64], k: usize, h: f64) -> f64 {
    let n = y.len();
    if n < 5 {
        return match n {
            0 | 1 => 0.0,
            2 => (y[1] - y[0]) / h,
            _ if k == 0 => (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h),
            _ if k == n - 1 => (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h),
            _ => (y[k + 1] - y[k - 1]) / (2.0 * h),
        };
    }
    const END: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    const NEXT: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let forward = |w: &[f64; 5], s: usize| (0..5).map(|m| w[m] * y[s + m]).sum::<f64>() / (12.0 * h);
    let backward = |w: &[f64; 5], s: usize| -(0..5).map(|m| w[m] * y[s - m]).sum::<f64>() / (12.0 * h);
    match k {
        0 => forward(&END, 0),
        1 => forward(&NEXT, 0),
        _ if k == n - 1 => backward(&END, n - 1),
        _ if k == n - 2 => backward(&NEXT, n - 1),
        _ => (y[k - 2] - 8.0 * y[k - 1] + 8.0 * y[k + 1] - y[k + 2]) / (12.0 * h),
    }
}

impl SinhGordonField {
    pub fn constant(grid: Grid2, value: f64) -> Self {
        SinhGordonField { grid, omega: vec![value; grid.len()] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.omega[self.grid.idx(i, j)]
    }

    pub fn omega_u(&self, i: usize, j: usize) -> f64 {
        let line: Vec<f64> = (0..self.grid.nu).map(|k| self.at(k, j)).collect();
        line_derivative(&line, i, self.grid.du)
    }

    pub fn omega_v(&self, i: usize, j: usize) -> f64 {
        let line: Vec<f64> = (0..self.grid.nv).map(|k| self.at(i, k)).collect();
        line_derivative(&line, j, self.grid.dv)
    }

    /// `(ω, ω_u, ω_v)` at every node.
    pub fn with_gradient(&self) -> Vec<[f64; 3]> {
        let g = self.grid;
        let mut out = vec![[0.0; 3]; g.len()];
        for i in 0..g.nu {
            for j in 0..g.nv {
                out[g.idx(i, j)] = [self.at(i, j), self.omega_u(i, j), self.omega_v(i, j)];
            }
        }
        out
    }

    fn defect(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        let c = self.at(i, j);
        let lap = (self.at(i + 1, j) - 2.0 * c + self.at(i - 1, j)) / (g.du * g.du)
            + (self.at(i, j + 1) - 2.0 * c + self.at(i, j - 1)) / (g.dv * g.dv);
        lap + 8.0 * c.sinh()
    }
}

/// `max |Δ_h ω + 8 sinh ω|` over interior nodes.
pub fn sinh_gordon_residual(field: &SinhGordonField) -> f64 {
    let g = field.grid;
    let mut r: f64 = 0.0;
    for i in 1..g.nu.saturating_sub(1) {
        for j in 1..g.nv.saturating_sub(1) {
            r = r.max(field.defect(i, j).abs());
        }
    }
    r
}

/// Solution of `ω'' = −8 sinh ω`, `ω(0) = ω₀`, `ω'(0) = 0`, returned as `(ω(s), ω'(s))`.
pub fn profile(s: f64, omega0: f64) -> (f64, f64) {
    const STEPS_PER_UNIT: f64 = 4096.0;
    let n = ((s.abs() * STEPS_PER_UNIT).ceil() as usize).max(1);
    let h = s / n as f64;
    let f = |y: [f64; 2]| [y[1], -8.0 * y[0].sinh()];
    let mut y = [omega0, 0.0];
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for m in 0..2 {
            y[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }
    }
    (y[0], y[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Zero,
    /// `a · sin(2π û) · cos(π v̂)` with `û, v̂` the normalized coordinates.
    Sinusoidal,
    /// The exact one-dimensional solution [`profile`] in `u`, starting at `ω₀ = a`.
    Profile,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    #[serde(default)]
    pub amplitude: f64,
}

impl BoundarySpec {
    pub fn zero() -> Self {
        BoundarySpec { kind: BoundaryKind::Zero, amplitude: 0.0 }
    }

    /// Values at every node; the solver reads only the boundary ones.
    pub fn values(&self, grid: &Grid2) -> Vec<f64> {
        let lu = ((grid.nu - 1) as f64 * grid.du).max(f64::MIN_POSITIVE);
        let lv = ((grid.nv - 1) as f64 * grid.dv).max(f64::MIN_POSITIVE);
        let a = self.amplitude;
        let mut out = vec![0.0; grid.len()];
        for i in 0..grid.nu {
            let (u, _) = grid.coord(i, 0);
            let prof = matches!(self.kind, BoundaryKind::Profile).then(|| profile(u, a).0);
            for j in 0..grid.nv {
                let (u, v) = grid.coord(i, j);
                out[grid.idx(i, j)] = match self.kind {
                    BoundaryKind::Zero => 0.0,
                    BoundaryKind::Sinusoidal => {
                        let (s, t) = ((u - grid.u0) / lu, (v - grid.v0) / lv);
                        a * (2.0 * std::f64::consts::PI * s).sin() * (std::f64::consts::PI * t).cos()
                    }
                    BoundaryKind::Profile => prof.unwrap_or(0.0),
                };
            }
        }
        out
    }
}

fn newton_matrix(field: &SinhGordonField) -> CscMatrix<f64> {
    let g = field.grid;
    let (mi, mj) = (g.nu - 2, g.nv - 2);
    let id = |i: usize, j: usize| (i - 1) * mj + (j - 1);
    let (cu, cv) = (1.0 / (g.du * g.du), 1.0 / (g.dv * g.dv));
    let mut coo = CooMatrix::new(mi * mj, mi * mj);
    // assembled as −(Δ_h + 8 cosh ω), positive definite on small domains
    for i in 1..=mi {
        for j in 1..=mj {
            let r = id(i, j);
            coo.push(r, r, 2.0 * cu + 2.0 * cv - 8.0 * field.at(i, j).cosh());
            if i > 1 {
                coo.push(r, id(i - 1, j), -cu);
            }
            if i < mi {
                coo.push(r, id(i + 1, j), -cu);
            }
            if j > 1 {
                coo.push(r, id(i, j - 1), -cv);
            }
            if j < mj {
                coo.push(r, id(i, j + 1), -cv);
            }
        }
    }
    CscMatrix::from(&coo)
}

fn residual_vector(field: &SinhGordonField) -> DMatrix<f64> {
    let g = field.grid;
    let (mi, mj) = (g.nu - 2, g.nv - 2);
    DMatrix::from_fn(mi * mj, 1, |r, _| field.defect(r / mj + 1, r % mj + 1))
}

/// Damped Newton on the five-point discretization, starting from `init` (zero by default).
pub fn sinh_gordon_solve(
    grid: Grid2,
    boundary: &BoundarySpec,
    init: Option<&[f64]>,
    tol: f64,
) -> Result<SinhGordonField> {
    if grid.nu < 3 || grid.nv < 3 {
        return Err(NkError::InvalidInput("sinh-Gordon grid needs at least 3×3 nodes".into()));
    }
    if boundary.amplitude.abs() > MAX_AMPLITUDE {
        return Err(NkError::InvalidInput(format!(
            "boundary amplitude {} exceeds {MAX_AMPLITUDE}",
            boundary.amplitude
        )));
    }
    let bvals = boundary.values(&grid);
    let mut field = SinhGordonField { grid, omega: vec![0.0; grid.len()] };
    for i in 0..grid.nu {
        for j in 0..grid.nv {
            let k = grid.idx(i, j);
            field.omega[k] = if grid.is_boundary(i, j) { bvals[k] } else { init.map_or(0.0, |w| w[k]) };
        }
    }
    let mj = grid.nv - 2;
    let mut history = vec![sinh_gordon_residual(&field)];
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if *history.last().unwrap_or(&f64::INFINITY) < tol {
            return Ok(field);
        }
        let f = residual_vector(&field);
        let chol = CscCholesky::factor(&newton_matrix(&field))
            .map_err(|_| NkError::NewtonDivergence { history: history.clone() })?;
        // −J δ = F
        let delta = chol.solve(&f);
        let norm0 = f.norm();
        let mut alpha = 1.0;
        loop {
            let mut trial = field.clone();
            for (r, d) in delta.iter().enumerate() {
                trial.omega[grid.idx(r / mj + 1, r % mj + 1)] += alpha * d;
            }
            let norm = residual_vector(&trial).norm();
            if norm <= (1.0 - 1e-4 * alpha) * norm0 || alpha < 1e-4 {
                field = trial;
                break;
            }
            alpha *= 0.5;
        }
        let r = sinh_gordon_residual(&field);
        let stalled = r >= history[history.len() - 1];
        history.push(r);
        if stalled && r >= tol {
            // rounding floor reached above the requested tolerance
            return Err(NkError::NewtonDivergence { history });
        }
    }
    if *history.last().unwrap_or(&f64::INFINITY) < tol {
        Ok(field)
    } else {
        Err(NkError::NewtonDivergence { history })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_of_constants() {
        let g = Grid2::square(9, 1.0);
        assert_eq!(sinh_gordon_residual(&SinhGordonField::constant(g, 0.0)), 0.0);
        let r = sinh_gordon_residual(&SinhGordonField::constant(g, 0.1));
        assert!((r - 8.0 * 0.1f64.sinh()).abs() < 1e-15);
    }

    #[test]
    fn zero_boundary_gives_zero() {
        let f = sinh_gordon_solve(Grid2::square(17, 1.0), &BoundarySpec::zero(), None, 1e-10).unwrap();
        assert!(f.omega.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sinusoidal_boundary_converges() {
        let b = BoundarySpec { kind: BoundaryKind::Sinusoidal, amplitude: 0.1 };
        let f = sinh_gordon_solve(Grid2::square(65, 1.0), &b, None, 1e-10).unwrap();
        assert!(sinh_gordon_residual(&f) < 1e-10);
        assert!(f.omega.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn profile_solves_ode() {
        let h = 1e-3;
        for s in [0.1, 0.4, -0.3] {
            let (w, _) = profile(s, 0.3);
            let (wp, _) = profile(s + h, 0.3);
            let (wm, _) = profile(s - h, 0.3);
            assert!(((wp - 2.0 * w + wm) / (h * h) + 8.0 * w.sinh()).abs() < 1e-5);
        }
    }

    #[test]
    fn line_derivative_is_fourth_order() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let y: Vec<f64> = (0..n).map(|k| (1.3 * k as f64 * h).sin()).collect();
            (0..n).map(|k| (line_derivative(&y, k, h) - 1.3 * (1.3 * k as f64 * h).cos()).abs()).fold(0.0, f64::max)
        };
        let (a, b) = (err(17), err(33));
        assert!(a / b > 14.0, "{a} {b}");
    }

    #[test]
    fn amplitude_envelope() {
        let b = BoundarySpec { kind: BoundaryKind::Sinusoidal, amplitude: 0.6 };
        assert!(sinh_gordon_solve(Grid2::square(9, 1.0), &b, None, 1e-10).is_err());
    }

    #[test]
    fn profile_boundary_order_two() {
        let b = BoundarySpec { kind: BoundaryKind::Profile, amplitude: 0.3 };
        let err = |n: usize| {
            let g = Grid2::square(n, 1.0);
            let f = sinh_gordon_solve(g, &b, None, 1e-10).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..n {
                let exact = profile(g.coord(i, 0).0, 0.3).0;
                for j in 0..n {
                    e = e.max((f.at(i, j) - exact).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn stalled_newton_reports_history() {
        let b = BoundarySpec { kind: BoundaryKind::Sinusoidal, amplitude: 0.2 };
        match sinh_gordon_solve(Grid2::square(33, 1.0), &b, None, 1e-18) {
            Err(NkError::NewtonDivergence { history }) => {
                assert!(history.len() < MAX_NEWTON_ITERATIONS);
                assert!(history[history.len() - 1] < 1e-9);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
