//! The second factor `q` over a minimal surface, and verification of the resulting immersion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sinh_gordon::{Grid2, SinhGordonField};
use super::surface::{midpoint, MinimalSurfaceData};
use crate::error::{NkError, Result};
use crate::immersion::{rank_dp, LocalFrame};
use crate::invariants::{angle_functions, angle_sum_defect, distance_to_angle};
use crate::io::{GridSpec, SampledImmersion, JACOBIAN_MARGIN};
use crate::nkspace::{SurfacePoint, SQRT3};
use crate::quat::{cross_q, Quaternion, UnitQuaternion};

/// Allowed `||q| − 1|` after one step, before renormalization.
pub const Q_DRIFT_GATE: f64 = 1e-6;

/// Right-hand sides `(X, Y, Z)` of `q_u = qX`, `q_v = qY`, `q_t = qZ`.
pub fn t3_generators(alpha2: Quaternion, alpha3: Quaternion, w: &[f64; 3]) -> [Quaternion; 3] {
    let c = cross_q(alpha2, alpha3);
    let e = (-w[0]).exp();
    [
        alpha2 * 0.5 - alpha3 * (0.5 * e) + c * (e * w[2] / 8.0),
        alpha2 * (-0.5 * e) + alpha3 * 0.5 - c * (e * w[1] / 8.0),
        c * (-SQRT3 * e / 4.0),
    ]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct T3Diagnostics {
    /// `max |D_u q − qX|` over nodes off the integrated `u`-line.
    pub compatibility_u: f64,
    /// `max |D_v q − qY|` over nodes off the `t = t₀` sheet.
    pub compatibility_v: f64,
    /// Largest `||q| − 1|` seen before renormalization.
    pub max_drift: f64,
}

impl T3Diagnostics {
    pub fn compatibility(&self) -> f64 {
        self.compatibility_u.max(self.compatibility_v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T3Solution {
    pub grid: Grid2,
    pub nt: usize,
    pub dt: f64,
    pub t0: f64,
    /// Flat index `(i·nv + j)·nt + k`.
    pub q: Vec<UnitQuaternion>,
    pub diagnostics: T3Diagnostics,
}

impl T3Solution {
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        self.grid.idx(i, j) * self.nt + k
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Quaternion {
        self.q[self.idx(i, j, k)].get()
    }

    /// The immersion `(p(u,v), q(u,v,t))` as grid samples.
    pub fn to_sampled(&self, surface: &MinimalSurfaceData, label: impl Into<String>) -> Result<SampledImmersion> {
        let g = self.grid;
        let spec = GridSpec { shape: vec![g.nu, g.nv, self.nt], spacing: vec![g.du, g.dv, self.dt], origin: vec![g.u0, g.v0, self.t0] };
        let mut points = Vec::with_capacity(self.q.len());
        for i in 0..g.nu {
            for j in 0..g.nv {
                for k in 0..self.nt {
                    points.push(SurfacePoint::new(surface.p[g.idx(i, j)], self.q[self.idx(i, j, k)]));
                }
            }
        }
        SampledImmersion::new(label, spec, points)
    }
}

/// RK4 for `q' = q·G(s)` along one line, given `G` at the nodes.
fn q_line(q0: Quaternion, gens: &[Quaternion], h: f64, drift: &mut f64) -> Result<Vec<Quaternion>> {
    let arr: Vec<[f64; 4]> = gens.iter().map(|g| g.to_array()).collect();
    let mut out = Vec::with_capacity(gens.len());
    let mut q = q0;
    out.push(q);
    for k in 0..gens.len().saturating_sub(1) {
        let mid = Quaternion::from(midpoint(&arr, k));
        let k1 = q * gens[k];
        let k2 = (q + k1 * (h / 2.0)) * mid;
        let k3 = (q + k2 * (h / 2.0)) * mid;
        let k4 = (q + k3 * h) * gens[k + 1];
        let next = q + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let d = (next.norm() - 1.0).abs();
        if d > Q_DRIFT_GATE {
            return Err(NkError::Drift { drift: d, gate: Q_DRIFT_GATE });
        }
        *drift = drift.max(d);
        q = next / next.norm();
        out.push(q);
    }
    Ok(out)
}

fn central(values: &[Quaternion], k: usize, h: f64) -> Quaternion {
    (values[k + 1] - values[k - 1]) / (2.0 * h)
}

/// Integrates `q` along `u` at `(v₀, t₀)`, then along each `v`-line at `t₀`, then along each `t`-line.
pub fn t3_integrate(
    surface: &MinimalSurfaceData,
    field: &SinhGordonField,
    q0: UnitQuaternion,
    t_range: (f64, f64),
    nt: usize,
) -> Result<T3Solution> {
    let g = surface.grid;
    if !g.same_as(&field.grid) {
        return Err(NkError::InvalidInput("surface and field live on different grids".into()));
    }
    if nt < 2 || !(t_range.1 > t_range.0) {
        return Err(NkError::InvalidInput("need at least two t-nodes and t1 > t0".into()));
    }
    let dt = (t_range.1 - t_range.0) / (nt - 1) as f64;
    let w = field.with_gradient();
    let gens: Vec<[Quaternion; 3]> =
        (0..g.len()).map(|k| t3_generators(surface.alpha2(k), surface.alpha3(k), &w[k])).collect();
    let mut drift = 0.0;
    let spine_gens: Vec<Quaternion> = (0..g.nu).map(|i| gens[g.idx(i, 0)][0]).collect();
    let spine = q_line(q0.get(), &spine_gens, g.du, &mut drift)?;
    let sheet: Vec<(Vec<Quaternion>, f64)> = (0..g.nu)
        .into_par_iter()
        .map(|i| {
            let mut d = 0.0;
            let col: Vec<Quaternion> = (0..g.nv).map(|j| gens[g.idx(i, j)][1]).collect();
            q_line(spine[i], &col, g.dv, &mut d).map(|line| (line, d))
        })
        .collect::<Result<_>>()?;
    let lines: Vec<(Vec<Quaternion>, f64)> = (0..g.len())
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n / g.nv, n % g.nv);
            let mut d = 0.0;
            let z = vec![gens[n][2]; nt];
            q_line(sheet[i].0[j], &z, dt, &mut d).map(|line| (line, d))
        })
        .collect::<Result<_>>()?;
    let mut q = Vec::with_capacity(g.len() * nt);
    for (_, d) in sheet.iter().chain(&lines) {
        drift = f64::max(drift, *d);
    }
    for (line, _) in &lines {
        q.extend(line.iter().map(|v| UnitQuaternion::new_unchecked(*v)));
    }
    let mut sol = T3Solution { grid: g, nt, dt, t0: t_range.0, q, diagnostics: T3Diagnostics { max_drift: drift, ..Default::default() } };
    sol.diagnostics.compatibility_u = compatibility(&sol, &gens, 0);
    sol.diagnostics.compatibility_v = compatibility(&sol, &gens, 1);
    Ok(sol)
}

/// `max |D q − q G|` along `u` (`dir = 0`) or `v` (`dir = 1`), skipping the line or sheet that was integrated in that direction.
fn compatibility(sol: &T3Solution, gens: &[[Quaternion; 3]], dir: usize) -> f64 {
    let g = sol.grid;
    let mut worst: f64 = 0.0;
    for i in 0..g.nu {
        for j in 0..g.nv {
            for k in 0..sol.nt {
                let integrated = if dir == 0 { j == 0 && k == 0 } else { k == 0 };
                let inside = if dir == 0 { i >= 1 && i + 1 < g.nu } else { j >= 1 && j + 1 < g.nv };
                if integrated || !inside {
                    continue;
                }
                let line: Vec<Quaternion> = if dir == 0 {
                    (i - 1..=i + 1).map(|a| sol.at(a, j, k)).collect()
                } else {
                    (j - 1..=j + 1).map(|b| sol.at(i, b, k)).collect()
                };
                let h = if dir == 0 { g.du } else { g.dv };
                let d = central(&line, 1, h) - sol.at(i, j, k) * gens[g.idx(i, j)][dir];
                worst = worst.max(d.norm());
            }
        }
    }
    worst
}

/// Gates applied by [`t3_verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T3Gates {
    pub lagrangian: f64,
    pub pi_third: f64,
    pub rank_ratio: f64,
    pub angle_sum: f64,
}

impl Default for T3Gates {
    fn default() -> Self {
        T3Gates { lagrangian: 1e-5, pi_third: 1e-3, rank_ratio: 1e-6, angle_sum: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct T3Report {
    pub nodes: usize,
    /// Nodes where the invariants could not be evaluated.
    pub failed_nodes: usize,
    pub max_lagrangian: f64,
    /// `max min_i |θᵢ − π/3|`.
    pub max_pi_third_gap: f64,
    /// `max σ₃/σ₁` of `dp`.
    pub max_rank_ratio: f64,
    pub dp_rank_min: usize,
    pub dp_rank_max: usize,
    pub max_angle_sum: f64,
    pub diagnostics: T3Diagnostics,
    pub gates: T3Gates,
    pub pass: bool,
}

struct NodeCheck {
    lagrangian: f64,
    pi_third: f64,
    rank: usize,
    ratio: f64,
    angle_sum: f64,
}

fn check_node(f: &SampledImmersion, x: &[f64]) -> Result<NodeCheck> {
    let frame = LocalFrame::new(f, x)?;
    let (rank, s) = rank_dp(&frame.jac);
    let ratio = if s[0] > 0.0 { s[2] / s[0] } else { f64::INFINITY };
    let lagrangian = frame.lagrangian_residual();
    let theta = angle_functions(f, x)?.theta;
    Ok(NodeCheck { lagrangian, pi_third: distance_to_angle(&theta, std::f64::consts::FRAC_PI_3), rank, ratio, angle_sum: angle_sum_defect(&theta) })
}

/// Checks at every node two steps inside the grid.
pub fn t3_verify(sol: &T3Solution, surface: &MinimalSurfaceData, gates: &T3Gates) -> Result<T3Report> {
    let f = sol.to_sampled(surface, "t3")?;
    let nodes = f.grid.interior(JACOBIAN_MARGIN);
    let checks: Vec<Result<NodeCheck>> = nodes.par_iter().map(|idx| check_node(&f, &f.grid.coords(idx))).collect();
    let ok: Vec<&NodeCheck> = checks.iter().filter_map(|c| c.as_ref().ok()).collect();
    let fold = |g: &dyn Fn(&NodeCheck) -> f64| ok.iter().map(|c| g(c)).fold(0.0, f64::max);
    let mut r = T3Report {
        nodes: nodes.len(),
        failed_nodes: checks.len() - ok.len(),
        max_lagrangian: fold(&|c| c.lagrangian),
        max_pi_third_gap: fold(&|c| c.pi_third),
        max_rank_ratio: fold(&|c| c.ratio),
        dp_rank_min: ok.iter().map(|c| c.rank).min().unwrap_or(0),
        dp_rank_max: ok.iter().map(|c| c.rank).max().unwrap_or(0),
        max_angle_sum: fold(&|c| c.angle_sum),
        diagnostics: sol.diagnostics.clone(),
        gates: gates.clone(),
        pass: false,
    };
    r.pass = r.nodes > 0
        && r.failed_nodes == 0
        && r.max_lagrangian < gates.lagrangian
        && r.max_pi_third_gap < gates.pi_third
        && r.max_rank_ratio < gates.rank_ratio
        && r.dp_rank_min == 2
        && r.dp_rank_max == 2
        && r.max_angle_sum < gates.angle_sum;
    Ok(r)
}
