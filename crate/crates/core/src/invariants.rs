//! Pointwise invariants of Lagrangian immersions: `A`, `B`, angle functions, the
//! cubic form `hᵢⱼᵏ`, connection coefficients `ωᵢⱼᵏ`, curvature, and residuals of the
//! structure equations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::StructureTable;
use crate::error::{NkError, Result};
pub use crate::immersion::LAGRANGIAN_GATE;
use crate::immersion::{axis_derivative, combine, pad3, ImmersionSource, LocalFrame};
use crate::nkspace::{
    apply_G_unchecked, apply_J_unchecked, apply_P_unchecked, from_coeffs, levi_civita, metric_coeffs,
    metric_unchecked, Coeffs6, FrameCoeffs, TangentVec, SQRT3,
};

/// `‖AB − BA‖` above which the pair is reported as inconsistent.
pub const COMMUTATOR_GATE: f64 = 1e-3;
/// Eigenvalues of `A` closer than this are diagonalized jointly with `B`.
pub const CLUSTER_GAP: f64 = 1e-3;
/// Angles this close below π are reported as 0.
pub const SNAP_TOL: f64 = 1e-9;
/// Angle-derivative bound under which the angles count as constant.
pub const CONSTANT_ANGLE_TOL: f64 = 1e-5;
/// Minimum overlap between an eigenvector and its neighbour before the field is declared discontinuous.
pub const MIN_OVERLAP: f64 = 0.9;

/// Circular distance of two angles modulo π.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Distance between unordered angle triples modulo π.
pub fn angle_set_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|i| circ_dist(a[i], b[p[i]])).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// `min_i |θᵢ − target|` modulo π.
pub fn distance_to_angle(theta: &[f64; 3], target: f64) -> f64 {
    theta.iter().map(|t| circ_dist(*t, target)).fold(f64::INFINITY, f64::min)
}

/// `(θ₁ + θ₂ + θ₃)` distance to `0 mod π`.
pub fn angle_sum_defect(theta: &[f64; 3]) -> f64 {
    circ_dist(theta.iter().sum(), 0.0)
}

fn normalize_angle(t: f64) -> f64 {
    let t = t.rem_euclid(PI);
    if PI - t < SNAP_TOL {
        0.0
    } else {
        t
    }
}

fn phase_angle(a: &Matrix3<f64>, b: &Matrix3<f64>, v: &Vector3<f64>) -> f64 {
    normalize_angle(0.5 * (v.dot(&(b * v))).atan2(v.dot(&(a * v))))
}

/// `A` and `B` on the frame's orthonormal basis: `Aᵢⱼ = g(P wⱼ, wᵢ)`, `Bᵢⱼ = g(P wⱼ, J wᵢ)`.
pub fn ab_from_frame(frame: &LocalFrame) -> (Matrix3<f64>, Matrix3<f64>) {
    let w = &frame.w;
    let pw: Vec<TangentVec> = w.iter().map(apply_P_unchecked).collect();
    let jw: Vec<TangentVec> = w.iter().map(apply_J_unchecked).collect();
    let a = Matrix3::from_fn(|i, j| metric_unchecked(&pw[j], &w[i]));
    let b = Matrix3::from_fn(|i, j| metric_unchecked(&pw[j], &jw[i]));
    (a, b)
}

fn check_dim<S: ImmersionSource + ?Sized>(f: &S) -> Result<()> {
    if f.dim() == 3 {
        Ok(())
    } else {
        Err(NkError::InvalidInput("invariants need a three-dimensional chart".into()))
    }
}

fn lagrangian_frame<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], start: Option<&[Vec<f64>]>) -> Result<LocalFrame> {
    check_dim(f)?;
    let frame = LocalFrame::from_jacobian(x, f.jacobian(x)?, start)?;
    let residual = frame.lagrangian_residual();
    if residual > f.lagrangian_gate() {
        return Err(NkError::NotLagrangian { point: pad3(x), residual });
    }
    Ok(frame)
}

pub fn ab_matrices<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<(Matrix3<f64>, Matrix3<f64>)> {
    Ok(ab_from_frame(&lagrangian_frame(f, x, None)?))
}

#[derive(Clone, Debug)]
pub struct AngleData {
    /// `A` on the orthonormal basis `frame.basis`.
    pub a: Matrix3<f64>,
    pub b: Matrix3<f64>,
    /// Ascending, in `[0, π)`.
    pub theta: [f64; 3],
    /// Eigenvectors `Eᵢ` as chart vectors.
    pub eigenbasis: [Vec<f64>; 3],
    /// Eigenvectors in coordinates of `frame.basis` (columns).
    pub coords: Matrix3<f64>,
    pub frame: LocalFrame,
}

impl AngleData {
    /// `df(Eᵢ)`.
    pub fn images(&self) -> [TangentVec; 3] {
        std::array::from_fn(|i| combine(&self.frame.jac, &self.eigenbasis[i]))
    }

    /// `A` and `B` on the eigenbasis.
    pub fn diagonal_ab(&self) -> (Matrix3<f64>, Matrix3<f64>) {
        let v = &self.coords;
        (v.transpose() * self.a * v, v.transpose() * self.b * v)
    }

    pub fn identity_defect(&self) -> f64 {
        (self.a * self.a + self.b * self.b - Matrix3::identity()).norm()
    }

    pub fn commutator(&self) -> f64 {
        (self.a * self.b - self.b * self.a).norm()
    }

    /// `g(JG(E₁, E₂), E₃)`, equal to `1/√3` in the canonical orientation.
    pub fn orientation(&self) -> f64 {
        let w = self.images();
        metric_unchecked(&apply_J_unchecked(&apply_G_unchecked(&w[0], &w[1])), &w[2])
    }
}

/// Joint orthogonal diagonalization of commuting symmetric `A`, `B`; eigenvectors as columns.
fn joint_eigenvectors(a: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = a.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));
    let vals: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let mut vecs: Vec<Vector3<f64>> = order.iter().map(|i| eig.eigenvectors.column(*i).into_owned()).collect();
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && vals[end] - vals[end - 1] < CLUSTER_GAP {
            end += 1;
        }
        let m = end - start;
        if m > 1 {
            let basis = DMatrix::from_fn(3, m, |r, c| vecs[start + c][r]);
            let bd = DMatrix::from_fn(3, 3, |r, c| b[(r, c)]);
            let restricted = basis.transpose() * &bd * &basis;
            let sub = restricted.symmetric_eigen();
            let rotated = &basis * &sub.eigenvectors;
            for c in 0..m {
                vecs[start + c] = Vector3::new(rotated[(0, c)], rotated[(1, c)], rotated[(2, c)]);
            }
        }
        start = end;
    }
    Matrix3::from_columns(&vecs)
}

fn angle_data_from_frame(frame: LocalFrame) -> Result<AngleData> {
    let (a, b) = ab_from_frame(&frame);
    let commutator = (a * b - b * a).norm();
    if commutator > COMMUTATOR_GATE {
        return Err(NkError::NonCommuting { residual: commutator });
    }
    let v = joint_eigenvectors(&a, &b);
    let mut items: Vec<(f64, Vector3<f64>)> =
        (0..3).map(|i| v.column(i).into_owned()).map(|c| (phase_angle(&a, &b, &c), c)).collect();
    items.sort_by(|x, y| x.0.total_cmp(&y.0));
    let theta = [items[0].0, items[1].0, items[2].0];
    let mut coords = Matrix3::from_columns(&[items[0].1, items[1].1, items[2].1]);
    let chart = |coords: &Matrix3<f64>, i: usize| -> Vec<f64> {
        let mut e = vec![0.0; 3];
        for k in 0..3 {
            for (c, bk) in e.iter_mut().zip(&frame.basis[k]) {
                *c += coords[(k, i)] * bk;
            }
        }
        e
    };
    let mut data = AngleData {
        a,
        b,
        theta,
        eigenbasis: [chart(&coords, 0), chart(&coords, 1), chart(&coords, 2)],
        coords,
        frame: frame.clone(),
    };
    if data.orientation() < 0.0 {
        coords.set_column(2, &(-coords.column(2)));
        data.coords = coords;
        data.eigenbasis[2] = chart(&coords, 2);
    }
    Ok(data)
}

pub fn angle_functions<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<AngleData> {
    angle_data_from_frame(lagrangian_frame(f, x, None)?)
}

/// As [`angle_functions`], with Gram–Schmidt started from the chart vectors `start`.
pub fn angle_functions_from<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], start: &[Vec<f64>]) -> Result<AngleData> {
    angle_data_from_frame(lagrangian_frame(f, x, Some(start))?)
}

/// The eigenframe at a nearby point, continued from a reference eigenframe.
#[derive(Clone, Debug)]
struct AlignedSample {
    frame: LocalFrame,
    /// Orthonormal coordinates (on `frame.basis`) of the continued `Eᵢ`.
    y: [Vector3<f64>; 3],
    theta: [f64; 3],
}

impl AlignedSample {
    fn chart(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; 3];
        for k in 0..3 {
            for (c, bk) in e.iter_mut().zip(&self.frame.basis[k]) {
                *c += self.y[i][k] * bk;
            }
        }
        e
    }

    fn image(&self, i: usize) -> TangentVec {
        combine(&self.frame.w, self.y[i].as_slice())
    }
}

fn phase_chord(a: f64, b: f64) -> f64 {
    2.0 * (a - b).sin().abs()
}

/// Groups of reference indices whose angles coincide modulo π.
fn clusters(theta: &[f64; 3]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..3 {
        match out.iter_mut().find(|c| phase_chord(theta[c[0]], theta[i]) < CLUSTER_GAP) {
            Some(c) => c.push(i),
            None => out.push(vec![i]),
        }
    }
    out
}

fn aligned_sample<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], reference: &AngleData) -> Result<AlignedSample> {
    let frame = lagrangian_frame(f, x, None)?;
    let local = angle_data_from_frame(frame.clone())?;
    let (a, b) = (local.a, local.b);
    let discontinuity = |reason: String| NkError::EigenbasisDiscontinuity { point: pad3(x), reason };
    let r: Vec<Vector3<f64>> = (0..3)
        .map(|i| Vector3::from_fn(|k, _| frame.metric.inner(&reference.eigenbasis[i], &frame.basis[k])))
        .collect();
    let mut used = [false; 3];
    let mut y = [Vector3::zeros(); 3];
    let mut theta = [0.0; 3];
    for cluster in clusters(&reference.theta) {
        // local eigenvectors capturing most of the reference cluster's span
        let weight = |j: usize| -> f64 { cluster.iter().map(|&i| local.coords.column(j).dot(&r[i]).powi(2)).sum() };
        let mut order: Vec<usize> = (0..3).filter(|j| !used[*j]).collect();
        order.sort_by(|a, b| weight(*b).total_cmp(&weight(*a)));
        let selected = &order[..cluster.len()];
        let mut done: Vec<Vector3<f64>> = Vec::new();
        for &i in &cluster {
            let mut proj = Vector3::zeros();
            for &j in selected {
                let v = local.coords.column(j);
                proj += v * v.dot(&r[i]);
            }
            let overlap = proj.norm() / r[i].norm();
            if overlap < MIN_OVERLAP {
                return Err(discontinuity(format!(
                    "overlap {overlap:.3} for eigenvector {} near angle {:.6}",
                    i + 1,
                    reference.theta[i]
                )));
            }
            for d in &done {
                proj -= d * d.dot(&proj);
            }
            let v = proj.normalize();
            done.push(v);
            y[i] = v;
            let raw = 0.5 * (v.dot(&(b * v))).atan2(v.dot(&(a * v)));
            let shift = ((raw - reference.theta[i]) / PI).round();
            theta[i] = raw - shift * PI;
        }
        for &j in selected {
            used[j] = true;
        }
    }
    Ok(AlignedSample { frame, y, theta })
}

/// Covariant derivative of `df(∂_b)` along `∂_a`, in frame coefficients, for all `a, b`.
fn hessian_coeffs<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], jac: &[TangentVec]) -> Result<[[Coeffs6; 3]; 3]> {
    let table = StructureTable::new();
    let flat = |y: &[f64]| -> Result<Vec<f64>> {
        Ok(f.jacobian(y)?.iter().flat_map(|c| c.coeffs()).collect())
    };
    let mut out = [[[0.0; 6]; 3]; 3];
    for a in 0..3 {
        let d = axis_derivative(f, x, a, flat)?;
        let va = jac[a].coeffs();
        for b in 0..3 {
            let g = table.apply(&va, &jac[b].coeffs());
            for k in 0..6 {
                out[a][b][k] = d[6 * b + k] + g[k];
            }
        }
    }
    Ok(out)
}

fn vec_of(base: &TangentVec, c: &Coeffs6) -> TangentVec {
    from_coeffs(base.base, FrameCoeffs::from_array(*c))
}

/// Cubic form, connection coefficients and eigenplane curvatures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SffData {
    pub h: [[[f64; 3]; 3]; 3],
    pub omega: [[[f64; 3]; 3]; 3],
    /// `K(E₁∧E₂), K(E₁∧E₃), K(E₂∧E₃)`.
    pub k: [f64; 3],
}

impl SffData {
    pub fn h123(&self) -> f64 {
        self.h[0][1][2]
    }

    pub fn h_norm(&self) -> f64 {
        self.h.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest violation of total symmetry of `h`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v = self.h[i][j][k];
                    for w in [self.h[j][i][k], self.h[i][k][j], self.h[k][j][i], self.h[j][k][i], self.h[k][i][j]] {
                        r = r.max((v - w).abs());
                    }
                }
            }
        }
        r
    }

    pub fn omega_max(&self) -> f64 {
        self.omega.iter().flatten().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

const PLANES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// `g(R(Eᵢ,Eⱼ)Eₖ, Eₗ)` from the Gauss equation, on an orthonormal eigenbasis.
pub fn gauss_tensor(a: &Matrix3<f64>, b: &Matrix3<f64>, h: &[[[f64; 3]; 3]; 3]) -> [[[[f64; 3]; 3]; 3]; 3] {
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut v = 5.0 / 12.0 * (d(j, k) * d(i, l) - d(i, k) * d(j, l));
                    v += (a[(j, k)] * a[(i, l)] - a[(i, k)] * a[(j, l)] + b[(j, k)] * b[(i, l)] - b[(i, k)] * b[(j, l)])
                        / 3.0;
                    for m in 0..3 {
                        v += h[l][m][i] * h[m][k][j] - h[l][m][j] * h[m][k][i];
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    r
}

/// Eigenplane curvatures from the Gauss equation.
pub fn gauss_curvatures(a: &Matrix3<f64>, b: &Matrix3<f64>, h: &[[[f64; 3]; 3]; 3]) -> [f64; 3] {
    let r = gauss_tensor(a, b, h);
    PLANES.map(|(i, j)| r[i][j][j][i])
}

/// Everything first- and second-order at one point, shared by the public entry points.
struct Analysis {
    angles: AngleData,
    w: [TangentVec; 3],
    h: [[[f64; 3]; 3]; 3],
}

impl Analysis {
    fn new<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<Self> {
        let angles = angle_functions(f, x)?;
        let w = angles.images();
        let hess = hessian_coeffs(f, x, &angles.frame.jac)?;
        let jw: Vec<Coeffs6> = w.iter().map(|v| apply_J_unchecked(v).coeffs()).collect();
        let e = &angles.eigenbasis;
        let mut h = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            s += e[i][a] * e[j][b] * metric_coeffs(&hess[a][b], &jw[k]);
                        }
                    }
                    h[i][j][k] = s;
                }
            }
        }
        Ok(Analysis { angles, w, h })
    }

    fn omega<S: ImmersionSource + ?Sized>(&self, f: &S, x: &[f64]) -> Result<[[[f64; 3]; 3]; 3]> {
        let table = StructureTable::new();
        let field = |y: &[f64]| -> Result<Vec<f64>> {
            let s = aligned_sample(f, y, &self.angles)?;
            Ok((0..3).flat_map(|j| s.image(j).coeffs()).collect())
        };
        // ∇̃_{∂a} df(Eⱼ) for each axis a
        let mut nab = [[[0.0; 6]; 3]; 3];
        for a in 0..3 {
            let d = axis_derivative(f, x, a, field)?;
            let va = self.angles.frame.jac[a].coeffs();
            for j in 0..3 {
                let g = table.apply(&va, &self.w[j].coeffs());
                for k in 0..6 {
                    nab[a][j][k] = d[6 * j + k] + g[k];
                }
            }
        }
        let wc: Vec<Coeffs6> = self.w.iter().map(|v| v.coeffs()).collect();
        let e = &self.angles.eigenbasis;
        let raw = |i: usize, j: usize, k: usize| -> f64 {
            (0..3).map(|a| e[i][a] * metric_coeffs(&nab[a][j], &wc[k])).sum()
        };
        let mut omega = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    omega[i][j][k] = 0.5 * (raw(i, j, k) - raw(i, k, j));
                }
            }
        }
        Ok(omega)
    }

    fn sff<S: ImmersionSource + ?Sized>(&self, f: &S, x: &[f64]) -> Result<SffData> {
        let (a, b) = self.angles.diagonal_ab();
        Ok(SffData { h: self.h, omega: self.omega(f, x)?, k: gauss_curvatures(&a, &b, &self.h) })
    }
}

/// `hᵢⱼᵏ = g(h(Eᵢ,Eⱼ), JEₖ)` on the canonical eigenbasis.
pub fn second_fundamental_form<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<[[[f64; 3]; 3]; 3]> {
    Ok(Analysis::new(f, x)?.h)
}

/// `ωᵢⱼᵏ = g(∇_{Eᵢ}Eⱼ, Eₖ)`, antisymmetric in `j, k` by construction.
pub fn connection_coeffs<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<[[[f64; 3]; 3]; 3]> {
    Analysis::new(f, x)?.omega(f, x)
}

pub fn sff_data<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<SffData> {
    Analysis::new(f, x)?.sff(f, x)
}

/// `K(Eᵢ∧Eⱼ)` from the Gauss equation (zero-based `i ≠ j`).
pub fn sectional_curvature<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], i: usize, j: usize) -> Result<f64> {
    if i == j || i > 2 || j > 2 {
        return Err(NkError::InvalidInput(format!("({i}, {j}) is not an eigenplane")));
    }
    let an = Analysis::new(f, x)?;
    let (a, b) = an.angles.diagonal_ab();
    Ok(gauss_tensor(&a, &b, &an.h)[i][j][j][i])
}

fn metric_matrix(jac: &[TangentVec]) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| metric_unchecked(&jac[a], &jac[b]))
}

/// Christoffel symbols `Γ[l][j][k] = Γˡⱼₖ` of the induced metric from finite differences.
fn metric_christoffels<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<[[[f64; 3]; 3]; 3]> {
    let g = metric_matrix(&f.jacobian(x)?);
    let ginv = g.try_inverse().ok_or(NkError::RankDeficient { point: pad3(x), singular: vec![] })?;
    let flat = |y: &[f64]| -> Result<Vec<f64>> { Ok(metric_matrix(&f.jacobian(y)?).as_slice().to_vec()) };
    let dg: Vec<Matrix3<f64>> =
        (0..3).map(|a| axis_derivative(f, x, a, flat).map(|d| Matrix3::from_column_slice(&d))).collect::<Result<_>>()?;
    let mut out = [[[0.0; 3]; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let lower = Vector3::from_fn(|m, _| 0.5 * (dg[j][(m, k)] + dg[k][(m, j)] - dg[m][(j, k)]));
            let up = ginv * lower;
            for l in 0..3 {
                out[l][j][k] = up[l];
            }
        }
    }
    Ok(out)
}

/// Intrinsic `K(X∧Y)` for orthonormal chart vectors, from finite differences of the induced metric alone.
pub fn intrinsic_curvature<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    let gam = metric_christoffels(f, x)?;
    let flat = |y: &[f64]| -> Result<Vec<f64>> {
        Ok(metric_christoffels(f, y)?.iter().flatten().flatten().copied().collect())
    };
    let dgam: Vec<Vec<f64>> = (0..3).map(|a| axis_derivative(f, x, a, flat)).collect::<Result<_>>()?;
    let dg = |i: usize, l: usize, j: usize, k: usize| dgam[i][9 * l + 3 * j + k];
    let g = metric_matrix(&f.jacobian(x)?);
    // R^l_{kij} = ∂ᵢΓˡⱼₖ − ∂ⱼΓˡᵢₖ + ΓˡᵢₘΓᵐⱼₖ − ΓˡⱼₘΓᵐᵢₖ
    let mut num = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let w = u[i] * v[j] * v[k];
                if w == 0.0 {
                    continue;
                }
                for l in 0..3 {
                    let mut r = dg(i, l, j, k) - dg(j, l, i, k);
                    for m in 0..3 {
                        r += gam[l][i][m] * gam[m][j][k] - gam[l][j][m] * gam[m][i][k];
                    }
                    let lowered: f64 = (0..3).map(|n| g[(l, n)] * u[n]).sum();
                    num += w * r * lowered;
                }
            }
        }
    }
    Ok(num)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantAngleResiduals {
    pub connection: [f64; 3],
    pub codazzi: [f64; 4],
    pub gauss: [f64; 3],
}

impl ConstantAngleResiduals {
    pub fn max(&self) -> f64 {
        self.connection.iter().chain(&self.codazzi).chain(&self.gauss).map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussCodazziReport {
    /// Largest gap between Gauss-equation and intrinsic eigenplane curvatures.
    pub gauss: f64,
    pub codazzi: f64,
    /// Present when the angles are constant and pairwise distinct.
    pub constant_angle: Option<ConstantAngleResiduals>,
}

/// Intrinsic Christoffels `Γᵉ_{ca}` from the tangential part of `∇̃_{∂c} df(∂a)`.
fn tangential_christoffels(jac: &[TangentVec], hess: &[[Coeffs6; 3]; 3]) -> [[[f64; 3]; 3]; 3] {
    let g = metric_matrix(jac);
    let ginv = g.try_inverse().unwrap_or_else(Matrix3::zeros);
    let jc: Vec<Coeffs6> = jac.iter().map(|c| c.coeffs()).collect();
    let mut out = [[[0.0; 3]; 3]; 3];
    for c in 0..3 {
        for a in 0..3 {
            let lower = Vector3::from_fn(|d, _| metric_coeffs(&hess[c][a], &jc[d]));
            let up = ginv * lower;
            for e in 0..3 {
                out[e][c][a] = up[e];
            }
        }
    }
    out
}

/// Normal part of `∇̃_{∂a} df(∂b)` as frame coefficients.
fn normal_hessian<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<(Vec<TangentVec>, [[Coeffs6; 3]; 3])> {
    let frame = lagrangian_frame(f, x, None)?;
    let hess = hessian_coeffs(f, x, &frame.jac)?;
    let wc: Vec<Coeffs6> = frame.w.iter().map(|v| v.coeffs()).collect();
    let mut out = hess;
    for row in out.iter_mut() {
        for entry in row.iter_mut() {
            let comps: Vec<f64> = wc.iter().map(|w| metric_coeffs(entry, w)).collect();
            for (w, c) in wc.iter().zip(comps) {
                for k in 0..6 {
                    entry[k] -= c * w[k];
                }
            }
        }
    }
    Ok((frame.jac, out))
}

fn contract_orthonormal<F: Fn(usize, usize, usize) -> [f64; 3]>(basis: &[Vec<f64>], t: F) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let mut acc = [0.0; 3];
                for c in 0..3 {
                    for a in 0..3 {
                        for b in 0..3 {
                            let w = basis[i][c] * basis[j][a] * basis[l][b];
                            let v = t(c, a, b);
                            for k in 0..3 {
                                acc[k] += w * v[k];
                            }
                        }
                    }
                }
                worst = worst.max(acc.iter().map(|v| v.abs()).fold(0.0, f64::max));
            }
        }
    }
    worst
}

fn codazzi_residual<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<f64> {
    let frame = lagrangian_frame(f, x, None)?;
    let jac = &frame.jac;
    let hess = hessian_coeffs(f, x, jac)?;
    let gam = tangential_christoffels(jac, &hess);
    let (_, nh) = normal_hessian(f, x)?;
    let table = StructureTable::new();
    let jw: Vec<Coeffs6> = frame.w.iter().map(|v| apply_J_unchecked(v).coeffs()).collect();
    let flat = |y: &[f64]| -> Result<Vec<f64>> {
        Ok(normal_hessian(f, y)?.1.iter().flatten().flatten().copied().collect())
    };
    let dn: Vec<Vec<f64>> = (0..3).map(|c| axis_derivative(f, x, c, flat)).collect::<Result<_>>()?;
    let nrm = |v: &Coeffs6| -> [f64; 3] { std::array::from_fn(|k| metric_coeffs(v, &jw[k])) };
    // (∇h)(∂c, ∂a, ∂b) on the normal frame J wₖ
    let nabla_h = |c: usize, a: usize, b: usize| -> [f64; 3] {
        let mut v: Coeffs6 = std::array::from_fn(|k| dn[c][18 * a + 6 * b + k]);
        let g = table.apply(&jac[c].coeffs(), &nh[a][b]);
        for k in 0..6 {
            v[k] += g[k];
        }
        let mut out = nrm(&v);
        for e in 0..3 {
            let (x1, x2) = (nrm(&nh[e][b]), nrm(&nh[a][e]));
            for k in 0..3 {
                out[k] -= gam[e][c][a] * x1[k] + gam[e][c][b] * x2[k];
            }
        }
        out
    };
    let pj: Vec<TangentVec> = jac.iter().map(apply_P_unchecked).collect();
    let ga = |y: usize, z: usize| metric_unchecked(&pj[y], &jac[z]);
    let gb = |y: usize, z: usize| metric_unchecked(&pj[y], &apply_J_unchecked(&jac[z]));
    // components on J wₖ of JB∂ and JA∂
    let jb = |y: usize| -> [f64; 3] { std::array::from_fn(|k| metric_unchecked(&pj[y], &apply_J_unchecked(&frame.w[k]))) };
    let ja = |y: usize| -> [f64; 3] { std::array::from_fn(|k| metric_unchecked(&pj[y], &frame.w[k])) };
    let defect = |c: usize, a: usize, b: usize| -> [f64; 3] {
        let (l1, l2) = (nabla_h(c, a, b), nabla_h(a, c, b));
        let (jbx, jby, jax, jay) = (jb(c), jb(a), ja(c), ja(a));
        std::array::from_fn(|k| {
            let rhs = (ga(a, b) * jbx[k] - ga(c, b) * jby[k] - gb(a, b) * jax[k] + gb(c, b) * jay[k]) / 3.0;
            l1[k] - l2[k] - rhs
        })
    };
    Ok(contract_orthonormal(&frame.basis, defect))
}

fn angle_derivatives<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], an: &Analysis) -> Result<[[f64; 3]; 3]> {
    let field = |y: &[f64]| -> Result<Vec<f64>> { Ok(aligned_sample(f, y, &an.angles)?.theta.to_vec()) };
    let d: Vec<Vec<f64>> = (0..3).map(|a| axis_derivative(f, x, a, field)).collect::<Result<_>>()?;
    let e = &an.angles.eigenbasis;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|a| e[i][a] * d[a][j]).sum())))
}

fn h123_field<S: ImmersionSource + ?Sized>(f: &S, y: &[f64], reference: &AngleData) -> Result<f64> {
    let s = aligned_sample(f, y, reference)?;
    let hess = hessian_coeffs(f, y, &s.frame.jac)?;
    let e: Vec<Vec<f64>> = (0..3).map(|i| s.chart(i)).collect();
    let jw = apply_J_unchecked(&s.image(2)).coeffs();
    let mut v = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            v += e[0][a] * e[1][b] * metric_coeffs(&hess[a][b], &jw);
        }
    }
    Ok(v)
}

fn constant_angle_residuals(
    theta: &[f64; 3],
    h: f64,
    om: &[[[f64; 3]; 3]; 3],
    dh: [f64; 3],
) -> ConstantAngleResiduals {
    let s6 = SQRT3 / 6.0;
    let cot = |a: f64| a.cos() / a.sin();
    let w = |i: usize, j: usize, k: usize| om[i - 1][j - 1][k - 1];
    let (t1, t2, t3) = (theta[0], theta[1], theta[2]);
    let connection = [
        w(1, 2, 3) - (s6 - cot(t2 - t3) * h),
        w(2, 3, 1) - (s6 + cot(t1 - t3) * h),
        w(3, 1, 2) - (s6 - cot(t1 - t2) * h),
    ];
    let e = dh.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let codazzi = [
        e,
        h * (2.0 * (w(1, 3, 2) + w(2, 1, 3)) + 1.0 / SQRT3) - (2.0 * (t1 - t2)).sin() / 3.0,
        h * (2.0 * (w(1, 2, 3) + w(3, 1, 2)) - 1.0 / SQRT3) - (2.0 * (t1 - t3)).sin() / 3.0,
        h * (2.0 * (w(2, 1, 3) + w(3, 2, 1)) + 1.0 / SQRT3) - (2.0 * (t2 - t3)).sin() / 3.0,
    ];
    let lhs = |a: f64| 5.0 / 12.0 + (2.0 * a).cos() / 3.0 - h * h;
    let gauss = [
        lhs(t1 - t2) - (-w(2, 1, 3) * w(1, 3, 2) + w(1, 2, 3) * w(3, 1, 2) - w(2, 1, 3) * w(3, 1, 2)),
        lhs(t1 - t3) - (-w(3, 1, 2) * w(1, 2, 3) + w(1, 3, 2) * w(2, 1, 3) - w(3, 1, 2) * w(2, 1, 3)),
        lhs(t2 - t3) - (-w(3, 2, 1) * w(2, 1, 3) + w(2, 3, 1) * w(1, 2, 3) - w(3, 2, 1) * w(1, 2, 3)),
    ];
    ConstantAngleResiduals { connection, codazzi, gauss }
}

fn distinct_angles(theta: &[f64; 3]) -> bool {
    clusters(theta).len() == 3
}

pub fn gauss_codazzi_residuals<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<GaussCodazziReport> {
    let an = Analysis::new(f, x)?;
    let (a, b) = an.angles.diagonal_ab();
    let k_gauss = gauss_curvatures(&a, &b, &an.h);
    let e = &an.angles.eigenbasis;
    let mut gauss: f64 = 0.0;
    for (n, (i, j)) in PLANES.iter().enumerate() {
        let k = intrinsic_curvature(f, x, &e[*i], &e[*j])?;
        gauss = gauss.max((k - k_gauss[n]).abs());
    }
    let codazzi = codazzi_residual(f, x)?;
    let mut constant_angle = None;
    if distinct_angles(&an.angles.theta) {
        let dth = angle_derivatives(f, x, &an)?;
        let moving = dth.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if moving < CONSTANT_ANGLE_TOL {
            let omega = an.omega(f, x)?;
            let field = |y: &[f64]| -> Result<Vec<f64>> { Ok(vec![h123_field(f, y, &an.angles)?]) };
            let d: Vec<f64> = (0..3).map(|c| axis_derivative(f, x, c, field).map(|v| v[0])).collect::<Result<_>>()?;
            let dh = std::array::from_fn(|i| (0..3).map(|c| e[i][c] * d[c]).sum());
            constant_angle = Some(constant_angle_residuals(&an.angles.theta, an.h[0][1][2], &omega, dh));
        }
    }
    Ok(GaussCodazziReport { gauss, codazzi, constant_angle })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleDerivativeReport {
    /// `max |Eᵢ(θⱼ) + hⱼⱼⁱ|`.
    pub angle_gradient: f64,
    /// `max |hᵢⱼᵏ cos(θⱼ−θₖ) − (√3/6 εᵢⱼₖ − ωᵢⱼᵏ) sin(θⱼ−θₖ)|` over `j ≠ k`.
    pub connection_law: f64,
}

pub fn angle_derivative_check<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<AngleDerivativeReport> {
    let an = Analysis::new(f, x)?;
    let dth = angle_derivatives(f, x, &an)?;
    let omega = an.omega(f, x)?;
    let th = an.angles.theta;
    let mut angle_gradient: f64 = 0.0;
    let mut connection_law: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            angle_gradient = angle_gradient.max((dth[i][j] + an.h[j][j][i]).abs());
            for k in 0..3 {
                if j == k {
                    continue;
                }
                let lhs = an.h[i][j][k] * (th[j] - th[k]).cos();
                let rhs = (SQRT3 / 6.0 * levi_civita(i, j, k) - omega[i][j][k]) * (th[j] - th[k]).sin();
                connection_law = connection_law.max((lhs - rhs).abs());
            }
        }
    }
    Ok(AngleDerivativeReport { angle_gradient, connection_law })
}

/// Residual of the covariant-derivative formulas for `A` and `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NablaAbReport {
    pub a: f64,
    pub b: f64,
}

impl NablaAbReport {
    pub fn max(&self) -> f64 {
        self.a.max(self.b)
    }
}

/// `A^a_b` and `B^a_b` as endomorphisms in chart coordinates.
fn ab_endomorphisms(jac: &[TangentVec]) -> (Matrix3<f64>, Matrix3<f64>) {
    let g = metric_matrix(jac);
    let ginv = g.try_inverse().unwrap_or_else(Matrix3::zeros);
    let pj: Vec<TangentVec> = jac.iter().map(apply_P_unchecked).collect();
    let la = Matrix3::from_fn(|c, b| metric_unchecked(&pj[b], &jac[c]));
    let lb = Matrix3::from_fn(|c, b| metric_unchecked(&pj[b], &apply_J_unchecked(&jac[c])));
    (ginv * la, ginv * lb)
}

pub fn nabla_ab_residual<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<NablaAbReport> {
    let frame = lagrangian_frame(f, x, None)?;
    let jac = &frame.jac;
    let hess = hessian_coeffs(f, x, jac)?;
    let gam = tangential_christoffels(jac, &hess);
    let (_, nh) = normal_hessian(f, x)?;
    let g = metric_matrix(jac);
    let ginv = g.try_inverse().ok_or(NkError::RankDeficient { point: pad3(x), singular: vec![] })?;
    let (am, bm) = ab_endomorphisms(jac);
    let flat = |y: &[f64]| -> Result<Vec<f64>> {
        let (a, b) = ab_endomorphisms(&f.jacobian(y)?);
        Ok(a.as_slice().iter().chain(b.as_slice()).copied().collect())
    };
    let d: Vec<Vec<f64>> = (0..3).map(|c| axis_derivative(f, x, c, flat)).collect::<Result<_>>()?;
    let da = |c: usize| Matrix3::from_column_slice(&d[c][..9]);
    let db = |c: usize| Matrix3::from_column_slice(&d[c][9..]);
    let base = jac[0];
    let to_chart = |v: &TangentVec| -> Vector3<f64> {
        ginv * Vector3::from_fn(|e, _| metric_unchecked(v, &jac[e]))
    };
    let tv = |c: &[f64]| combine(jac, c);
    // (S_{J∂c})^a_b = g^{ae} g(h(∂b,∂e), J∂c)
    let shape: Vec<Matrix3<f64>> = (0..3)
        .map(|c| {
            let jc = apply_J_unchecked(&jac[c]).coeffs();
            let low = Matrix3::from_fn(|e, b| metric_coeffs(&nh[b][e], &jc));
            ginv * low
        })
        .collect();
    let h_vec = |c: usize, y: &Vector3<f64>| -> TangentVec {
        let mut s = [0.0; 6];
        for dd in 0..3 {
            for k in 0..6 {
                s[k] += y[dd] * nh[c][dd][k];
            }
        }
        vec_of(&base, &s)
    };
    let jg = |c: usize, y: &Vector3<f64>| -> Vector3<f64> {
        to_chart(&apply_J_unchecked(&apply_G_unchecked(&jac[c], &tv(y.as_slice()))))
    };
    let cov = |dm: Matrix3<f64>, m: &Matrix3<f64>, c: usize| -> Matrix3<f64> {
        let gc = Matrix3::from_fn(|a, dd| gam[a][c][dd]);
        let mut out = dm + gc * m;
        for a in 0..3 {
            for b in 0..3 {
                out[(a, b)] -= (0..3).map(|dd| gam[dd][c][b] * m[(a, dd)]).sum::<f64>();
            }
        }
        out
    };
    let mut worst_a: f64 = 0.0;
    let mut worst_b: f64 = 0.0;
    let e: Vec<Vector3<f64>> = frame.basis.iter().map(|v| Vector3::from_column_slice(v)).collect();
    for i in 0..3 {
        let mut lhs_a = Matrix3::zeros();
        let mut lhs_b = Matrix3::zeros();
        for c in 0..3 {
            lhs_a += cov(da(c), &am, c) * e[i][c];
            lhs_b += cov(db(c), &bm, c) * e[i][c];
        }
        for j in 0..3 {
            let y = e[j];
            let mut ra = Vector3::zeros();
            let mut rb = Vector3::zeros();
            for c in 0..3 {
                let xc = e[i][c];
                if xc == 0.0 {
                    continue;
                }
                let sy = shape[c] * y;
                let jh_by = to_chart(&apply_J_unchecked(&h_vec(c, &(bm * y))));
                let jh_ay = to_chart(&apply_J_unchecked(&h_vec(c, &(am * y))));
                let jgy = jg(c, &y);
                ra += (bm * sy - jh_by + (jg(c, &(am * y)) - am * jgy) * 0.5) * xc;
                rb += (jh_ay - am * sy + (jg(c, &(bm * y)) - bm * jgy) * 0.5) * xc;
            }
            let (va, vb) = (lhs_a * y - ra, lhs_b * y - rb);
            worst_a = worst_a.max(va.dot(&(g * va)).max(0.0).sqrt());
            worst_b = worst_b.max(vb.dot(&(g * vb)).max(0.0).sqrt());
        }
    }
    Ok(NablaAbReport { a: worst_a, b: worst_b })
}

/// One row of an invariant sweep, in the fixed CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub x: [f64; 3],
    pub theta: [f64; 3],
    pub h123: f64,
    pub k: [f64; 3],
    pub lag_residual: f64,
}

pub const CSV_COLUMNS: [&str; 11] =
    ["x1", "x2", "x3", "theta1", "theta2", "theta3", "h123", "K12", "K13", "K23", "lag_residual"];

impl InvariantRow {
    /// Values in [`CSV_COLUMNS`] order.
    pub fn values(&self) -> [f64; 11] {
        let (x, t, k) = (self.x, self.theta, self.k);
        [x[0], x[1], x[2], t[0], t[1], t[2], self.h123, k[0], k[1], k[2], self.lag_residual]
    }
}

pub fn invariant_row<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<InvariantRow> {
    let an = Analysis::new(f, x)?;
    let (a, b) = an.angles.diagonal_ab();
    Ok(InvariantRow {
        x: pad3(x),
        theta: an.angles.theta,
        h123: an.h[0][1][2],
        k: gauss_curvatures(&a, &b, &an.h),
        lag_residual: an.angles.frame.lagrangian_residual(),
    })
}

/// Invariant rows for many points, evaluated in parallel and returned in input order.
pub fn sweep<S: ImmersionSource + ?Sized>(f: &S, points: &[Vec<f64>]) -> Vec<Result<InvariantRow>> {
    points.par_iter().map(|x| invariant_row(f, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example;
    use crate::immersion::{DomainBox, ImmersionMap};

    const X: [f64; 3] = [0.2, -0.3, 0.15];

    #[test]
    fn circular_helpers() {
        assert!(circ_dist(0.0, PI - 1e-9) < 2e-9);
        assert!((circ_dist(0.1, 0.4) - 0.3).abs() < 1e-15);
        let a = [0.0, PI / 3.0, 2.0 * PI / 3.0];
        assert!(angle_set_distance(&a, &[2.0 * PI / 3.0, 0.0, PI / 3.0]) < 1e-15);
        assert!(angle_sum_defect(&a) < 1e-15);
    }

    #[test]
    fn diagonal_has_identity_a() {
        let (a, b) = ab_matrices(&example(3).unwrap().map, &X).unwrap();
        assert!((a - Matrix3::identity()).amax() < 1e-12);
        assert!(b.amax() < 1e-12);
    }

    #[test]
    fn first_factor_values() {
        let m = example(1).unwrap().map;
        let (a, b) = ab_matrices(&m, &X).unwrap();
        assert!((a + Matrix3::identity() * 0.5).amax() < 1e-12);
        assert!((b + Matrix3::identity() * (SQRT3 / 2.0)).amax() < 1e-12);
        let ad = angle_functions(&m, &X).unwrap();
        for t in ad.theta {
            assert!((t - 2.0 * PI / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn orientation_is_canonical() {
        for k in 1..=8 {
            let ad = angle_functions(&example(k).unwrap().map, &X).unwrap();
            assert!((ad.orientation() - 1.0 / SQRT3).abs() < 1e-9, "item {k}");
            assert!(ad.theta.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn perturbed_start_gives_same_angles() {
        let m = example(8).unwrap().map;
        let a = angle_functions(&m, &X).unwrap();
        let start = vec![vec![0.3, 1.0, -0.2], vec![1.0, 0.1, 0.4], vec![-0.5, 0.2, 1.0]];
        let b = angle_functions_from(&m, &X, &start).unwrap();
        for k in 0..3 {
            assert!((a.theta[k] - b.theta[k]).abs() < 1e-9);
        }
        let (h1, h2) = (second_fundamental_form(&m, &X).unwrap(), {
            let an = Analysis::new(&m, &X).unwrap();
            an.h
        });
        assert!((h1[0][1][2].abs() - h2[0][1][2].abs()).abs() < 1e-9);
    }

    #[test]
    fn non_lagrangian_rejected() {
        // (u, u·exp(0.1·x₁·j)) is a distortion of the diagonal that is no longer Lagrangian.
        let base = crate::quat::Quaternion::new(0.8, 0.3, -0.4, 0.33).renormalize().unwrap().get();
        let m = ImmersionMap::from_jet("bent", 3, DomainBox::cube(3, 1.0), move |x| {
            let u = crate::immersion::s3_chart(base, x);
            let zero = crate::jet::Jet::constant(0.0);
            let tw = crate::jet::QJet::exp_im([zero, x[0].scale(0.1), zero]);
            (u, u * tw)
        });
        let r = crate::immersion::is_lagrangian(&m, &X).unwrap();
        assert!(r > 1e-3, "{r}");
        assert!(matches!(ab_matrices(&m, &X), Err(NkError::NotLagrangian { .. })));
    }

    #[test]
    fn gauss_tensor_symmetries() {
        let m = example(8).unwrap().map;
        let an = Analysis::new(&m, &X).unwrap();
        let (a, b) = an.angles.diagonal_ab();
        let r = gauss_tensor(&a, &b, &an.h);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert!((r[i][j][k][l] + r[j][i][k][l]).abs() < 1e-9);
                        assert!((r[i][j][k][l] + r[i][j][l][k]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn catalog_goldens_recomputed() {
        for entry in crate::catalog::all() {
            let g = &entry.expected;
            let sff = sff_data(&entry.map, &X).unwrap();
            let ad = angle_functions(&entry.map, &X).unwrap();
            eprintln!("item {} theta {:?} h {:.6} omega {:.6} K {:?}", entry.id, ad.theta, sff.h123(), sff.omega[0][1][2], sff.k);
            assert!(angle_set_distance(&ad.theta, &g.angles) < 1e-7, "item {}", entry.id);
            let mut k = sff.k;
            let mut kg = g.k;
            k.sort_by(f64::total_cmp);
            kg.sort_by(f64::total_cmp);
            for n in 0..3 {
                assert!((k[n] - kg[n]).abs() < 1e-6, "item {} K {:?}", entry.id, sff.k);
            }
            assert!((sff.h123().abs() - g.h123_abs).abs() < 1e-6, "item {}", entry.id);
            assert!(sff.symmetry_defect() < 1e-7, "item {} {}", entry.id, sff.symmetry_defect());
            assert!(ad.commutator() < 1e-8 && ad.identity_defect() < 1e-8);
            if g.totally_geodesic {
                assert!(sff.h_norm() < 1e-7);
            }
        }
    }

    #[test]
    fn residuals_on_catalog() {
        for k in [1, 4, 7, 8] {
            let m = example(k).unwrap().map;
            let gc = gauss_codazzi_residuals(&m, &X).unwrap();
            let ab = nabla_ab_residual(&m, &X).unwrap();
            let dv = angle_derivative_check(&m, &X).unwrap();
            eprintln!("item {k}: {gc:?} {ab:?} {dv:?}");
            assert!(gc.gauss < 1e-4 && gc.codazzi < 1e-6, "item {k}");
            assert!(ab.max() < 1e-6, "item {k}");
            assert!(dv.angle_gradient < 1e-6 && dv.connection_law < 1e-6, "item {k}");
        }
    }
}
