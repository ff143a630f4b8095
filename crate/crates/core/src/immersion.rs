//! Parametrized maps into S³×S³ and their first-order geometry.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};
use crate::jet::{Jet, QJet};
use crate::nkspace::{apply_J_unchecked, metric_unchecked, SurfacePoint, TangentVec};
use crate::quat::{Quaternion, UnitQuaternion};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-6;
/// Induced metrics with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e8;
/// Lagrangian residual above which `A`, `B` and the angles are not extracted.
pub const LAGRANGIAN_GATE: f64 = 1e-6;

pub(crate) fn pad3(x: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, v) in out.iter_mut().zip(x) {
        *o = *v;
    }
    out
}

/// How derived fields are differentiated along chart axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub h: Vec<f64>,
    /// Combine steps `h` and `h/2` into a fourth-order estimate.
    pub richardson: bool,
}

/// Anything that yields a point and a differential at chart coordinates.
pub trait ImmersionSource: Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> &str;
    fn point(&self, x: &[f64]) -> Result<SurfacePoint>;
    /// `df(∂ₐ)` for every chart axis.
    fn jacobian(&self, x: &[f64]) -> Result<Vec<TangentVec>>;
    fn stencil(&self) -> Stencil;
    /// Largest Lagrangian residual accepted before extracting invariants.
    fn lagrangian_gate(&self) -> f64 {
        LAGRANGIAN_GATE
    }
}

/// Derivative of a vector-valued quantity along chart axis `axis`, using the source's stencil.
pub fn axis_derivative<S, F>(src: &S, x: &[f64], axis: usize, f: F) -> Result<Vec<f64>>
where
    S: ImmersionSource + ?Sized,
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let st = src.stencil();
    let central = |h: f64| -> Result<Vec<f64>> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[axis] += h;
        xm[axis] -= h;
        let (fp, fm) = (f(&xp)?, f(&xm)?);
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let h = st.h[axis];
    let d1 = central(h)?;
    if !st.richardson {
        return Ok(d1);
    }
    let d2 = central(h / 2.0)?;
    Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn cube(dim: usize, r: f64) -> Self {
        DomainBox { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l + margin && *v <= h - margin)
    }
}

type EvalFn = dyn Fn(&[f64]) -> Result<SurfacePoint> + Send + Sync;
type JetFn = dyn Fn(&[f64]) -> Result<(SurfacePoint, Vec<TangentVec>)> + Send + Sync;

/// A chart-parametrized map `x ↦ (p(x), q(x))`, optionally with an exact differential.
#[derive(Clone)]
pub struct ImmersionMap {
    pub label: String,
    dim: usize,
    eval: Arc<EvalFn>,
    closed_form: Option<Arc<JetFn>>,
    /// Points outside this box are rejected.
    pub domain: DomainBox,
    /// Where random samples are drawn.
    pub sample_box: DomainBox,
    /// Step of the Richardson central differences used for `df` when no closed form exists.
    pub fd_step: f64,
    /// Step for differentiating derived fields (frames, `A`, `B`, angles).
    pub outer_step: f64,
}

impl std::fmt::Debug for ImmersionMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImmersionMap")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl ImmersionMap {
    pub fn new<F>(label: impl Into<String>, dim: usize, domain: DomainBox, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Result<SurfacePoint> + Send + Sync + 'static,
    {
        assert!(dim == 2 || dim == 3, "chart dimension must be 2 or 3");
        ImmersionMap {
            label: label.into(),
            dim,
            eval: Arc::new(eval),
            closed_form: None,
            sample_box: domain.clone(),
            domain,
            fd_step: 1e-3,
            outer_step: 1e-3,
        }
    }

    /// Builds a map whose components are written over jets, giving exact differentials.
    pub fn from_jet<F>(label: impl Into<String>, dim: usize, domain: DomainBox, f: F) -> Self
    where
        F: Fn(&[Jet]) -> (QJet, QJet) + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let g = f.clone();
        let eval = move |x: &[f64]| -> Result<SurfacePoint> {
            let jets: Vec<Jet> = x.iter().map(|v| Jet::constant(*v)).collect();
            let (p, q) = g(&jets);
            SurfacePoint::from_quaternions(p.value(), q.value())
        };
        let closed = move |x: &[f64]| -> Result<(SurfacePoint, Vec<TangentVec>)> {
            let jets: Vec<Jet> = x.iter().enumerate().map(|(k, v)| Jet::variable(*v, k)).collect();
            let (p, q) = f(&jets);
            let base = SurfacePoint::from_quaternions(p.value(), q.value())?;
            let cols = (0..x.len())
                .map(|k| TangentVec::new(base, p.partial(k), q.partial(k)))
                .collect::<Result<Vec<_>>>()?;
            Ok((base, cols))
        };
        let mut m = ImmersionMap::new(label, dim, domain, eval);
        m.closed_form = Some(Arc::new(closed));
        m
    }

    /// Replaces the differential by an explicit one.
    pub fn with_differential<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<(SurfacePoint, Vec<TangentVec>)> + Send + Sync + 'static,
    {
        self.closed_form = Some(Arc::new(f));
        self
    }

    pub fn with_sample_box(mut self, b: DomainBox) -> Self {
        self.sample_box = b;
        self
    }

    pub fn with_steps(mut self, fd_step: f64, outer_step: f64) -> Self {
        self.fd_step = fd_step;
        self.outer_step = outer_step;
        self
    }

    /// Drops the closed-form differential so that `df` is taken by finite differences.
    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = None;
        self
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub(crate) fn closed_form(&self) -> Option<Arc<JetFn>> {
        self.closed_form.clone()
    }

    pub(crate) fn evaluator(&self) -> Arc<EvalFn> {
        self.eval.clone()
    }

    fn ensure_inside(&self, x: &[f64], margin: f64) -> Result<()> {
        if x.len() != self.dim || !self.domain.contains(x, margin) {
            return Err(NkError::OutOfDomain { point: pad3(x) });
        }
        Ok(())
    }

    /// Richardson central-difference differential.
    pub fn fd_jacobian(&self, x: &[f64]) -> Result<Vec<TangentVec>> {
        let h = self.fd_step;
        self.ensure_inside(x, h)?;
        let base = (self.eval)(x)?;
        (0..self.dim)
            .map(|a| {
                let diff = |s: f64| -> Result<(Quaternion, Quaternion)> {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[a] += s;
                    xm[a] -= s;
                    let (fp, fm) = ((self.eval)(&xp)?, (self.eval)(&xm)?);
                    Ok(((fp.p.get() - fm.p.get()) / (2.0 * s), (fp.q.get() - fm.q.get()) / (2.0 * s)))
                };
                let (u1, v1) = diff(h)?;
                let (u2, v2) = diff(h / 2.0)?;
                TangentVec::new(base, (u2 * 4.0 - u1) / 3.0, (v2 * 4.0 - v1) / 3.0)
            })
            .collect()
    }
}

impl ImmersionSource for ImmersionMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn point(&self, x: &[f64]) -> Result<SurfacePoint> {
        self.ensure_inside(x, 0.0)?;
        (self.eval)(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<Vec<TangentVec>> {
        match &self.closed_form {
            Some(cf) => {
                self.ensure_inside(x, 0.0)?;
                Ok(cf(x)?.1)
            }
            None => self.fd_jacobian(x),
        }
    }

    fn stencil(&self) -> Stencil {
        Stencil { h: vec![self.outer_step; self.dim], richardson: true }
    }
}

/// `df(X)` for a chart vector `X`.
pub fn differential<S: ImmersionSource + ?Sized>(f: &S, x: &[f64], v: &[f64]) -> Result<TangentVec> {
    let jac = f.jacobian(x)?;
    Ok(combine(&jac, v))
}

/// `Σ vᵃ colsₐ`.
pub fn combine(cols: &[TangentVec], v: &[f64]) -> TangentVec {
    let base = cols[0].base;
    let (mut u, mut w) = (Quaternion::ZERO, Quaternion::ZERO);
    for (c, s) in cols.iter().zip(v) {
        u += c.U * *s;
        w += c.V * *s;
    }
    TangentVec::raw(base, u, w)
}

/// `gᵢⱼ = g(df ∂ᵢ, df ∂ⱼ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMetric {
    pub g: DMatrix<f64>,
}

impl InducedMetric {
    pub fn from_columns(cols: &[TangentVec]) -> Self {
        let n = cols.len();
        InducedMetric { g: DMatrix::from_fn(n, n, |a, b| metric_unchecked(&cols[a], &cols[b])) }
    }

    pub fn max_abs_diff(&self, o: &InducedMetric) -> f64 {
        (&self.g - &o.g).amax()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g.clone().cholesky().is_some()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let (va, vb) = (DVector::from_column_slice(a), DVector::from_column_slice(b));
        va.dot(&(&self.g * vb))
    }
}

pub fn induced_metric<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<InducedMetric> {
    Ok(InducedMetric::from_columns(&f.jacobian(x)?))
}

/// Gram–Schmidt of `start` under `metric`; returns chart vectors.
pub fn gram_schmidt(metric: &InducedMetric, start: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let eig = metric.g.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return Err(NkError::RankDeficient { point: [f64::NAN; 3], singular: eig.eigenvalues.iter().copied().collect() });
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(start.len());
    for v in start {
        let mut w = v.clone();
        for e in &out {
            let c = metric.inner(&w, e);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= c * ei;
            }
        }
        let n = metric.inner(&w, &w).sqrt();
        if !(n > 1e-8) {
            return Err(NkError::RankDeficient { point: [f64::NAN; 3], singular: vec![n] });
        }
        out.push(w.into_iter().map(|c| c / n).collect());
    }
    Ok(out)
}

fn coordinate_basis(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|a| {
            let mut v = vec![0.0; dim];
            v[a] = 1.0;
            v
        })
        .collect()
}

fn locate(err: NkError, x: &[f64]) -> NkError {
    match err {
        NkError::RankDeficient { singular, .. } => NkError::RankDeficient { point: pad3(x), singular },
        e => e,
    }
}

/// A `g`-orthonormal basis of chart vectors, by Gram–Schmidt on the coordinate basis.
pub fn orthonormal_basis<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = induced_metric(f, x)?;
    gram_schmidt(&m, &coordinate_basis(f.dim())).map_err(|e| locate(e, x))
}

/// Singular values of the columns viewed in ℝⁿ, largest first.
fn singular_values(cols: &[Vec<f64>]) -> Vec<f64> {
    let rows = cols[0].len();
    let m = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn numerical_rank(s: &[f64]) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|v| **v > RANK_TOL * top && **v > 0.0).count()
}

/// Rank and singular values of `df` in ℝ⁸.
pub fn differential_rank(cols: &[TangentVec]) -> (usize, Vec<f64>) {
    let flat: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let (u, v) = (c.U.to_array(), c.V.to_array());
            u.iter().chain(v.iter()).copied().collect()
        })
        .collect();
    let s = singular_values(&flat);
    (numerical_rank(&s), s)
}

/// Rank and singular values of the first component `dp` in ℝ⁴.
pub fn rank_dp(cols: &[TangentVec]) -> (usize, Vec<f64>) {
    let flat: Vec<Vec<f64>> = cols.iter().map(|c| c.U.to_array().to_vec()).collect();
    let s = singular_values(&flat);
    (numerical_rank(&s), s)
}

/// Point, differential and an orthonormal tangent frame at one chart point.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub x: Vec<f64>,
    pub point: SurfacePoint,
    pub jac: Vec<TangentVec>,
    pub metric: InducedMetric,
    /// Orthonormal chart vectors `eᵢ`.
    pub basis: Vec<Vec<f64>>,
    /// `df(eᵢ)`.
    pub w: Vec<TangentVec>,
}

impl LocalFrame {
    pub fn new<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<Self> {
        let jac = f.jacobian(x)?;
        Self::from_jacobian(x, jac, None)
    }

    pub(crate) fn from_jacobian(x: &[f64], jac: Vec<TangentVec>, start: Option<&[Vec<f64>]>) -> Result<Self> {
        let (rank, s) = differential_rank(&jac);
        if rank < jac.len() {
            return Err(NkError::RankDeficient { point: pad3(x), singular: s });
        }
        let metric = InducedMetric::from_columns(&jac);
        let start = start.map(|s| s.to_vec()).unwrap_or_else(|| coordinate_basis(jac.len()));
        let basis = gram_schmidt(&metric, &start).map_err(|e| locate(e, x))?;
        let w = basis.iter().map(|e| combine(&jac, e)).collect();
        Ok(LocalFrame { x: x.to_vec(), point: jac[0].base, jac, metric, basis, w })
    }

    pub fn lagrangian_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for a in &self.w {
            for b in &self.w {
                r = r.max(metric_unchecked(a, &apply_J_unchecked(b)).abs());
            }
        }
        r
    }
}

/// `maxᵢⱼ |g(df eᵢ, J df eⱼ)|` over an orthonormal basis.
pub fn is_lagrangian<S: ImmersionSource + ?Sized>(f: &S, x: &[f64]) -> Result<f64> {
    if f.dim() != 3 {
        return Err(NkError::InvalidInput("Lagrangian test needs a three-dimensional chart".into()));
    }
    Ok(LocalFrame::new(f, x)?.lagrangian_residual())
}

/// The chart `x ↦ base·exp(x₁i + x₂j + x₃k)` on S³, as a jet.
pub fn s3_chart(base: Quaternion, x: &[Jet]) -> QJet {
    QJet::constant(base) * QJet::exp_im([x[0], x[1], x[2]])
}

/// Plain evaluation of [`s3_chart`].
pub fn s3_chart_point(base: UnitQuaternion, x: &[f64]) -> Quaternion {
    base.get() * Quaternion::exp_im(pad3(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(base: Quaternion) -> ImmersionMap {
        ImmersionMap::from_jet("diag", 3, DomainBox::cube(3, 1.0), move |x| {
            let u = s3_chart(base, x);
            (u, u)
        })
    }

    #[test]
    fn closed_form_first_column() {
        let m = diag(Quaternion::ONE);
        let d = differential(&m, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert!(d.U.max_abs_diff(Quaternion::I) < 1e-15 && d.V.max_abs_diff(Quaternion::I) < 1e-15);
    }

    #[test]
    fn fd_matches_closed_form_and_is_linear() {
        let base = Quaternion::new(0.4, -0.2, 0.8, 0.3).renormalize().unwrap().get();
        let m = diag(base);
        let fd = m.clone().without_closed_form();
        let x = [0.2, -0.1, 0.35];
        let (a, b) = (m.jacobian(&x).unwrap(), fd.jacobian(&x).unwrap());
        for (c1, c2) in a.iter().zip(&b) {
            assert!(c1.max_abs_diff(c2) < 1e-10);
        }
        let u = differential(&m, &x, &[0.3, -1.2, 2.0]).unwrap();
        let lin = combine(&a, &[0.3, -1.2, 2.0]);
        assert!(u.max_abs_diff(&lin) < 1e-12);
    }

    #[test]
    fn degenerate_map() {
        let c = ImmersionMap::new("const", 3, DomainBox::cube(3, 1.0), |_| Ok(SurfacePoint::identity()));
        let g = induced_metric(&c, &[0.0; 3]).unwrap();
        assert_eq!(g.g.amax(), 0.0);
        assert!(matches!(is_lagrangian(&c, &[0.0; 3]), Err(NkError::RankDeficient { .. })));
        assert!(matches!(c.point(&[2.0, 0.0, 0.0]), Err(NkError::OutOfDomain { .. })));
    }

    #[test]
    fn gram_schmidt_examples() {
        let id = InducedMetric { g: DMatrix::identity(3, 3) };
        let start = coordinate_basis(3);
        assert_eq!(gram_schmidt(&id, &start).unwrap(), start);
        let bad = InducedMetric { g: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1e-9])) };
        assert!(gram_schmidt(&bad, &start).is_err());
    }
}
