//! The swap transform `f̃ = (q, p)` and the star transform `f* = (p̄, q p̄)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::str::FromStr;

use crate::error::{NkError, Result};
use crate::immersion::{induced_metric, is_lagrangian, ImmersionMap, ImmersionSource};
use crate::invariants::{angle_functions, angle_set_distance, distance_to_angle};
use crate::io::{SampledImmersion, JACOBIAN_MARGIN};
use crate::nkspace::{SurfacePoint, TangentVec};
use crate::quat::UnitQuaternion;

fn swap_point(s: SurfacePoint) -> SurfacePoint {
    SurfacePoint::new(s.q, s.p)
}

fn star_point(s: SurfacePoint) -> SurfacePoint {
    let pbar = s.p.conj();
    SurfacePoint::new(pbar, UnitQuaternion::new_unchecked(s.q.get() * pbar.get()))
}

fn swap_vec(base: SurfacePoint, v: &TangentVec) -> Result<TangentVec> {
    TangentVec::new(base, v.V, v.U)
}

fn star_vec(src: SurfacePoint, base: SurfacePoint, v: &TangentVec) -> Result<TangentVec> {
    let (p, q) = (src.p.get(), src.q.get());
    let du = v.U.conj();
    TangentVec::new(base, du, v.V * p.conj() + q * du)
}

fn wrap<P, D>(f: &ImmersionMap, suffix: &str, point: P, vec: D) -> ImmersionMap
where
    P: Fn(SurfacePoint) -> SurfacePoint + Send + Sync + Copy + 'static,
    D: Fn(SurfacePoint, SurfacePoint, &TangentVec) -> Result<TangentVec> + Send + Sync + Copy + 'static,
{
    let eval = f.evaluator();
    let mut out = ImmersionMap::new(format!("{}{suffix}", f.label), f.dim(), f.domain.clone(), move |x| {
        Ok(point(eval(x)?))
    })
    .with_sample_box(f.sample_box.clone())
    .with_steps(f.fd_step, f.outer_step);
    if let Some(cf) = f.closed_form() {
        out = out.with_differential(move |x| {
            let (s, cols) = cf(x)?;
            let base = point(s);
            let cols = cols.iter().map(|c| vec(s, base, c)).collect::<Result<Vec<_>>>()?;
            Ok((base, cols))
        });
    }
    out
}

/// `f̃ = (q, p)`.
pub fn swap_transform(f: &ImmersionMap) -> ImmersionMap {
    wrap(f, "~", swap_point, |_, base, v| swap_vec(base, v))
}

/// `f* = (p̄, q p̄)`.
pub fn star_transform(f: &ImmersionMap) -> ImmersionMap {
    wrap(f, "*", star_point, star_vec)
}

fn law(theta: &[f64; 3], shift: f64) -> [f64; 3] {
    theta.map(|t| shift - t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSample {
    pub x: Vec<f64>,
    pub theta: [f64; 3],
    pub theta_swap: [f64; 3],
    pub theta_star: [f64; 3],
    pub theta_swap_star: [f64; 3],
    /// Largest entrywise gap between induced metrics of `f` and `f̃`.
    pub metric_gap_swap: f64,
    pub metric_gap_star: f64,
    pub lagrangian: f64,
    pub lagrangian_swap: f64,
    pub lagrangian_star: f64,
    /// Distance of the `f̃` angle set from `{π − θᵢ}`.
    pub law_gap_swap: f64,
    /// Distance of the `f*` angle set from `{2π/3 − θᵢ}`.
    pub law_gap_star: f64,
    /// Distance of the `(f̃)*` angle set from `{θᵢ − π/3}`.
    pub law_gap_swap_star: f64,
}

/// `π/3 ∈ θ(f)`, then `2π/3 ∈ θ(f̃)`, then `0 ∈ θ((f̃)*)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub source_gap: f64,
    pub swap_gap: f64,
    pub swap_star_gap: f64,
}

impl ChainCheck {
    pub fn max(&self) -> f64 {
        self.source_gap.max(self.swap_gap).max(self.swap_star_gap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub label: String,
    pub seed: u64,
    pub samples: Vec<TransformSample>,
    /// Present when the source has `π/3` among its angles at the first sample.
    pub chain: Option<ChainCheck>,
}

impl TransformReport {
    fn worst(&self, f: impl Fn(&TransformSample) -> f64) -> f64 {
        self.samples.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_metric_gap(&self) -> f64 {
        self.worst(|s| s.metric_gap_swap.max(s.metric_gap_star))
    }

    pub fn max_lagrangian(&self) -> f64 {
        self.worst(|s| s.lagrangian_swap.max(s.lagrangian_star))
    }

    pub fn max_law_gap(&self) -> f64 {
        self.worst(|s| s.law_gap_swap.max(s.law_gap_star).max(s.law_gap_swap_star))
    }
}

/// Uniform samples from the map's sample box, reproducible from `seed`.
pub fn sample_points(f: &ImmersionMap, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = &f.sample_box;
    (0..n)
        .map(|_| b.lo.iter().zip(&b.hi).map(|(l, h)| rng.random_range(*l..*h)).collect())
        .collect()
}

fn metric_gap(a: &ImmersionMap, b: &ImmersionMap, x: &[f64]) -> Result<f64> {
    Ok(induced_metric(a, x)?.max_abs_diff(&induced_metric(b, x)?))
}

pub fn verify_transform_relations(f: &ImmersionMap, n: usize, seed: u64) -> Result<TransformReport> {
    let ft = swap_transform(f);
    let fs = star_transform(f);
    let fts = star_transform(&ft);
    let points = sample_points(f, n, seed);
    let samples = points
        .par_iter()
        .map(|x| -> Result<TransformSample> {
            let theta = angle_functions(f, x)?.theta;
            let theta_swap = angle_functions(&ft, x)?.theta;
            let theta_star = angle_functions(&fs, x)?.theta;
            let theta_swap_star = angle_functions(&fts, x)?.theta;
            Ok(TransformSample {
                x: x.clone(),
                theta,
                theta_swap,
                theta_star,
                theta_swap_star,
                metric_gap_swap: metric_gap(f, &ft, x)?,
                metric_gap_star: metric_gap(f, &fs, x)?,
                lagrangian: is_lagrangian(f, x)?,
                lagrangian_swap: is_lagrangian(&ft, x)?,
                lagrangian_star: is_lagrangian(&fs, x)?,
                law_gap_swap: angle_set_distance(&theta_swap, &law(&theta, std::f64::consts::PI)),
                law_gap_star: angle_set_distance(&theta_star, &law(&theta, 2.0 * std::f64::consts::FRAC_PI_3)),
                law_gap_swap_star: angle_set_distance(&theta_swap_star, &theta.map(|t| t - std::f64::consts::FRAC_PI_3)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chain = samples.first().and_then(|s| {
        let source_gap = distance_to_angle(&s.theta, std::f64::consts::FRAC_PI_3);
        (source_gap < 1e-6).then(|| ChainCheck {
            source_gap,
            swap_gap: distance_to_angle(&s.theta_swap, 2.0 * std::f64::consts::FRAC_PI_3),
            swap_star_gap: distance_to_angle(&s.theta_swap_star, 0.0),
        })
    });
    Ok(TransformReport { label: f.label.clone(), seed, samples, chain })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Swap,
    Star,
    /// `(f̃)*`
    SwapStar,
}

impl TransformKind {
    pub fn suffix(self) -> &'static str {
        match self {
            TransformKind::Swap => "~",
            TransformKind::Star => "*",
            TransformKind::SwapStar => "~*",
        }
    }

    pub fn apply(self, s: SurfacePoint) -> SurfacePoint {
        match self {
            TransformKind::Swap => swap_point(s),
            TransformKind::Star => star_point(s),
            TransformKind::SwapStar => star_point(swap_point(s)),
        }
    }

    /// Expected angles of the transformed map, as an unsorted triple mod π.
    pub fn angle_law(self, theta: &[f64; 3]) -> [f64; 3] {
        match self {
            TransformKind::Swap => law(theta, std::f64::consts::PI),
            TransformKind::Star => law(theta, 2.0 * std::f64::consts::FRAC_PI_3),
            TransformKind::SwapStar => theta.map(|t| t - std::f64::consts::FRAC_PI_3),
        }
    }
}

impl FromStr for TransformKind {
    type Err = NkError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" => Ok(TransformKind::Swap),
            "star" => Ok(TransformKind::Star),
            "swap-star" => Ok(TransformKind::SwapStar),
            _ => Err(NkError::InvalidInput(format!("unknown transform '{s}' (expected swap, star or swap-star)"))),
        }
    }
}

/// Applies `kind` node by node.
pub fn transform_sampled(s: &SampledImmersion, kind: TransformKind) -> SampledImmersion {
    SampledImmersion {
        label: format!("{}{}", s.label, kind.suffix()),
        grid: s.grid.clone(),
        points: s.points.iter().map(|p| kind.apply(*p)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledTransformReport {
    pub source: String,
    pub target: String,
    pub kind: TransformKind,
    pub nodes_checked: usize,
    /// Nodes where either side failed the invariant preconditions.
    pub failed_nodes: usize,
    pub max_metric_gap: f64,
    pub max_lagrangian_source: f64,
    pub max_lagrangian_target: f64,
    pub max_law_gap: f64,
}

/// Compares `src` and `dst = kind(src)` at up to `max_nodes` interior nodes, evenly strided.
pub fn check_sampled_transform(
    src: &SampledImmersion,
    dst: &SampledImmersion,
    kind: TransformKind,
    max_nodes: usize,
) -> SampledTransformReport {
    let interior = src.grid.interior(JACOBIAN_MARGIN);
    let stride = interior.len().div_ceil(max_nodes.max(1)).max(1);
    let nodes: Vec<Vec<f64>> = interior.iter().step_by(stride).map(|i| src.grid.coords(i)).collect();
    let rows: Vec<Option<[f64; 4]>> = nodes
        .par_iter()
        .map(|x| -> Result<[f64; 4]> {
            let gap = induced_metric(src, x)?.max_abs_diff(&induced_metric(dst, x)?);
            let (a, b) = (angle_functions(src, x)?, angle_functions(dst, x)?);
            let law_gap = angle_set_distance(&b.theta, &kind.angle_law(&a.theta));
            Ok([gap, a.frame.lagrangian_residual(), b.frame.lagrangian_residual(), law_gap])
        })
        .map(|r| r.ok())
        .collect();
    let ok: Vec<[f64; 4]> = rows.iter().flatten().copied().collect();
    let worst = |c: usize| ok.iter().map(|r| r[c]).fold(0.0, f64::max);
    SampledTransformReport {
        source: src.label.clone(),
        target: dst.label.clone(),
        kind,
        nodes_checked: nodes.len(),
        failed_nodes: nodes.len() - ok.len(),
        max_metric_gap: worst(0),
        max_lagrangian_source: worst(1),
        max_lagrangian_target: worst(2),
        max_law_gap: worst(3),
    }
}
