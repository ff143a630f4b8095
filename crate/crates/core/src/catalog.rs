//! The eight constant-angle Lagrangian immersions and their frozen invariants.

use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};
use crate::immersion::{s3_chart, DomainBox, ImmersionMap};
use crate::jet::{Jet, QJet};
use crate::nkspace::SurfacePoint;
use crate::quat::{Quaternion, UnitQuaternion};

/// The item with constant sectional curvature 3/16.
pub const CURVED_CASE_ID: usize = 7;
/// The flat item.
pub const FLAT_CASE_ID: usize = 8;

/// Centre of the exponential chart used for the S³-domain items.
pub const DEFAULT_CHART_BASE: [f64; 4] = [0.8, 0.3, -0.4, 0.33];

const GOLDENS: &str = include_str!("../data/catalog_goldens.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub id: usize,
    /// Angle functions, ascending, in `[0, π)`.
    pub angles: [f64; 3],
    /// Sectional curvatures of the eigenplanes `(E₁E₂, E₁E₃, E₂E₃)`.
    #[serde(rename = "K")]
    pub k: [f64; 3],
    pub h123_abs: f64,
    pub totally_geodesic: bool,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: usize,
    pub map: ImmersionMap,
    pub expected: Golden,
}

fn check_id(k: usize) -> Result<()> {
    if (1..=8).contains(&k) {
        Ok(())
    } else {
        Err(NkError::InvalidInput(format!("catalog id {k} is outside 1..=8")))
    }
}

fn default_base() -> Quaternion {
    Quaternion::from(DEFAULT_CHART_BASE).renormalize().expect("non-zero base").get()
}

/// `(p, q)` of items 1–7 as functions of `u ∈ S³`, generic over plain values and jets.
fn s3_item(k: usize, u: QJet) -> (QJet, QJet) {
    let one = QJet::constant(Quaternion::ONE);
    let i = QJet::constant(Quaternion::I);
    let j = QJet::constant(Quaternion::J);
    let ui = u.conj();
    match k {
        1 => (u, one),
        2 => (one, u),
        3 => (u, u),
        4 => (u, u * i),
        5 => (ui, u * i * ui),
        6 => (u * i * ui, ui),
        7 => (u * i * ui, u * j * ui),
        _ => unreachable!(),
    }
}

fn torus_item(x: &[Jet]) -> (QJet, QJet) {
    let (u, v, w) = (x[0], x[1], x[2]);
    let (cu, su, cv, sv, cw, sw) = (u.cos(), u.sin(), v.cos(), v.sin(), w.cos(), w.sin());
    let p = QJet([cu * cw, cu * sw, su * cw, su * sw]);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (plus, minus) = ((su + cu).scale(r), (su - cu).scale(r));
    let q = QJet([cv * plus, sv * plus, cv * minus, sv * minus]);
    (p, q)
}

/// Items 1–7 evaluated directly at a point of S³.
pub fn eval_at(k: usize, u: UnitQuaternion) -> Result<SurfacePoint> {
    check_id(k)?;
    if k == 8 {
        return Err(NkError::InvalidInput("item 8 is parametrized over ℝ³, not S³".into()));
    }
    let (p, q) = s3_item(k, QJet::constant(u.get()));
    SurfacePoint::from_quaternions(p.value(), q.value())
}

pub fn example(k: usize) -> Result<CatalogEntry> {
    example_with_base(k, UnitQuaternion::new(default_base())?)
}

/// As [`example`], with the S³ chart centred at `base`.
pub fn example_with_base(k: usize, base: UnitQuaternion) -> Result<CatalogEntry> {
    check_id(k)?;
    let label = format!("example-{k}");
    let map = if k == 8 {
        let pi = std::f64::consts::PI;
        ImmersionMap::from_jet(label, 3, DomainBox::cube(3, 100.0), torus_item)
            .with_sample_box(DomainBox::cube(3, pi))
    } else {
        let b = base.get();
        ImmersionMap::from_jet(label, 3, DomainBox::cube(3, 1.2), move |x| s3_item(k, s3_chart(b, x)))
            .with_sample_box(DomainBox::cube(3, 0.9))
    };
    Ok(CatalogEntry { id: k, map, expected: expected_invariants(k)? })
}

pub fn all() -> Vec<CatalogEntry> {
    (1..=8).map(|k| example(k).expect("catalog ids are valid")).collect()
}

pub fn goldens() -> Vec<Golden> {
    serde_json::from_str(GOLDENS).expect("checked-in golden file parses")
}

pub fn expected_invariants(k: usize) -> Result<Golden> {
    check_id(k)?;
    goldens()
        .into_iter()
        .find(|g| g.id == k)
        .ok_or_else(|| NkError::InvalidInput(format!("no golden entry for item {k}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::ImmersionSource;

    #[test]
    fn pointwise_examples() {
        let one = UnitQuaternion::IDENTITY;
        let p = eval_at(4, one).unwrap();
        assert_eq!(p.p.get(), Quaternion::ONE);
        assert_eq!(p.q.get(), Quaternion::I);
        let i = UnitQuaternion::new(Quaternion::I).unwrap();
        let p = eval_at(7, one).unwrap();
        assert_eq!((p.p.get(), p.q.get()), (Quaternion::I, Quaternion::J));
        let p = eval_at(7, i).unwrap();
        assert!(p.p.get().max_abs_diff(Quaternion::I) < 1e-15);
        assert!(p.q.get().max_abs_diff(-Quaternion::J) < 1e-15);
        let e8 = example(8).unwrap().map.point(&[0.0; 3]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(e8.p.get(), Quaternion::ONE);
        assert!(e8.q.get().max_abs_diff(Quaternion::new(r, 0.0, -r, 0.0)) < 1e-15);
        assert!(example(0).is_err() && example(9).is_err());
    }

    #[test]
    fn chart_matches_pointwise_map() {
        let e = example(5).unwrap();
        let x = [0.3, -0.2, 0.5];
        let u = UnitQuaternion::new(default_base() * Quaternion::exp_im(x)).unwrap();
        let direct = eval_at(5, u).unwrap();
        let chart = e.map.point(&x).unwrap();
        assert!(direct.p.get().max_abs_diff(chart.p.get()) < 1e-15);
        assert!(direct.q.get().max_abs_diff(chart.q.get()) < 1e-15);
    }

    #[test]
    fn golden_file_is_complete() {
        let g = goldens();
        assert_eq!(g.iter().map(|e| e.id).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
        let flat = expected_invariants(FLAT_CASE_ID).unwrap();
        assert_eq!(flat.h123_abs, 0.5);
        assert_eq!(flat.k, [0.0; 3]);
        let curved = expected_invariants(CURVED_CASE_ID).unwrap();
        assert_eq!(curved.h123_abs, 0.25);
        assert_eq!(curved.k, [0.1875; 3]);
    }
}
