//! Sampled immersions on regular grids and diff-stable JSON output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NkError, Result};
use crate::immersion::{pad3, ImmersionSource, Stencil};
use crate::nkspace::{SurfacePoint, TangentVec};
use crate::quat::{Quaternion, UnitQuaternion};

/// Lagrangian gate for grid data, whose differentials carry discretization error.
pub const GRID_LAGRANGIAN_GATE: f64 = 1e-5;
/// Distance from every face, in nodes, at which the differential uses the five-node stencil.
pub const JACOBIAN_MARGIN: usize = 2;
/// Nodes this far from every face also get five-node stencils for second-order quantities.
pub const SECOND_ORDER_MARGIN: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index, last axis fastest.
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn unflat(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (o, n) in out.iter_mut().zip(&self.shape).rev() {
            *o = k % n;
            k /= n;
        }
        out
    }

    pub fn coords(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(self.origin.iter().zip(&self.spacing)).map(|(i, (o, h))| o + *i as f64 * h).collect()
    }

    /// Node at `x`, if `x` lies on the grid.
    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.shape.len() {
            return None;
        }
        let mut out = Vec::with_capacity(x.len());
        for (a, v) in x.iter().enumerate() {
            let s = (v - self.origin[a]) / self.spacing[a];
            let r = s.round();
            if (s - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.shape[a] {
                return None;
            }
            out.push(r as usize);
        }
        Some(out)
    }

    /// Nodes at least `margin` steps from every face, in flat order.
    pub fn interior(&self, margin: usize) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|k| self.unflat(k))
            .filter(|idx| idx.iter().zip(&self.shape).all(|(i, n)| *i >= margin && i + margin < *n))
            .collect()
    }
}

/// A map known only at grid nodes; derivatives by grid finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledImmersion {
    pub label: String,
    pub grid: GridSpec,
    pub points: Vec<SurfacePoint>,
}

#[derive(Serialize, Deserialize)]
struct SampledFile {
    label: String,
    dim: usize,
    grid: GridSpec,
    points: Vec<[f64; 8]>,
}

impl SampledImmersion {
    pub fn new(label: impl Into<String>, grid: GridSpec, points: Vec<SurfacePoint>) -> Result<Self> {
        let dim = grid.shape.len();
        if !(2..=3).contains(&dim) || grid.spacing.len() != dim || grid.origin.len() != dim {
            return Err(NkError::InvalidInput("grid must be two- or three-dimensional with matching spacing and origin".into()));
        }
        if grid.shape.iter().any(|n| *n < 3) || grid.spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(NkError::InvalidInput("grid needs at least 3 nodes and a positive spacing per axis".into()));
        }
        if points.len() != grid.len() {
            return Err(NkError::InvalidInput(format!("{} points for a grid of {} nodes", points.len(), grid.len())));
        }
        Ok(SampledImmersion { label: label.into(), grid, points })
    }

    pub fn to_json(&self) -> String {
        let file = SampledFile {
            label: self.label.clone(),
            dim: self.grid.shape.len(),
            grid: self.grid.clone(),
            points: self.points.iter().map(|p| p.to_array()).collect(),
        };
        to_json_string(&file)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: SampledFile = serde_json::from_str(s)?;
        if file.dim != file.grid.shape.len() {
            return Err(NkError::InvalidInput(format!("dim {} does not match grid shape", file.dim)));
        }
        let points = file
            .points
            .iter()
            .map(|a| {
                let p = UnitQuaternion::new(Quaternion::new(a[0], a[1], a[2], a[3]))?;
                let q = UnitQuaternion::new(Quaternion::new(a[4], a[5], a[6], a[7]))?;
                Ok(SurfacePoint::new(p, q))
            })
            .collect::<Result<Vec<_>>>()?;
        SampledImmersion::new(file.label, file.grid, points)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    fn node(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.grid.locate(x).ok_or(NkError::OutOfDomain { point: pad3(x) })
    }

    fn at(&self, idx: &[usize]) -> SurfacePoint {
        self.points[self.grid.flat(idx)]
    }

    /// Component derivatives along one axis: fourth order in the interior, second order near faces.
    fn grid_derivative(&self, idx: &[usize], axis: usize) -> (Quaternion, Quaternion) {
        let n = self.grid.shape[axis];
        let h = self.grid.spacing[axis];
        let i = idx[axis];
        let sample = |d: isize| -> (Quaternion, Quaternion) {
            let mut j = idx.to_vec();
            j[axis] = (i as isize + d) as usize;
            let s = self.at(&j);
            (s.p.get(), s.q.get())
        };
        let weights: Vec<(isize, f64)> = if i >= 2 && i + 2 < n {
            vec![(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)]
        } else if i >= 1 && i + 1 < n {
            vec![(-1, -0.5), (1, 0.5)]
        } else if i == 0 {
            vec![(0, -1.5), (1, 2.0), (2, -0.5)]
        } else {
            vec![(0, 1.5), (-1, -2.0), (-2, 0.5)]
        };
        let (mut u, mut v) = (Quaternion::ZERO, Quaternion::ZERO);
        for (d, w) in weights {
            let (a, b) = sample(d);
            u += a * (w / h);
            v += b * (w / h);
        }
        (u, v)
    }
}

impl ImmersionSource for SampledImmersion {
    fn dim(&self) -> usize {
        self.grid.shape.len()
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn point(&self, x: &[f64]) -> Result<SurfacePoint> {
        Ok(self.at(&self.node(x)?))
    }

    fn jacobian(&self, x: &[f64]) -> Result<Vec<TangentVec>> {
        let idx = self.node(x)?;
        let base = self.at(&idx);
        (0..self.dim())
            .map(|a| {
                let (u, v) = self.grid_derivative(&idx, a);
                TangentVec::new(base, u, v)
            })
            .collect()
    }

    /// Steps of two grid spacings with one Richardson stage, which is the fourth-order five-node stencil.
    fn stencil(&self) -> Stencil {
        Stencil { h: self.grid.spacing.iter().map(|h| 2.0 * h).collect(), richardson: true }
    }

    fn lagrangian_gate(&self) -> f64 {
        GRID_LAGRANGIAN_GATE
    }
}

/// Writes floats with 17 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes with [`FixedDigits`].
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser).expect("serializing to memory does not fail");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Formats a float exactly as [`to_json_string`] does.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::example;

    fn sample_catalog(k: usize, n: usize, h: f64) -> SampledImmersion {
        let m = example(k).unwrap().map;
        let grid = GridSpec { shape: vec![n; 3], spacing: vec![h; 3], origin: vec![-0.5 * h * (n - 1) as f64; 3] };
        let points = (0..grid.len()).map(|k| m.point(&grid.coords(&grid.unflat(k))).unwrap()).collect();
        SampledImmersion::new(format!("{}-sampled", m.label), grid, points).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let g = GridSpec { shape: vec![3, 4, 5], spacing: vec![0.1, 0.2, 0.3], origin: vec![0.0, 1.0, -1.0] };
        for k in 0..g.len() {
            let idx = g.unflat(k);
            assert_eq!(g.flat(&idx), k);
            assert_eq!(g.locate(&g.coords(&idx)).unwrap(), idx);
        }
        assert!(g.locate(&[0.05, 1.0, -1.0]).is_none());
        assert_eq!(g.interior(1).len(), 1 * 2 * 3);
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let s = sample_catalog(7, 5, 0.05);
        let back = SampledImmersion::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn fixed_digits() {
        assert_eq!(to_json_string(&[0.1f64, 1.0]), "[1.0000000000000001e-1,1.0000000000000000e0]");
        let v: Vec<f64> = serde_json::from_str(&to_json_string(&[1.0f64 / 3.0])).unwrap();
        assert_eq!(v[0], 1.0 / 3.0);
    }

    #[test]
    fn grid_jacobian_is_fourth_order() {
        let m = example(8).unwrap().map;
        let err = |h: f64| {
            let s = sample_catalog(8, 9, h);
            let x = s.grid.coords(&[4, 4, 4]);
            let (a, b) = (s.jacobian(&x).unwrap(), m.jacobian(&x).unwrap());
            a.iter().zip(&b).map(|(u, v)| u.max_abs_diff(v)).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn sampled_invariants_match_closed_form() {
        let s = sample_catalog(7, 11, 0.01);
        let x = s.grid.coords(&[5, 5, 5]);
        let row = crate::invariants::invariant_row(&s, &x).unwrap();
        assert!((row.h123.abs() - 0.25).abs() < 1e-6);
        assert!(row.k.iter().all(|k| (k - 3.0 / 16.0).abs() < 1e-5), "{:?}", row.k);
    }
}
