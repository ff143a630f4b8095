//! Config-driven construction: sinh-Gordon field, minimal surface, `q`, verification.

use serde::{Deserialize, Serialize};

use crate::builder::sinh_gordon::{sinh_gordon_residual, sinh_gordon_solve, BoundaryKind, BoundarySpec, Grid2, SinhGordonField};
use crate::builder::surface::{clifford_torus_surface, reconstruct_minimal_surface, CliffordChart, MinimalSurfaceData};
use crate::builder::t3::{t3_integrate, t3_verify, T3Gates, T3Report};
use crate::error::{NkError, Result};
use crate::io::SampledImmersion;
use crate::quat::Quaternion;

/// Smallest accepted Lagrangian-residual improvement when every step is halved.
pub const MIN_CONVERGENCE_RATIO: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildGrid {
    pub nu: usize,
    pub nv: usize,
    pub nt: usize,
    pub du: f64,
    pub dv: f64,
    pub dt: f64,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub v0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTolerances {
    /// Newton stopping residual for the sinh-Gordon solve.
    pub newton: f64,
    /// Largest accepted renormalization drift of `q`.
    pub drift: f64,
}

impl Default for BuildTolerances {
    fn default() -> Self {
        BuildTolerances { newton: 1e-10, drift: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceSource {
    /// Integrate the frame equations of the solved field.
    #[default]
    Reconstruct,
    /// Closed-form Clifford torus; requires a zero boundary.
    Clifford,
}

fn unit_q0() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub grid: BuildGrid,
    pub boundary: BoundarySpec,
    #[serde(default = "unit_q0")]
    pub q0: [f64; 4],
    pub t_range: [f64; 2],
    #[serde(default)]
    pub tolerances: BuildTolerances,
    #[serde(default)]
    pub surface: SurfaceSource,
    /// Also build with every step halved and record the residual ratio.
    #[serde(default)]
    pub check_convergence: bool,
    #[serde(default)]
    pub gates: T3Gates,
}

impl BuildConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: BuildConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let bad = |m: String| Err(NkError::InvalidInput(m));
        if g.nu < 5 || g.nv < 5 || g.nt < 5 {
            return bad(format!("grid {}×{}×{} needs at least 5 nodes per axis", g.nu, g.nv, g.nt));
        }
        if !(g.du > 0.0 && g.dv > 0.0 && g.dt > 0.0) {
            return bad("grid steps must be positive".into());
        }
        let [t0, t1] = self.t_range;
        let expect = t0 + (g.nt - 1) as f64 * g.dt;
        if (expect - t1).abs() > 1e-9 * (1.0 + t1.abs()) {
            return bad(format!("t_range [{t0}, {t1}] disagrees with t0 + (nt−1)·dt = {expect}"));
        }
        if !(self.tolerances.newton > 0.0 && self.tolerances.drift > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.surface == SurfaceSource::Clifford && self.boundary.kind != BoundaryKind::Zero {
            return bad("the Clifford surface needs a zero boundary".into());
        }
        Quaternion::from(self.q0).renormalize()?;
        Ok(())
    }

    /// Same domain with every step halved.
    pub fn halved(&self) -> Self {
        let g = self.grid;
        BuildConfig {
            grid: BuildGrid {
                nu: 2 * g.nu - 1,
                nv: 2 * g.nv - 1,
                nt: 2 * g.nt - 1,
                du: g.du / 2.0,
                dv: g.dv / 2.0,
                dt: g.dt / 2.0,
                ..g
            },
            check_convergence: false,
            ..self.clone()
        }
    }

    fn grid2(&self) -> Grid2 {
        let g = self.grid;
        Grid2 { u0: g.u0, v0: g.v0, ..Grid2::new(g.nu, g.nv, g.du, g.dv) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub residual: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub source: SurfaceSource,
    /// Deviation of `(p, α₂, α₃)` from an orthonormal pair orthogonal to `p`.
    pub invariant_defect: f64,
    pub conformality_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub lagrangian: f64,
    pub lagrangian_halved: f64,
    pub ratio: f64,
    pub min_ratio: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub label: String,
    pub config: BuildConfig,
    pub field: FieldSummary,
    pub surface: SurfaceSummary,
    pub verification: T3Report,
    pub drift_pass: bool,
    pub convergence: Option<ConvergenceSummary>,
    pub pass: bool,
}

pub struct BuildOutput {
    pub immersion: SampledImmersion,
    pub report: BuildReport,
}

fn build_once(cfg: &BuildConfig) -> Result<BuildOutput> {
    cfg.validate()?;
    let grid = cfg.grid2();
    let (field, surface): (SinhGordonField, MinimalSurfaceData) = match cfg.surface {
        SurfaceSource::Clifford => {
            (SinhGordonField::constant(grid, 0.0), clifford_torus_surface(grid, CliffordChart::Conformal))
        }
        SurfaceSource::Reconstruct => {
            let field = sinh_gordon_solve(grid, &cfg.boundary, None, cfg.tolerances.newton)?;
            let surface = reconstruct_minimal_surface(&field)?;
            (field, surface)
        }
    };
    let q0 = Quaternion::from(cfg.q0).renormalize()?;
    let sol = t3_integrate(&surface, &field, q0, (cfg.t_range[0], cfg.t_range[1]), cfg.grid.nt)?;
    let verification = t3_verify(&sol, &surface, &cfg.gates)?;
    let label = format!("t3-{}x{}x{}", cfg.grid.nu, cfg.grid.nv, cfg.grid.nt);
    let immersion = sol.to_sampled(&surface, label.clone())?;
    let drift_pass = sol.diagnostics.max_drift <= cfg.tolerances.drift;
    let fold = |f: fn(f64, f64) -> f64, init: f64| field.omega.iter().copied().fold(init, f);
    let report = BuildReport {
        label,
        config: cfg.clone(),
        field: FieldSummary {
            residual: sinh_gordon_residual(&field),
            min: fold(f64::min, f64::INFINITY),
            max: fold(f64::max, f64::NEG_INFINITY),
        },
        surface: SurfaceSummary {
            source: cfg.surface,
            invariant_defect: surface.invariant_defect(),
            conformality_defect: surface.conformality_defect(),
        },
        pass: verification.pass && drift_pass,
        verification,
        drift_pass,
        convergence: None,
    };
    Ok(BuildOutput { immersion, report })
}

/// Builds the immersion described by `cfg` together with its verification report.
pub fn build_t3(cfg: &BuildConfig) -> Result<BuildOutput> {
    let mut out = build_once(cfg)?;
    if cfg.check_convergence {
        let fine = build_once(&cfg.halved())?;
        let coarse = out.report.verification.max_lagrangian;
        let halved = fine.report.verification.max_lagrangian;
        let ratio = coarse / halved.max(f64::MIN_POSITIVE);
        let pass = ratio >= MIN_CONVERGENCE_RATIO;
        out.report.pass &= pass;
        out.report.convergence = Some(ConvergenceSummary {
            lagrangian: coarse,
            lagrangian_halved: halved,
            ratio,
            min_ratio: MIN_CONVERGENCE_RATIO,
            pass,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark() -> BuildConfig {
        BuildConfig {
            grid: BuildGrid { nu: 17, nv: 17, nt: 17, du: 1e-2, dv: 1e-2, dt: 1e-2, u0: 0.0, v0: 0.0 },
            boundary: BoundarySpec::zero(),
            q0: unit_q0(),
            t_range: [0.0, 0.16],
            tolerances: BuildTolerances::default(),
            surface: SurfaceSource::Clifford,
            check_convergence: false,
            gates: T3Gates::default(),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let s = r#"{"grid":{"nu":9,"nv":9,"nt":9,"du":0.01,"dv":0.01,"dt":0.01},
                    "boundary":{"kind":"zero"},"t_range":[0,0.08]}"#;
        let cfg = BuildConfig::from_json(s).unwrap();
        assert_eq!(cfg.q0, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cfg.surface, SurfaceSource::Reconstruct);
        assert_eq!(cfg.tolerances, BuildTolerances::default());
    }

    #[test]
    fn malformed_configs_rejected() {
        let mut cfg = benchmark();
        cfg.t_range = [0.0, 0.2];
        assert!(cfg.validate().is_err());
        let mut cfg = benchmark();
        cfg.boundary = BoundarySpec { kind: BoundaryKind::Sinusoidal, amplitude: 0.1 };
        assert!(cfg.validate().is_err());
        let mut cfg = benchmark();
        cfg.q0 = [0.0; 4];
        assert!(cfg.validate().is_err());
        assert!(BuildConfig::from_json(r#"{"grid":{}}"#).is_err());
        assert!(BuildConfig::from_json(r#"{"grid":{"nu":9,"nv":9,"nt":9,"du":0.01,"dv":0.01,"dt":0.01},"boundary":{"kind":"zero"},"t_range":[0,0.08],"extra":1}"#).is_err());
    }

    #[test]
    fn halving_keeps_domain() {
        let cfg = benchmark();
        let h = cfg.halved();
        assert_eq!(h.grid.nu, 33);
        assert!(((h.grid.nt - 1) as f64 * h.grid.dt - 0.16).abs() < 1e-15);
        assert!(h.validate().is_ok());
    }

    #[test]
    fn clifford_and_reconstruct_agree_for_zero_field() {
        let a = build_t3(&benchmark()).unwrap();
        let mut cfg = benchmark();
        cfg.surface = SurfaceSource::Reconstruct;
        let b = build_t3(&cfg).unwrap();
        assert!(a.report.pass && b.report.pass);
        let gap = a
            .immersion
            .points
            .iter()
            .zip(&b.immersion.points)
            .map(|(x, y)| (x.p.get().max_abs_diff(y.p.get())).max(x.q.get().max_abs_diff(y.q.get())))
            .fold(0.0, f64::max);
        assert!(gap < 1e-9, "{gap:e}");
    }

    #[test]
    fn convergence_recorded() {
        let mut cfg = benchmark();
        cfg.check_convergence = true;
        let out = build_t3(&cfg).unwrap();
        let c = out.report.convergence.unwrap();
        assert!(c.pass && c.ratio >= MIN_CONVERGENCE_RATIO, "{c:?}");
    }
}
