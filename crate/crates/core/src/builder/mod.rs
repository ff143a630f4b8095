//! Lagrangian immersions from solutions of the sinh-Gordon equation.

pub mod path;
pub mod pipeline;
pub mod sinh_gordon;
pub mod surface;
pub mod t3;

pub use sinh_gordon::{
    profile, sinh_gordon_residual, sinh_gordon_solve, BoundaryKind, BoundarySpec, Grid2, SinhGordonField,
};

pub use surface::{clifford_torus_surface, reconstruct_minimal_surface, CliffordChart, MinimalSurfaceData};
pub use t3::{t3_integrate, t3_verify, T3Diagnostics, T3Gates, T3Report, T3Solution};
pub use path::{profile_immersion, profile_point};
pub use pipeline::{build_t3, BuildConfig, BuildGrid, BuildOutput, BuildReport, BuildTolerances, SurfaceSource};
