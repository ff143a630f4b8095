//! A continuous evaluator of the construction for the one-dimensional sinh-Gordon profile.

use nalgebra::Matrix4;

use super::surface::{conformal_factor, frame_generator, initial_frame};
use super::t3::t3_generators;
use crate::immersion::{DomainBox, ImmersionMap};
use crate::nkspace::SurfacePoint;
use crate::quat::Quaternion;

fn col(f: &Matrix4<f64>, c: usize) -> Quaternion {
    Quaternion::new(f[(0, c)], f[(1, c)], f[(2, c)], f[(3, c)])
}

fn alphas(f: &Matrix4<f64>, omega: f64) -> (Quaternion, Quaternion) {
    let l = conformal_factor(omega).sqrt();
    let pbar = col(f, 0).conj();
    (pbar * col(f, 1) * l, pbar * col(f, 2) * l)
}

#[derive(Clone, Copy)]
struct State {
    f: Matrix4<f64>,
    w: [f64; 2],
    q: Quaternion,
}

impl State {
    fn axpy(&self, h: f64, d: &State) -> State {
        State { f: self.f + d.f * h, w: [self.w[0] + h * d.w[0], self.w[1] + h * d.w[1]], q: self.q + d.q * h }
    }
}

fn rk4<F: Fn(&State) -> State>(mut y: State, len: f64, steps: usize, rhs: F) -> State {
    let h = len / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(&y);
        let k2 = rhs(&y.axpy(h / 2.0, &k1));
        let k3 = rhs(&y.axpy(h / 2.0, &k2));
        let k4 = rhs(&y.axpy(h, &k3));
        y = State {
            f: y.f + (k1.f + k2.f * 2.0 + k3.f * 2.0 + k4.f) * (h / 6.0),
            w: std::array::from_fn(|m| y.w[m] + h / 6.0 * (k1.w[m] + 2.0 * k2.w[m] + 2.0 * k3.w[m] + k4.w[m])),
            q: y.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (h / 6.0),
        };
    }
    y
}

/// `(p, q)` at `(u, v, t)` for `ω(u)` solving `ω'' = −8 sinh ω`, `ω(0) = ω₀`, `ω'(0) = 0`, with `q(0,0,0) = 1`.
pub fn profile_point(omega0: f64, steps: usize, x: &[f64]) -> (Quaternion, Quaternion) {
    let y0 = State { f: initial_frame(), w: [omega0, 0.0], q: Quaternion::ONE };
    let along_u = rk4(y0, x[0], steps, |s| {
        let w = [s.w[0], s.w[1], 0.0];
        let (a2, a3) = alphas(&s.f, w[0]);
        State { f: s.f * frame_generator(0, &w), w: [s.w[1], -8.0 * s.w[0].sinh()], q: s.q * t3_generators(a2, a3, &w)[0] }
    });
    let w = [along_u.w[0], along_u.w[1], 0.0];
    let along_v = rk4(along_u, x[1], steps, |s| {
        let (a2, a3) = alphas(&s.f, w[0]);
        State { f: s.f * frame_generator(1, &w), w: [0.0, 0.0], q: s.q * t3_generators(a2, a3, &w)[1] }
    });
    let (a2, a3) = alphas(&along_v.f, w[0]);
    let z = t3_generators(a2, a3, &w)[2];
    (col(&along_v.f, 0), along_v.q * Quaternion::exp_im([x[2] * z.x, x[2] * z.y, x[2] * z.z]))
}

/// The construction over `[−0.5, 0.5]² × [−1, 1]` as a map with finite-difference differentials.
pub fn profile_immersion(omega0: f64, steps: usize) -> ImmersionMap {
    let domain = DomainBox { lo: vec![-0.5, -0.5, -1.0], hi: vec![0.5, 0.5, 1.0] };
    ImmersionMap::new(format!("t3-profile-{omega0}"), 3, domain, move |x| {
        let (p, q) = profile_point(omega0, steps, x);
        SurfacePoint::from_quaternions(p / p.norm(), q / q.norm())
    })
    .with_sample_box(DomainBox { lo: vec![-0.3, -0.3, -0.6], hi: vec![0.3, 0.3, 0.6] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{is_lagrangian, rank_dp, ImmersionSource};
    use crate::invariants::{angle_derivative_check, angle_functions, angle_sum_defect, distance_to_angle, nabla_ab_residual};

    const X: [f64; 3] = [0.2, 0.15, 0.1];

    #[test]
    fn zero_profile_is_conformal_clifford() {
        let (p, _) = profile_point(0.0, 64, &X);
        let (c, _, _) = crate::builder::surface::clifford_point(crate::builder::CliffordChart::Conformal, X[0], X[1]);
        assert!(p.max_abs_diff(c) < 1e-9);
    }

    #[test]
    fn profile_construction_is_lagrangian() {
        let f = profile_immersion(0.3, 64);
        assert!(is_lagrangian(&f, &X).unwrap() < 1e-8);
        let ad = angle_functions(&f, &X).unwrap();
        assert!(distance_to_angle(&ad.theta, std::f64::consts::FRAC_PI_3) < 1e-7);
        assert!(angle_sum_defect(&ad.theta) < 1e-7);
        let (rank, _) = rank_dp(&f.jacobian(&X).unwrap());
        assert_eq!(rank, 2);
    }

    #[test]
    fn angles_vary() {
        let f = profile_immersion(0.3, 64);
        let a = angle_functions(&f, &[0.0, 0.0, 0.0]).unwrap().theta;
        let b = angle_functions(&f, &[0.3, 0.0, 0.0]).unwrap().theta;
        let spread = (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
        assert!(spread > 1e-2, "{a:?} {b:?}");
    }

    #[test]
    fn structure_equations_hold() {
        let f = profile_immersion(0.3, 64);
        let d = angle_derivative_check(&f, &X).unwrap();
        assert!(d.angle_gradient < 1e-4 && d.connection_law < 1e-4, "{d:?}");
        let n = nabla_ab_residual(&f, &X).unwrap();
        assert!(n.max() < 1e-4, "{n:?}");
    }
}
