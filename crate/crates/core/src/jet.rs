//! First-order forward-mode jets in up to three chart variables.
//!
//! Catalog maps are written once over [`QJet`] so that their differentials are
//! exact rather than finite-difference approximations.

use std::ops::{Add, Mul, Neg, Sub};

use crate::quat::Quaternion;

/// A scalar together with its partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 3],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, d: [0.0; 3] }
    }

    /// The `k`-th coordinate function evaluated at `v`.
    pub fn variable(v: f64, k: usize) -> Self {
        let mut d = [0.0; 3];
        d[k] = 1.0;
        Jet { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Jet {
        Jet { v, d: self.d.map(|x| x * dv) }
    }

    pub fn sin(self) -> Jet {
        self.chain(self.v.sin(), self.v.cos())
    }

    pub fn cos(self) -> Jet {
        self.chain(self.v.cos(), -self.v.sin())
    }

    pub fn scale(self, s: f64) -> Jet {
        Jet { v: self.v * s, d: self.d.map(|x| x * s) }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]] }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut d = [0.0; 3];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = self.d[k] * o.v + self.v * o.d[k];
        }
        Jet { v: self.v * o.v, d }
    }
}

/// A quaternion-valued jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QJet(pub [Jet; 4]);

impl QJet {
    pub fn constant(q: Quaternion) -> Self {
        QJet(q.to_array().map(Jet::constant))
    }

    pub fn value(&self) -> Quaternion {
        Quaternion::from(self.0.map(|c| c.v))
    }

    pub fn partial(&self, k: usize) -> Quaternion {
        Quaternion::from(self.0.map(|c| c.d[k]))
    }

    pub fn conj(self) -> QJet {
        let [w, x, y, z] = self.0;
        QJet([w, -x, -y, -z])
    }

    pub fn scale(self, s: f64) -> QJet {
        QJet(self.0.map(|c| c.scale(s)))
    }

    /// `exp` of an imaginary quaternion jet with components `v`.
    pub fn exp_im(v: [Jet; 3]) -> QJet {
        let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        let (c, sc, dc, dsc) = cos_sinc_sqrt(s.v);
        let c = s.chain(c, dc);
        let sc = s.chain(sc, dsc);
        QJet([c, sc * v[0], sc * v[1], sc * v[2]])
    }
}

/// `cos √s`, `sin √s / √s` and their derivatives in `s`.
pub(crate) fn cos_sinc_sqrt(s: f64) -> (f64, f64, f64, f64) {
    if s < 1e-6 {
        let c = 1.0 - s / 2.0 + s * s / 24.0;
        let sc = 1.0 - s / 6.0 + s * s / 120.0;
        (c, sc, -0.5 + s / 12.0, -1.0 / 6.0 + s / 60.0)
    } else {
        let r = s.sqrt();
        let (c, sc) = (r.cos(), r.sin() / r);
        (c, sc, -sc / 2.0, (c - sc) / (2.0 * s))
    }
}

/// Derivative of `v ↦ exp(v)` for imaginary `v`, in direction `d`.
pub fn dexp_im(v: [f64; 3], d: [f64; 3]) -> Quaternion {
    let s = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let ds = 2.0 * (v[0] * d[0] + v[1] * d[1] + v[2] * d[2]);
    let (_, sc, dc, dsc) = cos_sinc_sqrt(s);
    Quaternion::new(
        dc * ds,
        dsc * ds * v[0] + sc * d[0],
        dsc * ds * v[1] + sc * d[1],
        dsc * ds * v[2] + sc * d[2],
    )
}

impl Mul for QJet {
    type Output = QJet;
    fn mul(self, b: QJet) -> QJet {
        let [aw, ax, ay, az] = self.0;
        let [bw, bx, by, bz] = b.0;
        QJet([
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ])
    }
}

impl Add for QJet {
    type Output = QJet;
    fn add(self, o: QJet) -> QJet {
        QJet([0, 1, 2, 3].map(|k| self.0[k] + o.0[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_jet_matches_difference_quotient() {
        let x = [0.3, -0.7, 0.4];
        let jet = QJet::exp_im([0, 1, 2].map(|k| Jet::variable(x[k], k)));
        assert!(jet.value().max_abs_diff(Quaternion::exp_im(x)) < 1e-15);
        for k in 0..3 {
            let h = 1e-6;
            let (mut a, mut b) = (x, x);
            a[k] += h;
            b[k] -= h;
            let fd = (Quaternion::exp_im(a) - Quaternion::exp_im(b)) / (2.0 * h);
            assert!(jet.partial(k).max_abs_diff(fd) < 1e-9);
            let mut e = [0.0; 3];
            e[k] = 1.0;
            assert!(dexp_im(x, e).max_abs_diff(jet.partial(k)) < 1e-15);
        }
    }

    #[test]
    fn exp_jet_near_origin() {
        let jet = QJet::exp_im([0, 1, 2].map(|k| Jet::variable(1e-9, k)));
        assert!(jet.partial(0).max_abs_diff(Quaternion::I) < 1e-8);
        assert!(dexp_im([0.0; 3], [0.0, 0.0, 1.0]).max_abs_diff(Quaternion::K) < 1e-15);
    }

    #[test]
    fn product_rule() {
        let a = Jet::variable(0.5, 0);
        let b = Jet::variable(2.0, 1).sin();
        let c = a * b;
        assert!((c.d[0] - 2.0f64.sin()).abs() < 1e-15);
        assert!((c.d[1] - 0.5 * 2.0f64.cos()).abs() < 1e-15);
    }
}
