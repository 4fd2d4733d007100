//! Certification of the two sharpness examples: the cusp domain `{x > |y|^{1+ε}}` and the
//! wedge `{|θ| < θ0}`.

mod cusp;
mod wedge;

use serde::Serialize;

pub use cusp::{certify_cusp, cusp_window, CuspExample, CuspWindow};
pub use wedge::{certify_wedge, WedgeExample};

use crate::extension::quintic_ramp;

/// Radial cutoff `η(r) = 1 - S(2r/R - 1)` with the quintic ramp `S`: 1 on `B_{R/2}`,
/// 0 outside `B_R`, `|Dη| ≤ 15/(4R)` and `|D²η| ≤ 40/(√3 R²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub radius: f64,
}

pub fn cutoff_eta(radius: f64) -> crate::Result<Cutoff> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!("cutoff radius {radius} must be positive")));
    }
    Ok(Cutoff { radius })
}

impl Cutoff {
    fn t(&self, r: f64) -> f64 {
        2.0 * r / self.radius - 1.0
    }

    pub fn value_at(&self, r: f64) -> f64 {
        1.0 - quintic_ramp(self.t(r))
    }

    /// `dη/dr`
    pub fn d1(&self, r: f64) -> f64 {
        let t = self.t(r);
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        -30.0 * t * t * (1.0 - t) * (1.0 - t) * 2.0 / self.radius
    }

    /// `d²η/dr²`
    pub fn d2(&self, r: f64) -> f64 {
        let t = self.t(r);
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) * 4.0 / (self.radius * self.radius)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.value_at(x.hypot(y))
    }

    /// Cartesian gradient and Hessian `(η_xx, η_xy, η_yy)`.
    pub fn derivatives(&self, x: f64, y: f64) -> ([f64; 2], [f64; 3]) {
        let r = x.hypot(y);
        let (d1, d2) = (self.d1(r), self.d2(r));
        if d1 == 0.0 && d2 == 0.0 {
            return ([0.0; 2], [0.0; 3]);
        }
        let (ex, ey) = (x / r, y / r);
        let grad = [d1 * ex, d1 * ey];
        let hess = [
            d2 * ex * ex + d1 * (1.0 - ex * ex) / r,
            d2 * ex * ey - d1 * ex * ey / r,
            d2 * ey * ey + d1 * (1.0 - ey * ey) / r,
        ];
        (grad, hess)
    }
}

/// Product rule for `u = v η`: returns `(u, Du, D²u)` from the jets of `v` and `η`.
pub(crate) fn product_jet(v: f64, dv: [f64; 2], d2v: [f64; 3], eta: f64, de: [f64; 2], d2e: [f64; 3]) -> (f64, [f64; 2], [f64; 3]) {
    (
        v * eta,
        [dv[0] * eta + v * de[0], dv[1] * eta + v * de[1]],
        [
            d2v[0] * eta + 2.0 * dv[0] * de[0] + v * d2e[0],
            d2v[1] * eta + dv[0] * de[1] + dv[1] * de[0] + v * d2e[1],
            d2v[2] * eta + 2.0 * dv[1] * de[1] + v * d2e[2],
        ],
    )
}

/// Fourth-order central difference of `f` along one axis.
pub(crate) fn central_diff(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, axis: usize, h: f64) -> f64 {
    let at = |s: f64| if axis == 0 { f(x + s, y) } else { f(x, y + s) };
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

/// Largest discrepancy between analytic derivatives and central differences, with the
/// tolerance `max(1e-7, 10 h²)` it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdCrossCheck {
    pub samples: usize,
    pub step: f64,
    pub max_error: f64,
    pub tolerance: f64,
    pub worst: String,
}

impl FdCrossCheck {
    pub fn pass(&self) -> bool {
        self.max_error <= self.tolerance
    }
}
