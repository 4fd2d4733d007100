use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{central_diff, cutoff_eta, product_jet, Cutoff, FdCrossCheck};
use crate::norms::{truncated_norm_scan, Exclusion, NormReport, ScanRegion, ScanSpec, ScanVerdict};
use crate::{Error, Result};

/// `u = r^α sin(αθ + (α-1)θ0) η_R` on `{|θ| < θ0}` with `α = π/(2θ0) + 1`, `b = (-1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WedgeExample {
    pub theta0: f64,
    pub alpha: f64,
    pub radius: f64,
    pub cutoff: Cutoff,
}

impl WedgeExample {
    pub fn new(theta0: f64, radius: f64) -> Result<Self> {
        if !(theta0 > PI / 2.0 && theta0 < PI) {
            return Err(Error::Precondition(format!("θ0 = {theta0} must lie in (π/2, π)")));
        }
        Ok(Self { theta0, alpha: PI / (2.0 * theta0) + 1.0, radius, cutoff: cutoff_eta(radius)? })
    }

    /// `2/(2 - α)`
    pub fn critical_p(&self) -> f64 {
        2.0 / (2.0 - self.alpha)
    }

    /// Exponent of `τ` in the truncated `‖D²u‖_p^p`: `p(α - 2) + 2`.
    pub fn scan_exponent(&self, p: f64) -> f64 {
        p * (self.alpha - 2.0) + 2.0
    }

    fn phase(&self) -> f64 {
        (self.alpha - 1.0) * self.theta0
    }

    /// Jet of the harmonic factor `v = Im{e^{i(α-1)θ0} z^α}`.
    fn harmonic_jet(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
        let (a, c) = (self.alpha, self.phase());
        let r = x.hypot(y);
        let th = y.atan2(x);
        let v = r.powf(a) * (a * th + c).sin();
        let s1 = a * r.powf(a - 1.0);
        let dv = [s1 * ((a - 1.0) * th + c).sin(), s1 * ((a - 1.0) * th + c).cos()];
        let s2 = a * (a - 1.0) * r.powf(a - 2.0);
        let vxx = s2 * ((a - 2.0) * th + c).sin();
        let vxy = s2 * ((a - 2.0) * th + c).cos();
        (v, dv, [vxx, vxy, -vxx])
    }

    pub fn jet(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
        let (v, dv, d2v) = self.harmonic_jet(x, y);
        let (de, d2e) = self.cutoff.derivatives(x, y);
        product_jet(v, dv, d2v, self.cutoff.value(x, y), de, d2e)
    }

    pub fn u(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).0
    }

    /// `|D²u|` (Frobenius).
    pub fn hessian_norm(&self, x: f64, y: f64) -> f64 {
        let h = self.jet(x, y).2;
        (h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2]).sqrt()
    }

    /// `Δu` of the harmonic factor from the polar form `u_rr + u_r/r + u_θθ/r²`, each term
    /// evaluated separately.
    pub fn polar_laplacian(&self, r: f64, theta: f64) -> f64 {
        let (a, c) = (self.alpha, self.phase());
        let s = (a * theta + c).sin();
        let urr = a * (a - 1.0) * r.powf(a - 2.0) * s;
        let ur = a * r.powf(a - 1.0) * s;
        let utt = -a * a * r.powf(a) * s;
        urr + ur / r + utt / (r * r)
    }

    /// `Bu = -∂u/∂x` in the closed form `-α r^{α-1} sin((α-1)(θ0 + θ))`.
    pub fn face_bu(&self, r: f64, theta: f64) -> f64 {
        -self.alpha * r.powf(self.alpha - 1.0) * ((self.alpha - 1.0) * (self.theta0 + theta)).sin()
    }

    pub fn fd_crosscheck(&self, samples: usize, seed: u64) -> FdCrossCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-3 * self.radius;
        let tolerance = (10.0 * h * h).max(1e-7);
        let ux = |x: f64, y: f64| central_diff(&|a, b| self.u(a, b), x, y, 0, h);
        let uy = |x: f64, y: f64| central_diff(&|a, b| self.u(a, b), x, y, 1, h);
        let mut max_error = 0.0f64;
        let mut worst = String::new();
        for _ in 0..samples {
            let mut r = rng.gen_range(0.2..0.9) * self.radius;
            if (r - 0.5 * self.radius).abs() < 5.0 * h {
                r += 10.0 * h;
            }
            let th = rng.gen_range(-0.95..0.95) * self.theta0;
            let (x, y) = (r * th.cos(), r * th.sin());
            let (_, g, hs) = self.jet(x, y);
            for (name, a, fd) in [
                ("u_x", g[0], ux(x, y)),
                ("u_xx", hs[0], central_diff(&ux, x, y, 0, h)),
                ("u_xy", hs[1], central_diff(&ux, x, y, 1, h)),
                ("u_yy", hs[2], central_diff(&uy, x, y, 1, h)),
            ] {
                let e = (a - fd).abs();
                if e > max_error {
                    max_error = e;
                    worst = format!("{name} at r = {r:.4}, θ = {th:.4}");
                }
            }
        }
        FdCrossCheck { samples, step: h, max_error, tolerance, worst }
    }
}

/// Harmonicity and face identities at `samples` points of `B_{R/2}`, then the truncated
/// `‖D²u‖_p` scan about the tip for each `p`.
pub fn certify_wedge(ex: &WedgeExample, ps: &[f64], samples: usize, levels: (u32, u32)) -> Result<NormReport> {
    let mut report = NormReport::new(format!("wedge certificate θ0 = {}", ex.theta0));
    report.meta("theta0", ex.theta0);
    report.meta("alpha0", ex.alpha);
    report.meta("critical_p", ex.critical_p());
    report.meta("R", ex.radius);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let half = 0.5 * ex.radius;
    let mut harm = 0.0f64;
    let mut face = 0.0f64;
    let mut face_closed = 0.0f64;
    let h = 1e-3 * ex.radius;
    for _ in 0..samples {
        let r = rng.gen_range(1e-3..1.0) * half;
        let th = rng.gen_range(-1.0..1.0) * ex.theta0;
        harm = harm.max(ex.polar_laplacian(r, th).abs());
        let (_, _, hs) = ex.jet(r * th.cos(), r * th.sin());
        harm = harm.max((hs[0] + hs[2]).abs());
        let rf = rng.gen_range(1e-3..1.0) * (half - 2.0 * h);
        for side in [-1.0, 1.0] {
            let t = side * ex.theta0;
            let (x, y) = (rf * t.cos(), rf * t.sin());
            let (_, g, _) = ex.jet(x, y);
            face = face.max(g[0].abs());
            face_closed = face_closed.max(ex.face_bu(rf, t).abs());
        }
    }
    report.push("harmonicity_residual", harm, format!("{samples} samples"));
    report.push("face_residual", face, format!("{samples} samples per face"));
    report.push("face_residual_closed_form", face_closed, format!("{samples} samples per face"));
    report.verdict("harmonic", harm <= 1e-10, format!("{harm:.3e}"));
    report.verdict("faces_Bu_zero", face.max(face_closed) <= 1e-10, format!("{face:.3e}, closed form {face_closed:.3e}"));
    let fd = ex.fd_crosscheck(100, 31);
    report.push("fd_max_error", fd.max_error, format!("step {:.1e}", fd.step));
    report.verdict("fd_crosscheck", fd.pass(), format!("{:.3e} ≤ {:.3e} ({})", fd.max_error, fd.tolerance, fd.worst));
    let pc = ex.critical_p();
    for &p in ps {
        let mut spec = ScanSpec::new(ScanRegion::Wedge { theta0: ex.theta0 }, Exclusion::Disk, ex.radius, p);
        spec.radial_breaks = vec![half];
        spec.levels = levels;
        let res = truncated_norm_scan(&|x, y| ex.hessian_norm(x, y), &spec)?;
        let n = res.values.len();
        report.push(format!("d2u_p{p}.value"), res.values[n - 1], format!("τ = {:.3e}", res.taus[n - 1]));
        report.push(format!("d2u_p{p}.slope"), res.fitted_slope, "tail fit");
        let expected = ex.scan_exponent(p);
        let should_diverge = p >= pc;
        let slope_ok = if expected < 0.0 { (res.fitted_slope - expected).abs() <= 0.1 } else { res.fitted_slope >= -0.05 };
        let pass = res.verdict.is_divergent() == should_diverge && slope_ok;
        report.verdict(
            format!("d2u_p{p}"),
            pass,
            format!(
                "{:?}, slope {:.4}, analytic {:.4}, {} expected",
                res.verdict,
                res.fitted_slope,
                expected,
                if should_diverge { "divergence" } else { "convergence" }
            ),
        );
        if res.verdict == ScanVerdict::DivergentLog {
            report.warn(format!("p = {p}: logarithmic divergence"));
        }
    }
    Ok(report)
}
