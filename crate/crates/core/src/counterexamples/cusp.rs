use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{central_diff, cutoff_eta, product_jet, Cutoff, FdCrossCheck};
use crate::norms::{truncated_norm_scan, Exclusion, NormReport, ScanRegion, ScanResult, ScanSpec, ScanVerdict};
use crate::{Error, Result};

/// Admissible `β`: `lower < β ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CuspWindow {
    pub lower: f64,
    pub upper: f64,
}

impl CuspWindow {
    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lower && beta <= self.upper
    }
}

/// `max{1/2 - (2+ε)/p, 1 - ε + (2+ε)/p} < β ≤ 1 - (2+ε)/p`, or `None` when empty.
pub fn cusp_window(p: f64, eps: f64) -> Result<Option<CuspWindow>> {
    if !(p > 1.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("need p > 1 and ε > 0, got p = {p}, ε = {eps}")));
    }
    let k = (2.0 + eps) / p;
    let lower = (0.5 - k).max(1.0 - eps + k);
    let upper = 1.0 - k;
    Ok((lower < upper).then_some(CuspWindow { lower, upper }))
}

/// `u = (x|y|^β + y) η_R` on `{x > |y|^{1+ε}}` with `b = (-1, |y|^β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CuspExample {
    pub p: f64,
    pub eps: f64,
    pub beta: f64,
    pub radius: f64,
    pub cutoff: Cutoff,
}

fn sgn(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else if y < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl CuspExample {
    pub fn new(p: f64, eps: f64, beta: f64, radius: f64) -> Result<Self> {
        let window = cusp_window(p, eps)?;
        match window {
            Some(w) if w.contains(beta) => Ok(Self { p, eps, beta, radius, cutoff: cutoff_eta(radius)? }),
            _ => Err(Error::Precondition(format!("β = {beta} outside the admissible window {window:?} for p = {p}, ε = {eps}"))),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x > y.abs().powf(1.0 + self.eps)
    }

    /// `(u, Du, (u_xx, u_xy, u_yy))`
    pub fn jet(&self, x: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
        let b = self.beta;
        let ay = y.abs();
        let yb = ay.powf(b);
        let v = x * yb + y;
        let dv = [yb, x * b * ay.powf(b - 1.0) * sgn(y) + 1.0];
        let d2v = [0.0, b * ay.powf(b - 1.0) * sgn(y), x * b * (b - 1.0) * ay.powf(b - 2.0)];
        let (de, d2e) = self.cutoff.derivatives(x, y);
        product_jet(v, dv, d2v, self.cutoff.value(x, y), de, d2e)
    }

    pub fn u(&self, x: f64, y: f64) -> f64 {
        (x * y.abs().powf(self.beta) + y) * self.cutoff.value(x, y)
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        let (_, _, h) = self.jet(x, y);
        h[0] + h[2]
    }

    pub fn d12(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).2[1]
    }

    pub fn b(&self, y: f64) -> [f64; 2] {
        [-1.0, y.abs().powf(self.beta)]
    }

    /// `Bu = b·Du`
    pub fn bu(&self, x: f64, y: f64) -> f64 {
        let (_, g, _) = self.jet(x, y);
        -g[0] + y.abs().powf(self.beta) * g[1]
    }

    /// `D(Bu)`, using `B(x|y|^β + y) = βx|y|^{2β-1} sign y` so the singular terms cancel exactly.
    pub fn grad_bu(&self, x: f64, y: f64) -> [f64; 2] {
        let b = self.beta;
        let ay = y.abs();
        let s = sgn(y);
        let v = x * ay.powf(b) + y;
        let dv = [ay.powf(b), x * b * ay.powf(b - 1.0) * s + 1.0];
        let bv = b * x * ay.powf(2.0 * b - 1.0) * s;
        let dbv = [b * ay.powf(2.0 * b - 1.0) * s, x * b * (2.0 * b - 1.0) * ay.powf(2.0 * b - 2.0)];
        let eta = self.cutoff.value(x, y);
        let (de, d2e) = self.cutoff.derivatives(x, y);
        let beta_eta = -de[0] + ay.powf(b) * de[1];
        // η is constant near the tip, so β|y|^{β-1} η_y stays bounded.
        let dbeta_eta = [
            -d2e[0] + ay.powf(b) * d2e[1],
            -d2e[1] + if de[1] == 0.0 { 0.0 } else { b * ay.powf(b - 1.0) * s * de[1] } + ay.powf(b) * d2e[2],
        ];
        [
            de[0] * bv + eta * dbv[0] + dv[0] * beta_eta + v * dbeta_eta[0],
            de[1] * bv + eta * dbv[1] + dv[1] * beta_eta + v * dbeta_eta[1],
        ]
    }

    /// Extension of `b_2` off the boundary, `(r / √(1 + |y|^{2ε}))^β`; equals `|y|^β` on
    /// `x = |y|^{1+ε}` and is singular only at the tip.
    pub fn b2_extension(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let r = x.hypot(y);
        let ay = y.abs();
        let w = 1.0 + ay.powf(2.0 * self.eps);
        let q = w.powf(-0.5);
        let s = r * q;
        let ds = [
            x / r * q,
            y / r * q - r * w.powf(-1.5) * self.eps * ay.powf(2.0 * self.eps - 1.0) * sgn(y),
        ];
        let b = self.beta;
        let f = b * s.powf(b - 1.0);
        (s.powf(b), [f * ds[0], f * ds[1]])
    }

    /// Analytic `|y|`-exponents of `‖·‖_p^p` near the axis, `∫_τ |y|^{p·γ} dy ∝ τ^{pγ+1}`.
    pub fn d12_exponent(&self) -> f64 {
        self.p * (self.beta - 1.0) + 1.0
    }

    pub fn laplacian_exponent(&self) -> f64 {
        self.p * (self.beta - 2.0) + 1.0
    }

    /// Central-difference oracle on random points with `|y| ≥ 0.2R`, away from the singular
    /// axis and from the radii where the `C²` cutoff changes formula.
    pub fn fd_crosscheck(&self, samples: usize, seed: u64) -> FdCrossCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-3 * self.radius;
        let tolerance = (10.0 * h * h).max(1e-7);
        let mut max_error = 0.0f64;
        let mut worst = String::new();
        let ux = |x: f64, y: f64| central_diff(&|a, b| self.u(a, b), x, y, 0, h);
        let uy = |x: f64, y: f64| central_diff(&|a, b| self.u(a, b), x, y, 1, h);
        let bu = |x: f64, y: f64| -ux(x, y) + y.abs().powf(self.beta) * uy(x, y);
        let mut taken = 0;
        while taken < samples {
            let y = rng.gen_range(0.2..0.6) * self.radius * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let x = rng.gen_range(0.0..0.9) * self.radius;
            let r = x.hypot(y);
            if !self.contains(x - 5.0 * h, y) || r > 0.9 * self.radius || (r - 0.5 * self.radius).abs() < 5.0 * h {
                continue;
            }
            taken += 1;
            let uxx = central_diff(&ux, x, y, 0, h);
            let uyy = central_diff(&uy, x, y, 1, h);
            let uxy = central_diff(&ux, x, y, 1, h);
            let dbu = [central_diff(&bu, x, y, 0, h), central_diff(&bu, x, y, 1, h)];
            let g = self.grad_bu(x, y);
            for (name, a, fd) in [
                ("laplacian", self.laplacian(x, y), uxx + uyy),
                ("d12", self.d12(x, y), uxy),
                ("Bu", self.bu(x, y), bu(x, y)),
                ("dx Bu", g[0], dbu[0]),
                ("dy Bu", g[1], dbu[1]),
            ] {
                let e = (a - fd).abs();
                if e > max_error {
                    max_error = e;
                    worst = format!("{name} at ({x:.4}, {y:.4})");
                }
            }
        }
        FdCrossCheck { samples, step: h, max_error, tolerance, worst }
    }
}

fn scan(f: &(dyn Fn(f64, f64) -> f64 + Sync), ex: &CuspExample, exclusion: Exclusion, p: f64, levels: (u32, u32)) -> Result<ScanResult> {
    let mut spec = ScanSpec::new(ScanRegion::Cusp { eps: ex.eps }, exclusion, ex.radius, p);
    spec.radial_breaks = vec![0.5 * ex.radius];
    spec.levels = levels;
    truncated_norm_scan(f, &spec)
}

fn push_scan(report: &mut NormReport, name: &str, res: &ScanResult) {
    let n = res.values.len();
    report.push(format!("{name}.value"), res.values[n - 1], format!("τ = {:.3e}", res.taus[n - 1]));
    report.push(format!("{name}.slope"), res.fitted_slope, "tail fit");
    report.push(format!("{name}.last_increment"), res.last_increment, "relative");
}

/// Verdicts for `u ∈ L_p`, `Δu ∈ L_p`, `Bu ∈ W¹_p`, `D_12 u ∉ L_p` (strip scans about `y = 0`)
/// and the `W¹_q` regularity of `b` at `q = p` and `q = 3`.
pub fn certify_cusp(ex: &CuspExample, levels: (u32, u32)) -> Result<NormReport> {
    let p = ex.p;
    let mut report = NormReport::new(format!("cusp certificate p = {p}, ε = {}, β = {}", ex.eps, ex.beta));
    report.meta("p", p);
    report.meta("eps", ex.eps);
    report.meta("beta", ex.beta);
    report.meta("R", ex.radius);
    report.meta("window", cusp_window(p, ex.eps)?);
    report.meta("d12_exponent", ex.d12_exponent());
    report.meta("laplacian_exponent", ex.laplacian_exponent());

    let u = scan(&|x, y| ex.u(x, y), ex, Exclusion::Strip, p, levels)?;
    push_scan(&mut report, "u", &u);
    report.verdict("u_in_Lp", u.verdict == ScanVerdict::Convergent, format!("{:?}, slope {:.4}", u.verdict, u.fitted_slope));

    let lap = scan(&|x, y| ex.laplacian(x, y), ex, Exclusion::Strip, p, levels)?;
    push_scan(&mut report, "laplacian", &lap);
    report.verdict(
        "laplacian_in_Lp",
        lap.verdict == ScanVerdict::Convergent,
        format!("{:?}, slope {:.4}, analytic exponent p(β-2)+1 = {:.4}", lap.verdict, lap.fitted_slope, ex.laplacian_exponent()),
    );

    let bu = scan(
        &|x, y| {
            let g = ex.grad_bu(x, y);
            (ex.bu(x, y).abs().powf(p) + g[0].hypot(g[1]).powf(p)).powf(1.0 / p)
        },
        ex,
        Exclusion::Strip,
        p,
        levels,
    )?;
    push_scan(&mut report, "Bu_w1p", &bu);
    report.verdict(
        "Bu_in_W1p",
        bu.verdict == ScanVerdict::Convergent,
        format!(
            "{:?}, slope {:.4}, cutoff term η_x D_2 u exponent p(β-1)+1 = {:.4}",
            bu.verdict,
            bu.fitted_slope,
            p * (ex.beta - 1.0) + 1.0
        ),
    );
    // Bu jumps across the axis inside Ω; the strip scan only sees each side.
    let jump = ex.bu(0.25 * ex.radius, 1e-300) - ex.bu(0.25 * ex.radius, -1e-300);
    report.push("Bu_jump_at_axis", jump.abs(), "x = R/4");
    if jump.abs() > 1e-12 {
        report.warn(format!("Bu jumps by {:.4e} across y = 0 at x = R/4; the strip scan does not see the jump", jump.abs()));
    }

    let d12 = scan(&|x, y| ex.d12(x, y), ex, Exclusion::Strip, p, levels)?;
    push_scan(&mut report, "d12", &d12);
    let expected = ex.d12_exponent();
    report.verdict(
        "d12_not_in_Lp",
        d12.verdict.is_divergent() && (d12.fitted_slope - expected).abs() <= 0.15,
        format!("{:?}, slope {:.4} vs {:.4}", d12.verdict, d12.fitted_slope, expected),
    );

    for (q, want_div) in [(p, true), (3.0, false)] {
        let w = scan(
            &|x, y| {
                let (v, g) = ex.b2_extension(x, y);
                (v.abs().powf(q) + g[0].hypot(g[1]).powf(q)).powf(1.0 / q)
            },
            ex,
            Exclusion::Disk,
            q,
            levels,
        )?;
        push_scan(&mut report, &format!("b_witness_q{q}"), &w);
        let pass = w.verdict.is_divergent() == want_div;
        let label = if want_div { "divergent" } else { "convergent" };
        report.verdict(
            format!("b_witness_q{q}_{label}"),
            pass,
            format!("{:?}, slope {:.4}, analytic exponent q(β-1)+2 = {:.4}", w.verdict, w.fitted_slope, q * (ex.beta - 1.0) + 2.0),
        );
        // The literal |y|^β about the whole axis, for comparison.
        let lit = scan(&|_, y| ex.beta * y.abs().powf(ex.beta - 1.0), ex, Exclusion::Strip, q, levels)?;
        push_scan(&mut report, &format!("b_axis_q{q}"), &lit);
    }
    let fd = ex.fd_crosscheck(100, 17);
    report.push("fd_max_error", fd.max_error, format!("step {:.1e}", fd.step));
    report.verdict("fd_crosscheck", fd.pass(), format!("{:.3e} ≤ {:.3e} ({})", fd.max_error, fd.tolerance, fd.worst));
    Ok(report)
}
