use crate::quadrature::{gauss_legendre, gauss_on};
use crate::{Error, Result};

/// A function on `(0, 1)` that is linear on each cell and may jump between cells.
///
/// On cell `k`, `h(t) = c0[k] + c1[k]·t` for `t ∈ [breaks[k], breaks[k+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub breaks: Vec<f64>,
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn constant(v: f64) -> Self {
        Self { breaks: vec![0.0, 1.0], c0: vec![v], c1: vec![0.0] }
    }

    /// Piecewise constant with the given cell values on equal cells.
    pub fn steps(values: &[f64]) -> Self {
        let n = values.len();
        let breaks = (0..=n).map(|i| i as f64 / n as f64).collect();
        Self { breaks, c0: values.to_vec(), c1: vec![0.0; n] }
    }

    pub fn new(breaks: Vec<f64>, c0: Vec<f64>, c1: Vec<f64>) -> Result<Self> {
        let n = c0.len();
        if breaks.len() != n + 1 || c1.len() != n || n == 0 {
            return Err(Error::InvalidInput("need n cells, n+1 breakpoints".into()));
        }
        if breaks[0] != 0.0 || breaks[n] != 1.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("breakpoints must increase from 0 to 1".into()));
        }
        Ok(Self { breaks, c0, c1 })
    }

    fn cell(&self, x: f64) -> usize {
        self.breaks[1..].partition_point(|b| *b < x).min(self.c0.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.cell(x);
        self.c0[k] + self.c1[k] * x
    }

    /// `∫_0^x h`
    pub fn primitive(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.c0.len() {
            let (a, b) = (self.breaks[k], self.breaks[k + 1]);
            let hi = b.min(x);
            if hi <= a {
                break;
            }
            acc += self.c0[k] * (hi - a) + 0.5 * self.c1[k] * (hi * hi - a * a);
        }
        acc
    }

    /// `∫_0^x h(t)/(1-t) dt`, exact per cell: `(c0 + c1 t)/(1-t) = (c0+c1)/(1-t) - c1`.
    pub fn dual_primitive(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.c0.len() {
            let (a, b) = (self.breaks[k], self.breaks[k + 1]);
            let hi = b.min(x);
            if hi <= a {
                break;
            }
            let log_ratio = (-hi).ln_1p() - (-a).ln_1p();
            acc += -(self.c0[k] + self.c1[k]) * log_ratio - self.c1[k] * (hi - a);
        }
        acc
    }
}

/// `∫_a^b |f|^p` over consecutive breakpoints, splitting each piece at detected sign
/// changes and applying a 20-point Gauss rule on every sub-piece.
pub fn integrate_abs_pow(f: &dyn Fn(f64) -> f64, breaks: &[f64], p: f64) -> f64 {
    let rule = gauss_legendre(20);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // locate sign changes on a probe grid, refine by bisection
        let probes = 16;
        let mut cuts = vec![a];
        let eval_in = |x: f64| f(x.clamp(a + (b - a) * 1e-15, b - (b - a) * 1e-15));
        let mut prev_x = a;
        let mut prev = eval_in(a);
        for i in 1..=probes {
            let x = a + (b - a) * i as f64 / probes as f64;
            let v = eval_in(x);
            if prev * v < 0.0 {
                let (mut lo, mut hi) = (prev_x, x);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if eval_in(mid) * prev < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev = v;
        }
        cuts.push(b);
        for c in cuts.windows(2) {
            total += gauss_on(c[0], c[1], &rule).map(|(x, wt)| wt * f(x).abs().powf(p)).sum::<f64>();
        }
    }
    total
}

fn lp_of(h: &PiecewiseLinear, p: f64) -> f64 {
    let f = |x: f64| h.eval(x);
    integrate_abs_pow(&f, &h.breaks, p).powf(1.0 / p)
}

/// `‖(1/x)∫_0^x h‖_p / ‖h‖_p`, bounded by `p/(p-1)`.
pub fn hardy_check(h: &PiecewiseLinear, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    let denom = lp_of(h, p);
    if denom == 0.0 {
        return Err(Error::DegenerateInput("‖h‖_p = 0".into()));
    }
    // On the first cell the average is c0 + c1 x / 2, evaluated directly to avoid 0/0.
    let first_end = h.breaks[1];
    let avg = |x: f64| {
        if x <= first_end {
            h.c0[0] + 0.5 * h.c1[0] * x
        } else {
            h.primitive(x) / x
        }
    };
    Ok(integrate_abs_pow(&avg, &h.breaks, p).powf(1.0 / p) / denom)
}

/// Number of dyadic levels used to grade the quadrature toward `t = 1`.
const GRADED_LEVELS: i32 = 40;

/// `‖∫_0^x h(t)/(1-t) dt‖_p / ‖h‖_p` with geometric grading toward the endpoint 1.
pub fn dual_hardy_check(h: &PiecewiseLinear, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be ≥ 1")));
    }
    let denom = lp_of(h, p);
    if denom == 0.0 {
        return Err(Error::DegenerateInput("‖h‖_p = 0".into()));
    }
    let mut breaks: Vec<f64> = h.breaks.clone();
    breaks.extend((1..=GRADED_LEVELS).map(|k| 1.0 - 0.5f64.powi(k)));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // The remainder beyond the finest level carries O(2^{-40} log^p 2^{40}) mass.
    let last = 1.0 - 0.5f64.powi(GRADED_LEVELS);
    breaks.retain(|b| *b <= last);
    let k = |x: f64| h.dual_primitive(x);
    Ok(integrate_abs_pow(&k, &breaks, p).powf(1.0 / p) / denom)
}
