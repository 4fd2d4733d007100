//! Compressed-row matrices, Jacobi-preconditioned BiCGStab and a banded LU fallback.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Rows given as `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if c >= n {
                    return Err(Error::InvalidInput(format!("column {c} out of range for {n} unknowns")));
                }
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|e| e.0 == i).map_or(0.0, |e| e.1)).collect()
    }

    /// Largest `|i - j|` below and above the diagonal.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    lower = lower.max(i - c);
                } else {
                    upper = upper.max(c - i);
                }
            }
        }
        (lower, upper)
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.mul_vec(x, &mut ax);
        norm(&ax.iter().zip(b).map(|(a, c)| c - a).collect::<Vec<_>>())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    BiCgStab,
    BandedLu,
    /// BiCGStab, then banded LU when it stagnates and the system is small enough.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub method: SolveMethod,
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Largest system handed to the banded fallback.
    pub direct_limit: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { method: SolveMethod::Auto, rel_tol: 1e-10, max_iters: 20_000, direct_limit: 129 * 129 + 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    pub relative_residual: f64,
    /// Relative residual every 10 iterations for the iterative method.
    pub history: Vec<f64>,
}

/// Right-preconditioned BiCGStab with the Jacobi preconditioner, warm-started at `x`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iters: usize) -> Result<SolveStats> {
    let n = a.n;
    let diag = a.diagonal();
    if diag.iter().any(|d| *d == 0.0) {
        return Err(Error::Solver { message: "zero diagonal entry; Jacobi preconditioner undefined".into(), residuals: vec![] });
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = vec![norm(&r) / bnorm];
    let mut best = history[0];
    let mut best_at = 0;
    if history[0] <= rel_tol {
        return Ok(SolveStats { method: SolveMethod::BiCgStab, iterations: 0, relative_residual: history[0], history });
    }
    for it in 1..=max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Solver { message: format!("BiCGStab breakdown at iteration {it}"), residuals: history });
        }
        let beta = rho_new / rho * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv[i] * p[i];
        }
        a.mul_vec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm(&s) / bnorm;
        if snorm <= rel_tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            history.push(snorm);
            return Ok(SolveStats { method: SolveMethod::BiCgStab, iterations: it, relative_residual: snorm, history });
        }
        for i in 0..n {
            z[i] = inv[i] * s[i];
        }
        a.mul_vec(&z, &mut t);
        omega = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            history.push(rel);
            return Err(Error::Solver { message: "BiCGStab produced a non-finite residual".into(), residuals: history });
        }
        if it % 10 == 0 {
            history.push(rel);
        }
        if rel <= rel_tol {
            history.push(rel);
            return Ok(SolveStats { method: SolveMethod::BiCgStab, iterations: it, relative_residual: rel, history });
        }
        if rel < 0.5 * best {
            best = rel;
            best_at = it;
        } else if it - best_at > 2000 {
            return Err(Error::Solver { message: format!("BiCGStab stagnated at relative residual {rel:.3e}"), residuals: history });
        }
    }
    Err(Error::Solver { message: format!("BiCGStab hit {max_iters} iterations"), residuals: history })
}

/// LU factors of a banded matrix with partial pivoting, stored row-wise.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        // Row i stores columns i - kl ..= i + ku + kl; pivoting widens the upper band by kl.
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, width, data: vec![0.0; n * width], pivots: vec![0; n] };
        for i in 0..n {
            for (c, v) in a.row(i) {
                let k = lu.at(i, c);
                lu.data[k] += v;
            }
        }
        let upper = ku + kl;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = lu.data[lu.at(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.data[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Solver { message: format!("singular matrix at column {k}"), residuals: vec![] });
            }
            lu.pivots[k] = piv;
            let cmax = (k + upper).min(n - 1);
            if piv != k {
                for c in k..=cmax {
                    let (x, y) = (lu.at(k, c), lu.at(piv, c));
                    lu.data.swap(x, y);
                }
            }
            let d = lu.data[lu.at(k, k)];
            for i in k + 1..=last {
                let ik = lu.at(i, k);
                let l = lu.data[ik] / d;
                lu.data[ik] = l;
                if l != 0.0 {
                    for c in k + 1..=cmax {
                        let (x, y) = (lu.at(i, c), lu.at(k, c));
                        lu.data[x] -= l * lu.data[y];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.data[self.at(i, k)] * x[k];
            }
        }
        let upper = self.width - 1 - self.kl;
        for k in (0..n).rev() {
            let cmax = (k + upper).min(n - 1);
            let mut acc = x[k];
            for c in k + 1..=cmax {
                acc -= self.data[self.at(k, c)] * x[c];
            }
            x[k] = acc / self.data[self.at(k, k)];
        }
        x
    }
}

/// A matrix with its solver settings; the banded factorization is cached on first use.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub settings: SolverSettings,
    factors: Option<BandedLu>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, settings: SolverSettings) -> Self {
        Self { matrix, settings, factors: None }
    }

    fn direct(&mut self, b: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        if self.factors.is_none() {
            self.factors = Some(BandedLu::factor(&self.matrix)?);
        }
        let sol = self.factors.as_ref().unwrap().solve(b);
        x.copy_from_slice(&sol);
        let rel = self.matrix.residual_norm(x, b) / norm(b).max(f64::MIN_POSITIVE);
        Ok(SolveStats { method: SolveMethod::BandedLu, iterations: 1, relative_residual: rel, history: vec![rel] })
    }

    /// Solves `A x = b`, starting from the incoming `x` for the iterative method.
    pub fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        let s = self.settings;
        match s.method {
            SolveMethod::BandedLu => self.direct(b, x),
            SolveMethod::BiCgStab => bicgstab(&self.matrix, b, x, s.rel_tol, s.max_iters),
            SolveMethod::Auto => {
                if self.factors.is_some() {
                    return self.direct(b, x);
                }
                let start = x.to_vec();
                match bicgstab(&self.matrix, b, x, s.rel_tol, s.max_iters) {
                    Ok(stats) => Ok(stats),
                    Err(err) if self.matrix.n <= s.direct_limit => {
                        x.copy_from_slice(&start);
                        self.direct(b, x).map_err(|_| err)
                    }
                    Err(err) => Err(err),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_rows(vec![vec![(0, 1.0), (0, 2.0)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(m.vals, vec![3.0, 1.0]);
        assert_eq!(m.bandwidths(), (0, 0));
    }

    #[test]
    fn iterative_and_direct_agree() {
        let a = laplacian_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x1 = vec![0.0; 50];
        let stats = bicgstab(&a, &b, &mut x1, 1e-12, 1000).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        let x2 = BandedLu::factor(&a).unwrap().solve(&b);
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-8 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 1]] x = [1, 2] -> x = [1, 1]
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0)], vec![(0, 1.0), (1, 1.0)]]).unwrap();
        let x = BandedLu::factor(&a).unwrap().solve(&[1.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let mut sys = SparseSystem::new(a, SolverSettings::default());
        let mut y = vec![0.0; 2];
        let stats = sys.solve(&[1.0, 2.0], &mut y).unwrap();
        assert_eq!(stats.method, SolveMethod::BandedLu);
        assert!((y[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_nonsymmetric_banded_system() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i, 4.0 + rng.gen::<f64>())];
                for off in [1usize, 3, 7] {
                    if i >= off {
                        r.push((i - off, rng.gen_range(-1.0..1.0)));
                    }
                    if i + off < n {
                        r.push((i + off, rng.gen_range(-1.0..1.0)));
                    }
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let x = BandedLu::factor(&a).unwrap().solve(&b);
        assert!(a.residual_norm(&x, &b) < 1e-12 * norm(&b));
    }
}
