//! Small dense linear algebra: just enough for stationary distributions and
//! operator norms of 3x3 centered kernels. Row-major `Matrix`, Gaussian
//! elimination with partial pivoting, power iteration for left fixed points,
//! and a largest-singular-value routine via one-sided iteration on A'A.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular or numerically rank-deficient (pivot {pivot:.3e})")]
    Singular { pivot: f64 },
    #[error("iteration did not converge within {0} steps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    /// Row vector times matrix: returns v * self.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "left_mul shape");
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == 0.0 {
                continue;
            }
            for c in 0..self.cols {
                out[c] += vr * self.get(r, c);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(LinalgError::Dimension(format!(
            "solve needs square system, got {}x{} with rhs {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m.get(r, col).abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot < 1e-13 {
            return Err(LinalgError::Singular { pivot });
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m.get(col, c);
                m.set(col, c, m.get(pivot_row, c));
                m.set(pivot_row, c, tmp);
            }
            rhs.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = m.get(r, col) / m.get(col, col);
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - factor * m.get(col, c);
                m.set(r, c, v);
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m.get(r, c) * x[c];
        }
        x[r] = acc / m.get(r, r);
    }
    Ok(x)
}

/// Left fixed point of a row-stochastic matrix by power iteration:
/// iterates v <- v P with L1 renormalization until successive iterates
/// agree within `tol` in max norm.
pub fn stationary_power(p: &Matrix, tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError> {
    let n = p.rows;
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = p.left_mul(&v);
        let sum: f64 = next.iter().sum();
        for x in &mut next {
            *x /= sum;
        }
        let diff = v
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if diff < tol {
            return Ok(v);
        }
    }
    Err(LinalgError::NoConvergence(max_iter))
}

/// Largest singular value: power iteration on A'A, returning sqrt of the
/// dominant eigenvalue. Handles the zero matrix (returns 0).
pub fn spectral_norm(a: &Matrix) -> f64 {
    let ata = a.transpose().matmul(a);
    let n = ata.rows;
    if n == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.3).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut eig = 0.0;
    for _ in 0..10_000 {
        let mut w = vec![0.0; n];
        for r in 0..n {
            for c in 0..n {
                w[r] += ata.get(r, c) * v[c];
            }
        }
        let new_eig = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for x in &mut w {
            *x /= nw;
        }
        let drift = v.iter().zip(&w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = w;
        if (new_eig - eig).abs() < 1e-14 && drift < 1e-12 {
            eig = new_eig;
            break;
        }
        eig = new_eig;
    }
    eig.max(0.0).sqrt()
}

/// Least-squares line fit: returns (slope, intercept, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: full symmetric eigensolve of A'A by cyclic Jacobi
    /// rotations, far slower but algorithmically unrelated to the power method.
    fn spectral_norm_jacobi(a: &Matrix) -> f64 {
        let mut s = a.transpose().matmul(a);
        let n = s.rows();
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(s.get(p, q).abs());
                }
            }
            if off < 1e-15 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = s.get(p, q);
                    if apq.abs() < 1e-18 {
                        continue;
                    }
                    let theta = (s.get(q, q) - s.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let skp = s.get(k, p);
                        let skq = s.get(k, q);
                        s.set(k, p, c * skp - sn * skq);
                        s.set(k, q, sn * skp + c * skq);
                    }
                    for k in 0..n {
                        let spk = s.get(p, k);
                        let sqk = s.get(q, k);
                        s.set(p, k, c * spk - sn * sqk);
                        s.set(q, k, sn * spk + c * sqk);
                    }
                }
            }
        }
        (0..n).map(|i| s.get(i, i)).fold(0.0f64, f64::max).max(0.0).sqrt()
    }

    #[test]
    fn solve_known_3x3() {
        let a = Matrix::from_rows(&[
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ]);
        let x = solve(&a, &[8.0, -11.0, -3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[2], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(solve(&a, &[1.0, 2.0]), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let x = solve(&a, &[3.0, 7.0]).unwrap();
        assert_abs_diff_eq!(x[0], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn stationary_power_two_state() {
        let p = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let v = stationary_power(&p, 1e-14, 100_000).unwrap();
        assert_abs_diff_eq!(v[0], 5.0 / 6.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 1.0 / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn spectral_norm_diagonal() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -7.0]]);
        assert_abs_diff_eq!(spectral_norm(&a), 7.0, epsilon = 1e-10);
    }

    #[test]
    fn spectral_norm_zero() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn spectral_norm_matches_jacobi_oracle() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let a = Matrix::from_fn(3, 3, |_, _| next());
            let power = spectral_norm(&a);
            let jacobi = spectral_norm_jacobi(&a);
            assert_abs_diff_eq!(power, jacobi, epsilon = 1e-9);
        }
    }

    #[test]
    fn spectral_norm_dominates_rayleigh_quotients() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, -1.0], vec![0.3, 0.0, 2.0]]);
        let norm = spectral_norm(&a);
        for v in [[1.0, 0.0, 0.0], [0.5, -0.5, 1.0], [1.0, 1.0, 1.0]] {
            let av: Vec<f64> = (0..3)
                .map(|r| (0..3).map(|c| a.get(r, c) * v[c]).sum())
                .collect();
            let num: f64 = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            let den: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(norm >= num / den - 1e-10);
        }
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert_abs_diff_eq!(slope, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-12);
    }
}
