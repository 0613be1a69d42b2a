//! The transition kernel pi(s' | s_1..s_K) and everything derived from it
//! alone: the lifted shift chain on S^K tuples, its stationary law M computed
//! twice (direct linear solve and power iteration, cross-checked), the
//! coordinate marginal mu, the per-slot marginal kernels pi^l, and the
//! contraction coefficient lambda = max_l ||B^l||_2 with its crude bound
//! 1 - gamma/S. Kernels with fewer than K conditioning slots come from
//! `reduce`, which keeps the leading slots and averages the dropped ones
//! under mu.

use crate::linalg::{solve, spectral_norm, stationary_power, Matrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel table must be {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    BadShape { expected_rows: usize, expected_cols: usize, rows: usize, cols: usize },
    #[error("kernel entry [{row},{col}] = {value} must be strictly positive")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("kernel row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("state count and slot count must both be at least 1")]
    EmptyKernel,
    #[error("stationary distribution: {0}")]
    Stationary(String),
    #[error("reduce keeps {keep} slots but the kernel has {k}")]
    BadReduce { keep: usize, k: usize },
}

/// Packs a parent tuple into a row index, first slot most significant.
pub fn pack(s: usize, tuple: &[usize]) -> usize {
    tuple.iter().fold(0, |acc, &x| acc * s + x)
}

/// Inverse of `pack` for k slots.
pub fn unpack(s: usize, k: usize, mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in (0..k).rev() {
        out[slot] = idx % s;
        idx /= s;
    }
    out
}

/// A strictly positive conditional law over S states given a K-tuple of
/// parent states. Rows are indexed by the packed tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    s: usize,
    k: usize,
    rows: Matrix,
}

impl Kernel {
    pub fn new(s: usize, k: usize, rows: Matrix) -> Result<Kernel, KernelError> {
        if s == 0 || k == 0 {
            return Err(KernelError::EmptyKernel);
        }
        let nrows = s.pow(k as u32);
        if rows.rows() != nrows || rows.cols() != s {
            return Err(KernelError::BadShape {
                expected_rows: nrows,
                expected_cols: s,
                rows: rows.rows(),
                cols: rows.cols(),
            });
        }
        for r in 0..nrows {
            let mut sum = 0.0;
            for c in 0..s {
                let v = rows.get(r, c);
                if !(v > 0.0) {
                    return Err(KernelError::NonPositiveEntry { row: r, col: c, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(KernelError::RowSum { row: r, sum });
            }
        }
        Ok(Kernel { s, k, rows })
    }

    /// The 3-state, 2-slot benchmark kernel. `p` perturbs two entries per row
    /// (one up, one down) so rows stay exactly stochastic; all nine entries of
    /// `p` at zero gives the base table.
    pub fn benchmark(p: &[f64; 9]) -> Result<Kernel, KernelError> {
        let rows = vec![
            vec![0.1, 0.5 - p[0], 0.4 + p[0]],
            vec![0.2 + p[1], 0.3, 0.5 - p[1]],
            vec![0.3, 0.4 - p[2], 0.3 + p[2]],
            vec![0.5 - p[3], 0.3, 0.2 + p[3]],
            vec![0.4 + p[4], 0.4 - p[4], 0.2],
            vec![0.2 + p[5], 0.3, 0.5 - p[5]],
            vec![0.6 - p[6], 0.2 + p[6], 0.2],
            vec![0.1 + p[7], 0.5 - p[7], 0.4],
            vec![0.2 + p[8], 0.3, 0.5 - p[8]],
        ];
        Kernel::new(3, 2, Matrix::from_rows(&rows))
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row_count(&self) -> usize {
        self.rows.rows()
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        self.rows.row(idx)
    }

    pub fn prob(&self, parents: &[usize], next: usize) -> f64 {
        debug_assert_eq!(parents.len(), self.k);
        self.rows.get(pack(self.s, parents), next)
    }

    pub fn min_entry(&self) -> f64 {
        self.rows.data().iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Transition matrix of the lifted chain on S^K tuples: from (s_1..s_K)
    /// the chain moves to (s_2..s_K, s') with probability pi(s'|s_1..s_K).
    pub fn lift(&self) -> Matrix {
        let n = self.row_count();
        let mut p = Matrix::zeros(n, n);
        let tail_mod = n / self.s;
        for a in 0..n {
            let suffix = a % tail_mod;
            for sp in 0..self.s {
                p.set(a, suffix * self.s + sp, self.rows.get(a, sp));
            }
        }
        p
    }

    /// Deletes trailing slots, averaging them out under `mu`. `keep == 0`
    /// yields the one-row kernel equal to mu itself.
    pub fn reduce(&self, mu: &[f64], keep: usize) -> Result<Kernel, KernelError> {
        if keep > self.k {
            return Err(KernelError::BadReduce { keep, k: self.k });
        }
        if keep == self.k {
            return Ok(self.clone());
        }
        if keep == 0 {
            let row = [mu.to_vec()];
            // a 0-slot kernel is represented with one phantom slot whose
            // value never matters
            let rows: Vec<Vec<f64>> = (0..self.s).map(|_| row[0].clone()).collect();
            return Kernel::new(self.s, 1, Matrix::from_rows(&rows));
        }
        let dropped = self.k - keep;
        let drop_count = self.s.pow(dropped as u32);
        let mut rows = Vec::with_capacity(self.s.pow(keep as u32));
        for kept_idx in 0..self.s.pow(keep as u32) {
            let mut row = vec![0.0; self.s];
            for drop_idx in 0..drop_count {
                let full = kept_idx * drop_count + drop_idx;
                let mut w = 1.0;
                for &d in &unpack(self.s, dropped, drop_idx) {
                    w *= mu[d];
                }
                for (target, r) in row.iter_mut().zip(self.rows.row(full)) {
                    *target += w * r;
                }
            }
            rows.push(row);
        }
        Kernel::new(self.s, keep, Matrix::from_rows(&rows))
    }
}

/// Stationary law of a row-stochastic matrix, computed by two independent
/// routes and cross-checked: a direct linear solve of the balance equations
/// and left power iteration. Yields a probability vector with stationarity
/// residual below 1e-12.
pub fn stationary_dual(p: &Matrix) -> Result<Vec<f64>, KernelError> {
    let n = p.rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, p.get(j, i) - if i == j { 1.0 } else { 0.0 });
        }
    }
    for j in 0..n {
        a.set(n - 1, j, 1.0);
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let direct = solve(&a, &b).map_err(|e| KernelError::Stationary(format!("solve: {e}")))?;

    let power = stationary_power(p, 1e-15, 200_000)
        .map_err(|e| KernelError::Stationary(format!("power iteration: {e}")))?;

    for (tag, m) in [("solve", &direct), ("power", &power)] {
        let back = p.left_mul(m);
        let residual =
            m.iter().zip(&back).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        if residual > 1e-12 {
            return Err(KernelError::Stationary(format!(
                "{tag} route residual {residual:.3e} exceeds 1e-12"
            )));
        }
    }
    let disagreement =
        direct.iter().zip(&power).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    if disagreement > 1e-10 {
        return Err(KernelError::Stationary(format!(
            "solve and power routes disagree by {disagreement:.3e}"
        )));
    }
    Ok(direct)
}

/// Everything derived from the kernel alone.
#[derive(Debug, Clone)]
pub struct KernelStats {
    pub kernel: Kernel,
    /// Stationary law of the lifted chain, indexed by packed tuple.
    pub m: Vec<f64>,
    /// Coordinate marginal of `m` (identical for every slot).
    pub mu: Vec<f64>,
    /// Per-slot marginal kernels pi^l(s'|s) as S x S matrices.
    pub marginals: Vec<Matrix>,
    /// max_l ||B^l||_2 where B^l[s,s'] = sqrt(mu(s)/mu(s'))(pi^l(s,s') - mu(s')).
    pub lambda: f64,
    /// S times the smallest kernel entry; lambda <= 1 - gamma/S always.
    pub gamma: f64,
}

pub fn analyze(kernel: &Kernel) -> Result<KernelStats, KernelError> {
    let s = kernel.s();
    let k = kernel.k();
    let m = stationary_dual(&kernel.lift())?;

    let mut mu_per_slot = vec![vec![0.0; s]; k];
    for (idx, &w) in m.iter().enumerate() {
        for (slot, &state) in unpack(s, k, idx).iter().enumerate() {
            mu_per_slot[slot][state] += w;
        }
    }
    for slot in 1..k {
        for state in 0..s {
            let d = (mu_per_slot[slot][state] - mu_per_slot[0][state]).abs();
            if d > 1e-12 {
                return Err(KernelError::Stationary(format!(
                    "coordinate marginals of slots 0 and {slot} differ by {d:.3e}"
                )));
            }
        }
    }
    let mu = mu_per_slot.swap_remove(0);

    let mut marginals = Vec::with_capacity(k);
    for slot in 0..k {
        let mut pl = Matrix::zeros(s, s);
        for (idx, &w) in m.iter().enumerate() {
            let tuple = unpack(s, k, idx);
            for sp in 0..s {
                pl.add_at(tuple[slot], sp, kernel.row(idx)[sp] * w);
            }
        }
        for st in 0..s {
            for sp in 0..s {
                let v = pl.get(st, sp) / mu[st];
                pl.set(st, sp, v);
            }
        }
        marginals.push(pl);
    }

    let mut lambda = 0.0f64;
    for pl in &marginals {
        let b = Matrix::from_fn(s, s, |st, sp| {
            (mu[st] / mu[sp]).sqrt() * (pl.get(st, sp) - mu[sp])
        });
        lambda = lambda.max(spectral_norm(&b));
    }
    let gamma = s as f64 * kernel.min_entry();

    Ok(KernelStats { kernel: kernel.clone(), m, mu, marginals, lambda, gamma })
}

impl KernelStats {
    pub fn s(&self) -> usize {
        self.kernel.s()
    }

    pub fn k(&self) -> usize {
        self.kernel.k()
    }

    /// Stationary weight of a parent tuple.
    pub fn m_at(&self, tuple: &[usize]) -> f64 {
        self.m[pack(self.s(), tuple)]
    }

    pub fn contraction_bound(&self) -> f64 {
        1.0 - self.gamma / self.s() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn base() -> KernelStats {
        analyze(&Kernel::benchmark(&[0.0; 9]).unwrap()).unwrap()
    }

    #[test]
    fn pack_unpack_round_trip() {
        for idx in 0..27 {
            assert_eq!(pack(3, &unpack(3, 3, idx)), idx);
        }
        assert_eq!(pack(3, &[1, 2]), 5);
        assert_eq!(unpack(3, 2, 5), vec![1, 2]);
    }

    #[test]
    fn benchmark_rows_are_stochastic_and_positive() {
        let kern = Kernel::benchmark(&[0.0; 9]).unwrap();
        assert_eq!(kern.s(), 3);
        assert_eq!(kern.k(), 2);
        assert_eq!(kern.prob(&[0, 0], 0), 0.1);
        assert_eq!(kern.prob(&[2, 1], 1), 0.5);
        assert_eq!(kern.min_entry(), 0.1);
    }

    #[test]
    fn benchmark_perturbations_land_where_expected() {
        let mut p = [0.0; 9];
        p[3] = 0.05;
        let kern = Kernel::benchmark(&p).unwrap();
        assert_abs_diff_eq!(kern.prob(&[1, 0], 0), 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(kern.prob(&[1, 0], 2), 0.25, epsilon = 1e-15);
        assert_eq!(kern.prob(&[1, 0], 1), 0.3);
    }

    #[test]
    fn rejects_nonpositive_entry() {
        let mut p = [0.0; 9];
        p[0] = 0.5;
        assert!(matches!(
            Kernel::benchmark(&p),
            Err(KernelError::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn rejects_bad_row_sum() {
        let rows = Matrix::from_rows(&[vec![0.6, 0.5], vec![0.5, 0.5], vec![0.5, 0.5], vec![
            0.5, 0.5,
        ]]);
        assert!(matches!(Kernel::new(2, 2, rows), Err(KernelError::RowSum { .. })));
    }

    #[test]
    fn lift_rows_are_stochastic_with_shift_sparsity() {
        let kern = Kernel::benchmark(&[0.0; 9]).unwrap();
        let p = kern.lift();
        assert_eq!(p.rows(), 9);
        for a in 0..9 {
            let sum: f64 = (0..9).map(|b| p.get(a, b)).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
            let nonzero = (0..9).filter(|&b| p.get(a, b) != 0.0).count();
            assert_eq!(nonzero, 3);
        }
        // from (0,1) the chain can only reach (1,*)
        assert_eq!(p.get(1, 3), kern.prob(&[0, 1], 0));
        assert_eq!(p.get(1, 4), kern.prob(&[0, 1], 1));
        assert_eq!(p.get(1, 5), kern.prob(&[0, 1], 2));
    }

    #[test]
    fn stationary_matches_frozen_values() {
        let st = base();
        let want_m = [
            0.10353965549876944,
            0.094697276980070799,
            0.075444146994402439,
            0.088991644357913416,
            0.14564235688596844,
            0.12365809469727691,
            0.081149779616559767,
            0.1179524620751196,
            0.16892458289391843,
        ];
        for (got, want) in st.m.iter().zip(want_m) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let want_mu = [0.27368107947324266, 0.35829209594115874, 0.36802682458559777];
        for (got, want) in st.mu.iter().zip(want_mu) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_kernels_match_frozen_values() {
        let st = base();
        let want1 = [
            [0.18973421598656262, 0.40323090603695283, 0.40703487797648458],
            [0.35581132075471705, 0.34064905660377359, 0.30353962264150947],
            [0.25614988978692138, 0.34204996326230719, 0.40180014695077154],
        ];
        let want2 = [
            [0.37832230016796758, 0.34601323979843879, 0.27566446003359346],
            [0.24837735849056614, 0.40649056603773592, 0.34513207547169816],
            [0.22049963262307129, 0.3204996326230713, 0.4590007347538575],
        ];
        for s in 0..3 {
            for sp in 0..3 {
                assert_abs_diff_eq!(st.marginals[0].get(s, sp), want1[s][sp], epsilon = 1e-12);
                assert_abs_diff_eq!(st.marginals[1].get(s, sp), want2[s][sp], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn marginal_kernel_rows_are_stochastic() {
        let st = base();
        for pl in &st.marginals {
            for s in 0..3 {
                let sum: f64 = (0..3).map(|sp| pl.get(s, sp)).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mu_is_stationary_for_each_marginal_kernel() {
        let st = base();
        for pl in &st.marginals {
            let back = pl.left_mul(&st.mu);
            for (a, b) in back.iter().zip(&st.mu) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lambda_gamma_match_frozen_values() {
        let st = base();
        assert_abs_diff_eq!(st.lambda, 0.17001654398027446, epsilon = 1e-10);
        assert_abs_diff_eq!(st.gamma, 0.3, epsilon = 1e-14);
        assert!(st.lambda <= st.contraction_bound());
        assert_abs_diff_eq!(st.contraction_bound(), 0.9, epsilon = 1e-14);
    }

    #[test]
    fn lambda_is_the_larger_slot_norm() {
        // frozen per-slot norms: slot 1 is the max
        let st = base();
        let b1 = Matrix::from_fn(3, 3, |s, sp| {
            (st.mu[s] / st.mu[sp]).sqrt() * (st.marginals[0].get(s, sp) - st.mu[sp])
        });
        assert_abs_diff_eq!(spectral_norm(&b1), 0.15225493189245326, epsilon = 1e-10);
    }

    #[test]
    fn perturbed_kernel_still_analyzes() {
        let mut p = [0.0; 9];
        for (i, v) in p.iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.05 } else { -0.05 };
        }
        let st = analyze(&Kernel::benchmark(&p).unwrap()).unwrap();
        assert!(st.lambda > 0.0 && st.lambda < 1.0);
        assert!(st.lambda <= st.contraction_bound() + 1e-12);
        let total: f64 = st.m.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_to_one_slot_weights_dropped_slot_by_mu() {
        let st = base();
        let red = st.kernel.reduce(&st.mu, 1).unwrap();
        assert_eq!(red.k(), 1);
        // row for s1 = 0 must equal sum_s2 mu(s2) pi(.|0,s2)
        for sp in 0..3 {
            let want: f64 = (0..3)
                .map(|s2| st.mu[s2] * st.kernel.prob(&[0, s2], sp))
                .sum();
            assert_abs_diff_eq!(red.prob(&[0], sp), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn reduce_to_zero_slots_gives_mu_rows() {
        let st = base();
        let red = st.kernel.reduce(&st.mu, 0).unwrap();
        assert_eq!(red.k(), 1);
        for parent in 0..3 {
            for sp in 0..3 {
                assert_abs_diff_eq!(red.prob(&[parent], sp), st.mu[sp], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reduce_full_keep_is_identity() {
        let st = base();
        let red = st.kernel.reduce(&st.mu, 2).unwrap();
        assert_eq!(red, st.kernel);
        assert!(matches!(
            st.kernel.reduce(&st.mu, 3),
            Err(KernelError::BadReduce { .. })
        ));
    }

    #[test]
    fn stationary_dual_rejects_nothing_on_clean_chain() {
        let p = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let m = stationary_dual(&p).unwrap();
        assert_abs_diff_eq!(m[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1], 1.0 / 6.0, epsilon = 1e-12);
    }
}
