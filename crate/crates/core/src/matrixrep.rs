//! Dense matrix form of a policy on an NVMDP at one time step.
//!
//! State-action pairs are enumerated s-major, a-minor: pair `(s, a)` has row
//! index `s * |A| + a` in every matrix with `|S x A|` rows or columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::dp::policy_evaluation;
use crate::error::{NvmdpError, Result};
use crate::model::{TabularNvmdp, TimePolicy};
use crate::scalar::Scalar;

/// Default cap on `|S x A|`.
pub const DEFAULT_ROW_CAP: usize = 10_000;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector.
    pub fn column(values: Vec<T>) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(NvmdpError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let x = self.data[i * self.cols + k];
                if x == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &y) in dst.iter_mut().zip(src) {
                    *d += x * y;
                }
            }
        }
        Ok(out)
    }

    pub fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a * b).collect(),
        })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<T> {
        self.check_same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, x| acc + x.abs()))
            .fold(T::zero(), T::max)
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(NvmdpError::Dimension(format!(
                "shape {}x{} differs from {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// The matrices describing one transition step `t -> t + 1` under a policy.
///
/// Discount-carrying matrices (`w`, `m`, `j`, `k`, `l`) use the effective
/// discount, so they vanish at `t = H - 1`.
#[derive(Clone, Debug)]
pub struct MatrixBundle<T> {
    pub t: usize,
    pub num_states: usize,
    pub num_actions: usize,
    /// `|S x A| x |S|`, `p_t(s'|s,a)`.
    pub p: Matrix<T>,
    /// `|S| x |S x A|`, `π_t(a|s)` in the block of row `s`.
    pub pi: Matrix<T>,
    /// `|S| x |S x A|`, sub-policy at `t + 1`.
    pub pi_next: Matrix<T>,
    /// `|S x A| x |S|`, `γ_{t+1}(s,a,s')`.
    pub w: Matrix<T>,
    /// `|S x A| x |S x A|`, `γ_{t+1}(s,a,s')` repeated over `a'`.
    pub m: Matrix<T>,
    /// `W ⊙ P`.
    pub j: Matrix<T>,
    /// `M ⊙ (P Π_{t+1})`.
    pub k: Matrix<T>,
    /// `Π_t J`.
    pub l: Matrix<T>,
    /// `|S x A| x |S|` indicator of the state of each pair.
    pub u: Matrix<T>,
    /// Mean reward vector `r̄_t(s,a)` as a column.
    pub r: Matrix<T>,
}

/// Policy matrix of the sub-policy at time `t`.
pub fn policy_matrix<T: Scalar>(policy: &TimePolicy<T>, t: usize) -> Matrix<T> {
    let (ns, na) = (policy.num_states(), policy.num_actions());
    let mut pi = Matrix::zeros(ns, ns * na);
    for s in 0..ns {
        for (a, &p) in policy.row(t, s).iter().enumerate() {
            pi[(s, s * na + a)] = p;
        }
    }
    pi
}

/// State indicator matrix `U`.
pub fn indicator_matrix<T: Scalar>(num_states: usize, num_actions: usize) -> Matrix<T> {
    Matrix::from_fn(num_states * num_actions, num_states, |row, s| {
        if row / num_actions == s {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Builds every matrix at time `t`, refusing `|S x A| > row_cap`.
///
/// At `t = H - 1` the policy may stop at `H - 1`; its last sub-policy then
/// stands in for `π_H`, which only meets the zero discount matrix.
pub fn build_bundle<T: Scalar>(
    model: &TabularNvmdp<T>,
    policy: &TimePolicy<T>,
    t: usize,
    row_cap: usize,
) -> Result<MatrixBundle<T>> {
    let (ns, na) = (model.num_states(), model.num_actions());
    if t >= model.horizon() {
        return Err(NvmdpError::OutOfRange(format!("t={t} with horizon {}", model.horizon())));
    }
    if ns * na > row_cap {
        return Err(NvmdpError::Dimension(format!(
            "|S x A| = {} exceeds the row cap {row_cap}",
            ns * na
        )));
    }
    if policy.num_states() != ns || policy.num_actions() != na || policy.horizon() < model.horizon() {
        return Err(NvmdpError::Dimension("policy does not match the model".into()));
    }
    let sa = ns * na;
    let p = Matrix::from_fn(sa, ns, |row, s2| model.transition_row(t, row / na, row % na)[s2]);
    let w = Matrix::from_fn(sa, ns, |row, s2| model.discount(t, row / na, row % na, s2));
    let m = Matrix::from_fn(sa, sa, |row, col| model.discount(t, row / na, row % na, col / na));
    let pi = policy_matrix(policy, t);
    let next_t = (t + 1).min(policy.horizon() - 1);
    let pi_next = policy_matrix(policy, next_t);
    let j = w.hadamard(&p)?;
    let k = m.hadamard(&p.matmul(&pi_next)?)?;
    let l = pi.matmul(&j)?;
    let u = indicator_matrix(ns, na);
    let r = Matrix::column((0..sa).map(|row| model.mean_reward(t, row / na, row % na)).collect());
    Ok(MatrixBundle {
        t,
        num_states: ns,
        num_actions: na,
        p,
        pi,
        pi_next,
        w,
        m,
        j,
        k,
        l,
        u,
        r,
    })
}

/// Worst residuals of the matrix recursions against the scalar solver.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct RecursionReport {
    /// `V_t = Π_t Q_t`.
    pub v_from_q: f64,
    /// `Q_t = r_t + J V_{t+1}`.
    pub q_from_v: f64,
    /// `V_t = Π_t r_t + L V_{t+1}`.
    pub v_from_v: f64,
    /// `Q_t = r_t + K Q_{t+1}`.
    pub q_from_q: f64,
    /// `V_t` as the finite sum of `L` products applied to `Π_i r_i`.
    pub v_series: f64,
    /// `Q_t` as the finite sum of `K` products applied to `r_i`.
    pub q_series: f64,
    /// `Π_t U = I`.
    pub pi_u_identity: f64,
    /// `J Π_{t+1} = K`.
    pub j_pi_equals_k: f64,
}

impl RecursionReport {
    pub fn worst(&self) -> f64 {
        [
            self.v_from_q,
            self.q_from_v,
            self.v_from_v,
            self.q_from_q,
            self.v_series,
            self.q_series,
            self.pi_u_identity,
            self.j_pi_equals_k,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates `policy` with the scalar solver and measures how far the matrix
/// identities are from holding at every `t < H`.
pub fn value_recursion_check<T: Scalar>(model: &TabularNvmdp<T>, policy: &TimePolicy<T>) -> Result<RecursionReport> {
    let eval = policy_evaluation(model, policy)?;
    let (h, ns, na) = (model.horizon(), model.num_states(), model.num_actions());
    let bundles = (0..h)
        .map(|t| build_bundle(model, policy, t, DEFAULT_ROW_CAP))
        .collect::<Result<Vec<_>>>()?;
    let v_col = |t: usize| Matrix::column(eval.v.at_time(t).to_vec());
    let q_col = |t: usize| Matrix::column(eval.q.at_time(t).to_vec());
    let mut rep = RecursionReport::default();
    let upd = |slot: &mut f64, x: T| *slot = slot.max(x.as_f64());
    let eye = Matrix::<T>::identity(ns);
    for t in 0..h {
        let b = &bundles[t];
        let (v_t, q_t, v_n, q_n) = (v_col(t), q_col(t), v_col(t + 1), q_col(t + 1));
        upd(&mut rep.v_from_q, b.pi.matmul(&q_t)?.max_abs_diff(&v_t)?);
        upd(&mut rep.q_from_v, b.r.add(&b.j.matmul(&v_n)?)?.max_abs_diff(&q_t)?);
        upd(&mut rep.v_from_v, b.pi.matmul(&b.r)?.add(&b.l.matmul(&v_n)?)?.max_abs_diff(&v_t)?);
        upd(&mut rep.q_from_q, b.r.add(&b.k.matmul(&q_n)?)?.max_abs_diff(&q_t)?);
        upd(&mut rep.pi_u_identity, b.pi.matmul(&b.u)?.max_abs_diff(&eye)?);
        upd(&mut rep.j_pi_equals_k, b.j.matmul(&b.pi_next)?.max_abs_diff(&b.k)?);

        // Finite sums: products of L_{t+1} .. L_i (resp. K) over the bundles t .. i-1.
        let mut l_prod = Matrix::<T>::identity(ns);
        let mut k_prod = Matrix::<T>::identity(ns * na);
        let mut v_sum = Matrix::<T>::zeros(ns, 1);
        let mut q_sum = Matrix::<T>::zeros(ns * na, 1);
        for i in t..h {
            if i > t {
                l_prod = l_prod.matmul(&bundles[i - 1].l)?;
                k_prod = k_prod.matmul(&bundles[i - 1].k)?;
            }
            v_sum = v_sum.add(&l_prod.matmul(&bundles[i].pi.matmul(&bundles[i].r)?)?)?;
            q_sum = q_sum.add(&k_prod.matmul(&bundles[i].r)?)?;
        }
        upd(&mut rep.v_series, v_sum.max_abs_diff(&v_t)?);
        upd(&mut rep.q_series, q_sum.max_abs_diff(&q_t)?);
    }
    Ok(rep)
}

/// Writes each matrix of `bundle` as `<prefix>_<name>.csv` in `dir`, with a
/// header row of column labels. Returns the written paths.
pub fn dump_bundle_csv<T: Scalar>(bundle: &MatrixBundle<T>, dir: &Path, prefix: &str) -> Result<Vec<std::path::PathBuf>> {
    let na = bundle.num_actions;
    let ns = bundle.num_states;
    let state_labels: Vec<String> = (0..ns).map(|s| format!("s{s}")).collect();
    let pair_labels: Vec<String> = (0..ns * na).map(|i| format!("s{}a{}", i / na, i % na)).collect();
    let entries: [(&str, &Matrix<T>, &[String]); 10] = [
        ("P", &bundle.p, &state_labels),
        ("Pi", &bundle.pi, &pair_labels),
        ("Pi_next", &bundle.pi_next, &pair_labels),
        ("W", &bundle.w, &state_labels),
        ("M", &bundle.m, &pair_labels),
        ("J", &bundle.j, &state_labels),
        ("K", &bundle.k, &pair_labels),
        ("L", &bundle.l, &state_labels),
        ("U", &bundle.u, &state_labels),
        ("r", &bundle.r, &[]),
    ];
    let mut written = Vec::new();
    for (name, mat, labels) in entries {
        let mut text = if labels.is_empty() {
            String::from("r")
        } else {
            labels.join(",")
        };
        text.push('\n');
        for i in 0..mat.rows() {
            let row: Vec<String> = mat.row(i).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(text, "{}", row.join(","));
        }
        let path = dir.join(format!("{prefix}_{name}.csv"));
        std::fs::write(&path, text).map_err(|source| NvmdpError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParts, RewardNoise, TimeTable};

    fn single(gamma: f64, h: usize) -> TabularNvmdp<f64> {
        TabularNvmdp::new(ModelParts {
            num_states: 1,
            num_actions: 1,
            horizon: h,
            transitions: TimeTable::constant(vec![1.0], h),
            rewards: TimeTable::constant(vec![2.0], h),
            discounts: TimeTable::constant(vec![gamma], h),
            start: vec![1.0],
            terminals: vec![],
            reward_noise: RewardNoise::None,
        })
        .unwrap()
    }

    #[test]
    fn scalar_model_matrices() {
        let m = single(0.5, 3);
        let pi = TimePolicy::uniform(3, 1, 1);
        let b = build_bundle(&m, &pi, 0, DEFAULT_ROW_CAP).unwrap();
        for mat in [&b.j, &b.k] {
            assert_eq!(mat.as_slice(), &[0.5]);
        }
        assert_eq!(b.pi.as_slice(), &[1.0]);
        assert_eq!(b.u.as_slice(), &[1.0]);
        // Last step carries no discount.
        let last = build_bundle(&m, &pi, 2, DEFAULT_ROW_CAP).unwrap();
        assert_eq!(last.j.as_slice(), &[0.0]);
    }

    #[test]
    fn row_cap_is_enforced() {
        let m = single(0.5, 2);
        let pi = TimePolicy::uniform(2, 1, 1);
        assert!(build_bundle(&m, &pi, 0, 0).is_err());
        assert!(build_bundle(&m, &pi, 2, 10).is_err());
    }

    #[test]
    fn horizon_one_boundary() {
        let m = single(0.9, 1);
        let pi = TimePolicy::uniform(1, 1, 1);
        let rep = value_recursion_check(&m, &pi).unwrap();
        assert_eq!(rep.worst(), 0.0);
    }

    #[test]
    fn indicator_ordering_is_state_major() {
        let u = indicator_matrix::<f64>(2, 3);
        assert_eq!(u.rows(), 6);
        for row in 0..6 {
            assert_eq!(u[(row, row / 3)], 1.0);
            assert_eq!(u[(row, 1 - row / 3)], 0.0);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let m = single(0.5, 2);
        let pi = TimePolicy::uniform(2, 1, 1);
        let b = build_bundle(&m, &pi, 0, DEFAULT_ROW_CAP).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = dump_bundle_csv(&b, dir.path(), "t0").unwrap();
        assert_eq!(paths.len(), 10);
        let j = std::fs::read_to_string(dir.path().join("t0_J.csv")).unwrap();
        assert_eq!(j, "s0\n0.5\n");
    }
}
