//! Dense helpers for the tiny systems that show up everywhere: KKT solves,
//! Gram matrices, and exact projection onto polyhedra.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Solves `A x = b` for a row-major `n x n` matrix by Gaussian elimination
/// with partial pivoting. Returns `None` when a pivot falls below
/// `1e-13` times the largest entry of `A`.
pub fn solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let eps = 1e-13 * scale;
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m[r * n + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pval <= eps {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for k in (r + 1)..n {
            s -= m[r * n + k] * x[k];
        }
        x[r] = s / m[r * n + r];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Gram matrix `R R^T` of a list of rows, row-major.
pub fn gram(rows: &[&[f64]]) -> Vec<f64> {
    let r = rows.len();
    let mut g = vec![0.0; r * r];
    for i in 0..r {
        for j in i..r {
            let v = dot(rows[i], rows[j]);
            g[i * r + j] = v;
            g[j * r + i] = v;
        }
    }
    g
}

/// Indices of a maximal linearly independent prefix-greedy subset of `rows`.
pub fn independent_rows(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut v = r.clone();
        for b in &basis {
            let c = dot(&v, b);
            v = axpy(&v, -c, b);
        }
        let nv = norm(&v);
        if nv > 1e-10 * norm(r).max(1e-300) {
            basis.push(scale(&v, 1.0 / nv));
            keep.push(i);
        }
    }
    keep
}

/// Calls `f` with every subset of `0..m` of size at most `max_size`, in
/// order of increasing size. Stops early when `f` returns `true`.
pub fn for_each_subset(m: usize, max_size: usize, mut f: impl FnMut(&[usize]) -> bool) {
    for size in 0..=max_size.min(m) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if f(&idx) {
                return;
            }
            let mut advanced = false;
            let mut i = size;
            while i > 0 {
                i -= 1;
                if idx[i] < m - size + i {
                    idx[i] += 1;
                    for j in (i + 1)..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
}

/// A closed convex polyhedron `{y : a_i·y <= b_i, e_j·y = f_j}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polyhedron {
    pub dim: usize,
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
}

impl Polyhedron {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ineq: Vec::new(),
            eq: Vec::new(),
        }
    }

    pub fn with_ineq(mut self, a: Vec<f64>, b: f64) -> Self {
        self.ineq.push((a, b));
        self
    }

    pub fn with_eq(mut self, a: Vec<f64>, b: f64) -> Self {
        self.eq.push((a, b));
        self
    }

    fn row_tol(a: &[f64], b: f64, y: &[f64]) -> f64 {
        1e-11 * (1.0 + b.abs() + norm(a) * norm(y))
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.ineq
            .iter()
            .all(|(a, b)| dot(a, y) - b <= Self::row_tol(a, *b, y))
            && self
                .eq
                .iter()
                .all(|(a, b)| (dot(a, y) - b).abs() <= Self::row_tol(a, *b, y))
    }

    /// Euclidean projection of `p`, or `None` when the polyhedron is empty.
    ///
    /// Enumerates candidate active sets with linearly independent rows in
    /// order of increasing size; the first candidate satisfying the KKT
    /// conditions is the projection.
    pub fn project(&self, p: &[f64]) -> Option<Vec<f64>> {
        let eq_rows: Vec<Vec<f64>> = self.eq.iter().map(|(a, _)| a.clone()).collect();
        let keep = independent_rows(&eq_rows);
        let eqs: Vec<&(Vec<f64>, f64)> = keep.iter().map(|&i| &self.eq[i]).collect();
        let free = self.dim.saturating_sub(eqs.len());
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut kkt: Option<Vec<f64>> = None;
        for_each_subset(self.ineq.len(), free, |subset| {
            let rows: Vec<&(Vec<f64>, f64)> = eqs
                .iter()
                .copied()
                .chain(subset.iter().map(|&i| &self.ineq[i]))
                .collect();
            let (y, mult_ok) = if rows.is_empty() {
                (p.to_vec(), true)
            } else {
                let refs: Vec<&[f64]> = rows.iter().map(|(a, _)| a.as_slice()).collect();
                let g = gram(&refs);
                let rhs: Vec<f64> = rows.iter().map(|(a, b)| dot(a, p) - b).collect();
                let Some(lambda) = solve(&g, &rhs) else {
                    return false;
                };
                let mut y = p.to_vec();
                for (l, (a, _)) in lambda.iter().zip(&rows) {
                    y = axpy(&y, -l, a);
                }
                (y, lambda[eqs.len()..].iter().all(|&l| l >= -1e-12))
            };
            if !self.contains(&y) {
                return false;
            }
            if mult_ok {
                kkt = Some(y);
                return true;
            }
            let d = dist(&y, p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
            false
        });
        kkt.or(best.map(|(_, y)| y))
    }

    pub fn is_empty(&self) -> bool {
        self.project(&vec![0.0; self.dim]).is_none()
    }
}

/// Largest eigenvalue magnitude of a symmetric 2x2 matrix `[[a, b], [b, c]]`
/// together with both eigenvalues `(lo, hi)`.
pub fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (m - r, m + r)
}
