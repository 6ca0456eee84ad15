//! Small dense linear algebra: minimum-norm solves by column-pivoted
//! Householder QR and symmetric eigenvalues by tridiagonal reduction
//! followed by implicit QL.

use alloc::vec;
use alloc::vec::Vec;

/// Square matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must hold n*n entries");
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n);
        let mut acc = 0.0;
        for i in 0..self.n {
            let row: f64 = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            acc += x[i] * row;
        }
        acc
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(self)
    }
}

/// Minimum-norm solution of a (possibly rank-deficient) linear system.
#[derive(Debug, Clone)]
pub struct MinNormSolution {
    pub x: Vec<f64>,
    /// Numerical rank of the system matrix.
    pub rank: usize,
}

/// Solves `A x = b` for `A` given row-major as `rows × cols`.
///
/// Factors `Aᵀ P = Q R` with column pivoting (pivoting over the equations of
/// `A`). Equations beyond the numerical rank are dropped, so the result is
/// the minimum-norm solution of a maximal independent subset of the
/// equations; callers check the full residual when the system may be
/// inconsistent. Columns whose remaining norm is below `rank_tol` times the
/// largest initial norm count as dependent.
pub fn solve_min_norm(a: &[f64], rows: usize, cols: usize, b: &[f64], rank_tol: f64) -> MinNormSolution {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    // Columns of Aᵀ are the rows of A.
    let mut qr: Vec<Vec<f64>> = a.chunks_exact(cols).map(|r| r.to_vec()).collect();
    let mut perm: Vec<usize> = (0..rows).collect();
    let steps = rows.min(cols);
    let mut betas = Vec::with_capacity(steps);
    let mut r_diag = Vec::with_capacity(steps);
    let scale = qr.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let mut rank = 0;
    for k in 0..steps {
        let (p, pnorm) = (k..rows)
            .map(|j| (j, norm(&qr[j][k..])))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pnorm <= rank_tol * scale || pnorm == 0.0 {
            break;
        }
        qr.swap(k, p);
        perm.swap(k, p);
        let col = &mut qr[k];
        let alpha = if col[k] >= 0.0 { -pnorm } else { pnorm };
        col[k] -= alpha;
        let vnorm2: f64 = col[k..].iter().map(|v| v * v).sum();
        let beta = 2.0 / vnorm2;
        let v: Vec<f64> = col[k..].to_vec();
        for other in qr.iter_mut().skip(k + 1) {
            let dot: f64 = v.iter().zip(&other[k..]).map(|(x, y)| x * y).sum();
            let f = beta * dot;
            for (o, vi) in other[k..].iter_mut().zip(&v) {
                *o -= f * vi;
            }
        }
        betas.push(beta);
        r_diag.push(alpha);
        rank += 1;
    }
    // Forward solve Rᵀ z = Pᵀ b over the first `rank` equations.
    let mut z = vec![0.0; cols];
    for i in 0..rank {
        let mut acc = b[perm[i]];
        for k in 0..i {
            acc -= qr[i][k] * z[k];
        }
        z[i] = acc / r_diag[i];
    }
    // x = H_0 H_1 … H_{rank-1} z, where H_k is stored below the diagonal of
    // column k (with the diagonal slot holding v_k[0]).
    let mut x = z;
    for k in (0..rank).rev() {
        let v = &qr[k][k..];
        let dot: f64 = v.iter().zip(&x[k..]).map(|(a, b)| a * b).sum();
        let f = betas[k] * dot;
        for (xi, vi) in x[k..].iter_mut().zip(v) {
            *xi -= f * vi;
        }
    }
    MinNormSolution { x, rank }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Eigenvalues (ascending) of the symmetric matrix whose lower triangle is
/// taken from `m`.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.order();
    if n == 0 {
        return Vec::new();
    }
    let (mut d, mut e) = tridiagonalize(m);
    tridiagonal_ql(&mut d, &mut e);
    d.sort_by(f64::total_cmp);
    d
}

/// Householder reduction to tridiagonal form using the lower triangle.
/// Returns the diagonal and the subdiagonal (`e[i]` couples `i` and `i+1`,
/// `e[n-1] = 0`).
fn tridiagonalize(m: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.order();
    // Packed lower triangle, row i holds columns 0..=i.
    let mut low: Vec<Vec<f64>> = (0..n).map(|i| m.row(i)[..=i].to_vec()).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<f64> = (k + 1..n).map(|i| low[i][k]).collect();
        let xnorm = norm(&x);
        d[k] = low[k][k];
        if xnorm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        for (vi, xi) in v[..len].iter_mut().zip(&x) {
            *vi = *xi;
        }
        v[0] -= alpha;
        let vnorm2: f64 = v[..len].iter().map(|a| a * a).sum();
        if vnorm2 == 0.0 {
            e[k] = x[0];
            continue;
        }
        let beta = 2.0 / vnorm2;
        e[k] = alpha;
        // p = beta * A22 v using the packed lower triangle of A22.
        for pi in p[..len].iter_mut() {
            *pi = 0.0;
        }
        for i in 0..len {
            let row = &low[k + 1 + i][k + 1..];
            let vi = v[i];
            let mut acc = 0.0;
            for j in 0..i {
                acc += row[j] * v[j];
                p[j] += row[j] * vi;
            }
            p[i] += acc + row[i] * vi;
        }
        for pi in p[..len].iter_mut() {
            *pi *= beta;
        }
        let pv: f64 = p[..len].iter().zip(&v[..len]).map(|(a, b)| a * b).sum();
        let half = 0.5 * beta * pv;
        for i in 0..len {
            p[i] -= half * v[i];
        }
        // A22 -= v wᵀ + w vᵀ with w = p.
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut low[k + 1 + i][k + 1..];
            for j in 0..=i {
                row[j] -= vi * p[j] + wi * v[j];
            }
        }
    }
    if n >= 2 {
        d[n - 2] = low[n - 2][n - 2];
        e[n - 2] = low[n - 1][n - 2];
    }
    d[n - 1] = low[n - 1][n - 1];
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_solve_matches_hand_result() {
        // x + y = 3, x - y = 1
        let sol = solve_min_norm(&[1.0, 1.0, 1.0, -1.0], 2, 2, &[3.0, 1.0], 1e-12);
        assert_eq!(sol.rank, 2);
        assert!((sol.x[0] - 2.0).abs() < 1e-14);
        assert!((sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn underdetermined_solve_is_minimum_norm() {
        // x + y + z = 3 has minimum-norm solution (1, 1, 1).
        let sol = solve_min_norm(&[1.0, 1.0, 1.0], 1, 3, &[3.0], 1e-12);
        assert_eq!(sol.rank, 1);
        for v in sol.x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let sol = solve_min_norm(&[1.0, 2.0, 2.0, 4.0], 2, 2, &[1.0, 2.0], 1e-10);
        assert_eq!(sol.rank, 1);
        let r0 = sol.x[0] + 2.0 * sol.x[1] - 1.0;
        assert!(r0.abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let ev = DenseMatrix::identity(5).symmetric_eigenvalues();
        assert!(ev.iter().all(|&v| (v - 1.0).abs() < 1e-14));

        let ones = DenseMatrix::from_fn(4, |_, _| 1.0);
        let ev = ones.symmetric_eigenvalues();
        assert!((ev[3] - 4.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|v| v.abs() < 1e-12));

        // Second-difference matrix: 2 - 2cos(kπ/(n+1)).
        let n = 30;
        let lap = DenseMatrix::from_fn(n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = lap.symmetric_eigenvalues();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * libm::cos((k + 1) as f64 * core::f64::consts::PI / (n + 1) as f64);
            assert!((v - exact).abs() < 1e-12, "{k}: {v} vs {exact}");
        }
    }
}
