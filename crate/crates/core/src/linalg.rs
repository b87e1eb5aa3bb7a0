//! Small dense linear algebra: row-major matrices, pivoted LU with a 1-norm
//! condition estimate, Householder least squares, and a real nonsymmetric
//! eigensolver (balancing + Hessenberg reduction + Francis double-shift QR).
//!
//! Everything here targets the matrix sizes this crate actually produces
//! (≤ ~60×60 dynamic maps, N×3 regressor stacks); no blocking, no BLAS.

use num_complex::Complex;
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: zero pivot at elimination step {step}")]
    Singular { step: usize },
    #[error("rank-deficient least-squares system: effective rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("QR eigenvalue iteration failed to converge (matrix hash {matrix_hash:#018x})")]
    NoConvergence { matrix_hash: u64 },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds from nested rows; panics on ragged input (test/bring-up helper).
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum())
            .fold(T::zero(), T::max)
    }

    /// FNV-1a over the f64 bit patterns of the entries, for reproducing
    /// numeric failures from logs.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for &v in &self.data {
            for b in v.as_f64().to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting: P·A = L·U.
pub struct LuFactor<T> {
    lu: Mat<T>,
    /// perm[i] = row of A sitting in position i of P·A.
    perm: Vec<usize>,
    norm_1_a: T,
}

pub fn lu_factor<T: Real>(a: &Mat<T>) -> Result<LuFactor<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let norm_1_a = a.norm_1();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut max = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > max {
                max = v;
                piv = i;
            }
        }
        if max == T::zero() {
            return Err(LinalgError::Singular { step: k });
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            perm.swap(k, piv);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            for j in k + 1..n {
                let s = lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - m * s;
            }
        }
    }
    Ok(LuFactor { lu, perm, norm_1_a })
}

impl<T: Real> LuFactor<T> {
    fn n(&self) -> usize {
        self.lu.rows()
    }

    /// Solves A·x = b.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(b.len(), n, "rhs length mismatch");
        // Ly = Pb (unit lower), then Ux = y.
        let mut x: Vec<T> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves Aᵀ·x = b (needed by the condition estimator).
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(b.len(), n, "rhs length mismatch");
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀv = b, Lᵀw = v, x = Pᵀw.
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s = s - self.lu[(j, i)] * w[j];
            }
            w[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s = s - self.lu[(j, i)] * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            x[self.perm[i]] = w[i];
        }
        x
    }

    /// Solves A·X = B column by column.
    pub fn solve_mat(&self, b: &Mat<T>) -> Mat<T> {
        assert_eq!(b.rows(), self.n(), "rhs rows mismatch");
        let mut out = Mat::zeros(b.rows(), b.cols());
        let mut col = vec![T::zero(); b.rows()];
        for j in 0..b.cols() {
            for i in 0..b.rows() {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..b.rows() {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// 1-norm condition number estimate, ‖A‖₁·est(‖A⁻¹‖₁), with Hager's
    /// iteration for the inverse norm (a few solves, no explicit inverse).
    pub fn cond_1norm_estimate(&self) -> T {
        let n = self.n();
        if n == 0 {
            return T::one();
        }
        let mut x = vec![T::one() / T::of_usize(n); n];
        let mut est = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<T> = y
                .iter()
                .map(|&v| if v >= T::zero() { T::one() } else { -T::one() })
                .collect();
            let z = self.solve_transpose(&xi);
            let (mut jmax, mut zmax) = (0, T::zero());
            for (j, &v) in z.iter().enumerate() {
                if v.abs() > zmax {
                    zmax = v.abs();
                    jmax = j;
                }
            }
            let ztx: T = z.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![T::zero(); n];
            x[jmax] = T::one();
        }
        self.norm_1_a * est
    }
}

/// Least-squares solution of min‖A·x − b‖₂ by Householder QR (never via the
/// normal equations). Requires A to have full column rank: a diagonal entry
/// of R collapsing below `eps·max|R_kk|` reports rank deficiency.
pub fn lstsq<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} for {}x{} matrix",
            b.len(),
            m,
            n
        )));
    }
    if m < n {
        return Err(LinalgError::DimensionMismatch(format!(
            "underdetermined system {}x{}",
            m, n
        )));
    }
    let mut qr = a.clone();
    let mut rhs = b.to_vec();
    let mut rdiag = vec![T::zero(); n];
    for k in 0..n {
        let mut nrm = T::zero();
        for i in k..m {
            nrm = nrm.hypot(qr[(i, k)]);
        }
        if nrm > T::zero() {
            if qr[(k, k)] < T::zero() {
                nrm = -nrm;
            }
            for i in k..m {
                qr[(i, k)] = qr[(i, k)] / nrm;
            }
            qr[(k, k)] = qr[(k, k)] + T::one();
            // Reflect the remaining columns and the right-hand side.
            for j in k + 1..n {
                let mut s = T::zero();
                for i in k..m {
                    s = s + qr[(i, k)] * qr[(i, j)];
                }
                s = -s / qr[(k, k)];
                for i in k..m {
                    let u = qr[(i, k)];
                    qr[(i, j)] = qr[(i, j)] + s * u;
                }
            }
            let mut s = T::zero();
            for i in k..m {
                s = s + qr[(i, k)] * rhs[i];
            }
            s = -s / qr[(k, k)];
            for i in k..m {
                rhs[i] = rhs[i] + s * qr[(i, k)];
            }
        }
        rdiag[k] = -nrm;
    }
    let max_diag = rdiag.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let tol = T::epsilon() * T::of_usize(m.max(n)) * max_diag;
    let rank = rdiag.iter().filter(|v| v.abs() > tol).count();
    if rank < n {
        return Err(LinalgError::RankDeficient { rank, cols: n });
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s = s - qr[(i, j)] * x[j];
        }
        x[i] = s / rdiag[i];
    }
    Ok(x)
}

/// All eigenvalues of a real square matrix.
///
/// Pipeline: Parlett–Reinsch diagonal balancing (similarity, preserves the
/// spectrum), Householder reduction to upper Hessenberg form, then the
/// Francis implicit double-shift QR iteration, eigenvalues only.
pub fn eigenvalues<T: Real>(a: &Mat<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let hash = a.content_hash();
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h, hash)
}

/// In-place diagonal balancing: scales rows/columns by powers of 2 until row
/// and column norms are of comparable size (exact similarity in binary FP).
fn balance<T: Real>(a: &mut Mat<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sq = radix * radix;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    r = r + a[(i, j)].abs();
                    c = c + a[(j, i)].abs();
                }
            }
            if r == T::zero() || c == T::zero() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let mut cc = c;
            let mut g = r / radix;
            while cc < g {
                f = f * radix;
                cc = cc * sq;
            }
            g = r * radix;
            while cc > g {
                f = f / radix;
                cc = cc / sq;
            }
            if (cc + r) / f < T::lit(0.95) * s {
                converged = false;
                let ginv = T::one() / f;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] * ginv;
                }
                for j in 0..n {
                    a[(j, i)] = a[(j, i)] * f;
                }
            }
        }
        if converged {
            return;
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form; entries below
/// the first subdiagonal are zeroed on exit.
fn hessenberg<T: Real>(a: &mut Mat<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut ort = vec![T::zero(); n];
    for m in 1..n - 1 {
        let mut scale = T::zero();
        for i in m..n {
            scale = scale + a[(i, m - 1)].abs();
        }
        if scale == T::zero() {
            continue;
        }
        let mut h = T::zero();
        for i in (m..n).rev() {
            ort[i] = a[(i, m - 1)] / scale;
            h = h + ort[i] * ort[i];
        }
        let mut g = h.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        h = h - ort[m] * g;
        ort[m] = ort[m] - g;
        // Similarity transform H ← (I − uuᵀ/h) H (I − uuᵀ/h).
        for j in m..n {
            let mut f = T::zero();
            for i in (m..n).rev() {
                f = f + ort[i] * a[(i, j)];
            }
            f = f / h;
            for i in m..n {
                let u = ort[i];
                a[(i, j)] = a[(i, j)] - f * u;
            }
        }
        for i in 0..n {
            let mut f = T::zero();
            for j in (m..n).rev() {
                f = f + ort[j] * a[(i, j)];
            }
            f = f / h;
            for j in m..n {
                let u = ort[j];
                a[(i, j)] = a[(i, j)] - f * u;
            }
        }
        a[(m, m - 1)] = scale * g;
        for i in m + 1..n {
            a[(i, m - 1)] = T::zero();
        }
    }
    // Clear transform leftovers below the subdiagonal.
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = T::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns all
/// eigenvalues. Iteration cap of 30 sweeps per eigenvalue plus the classic
/// exceptional shifts at sweeps 10/20/30.
fn hqr<T: Real>(h: &mut Mat<T>, matrix_hash: u64) -> Result<Vec<Complex<T>>, LinalgError> {
    let nn = h.rows();
    let mut d = vec![T::zero(); nn];
    let mut e = vec![T::zero(); nn];
    let low = 0isize;
    let mut n = nn as isize - 1;
    let eps = T::epsilon();
    let mut exshift = T::zero();
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    let mut norm = T::zero();
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm = norm + h[(i, j)].abs();
        }
    }
    if norm == T::zero() {
        return Ok(vec![Complex::new(T::zero(), T::zero()); nn]);
    }

    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let budget = 30 * nn.max(1);
    let at = |h: &Mat<T>, i: isize, j: isize| h[(i as usize, j as usize)];

    while n >= low {
        // Find a negligible subdiagonal element.
        let mut l = n;
        while l > low {
            s = at(h, l - 1, l - 1).abs() + at(h, l, l).abs();
            if s == T::zero() {
                s = norm;
            }
            if at(h, l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // Deflate one real root.
            let v = at(h, n, n) + exshift;
            h[(n as usize, n as usize)] = v;
            d[n as usize] = v;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Deflate a 2x2 block: real pair or complex conjugates.
            w = at(h, n, n - 1) * at(h, n - 1, n);
            p = (at(h, n - 1, n - 1) - at(h, n, n)) / T::lit(2.0);
            q = p * p + w;
            z = q.abs().sqrt();
            let hnn = at(h, n, n) + exshift;
            h[(n as usize, n as usize)] = hnn;
            h[((n - 1) as usize, (n - 1) as usize)] = at(h, n - 1, n - 1) + exshift;
            x = hnn;
            if q >= T::zero() {
                z = if p >= T::zero() { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = if z != T::zero() { x - w / z } else { x + z };
                e[(n - 1) as usize] = T::zero();
                e[n as usize] = T::zero();
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No deflation: form a shift and chase one double-step bulge.
            x = at(h, n, n);
            y = at(h, n - 1, n - 1);
            w = at(h, n, n - 1) * at(h, n - 1, n);

            if iter == 10 || iter == 20 {
                // Exceptional shift (Wilkinson's ad hoc form).
                exshift = exshift + x;
                for i in low..=n {
                    let v = at(h, i, i) - x;
                    h[(i as usize, i as usize)] = v;
                }
                s = at(h, n, n - 1).abs() + at(h, n - 1, n - 2).abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / T::lit(2.0);
                s = s * s + w;
                if s > T::zero() {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / T::lit(2.0) + s);
                    for i in low..=n {
                        let v = at(h, i, i) - s;
                        h[(i as usize, i as usize)] = v;
                    }
                    exshift = exshift + s;
                    x = T::lit(0.964);
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > budget {
                return Err(LinalgError::NoConvergence { matrix_hash });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            loop {
                z = at(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(h, m + 1, m) + at(h, m, m + 1);
                q = at(h, m + 1, m + 1) - z - r - s;
                r = at(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                if at(h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (at(h, m - 1, m - 1).abs() + z.abs() + at(h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                h[(i as usize, (i - 2) as usize)] = T::zero();
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = T::zero();
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = at(h, k, k - 1);
                    q = at(h, k + 1, k - 1);
                    r = if notlast { at(h, k + 2, k - 1) } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x == T::zero() {
                        continue;
                    }
                    p = p / x;
                    q = q / x;
                    r = r / x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < T::zero() {
                    s = -s;
                }
                if s == T::zero() {
                    continue;
                }
                if k != m {
                    h[(k as usize, (k - 1) as usize)] = -s * x;
                } else if l != m {
                    let v = -at(h, k, k - 1);
                    h[(k as usize, (k - 1) as usize)] = v;
                }
                p = p + s;
                x = p / s;
                y = q / s;
                z = r / s;
                q = q / p;
                r = r / p;

                for j in k as usize..nn {
                    let mut pp = at(h, k, j as isize) + q * at(h, k + 1, j as isize);
                    if notlast {
                        pp = pp + r * at(h, k + 2, j as isize);
                        let v = at(h, k + 2, j as isize) - pp * z;
                        h[((k + 2) as usize, j)] = v;
                    }
                    let v1 = at(h, k, j as isize) - pp * x;
                    h[(k as usize, j)] = v1;
                    let v2 = at(h, k + 1, j as isize) - pp * y;
                    h[((k + 1) as usize, j)] = v2;
                }
                let imax = n.min(k + 3);
                for i in 0..=imax as usize {
                    let mut pp = x * at(h, i as isize, k) + y * at(h, i as isize, k + 1);
                    if notlast {
                        pp = pp + z * at(h, i as isize, k + 2);
                        let v = at(h, i as isize, k + 2) - pp * r;
                        h[(i, (k + 2) as usize)] = v;
                    }
                    let v1 = at(h, i as isize, k) - pp;
                    h[(i, k as usize)] = v1;
                    let v2 = at(h, i as isize, k + 1) - pp * q;
                    h[(i, (k + 1) as usize)] = v2;
                }
            }
        }
    }

    Ok(d.into_iter().zip(e).map(|(re, im)| Complex::new(re, im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-10;

    fn sorted_moduli(eigs: &[Complex<f64>]) -> Vec<f64> {
        let mut m: Vec<f64> = eigs.iter().map(|c| c.norm()).collect();
        m.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m
    }

    /// Companion matrix of x^k − c_{k−1}x^{k−1} − … − c_0.
    fn companion(coeffs: &[f64]) -> Mat<f64> {
        let k = coeffs.len();
        let mut m = Mat::zeros(k, k);
        for (j, &c) in coeffs.iter().enumerate() {
            m[(0, j)] = c;
        }
        for i in 1..k {
            m[(i, i - 1)] = 1.0;
        }
        m
    }

    #[test]
    fn lu_solves_a_known_3x3() {
        let a: Mat<f64> = Mat::from_rows(vec![
            vec![2.0, 1.0, 1.0],
            vec![4.0, -6.0, 0.0],
            vec![-2.0, 7.0, 2.0],
        ]);
        let f = lu_factor(&a).unwrap();
        let x = f.solve(&[5.0, -2.0, 9.0]);
        for (xi, want) in x.iter().zip([1.0, 1.0, 2.0]) {
            assert!((xi - want).abs() < TOL, "{x:?}");
        }
        // transpose solve: Aᵀx = b checked by re-multiplying
        let xt = f.solve_transpose(&[1.0, 2.0, 3.0]);
        let back: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| a[(i, j)] * xt[i]).sum())
            .collect();
        for (bi, want) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((bi - want).abs() < TOL);
        }
    }

    #[test]
    fn lu_reports_singularity() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(lu_factor(&a), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn condition_estimate_tracks_known_conditioning() {
        let a: Mat<f64> = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1e-8]]);
        let f = lu_factor(&a).unwrap();
        let c = f.cond_1norm_estimate();
        assert!((c / 1e8 - 1.0).abs() < 1e-6, "cond {c}");
        let id: Mat<f64> = Mat::identity(5);
        assert!((lu_factor(&id).unwrap().cond_1norm_estimate() - 1.0).abs() < TOL);
    }

    #[test]
    fn lstsq_exact_and_overdetermined() {
        let a: Mat<f64> = Mat::identity(3);
        let x = lstsq(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);

        // Overdetermined but consistent: residual zero, exact solution.
        let a = Mat::from_rows(vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, -1.0],
        ]);
        let truth = [3.0, -0.5];
        let b: Vec<f64> = (0..4)
            .map(|i| a[(i, 0)] * truth[0] + a[(i, 1)] * truth[1])
            .collect();
        let x = lstsq(&a, &b).unwrap();
        assert!((x[0] - truth[0]).abs() < TOL && (x[1] - truth[1]).abs() < TOL);
    }

    #[test]
    fn lstsq_flags_rank_deficiency() {
        let a = Mat::from_rows(vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![3.0, 6.0, 9.0],
            vec![4.0, 8.0, 12.0],
        ]);
        match lstsq(&a, &[1.0, 2.0, 3.0, 4.0]) {
            Err(LinalgError::RankDeficient { rank, cols }) => {
                assert_eq!((rank, cols), (1, 3));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_and_identity() {
        let id: Mat<f64> = Mat::identity(4);
        let eigs = eigenvalues(&id).unwrap();
        assert!(eigs.iter().all(|c| (c.re - 1.0).abs() < TOL && c.im.abs() < TOL));

        let mut d: Mat<f64> = Mat::zeros(4, 4);
        for (i, v) in [0.5, -0.9, 0.1, 0.0].into_iter().enumerate() {
            d[(i, i)] = v;
        }
        let m = sorted_moduli(&eigenvalues(&d).unwrap());
        for (got, want) in m.iter().zip([0.0, 0.1, 0.5, 0.9]) {
            assert!((got - want).abs() < TOL);
        }
    }

    #[test]
    fn eigenvalues_of_rotation_block_are_conjugate_pair() {
        // [[a,-b],[b,a]] has eigenvalues a ± bi.
        let a: Mat<f64> = Mat::from_rows(vec![vec![0.3, -0.7], vec![0.7, 0.3]]);
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|p, q| p.im.partial_cmp(&q.im).unwrap());
        assert!((eigs[0].re - 0.3).abs() < TOL && (eigs[0].im + 0.7).abs() < TOL);
        assert!((eigs[1].re - 0.3).abs() < TOL && (eigs[1].im - 0.7).abs() < TOL);
    }

    #[test]
    fn eigenvalues_match_companion_polynomial_roots() {
        // (x−1)(x−2)(x−3)(x+0.5)(x−0.25) expanded:
        // x^5 − 5.75x^4 + 9.375x^3 − 2.5x^2 − 2.875x + 0.75
        let c = companion(&[5.75, -9.375, 2.5, 2.875, -0.75]);
        let mut re: Vec<f64> = eigenvalues(&c)
            .unwrap()
            .into_iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-8, "unexpected imaginary part {z}");
                z.re
            })
            .collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in re.iter().zip([-0.5, 0.25, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-8, "{re:?}");
        }
    }

    #[test]
    fn eigenvalue_sums_and_products_match_trace_and_det() {
        // Deterministic pseudo-random matrix; Σλ = tr(A), Π|λ| = |det(A)|.
        let n = 10;
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut a: Mat<f64> = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = next();
            }
        }
        let eigs = eigenvalues(&a).unwrap();
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let re_sum: f64 = eigs.iter().map(|c| c.re).sum();
        let im_sum: f64 = eigs.iter().map(|c| c.im).sum();
        assert!((re_sum - trace).abs() < 1e-8, "trace {trace} vs {re_sum}");
        assert!(im_sum.abs() < 1e-8);

        let f = lu_factor(&a).unwrap();
        let mut log_det = 0.0;
        for i in 0..n {
            log_det += f.lu[(i, i)].abs().ln();
        }
        let log_prod: f64 = eigs.iter().map(|c| c.norm().ln()).sum();
        assert!((log_det - log_prod).abs() < 1e-7);
    }

    #[test]
    fn balancing_handles_badly_scaled_matrix() {
        // Same spectrum as [[1, 1],[1, 1e0]] pattern but scaled by 1e9.
        let a = Mat::from_rows(vec![vec![1.0, 1e9], vec![1e-9, 2.0]]);
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|p, q| p.re.partial_cmp(&q.re).unwrap());
        // Characteristic polynomial x² − 3x + 1: roots (3 ± √5)/2.
        let r1 = (3.0 - 5.0f64.sqrt()) / 2.0;
        let r2 = (3.0 + 5.0f64.sqrt()) / 2.0;
        assert!((eigs[0].re - r1).abs() < 1e-9 && (eigs[1].re - r2).abs() < 1e-9);
    }

    #[test]
    fn eigenvalues_generic_over_f32() {
        let a: Mat<f32> = Mat::from_rows(vec![vec![0.0f32, -1.0], vec![1.0, 0.0]]);
        let eigs = eigenvalues(&a).unwrap();
        assert!(eigs.iter().all(|c| (c.norm() - 1.0).abs() < 1e-5));
    }
}
