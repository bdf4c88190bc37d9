//! Small dense linear-algebra helpers shared across modules. Matrices are
//! row-major `Vec<Vec<f64>>`; everything here is allocation-light and plain.

/// y = A x for a row-major matrix.
pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

/// y = A^T x for a row-major matrix.
pub fn matvec_t(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let cols = a.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, &xi) in a.iter().zip(x) {
        for (o, &aij) in out.iter_mut().zip(row) {
            *o += aij * xi;
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Cholesky factor L (lower triangular) of a symmetric positive-definite
/// matrix. Returns None when a pivot drops below `tol`.
pub fn cholesky(a: &[Vec<f64>], tol: f64) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves A x = b for a small dense square system by Gaussian elimination
/// with partial pivoting. Returns None on a (near-)singular matrix.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() <= tol {
            return None;
        }
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[col][col];
        for row in 0..col {
            x[row] -= m[row][col] * x[col];
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_small() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(matvec(&a, &[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(matvec_t(&a, &[1.0, 1.0]), vec![4.0, 6.0]);
    }

    #[test]
    fn cholesky_identity() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a, 1e-12).unwrap();
        // L L^T == A
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_solve_roundtrip() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(&a, &[3.0, 5.0], 1e-12).unwrap();
        assert!((2.0 * x[0] + x[1] - 3.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 5.0).abs() < 1e-12);
    }
}
