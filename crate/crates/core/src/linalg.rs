//! Small dense solvers: Householder least squares and Cholesky.

use crate::scalar::Scalar;

/// A design column that is (numerically) a linear combination of earlier columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collinearity {
    pub column: usize,
    pub depends_on: Vec<usize>,
}

/// Minimizes `||y - X b||` over `b` where `X` is given column by column.
///
/// Uses Householder QR without pivoting. A column whose component orthogonal to the
/// earlier columns is below a relative tolerance of its own norm is reported as
/// collinear, together with the earlier columns it combines.
pub fn least_squares<T: Scalar>(columns: &[&[T]], y: &[T]) -> Result<Vec<T>, Collinearity> {
    let p = columns.len();
    let n = y.len();
    debug_assert!(columns.iter().all(|c| c.len() == n));
    let mut a: Vec<Vec<T>> = columns.iter().map(|c| c.to_vec()).collect();
    let mut rhs = y.to_vec();
    let norms: Vec<T> = a.iter().map(|c| norm(c)).collect();
    let tol = T::epsilon().powf(T::of(0.7));
    let mut diag = vec![T::zero(); p];

    for k in 0..p {
        let sub = norm(&a[k][k.min(n)..]);
        if k >= n || sub <= tol * norms[k] || norms[k] == T::zero() {
            return Err(dependency(&a, &diag, &norms, k));
        }
        let x0 = a[k][k];
        let alpha = if x0 >= T::zero() { -sub } else { sub };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vv: T = v.iter().map(|&t| t * t).sum();
        let two = T::of(2.0);
        for col in a.iter_mut().skip(k + 1) {
            reflect(&v, vv, two, &mut col[k..]);
        }
        reflect(&v, vv, two, &mut rhs[k..]);
        diag[k] = alpha;
        a[k][k] = alpha;
        for t in a[k][k + 1..].iter_mut() {
            *t = T::zero();
        }
    }

    let mut b = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = rhs[i];
        for j in i + 1..p {
            s -= a[j][i] * b[j];
        }
        b[i] = s / diag[i];
    }
    Ok(b)
}

fn reflect<T: Scalar>(v: &[T], vv: T, two: T, x: &mut [T]) {
    let dot: T = v.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum();
    let f = two * dot / vv;
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

fn dependency<T: Scalar>(a: &[Vec<T>], diag: &[T], norms: &[T], k: usize) -> Collinearity {
    // Solve R[0..k, 0..k] x = (Q^T a_k)[0..k] for the combining weights.
    let mut x = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = a[k][i];
        for j in i + 1..k {
            s -= a[j][i] * x[j];
        }
        x[i] = s / diag[i];
    }
    let cut = T::of(1e-8) * norms[k].max(T::min_positive_value());
    let depends_on = (0..k).filter(|&i| (x[i] * norms[i]).abs() > cut).collect();
    Collinearity { column: k, depends_on }
}

fn norm<T: Scalar>(x: &[T]) -> T {
    let scale = x.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    let s: T = x.iter().map(|&v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, `p x p`).
/// Returns `None` when the Cholesky factorization breaks down.
pub fn solve_spd<T: Scalar>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let p = b.len();
    debug_assert_eq!(a.len(), p * p);
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut z = vec![T::zero(); p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let ones = vec![1.0_f64; 5];
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v + 1.0).collect();
        let b = least_squares(&[&ones, &x], &y).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_column_is_named_with_its_sources() {
        let a = [1.0_f64, 2.0, 3.0, 5.0];
        let b = [0.0_f64, 1.0, 0.0, 1.0];
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let y = [1.0, 2.0, 3.0, 4.0];
        let err = least_squares(&[&a, &b, &c], &y).unwrap_err();
        assert_eq!(err, Collinearity { column: 2, depends_on: vec![0, 1] });
    }

    #[test]
    fn cholesky_solves_and_rejects_indefinite() {
        let a = [4.0_f64, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(solve_spd(&[1.0_f64, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
