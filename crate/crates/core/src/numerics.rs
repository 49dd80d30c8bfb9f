//! Small dense linear-algebra utilities: Kronecker products, matrix
//! exponentials, and a Jacobi eigensolver for the validation paths that need
//! an independent diagonalization route.

use ndarray::Array2;
use num_complex::Complex64;

/// Kronecker product, first factor most significant.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for ia in 0..ra {
        for ja in 0..ca {
            let v = a[(ia, ja)];
            if v == Complex64::ZERO {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = v * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Matrix exponential by scaling-and-squaring with a Taylor series.
///
/// Adequate for the small (≤ a few hundred) dimensions this crate works with;
/// the series is run to machine precision after scaling the one-norm below 1/2.
pub fn expm(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let t = a.mapv(|z| z * scale);

    let mut result = Array2::eye(n);
    let mut term = Array2::eye(n);
    for k in 1..=64 {
        term = term.dot(&t) / Complex64::new(k as f64, 0.0);
        result += &term;
        let tnorm = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Eigenvalues and eigenvectors of a real symmetric matrix by cyclic Jacobi
/// rotations. Returns `(values, vectors)` with `vectors` column `k` belonging
/// to `values[k]`, sorted ascending.
pub fn symmetric_eigen(mat: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "symmetric_eigen needs a square matrix");
    let mut a = mat.clone();
    let mut v: Array2<f64> = Array2::eye(n);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    (values, vectors)
}

/// Eigenvalues of a complex Hermitian matrix via the real embedding
/// `[[Re, -Im], [Im, Re]]`, whose spectrum is each eigenvalue doubled.
pub fn hermitian_eigenvalues(mat: &Array2<Complex64>) -> Vec<f64> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols(), "hermitian_eigenvalues needs a square matrix");
    let mut emb = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            emb[(i, j)] = mat[(i, j)].re;
            emb[(i + n, j + n)] = mat[(i, j)].re;
            emb[(i, j + n)] = -mat[(i, j)].im;
            emb[(i + n, j)] = mat[(i, j)].im;
        }
    }
    let (vals, _) = symmetric_eigen(&emb);
    // Doubled spectrum, sorted ascending: take every other entry.
    vals.into_iter().step_by(2).collect()
}

/// Composite Simpson quadrature of `f` on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
