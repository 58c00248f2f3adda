//! Natural cubic spline through vector-valued knots.

use ndarray::{Array2, ArrayView2};

/// Second derivatives at every knot for each value column, with zero
/// curvature at both ends.
fn second_derivatives(x: &[f64], y: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.len();
    let cols = y.ncols();
    let mut m = Array2::zeros((n, cols));
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations
    //   h[i-1] M[i-1] + 2(h[i-1]+h[i]) M[i] + h[i] M[i+1] = 6 (Δ[i] − Δ[i-1])
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let interior = n - 2;
    let mut c_prime = vec![0.0; interior];
    let mut d_prime = Array2::<f64>::zeros((interior, cols));
    for i in 0..interior {
        let k = i + 1;
        let lower = h[k - 1];
        let diag = 2.0 * (h[k - 1] + h[k]);
        let upper = h[k];
        let denom = if i == 0 { diag } else { diag - lower * c_prime[i - 1] };
        c_prime[i] = upper / denom;
        for c in 0..cols {
            let rhs = 6.0 * ((y[[k + 1, c]] - y[[k, c]]) / h[k] - (y[[k, c]] - y[[k - 1, c]]) / h[k - 1]);
            let prev = if i == 0 { 0.0 } else { d_prime[[i - 1, c]] };
            d_prime[[i, c]] = (rhs - lower * prev) / denom;
        }
    }
    for i in (0..interior).rev() {
        for c in 0..cols {
            let next = if i + 1 < interior { m[[i + 2, c]] } else { 0.0 };
            m[[i + 1, c]] = d_prime[[i, c]] - c_prime[i] * next;
        }
    }
    m
}

/// Evaluates the spline through `(x[i], y[i, ·])` at `t = 0, 1, …, len−1`,
/// returning a columns × len matrix. Knots must be strictly increasing and
/// bracket `[0, len−1]`.
pub fn interpolate_natural(x: &[f64], y: ArrayView2<'_, f64>, len: usize) -> Array2<f64> {
    debug_assert_eq!(x.len(), y.nrows());
    debug_assert!(x.windows(2).all(|w| w[1] > w[0]));
    let cols = y.ncols();
    let mut out = Array2::zeros((cols, len));
    if x.len() == 1 {
        for c in 0..cols {
            out.row_mut(c).fill(y[[0, c]]);
        }
        return out;
    }
    let m = second_derivatives(x, y);
    let mut seg = 0;
    for t in 0..len {
        let tf = t as f64;
        while seg + 2 < x.len() && tf > x[seg + 1] {
            seg += 1;
        }
        let h = x[seg + 1] - x[seg];
        let a = (x[seg + 1] - tf) / h;
        let b = (tf - x[seg]) / h;
        let h2 = h * h / 6.0;
        let ca = (a * a * a - a) * h2;
        let cb = (b * b * b - b) * h2;
        for c in 0..cols {
            out[[c, t]] = a * y[[seg, c]] + b * y[[seg + 1, c]] + ca * m[[seg, c]] + cb * m[[seg + 1, c]];
        }
    }
    out
}
