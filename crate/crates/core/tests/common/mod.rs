//! Test-only oracles, written independently of the library's numerics.
#![allow(dead_code)]

/// Naive 1/n moment via raw sums: E[xy] - E[x]E[y].
pub fn raw_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    sxy / n - (sx / n) * (sy / n)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> [f64; N] {
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Brute-force least squares of `lnl` on `[1, lnd, year - y0]` through the
/// uncentered 3x3 normal equations. Returns `(intercept, coef_lnd, coef_year)`
/// with no sign flip.
pub fn brute_ols(lnl: &[f64], lnd: &[f64], years: &[f64], y0: f64) -> [f64; 3] {
    let rows: Vec<[f64; 3]> = lnd
        .iter()
        .zip(years)
        .map(|(d, y)| [1.0, *d, y - y0])
        .collect();
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for (r, l) in rows.iter().zip(lnl) {
        for i in 0..3 {
            xty[i] += r[i] * l;
            for j in 0..3 {
                xtx[i][j] += r[i] * r[j];
            }
        }
    }
    solve(xtx, xty)
}

pub const FIXTURE_LND: [f64; 4] = [1.0, 2.0, 4.0, 5.0];
pub const FIXTURE_YEARS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
/// Residual of the fixture lnD on {1, Y}.
pub const FIXTURE_RESID: [f64; 4] = [0.1, -0.3, 0.3, -0.1];

// Exact rational values for the fixture with Cov(lnD, eps) = 1/100,
// beta = 37/100, beta_year = 37/100 * 45/100.
pub const FIXTURE_PLIM_BETA: f64 = 0.444; // 111/250
pub const FIXTURE_PLIM_BETA_YEAR: f64 = 0.0629; // 629/10000
pub const FIXTURE_PLIM_RATIO: f64 = 629.0 / 4440.0;
pub const FIXTURE_BIAS: f64 = -37.0 / 120.0;
