//! Just enough dense linear algebra for the equation-solving attacks.

use crate::error::{Error, Result};

/// Solve A x = b in place by Gaussian elimination with partial pivoting.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) || b.len() != n {
        return Err(Error::InvalidArgument("solve needs a square system".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Minimize |A x - b|^2 via the normal equations. Exact for square
/// nonsingular systems.
pub(crate) fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = a.len();
    if m == 0 || b.len() != m {
        return Err(Error::InvalidArgument("empty system".into()));
    }
    let n = a[0].len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("ragged matrix".into()));
    }
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for (row, &y) in a.iter().zip(b) {
        for i in 0..n {
            for j in i..n {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    for i in 0..n {
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    solve(ata, atb)
}
