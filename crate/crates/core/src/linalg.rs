//! Small dense helpers for the condition checkers (n ≤ 8).

/// Gaussian elimination with partial pivoting. Returns the determinant and,
/// when `rhs` is given and the matrix is nonsingular, the solution of `A z = rhs`.
pub(crate) fn det_solve(mut a: Vec<Vec<f64>>, mut rhs: Option<Vec<f64>>) -> (f64, Option<Vec<f64>>) {
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap_or(c);
        if a[p][c] == 0.0 {
            return (0.0, None);
        }
        if p != c {
            a.swap(p, c);
            if let Some(r) = rhs.as_mut() {
                r.swap(p, c);
            }
            det = -det;
        }
        det *= a[c][c];
        for i in c + 1..n {
            let f = a[i][c] / a[c][c];
            if f != 0.0 {
                for j in c..n {
                    a[i][j] -= f * a[c][j];
                }
                if let Some(r) = rhs.as_mut() {
                    r[i] -= f * r[c];
                }
            }
        }
    }
    let sol = rhs.map(|mut r| {
        for i in (0..n).rev() {
            let mut s = r[i];
            for j in i + 1..n {
                s -= a[i][j] * r[j];
            }
            r[i] = s / a[i][i];
        }
        r
    });
    (det, sol)
}
