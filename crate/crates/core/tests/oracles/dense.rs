//! Plain nested-vector linear algebra with a Gauss-Jordan inverse, kept
//! independent of the Cholesky path.

use rfelm_core::linalg::Matrix;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Gauss-Jordan with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut aug: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| aug[x][c].abs().total_cmp(&aug[y][c].abs())).unwrap();
        aug.swap(c, p);
        let pivot = aug[c][c];
        for v in aug[c].iter_mut() {
            *v /= pivot;
        }
        for r in 0..n {
            if r != c {
                let f = aug[r][c];
                let pivot_row = aug[c].clone();
                for (v, pv) in aug[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn oracle(h: &Dense, t: &Dense, a_reg: f64) -> Dense {
    let ht = transpose(h);
    let mut g = mul(&ht, h);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += 1.0 / a_reg;
    }
    mul(&inverse(&g), &mul(&ht, t))
}

pub fn frob(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn diff(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

/// `(||(I/A + H^T H) beta - H^T T||, ||H^T T||)`.
pub fn ridge_residual(h: &Dense, t: &Dense, a_reg: f64, beta: &Dense) -> (f64, f64) {
    let ht = transpose(h);
    let mut g = mul(&ht, h);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += 1.0 / a_reg;
    }
    let rhs = mul(&ht, t);
    (frob(&diff(&mul(&g, beta), &rhs)), frob(&rhs))
}
