//! Small dense kernels on column-major faer matrices.

use faer::Mat;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// out = X v.
pub fn matvec(x: &Mat<f64>, v: &[f64], out: &mut [f64]) {
    assert_eq!(x.ncols(), v.len());
    assert_eq!(x.nrows(), out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &vj) in v.iter().enumerate() {
        if vj != 0.0 {
            for (o, &a) in out.iter_mut().zip(x.col_as_slice(j)) {
                *o += a * vj;
            }
        }
    }
}

/// out = X^T u.
pub fn matvec_t(x: &Mat<f64>, u: &[f64], out: &mut [f64]) {
    assert_eq!(x.nrows(), u.len());
    assert_eq!(x.ncols(), out.len());
    for (j, o) in out.iter_mut().enumerate() {
        *o = dot(x.col_as_slice(j), u);
    }
}

/// Largest absolute row sum, an upper bound on the spectral radius.
pub fn inf_norm(x: &Mat<f64>) -> f64 {
    let mut rows = vec![0.0f64; x.nrows()];
    for j in 0..x.ncols() {
        for (r, a) in rows.iter_mut().zip(x.col_as_slice(j)) {
            *r += a.abs();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

/// Flip `v` so its first nonzero entry is positive.
pub fn canonical_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
