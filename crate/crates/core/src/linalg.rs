//! Small dense symmetric solves for the normal equations of IRLS.

/// Packed accumulation of `sum c * x x^T` into a full `p x p` row-major buffer
/// (upper triangle only; call [`symmetrize`] before solving).
#[inline]
pub(crate) fn add_outer(h: &mut [f64], p: usize, x: &[f64], c: f64) {
    for i in 0..p {
        let ci = c * x[i];
        if ci == 0.0 {
            continue;
        }
        let row = &mut h[i * p..(i + 1) * p];
        for j in i..p {
            row[j] += ci * x[j];
        }
    }
}

pub(crate) fn symmetrize(h: &mut [f64], p: usize) {
    for i in 0..p {
        for j in 0..i {
            h[i * p + j] = h[j * p + i];
        }
    }
}

/// Solves `h z = b` for symmetric positive-definite `h` by Cholesky after
/// Jacobi scaling. Returns `None` when a scaled pivot falls below `1e-11`,
/// which is treated as rank deficiency. `h` and `b` are overwritten.
pub(crate) fn solve_spd(h: &mut [f64], p: usize, b: &mut [f64]) -> Option<()> {
    let mut scale = vec![0.0; p];
    for i in 0..p {
        let d = h[i * p + i];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        scale[i] = 1.0 / d.sqrt();
    }
    for i in 0..p {
        for j in 0..p {
            h[i * p + j] *= scale[i] * scale[j];
        }
        b[i] *= scale[i];
    }
    // in-place lower Cholesky
    for j in 0..p {
        let mut diag = h[j * p + j];
        for k in 0..j {
            diag -= h[j * p + k] * h[j * p + k];
        }
        if !(diag > 1e-11) {
            return None;
        }
        let l = diag.sqrt();
        h[j * p + j] = l;
        for i in j + 1..p {
            let mut v = h[i * p + j];
            for k in 0..j {
                v -= h[i * p + k] * h[j * p + k];
            }
            h[i * p + j] = v / l;
        }
    }
    for i in 0..p {
        let mut v = b[i];
        for k in 0..i {
            v -= h[i * p + k] * b[k];
        }
        b[i] = v / h[i * p + i];
    }
    for i in (0..p).rev() {
        let mut v = b[i];
        for k in i + 1..p {
            v -= h[k * p + i] * b[k];
        }
        b[i] = v / h[i * p + i];
    }
    for i in 0..p {
        b[i] *= scale[i];
    }
    Some(())
}
