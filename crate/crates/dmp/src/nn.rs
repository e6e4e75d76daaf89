//! Dense layers and the tanh GELU.

use std::f64::consts::PI;

const GELU_C: f64 = 0.044715;

fn gelu_k() -> f64 {
    (2.0 / PI).sqrt()
}

/// `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (gelu_k() * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let k = gelu_k();
    let th = (k * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * k * (1.0 + 3.0 * GELU_C * x * x)
}

/// `y = x·W + b` for `rows` inputs of width `n_in`; `W` is `n_in × n_out` row-major.
pub(crate) fn affine(x: &[f64], rows: usize, w: &[f64], b: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(rows * n_out);
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        let start = y.len();
        y.extend_from_slice(b);
        let yr = &mut y[start..];
        for (i, &xi) in xr.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, &wij) in yr.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                *yj += xi * wij;
            }
        }
    }
    y
}

/// Accumulates `dW += xᵀ·dy`, `db += Σ dy` and returns `dx = dy·Wᵀ`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn affine_backward(
    x: &[f64],
    dy: &[f64],
    rows: usize,
    w: &[f64],
    n_in: usize,
    n_out: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * n_in];
    for r in 0..rows {
        let xr = &x[r * n_in..(r + 1) * n_in];
        let dyr = &dy[r * n_out..(r + 1) * n_out];
        for (dbj, &g) in db.iter_mut().zip(dyr) {
            *dbj += g;
        }
        for i in 0..n_in {
            let wi = &w[i * n_out..(i + 1) * n_out];
            let dwi = &mut dw[i * n_out..(i + 1) * n_out];
            let mut acc = 0.0;
            for j in 0..n_out {
                dwi[j] += xr[i] * dyr[j];
                acc += dyr[j] * wi[j];
            }
            dx[r * n_in + i] = acc;
        }
    }
    dx
}
