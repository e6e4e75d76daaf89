//! Grid operations: channel concatenation, the rectified-flow interpolant,
//! token reshaping, patch pooling and trilinear upsampling.

use crate::error::{DmpError, Result};
use crate::tensor::{LatentGrid, TokenGrid};

/// Stacks `z` and `z_noisy` along channels, `z` first.
pub fn concat_latents(z: &LatentGrid, z_noisy: &LatentGrid) -> Result<LatentGrid> {
    let (a, b) = (z.shape(), z_noisy.shape());
    if a[0] != b[0] || a[2..] != b[2..] {
        return Err(DmpError::shape(&a, &b));
    }
    let (ca, cb) = (a[1], b[1]);
    let vox = z.voxels();
    let mut data = Vec::with_capacity(z.len() + z_noisy.len());
    for bi in 0..a[0] {
        data.extend_from_slice(&z.data()[bi * ca * vox..(bi + 1) * ca * vox]);
        data.extend_from_slice(&z_noisy.data()[bi * cb * vox..(bi + 1) * cb * vox]);
    }
    LatentGrid::new([a[0], ca + cb, a[2], a[3], a[4]], data)
}

/// `z_t = (1 - t)·z_clean + t·noise` and the constant velocity `noise - z_clean`.
pub fn rf_interpolant(z_clean: &LatentGrid, noise: &LatentGrid, t: f64) -> Result<(LatentGrid, LatentGrid)> {
    if z_clean.shape() != noise.shape() {
        return Err(DmpError::shape(&z_clean.shape(), &noise.shape()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(DmpError::invalid("time", format!("{t} outside [0, 1]")));
    }
    let (zc, ns) = (z_clean.data(), noise.data());
    let z_t = zc.iter().zip(ns).map(|(&z, &e)| (1.0 - t) * z + t * e).collect();
    let v = zc.iter().zip(ns).map(|(&z, &e)| e - z).collect();
    Ok((LatentGrid::new(z_clean.shape(), z_t)?, LatentGrid::new(z_clean.shape(), v)?))
}

/// One token per voxel, channels as features.
pub fn flatten_grid(grid: &LatentGrid) -> Result<TokenGrid> {
    let [b, c, f, h, w] = grid.shape();
    let vox = f * h * w;
    let mut data = vec![0.0; grid.len()];
    for bi in 0..b {
        for ci in 0..c {
            for l in 0..vox {
                data[(bi * vox + l) * c + ci] = grid.data()[(bi * c + ci) * vox + l];
            }
        }
    }
    TokenGrid::new(b, vox, c, data)?.with_layout((f, h, w))
}

/// Token `l` goes to `(l / (H·W), (l / W) % H, l % W)`; features become channels.
pub fn reshape_tokens(tokens: &TokenGrid, frames: usize, height: usize, width: usize) -> Result<LatentGrid> {
    let l = tokens.tokens();
    if frames * height * width != l {
        return Err(DmpError::invalid(
            "reshape",
            format!("L = {l} is not {frames}·{height}·{width}"),
        ));
    }
    let (b, d) = (tokens.batch(), tokens.dim());
    let mut data = vec![0.0; b * l * d];
    for bi in 0..b {
        for li in 0..l {
            for (di, &v) in tokens.token(bi, li).iter().enumerate() {
                data[(bi * d + di) * l + li] = v;
            }
        }
    }
    LatentGrid::new([b, d, frames, height, width], data)
}

/// Means over non-overlapping `(pf, ph, pw)` patches.
pub fn patch_average(grid: &LatentGrid, patch: (usize, usize, usize)) -> Result<LatentGrid> {
    let [b, c, f, h, w] = grid.shape();
    let (pf, ph, pw) = patch;
    if pf == 0 || ph == 0 || pw == 0 || f % pf != 0 || h % ph != 0 || w % pw != 0 {
        return Err(DmpError::invalid(
            "patch",
            format!("{patch:?} does not tile ({f}, {h}, {w})"),
        ));
    }
    let scale = 1.0 / (pf * ph * pw) as f64;
    LatentGrid::from_fn([b, c, f / pf, h / ph, w / pw], |bi, ci, tf, ty, tx| {
        let mut sum = 0.0;
        for t in tf * pf..(tf + 1) * pf {
            for y in ty * ph..(ty + 1) * ph {
                for x in tx * pw..(tx + 1) * pw {
                    sum += grid.at(bi, ci, t, y, x);
                }
            }
        }
        sum * scale
    })
}

/// Per output index: lower source index, upper source index, blend weight.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            (lo, (lo + 1).min(src - 1), s - lo as f64)
        })
        .collect()
}

/// Resamples the middle axis of an `outer × n × inner` block.
fn resample_axis(data: &[f64], outer: usize, n: usize, inner: usize, taps: &[(usize, usize, f64)]) -> Vec<f64> {
    let m = taps.len();
    let mut out = vec![0.0; outer * m * inner];
    for o in 0..outer {
        for (d, &(lo, hi, t)) in taps.iter().enumerate() {
            for i in 0..inner {
                let a = data[(o * n + lo) * inner + i];
                let b = data[(o * n + hi) * inner + i];
                out[(o * m + d) * inner + i] = a + t * (b - a);
            }
        }
    }
    out
}

fn resample_axis_adjoint(grad: &[f64], outer: usize, n: usize, inner: usize, taps: &[(usize, usize, f64)]) -> Vec<f64> {
    let m = taps.len();
    let mut out = vec![0.0; outer * n * inner];
    for o in 0..outer {
        for (d, &(lo, hi, t)) in taps.iter().enumerate() {
            for i in 0..inner {
                let g = grad[(o * m + d) * inner + i];
                out[(o * n + lo) * inner + i] += (1.0 - t) * g;
                out[(o * n + hi) * inner + i] += t * g;
            }
        }
    }
    out
}

fn check_upsample(src: (usize, usize, usize), dst: (usize, usize, usize)) -> Result<()> {
    if dst.0 < src.0 || dst.1 < src.1 || dst.2 < src.2 {
        return Err(DmpError::invalid(
            "upsample target",
            format!("{dst:?} is smaller than {src:?}"),
        ));
    }
    Ok(())
}

/// Trilinear interpolation with pixel-centre alignment and clamped borders.
pub fn trilinear_upsample(grid: &LatentGrid, target: (usize, usize, usize)) -> Result<LatentGrid> {
    let [b, c, f, h, w] = grid.shape();
    check_upsample((f, h, w), target)?;
    let (tf, th, tw) = target;
    let bc = b * c;
    let x = resample_axis(grid.data(), bc * f * h, w, 1, &axis_taps(w, tw));
    let y = resample_axis(&x, bc * f, h, tw, &axis_taps(h, th));
    let z = resample_axis(&y, bc, f, th * tw, &axis_taps(f, tf));
    LatentGrid::new([b, c, tf, th, tw], z)
}

/// Transpose of [`trilinear_upsample`]: maps a gradient on the target grid
/// back onto the source grid.
pub fn trilinear_upsample_adjoint(grad: &LatentGrid, source: (usize, usize, usize)) -> Result<LatentGrid> {
    let [b, c, tf, th, tw] = grad.shape();
    check_upsample(source, (tf, th, tw))?;
    let (f, h, w) = source;
    let bc = b * c;
    let z = resample_axis_adjoint(grad.data(), bc, f, th * tw, &axis_taps(f, tf));
    let y = resample_axis_adjoint(&z, bc * f, h, tw, &axis_taps(h, th));
    let x = resample_axis_adjoint(&y, bc * f * h, w, 1, &axis_taps(w, tw));
    LatentGrid::new([b, c, f, h, w], x)
}
