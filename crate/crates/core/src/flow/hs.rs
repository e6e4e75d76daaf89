//! Coarse-to-fine Horn–Schunck optical flow.
//!
//! At each pyramid level the second frame is warped towards the first by the
//! current flow estimate, the brightness-constancy constraint is linearized
//! around that estimate, and the quadratic energy
//!
//! ```text
//! E(w) = Σ_p (Ix·u + Iy·v + It)²  +  λ · Σ_{p~q} |w_p − w_q|²
//! ```
//!
//! (sum over 4-connected neighbour pairs inside the grid) is relaxed with
//! per-pixel block-Jacobi sweeps. Each sweep solves the 2×2 system of a pixel
//! with its neighbours frozen:
//!
//! ```text
//! w_p ← w̄_p − ∇I · (∇I·w̄_p + It) / (λ·deg_p + |∇I|²)
//! ```
//!
//! For this splitting `2D − A = J + λ(Deg + Adj)` is positive semidefinite,
//! so the energy never increases from one sweep to the next.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FlowField, FlowSequence};
use crate::frame::{GrayFrame, Video};

/// Smallest side a pyramid level may have.
const MIN_LEVEL_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsParams {
    /// Weight λ of the smoothness term relative to the data term.
    pub smoothness_weight: f64,
    /// Jacobi sweeps per pyramid level.
    pub iterations: usize,
    pub pyramid_levels: usize,
    /// Side ratio between consecutive levels, in (0, 1).
    pub pyramid_scale: f64,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            smoothness_weight: 0.1,
            iterations: 200,
            pyramid_levels: 3,
            pyramid_scale: 0.5,
        }
    }
}

impl HsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothness_weight.is_finite() && self.smoothness_weight > 0.0) {
            return Err(Error::invalid("hs params", "smoothness_weight must be > 0"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("hs params", "iterations must be >= 1"));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("hs params", "pyramid_levels must be >= 1"));
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::invalid("hs params", "pyramid_scale must be in (0, 1)"));
        }
        Ok(())
    }
}

/// The linearized Horn–Schunck system at one pyramid level.
#[derive(Debug, Clone)]
pub struct HsProblem {
    width: usize,
    height: usize,
    ix: Vec<f64>,
    iy: Vec<f64>,
    /// Offset so that the data residual is `ix·u + iy·v + it` for the total flow.
    it: Vec<f64>,
}

impl HsProblem {
    /// Linearizes brightness constancy between `prev` and `next` around `init`.
    pub fn linearize(prev: &GrayFrame, next: &GrayFrame, init: &FlowField) -> Result<Self> {
        check_same(prev.dims(), next.dims())?;
        check_same(prev.dims(), init.dims())?;
        let (w, h) = prev.dims();
        let warped = warp_replicate(next.data(), w, h, init.u(), init.v());
        let avg: Vec<f64> = prev
            .data()
            .iter()
            .zip(&warped)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let (ix, iy) = central_gradients(&avg, w, h);
        let it = (0..w * h)
            .map(|i| warped[i] - prev.data()[i] - ix[i] * init.u()[i] - iy[i] * init.v()[i])
            .collect();
        Ok(Self {
            width: w,
            height: h,
            ix,
            iy,
            it,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Data plus λ-weighted smoothness energy of `flow`.
    pub fn energy(&self, flow: &FlowField, lambda: f64) -> f64 {
        self.energy_raw(flow.u(), flow.v(), lambda)
    }

    /// One block-Jacobi sweep.
    pub fn relax(&self, flow: &FlowField, lambda: f64) -> FlowField {
        let n = self.width * self.height;
        let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
        self.sweep(flow.u(), flow.v(), &mut u, &mut v, lambda);
        FlowField::new(self.width, self.height, u, v).expect("sweep keeps values finite")
    }

    /// Runs `iterations` sweeps from `init`.
    pub fn solve(&self, init: &FlowField, lambda: f64, iterations: usize) -> FlowField {
        let (mut u, mut v) = (init.u().to_vec(), init.v().to_vec());
        let (mut nu, mut nv) = (u.clone(), v.clone());
        for _ in 0..iterations {
            self.sweep(&u, &v, &mut nu, &mut nv, lambda);
            std::mem::swap(&mut u, &mut nu);
            std::mem::swap(&mut v, &mut nv);
        }
        FlowField::new(self.width, self.height, u, v).expect("sweep keeps values finite")
    }

    fn energy_raw(&self, u: &[f64], v: &[f64], lambda: f64) -> f64 {
        let (w, h) = (self.width, self.height);
        let mut data = 0.0;
        let mut smooth = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let r = self.ix[i] * u[i] + self.iy[i] * v[i] + self.it[i];
                data += r * r;
                if x + 1 < w {
                    smooth += (u[i + 1] - u[i]).powi(2) + (v[i + 1] - v[i]).powi(2);
                }
                if y + 1 < h {
                    smooth += (u[i + w] - u[i]).powi(2) + (v[i + w] - v[i]).powi(2);
                }
            }
        }
        data + lambda * smooth
    }

    fn sweep(&self, u: &[f64], v: &[f64], out_u: &mut [f64], out_v: &mut [f64], lambda: f64) {
        let (w, h) = (self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let (mut su, mut sv, mut deg) = (0.0, 0.0, 0usize);
                let mut add = |j: usize| {
                    su += u[j];
                    sv += v[j];
                    deg += 1;
                };
                if x > 0 {
                    add(i - 1);
                }
                if x + 1 < w {
                    add(i + 1);
                }
                if y > 0 {
                    add(i - w);
                }
                if y + 1 < h {
                    add(i + w);
                }
                let (gx, gy) = (self.ix[i], self.iy[i]);
                let denom = lambda * deg as f64 + gx * gx + gy * gy;
                if deg == 0 || denom == 0.0 {
                    out_u[i] = u[i];
                    out_v[i] = v[i];
                    continue;
                }
                let (mu, mv) = (su / deg as f64, sv / deg as f64);
                let r = (gx * mu + gy * mv + self.it[i]) / denom;
                out_u[i] = mu - gx * r;
                out_v[i] = mv - gy * r;
            }
        }
    }
}

fn check_same(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch { expected: a, got: b });
    }
    Ok(())
}

fn check_unit_range(frame: &GrayFrame) -> Result<()> {
    if frame.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("flow input", "intensities must lie in [0, 1]"));
    }
    Ok(())
}

/// Estimates the flow that maps `prev` onto `next`: `next(x + w(x)) ≈ prev(x)`.
pub fn estimate_flow_hs(prev: &GrayFrame, next: &GrayFrame, params: &HsParams) -> Result<FlowField> {
    params.validate()?;
    check_same(prev.dims(), next.dims())?;
    check_unit_range(prev)?;
    check_unit_range(next)?;

    let prev_pyr = build_pyramid(prev, params);
    let next_pyr = build_pyramid(next, params);

    let coarsest = prev_pyr.last().expect("pyramid has at least one level");
    let mut flow = FlowField::zeros(coarsest.width(), coarsest.height())?;
    for (p, n) in prev_pyr.iter().zip(&next_pyr).rev() {
        if flow.dims() != p.dims() {
            flow = upsample_flow(&flow, p.width(), p.height());
        }
        let problem = HsProblem::linearize(p, n, &flow)?;
        flow = problem.solve(&flow, params.smoothness_weight, params.iterations);
    }
    Ok(flow)
}

/// Forward and backward flows for every consecutive frame pair.
pub fn estimate_flow_sequence(video: &Video, params: &HsParams) -> Result<FlowSequence> {
    if video.len() < 2 {
        return Err(Error::invalid("video", "flow needs at least two frames"));
    }
    params.validate()?;
    let gray = video.to_gray();
    let pairs: Vec<(FlowField, FlowField)> = (0..gray.len() - 1)
        .into_par_iter()
        .map(|t| {
            let fwd = estimate_flow_hs(&gray[t], &gray[t + 1], params)?;
            let bwd = estimate_flow_hs(&gray[t + 1], &gray[t], params)?;
            Ok((fwd, bwd))
        })
        .collect::<Result<_>>()?;
    let (forward, backward) = pairs.into_iter().unzip();
    FlowSequence::new(forward, backward)
}

fn build_pyramid(frame: &GrayFrame, params: &HsParams) -> Vec<GrayFrame> {
    let mut levels = vec![frame.clone()];
    while levels.len() < params.pyramid_levels {
        let last = levels.last().expect("non-empty");
        let nw = (last.width() as f64 * params.pyramid_scale).round() as usize;
        let nh = (last.height() as f64 * params.pyramid_scale).round() as usize;
        if nw.min(nh) < MIN_LEVEL_SIDE || (nw, nh) == last.dims() {
            break;
        }
        let blurred = binomial_blur(last.data(), last.width(), last.height());
        let data = resize_bilinear(&blurred, last.width(), last.height(), nw, nh);
        levels.push(GrayFrame::new(nw, nh, data).expect("resampling keeps values finite"));
    }
    levels
}

fn upsample_flow(flow: &FlowField, nw: usize, nh: usize) -> FlowField {
    let (w, h) = flow.dims();
    let sx = nw as f64 / w as f64;
    let sy = nh as f64 / h as f64;
    let u = resize_bilinear(flow.u(), w, h, nw, nh).into_iter().map(|x| x * sx).collect();
    let v = resize_bilinear(flow.v(), w, h, nw, nh).into_iter().map(|x| x * sy).collect();
    FlowField::new(nw, nh, u, v).expect("resampling keeps values finite")
}

/// Separable [1 4 6 4 1]/16 blur with replicated edges.
fn binomial_blur(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * data[y * w + clamp(x as isize + k as isize - 2, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[clamp(y as isize + k as isize - 2, h) * w + x])
                .sum();
        }
    }
    out
}

/// Pixel-centre aligned bilinear resize with clamped coordinates.
fn resize_bilinear(data: &[f64], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f64> {
    let rx = w as f64 / nw as f64;
    let ry = h as f64 / nh as f64;
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        let sy = (y as f64 + 0.5) * ry - 0.5;
        for x in 0..nw {
            let sx = (x as f64 + 0.5) * rx - 0.5;
            out.push(sample_replicate(data, w, h, sx, sy));
        }
    }
    out
}

fn warp_replicate(data: &[f64], w: usize, h: usize, u: &[f64], v: &[f64]) -> Vec<f64> {
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            sample_replicate(data, w, h, x + u[i], y + v[i])
        })
        .collect()
}

fn sample_replicate(data: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = lerp(data[y0 * w + x0], data[y0 * w + x1], fx);
    let bottom = lerp(data[y1 * w + x0], data[y1 * w + x1], fx);
    lerp(top, bottom, fy)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Central differences with replicated borders.
fn central_gradients(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            gx[i] = 0.5 * (data[y * w + xr] - data[y * w + xl]);
            gy[i] = 0.5 * (data[yd * w + x] - data[yu * w + x]);
        }
    }
    (gx, gy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::smooth_texture as texture;

    fn shifted(w: usize, h: usize, dx: f64, dy: f64) -> GrayFrame {
        GrayFrame::from_fn(w, h, |x, y| texture(x as f64 - dx, y as f64 - dy)).unwrap()
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    /// Integer displacement minimizing SSD over the interior.
    fn block_match(prev: &GrayFrame, next: &GrayFrame, radius: isize) -> (isize, isize) {
        let (w, h) = prev.dims();
        let margin = radius as usize;
        let mut best = (f64::INFINITY, (0, 0));
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let mut ssd = 0.0;
                for y in margin..h - margin {
                    for x in margin..w - margin {
                        let nx = (x as isize + dx) as usize;
                        let ny = (y as isize + dy) as usize;
                        ssd += (prev.at(x, y) - next.at(nx, ny)).powi(2);
                    }
                }
                if ssd < best.0 {
                    best = (ssd, (dx, dy));
                }
            }
        }
        best.1
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = shifted(32, 32, 0.0, 0.0);
        let flow = estimate_flow_hs(&f, &f, &HsParams::default()).unwrap();
        assert!(flow.magnitudes().fold(0.0, f64::max) <= 1e-6);
    }

    #[test]
    fn one_pixel_shift_matches_block_matching() {
        let prev = shifted(48, 48, 0.0, 0.0);
        let next = shifted(48, 48, 1.0, 0.0);
        assert_eq!(block_match(&prev, &next, 3), (1, 0));
        let params = HsParams {
            smoothness_weight: 0.1,
            iterations: 200,
            ..HsParams::default()
        };
        let flow = estimate_flow_hs(&prev, &next, &params).unwrap();
        let (mu, mv) = (mean(flow.u()), mean(flow.v()));
        assert!((0.7..=1.1).contains(&mu), "mean u = {mu}");
        assert!(mv.abs() <= 0.1, "mean v = {mv}");
    }

    #[test]
    fn pyramid_recovers_three_by_two_translation() {
        let prev = shifted(64, 64, 0.0, 0.0);
        let next = shifted(64, 64, 3.0, 2.0);
        let flow = estimate_flow_hs(&prev, &next, &HsParams::default()).unwrap();
        let epe = mean(&flow.u().iter().zip(flow.v()).map(|(u, v)| (u - 3.0).hypot(v - 2.0)).collect::<Vec<_>>());
        assert!(epe <= 0.5, "mean EPE = {epe}");
    }

    #[test]
    fn energy_never_increases_across_sweeps() {
        let lambda = 0.1;
        let cases = [(0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), (2.5, -1.0, 0.0, 0.0), (3.0, 2.0, 2.0, 1.0)];
        for (dx, dy, ux, vy) in cases {
            let prev = shifted(24, 20, 0.0, 0.0);
            let next = shifted(24, 20, dx, dy);
            let init = FlowField::constant(24, 20, ux, vy).unwrap();
            let problem = HsProblem::linearize(&prev, &next, &init).unwrap();
            let mut flow = init;
            let mut e = problem.energy(&flow, lambda);
            for it in 0..60 {
                flow = problem.relax(&flow, lambda);
                let e_next = problem.energy(&flow, lambda);
                assert!(e_next <= e * (1.0 + 1e-12) + 1e-15, "sweep {it}: {e} -> {e_next}");
                e = e_next;
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = shifted(16, 16, 0.0, 0.0);
        let b = shifted(16, 12, 0.0, 0.0);
        assert!(matches!(estimate_flow_hs(&a, &b, &HsParams::default()), Err(Error::ShapeMismatch { .. })));
        let bad = HsParams {
            smoothness_weight: 0.0,
            ..HsParams::default()
        };
        assert!(estimate_flow_hs(&a, &a, &bad).is_err());
        let bright = GrayFrame::new(2, 2, vec![2.0; 4]).unwrap();
        assert!(estimate_flow_hs(&bright, &bright, &HsParams::default()).is_err());
    }

    #[test]
    fn blur_and_resize_preserve_constants() {
        let data = vec![0.25; 30];
        assert!(binomial_blur(&data, 6, 5).iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(resize_bilinear(&data, 6, 5, 3, 2).iter().all(|v| (v - 0.25).abs() < 1e-15));
    }
}
