use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "image size mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` over all channels in linear space. Identical images
/// give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

fn window() -> &'static [f64; SSIM_WINDOW] {
    static W: OnceLock<[f64; SSIM_WINDOW]> = OnceLock::new();
    W.get_or_init(|| {
        let c = (SSIM_WINDOW / 2) as f64;
        let raw: [f64; SSIM_WINDOW] =
            std::array::from_fn(|i| (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        let s: f64 = raw.iter().sum();
        raw.map(|v| v / s)
    })
}

/// Separable "valid" correlation of a `w x h` plane with the window.
fn filter_valid(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = window();
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a valid-sized map back to `w x h`.
fn filter_valid_adjoint(g: &[f64], w: usize, h: usize) -> Vec<f64> {
    let k = window();
    let ow = w + 1 - SSIM_WINDOW;
    let oh = h + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; ow * h];
    for y in 0..oh {
        for x in 0..ow {
            let v = g[y * ow + x];
            for i in 0..SSIM_WINDOW {
                rows[(y + i) * ow + x] += k[i] * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..ow {
            let v = rows[y * ow + x];
            for i in 0..SSIM_WINDOW {
                out[y * w + x + i] += k[i] * v;
            }
        }
    }
    out
}

fn plane(img: &Image, ch: usize) -> Vec<f64> {
    img.data.iter().skip(ch).step_by(3).copied().collect()
}

struct ChannelStats {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<f64>,
}

fn channel_stats(x: &[f64], y: &[f64], w: usize, h: usize) -> ChannelStats {
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_x = filter_valid(x, w, h);
    let mu_y = filter_valid(y, w, h);
    let mut sxx = filter_valid(&sq(x, x), w, h);
    let mut syy = filter_valid(&sq(y, y), w, h);
    let mut sxy = filter_valid(&sq(x, y), w, h);
    for i in 0..mu_x.len() {
        sxx[i] -= mu_x[i] * mu_x[i];
        syy[i] -= mu_y[i] * mu_y[i];
        sxy[i] -= mu_x[i] * mu_y[i];
    }
    ChannelStats { mu_x, mu_y, sxx, syy, sxy }
}

const C1: f64 = SSIM_K1 * SSIM_K1;
const C2: f64 = SSIM_K2 * SSIM_K2;

fn check_ssim(a: &Image, b: &Image) -> Result<()> {
    check_shapes(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            a.width, a.height
        )));
    }
    Ok(())
}

/// Mean single-scale SSIM over valid window positions, averaged over the
/// three channels. Data range is 1.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_ssim(a, b)?;
    let (w, h) = (a.width, a.height);
    let mut total = 0.0;
    for ch in 0..3 {
        let s = channel_stats(&plane(a, ch), &plane(b, ch), w, h);
        let n = s.mu_x.len();
        let sum: f64 = (0..n)
            .map(|i| {
                let (mx, my) = (s.mu_x[i], s.mu_y[i]);
                (2.0 * mx * my + C1) * (2.0 * s.sxy[i] + C2)
                    / ((mx * mx + my * my + C1) * (s.sxx[i] + s.syy[i] + C2))
            })
            .sum();
        total += sum / n as f64;
    }
    Ok(total / 3.0)
}

/// SSIM and its gradient with respect to every value of `x`, laid out like
/// `x.data`.
pub(crate) fn ssim_with_grad(x: &Image, y: &Image) -> Result<(f64, Vec<f64>)> {
    check_ssim(x, y)?;
    let (w, h) = (x.width, x.height);
    let mut grad = vec![0.0; x.data.len()];
    let mut total = 0.0;
    for ch in 0..3 {
        let xp = plane(x, ch);
        let yp = plane(y, ch);
        let s = channel_stats(&xp, &yp, w, h);
        let n = s.mu_x.len();
        let scale = 1.0 / (3.0 * n as f64);
        let mut p1 = vec![0.0; n];
        let mut p2 = vec![0.0; n];
        let mut p3 = vec![0.0; n];
        let mut sum = 0.0;
        for i in 0..n {
            let (mx, my) = (s.mu_x[i], s.mu_y[i]);
            let a1 = 2.0 * mx * my + C1;
            let a2 = 2.0 * s.sxy[i] + C2;
            let b1 = mx * mx + my * my + C1;
            let b2 = s.sxx[i] + s.syy[i] + C2;
            let v = a1 * a2 / (b1 * b2);
            sum += v;
            // Derivatives with respect to mu_x, E[x^2] and E[xy].
            p1[i] = scale * ((2.0 * my * a2 - 2.0 * my * a1) / (b1 * b2) - v * 2.0 * mx / b1 + v * 2.0 * mx / b2);
            p2[i] = scale * (-v / b2);
            p3[i] = scale * (2.0 * a1 / (b1 * b2));
        }
        total += sum / n as f64;
        let g1 = filter_valid_adjoint(&p1, w, h);
        let g2 = filter_valid_adjoint(&p2, w, h);
        let g3 = filter_valid_adjoint(&p3, w, h);
        for i in 0..w * h {
            grad[3 * i + ch] = g1[i] + 2.0 * xp[i] * g2[i] + yp[i] * g3[i];
        }
    }
    Ok((total / 3.0, grad))
}

/// Per-frame and mean image quality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    pub frames: Vec<FrameMetric>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMetric {
    pub camera: usize,
    pub frame: usize,
    pub t: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub fn count(&self) -> usize {
        self.frames.len()
    }

    pub fn mean_psnr(&self) -> f64 {
        self.frames.iter().map(|f| f.psnr).sum::<f64>() / self.frames.len() as f64
    }

    pub fn mean_ssim(&self) -> f64 {
        self.frames.iter().map(|f| f.ssim).sum::<f64>() / self.frames.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("camera,frame,t,psnr,ssim\n");
        for f in &self.frames {
            s.push_str(&format!("{},{},{},{},{}\n", f.camera, f.frame, f.t, f.psnr, f.ssim));
        }
        s.push_str(&format!("mean,,,{},{}\n", self.mean_psnr(), self.mean_ssim()));
        s
    }
}
