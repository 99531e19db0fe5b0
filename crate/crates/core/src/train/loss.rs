use crate::error::{Error, Result};
use crate::eval::metrics::{ssim, ssim_with_grad};
use crate::image::Image;

fn check(rendered: &Image, gt: &Image, lambda: f64) -> Result<()> {
    if !rendered.same_shape(gt) {
        return Err(Error::invalid(format!(
            "image size mismatch: {}x{} vs {}x{}",
            rendered.width, rendered.height, gt.width, gt.height
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("ssim_lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

fn l1(rendered: &Image, gt: &Image) -> f64 {
    rendered.data.iter().zip(&gt.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / rendered.data.len() as f64
}

/// `(1 - lambda) L1 + lambda (1 - SSIM)`. The SSIM term is skipped entirely
/// when `lambda` is zero, so tiny images work in pure-L1 mode.
pub fn photometric_loss(rendered: &Image, gt: &Image, lambda: f64) -> Result<f64> {
    check(rendered, gt, lambda)?;
    let mut loss = (1.0 - lambda) * l1(rendered, gt);
    if lambda > 0.0 {
        loss += lambda * (1.0 - ssim(rendered, gt)?);
    }
    Ok(loss)
}

/// Loss and its gradient with respect to `rendered.data`.
pub fn photometric_loss_grad(rendered: &Image, gt: &Image, lambda: f64) -> Result<(f64, Vec<f64>)> {
    check(rendered, gt, lambda)?;
    let n = rendered.data.len() as f64;
    let w1 = (1.0 - lambda) / n;
    let mut grad: Vec<f64> = rendered
        .data
        .iter()
        .zip(&gt.data)
        .map(|(a, b)| {
            let d = a - b;
            if d > 0.0 {
                w1
            } else if d < 0.0 {
                -w1
            } else {
                0.0
            }
        })
        .collect();
    let mut loss = (1.0 - lambda) * l1(rendered, gt);
    if lambda > 0.0 {
        let (s, gs) = ssim_with_grad(rendered, gt)?;
        loss += lambda * (1.0 - s);
        for (g, v) in grad.iter_mut().zip(gs) {
            *g -= lambda * v;
        }
    }
    Ok((loss, grad))
}
