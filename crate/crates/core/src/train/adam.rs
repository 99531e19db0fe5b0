use serde::{Deserialize, Serialize};

use super::backward::SceneGrads;
use super::params::{
    dyn_col, dynamic_class, dynamic_width, read_dynamic, read_static, static_class, static_col, static_width,
    write_dynamic, write_static, ParamClass,
};
use crate::error::{Error, Result};
use crate::scene::HybridScene;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    /// Initial position rate, multiplied by the scene extent.
    pub mean: f64,
    /// Final position rate; positions decay exponentially between the two.
    pub mean_final: f64,
    pub mean_t: f64,
    pub rotation: f64,
    pub scale: f64,
    pub scale_t: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            mean: 1.6e-3,
            mean_final: 1.6e-5,
            mean_t: 2e-3,
            rotation: 2e-3,
            scale: 1e-2,
            scale_t: 2e-2,
            opacity: 5e-2,
            sh_dc: 5e-3,
            sh_rest: 2.5e-4,
        }
    }
}

impl LearningRates {
    pub fn get(&self, class: ParamClass) -> f64 {
        match class {
            ParamClass::Mean => self.mean,
            ParamClass::MeanT => self.mean_t,
            ParamClass::Rotation => self.rotation,
            ParamClass::Scale => self.scale,
            ParamClass::ScaleT => self.scale_t,
            ParamClass::Opacity => self.opacity,
            ParamClass::ShDc => self.sh_dc,
            ParamClass::ShRest => self.sh_rest,
        }
    }

    /// Rates at `iter` of `total`: the position rate is interpolated
    /// log-linearly to `mean_final` and scaled by `extent`.
    pub fn at(&self, iter: usize, total: usize, extent: f64) -> LearningRates {
        let f = if total == 0 { 0.0 } else { (iter as f64 / total as f64).min(1.0) };
        let mean = (self.mean.ln() * (1.0 - f) + self.mean_final.ln() * f).exp();
        LearningRates { mean: mean * extent, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mean,
            self.mean_final,
            self.mean_t,
            self.rotation,
            self.scale,
            self.scale_t,
            self.opacity,
            self.sh_dc,
            self.sh_rest,
        ];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) && self.mean > 0.0 && self.mean_final > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("learning rates must be finite and non-negative (position rates positive)"))
        }
    }
}

/// Optimizer moments and densification statistics for one pool, one row
/// per Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolState {
    pub width: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Sum of screen-space mean gradient norms since the last densification.
    pub grad_norm: Vec<f64>,
    /// Number of views in which the Gaussian was visible over the same span.
    pub count: Vec<u32>,
}

impl PoolState {
    pub fn new(width: usize, rows: usize) -> Self {
        PoolState {
            width,
            m: vec![0.0; width * rows],
            v: vec![0.0; width * rows],
            grad_norm: vec![0.0; rows],
            count: vec![0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.count.len()
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.rows();
        self.m.len() == n * self.width && self.v.len() == n * self.width && self.grad_norm.len() == n
    }

    /// Keeps the listed rows in the given order.
    pub fn select(&self, rows: &[usize]) -> PoolState {
        let w = self.width;
        let mut out = PoolState::new(w, 0);
        for &r in rows {
            out.m.extend_from_slice(&self.m[r * w..(r + 1) * w]);
            out.v.extend_from_slice(&self.v[r * w..(r + 1) * w]);
            out.grad_norm.push(self.grad_norm[r]);
            out.count.push(self.count[r]);
        }
        out
    }

    pub fn push_zero_rows(&mut self, n: usize) {
        let w = self.width;
        self.m.resize(self.m.len() + n * w, 0.0);
        self.v.resize(self.v.len() + n * w, 0.0);
        self.grad_norm.resize(self.grad_norm.len() + n, 0.0);
        self.count.resize(self.count.len() + n, 0);
    }

    pub fn reset_stats(&mut self) {
        self.grad_norm.iter_mut().for_each(|v| *v = 0.0);
        self.count.iter_mut().for_each(|v| *v = 0);
    }

    /// Mean screen-gradient norm per row, zero for rows never seen.
    pub fn mean_grad(&self, row: usize) -> f64 {
        if self.count[row] == 0 {
            0.0
        } else {
            self.grad_norm[row] / self.count[row] as f64
        }
    }
}

/// Optimizer state for both pools, kept row-aligned with the scene.
#[derive(Clone, Debug, PartialEq)]
pub struct GradAccum {
    pub step: u64,
    pub statics: PoolState,
    pub dynamics: PoolState,
}

impl GradAccum {
    pub fn new(scene: &HybridScene) -> Self {
        GradAccum {
            step: 0,
            statics: PoolState::new(static_width(scene.sh_degree), scene.statics.len()),
            dynamics: PoolState::new(dynamic_width(scene.sh_degree), scene.dynamics.len()),
        }
    }

    pub fn is_aligned(&self, scene: &HybridScene) -> bool {
        self.statics.is_consistent()
            && self.dynamics.is_consistent()
            && self.statics.rows() == scene.statics.len()
            && self.dynamics.rows() == scene.dynamics.len()
            && self.statics.width == static_width(scene.sh_degree)
            && self.dynamics.width == dynamic_width(scene.sh_degree)
    }

    /// Adds one view's screen-gradient norms to the densification statistics.
    pub fn record_view(&mut self, grads: &SceneGrads) {
        for (st, screen, vis) in [
            (&mut self.statics, &grads.static_screen, &grads.static_visible),
            (&mut self.dynamics, &grads.dynamic_screen, &grads.dynamic_visible),
        ] {
            for i in 0..vis.len() {
                if vis[i] {
                    st.grad_norm[i] += screen[i];
                    st.count[i] += 1;
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    /// Scalar parameters whose gradient was not finite and were left alone.
    pub skipped: usize,
}

fn adam_row(
    params: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: impl Fn(usize) -> f64,
    bc1: f64,
    bc2: f64,
) -> usize {
    let mut skipped = 0;
    for c in 0..params.len() {
        let g = grad[c];
        if !g.is_finite() {
            skipped += 1;
            continue;
        }
        m[c] = BETA1 * m[c] + (1.0 - BETA1) * g;
        v[c] = BETA2 * v[c] + (1.0 - BETA2) * g * g;
        let m_hat = m[c] / bc1;
        let v_hat = v[c] / bc2;
        params[c] -= lr(c) * m_hat / (v_hat.sqrt() + EPSILON);
    }
    skipped
}

/// One Adam step over every Gaussian that was visible in the batch.
/// Invisible rows keep both their parameters and their moments.
///
/// Quaternions are renormalized afterwards; if canonicalization flips one,
/// its first moment is flipped with it.
pub fn optimizer_step(
    scene: &mut HybridScene,
    state: &mut GradAccum,
    grads: &SceneGrads,
    lrs: &LearningRates,
) -> Result<StepReport> {
    if !state.is_aligned(scene) {
        return Err(Error::invalid("optimizer state is not aligned with the scene"));
    }
    state.step += 1;
    let bc1 = 1.0 - BETA1.powi(state.step as i32);
    let bc2 = 1.0 - BETA2.powi(state.step as i32);
    let mut report = StepReport::default();

    let w = state.statics.width;
    let mut row = vec![0.0; w];
    for (i, g) in scene.statics.iter_mut().enumerate() {
        if !grads.static_visible[i] {
            continue;
        }
        read_static(g, &mut row);
        let span = i * w..(i + 1) * w;
        let m = &mut state.statics.m[span.clone()];
        report.skipped += adam_row(
            &mut row,
            &grads.statics[span.clone()],
            m,
            &mut state.statics.v[span],
            |c| lrs.get(static_class(c)),
            bc1,
            bc2,
        );
        if write_static(&row, g)? {
            m[static_col::ROT..static_col::ROT + 4].iter_mut().for_each(|v| *v = -*v);
        }
    }

    let w = state.dynamics.width;
    let mut row = vec![0.0; w];
    for (i, g) in scene.dynamics.iter_mut().enumerate() {
        if !grads.dynamic_visible[i] {
            continue;
        }
        read_dynamic(g, &mut row);
        let span = i * w..(i + 1) * w;
        let m = &mut state.dynamics.m[span.clone()];
        report.skipped += adam_row(
            &mut row,
            &grads.dynamics[span.clone()],
            m,
            &mut state.dynamics.v[span],
            |c| lrs.get(dynamic_class(c)),
            bc1,
            bc2,
        );
        let (fl, fr) = write_dynamic(&row, g)?;
        if fl {
            m[dyn_col::ROT_L..dyn_col::ROT_L + 4].iter_mut().for_each(|v| *v = -*v);
        }
        if fr {
            m[dyn_col::ROT_R..dyn_col::ROT_R + 4].iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{QuatPair, UnitQuat};
    use crate::scene::{Gaussian3D, ShColor};
    use nalgebra::Vector3;

    fn one_static() -> HybridScene {
        let mut s = HybridScene::new(0.5, 1.0, 0).unwrap();
        s.statics.push(Gaussian3D {
            mean: Vector3::new(0.1, 0.2, 0.3),
            rot: UnitQuat::new(1.0, 0.1, 0.2, 0.3).unwrap(),
            log_scales: [-2.0; 3],
            opacity_logit: 0.0,
            color: ShColor::from_rgb(0, [0.5; 3]).unwrap(),
        });
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut scene = one_static();
        let before = scene.clone();
        let mut state = GradAccum::new(&scene);
        let mut grads = SceneGrads::zeros(&scene);
        grads.static_visible[0] = true;
        optimizer_step(&mut scene, &mut state, &grads, &LearningRates::default()).unwrap();
        assert_eq!(scene, before);
    }

    #[test]
    fn matches_closed_form_sequence() {
        // Constant gradient g from zero moments: m_k = (1 - b1^k) g and
        // v_k = (1 - b2^k) g^2, so every bias-corrected step is lr * g / (|g| + eps).
        let mut scene = one_static();
        let mut state = GradAccum::new(&scene);
        let mut grads = SceneGrads::zeros(&scene);
        grads.static_visible[0] = true;
        let g = 0.37;
        grads.statics[static_col::OPACITY] = g;
        let lrs = LearningRates { opacity: 0.01, ..Default::default() };
        let mut expected = 0.0;
        for k in 1..=10 {
            optimizer_step(&mut scene, &mut state, &grads, &lrs).unwrap();
            let m = (1.0 - BETA1.powi(k)) * g;
            let v = (1.0 - BETA2.powi(k)) * g * g;
            let m_hat = m / (1.0 - BETA1.powi(k));
            let v_hat = v / (1.0 - BETA2.powi(k));
            expected -= 0.01 * m_hat / (v_hat.sqrt() + EPSILON);
            assert!((scene.statics[0].opacity_logit - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn quaternions_stay_unit_and_moments_follow_flips() {
        let mut scene = HybridScene::new(0.5, 1.0, 0).unwrap();
        scene.dynamics.push(crate::scene::Gaussian4D {
            mean: Vector3::zeros(),
            mean_t: 0.5,
            rot: QuatPair::new(UnitQuat::new(0.01, 1.0, 0.0, 0.0).unwrap(), UnitQuat::IDENTITY),
            log_scales: [-2.0; 4],
            opacity_logit: 0.0,
            color: ShColor::from_rgb(0, [0.5; 3]).unwrap(),
        });
        let mut state = GradAccum::new(&scene);
        let mut grads = SceneGrads::zeros(&scene);
        grads.dynamic_visible[0] = true;
        grads.dynamics[dyn_col::ROT_L] = 1.0;
        grads.dynamics[dyn_col::ROT_R + 2] = -0.5;
        let lrs = LearningRates { rotation: 0.05, ..Default::default() };
        optimizer_step(&mut scene, &mut state, &grads, &lrs).unwrap();
        let g = &scene.dynamics[0];
        assert!((g.rot.left.norm() - 1.0).abs() < 1e-9);
        assert!((g.rot.right.norm() - 1.0).abs() < 1e-9);
        // The left w component crossed zero, so the stored sign and its
        // first moment were both flipped.
        assert!(state.dynamics.m[dyn_col::ROT_L] < 0.0);
    }

    #[test]
    fn non_finite_gradients_are_skipped() {
        let mut scene = one_static();
        let mut state = GradAccum::new(&scene);
        let mut grads = SceneGrads::zeros(&scene);
        grads.static_visible[0] = true;
        grads.statics[0] = f64::NAN;
        grads.statics[1] = 1.0;
        let r = optimizer_step(&mut scene, &mut state, &grads, &LearningRates::default()).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(scene.statics[0].mean.x, 0.1);
        assert!(scene.statics[0].mean.y < 0.2);
    }
}
