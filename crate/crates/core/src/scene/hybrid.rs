use super::gaussian::{Gaussian3D, Gaussian4D};
use super::sh::MAX_SH_DEGREE;
use crate::error::{Error, Result};
use crate::math::{extract_spatial_rot, rot3_to_quat, Rot4};

/// Static and dynamic Gaussian pools plus the classification threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridScene {
    pub statics: Vec<Gaussian3D>,
    pub dynamics: Vec<Gaussian4D>,
    /// Temporal-scale threshold in normalized time units. `+inf` disables
    /// conversion entirely.
    pub tau: f64,
    pub duration_seconds: f64,
    pub sh_degree: u8,
}

impl HybridScene {
    pub fn new(tau: f64, duration_seconds: f64, sh_degree: u8) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if sh_degree > MAX_SH_DEGREE {
            return Err(Error::invalid(format!("SH degree {sh_degree} exceeds {MAX_SH_DEGREE}")));
        }
        Ok(HybridScene { statics: Vec::new(), dynamics: Vec::new(), tau, duration_seconds, sh_degree })
    }

    pub fn len(&self) -> usize {
        self.statics.len() + self.dynamics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Strictly greater-than: a Gaussian sitting exactly on the threshold stays dynamic.
pub fn is_static(g: &Gaussian4D, tau: f64) -> bool {
    g.log_scales[3].exp() > tau
}

/// Drops the temporal part of a 4D Gaussian.
///
/// Returns the static Gaussian and the space-time leakage of the discarded
/// rotation. `R` and `-R` give the same 4D covariance, so the sign with a
/// properly oriented spatial block is used before projecting onto SO(3).
pub fn convert_4d_to_3d(g: &Gaussian4D) -> Result<(Gaussian3D, f64)> {
    let r = g.rotation();
    let r = if r.matrix()[(3, 3)] < 0.0 {
        Rot4::new(-r.matrix()).expect("negated rotation stays in SO(4)")
    } else {
        r
    };
    let (r3, leakage) = extract_spatial_rot(&r)?;
    let converted = Gaussian3D {
        mean: g.mean,
        rot: rot3_to_quat(&r3),
        log_scales: [g.log_scales[0], g.log_scales[1], g.log_scales[2]],
        opacity_logit: g.opacity_logit,
        color: g.color,
    };
    Ok((converted, leakage))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConversionReport {
    /// Indices (into the pre-sweep dynamics pool, ascending) that moved.
    pub moved: Vec<usize>,
    /// Candidates left dynamic because their rotation was degenerate.
    pub failed: usize,
    pub max_leakage: f64,
    pub mean_leakage: f64,
}

impl ConversionReport {
    pub fn count(&self) -> usize {
        self.moved.len()
    }
}

/// Moves every dynamic Gaussian with `exp(s_t) > tau` into the static pool.
///
/// Converted Gaussians are appended to `statics` in their original order.
/// There is no reverse migration.
pub fn sweep_convert(scene: &mut HybridScene) -> ConversionReport {
    let mut report = ConversionReport::default();
    let mut kept = Vec::with_capacity(scene.dynamics.len());
    let mut leak_sum = 0.0;
    for (i, g) in scene.dynamics.drain(..).enumerate() {
        if !is_static(&g, scene.tau) {
            kept.push(g);
            continue;
        }
        match convert_4d_to_3d(&g) {
            Ok((g3, leakage)) => {
                scene.statics.push(g3);
                report.moved.push(i);
                report.max_leakage = report.max_leakage.max(leakage);
                leak_sum += leakage;
            }
            Err(_) => {
                report.failed += 1;
                kept.push(g);
            }
        }
    }
    scene.dynamics = kept;
    if !report.moved.is_empty() {
        report.mean_leakage = leak_sum / report.moved.len() as f64;
    }
    report
}

/// Histogram of temporal extent `exp(s_t)` over the whole scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl ScaleHistogram {
    /// Whether the counts form two nonempty clusters separated by at least
    /// one empty bin.
    pub fn is_bimodal(&self) -> bool {
        let first = self.counts.iter().position(|&c| c > 0);
        let last = self.counts.iter().rposition(|&c| c > 0);
        match (first, last) {
            (Some(a), Some(b)) if b > a + 1 => self.counts[a..=b].contains(&0),
            _ => false,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], c));
        }
        out
    }
}

/// Uniform bins over `[0, max_scale]`; larger values land in the last bin.
/// A 3D Gaussian has unbounded temporal extent and is counted there too.
pub fn temporal_scale_histogram(scene: &HybridScene, bins: usize, max_scale: f64) -> Result<ScaleHistogram> {
    if bins == 0 || !(max_scale > 0.0) {
        return Err(Error::invalid("histogram needs bins >= 1 and max_scale > 0"));
    }
    let width = max_scale / bins as f64;
    let bin_edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for g in &scene.dynamics {
        let v = g.temporal_scale();
        let b = ((v / max_scale) * bins as f64).floor();
        let b = if b.is_nan() || b < 0.0 { 0 } else { (b as usize).min(bins - 1) };
        counts[b] += 1;
    }
    counts[bins - 1] += scene.statics.len() as u64;
    Ok(ScaleHistogram { bin_edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{quat_to_rot3, rot4_from_pair, pair_from_rot4, QuatPair, UnitQuat};
    use crate::scene::sh::ShColor;
    use nalgebra::{Matrix4, Vector3};

    fn g4(s_t: f64) -> Gaussian4D {
        Gaussian4D {
            mean: Vector3::new(0.1, 0.2, 0.3),
            mean_t: 0.5,
            rot: QuatPair::IDENTITY,
            log_scales: [-1.0, -1.5, -2.0, s_t],
            opacity_logit: 0.7,
            color: ShColor::from_rgb(1, [0.2, 0.4, 0.6]).unwrap(),
        }
    }

    #[test]
    fn threshold_is_strict() {
        let tau: f64 = 0.3;
        // exp(ln tau) may round either way; nudge to sit exactly on tau.
        let mut s = tau.ln();
        while s.exp() > tau {
            s = f64::from_bits(s.to_bits() - 1);
        }
        while s.exp() < tau {
            s = f64::from_bits(s.to_bits() + 1);
        }
        assert_eq!(s.exp(), tau);
        assert!(!is_static(&g4(s), tau));
        assert!(is_static(&g4(tau.ln() + 0.01), tau));
    }

    #[test]
    fn identity_conversion() {
        let g = g4(0.0);
        let (c, leakage) = convert_4d_to_3d(&g).unwrap();
        assert_eq!(c.rot, UnitQuat::IDENTITY);
        assert_eq!(c.mean, g.mean);
        assert_eq!(c.log_scales, [-1.0, -1.5, -2.0]);
        assert_eq!(c.opacity_logit.to_bits(), g.opacity_logit.to_bits());
        assert_eq!(c.color, g.color);
        assert_eq!(leakage, 0.0);
    }

    #[test]
    fn block_diagonal_conversion_reproduces_block() {
        let q = UnitQuat::new(0.6, -0.2, 0.7, 0.3).unwrap();
        let r3 = *quat_to_rot3(&q).unwrap().matrix();
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r3);
        let pair = pair_from_rot4(&Rot4::new(m).unwrap());
        let mut g = g4(0.0);
        g.rot = pair;
        let (c, leakage) = convert_4d_to_3d(&g).unwrap();
        assert!(leakage < 1e-12);
        let back = quat_to_rot3(&c.rot).unwrap();
        assert!((back.matrix() - r3).abs().max() < 1e-9);
        // Pair reproduces +R or -R; both must convert identically.
        let r = rot4_from_pair(&pair);
        assert!((r.matrix().abs() - m.abs()).abs().max() < 1e-12);
    }

    #[test]
    fn sweep_moves_only_above_threshold() {
        let mut scene = HybridScene::new(0.5, 10.0, 1).unwrap();
        scene.dynamics = vec![g4(-3.0), g4(0.0), g4(-2.0), g4(1.0)];
        let report = sweep_convert(&mut scene);
        assert_eq!(report.moved, vec![1, 3]);
        assert_eq!(scene.statics.len(), 2);
        assert_eq!(scene.dynamics.len(), 2);
        assert!(scene.dynamics.iter().all(|g| !is_static(g, 0.5)));

        let again = sweep_convert(&mut scene);
        assert_eq!(again.count(), 0);
        assert_eq!(scene.len(), 4);
    }

    #[test]
    fn sweep_all_and_none() {
        let mut scene = HybridScene::new(0.5, 10.0, 1).unwrap();
        scene.dynamics = vec![g4(-3.0); 5];
        let before = scene.clone();
        assert_eq!(sweep_convert(&mut scene).count(), 0);
        assert_eq!(scene, before);

        scene.dynamics = vec![g4(2.0); 5];
        let report = sweep_convert(&mut scene);
        assert_eq!(report.count(), 5);
        assert!(scene.dynamics.is_empty());
        assert_eq!(scene.statics.len(), 5);
    }

    #[test]
    fn infinite_tau_never_converts() {
        let mut scene = HybridScene::new(f64::INFINITY, 10.0, 1).unwrap();
        scene.dynamics = vec![g4(5.0)];
        assert_eq!(sweep_convert(&mut scene).count(), 0);
    }

    #[test]
    fn histogram_binning() {
        let mut scene = HybridScene::new(0.5, 10.0, 1).unwrap();
        let h = temporal_scale_histogram(&scene, 4, 1.0).unwrap();
        assert_eq!(h.counts, vec![0; 4]);
        assert!(!h.is_bimodal());

        scene.dynamics = vec![g4(0.4f64.ln())];
        let h = temporal_scale_histogram(&scene, 10, 1.0).unwrap();
        assert_eq!(h.counts[4], 1);
        assert_eq!(h.counts.iter().sum::<u64>(), 1);

        scene.dynamics = vec![g4(0.05f64.ln()), g4(0.06f64.ln()), g4(5.0)];
        let h = temporal_scale_histogram(&scene, 10, 1.0).unwrap();
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[9], 1);
        assert!(h.is_bimodal());
        assert!(temporal_scale_histogram(&scene, 0, 1.0).is_err());

        scene.dynamics.pop();
        scene.statics = vec![convert_4d_to_3d(&g4(0.0)).unwrap().0; 2];
        let h = temporal_scale_histogram(&scene, 10, 1.0).unwrap();
        assert_eq!(h.counts[9], 2);
        assert!(h.is_bimodal());
    }
}
