//! Point-list import (`x y z r g b` per line, colors linear in `[0, 1]`)
//! and the initial all-4D scene built from it.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::math::{logit, QuatPair};
use crate::scene::{Gaussian4D, HybridScene, ShColor};

pub const INIT_MEAN_T: f64 = 0.5;
pub const INIT_TEMPORAL_SCALE: f64 = 0.1;
pub const INIT_OPACITY: f64 = 0.1;
pub const NEIGHBORS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitPoint {
    pub position: Vector3<f64>,
    pub rgb: [f64; 3],
}

pub fn parse_points(text: &str) -> Result<Vec<InitPoint>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(format!("points line {}: not a number", lineno + 1)))?;
        if v.len() != 6 || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::format(format!("points line {}: expected 6 finite values", lineno + 1)));
        }
        out.push(InitPoint { position: Vector3::new(v[0], v[1], v[2]), rgb: [v[3], v[4], v[5]] });
    }
    Ok(out)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<InitPoint>> {
    parse_points(&fs::read_to_string(path)?)
}

pub fn points_to_text(points: &[InitPoint]) -> String {
    let mut s = String::new();
    for p in points {
        s.push_str(&format!(
            "{:?} {:?} {:?} {:?} {:?} {:?}\n",
            p.position.x, p.position.y, p.position.z, p.rgb[0], p.rgb[1], p.rgb[2]
        ));
    }
    s
}

pub fn write_points(path: impl AsRef<Path>, points: &[InitPoint]) -> Result<()> {
    fs::write(path, points_to_text(points))?;
    Ok(())
}

/// Mean distance from each point to its `k` nearest neighbors.
fn mean_neighbor_distance(points: &[InitPoint], k: usize) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| (p.position - q.position).norm())
                .collect();
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// One 4D Gaussian per point: isotropic spatial scale from the mean
/// distance to the three nearest neighbors, `mu_t = 0.5`, `exp(s_t) = 0.1`,
/// opacity 0.1, constant color, identity rotation. The static pool starts
/// empty.
pub fn init_scene(points: &[InitPoint], tau: f64, duration_seconds: f64, sh_degree: u8) -> Result<HybridScene> {
    if points.len() <= NEIGHBORS {
        return Err(Error::invalid(format!(
            "need at least {} points for nearest-neighbor scales, got {}",
            NEIGHBORS + 1,
            points.len()
        )));
    }
    let mut scene = HybridScene::new(tau, duration_seconds, sh_degree)?;
    let dist = mean_neighbor_distance(points, NEIGHBORS);
    for (p, d) in points.iter().zip(dist) {
        let s = d.max(1e-7).ln();
        scene.dynamics.push(Gaussian4D {
            mean: p.position,
            mean_t: INIT_MEAN_T,
            rot: QuatPair::IDENTITY,
            log_scales: [s, s, s, INIT_TEMPORAL_SCALE.ln()],
            opacity_logit: logit(INIT_OPACITY),
            color: ShColor::from_rgb(sh_degree, p.rgb)?,
        });
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron() {
        let pts: Vec<InitPoint> = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
            .iter()
            .map(|p| InitPoint { position: Vector3::from(*p), rgb: [0.2, 0.4, 0.6] })
            .collect();
        let scene = init_scene(&pts, 0.3, 1.0, 0).unwrap();
        assert_eq!(scene.dynamics.len(), 4);
        assert!(scene.statics.is_empty());
        let s0 = scene.dynamics[0].log_scales[0];
        for g in &scene.dynamics {
            assert_eq!(g.log_scales[..3], [s0; 3]);
            assert_eq!(g.color.coeffs()[0], scene.dynamics[0].color.coeffs()[0]);
            assert!((g.temporal_scale() - 0.1).abs() < 1e-15);
        }
        assert!((s0.exp() - 8f64.sqrt()).abs() < 1e-12);
        assert!(init_scene(&pts[..3], 0.3, 1.0, 0).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let pts = vec![
            InitPoint { position: Vector3::new(0.1, -2.5, 1e-9), rgb: [0.0, 0.5, 1.0] },
            InitPoint { position: Vector3::new(3.0, 4.0, 5.0), rgb: [0.25, 0.125, 0.3] },
        ];
        assert_eq!(parse_points(&points_to_text(&pts)).unwrap(), pts);
        assert!(parse_points("1 2 3 4 5\n").is_err());
        assert!(parse_points("1 2 3 4 5 x\n").is_err());
    }
}
