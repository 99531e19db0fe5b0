//! Calibrated multi-view video on disk.
//!
//! ```text
//! root/cameras.txt        id fx fy cx cy w h near far r00 r01 r02 t0 r10 .. t2
//! root/meta.txt           optional, `fps <value>` (default 30)
//! root/camXX/frame_NNNNN.ppm
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::raster::Camera;

pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CameraView {
    pub id: usize,
    pub camera: Camera,
    pub frames: Vec<Image>,
}

/// Frames from several cameras sharing one timeline. `times[k]` is the
/// normalized time of frame `k` in every view.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    pub views: Vec<CameraView>,
    pub times: Vec<f64>,
    pub duration_seconds: f64,
}

impl MultiViewDataset {
    pub fn frame_count(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty() || self.times.is_empty()
    }

    pub fn view(&self, id: usize) -> Option<&CameraView> {
        self.views.iter().find(|v| v.id == id)
    }
}

/// `k / (n - 1)` for `n` frames; a single frame sits at 0.
pub fn normalized_times(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

pub fn camera_dir(root: &Path, id: usize) -> PathBuf {
    root.join(format!("cam{id:02}"))
}

pub fn frame_path(root: &Path, id: usize, frame: usize) -> PathBuf {
    camera_dir(root, id).join(format!("frame_{frame:05}.ppm"))
}

fn parse_cameras(text: &str) -> Result<Vec<(usize, Camera)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 21 {
            return Err(Error::format(format!(
                "cameras.txt line {}: expected 21 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::format(format!("cameras.txt line {}: bad {what}", lineno + 1));
        let int = |i: usize| fields[i].parse::<usize>().map_err(|_| bad("integer"));
        let num = |i: usize| fields[i].parse::<f64>().map_err(|_| bad("number"));
        let id = int(0)?;
        let mut e = [0.0; 12];
        for (k, v) in e.iter_mut().enumerate() {
            *v = num(9 + k)?;
        }
        let cam = Camera::from_extrinsic_row_major(num(1)?, num(2)?, num(3)?, num(4)?, int(5)?, int(6)?, num(7)?, num(8)?, &e)
            .map_err(|err| Error::format(format!("cameras.txt line {}: {err}", lineno + 1)))?;
        if out.iter().any(|(i, _)| *i == id) {
            return Err(Error::format(format!("cameras.txt: duplicate camera id {id}")));
        }
        out.push((id, cam));
    }
    if out.is_empty() {
        return Err(Error::format("cameras.txt lists no cameras"));
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

/// Reads only `cameras.txt`, sorted by id.
pub fn load_cameras(root: impl AsRef<Path>) -> Result<Vec<(usize, Camera)>> {
    let cal_path = root.as_ref().join("cameras.txt");
    let text = fs::read_to_string(&cal_path)
        .map_err(|e| Error::format(format!("missing calibration {}: {e}", cal_path.display())))?;
    parse_cameras(&text)
}

fn read_fps(root: &Path) -> Result<f64> {
    let path = root.join("meta.txt");
    if !path.exists() {
        return Ok(DEFAULT_FPS);
    }
    let text = fs::read_to_string(&path)?;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        if it.next() == Some("fps") {
            let fps: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format("meta.txt: bad fps value"))?;
            if !(fps > 0.0 && fps.is_finite()) {
                return Err(Error::format("meta.txt: fps must be positive"));
            }
            return Ok(fps);
        }
    }
    Ok(DEFAULT_FPS)
}

fn count_frames(dir: &Path) -> usize {
    let mut n = 0;
    while dir.join(format!("frame_{n:05}.ppm")).exists() {
        n += 1;
    }
    n
}

/// Reads a dataset and splits off `held_out` as the test set.
pub fn load_dataset(root: impl AsRef<Path>, held_out: usize) -> Result<(MultiViewDataset, MultiViewDataset)> {
    let root = root.as_ref();
    let cams = load_cameras(root)?;
    if !cams.iter().any(|(id, _)| *id == held_out) {
        return Err(Error::invalid(format!("held-out camera {held_out} is not in cameras.txt")));
    }
    let fps = read_fps(root)?;

    let counts: Vec<usize> = cams.iter().map(|(id, _)| count_frames(&camera_dir(root, *id))).collect();
    let n = counts[0];
    if n == 0 || counts.iter().any(|&c| c != n) {
        let listing: Vec<String> =
            cams.iter().zip(&counts).map(|((id, _), c)| format!("cam{id:02}: {c} frames")).collect();
        return Err(Error::format(format!("inconsistent frame counts ({})", listing.join(", "))));
    }

    let mut views = Vec::with_capacity(cams.len());
    for (id, camera) in cams {
        let frames: Vec<Image> = (0..n)
            .into_par_iter()
            .map(|k| Image::read_ppm(frame_path(root, id, k)))
            .collect::<Result<_>>()?;
        if let Some(bad) = frames.iter().position(|f| f.width != camera.width || f.height != camera.height) {
            return Err(Error::format(format!(
                "cam{id:02} frame {bad} is {}x{}, calibration says {}x{}",
                frames[bad].width, frames[bad].height, camera.width, camera.height
            )));
        }
        views.push(CameraView { id, camera, frames });
    }
    let times = normalized_times(n);
    let duration_seconds = n as f64 / fps;
    let (test, train): (Vec<_>, Vec<_>) = views.into_iter().partition(|v| v.id == held_out);
    Ok((
        MultiViewDataset { views: train, times: times.clone(), duration_seconds },
        MultiViewDataset { views: test, times, duration_seconds },
    ))
}

/// Writes every view with `fps` recorded in `meta.txt`.
pub fn write_dataset(root: impl AsRef<Path>, dataset: &MultiViewDataset, fps: f64) -> Result<()> {
    let root = root.as_ref();
    fs::create_dir_all(root)?;
    let mut cal = String::from("# id fx fy cx cy w h near far R|t (row-major world-to-camera)\n");
    for v in &dataset.views {
        let c = &v.camera;
        let e: Vec<String> = c.extrinsic_row_major().iter().map(|x| format!("{x:?}")).collect();
        cal.push_str(&format!(
            "{} {:?} {:?} {:?} {:?} {} {} {:?} {:?} {}\n",
            v.id,
            c.fx,
            c.fy,
            c.cx,
            c.cy,
            c.width,
            c.height,
            c.near,
            c.far,
            e.join(" ")
        ));
    }
    fs::write(root.join("cameras.txt"), cal)?;
    fs::write(root.join("meta.txt"), format!("fps {fps:?}\n"))?;
    for v in &dataset.views {
        fs::create_dir_all(camera_dir(root, v.id))?;
        v.frames
            .par_iter()
            .enumerate()
            .try_for_each(|(k, img)| img.write_ppm(frame_path(root, v.id, k)))?;
    }
    Ok(())
}
