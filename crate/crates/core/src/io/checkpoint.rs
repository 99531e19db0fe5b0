//! Sectioned little-endian checkpoint files; see `docs/formats.md`.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::math::{QuatPair, UnitQuat};
use crate::scene::sh::{coeff_count, MAX_SH_DEGREE};
use crate::scene::{Gaussian3D, Gaussian4D, HybridScene, ShColor};
use crate::train::{GradAccum, PoolState};

pub const MAGIC: [u8; 8] = *b"HGSCKPT\0";
pub const VERSION: u32 = 1;

const TAG_META: [u8; 4] = *b"META";
const TAG_STATIC: [u8; 4] = *b"STAT";
const TAG_DYNAMIC: [u8; 4] = *b"DYNA";
const TAG_OPTIM: [u8; 4] = *b"OPTS";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub scene: HybridScene,
    pub state: Option<GradAccum>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(format!("section {} payload too short", self.section)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn f64s<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64()?;
        }
        Ok(out)
    }
    fn quat(&mut self) -> Result<UnitQuat> {
        let q = self.f64s::<4>()?;
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !((n - 1.0).abs() <= 1e-6) {
            return Err(Error::format(format!("section {}: quaternion norm {n}", self.section)));
        }
        Ok(UnitQuat::from_raw_unchecked(q))
    }
    fn sh(&mut self, degree: u8) -> Result<ShColor> {
        let n = coeff_count(degree);
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            c.push(self.f64s::<3>()?);
        }
        ShColor::from_coeffs(degree, &c)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(format!("section {} has {} trailing bytes", self.section, self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn push_section(out: &mut Vec<u8>, tag: [u8; 4], payload: &[u8]) {
    out.extend_from_slice(&tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

fn write_pool_state(w: &mut Writer, p: &PoolState) {
    w.u64(p.width as u64);
    w.u64(p.rows() as u64);
    w.f64s(&p.m);
    w.f64s(&p.v);
    w.f64s(&p.grad_norm);
    p.count.iter().for_each(|c| w.u32(*c));
}

fn read_pool_state(r: &mut Reader) -> Result<PoolState> {
    let width = r.u64()? as usize;
    let rows = r.u64()? as usize;
    let cells = width
        .checked_mul(rows)
        .filter(|c| c.saturating_mul(16) <= r.buf.len())
        .ok_or_else(|| Error::format("optimizer state dimensions exceed payload"))?;
    let mut p = PoolState::new(width, 0);
    p.m = (0..cells).map(|_| r.f64()).collect::<Result<_>>()?;
    p.v = (0..cells).map(|_| r.f64()).collect::<Result<_>>()?;
    p.grad_norm = (0..rows).map(|_| r.f64()).collect::<Result<_>>()?;
    p.count = (0..rows).map(|_| r.u32()).collect::<Result<_>>()?;
    Ok(p)
}

pub fn checkpoint_to_bytes(scene: &HybridScene, state: Option<&GradAccum>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());

    let mut w = Writer(Vec::new());
    w.f64(scene.tau);
    w.f64(scene.duration_seconds);
    w.0.push(scene.sh_degree);
    w.u64(scene.statics.len() as u64);
    w.u64(scene.dynamics.len() as u64);
    w.0.push(state.is_some() as u8);
    push_section(&mut out, TAG_META, &w.0);

    let mut w = Writer(Vec::new());
    for g in &scene.statics {
        w.f64s(g.mean.as_slice());
        w.f64s(&g.rot.as_array());
        w.f64s(&g.log_scales);
        w.f64(g.opacity_logit);
        g.color.coeffs().iter().for_each(|c| w.f64s(c));
    }
    push_section(&mut out, TAG_STATIC, &w.0);

    let mut w = Writer(Vec::new());
    for g in &scene.dynamics {
        w.f64s(g.mean.as_slice());
        w.f64(g.mean_t);
        w.f64s(&g.rot.left.as_array());
        w.f64s(&g.rot.right.as_array());
        w.f64s(&g.log_scales);
        w.f64(g.opacity_logit);
        g.color.coeffs().iter().for_each(|c| w.f64s(c));
    }
    push_section(&mut out, TAG_DYNAMIC, &w.0);

    if let Some(st) = state {
        let mut w = Writer(Vec::new());
        w.u64(st.step);
        write_pool_state(&mut w, &st.statics);
        write_pool_state(&mut w, &st.dynamics);
        push_section(&mut out, TAG_OPTIM, &w.0);
    }
    out
}

fn section_name(tag: &[u8]) -> String {
    String::from_utf8_lossy(tag).into_owned()
}

/// Splits the file into verified `(tag, payload)` pairs.
fn sections(bytes: &[u8]) -> Result<Vec<([u8; 4], &[u8])>> {
    if bytes.len() < 12 {
        return Err(Error::Integrity { section: "header".into(), reason: format!("file is only {} bytes", bytes.len()) });
    }
    if bytes[..8] != MAGIC {
        return Err(Error::Integrity { section: "header".into(), reason: "bad magic".into() });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion { found: version, expected: VERSION });
    }
    let mut pos = 12;
    let mut out = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < 12 {
            return Err(Error::Integrity { section: "section header".into(), reason: "truncated".into() });
        }
        let tag: [u8; 4] = bytes[pos..pos + 4].try_into().unwrap();
        let name = section_name(&tag);
        let len = u64::from_le_bytes(bytes[pos + 4..pos + 12].try_into().unwrap());
        pos += 12;
        let avail = (bytes.len() - pos) as u64;
        if len.checked_add(4).is_none_or(|need| need > avail) {
            return Err(Error::Integrity { section: name, reason: format!("truncated: needs {len} payload bytes") });
        }
        let len = len as usize;
        let payload = &bytes[pos..pos + len];
        let stored = u32::from_le_bytes(bytes[pos + len..pos + len + 4].try_into().unwrap());
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(Error::Integrity {
                section: name,
                reason: format!("crc mismatch (stored {stored:08x}, computed {actual:08x})"),
            });
        }
        out.push((tag, payload));
        pos += len + 4;
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let secs = sections(bytes)?;
    let find = |tag: [u8; 4]| secs.iter().find(|(t, _)| *t == tag).map(|(_, p)| *p);
    let require = |tag: [u8; 4]| {
        find(tag).ok_or_else(|| Error::Integrity { section: section_name(&tag), reason: "missing".into() })
    };
    for (i, (t, _)) in secs.iter().enumerate() {
        if ![TAG_META, TAG_STATIC, TAG_DYNAMIC, TAG_OPTIM].contains(t) {
            return Err(Error::Integrity { section: section_name(t), reason: "unknown section".into() });
        }
        if secs[..i].iter().any(|(u, _)| u == t) {
            return Err(Error::Integrity { section: section_name(t), reason: "duplicate section".into() });
        }
    }

    let mut r = Reader { buf: require(TAG_META)?, pos: 0, section: "META" };
    let tau = r.f64()?;
    let duration = r.f64()?;
    let degree = r.u8()?;
    let n_static = r.u64()?;
    let n_dynamic = r.u64()?;
    let has_state = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::format(format!("META state flag {v}"))),
    };
    r.finish()?;
    if degree > MAX_SH_DEGREE {
        return Err(Error::format(format!("SH degree {degree} out of range")));
    }
    let mut scene = HybridScene::new(tau, duration, degree)?;
    let k = coeff_count(degree);

    let payload = require(TAG_STATIC)?;
    let per = 8 * (11 + 3 * k);
    if payload.len() as u64 != n_static.saturating_mul(per as u64) {
        return Err(Error::format("STAT size does not match the static count"));
    }
    let mut r = Reader { buf: payload, pos: 0, section: "STAT" };
    for _ in 0..n_static {
        let mean = Vector3::from(r.f64s::<3>()?);
        let rot = r.quat()?;
        let log_scales = r.f64s::<3>()?;
        let opacity_logit = r.f64()?;
        let color = r.sh(degree)?;
        scene.statics.push(Gaussian3D { mean, rot, log_scales, opacity_logit, color });
    }
    r.finish()?;

    let payload = require(TAG_DYNAMIC)?;
    let per = 8 * (17 + 3 * k);
    if payload.len() as u64 != n_dynamic.saturating_mul(per as u64) {
        return Err(Error::format("DYNA size does not match the dynamic count"));
    }
    let mut r = Reader { buf: payload, pos: 0, section: "DYNA" };
    for _ in 0..n_dynamic {
        let mean = Vector3::from(r.f64s::<3>()?);
        let mean_t = r.f64()?;
        let left = r.quat()?;
        let right = r.quat()?;
        let log_scales = r.f64s::<4>()?;
        let opacity_logit = r.f64()?;
        let color = r.sh(degree)?;
        scene.dynamics.push(Gaussian4D { mean, mean_t, rot: QuatPair { left, right }, log_scales, opacity_logit, color });
    }
    r.finish()?;

    let state = match (has_state, find(TAG_OPTIM)) {
        (false, None) => None,
        (true, None) => return Err(Error::Integrity { section: "OPTS".into(), reason: "missing".into() }),
        (false, Some(_)) => return Err(Error::format("OPTS present but META says there is no optimizer state")),
        (true, Some(payload)) => {
            let mut r = Reader { buf: payload, pos: 0, section: "OPTS" };
            let step = r.u64()?;
            let statics = read_pool_state(&mut r)?;
            let dynamics = read_pool_state(&mut r)?;
            r.finish()?;
            let st = GradAccum { step, statics, dynamics };
            if !st.is_aligned(&scene) {
                return Err(Error::format("optimizer state does not match the scene"));
            }
            Some(st)
        }
    };
    Ok(Checkpoint { scene, state })
}

pub fn save_checkpoint(path: impl AsRef<Path>, scene: &HybridScene, state: Option<&GradAccum>) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(scene, state))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    checkpoint_from_bytes(&bytes)
}
