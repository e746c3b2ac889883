//! Per-pixel detector outputs and the `.dwm` container.
//!
//! `.dwm` layout, all little-endian: the magic `DWM1`, then `u32` height,
//! width and class count `K`, then `f32` rasters in row-major order: energy
//! (`H·W`), class scores (`K·H·W`, class-major) and box sizes (`2·H·W`,
//! widths then heights).

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

pub const DWM_MAGIC: &[u8; 4] = b"DWM1";

#[derive(Debug, Clone, PartialEq)]
pub struct MapStack {
    height: usize,
    width: usize,
    num_classes: usize,
    energy: Vec<f32>,
    class_scores: Vec<f32>,
    box_wh: Vec<f32>,
}

impl MapStack {
    /// Checks the raster sizes, clamps energy into `[0, 1]` (NaN becomes 0)
    /// and rejects negative or non-finite class scores and box sizes.
    pub fn new(
        height: usize,
        width: usize,
        num_classes: usize,
        mut energy: Vec<f32>,
        class_scores: Vec<f32>,
        box_wh: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Format(format!(
                "map dimensions must be positive, got {height}x{width}"
            )));
        }
        let n = height * width;
        if energy.len() != n || class_scores.len() != num_classes * n || box_wh.len() != 2 * n {
            return Err(Error::Format(format!(
                "map sizes {}/{}/{} do not match H={height} W={width} K={num_classes}",
                energy.len(),
                class_scores.len(),
                box_wh.len()
            )));
        }
        for e in &mut energy {
            *e = if e.is_nan() { 0.0 } else { e.clamp(0.0, 1.0) };
        }
        if let Some(v) = class_scores.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Format(format!(
                "class score {v} is not a finite non-negative value"
            )));
        }
        if let Some(v) = box_wh.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Format(format!(
                "box size {v} is not a finite non-negative value"
            )));
        }
        Ok(Self {
            height,
            width,
            num_classes,
            energy,
            class_scores,
            box_wh,
        })
    }

    pub fn zeros(height: usize, width: usize, num_classes: usize) -> Self {
        let n = height * width;
        Self::new(
            height,
            width,
            num_classes,
            vec![0.0; n],
            vec![0.0; num_classes * n],
            vec![0.0; 2 * n],
        )
        .expect("consistent sizes")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn energy(&self) -> &[f32] {
        &self.energy
    }

    /// Replaces the energy raster, clamping into `[0, 1]`.
    pub fn set_energy(&mut self, energy: Vec<f32>) -> Result<()> {
        let m = Self::new(
            self.height,
            self.width,
            self.num_classes,
            energy,
            std::mem::take(&mut self.class_scores),
            std::mem::take(&mut self.box_wh),
        )?;
        *self = m;
        Ok(())
    }

    pub fn class_scores(&self) -> &[f32] {
        &self.class_scores
    }

    /// Score raster of class `k`.
    pub fn class_plane(&self, k: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.class_scores[k * n..(k + 1) * n]
    }

    pub fn box_wh(&self) -> &[f32] {
        &self.box_wh
    }

    pub fn box_widths(&self) -> &[f32] {
        &self.box_wh[..self.height * self.width]
    }

    pub fn box_heights(&self) -> &[f32] {
        &self.box_wh[self.height * self.width..]
    }

    /// Replaces the box-size rasters (widths then heights).
    pub fn set_box_wh(&mut self, box_wh: Vec<f32>) -> Result<()> {
        let m = Self::new(
            self.height,
            self.width,
            self.num_classes,
            std::mem::take(&mut self.energy),
            std::mem::take(&mut self.class_scores),
            box_wh,
        )?;
        *self = m;
        Ok(())
    }

    pub fn to_dwm_bytes(&self) -> Vec<u8> {
        let floats = self.energy.len() + self.class_scores.len() + self.box_wh.len();
        let mut out = Vec::with_capacity(16 + 4 * floats);
        out.extend_from_slice(DWM_MAGIC);
        for v in [self.height, self.width, self.num_classes] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in self.energy.iter().chain(&self.class_scores).chain(&self.box_wh) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_dwm_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != DWM_MAGIC {
            return Err(Error::Format("not a DWM1 map file".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (h, w, k) = (u32_at(4), u32_at(8), u32_at(12));
        let n = h
            .checked_mul(w)
            .and_then(|n| n.checked_mul(k + 3))
            .ok_or_else(|| Error::Format("map dimensions overflow".into()))?;
        if bytes.len() != 16 + 4 * n {
            return Err(Error::Format(format!(
                "map payload is {} bytes, expected {} for H={h} W={w} K={k}",
                bytes.len() - 16,
                4 * n
            )));
        }
        let floats: Vec<f32> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let hw = h * w;
        let energy = floats[..hw].to_vec();
        let class_scores = floats[hw..hw * (k + 1)].to_vec();
        let box_wh = floats[hw * (k + 1)..].to_vec();
        Self::new(h, w, k, energy, class_scores, box_wh)
    }

    pub fn load_dwm(path: &Path) -> Result<Self> {
        Self::from_dwm_bytes(&fsutil::read(path)?).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save_dwm(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_dwm_bytes())
    }
}
