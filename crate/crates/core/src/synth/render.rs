//! Oracle output maps: what a perfect (or deliberately flawed) detector would
//! emit for a page.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::annotation::{BBox, Page};
use crate::dwd::MapStack;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    /// Standard deviation of additive Gaussian noise on the energy map.
    pub energy_noise_sigma: f64,
    /// Per-symbol probability of scoring a wrong class.
    pub class_confusion: f64,
    /// Radius of the mean filter applied to the box-size maps.
    pub box_smoothing_radius: u32,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_noise_sigma.is_finite() && self.energy_noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "energy noise sigma must be ≥ 0, got {}",
                self.energy_noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.class_confusion) {
            return Err(Error::InvalidArgument(format!(
                "class confusion must lie in [0, 1), got {}",
                self.class_confusion
            )));
        }
        Ok(())
    }
}

/// Half-open pixel range whose centres fall in `[lo, hi)`.
fn pixel_span(lo: f64, hi: f64, limit: usize) -> std::ops::Range<usize> {
    let a = (lo - 0.5).ceil().max(0.0) as usize;
    let b = ((hi - 0.5).ceil().max(0.0) as usize).min(limit);
    a.min(b)..b
}

fn inside_pixels(b: &BBox, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    let rows = pixel_span(b.y_min(), b.y_max(), height);
    let cols = pixel_span(b.x_min(), b.x_max(), width);
    rows.flat_map(move |r| cols.clone().map(move |c| (r, c)))
}

/// Mean over the `(2r+1)²` window clipped to the raster, via a summed-area
/// table.
fn box_mean(data: &[f64], width: usize, height: usize, r: usize) -> Vec<f64> {
    let mut sat = vec![0f64; (width + 1) * (height + 1)];
    for y in 0..height {
        let mut row = 0f64;
        for x in 0..width {
            row += data[y * width + x];
            sat[(y + 1) * (width + 1) + x + 1] = sat[y * (width + 1) + x + 1] + row;
        }
    }
    let mut out = vec![0f64; width * height];
    for y in 0..height {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(height));
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(width));
            let s = sat[y1 * (width + 1) + x1] - sat[y0 * (width + 1) + x1] - sat[y1 * (width + 1) + x0]
                + sat[y0 * (width + 1) + x0];
            out[y * width + x] = s / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

/// Renders oracle maps for `page`.
///
/// * energy: a Gaussian bump of peak 1 at every box centre with σ equal to a
///   quarter of the box width/height, summed and clamped to `[0, 1]`, plus
///   optional Gaussian noise;
/// * class scores: 1 on the pixels of each box for its class (or, with
///   probability `class_confusion`, a uniformly drawn other class);
/// * box sizes: the true `(w, h)` on the pixels of each box, 0 elsewhere. With
///   a smoothing radius `r > 0`, the in-box values are replaced by a
///   `(2r+1)²` mean of a map whose background holds the page's mean box size,
///   so small boxes are pulled up and large ones down.
///
/// A pixel belongs to a box when its centre lies in `[x_min, x_max) × [y_min,
/// y_max)`.
pub fn render_maps(page: &Page, noise: &NoiseSpec, registry: &[String]) -> Result<MapStack> {
    noise.validate()?;
    let (w, h, k) = (page.width as usize, page.height as usize, registry.len());
    let n = w * h;
    let class_of: Vec<usize> = page
        .annotations
        .iter()
        .map(|a| {
            registry
                .iter()
                .position(|c| c == a.class_name())
                .ok_or_else(|| Error::UnknownClass(a.class_name().to_string()))
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);

    let mut energy = vec![0f64; n];
    for a in &page.annotations {
        let (cx, cy) = a.bbox.center();
        let (sx, sy) = (a.bbox.width() / 4.0, a.bbox.height() / 4.0);
        if sx <= 0.0 || sy <= 0.0 {
            continue;
        }
        let rows = pixel_span(cy - 4.0 * sy, cy + 4.0 * sy, h);
        let cols = pixel_span(cx - 4.0 * sx, cx + 4.0 * sx, w);
        for r in rows {
            let dy = (r as f64 + 0.5 - cy) / sy;
            for c in cols.clone() {
                let dx = (c as f64 + 0.5 - cx) / sx;
                energy[r * w + c] += (-(dx * dx + dy * dy) / 2.0).exp();
            }
        }
    }

    let mut scores = vec![0f32; k * n];
    for (a, &true_class) in page.annotations.iter().zip(&class_of) {
        let mut cls = true_class;
        if noise.class_confusion > 0.0 && k > 1 && rng.random_bool(noise.class_confusion) {
            let other = rng.random_range(0..k - 1);
            cls = if other >= true_class { other + 1 } else { other };
        }
        for (r, c) in inside_pixels(&a.bbox, w, h) {
            scores[cls * n + r * w + c] = 1.0;
        }
    }

    let mut box_w = vec![0f64; n];
    let mut box_h = vec![0f64; n];
    let mut inside = vec![false; n];
    for a in &page.annotations {
        for (r, c) in inside_pixels(&a.bbox, w, h) {
            let i = r * w + c;
            box_w[i] = a.bbox.width();
            box_h[i] = a.bbox.height();
            inside[i] = true;
        }
    }
    let radius = noise.box_smoothing_radius as usize;
    if radius > 0 && !page.annotations.is_empty() {
        let m = page.annotations.len() as f64;
        let mean_w = page.annotations.iter().map(|a| a.bbox.width()).sum::<f64>() / m;
        let mean_h = page.annotations.iter().map(|a| a.bbox.height()).sum::<f64>() / m;
        let fill = |plane: &[f64], bg: f64| -> Vec<f64> {
            plane
                .iter()
                .zip(&inside)
                .map(|(&v, &i)| if i { v } else { bg })
                .collect()
        };
        let sw = box_mean(&fill(&box_w, mean_w), w, h, radius);
        let sh = box_mean(&fill(&box_h, mean_h), w, h, radius);
        for i in 0..n {
            if inside[i] {
                box_w[i] = sw[i];
                box_h[i] = sh[i];
            }
        }
    }

    if noise.energy_noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise.energy_noise_sigma)
            .map_err(|e| Error::InvalidArgument(format!("energy noise: {e}")))?;
        for e in &mut energy {
            *e += normal.sample(&mut rng);
        }
    }

    let wh: Vec<f32> = box_w.iter().chain(&box_h).map(|&v| v as f32).collect();
    MapStack::new(h, w, k, energy.into_iter().map(|v| v as f32).collect(), scores, wh)
}
