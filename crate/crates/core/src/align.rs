//! Rigid realignment of scanned pages.
//!
//! A [`RigidTransform`] maps reference-page coordinates to scan coordinates:
//! rotate by `theta` degrees about the image centre (counter-clockwise as seen
//! on screen, y pointing down), then translate by `(tx, ty)`. Coordinates are
//! continuous with pixel `(c, r)` covering `[c, c+1)×[r, r+1)`.

use rayon::prelude::*;

use crate::annotation::{BBox, Page};
use crate::error::{Error, Result};
use crate::image::{gaussian_blur_f32, GrayImage, WHITE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    /// Rotation in degrees, counter-clockwise on screen.
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        theta: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(theta: f64, tx: f64, ty: f64) -> Self {
        Self { theta, tx, ty }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { theta: 0.0, tx, ty }
    }

    pub fn rotation(theta: f64) -> Self {
        Self {
            theta,
            tx: 0.0,
            ty: 0.0,
        }
    }

    fn cos_sin(&self) -> (f64, f64) {
        if self.theta == 0.0 {
            return (1.0, 0.0);
        }
        let r = self.theta.to_radians();
        (r.cos(), r.sin())
    }

    fn rotate(theta: f64, x: f64, y: f64) -> (f64, f64) {
        let (c, s) = RigidTransform::rotation(theta).cos_sin();
        (c * x + s * y, -s * x + c * y)
    }

    /// Maps a reference point to the scan, rotating about `center`.
    pub fn apply(&self, center: (f64, f64), x: f64, y: f64) -> (f64, f64) {
        let (rx, ry) = Self::rotate(self.theta, x - center.0, y - center.1);
        (rx + center.0 + self.tx, ry + center.1 + self.ty)
    }

    pub fn inverse(&self) -> Self {
        let (x, y) = Self::rotate(-self.theta, self.tx, self.ty);
        Self {
            theta: -self.theta,
            tx: -x,
            ty: -y,
        }
    }

    /// `self` applied first, then `next`.
    pub fn then(&self, next: &RigidTransform) -> Self {
        let (x, y) = Self::rotate(next.theta, self.tx, self.ty);
        Self {
            theta: self.theta + next.theta,
            tx: x + next.tx,
            ty: y + next.ty,
        }
    }
}

fn center_of(width: usize, height: usize) -> (f64, f64) {
    (width as f64 / 2.0, height as f64 / 2.0)
}

/// Bilinear sample at continuous coordinates, pixel centres at `+0.5`.
/// Neighbours outside the image read as white.
#[inline]
fn sample_bilinear(data: &[f32], width: usize, height: usize, x: f64, y: f64) -> f32 {
    let fx = x - 0.5;
    let fy = y - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let ax = (fx - x0) as f32;
    let ay = (fy - y0) as f32;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let px = |xx: i64, yy: i64| -> f32 {
        if xx < 0 || yy < 0 || xx >= width as i64 || yy >= height as i64 {
            WHITE as f32
        } else {
            data[yy as usize * width + xx as usize]
        }
    };
    let top = if ax == 0.0 {
        px(x0, y0)
    } else {
        px(x0, y0) * (1.0 - ax) + px(x0 + 1, y0) * ax
    };
    if ay == 0.0 {
        return top;
    }
    let bottom = if ax == 0.0 {
        px(x0, y0 + 1)
    } else {
        px(x0, y0 + 1) * (1.0 - ax) + px(x0 + 1, y0 + 1) * ax
    };
    top * (1.0 - ay) + bottom * ay
}

/// Warps a float raster: output pixel `q` takes the input value at
/// `t⁻¹(q)`. Shared by [`warp_image`] and the scan degradation simulator.
pub fn warp_f32(data: &[f32], width: usize, height: usize, t: &RigidTransform) -> Vec<f32> {
    let center = center_of(width, height);
    let inv = t.inverse();
    let mut out = vec![0f32; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            let (sx, sy) = inv.apply(center, c as f64 + 0.5, r as f64 + 0.5);
            *v = sample_bilinear(data, width, height, sx, sy);
        }
    });
    out
}

/// Resamples `img` under `t` with bilinear interpolation and white fill.
/// The identity and integer translations reproduce pixels exactly.
pub fn warp_image(img: &GrayImage, t: &RigidTransform) -> GrayImage {
    let out = warp_f32(&img.to_f32(), img.width(), img.height(), t);
    GrayImage::from_f32(img.width(), img.height(), &out).expect("same dimensions")
}

/// Moves every annotation through `t`: the four corners are mapped and the
/// new box is their axis-aligned envelope, clipped to the page.
pub fn transfer_annotations(page: &Page, t: &RigidTransform) -> Page {
    let (w, h) = (page.width as f64, page.height as f64);
    let center = (w / 2.0, h / 2.0);
    let mut out = page.clone();
    for a in &mut out.annotations {
        let b = a.bbox;
        let corners = [
            (b.x_min(), b.y_min()),
            (b.x_max(), b.y_min()),
            (b.x_min(), b.y_max()),
            (b.x_max(), b.y_max()),
        ]
        .map(|(x, y)| t.apply(center, x, y));
        let xs = corners.map(|c| c.0);
        let ys = corners.map(|c| c.1);
        let fold = |v: [f64; 4], f: fn(f64, f64) -> f64| v.into_iter().reduce(f).unwrap();
        let env = BBox::new(
            fold(xs, f64::min),
            fold(ys, f64::min),
            fold(xs, f64::max),
            fold(ys, f64::max),
        )
        .expect("envelope of finite corners");
        a.bbox = env.clip(w, h);
    }
    out
}

/// Search window for [`estimate_transform`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRange {
    pub max_theta: f64,
    pub max_shift: f64,
}

impl Default for SearchRange {
    fn default() -> Self {
        Self {
            max_theta: 10.0,
            max_shift: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub transform: RigidTransform,
    pub ncc: f64,
}

/// Every full-resolution candidate the search scored; used to check the
/// argmax contract.
#[derive(Debug, Clone, Default)]
pub struct SearchTrace {
    pub full_resolution: Vec<(RigidTransform, f64)>,
}

/// Candidates whose overlap covers less than this share of the reference are
/// not scored.
const MIN_OVERLAP_FRACTION: f64 = 0.25;

/// Gaussian pre-smoothing applied to both images before scoring.
const SMOOTHING_SIGMA: f64 = 1.5;

struct Level {
    factor: usize,
    width: usize,
    height: usize,
    reference: Vec<f32>,
    scanned: Vec<f32>,
}

fn downsample(data: &[f32], width: usize, height: usize, factor: usize) -> (Vec<f32>, usize, usize) {
    if factor == 1 {
        return (data.to_vec(), width, height);
    }
    let (w, h) = (width / factor, height / factor);
    let mut out = vec![0f32; w * h];
    let norm = (factor * factor) as f32;
    for r in 0..h {
        for c in 0..w {
            let mut s = 0f32;
            for dy in 0..factor {
                let row = (r * factor + dy) * width;
                for dx in 0..factor {
                    s += data[row + c * factor + dx];
                }
            }
            out[r * w + c] = s / norm;
        }
    }
    (out, w, h)
}

impl Level {
    /// Bilinear sample of the scan; `(x, y)` is known to lie inside it.
    #[inline]
    fn sample(&self, x: f64, y: f64) -> f64 {
        let (fx, fy) = (x - 0.5, y - 0.5);
        let (x0, y0) = (fx as usize, fy as usize);
        if x0 + 1 >= self.width || y0 + 1 >= self.height {
            return sample_bilinear(&self.scanned, self.width, self.height, x, y) as f64;
        }
        let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
        let i = y0 * self.width + x0;
        let d = &self.scanned;
        let top = d[i] as f64 * (1.0 - ax) + d[i + 1] as f64 * ax;
        let bottom = d[i + self.width] as f64 * (1.0 - ax) + d[i + self.width + 1] as f64 * ax;
        top * (1.0 - ay) + bottom * ay
    }

    /// NCC between the reference and the scan sampled at `t(p)`, over
    /// reference pixels whose image lies inside the scan. `None` when the
    /// overlap is too small or flat.
    fn ncc(&self, t: &RigidTransform) -> Option<f64> {
        let f = self.factor as f64;
        // the transform is in full-resolution pixels; scale translation
        let tl = RigidTransform::new(t.theta, t.tx / f, t.ty / f);
        let (cos, sin) = tl.cos_sin();
        let (cx, cy) = center_of(self.width, self.height);
        let (w, h) = (self.width as f64, self.height as f64);
        let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0usize, 0f64, 0f64, 0f64, 0f64, 0f64);
        for r in 0..self.height {
            let dy = r as f64 + 0.5 - cy;
            // x' = cos·dx + sin·dy, y' = −sin·dx + cos·dy, stepped along the row
            let dx0 = 0.5 - cx;
            let mut x = cos * dx0 + sin * dy + cx + tl.tx;
            let mut y = -sin * dx0 + cos * dy + cy + tl.ty;
            for c in 0..self.width {
                if x >= 0.5 && y >= 0.5 && x <= w - 0.5 && y <= h - 0.5 {
                    let a = self.reference[r * self.width + c] as f64;
                    let b = self.sample(x, y);
                    n += 1;
                    sa += a;
                    sb += b;
                    saa += a * a;
                    sbb += b * b;
                    sab += a * b;
                }
                x += cos;
                y -= sin;
            }
        }
        if (n as f64) < MIN_OVERLAP_FRACTION * (self.width * self.height) as f64 {
            return None;
        }
        let nf = n as f64;
        let va = saa - sa * sa / nf;
        let vb = sbb - sb * sb / nf;
        if va <= 1e-9 * nf || vb <= 1e-9 * nf {
            return None;
        }
        Some(((sab - sa * sb / nf) / (va * vb).sqrt()).clamp(-1.0, 1.0))
    }
}

fn variance(data: &[f32]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().map(|&v| v as f64).sum::<f64>() / n;
    data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n
}

fn steps(center: f64, step: f64, half: i64, limit: f64) -> Vec<f64> {
    (-half..=half)
        .map(|i| center + i as f64 * step)
        .filter(|v| v.abs() <= limit + 1e-9)
        .collect()
}

/// Scores candidates in parallel; returns the best in scan order (first wins
/// on ties) together with every scored candidate.
type Scored = (RigidTransform, f64);

fn best_of(level: &Level, candidates: &[RigidTransform]) -> (Option<Scored>, Vec<Scored>) {
    let scores: Vec<Option<f64>> = candidates.par_iter().map(|t| level.ncc(t)).collect();
    let mut best: Option<Scored> = None;
    let mut scored = Vec::new();
    for (t, s) in candidates.iter().zip(scores) {
        if let Some(s) = s {
            scored.push((*t, s));
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((*t, s));
            }
        }
    }
    (best, scored)
}

fn grid(thetas: &[f64], shifts_x: &[f64], shifts_y: &[f64]) -> Vec<RigidTransform> {
    let mut out = Vec::with_capacity(thetas.len() * shifts_x.len() * shifts_y.len());
    for &th in thetas {
        for &ty in shifts_y {
            for &tx in shifts_x {
                out.push(RigidTransform::new(th, tx, ty));
            }
        }
    }
    out
}

/// Estimates the rigid transform mapping `reference` onto `scanned` by
/// coarse-to-fine exhaustive NCC search.
///
/// The coarsest pass scans the whole range on a ×4 downsampled pair with
/// 1°/5 px steps; each refinement halves the steps around the incumbent
/// (×2, then full resolution) down to 0.05°/1 px. A parabolic fit through
/// the final grid neighbours then refines the peak below the grid step and is
/// kept only if it scores at least as high.
pub fn estimate_transform(reference: &GrayImage, scanned: &GrayImage, range: SearchRange) -> Result<Alignment> {
    estimate_transform_traced(reference, scanned, range).map(|(a, _)| a)
}

pub fn estimate_transform_traced(
    reference: &GrayImage,
    scanned: &GrayImage,
    range: SearchRange,
) -> Result<(Alignment, SearchTrace)> {
    if reference.width() != scanned.width() || reference.height() != scanned.height() {
        return Err(Error::InvalidArgument(format!(
            "reference is {}x{} but scan is {}x{}; rescale the scan first",
            reference.width(),
            reference.height(),
            scanned.width(),
            scanned.height()
        )));
    }
    if !(range.max_theta >= 0.0 && range.max_shift >= 0.0) {
        return Err(Error::InvalidArgument("search range must be non-negative".into()));
    }
    let (w, h) = (reference.width(), reference.height());
    if variance(&reference.to_f32()) < 1e-9 {
        return Err(Error::DegenerateImage("reference has zero variance".into()));
    }
    if variance(&scanned.to_f32()) < 1e-9 {
        return Err(Error::DegenerateImage("scan has zero variance".into()));
    }
    // thin line art decorrelates under sub-pixel offsets; smoothing widens
    // the correlation peak so the 1 px grid lands next to it
    let ref_f = gaussian_blur_f32(&reference.to_f32(), w, h, SMOOTHING_SIGMA);
    let scan_f = gaussian_blur_f32(&scanned.to_f32(), w, h, SMOOTHING_SIGMA);
    let level = |factor: usize| -> Level {
        // tiny images cannot be downsampled much
        let factor = factor.min(w / 8).min(h / 8).max(1);
        let (reference, lw, lh) = downsample(&ref_f, w, h, factor);
        let (scanned, _, _) = downsample(&scan_f, w, h, factor);
        Level {
            factor,
            width: lw,
            height: lh,
            reference,
            scanned,
        }
    };

    // coarsest: exhaustive
    let coarse = level(4);
    let (mut dtheta, mut dshift) = (1.0f64, 5.0f64);
    let thetas = steps(0.0, dtheta, (range.max_theta / dtheta).floor() as i64, range.max_theta);
    let shifts = steps(0.0, dshift, (range.max_shift / dshift).floor() as i64, range.max_shift);
    let (best, _) = best_of(&coarse, &grid(&thetas, &shifts, &shifts));
    let (mut current, _) = best.ok_or(Error::NoOverlap)?;

    let mid = level(2);
    let fine = level(1);
    let mut trace = SearchTrace::default();
    let mut best_full: Option<(RigidTransform, f64)> = None;
    let mut round = 0;
    loop {
        let next_theta = (dtheta / 2.0).max(0.05);
        let next_shift = (dshift / 2.0).max(1.0);
        if next_theta == dtheta && next_shift == dshift && round > 1 {
            break;
        }
        dtheta = next_theta;
        dshift = next_shift;
        let lvl = if round == 0 { &mid } else { &fine };
        let cands = grid(
            &steps(current.theta, dtheta, 2, range.max_theta),
            &steps(current.tx, dshift, 2, range.max_shift),
            &steps(current.ty, dshift, 2, range.max_shift),
        );
        let (best, scored) = best_of(lvl, &cands);
        if let Some((t, s)) = best {
            current = t;
            if lvl.factor == 1 {
                trace.full_resolution.extend(scored);
                if best_full.is_none_or(|(_, b)| s > b) {
                    best_full = Some((t, s));
                }
            }
        }
        round += 1;
    }
    let (mut transform, mut ncc) = match best_full {
        Some(b) => b,
        None => fine.ncc(&current).map(|s| (current, s)).ok_or(Error::NoOverlap)?,
    };
    if let Some((t, s)) = parabolic_peak(&fine, &transform, ncc, dtheta, dshift, range) {
        trace.full_resolution.push((t, s));
        if s >= ncc {
            (transform, ncc) = (t, s);
        }
    }
    Ok((Alignment { transform, ncc }, trace))
}

/// Vertex offset of the parabola through `(-1, lo)`, `(0, mid)`, `(1, hi)`,
/// or 0 when the samples do not bracket a maximum.
fn vertex_offset(lo: f64, mid: f64, hi: f64) -> f64 {
    let curvature = lo - 2.0 * mid + hi;
    if curvature >= 0.0 {
        return 0.0;
    }
    (0.5 * (lo - hi) / curvature).clamp(-0.5, 0.5)
}

/// Sub-grid refinement: one parabola per axis through the incumbent and its
/// two grid neighbours, combined into a single candidate.
fn parabolic_peak(
    level: &Level,
    t: &RigidTransform,
    score: f64,
    dtheta: f64,
    dshift: f64,
    range: SearchRange,
) -> Option<(RigidTransform, f64)> {
    let axis = |lo: RigidTransform, hi: RigidTransform| -> Option<f64> {
        Some(vertex_offset(level.ncc(&lo)?, score, level.ncc(&hi)?))
    };
    let th = axis(
        RigidTransform::new(t.theta - dtheta, t.tx, t.ty),
        RigidTransform::new(t.theta + dtheta, t.tx, t.ty),
    )?;
    let tx = axis(
        RigidTransform::new(t.theta, t.tx - dshift, t.ty),
        RigidTransform::new(t.theta, t.tx + dshift, t.ty),
    )?;
    let ty = axis(
        RigidTransform::new(t.theta, t.tx, t.ty - dshift),
        RigidTransform::new(t.theta, t.tx, t.ty + dshift),
    )?;
    let refined = RigidTransform::new(
        (t.theta + th * dtheta).clamp(-range.max_theta, range.max_theta),
        (t.tx + tx * dshift).clamp(-range.max_shift, range.max_shift),
        (t.ty + ty * dshift).clamp(-range.max_shift, range.max_shift),
    );
    level.ncc(&refined).map(|s| (refined, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{Annotation, Label};

    fn pattern(w: usize, h: usize) -> GrayImage {
        let mut img = GrayImage::filled(w, h, 255);
        for y in 0..h {
            for x in 0..w {
                let v = ((x * 7 + y * 13) % 31) as u8 * 8;
                img.set(x, y, v);
            }
        }
        img
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = pattern(37, 23);
        assert_eq!(warp_image(&img, &RigidTransform::IDENTITY), img);
    }

    #[test]
    fn integer_translation_shifts_pixels() {
        let img = pattern(20, 15);
        let out = warp_image(&img, &RigidTransform::translation(3.0, -2.0));
        for y in 0..15 {
            for x in 0..20 {
                let sx = x as i64 - 3;
                let sy = y as i64 + 2;
                assert_eq!(out.get(x, y), img.get_or_white(sx, sy), "at {x},{y}");
            }
        }
    }

    #[test]
    fn inverse_and_composition() {
        let t = RigidTransform::new(3.5, 12.0, -7.25);
        let id = t.then(&t.inverse());
        assert!(id.theta.abs() < 1e-9);
        assert!(id.tx.abs() < 1e-6 && id.ty.abs() < 1e-6);
        let c = (50.0, 40.0);
        let u = RigidTransform::new(-1.0, 2.0, 3.0);
        let (x1, y1) = u.apply(c, t.apply(c, 10.0, 20.0).0, t.apply(c, 10.0, 20.0).1);
        let (x2, y2) = t.then(&u).apply(c, 10.0, 20.0);
        assert!((x1 - x2).abs() < 1e-9 && (y1 - y2).abs() < 1e-9);
    }

    #[test]
    fn rotation_is_counter_clockwise_on_screen() {
        // a point to the right of centre moves up (smaller y)
        let (x, y) = RigidTransform::rotation(90.0).apply((0.0, 0.0), 1.0, 0.0);
        assert!(x.abs() < 1e-12 && (y + 1.0).abs() < 1e-12);
    }

    fn page_with(boxes: &[[f64; 4]], w: u32, h: u32) -> Page {
        let mut p = Page::new("p", w, h);
        for b in boxes {
            p.annotations.push(Annotation::new(
                Label::bare("a").unwrap(),
                BBox::new(b[0], b[1], b[2], b[3]).unwrap(),
            ));
        }
        p
    }

    #[test]
    fn transfer_translation_and_identity() {
        let p = page_with(&[[10.0, 10.0, 20.0, 30.0], [40.5, 5.0, 50.0, 9.0]], 100, 100);
        assert_eq!(transfer_annotations(&p, &RigidTransform::IDENTITY), p);
        let q = transfer_annotations(&p, &RigidTransform::translation(5.0, -3.0));
        assert_eq!(q.annotations[0].bbox.as_array(), [15.0, 7.0, 25.0, 27.0]);
        assert_eq!(q.annotations[1].bbox.as_array(), [45.5, 2.0, 55.0, 6.0]);
    }

    #[test]
    fn transfer_quarter_turn_swaps_dimensions() {
        let p = page_with(&[[40.0, 45.0, 60.0, 55.0]], 100, 100);
        let q = transfer_annotations(&p, &RigidTransform::rotation(90.0));
        let b = q.annotations[0].bbox;
        assert!((b.width() - 10.0).abs() < 1e-9);
        assert!((b.height() - 20.0).abs() < 1e-9);
        assert!((b.center().0 - 50.0).abs() < 1e-9 && (b.center().1 - 50.0).abs() < 1e-9);
    }

    #[test]
    fn transfer_clips_to_page() {
        let p = page_with(&[[0.0, 0.0, 10.0, 10.0]], 100, 100);
        let q = transfer_annotations(&p, &RigidTransform::translation(-5.0, 95.0));
        assert_eq!(q.annotations[0].bbox.as_array(), [0.0, 95.0, 5.0, 100.0]);
    }

    #[test]
    fn flat_image_is_degenerate() {
        let flat = GrayImage::filled(64, 64, 200);
        let img = pattern(64, 64);
        assert!(matches!(
            estimate_transform(&flat, &img, SearchRange::default()),
            Err(Error::DegenerateImage(_))
        ));
        assert!(matches!(
            estimate_transform(&img, &flat, SearchRange::default()),
            Err(Error::DegenerateImage(_))
        ));
    }

    #[test]
    fn size_mismatch_rejected() {
        assert!(matches!(
            estimate_transform(&pattern(64, 64), &pattern(64, 60), SearchRange::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn vertex_offset_finds_the_parabola_peak() {
        // samples of -(x - v)^2 at x = -1, 0, 1
        for v in [-0.4, -0.1, 0.0, 0.25, 0.5] {
            let f = |x: f64| -(x - v) * (x - v);
            assert!((vertex_offset(f(-1.0), f(0.0), f(1.0)) - v).abs() < 1e-12);
        }
        // a valley or a line has no interior maximum
        assert_eq!(vertex_offset(1.0, 0.0, 1.0), 0.0);
        assert_eq!(vertex_offset(0.0, 1.0, 2.0), 0.0);
    }
}
