//! Synthetic score pages with exact ground truth.
//!
//! Pages carry five-line staves and primitive glyphs standing in for music
//! symbols. Every glyph class has a fixed size, boxes have integer corners and
//! odd dimensions (so each box centre is a pixel centre), and neighbouring
//! glyphs are separated by at least [`MIN_GAP`] pixels. Those properties make
//! the oracle maps from [`render_maps`] decode exactly.

mod degrade;
mod render;

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub use degrade::{degrade_image, DegradeParams};
pub use render::{render_maps, NoiseSpec};

use crate::annotation::{Annotation, BBox, Dataset, Label, Page, Rational};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Minimum blank space between neighbouring glyph boxes.
pub const MIN_GAP: u32 = 8;
const SIDE_MARGIN: u32 = 10;
const INK: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    FilledEllipse,
    EllipseRing,
    Rect,
    Plus,
    Cross,
    Wedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Glyph {
    pub class_name: &'static str,
    pub shape: Shape,
    pub width: u32,
    pub height: u32,
    /// Noteheads get a four-field label with staff position and duration.
    pub duration: Option<(i64, i64)>,
}

const fn glyph(class_name: &'static str, shape: Shape, width: u32, height: u32, duration: Option<(i64, i64)>) -> Glyph {
    Glyph {
        class_name,
        shape,
        width,
        height,
        duration,
    }
}

/// Built-in glyph classes, in registry order.
pub const CATALOG: &[Glyph] = &[
    glyph("noteheadBlack", Shape::FilledEllipse, 13, 11, Some((1, 4))),
    glyph("noteheadHalf", Shape::EllipseRing, 13, 11, Some((1, 2))),
    glyph("noteheadWhole", Shape::EllipseRing, 17, 13, Some((1, 1))),
    glyph("augmentationDot", Shape::FilledEllipse, 7, 7, None),
    glyph("barline", Shape::Rect, 5, 41, None),
    glyph("restWhole", Shape::Rect, 19, 7, None),
    glyph("accidentalSharp", Shape::Plus, 15, 21, None),
    glyph("noteheadX", Shape::Cross, 13, 13, Some((1, 4))),
    glyph("articAccent", Shape::Wedge, 25, 13, None),
    glyph("clefF", Shape::FilledEllipse, 31, 29, None),
    glyph("clefG", Shape::EllipseRing, 25, 61, None),
];

pub fn catalog_glyph(class: &str) -> Option<&'static Glyph> {
    CATALOG.iter().find(|g| g.class_name == class)
}

pub fn catalog_registry() -> Vec<String> {
    CATALOG.iter().map(|g| g.class_name.to_string()).collect()
}

/// Equal weight for every catalog class.
pub fn uniform_mix() -> BTreeMap<String, f64> {
    CATALOG.iter().map(|g| (g.class_name.to_string(), 1.0)).collect()
}

/// Power-law weights `1 / rank^exponent` over the catalog order.
pub fn zipf_mix(exponent: f64) -> BTreeMap<String, f64> {
    CATALOG
        .iter()
        .enumerate()
        .map(|(i, g)| (g.class_name.to_string(), 1.0 / ((i + 1) as f64).powf(exponent)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageSpec {
    pub width: u32,
    pub height: u32,
    pub num_staves: u32,
    pub symbols_per_staff: u32,
    /// Sampling weight per catalog class.
    pub glyph_mix: BTreeMap<String, f64>,
    /// Force class counts to differ by at most one.
    pub balanced: bool,
    /// Blank rows kept free at the top of the page.
    pub top_margin: u32,
    pub staff_spacing: u32,
}

impl Default for PageSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            num_staves: 4,
            symbols_per_staff: 8,
            glyph_mix: uniform_mix(),
            balanced: false,
            top_margin: 0,
            staff_spacing: 10,
        }
    }
}

struct Layout {
    band_height: u32,
    slot_width: u32,
}

impl PageSpec {
    /// Catalog glyphs with positive weight, in catalog order.
    fn active(&self) -> Result<Vec<(&'static Glyph, f64)>> {
        for (name, w) in &self.glyph_mix {
            if catalog_glyph(name).is_none() {
                return Err(Error::UnknownClass(name.clone()));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "weight of {name:?} must be finite and ≥ 0, got {w}"
                )));
            }
        }
        let active: Vec<_> = CATALOG
            .iter()
            .filter_map(|g| self.glyph_mix.get(g.class_name).filter(|w| **w > 0.0).map(|w| (g, *w)))
            .collect();
        if active.is_empty() {
            return Err(Error::InvalidArgument(
                "glyph mix needs at least one positive weight".into(),
            ));
        }
        Ok(active)
    }

    fn layout(&self, active: &[(&'static Glyph, f64)]) -> Result<Layout> {
        let max_w = active.iter().map(|g| g.0.width).max().unwrap_or(0);
        let max_h = active.iter().map(|g| g.0.height).max().unwrap_or(0);
        let staff_h = 4 * self.staff_spacing + 1;
        let band_height = max_h.max(staff_h) + MIN_GAP;
        let needed_h = self.top_margin + self.num_staves * band_height;
        if needed_h > self.height {
            return Err(Error::DoesNotFit(format!(
                "{} staves of {band_height} px below a {} px margin need {needed_h} px, page is {} px tall",
                self.num_staves, self.top_margin, self.height
            )));
        }
        let usable = self.width.saturating_sub(2 * SIDE_MARGIN);
        let slot_width = usable.checked_div(self.symbols_per_staff).unwrap_or(usable);
        if self.symbols_per_staff > 0 && slot_width < max_w + MIN_GAP {
            return Err(Error::DoesNotFit(format!(
                "{} symbols per staff leave {slot_width} px slots, glyphs need {} px",
                self.symbols_per_staff,
                max_w + MIN_GAP
            )));
        }
        Ok(Layout {
            band_height,
            slot_width,
        })
    }
}

fn draw_glyph(img: &mut GrayImage, g: &Glyph, x0: u32, y0: u32) {
    let (w, h) = (g.width as f64, g.height as f64);
    for dy in 0..g.height {
        for dx in 0..g.width {
            let u = (dx as f64 + 0.5 - w / 2.0) / (w / 2.0);
            let v = (dy as f64 + 0.5 - h / 2.0) / (h / 2.0);
            let r2 = u * u + v * v;
            let ink = match g.shape {
                Shape::FilledEllipse => r2 <= 1.0,
                Shape::EllipseRing => (0.5..=1.0).contains(&r2),
                Shape::Rect => true,
                Shape::Plus => u.abs() <= 0.25 || v.abs() <= 0.2,
                Shape::Cross => (u - v).abs() <= 0.35 || (u + v).abs() <= 0.35,
                Shape::Wedge => u.abs() <= (v + 1.0) / 2.0,
            };
            if ink {
                img.set((x0 + dx) as usize, (y0 + dy) as usize, INK);
            }
        }
    }
}

fn label_for(g: &Glyph, slot: u32, staff_mid: f64, center_y: f64, spacing: u32) -> Result<Label> {
    let onset = Rational::new(slot as i64, 4).expect("nonzero denominator");
    match g.duration {
        Some((n, d)) => {
            // half staff spaces above the middle line
            let rel = ((staff_mid - center_y) / (spacing as f64 / 2.0)).round() as i64;
            Label::note(
                g.class_name,
                onset,
                rel,
                Rational::new(n, d).expect("nonzero denominator"),
            )
        }
        None => Label::with_onset(g.class_name, onset),
    }
}

/// Renders one page and its exact annotations.
pub fn generate_page(spec: &PageSpec, id: &str, rng: &mut impl Rng) -> Result<(Page, GrayImage)> {
    let active = spec.active()?;
    let lay = spec.layout(&active)?;
    let (w, h) = (spec.width, spec.height);
    let mut img = GrayImage::filled(w as usize, h as usize, 255);
    let mut page = Page::new(id, w, h);

    let n = (spec.num_staves * spec.symbols_per_staff) as usize;
    let picks: Vec<&'static Glyph> = if spec.balanced {
        let c = active.len();
        let mut v: Vec<&'static Glyph> = (0..n).map(|i| active[i % c].0).collect();
        v.shuffle(rng);
        v
    } else {
        let dist = WeightedIndex::new(active.iter().map(|a| a.1))
            .map_err(|e| Error::InvalidArgument(format!("glyph weights: {e}")))?;
        (0..n).map(|_| active[dist.sample(rng)].0).collect()
    };

    let mut next = picks.into_iter();
    for s in 0..spec.num_staves {
        let band_top = spec.top_margin + s * lay.band_height;
        let staff_mid = band_top + lay.band_height / 2;
        for line in 0..5u32 {
            let y = staff_mid + line * spec.staff_spacing - 2 * spec.staff_spacing;
            for x in SIDE_MARGIN..w.saturating_sub(SIDE_MARGIN) {
                img.set(x as usize, y as usize, INK);
            }
        }
        for slot in 0..spec.symbols_per_staff {
            let g = next.next().expect("one glyph per slot");
            let slot_x = SIDE_MARGIN + slot * lay.slot_width;
            let slack_x = lay.slot_width - MIN_GAP - g.width;
            let x0 = slot_x + MIN_GAP / 2 + rng.random_range(0..=slack_x);
            let slack_y = lay.band_height - MIN_GAP - g.height;
            let y0 = band_top + MIN_GAP / 2 + rng.random_range(0..=slack_y);
            draw_glyph(&mut img, g, x0, y0);
            let bbox = BBox::new(x0 as f64, y0 as f64, (x0 + g.width) as f64, (y0 + g.height) as f64)?;
            let label = label_for(g, slot, staff_mid as f64 + 0.5, bbox.center().1, spec.staff_spacing)?;
            page.annotations.push(Annotation::new(label, bbox));
        }
    }
    Ok((page, img))
}

/// Generates `pages` pages named `page_000`, `page_001`, …; page `i` draws
/// from a generator seeded with `seed ^ i`. Image paths are set to
/// `<id>.pgm`.
pub fn generate_dataset(spec: &PageSpec, pages: usize, seed: u64) -> Result<(Dataset, Vec<GrayImage>)> {
    let mut out_pages = Vec::with_capacity(pages);
    let mut images = Vec::with_capacity(pages);
    for i in 0..pages {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
        let id = format!("page_{i:03}");
        let (mut p, img) = generate_page(spec, &id, &mut rng)?;
        p.image = Some(format!("{id}.pgm"));
        out_pages.push(p);
        images.push(img);
    }
    Ok((Dataset::new(catalog_registry(), out_pages)?, images))
}
