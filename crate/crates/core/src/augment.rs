//! Rare-symbol margin augmentation.
//!
//! Instances of rare classes are cut out of their pages as fixed-size crops.
//! Augmenting a page pastes randomly drawn crops into a band at the top of the
//! page and adds one annotation per pasted symbol.

use std::collections::BTreeMap;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotation::{Annotation, BBox, Dataset, Label, Page};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Expected wait above which the CLI warns about slow rare-class coverage.
pub const WAIT_TARGET: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub class_name: String,
    pub pixels: GrayImage,
    /// `(page id, annotation index)` of the cropped instance.
    pub source: (String, usize),
    /// The symbol's box in crop coordinates, clipped to the crop.
    pub inner_bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropBank {
    by_class: BTreeMap<String, Vec<Crop>>,
    rare_set: Vec<String>,
    missing: Vec<String>,
}

impl CropBank {
    pub fn by_class(&self) -> &BTreeMap<String, Vec<Crop>> {
        &self.by_class
    }

    pub fn rare_set(&self) -> &[String] {
        &self.rare_set
    }

    /// Rare classes without a single instance in the dataset.
    pub fn missing(&self) -> &[String] {
        &self.missing
    }

    pub fn num_crops(&self) -> usize {
        self.by_class.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    pub num_crops: usize,
    pub crop_w: usize,
    pub crop_h: usize,
    /// Crop rows available at the top of each page.
    pub margin_rows: usize,
    pub gap: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            num_crops: 12,
            crop_w: 130,
            crop_h: 80,
            margin_rows: 1,
            gap: 4,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_crops == 0 || self.crop_w == 0 || self.crop_h == 0 || self.margin_rows == 0 {
            return Err(Error::InvalidArgument(
                "num_crops, crop size and margin_rows must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Top-left corners of `n` crops laid out row-major on a page of the given
    /// width, or `DoesNotFit`.
    pub fn layout(&self, n: usize, page_width: usize, page_height: usize) -> Result<Vec<(usize, usize)>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let per_row = (page_width + self.gap) / (self.crop_w + self.gap);
        if per_row == 0 {
            return Err(Error::DoesNotFit(format!(
                "page width {page_width} is narrower than one crop ({})",
                self.crop_w
            )));
        }
        let rows = n.div_ceil(per_row);
        if rows > self.margin_rows {
            return Err(Error::DoesNotFit(format!(
                "{n} crops need {rows} rows of {per_row}, only {} allowed",
                self.margin_rows
            )));
        }
        if rows * self.crop_h > page_height {
            return Err(Error::DoesNotFit(format!(
                "margin band of {} px exceeds page height {page_height}",
                rows * self.crop_h
            )));
        }
        Ok((0..n)
            .map(|i| ((i % per_row) * (self.crop_w + self.gap), (i / per_row) * self.crop_h))
            .collect())
    }
}

/// Cuts a `crop_w`×`crop_h` window centred on `bbox`; off-page pixels are
/// white.
pub fn extract_crop(image: &GrayImage, bbox: &BBox, crop_w: usize, crop_h: usize) -> (GrayImage, BBox) {
    let (cx, cy) = bbox.center();
    let x0 = (cx - crop_w as f64 / 2.0 + 0.5).floor();
    let y0 = (cy - crop_h as f64 / 2.0 + 0.5).floor();
    let pixels = image.window(x0 as i64, y0 as i64, crop_w, crop_h);
    let inner = bbox.translate(-x0, -y0).clip(crop_w as f64, crop_h as f64);
    (pixels, inner)
}

/// Collects a crop of every instance of each class in `rare`. `load_image` is
/// called once per page that holds at least one rare instance.
pub fn build_crop_bank(
    d: &Dataset,
    rare: &[String],
    cfg: &AugmentConfig,
    mut load_image: impl FnMut(&Page) -> Result<GrayImage>,
) -> Result<CropBank> {
    cfg.validate()?;
    let mut by_class: BTreeMap<String, Vec<Crop>> = BTreeMap::new();
    for page in &d.pages {
        let hits: Vec<usize> = page
            .annotations
            .iter()
            .enumerate()
            .filter(|(_, a)| rare.iter().any(|r| r == a.class_name()))
            .map(|(i, _)| i)
            .collect();
        if hits.is_empty() {
            continue;
        }
        let image = load_image(page)?;
        check_image_size(page, &image)?;
        for i in hits {
            let a = &page.annotations[i];
            let (pixels, inner_bbox) = extract_crop(&image, &a.bbox, cfg.crop_w, cfg.crop_h);
            by_class.entry(a.class_name().to_string()).or_default().push(Crop {
                class_name: a.class_name().to_string(),
                pixels,
                source: (page.id.clone(), i),
                inner_bbox,
            });
        }
    }
    if by_class.is_empty() {
        return Err(Error::EmptyBank);
    }
    let missing = rare.iter().filter(|r| !by_class.contains_key(*r)).cloned().collect();
    Ok(CropBank {
        by_class,
        rare_set: rare.to_vec(),
        missing,
    })
}

/// Draws `k` crops: a class uniformly from the bank, then an instance
/// uniformly within it, with replacement.
pub fn sample_crops<'b>(bank: &'b CropBank, k: usize, rng: &mut impl Rng) -> Result<Vec<&'b Crop>> {
    let classes: Vec<&Vec<Crop>> = bank.by_class.values().collect();
    if classes.is_empty() {
        return Err(Error::EmptyBank);
    }
    Ok((0..k)
        .map(|_| {
            let class = classes[rng.random_range(0..classes.len())];
            &class[rng.random_range(0..class.len())]
        })
        .collect())
}

fn check_image_size(page: &Page, image: &GrayImage) -> Result<()> {
    if image.width() != page.width as usize || image.height() != page.height as usize {
        return Err(Error::Validation(format!(
            "page {:?} is {}x{} but its image is {}x{}",
            page.id,
            page.width,
            page.height,
            image.width(),
            image.height()
        )));
    }
    Ok(())
}

/// Pastes `crops` into the top margin band of `page`.
///
/// The band must be free of existing annotations. Each crop adds one
/// annotation with a bare label of the crop's class; existing annotations are
/// kept in order in front of the new ones.
pub fn augment_page(page: &Page, image: &GrayImage, crops: &[&Crop], cfg: &AugmentConfig) -> Result<(Page, GrayImage)> {
    check_image_size(page, image)?;
    let corners = cfg.layout(crops.len(), image.width(), image.height())?;
    let mut out = page.clone();
    let mut img = image.clone();
    if let Some(&(_, last_y)) = corners.last() {
        let band = (last_y + cfg.crop_h) as f64;
        if let Some(a) = page.annotations.iter().find(|a| a.bbox.y_min() < band) {
            return Err(Error::DoesNotFit(format!(
                "annotation {} at y={} lies in the {band} px margin band of page {:?}",
                a.label,
                a.bbox.y_min(),
                page.id
            )));
        }
    }
    for (crop, &(x, y)) in crops.iter().zip(&corners) {
        if crop.pixels.width() != cfg.crop_w || crop.pixels.height() != cfg.crop_h {
            return Err(Error::InvalidArgument(format!(
                "crop is {}x{}, expected {}x{}",
                crop.pixels.width(),
                crop.pixels.height(),
                cfg.crop_w,
                cfg.crop_h
            )));
        }
        img.paste(&crop.pixels, x as i64, y as i64);
        let bbox = crop.inner_bbox.translate(x as f64, y as f64).quantized();
        out.annotations
            .push(Annotation::new(Label::bare(&crop.class_name)?, bbox));
    }
    Ok((out, img))
}

/// Augments every page, drawing `cfg.num_crops` crops per page from a
/// generator seeded with `cfg.seed ^ index`. Augmented images are referenced
/// as `<id>.pgm`.
pub fn augment_dataset(
    d: &Dataset,
    images: &[GrayImage],
    bank: &CropBank,
    cfg: &AugmentConfig,
) -> Result<(Dataset, Vec<GrayImage>)> {
    cfg.validate()?;
    if images.len() != d.pages.len() {
        return Err(Error::InvalidArgument(format!(
            "{} images for {} pages",
            images.len(),
            d.pages.len()
        )));
    }
    let results: Vec<(Page, GrayImage)> = d
        .pages
        .par_iter()
        .zip(images)
        .enumerate()
        .map(|(i, (page, image))| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ i as u64);
            let crops = sample_crops(bank, cfg.num_crops, &mut rng)?;
            let (mut p, img) = augment_page(page, image, &crops, cfg)?;
            p.image = Some(format!("{}.pgm", p.id));
            Ok((p, img))
        })
        .collect::<Result<_>>()?;
    let (pages, images) = results.into_iter().unzip();
    Ok((Dataset::new(d.class_registry.clone(), pages)?, images))
}

/// Loads the image of `page`, resolving relative paths against `base`.
pub fn load_page_image(base: &Path, page: &Page) -> Result<GrayImage> {
    let rel = page
        .image
        .as_deref()
        .ok_or_else(|| Error::MissingImage(page.id.clone()))?;
    let path = base.join(rel);
    if !path.is_file() {
        return Err(Error::MissingImage(format!("{} ({})", page.id, path.display())));
    }
    GrayImage::load_pgm(&path)
}

/// Expected number of augmented pages until one fixed class out of
/// `num_rare` shows up, when each page receives `k` uniform class draws.
pub fn expected_wait(num_rare: u64, k: u64) -> f64 {
    assert!(num_rare >= 1 && k >= 1, "expected_wait needs R ≥ 1 and k ≥ 1");
    let miss = 1.0 - 1.0 / num_rare as f64;
    1.0 / (1.0 - miss.powf(k as f64))
}

/// Largest rare-set size whose expected wait stays within `target`.
pub fn max_rare_within(k: u64, target: f64) -> u64 {
    let mut r = 1;
    while expected_wait(r + 1, k) <= target {
        r += 1;
    }
    r
}

/// Warning text when `num_rare` classes with `k` crops per page exceed the
/// wait target.
pub fn coverage_warning(num_rare: u64, k: u64) -> Option<String> {
    if num_rare == 0 || k == 0 {
        return None;
    }
    let wait = expected_wait(num_rare, k);
    (wait > WAIT_TARGET).then(|| {
        format!(
            "warning: {num_rare} rare classes with {k} crops per page give an expected wait of \
             {wait:.2} pages per class (> {WAIT_TARGET}); at most {} classes stay within it",
            max_rare_within(k, WAIT_TARGET)
        )
    })
}
