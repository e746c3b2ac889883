use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use omrkit_core::align::{estimate_transform, transfer_annotations, RigidTransform, SearchRange};
use omrkit_core::annotation::{load_dataset, save_dataset, Dataset};
use omrkit_core::augment::{augment_dataset, build_crop_bank, coverage_warning, load_page_image, AugmentConfig};
use omrkit_core::dwd::{
    build_cached_boxes, detect as run_detect, load_detections, save_detections, size_bias_report_pages, BoxMode,
    CachedBoxTable, Connectivity, MapStack, PageDetections, PostConfig,
};
use omrkit_core::eval::{evaluate, EvalImage};
use omrkit_core::fsutil;
use omrkit_core::image::GrayImage;
use omrkit_core::imbalance::class_histogram;
use omrkit_core::synth::{
    degrade_image, generate_dataset, render_maps, uniform_mix, zipf_mix, DegradeParams, NoiseSpec, PageSpec,
};
use omrkit_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{AlignArgs, AugmentArgs, BiasArgs, CachedArgs, DetectArgs, EvalArgs, Failure, StatsArgs, SynthArgs};

type Outcome = Result<String, Failure>;

/// NCC below this suggests the scan needs more than a rigid correction.
const LOW_NCC: f64 = 0.5;

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|source| {
        Failure::from(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn synth(a: SynthArgs) -> Outcome {
    let spec = PageSpec {
        width: a.width,
        height: a.height,
        num_staves: a.staves,
        symbols_per_staff: a.symbols_per_staff,
        glyph_mix: a.zipf.map_or_else(uniform_mix, zipf_mix),
        balanced: a.balanced,
        top_margin: a.top_margin,
        ..PageSpec::default()
    };
    let noise = NoiseSpec {
        energy_noise_sigma: a.energy_noise,
        class_confusion: a.class_confusion,
        box_smoothing_radius: a.box_smoothing,
        seed: a.seed,
    };
    noise.validate()?;
    let degrade = DegradeParams {
        contrast: a.scan_contrast,
        blur_sigma: a.scan_blur,
        transform: RigidTransform::new(a.scan_theta, a.scan_tx, a.scan_ty),
        noise_sigma: a.scan_noise,
    };
    degrade.validate()?;

    let (d, images) = generate_dataset(&spec, a.pages, a.seed)?;
    create_dir(&a.out)?;
    for (i, (p, img)) in d.pages.iter().zip(&images).enumerate() {
        img.save_pgm(&a.out.join(format!("{}.pgm", p.id)))?;
        if a.emit_maps {
            let page_noise = NoiseSpec {
                seed: a.seed ^ i as u64,
                ..noise
            };
            render_maps(p, &page_noise, &d.class_registry)?.save_dwm(&a.out.join(format!("{}.dwm", p.id)))?;
        }
        if a.emit_scans {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ i as u64);
            degrade_image(img, &degrade, &mut rng)?.save_pgm(&a.out.join(format!("{}.scan.pgm", p.id)))?;
        }
    }
    let doc = a.out.join("dataset.json");
    save_dataset(&d, &doc)?;
    Ok(format!(
        "wrote {} pages ({} symbols, {} classes) to {}\n",
        d.pages.len(),
        d.num_annotations(),
        d.class_registry.len(),
        a.out.display()
    ))
}

pub fn stats(a: StatsArgs) -> Outcome {
    let d = load_dataset(&a.dataset)?;
    let s = class_histogram(&d);
    let mut out = String::new();
    writeln!(out, "pages: {}", d.pages.len()).unwrap();
    writeln!(out, "annotations: {}", s.total()).unwrap();
    writeln!(out, "classes: {}", s.ranking().len()).unwrap();
    if s.total() == 0 {
        writeln!(out, "no annotations; coverage and rare set are undefined").unwrap();
        return Ok(out);
    }
    let curve = s.coverage_curve()?;
    writeln!(
        out,
        "{:>4}  {:<28} {:>8} {:>7} {:>10}",
        "rank", "class", "count", "share", "cumulative"
    )
    .unwrap();
    for (i, (c, cum)) in s.ranking().iter().zip(&curve).enumerate() {
        let n = s.count(c);
        writeln!(
            out,
            "{:>4}  {:<28} {:>8} {:>7.4} {:>10.4}",
            i + 1,
            c,
            n,
            n as f64 / s.total() as f64,
            cum
        )
        .unwrap();
    }
    writeln!(out, "top-{} coverage: {:.4}", a.top, s.coverage_topk(a.top.max(1))?).unwrap();
    writeln!(
        out,
        "most frequent class outnumbers all others combined: {}",
        if s.majority_dominates()? { "yes" } else { "no" }
    )
    .unwrap();
    let rare = s.select_rare_capped(a.head_coverage, a.max_rare)?;
    writeln!(out, "rare classes at head coverage {}: {}", a.head_coverage, rare.len()).unwrap();
    for c in &rare {
        writeln!(out, "  {c} ({})", s.count(c)).unwrap();
    }
    Ok(out)
}

pub fn augment(a: AugmentArgs) -> Outcome {
    let cfg = AugmentConfig {
        num_crops: a.num_crops,
        crop_w: a.crop_w,
        crop_h: a.crop_h,
        margin_rows: a.margin_rows,
        gap: a.gap,
        seed: a.seed,
    };
    cfg.validate()?;
    let d = load_dataset(&a.dataset)?;
    let rare = class_histogram(&d).select_rare_capped(a.head_coverage, a.max_rare)?;
    if let Some(w) = coverage_warning(rare.len() as u64, cfg.num_crops as u64) {
        eprintln!("omrkit: {w}");
    }
    let base = base_dir(&a.dataset);
    let bank = build_crop_bank(&d, &rare, &cfg, |p| load_page_image(&base, p))?;
    let images = d
        .pages
        .iter()
        .map(|p| load_page_image(&base, p))
        .collect::<omrkit_core::Result<Vec<GrayImage>>>()?;
    let (out_d, out_images) = augment_dataset(&d, &images, &bank, &cfg)?;

    create_dir(&a.out)?;
    for (p, img) in out_d.pages.iter().zip(&out_images) {
        img.save_pgm(&a.out.join(format!("{}.pgm", p.id)))?;
    }
    save_dataset(&out_d, &a.out.join("dataset.json"))?;

    let mut out = String::new();
    writeln!(out, "rare classes: {}", rare.len()).unwrap();
    for (c, crops) in bank.by_class() {
        writeln!(out, "  {c}: {} crops", crops.len()).unwrap();
    }
    if !bank.missing().is_empty() {
        writeln!(out, "rare classes without instances: {}", bank.missing().join(", ")).unwrap();
    }
    writeln!(
        out,
        "augmented {} pages with {} crops each ({}x{} px); {} annotations -> {}",
        out_d.pages.len(),
        cfg.num_crops,
        cfg.crop_w,
        cfg.crop_h,
        d.num_annotations(),
        out_d.num_annotations()
    )
    .unwrap();
    Ok(out)
}

pub fn cached(a: CachedArgs) -> Outcome {
    let d = load_dataset(&a.dataset)?;
    let table = build_cached_boxes(&d);
    fsutil::write_atomic(&a.out, table.to_json().as_bytes())?;
    let mut out = format!("{:<28} {:>9} {:>9}\n", "class", "width", "height");
    for (c, b) in table.boxes() {
        writeln!(out, "{c:<28} {:>9.3} {:>9.3}", b.width, b.height).unwrap();
    }
    if !table.empty_classes().is_empty() {
        writeln!(out, "no cached box: {}", table.empty_classes().join(", ")).unwrap();
    }
    Ok(out)
}

pub fn detect(a: DetectArgs) -> Outcome {
    let cfg = PostConfig {
        energy_threshold: a.tau,
        connectivity: Connectivity::try_from(a.connectivity)?,
        min_area: a.min_area,
        box_mode: a.mode.parse::<BoxMode>()?,
        hybrid_tolerance: a.delta,
    };
    cfg.validate()?;
    if cfg.box_mode != BoxMode::Regressed && a.cache.is_none() {
        return Err(Failure::usage(format!("--mode {} needs --cache", cfg.box_mode)));
    }
    let registry = load_dataset(&a.registry)?.class_registry;
    let table = match &a.cache {
        Some(path) => Some(CachedBoxTable::from_json(&String::from_utf8_lossy(&fsutil::read(
            path,
        )?))?),
        None => None,
    };
    let mut pages = Vec::with_capacity(a.maps.len());
    let mut out = String::new();
    for path in &a.maps {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Failure::usage(format!("cannot derive a page id from {}", path.display())))?
            .to_string();
        let maps = MapStack::load_dwm(path)?;
        let detections = run_detect(&maps, &registry, &cfg, table.as_ref())?;
        writeln!(out, "{id}: {} detections", detections.len()).unwrap();
        pages.push(PageDetections { id, detections });
    }
    save_detections(&pages, &a.out)?;
    Ok(out)
}

/// Pairs every ground-truth page with its detections; pages without an entry
/// have none. Detections for unknown pages are an error.
fn paired<'a>(gt: &'a Dataset, dets: &'a [PageDetections]) -> Result<Vec<EvalImage<'a>>, Failure> {
    for p in dets {
        if gt.page(&p.id).is_none() {
            return Err(Error::Validation(format!("detections for unknown page {:?}", p.id)).into());
        }
    }
    Ok(gt
        .pages
        .iter()
        .map(|p| EvalImage {
            detections: dets
                .iter()
                .find(|d| d.id == p.id)
                .map_or(&[][..], |d| d.detections.as_slice()),
            ground_truth: &p.annotations,
        })
        .collect())
}

pub fn eval(a: EvalArgs) -> Outcome {
    if !(a.iou > 0.0 && a.iou <= 1.0) {
        return Err(Failure::usage(format!("--iou must lie in (0, 1], got {}", a.iou)));
    }
    let gt = load_dataset(&a.gt)?;
    let dets = load_detections(&a.dets)?;
    let result = evaluate(&paired(&gt, &dets)?, a.iou);
    if let Some(path) = &a.out {
        fsutil::write_atomic(path, to_json(&result).as_bytes())?;
    }
    Ok(result.to_table())
}

pub fn align(a: AlignArgs) -> Outcome {
    let reference = GrayImage::load_pgm(&a.reference)?;
    let scan = GrayImage::load_pgm(&a.scan)?;
    let range = SearchRange {
        max_theta: a.max_theta,
        max_shift: a.max_shift,
    };
    let target = match (&a.annotations, &a.page, &a.out) {
        (Some(ds), Some(page), Some(out)) => {
            let d = load_dataset(ds)?;
            if d.page(page).is_none() {
                return Err(Error::Validation(format!("page {page:?} not found in {}", ds.display())).into());
            }
            Some((d, page.clone(), out.clone()))
        }
        _ => None,
    };
    let found = estimate_transform(&reference, &scan, range)?;
    let t = found.transform;
    if found.ncc < LOW_NCC {
        eprintln!(
            "omrkit: warning: best NCC is {:.4}; the scan may need more than a rotation and shift",
            found.ncc
        );
    }
    if let Some((mut d, page, out)) = target {
        let idx = d.pages.iter().position(|p| p.id == page).expect("checked above");
        d.pages[idx] = transfer_annotations(&d.pages[idx], &t);
        save_dataset(&d, &out)?;
    }
    Ok(format!(
        "theta={:.4} tx={:.4} ty={:.4} ncc={:.6}\n",
        t.theta + 0.0,
        t.tx + 0.0,
        t.ty + 0.0,
        found.ncc
    ))
}

pub fn bias(a: BiasArgs) -> Outcome {
    if a.bins == 0 {
        return Err(Failure::usage("--bins must be positive"));
    }
    let gt = load_dataset(&a.gt)?;
    let dets = load_detections(&a.dets)?;
    let report = size_bias_report_pages(&paired(&gt, &dets)?, a.bins)?;
    if let Some(path) = &a.out {
        fsutil::write_atomic(path, to_json(&report).as_bytes())?;
    }
    Ok(report.to_table())
}
