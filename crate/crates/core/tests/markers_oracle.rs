use omrkit_core::dwd::{extract_markers, Connectivity, PostConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

type Comp = BTreeSet<(usize, usize)>;

/// Brute-force labeling: breadth-first flood fill from every unvisited on
/// pixel.
fn flood_fill(on: &[bool], h: usize, w: usize, conn: Connectivity) -> Vec<Comp> {
    let offsets: &[(i64, i64)] = match conn {
        Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
    };
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        if !on[start] || seen[start] {
            continue;
        }
        let mut comp = Comp::new();
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            comp.insert((r, c));
            for &(dr, dc) in offsets {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if on[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn cfg(conn: Connectivity, min_area: usize, tau: f64) -> PostConfig {
    PostConfig {
        connectivity: conn,
        min_area,
        energy_threshold: tau,
        ..PostConfig::default()
    }
}

#[test]
fn union_find_matches_flood_fill_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (h, w) = (32, 32);
    for case in 0..1000 {
        let density = rng.random_range(0.2..0.8);
        let energy: Vec<f32> = (0..h * w)
            .map(|_| {
                if rng.random_bool(density) {
                    rng.random_range(0.2..=1.0)
                } else {
                    rng.random_range(0.0..0.19)
                }
            })
            .collect();
        let on: Vec<bool> = energy.iter().map(|&e| e as f64 >= 0.2).collect();
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let got: Vec<Comp> = extract_markers(&energy, h, w, &cfg(conn, 1, 0.2))
                .into_iter()
                .map(|c| c.pixels.into_iter().collect())
                .collect();
            let expected = flood_fill(&on, h, w, conn);
            // flood fill also discovers components in order of their first raster pixel
            assert_eq!(got, expected, "case {case}, {conn:?}");
        }
    }
}

#[test]
fn min_area_filters_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let energy: Vec<f32> = (0..24 * 24)
            .map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 })
            .collect();
        let on: Vec<bool> = energy.iter().map(|&e| e > 0.5).collect();
        let expected: Vec<Comp> = flood_fill(&on, 24, 24, Connectivity::Eight)
            .into_iter()
            .filter(|c| c.len() >= 4)
            .collect();
        let got: Vec<Comp> = extract_markers(&energy, 24, 24, &cfg(Connectivity::Eight, 4, 0.2))
            .into_iter()
            .map(|c| c.pixels.into_iter().collect())
            .collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn centroid_is_energy_weighted() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let energy: Vec<f32> = (0..16 * 16).map(|_| rng.random_range(0.0..1.0)).collect();
    for m in extract_markers(&energy, 16, 16, &cfg(Connectivity::Four, 1, 0.5)) {
        let se: f64 = m.pixels.iter().map(|&(r, c)| energy[r * 16 + c] as f64).sum();
        let sx: f64 = m
            .pixels
            .iter()
            .map(|&(r, c)| (c as f64 + 0.5) * energy[r * 16 + c] as f64)
            .sum();
        let sy: f64 = m
            .pixels
            .iter()
            .map(|&(r, c)| (r as f64 + 0.5) * energy[r * 16 + c] as f64)
            .sum();
        assert!((m.centroid.0 - sx / se).abs() < 1e-9);
        assert!((m.centroid.1 - sy / se).abs() < 1e-9);
        let peak = m.pixels.iter().map(|&(r, c)| energy[r * 16 + c]).fold(0f32, f32::max);
        assert_eq!(m.peak, peak);
    }
}

/// Separated single-peak bumps: raising τ can only shrink or remove markers.
#[test]
fn raising_tau_on_separated_bumps_never_adds_markers() {
    let (h, w) = (60, 60);
    let mut energy = vec![0f32; h * w];
    for &(cx, cy, s) in &[
        (10.5, 10.5, 3.0),
        (40.5, 15.5, 2.0),
        (25.5, 45.5, 4.0),
        (50.5, 50.5, 1.0),
    ] {
        for r in 0..h {
            for c in 0..w {
                let d2 = ((c as f64 + 0.5 - cx) / s).powi(2) + ((r as f64 + 0.5 - cy) / s).powi(2);
                energy[r * w + c] += (-d2 / 2.0).exp() as f32;
            }
        }
    }
    let mut prev = usize::MAX;
    for i in 1..20 {
        let tau = i as f64 * 0.05;
        let n = extract_markers(&energy, h, w, &cfg(Connectivity::Eight, 1, tau)).len();
        assert!(n <= prev, "τ={tau}: {n} > {prev}");
        prev = n;
    }
}

/// Two peaks joined by a saddle: a higher τ splits one marker into two, so
/// the count is not monotone in τ in general.
#[test]
fn saddle_splits_under_higher_tau() {
    let energy = [0.9f32, 0.5, 0.9];
    let low = extract_markers(&energy, 1, 3, &cfg(Connectivity::Four, 1, 0.4));
    let high = extract_markers(&energy, 1, 3, &cfg(Connectivity::Four, 1, 0.6));
    assert_eq!((low.len(), high.len()), (1, 2));
}
