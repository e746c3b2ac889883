//! Marker extraction: connected components of the thresholded energy map.

use super::{Connectivity, PostConfig};

/// One marker: a maximal connected set of pixels with energy ≥ τ.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    /// `(row, col)` in raster order.
    pub pixels: Vec<(usize, usize)>,
    /// Energy-weighted centroid `(x, y)` in continuous coordinates, pixel
    /// centres at `+0.5`.
    pub centroid: (f64, f64),
    pub peak: f32,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller id stays root
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

const NONE: u32 = u32::MAX;

/// Labels the supra-threshold pixels with a two-pass union-find scan.
/// Components are ordered by their first pixel in raster order; those smaller
/// than `cfg.min_area` are dropped.
pub fn extract_markers(energy: &[f32], height: usize, width: usize, cfg: &PostConfig) -> Vec<Component> {
    assert_eq!(energy.len(), height * width, "energy raster size mismatch");
    let tau = cfg.energy_threshold;
    let on = |i: usize| energy[i] as f64 >= tau;
    let mut labels = vec![NONE; height * width];
    let mut sets = DisjointSet::new();

    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if !on(i) {
                continue;
            }
            let mut neighbours = [NONE; 4];
            if c > 0 {
                neighbours[0] = labels[i - 1];
            }
            if r > 0 {
                neighbours[1] = labels[i - width];
                if cfg.connectivity == Connectivity::Eight {
                    if c > 0 {
                        neighbours[2] = labels[i - width - 1];
                    }
                    if c + 1 < width {
                        neighbours[3] = labels[i - width + 1];
                    }
                }
            }
            let mut label = NONE;
            for &n in neighbours.iter().filter(|&&n| n != NONE) {
                if label == NONE {
                    label = n;
                } else {
                    sets.union(label, n);
                }
            }
            labels[i] = if label == NONE { sets.make() } else { label };
        }
    }

    // second pass: collect pixels per root; roots are first seen in raster order
    let mut slot_of_root: Vec<u32> = vec![NONE; sets.parent.len()];
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let l = labels[r * width + c];
            if l == NONE {
                continue;
            }
            let root = sets.find(l) as usize;
            if slot_of_root[root] == NONE {
                slot_of_root[root] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[slot_of_root[root] as usize].push((r, c));
        }
    }

    groups
        .into_iter()
        .filter(|g| g.len() >= cfg.min_area)
        .map(|pixels| {
            let (mut sx, mut sy, mut se) = (0f64, 0f64, 0f64);
            let mut peak = 0f32;
            for &(r, c) in &pixels {
                let e = energy[r * width + c];
                peak = peak.max(e);
                let e = e as f64;
                sx += (c as f64 + 0.5) * e;
                sy += (r as f64 + 0.5) * e;
                se += e;
            }
            Component {
                pixels,
                centroid: (sx / se, sy / se),
                peak,
            }
        })
        .collect()
}
