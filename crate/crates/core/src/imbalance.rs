//! Class-frequency statistics and rare-class selection.

use std::collections::BTreeMap;

use crate::annotation::Dataset;
use crate::error::{Error, Result};

/// Default head coverage: classes outside the most frequent prefix holding
/// 85% of all symbols count as rare.
pub const DEFAULT_HEAD_COVERAGE: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassStats {
    counts: BTreeMap<String, u64>,
    total: u64,
    ranking: Vec<String>,
}

impl ClassStats {
    /// Builds statistics from explicit counts. Ranking is by descending count,
    /// ties broken by name.
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        let mut ranking: Vec<String> = counts.keys().cloned().collect();
        ranking.sort_by(|a, b| counts[b].cmp(&counts[a]).then_with(|| a.cmp(b)));
        Self { counts, total, ranking }
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn count(&self, class: &str) -> u64 {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn ranking(&self) -> &[String] {
        &self.ranking
    }

    fn nonempty(&self) -> Result<()> {
        if self.total == 0 {
            Err(Error::EmptyStats)
        } else {
            Ok(())
        }
    }

    /// Fraction of all symbols held by the `k` most frequent classes.
    pub fn coverage_topk(&self, k: usize) -> Result<f64> {
        self.nonempty()?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if k >= self.ranking.len() {
            return Ok(1.0);
        }
        let head: u64 = self.ranking[..k].iter().map(|c| self.counts[c]).sum();
        Ok(head as f64 / self.total as f64)
    }

    /// Cumulative coverage after each rank, ending at exactly 1.0.
    pub fn coverage_curve(&self) -> Result<Vec<f64>> {
        self.nonempty()?;
        let mut acc = 0u64;
        Ok(self
            .ranking
            .iter()
            .map(|c| {
                acc += self.counts[c];
                acc as f64 / self.total as f64
            })
            .collect())
    }

    /// Whether the most frequent class holds more symbols than all other
    /// classes combined.
    pub fn majority_dominates(&self) -> Result<bool> {
        self.nonempty()?;
        let top = self.counts[&self.ranking[0]];
        Ok(top > self.total - top)
    }

    /// Classes outside the shortest ranking prefix whose cumulative coverage
    /// reaches `head_coverage`, in ranking order. Zero-count registry classes
    /// are always rare.
    pub fn select_rare(&self, head_coverage: f64) -> Result<Vec<String>> {
        self.nonempty()?;
        if !(head_coverage > 0.0 && head_coverage < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "head coverage must lie in (0, 1), got {head_coverage}"
            )));
        }
        let mut acc = 0u64;
        let mut head_len = self.ranking.len();
        for (i, c) in self.ranking.iter().enumerate() {
            acc += self.counts[c];
            if acc as f64 / self.total as f64 >= head_coverage {
                head_len = i + 1;
                break;
            }
        }
        Ok(self.ranking[head_len..].to_vec())
    }

    /// [`select_rare`](Self::select_rare) truncated to at most `max_rare`
    /// classes, keeping the most frequent rare classes.
    pub fn select_rare_capped(&self, head_coverage: f64, max_rare: Option<usize>) -> Result<Vec<String>> {
        let mut rare = self.select_rare(head_coverage)?;
        if let Some(cap) = max_rare {
            rare.truncate(cap);
        }
        Ok(rare)
    }
}

/// Counts annotations per class across all pages. Every registry class gets
/// an entry, zero if unused.
pub fn class_histogram(d: &Dataset) -> ClassStats {
    let mut counts: BTreeMap<String, u64> = d.class_registry.iter().map(|c| (c.clone(), 0)).collect();
    for a in d.pages.iter().flat_map(|p| &p.annotations) {
        *counts.entry(a.class_name().to_string()).or_insert(0) += 1;
    }
    ClassStats::from_counts(counts)
}
