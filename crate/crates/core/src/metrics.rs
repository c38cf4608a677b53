//! Agreement between simulated found-location categories and reference data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gis::LandCoverCategory;

/// Value substituted for empty bins before renormalizing.
pub const SMOOTHING_EPS: f64 = 1e-9;

/// Counts per category. Categories absent from the map are not part of the
/// histogram's domain (as opposed to present with count 0).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryHistogram {
    pub counts: BTreeMap<LandCoverCategory, u64>,
}

impl CategoryHistogram {
    /// All five categories at zero.
    pub fn empty() -> Self {
        Self {
            counts: LandCoverCategory::ALL.iter().map(|&c| (c, 0)).collect(),
        }
    }

    pub fn from_counts(pairs: &[(LandCoverCategory, u64)]) -> Self {
        let mut h = Self::default();
        for &(c, n) in pairs {
            *h.counts.entry(c).or_insert(0) += n;
        }
        h
    }

    pub fn from_categories(items: impl IntoIterator<Item = LandCoverCategory>) -> Self {
        let mut h = Self::empty();
        for c in items {
            h.add(c);
        }
        h
    }

    /// Solo-hiker found locations from the reference incident data, with
    /// travel aid and linear feature counted as road.
    pub fn hiker_reference() -> Self {
        Self::from_counts(&[
            (LandCoverCategory::OpenGround, 53),
            (LandCoverCategory::Road, 42),
            (LandCoverCategory::Building, 30),
            (LandCoverCategory::Trees, 4),
            (LandCoverCategory::Water, 1),
        ])
    }

    pub fn uniform() -> Self {
        Self::from_counts(&LandCoverCategory::ALL.map(|c| (c, 1)))
    }

    pub fn add(&mut self, c: LandCoverCategory) {
        *self.counts.entry(c).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, c: LandCoverCategory) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    /// Share of `c` in percent.
    pub fn percent(&self, c: LandCoverCategory) -> f64 {
        100.0 * self.count(c) as f64 / self.total() as f64
    }

    pub fn same_domain(&self, other: &Self) -> bool {
        self.counts.keys().eq(other.counts.keys())
    }

    /// Parses `category,count` lines; a header line and `#` comments are skipped.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut h = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("category")) {
                continue;
            }
            let (name, count) = line
                .split_once(',')
                .ok_or_else(|| Error::CategoryMismatch(format!("line {}: expected `category,count`", n + 1)))?;
            let cat: LandCoverCategory = name.parse()?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::CategoryMismatch(format!("line {}: bad count `{}`", n + 1, count.trim())))?;
            if h.counts.insert(cat, count).is_some() {
                return Err(Error::CategoryMismatch(format!("category `{cat}` listed twice")));
            }
        }
        Ok(h)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,count\n");
        for (c, n) in &self.counts {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::parse_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Normalizes, replaces zero entries by [`SMOOTHING_EPS`] and renormalizes.
pub fn smoothed_distribution(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) || weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::EmptyInput("histogram needs non-negative weights with positive total".into()));
    }
    let p: Vec<f64> = weights.iter().map(|&w| if w == 0.0 { SMOOTHING_EPS } else { w / total }).collect();
    let s: f64 = p.iter().sum();
    Ok(p.into_iter().map(|v| v / s).collect())
}

/// Symmetric Kullback-Leibler divergence `Σ p log(p/q) + Σ q log(q/p)` of two
/// weight vectors over the same bins.
pub fn skl_weights(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::CategoryMismatch(format!("{} bins vs {} bins", p.len(), q.len())));
    }
    let p = smoothed_distribution(p)?;
    let q = smoothed_distribution(q)?;
    Ok(p.iter().zip(&q).map(|(&a, &b)| (a - b) * (a / b).ln()).sum::<f64>().max(0.0))
}

pub fn skl(p: &CategoryHistogram, q: &CategoryHistogram) -> Result<f64> {
    if !p.same_domain(q) {
        return Err(Error::CategoryMismatch(format!(
            "histograms cover different categories: [{}] vs [{}]",
            names(p),
            names(q)
        )));
    }
    let pw: Vec<f64> = p.counts.values().map(|&n| n as f64).collect();
    let qw: Vec<f64> = q.counts.values().map(|&n| n as f64).collect();
    skl_weights(&pw, &qw)
}

fn names(h: &CategoryHistogram) -> String {
    h.counts.keys().map(|c| c.name()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub category: LandCoverCategory,
    pub found_percent: f64,
    pub reference_percent: f64,
    /// `found − reference`, percentage points.
    pub difference_points: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub found_total: u64,
    pub reference_total: u64,
    pub categories: Vec<CategoryComparison>,
    pub skl: f64,
    /// SKL between a uniform distribution over the categories and the reference.
    pub uniform_baseline_skl: f64,
}

pub fn compare_to_reference(found: &CategoryHistogram, reference: &CategoryHistogram) -> Result<ComparisonReport> {
    let skl_value = skl(found, reference)?;
    let uniform = CategoryHistogram::from_counts(&reference.counts.keys().map(|&c| (c, 1)).collect::<Vec<_>>());
    let categories = reference
        .counts
        .keys()
        .map(|&c| {
            let f = found.percent(c);
            let r = reference.percent(c);
            CategoryComparison {
                category: c,
                found_percent: f,
                reference_percent: r,
                difference_points: f - r,
            }
        })
        .collect();
    Ok(ComparisonReport {
        found_total: found.total(),
        reference_total: reference.total(),
        categories,
        skl: skl_value,
        uniform_baseline_skl: skl(&uniform, reference)?,
    })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,found_percent,reference_percent,difference_points\n");
        for c in &self.categories {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                c.category, c.found_percent, c.reference_percent, c.difference_points
            );
        }
        let _ = writeln!(s, "skl,{},,", self.skl);
        let _ = writeln!(s, "uniform_baseline_skl,{},,", self.uniform_baseline_skl);
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} found locations against {} reference cases\n",
            self.found_total, self.reference_total
        );
        for c in &self.categories {
            let _ = writeln!(
                s,
                "  {:<12} found {:6.2}%  reference {:6.2}%  diff {:+6.2} pts",
                c.category.name(),
                c.found_percent,
                c.reference_percent,
                c.difference_points
            );
        }
        let _ = writeln!(s, "SKL {:.6} (uniform baseline {:.6})", self.skl, self.uniform_baseline_skl);
        s
    }
}
