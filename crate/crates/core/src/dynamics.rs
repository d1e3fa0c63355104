//! Rolling-window portfolios: per-window specialization, HHI concentration
//! over communities, Jaccard stability between consecutive windows, and
//! category-level aggregates.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::CommunityAssignment;
use crate::corpus::{build_count_matrix, Category, DisciplineTaxonomy, Level, MentionRecord};
use crate::error::{Error, Result};
use crate::io;
use crate::specialization::{rca, specialize, Comparison, SpecializationSet};

/// Inclusive year interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RollingWindow {
    pub start_year: i32,
    pub end_year: i32,
}

impl RollingWindow {
    pub fn len(&self) -> i32 {
        self.end_year - self.start_year + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start_year..=self.end_year).contains(&year)
    }
}

/// Windows of `length` years starting at `first`, advancing by `step`, that
/// fit inside `first..=last`.
pub fn rolling_windows(first: i32, last: i32, length: i32, step: i32) -> Result<Vec<RollingWindow>> {
    if length < 1 || step < 1 {
        return Err(Error::InvalidArgument(format!(
            "window length and step must be positive (got {length}, {step})"
        )));
    }
    let mut out = Vec::new();
    let mut start = first;
    while start + length - 1 <= last {
        out.push(RollingWindow {
            start_year: start,
            end_year: start + length - 1,
        });
        start += step;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpecialization {
    pub window: RollingWindow,
    pub spec: SpecializationSet,
    pub papers: usize,
    /// True when the window holds no usable papers.
    pub empty: bool,
}

/// Strict RCA > 1 specialization from the papers inside `window`, over the
/// fixed entity universe `entities`. Marginals use only in-window counts.
pub fn windowed_specialization(
    records: &[MentionRecord],
    window: RollingWindow,
    taxonomy: &DisciplineTaxonomy,
    level: Level,
    entities: &[String],
) -> Result<WindowSpecialization> {
    let inside: Vec<MentionRecord> = records
        .iter()
        .filter(|r| window.contains(r.year))
        .cloned()
        .collect();
    let (m, diag) = build_count_matrix(&inside, taxonomy, level);
    let m = m.with_columns(entities);
    let empty_spec = || SpecializationSet {
        threshold: 1.0,
        comparison: Comparison::Strict,
        members: BTreeMap::new(),
    };
    if m.total() == 0 {
        return Ok(WindowSpecialization {
            window,
            spec: empty_spec(),
            papers: diag.papers,
            empty: true,
        });
    }
    let spec = specialize(&rca(&m)?, 1.0, Comparison::Strict)?;
    Ok(WindowSpecialization {
        window,
        spec,
        papers: diag.papers,
        empty: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HhiResult {
    /// `None` when no specialized tool is assigned to a community.
    pub hhi: Option<f64>,
    pub community_counts: Vec<u64>,
    /// Specialized tools absent from the community assignment.
    pub unassigned: usize,
}

/// HHI from per-community tool counts: sum of squared shares.
pub fn hhi_from_counts(counts: &[u64]) -> Option<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let total = total as f64;
    Some(counts.iter().map(|&n| (n as f64 / total).powi(2)).sum())
}

/// Concentration of a division's specialized tools across communities.
pub fn hhi(spec: &SpecializationSet, assignment: &CommunityAssignment, division: &str) -> HhiResult {
    let mut counts = vec![0u64; assignment.num_blocks()];
    let mut unassigned = 0;
    if let Some(members) = spec.members_of(division) {
        for tool in members {
            match assignment.label_of(tool) {
                Some(c) => counts[c] += 1,
                None => unassigned += 1,
            }
        }
    }
    HhiResult {
        hhi: hhi_from_counts(&counts),
        community_counts: counts,
        unassigned,
    }
}

/// Intersection over union; `None` when both sets are empty.
pub fn jaccard_stability<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Option<f64> {
    let union = a.union(b).count();
    if union == 0 {
        return None;
    }
    Some(a.intersection(b).count() as f64 / union as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    pub division: String,
    pub windows: Vec<RollingWindow>,
    pub hhi: Vec<Option<f64>>,
    /// Between window t and t+1; missing unless both sets are nonempty.
    pub jaccard: Vec<Option<f64>>,
    pub specialized: Vec<BTreeSet<String>>,
    pub unassigned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Portfolios {
    pub windows: Vec<WindowSpecialization>,
    pub series: Vec<PortfolioSeries>,
}

/// Computes window specializations (in parallel) and the per-division HHI
/// and Jaccard series. Divisions are those of the taxonomy at `level` that
/// appear in any window.
pub fn portfolio_series(
    records: &[MentionRecord],
    windows: &[RollingWindow],
    taxonomy: &DisciplineTaxonomy,
    level: Level,
    entities: &[String],
    assignment: &CommunityAssignment,
) -> Result<Portfolios> {
    let specs: Vec<WindowSpecialization> = windows
        .par_iter()
        .map(|&w| windowed_specialization(records, w, taxonomy, level, entities))
        .collect::<Result<_>>()?;
    let divisions: BTreeSet<&String> = specs.iter().flat_map(|s| s.spec.members.keys()).collect();
    let series = divisions
        .into_iter()
        .map(|d| {
            let specialized: Vec<BTreeSet<String>> = specs
                .iter()
                .map(|s| s.spec.members_of(d).cloned().unwrap_or_default())
                .collect();
            let results: Vec<HhiResult> = specs.iter().map(|s| hhi(&s.spec, assignment, d)).collect();
            let jaccard = specialized
                .windows(2)
                .map(|p| {
                    if p[0].is_empty() || p[1].is_empty() {
                        None
                    } else {
                        jaccard_stability(&p[0], &p[1])
                    }
                })
                .collect();
            PortfolioSeries {
                division: d.clone(),
                windows: windows.to_vec(),
                hhi: results.iter().map(|r| r.hhi).collect(),
                jaccard,
                unassigned: results.iter().map(|r| r.unassigned).collect(),
                specialized,
            }
        })
        .collect();
    Ok(Portfolios { windows: specs, series })
}

/// Linear-interpolation quantile (R type 7) of a sorted, nonempty slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPoint {
    pub category: Category,
    pub window: RollingWindow,
    pub hhi_median: Option<f64>,
    pub hhi_q25: Option<f64>,
    pub hhi_q75: Option<f64>,
    pub hhi_reporting: usize,
    pub hhi_missing: usize,
    /// Mean Jaccard between this window and the next.
    pub jaccard_mean: Option<f64>,
    pub jaccard_reporting: usize,
    pub jaccard_missing: usize,
}

/// Median and interquartile range of division HHI, and mean division Jaccard,
/// per category and window. Missing values are excluded and counted.
pub fn category_aggregate(series: &[PortfolioSeries], taxonomy: &DisciplineTaxonomy) -> Vec<CategoryPoint> {
    let Some(windows) = series.first().map(|s| s.windows.clone()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for category in Category::ALL {
        let members: Vec<&PortfolioSeries> = series
            .iter()
            .filter(|s| taxonomy.category_of(&s.division) == Some(category))
            .collect();
        if members.is_empty() {
            continue;
        }
        for (t, &window) in windows.iter().enumerate() {
            let mut hhis: Vec<f64> = members.iter().filter_map(|s| s.hhi[t]).collect();
            hhis.sort_by(f64::total_cmp);
            let jac: Vec<f64> = members
                .iter()
                .filter_map(|s| s.jaccard.get(t).copied().flatten())
                .collect();
            let has_next = t + 1 < windows.len();
            let q = |p: f64| (!hhis.is_empty()).then(|| quantile_sorted(&hhis, p));
            out.push(CategoryPoint {
                category,
                window,
                hhi_median: q(0.5),
                hhi_q25: q(0.25),
                hhi_q75: q(0.75),
                hhi_reporting: hhis.len(),
                hhi_missing: members.len() - hhis.len(),
                jaccard_mean: (!jac.is_empty()).then(|| jac.iter().sum::<f64>() / jac.len() as f64),
                jaccard_reporting: jac.len(),
                jaccard_missing: if has_next { members.len() - jac.len() } else { 0 },
            });
        }
    }
    out
}

/// Tidy per-division table:
/// `division, window_start, window_end, hhi, jaccard, n_specialized, n_unassigned`.
pub fn write_series(path: &Path, series: &[PortfolioSeries]) -> Result<()> {
    let mut w = io::writer(path)?;
    w.write_record([
        "division",
        "window_start",
        "window_end",
        "hhi",
        "jaccard",
        "n_specialized",
        "n_unassigned",
    ])?;
    for s in series {
        for (t, win) in s.windows.iter().enumerate() {
            w.write_record([
                s.division.as_str(),
                &win.start_year.to_string(),
                &win.end_year.to_string(),
                &io::fmt_opt(s.hhi[t]),
                &io::fmt_opt(s.jaccard.get(t).copied().flatten()),
                &s.specialized[t].len().to_string(),
                &s.unassigned[t].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Tidy category table: `category, window_start, window_end, stat, value`.
pub fn write_categories(path: &Path, points: &[CategoryPoint]) -> Result<()> {
    let mut w = io::writer(path)?;
    w.write_record(["category", "window_start", "window_end", "stat", "value"])?;
    for p in points {
        let stats: [(&str, String); 8] = [
            ("hhi_median", io::fmt_opt(p.hhi_median)),
            ("hhi_q25", io::fmt_opt(p.hhi_q25)),
            ("hhi_q75", io::fmt_opt(p.hhi_q75)),
            ("hhi_reporting", p.hhi_reporting.to_string()),
            ("hhi_missing", p.hhi_missing.to_string()),
            ("jaccard_mean", io::fmt_opt(p.jaccard_mean)),
            ("jaccard_reporting", p.jaccard_reporting.to_string()),
            ("jaccard_missing", p.jaccard_missing.to_string()),
        ];
        for (stat, value) in stats {
            w.write_record([
                p.category.as_str(),
                &p.window.start_year.to_string(),
                &p.window.end_year.to_string(),
                stat,
                &value,
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CurationLabel;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn rec(paper: &str, tool: &str, code: &str, year: i32) -> MentionRecord {
        MentionRecord {
            paper_id: paper.into(),
            raw_name: tool.into(),
            label: CurationLabel::Software,
            doi: Some("x".into()),
            year,
            discipline_codes: vec![code.into()],
        }
    }

    #[test]
    fn study_period_has_fourteen_windows() {
        let w = rolling_windows(2004, 2021, 5, 1).unwrap();
        assert_eq!(w.len(), 14);
        assert_eq!((w[0].start_year, w[0].end_year), (2004, 2008));
        assert_eq!((w[13].start_year, w[13].end_year), (2017, 2021));
        assert!(w.iter().all(|x| x.len() == 5));
        assert!(rolling_windows(2004, 2021, 0, 1).is_err());
    }

    #[test]
    fn hhi_closed_forms() {
        assert_eq!(hhi_from_counts(&[4, 0, 0]), Some(1.0));
        let uniform = hhi_from_counts(&[1; 8]).unwrap();
        assert!((uniform - 0.125).abs() < 1e-12);
        assert_eq!(hhi_from_counts(&[3, 1]), Some(0.625));
        assert_eq!(hhi_from_counts(&[0, 0]), None);
    }

    #[test]
    fn hhi_counts_assigned_tools_only() {
        let a = CommunityAssignment::from_labels(
            ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
            vec![0, 0, 0, 1],
        )
        .unwrap();
        let spec = SpecializationSet {
            threshold: 1.0,
            comparison: Comparison::Strict,
            members: [("31".to_string(), set(&["a", "b", "c", "d", "zz"]))].into_iter().collect(),
        };
        let r = hhi(&spec, &a, "31");
        assert_eq!(r.hhi, Some(0.625));
        assert_eq!(r.unassigned, 1);
        assert_eq!(hhi(&spec, &a, "52").hhi, None);
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard_stability(&set(&["A", "B", "C"]), &set(&["B", "C", "D"])), Some(0.5));
        assert_eq!(jaccard_stability(&set(&["A"]), &set(&["A"])), Some(1.0));
        assert_eq!(jaccard_stability(&set(&["A"]), &set(&["B"])), Some(0.0));
        assert_eq!(jaccard_stability(&set(&[]), &set(&[])), None);
    }

    #[test]
    fn single_division_window_specializes_every_tool() {
        let records = vec![rec("p1", "a", "31", 2005), rec("p2", "b", "31", 2006)];
        let w = RollingWindow { start_year: 2004, end_year: 2008 };
        let ents = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let ws = windowed_specialization(&records, w, &DisciplineTaxonomy::default(), Level::Division, &ents).unwrap();
        // RCA is exactly 1 for a single row, so strict > 1 admits nothing.
        assert!(ws.spec.members["31"].is_empty());
        assert!(!ws.empty);
        let empty = windowed_specialization(
            &records,
            RollingWindow { start_year: 1990, end_year: 1994 },
            &DisciplineTaxonomy::default(),
            Level::Division,
            &ents,
        )
        .unwrap();
        assert!(empty.empty);
    }

    #[test]
    fn swapped_tool_flips_membership() {
        let mut records = Vec::new();
        let mut id = 0;
        let mut add = |tool: &str, code: &str, year: i32, n: usize, out: &mut Vec<MentionRecord>| {
            for _ in 0..n {
                id += 1;
                out.push(rec(&format!("p{id}"), tool, code, year));
            }
        };
        add("x", "31", 2000, 6, &mut records);
        add("y", "31", 2000, 2, &mut records);
        add("x", "52", 2000, 2, &mut records);
        add("y", "52", 2000, 6, &mut records);
        add("x", "31", 2001, 2, &mut records);
        add("y", "31", 2001, 6, &mut records);
        add("x", "52", 2001, 6, &mut records);
        add("y", "52", 2001, 2, &mut records);
        let ents = vec!["x".to_string(), "y".to_string()];
        let tax = DisciplineTaxonomy::default();
        let w0 = windowed_specialization(&records, RollingWindow { start_year: 2000, end_year: 2000 }, &tax, Level::Division, &ents).unwrap();
        let w1 = windowed_specialization(&records, RollingWindow { start_year: 2001, end_year: 2001 }, &tax, Level::Division, &ents).unwrap();
        // Scalar RCA for x in 31 at t0: (6/8)/(8/16) = 1.5; at t1: (2/8)/(8/16) = 0.5.
        assert_eq!(w0.spec.members["31"], set(&["x"]));
        assert_eq!(w1.spec.members["31"], set(&["y"]));
    }

    #[test]
    fn quantiles_and_aggregates() {
        let v = [0.2, 0.4, 0.9];
        assert_eq!(quantile_sorted(&v, 0.5), 0.4);
        assert!((quantile_sorted(&v, 0.25) - 0.3).abs() < 1e-15);
        let w = rolling_windows(2000, 2001, 1, 1).unwrap();
        let mk = |d: &str, h: [Option<f64>; 2], j: Option<f64>| PortfolioSeries {
            division: d.into(),
            windows: w.clone(),
            hhi: h.to_vec(),
            jaccard: vec![j],
            specialized: vec![BTreeSet::new(); 2],
            unassigned: vec![0; 2],
        };
        let series = vec![
            mk("31", [Some(0.2), Some(0.5)], Some(0.5)),
            mk("32", [Some(0.4), None], None),
            mk("42", [Some(0.9), Some(0.7)], Some(1.0)),
            mk("34", [Some(0.6), Some(0.6)], Some(0.25)),
        ];
        let pts = category_aggregate(&series, &DisciplineTaxonomy::default());
        let nh0 = pts.iter().find(|p| p.category == Category::NaturalHealth && p.window == w[0]).unwrap();
        assert_eq!(nh0.hhi_median, Some(0.4));
        assert_eq!(nh0.jaccard_mean, Some(0.75));
        assert_eq!(nh0.jaccard_missing, 1);
        let nh1 = pts.iter().find(|p| p.category == Category::NaturalHealth && p.window == w[1]).unwrap();
        assert_eq!(nh1.hhi_missing, 1);
        let pt0 = pts.iter().find(|p| p.category == Category::PhysicalTechnical && p.window == w[0]).unwrap();
        assert_eq!(pt0.hhi_median, Some(0.6));
        assert_eq!(pt0.hhi_q75.unwrap() - pt0.hhi_q25.unwrap(), 0.0);
        assert!(!pts.iter().any(|p| p.category == Category::SocialHumanities));
    }
}
