//! Mention-record ingestion: curation, name disambiguation, and the
//! paper-deduplicated discipline x software count matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationLabel {
    Software,
    NotSoftware,
    Unclear,
    NotCurated,
}

impl CurationLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CurationLabel::Software => "software",
            CurationLabel::NotSoftware => "not_software",
            CurationLabel::Unclear => "unclear",
            CurationLabel::NotCurated => "not_curated",
        }
    }
}

impl FromStr for CurationLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "software" => Ok(CurationLabel::Software),
            "not_software" => Ok(CurationLabel::NotSoftware),
            "unclear" => Ok(CurationLabel::Unclear),
            "not_curated" => Ok(CurationLabel::NotCurated),
            other => Err(Error::Data(format!("unknown curation label {other:?}"))),
        }
    }
}

/// One (paper, software, discipline codes, year) observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MentionRecord {
    pub paper_id: String,
    pub raw_name: String,
    pub label: CurationLabel,
    pub doi: Option<String>,
    pub year: i32,
    pub discipline_codes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    NaturalHealth,
    PhysicalTechnical,
    SocialHumanities,
}

impl Category {
    pub const ALL: [Category; 3] = [
        Category::NaturalHealth,
        Category::PhysicalTechnical,
        Category::SocialHumanities,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::NaturalHealth => "natural_health",
            Category::PhysicalTechnical => "physical_technical",
            Category::SocialHumanities => "social_humanities",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "naturalhealth" | "naturalhealthsciences" | "naturalandhealthsciences" => {
                Ok(Category::NaturalHealth)
            }
            "physicaltechnical" | "physicaltechnicalsciences" | "physicalandtechnicalsciences" => {
                Ok(Category::PhysicalTechnical)
            }
            "socialhumanities" | "socialscienceshumanities" | "socialsciencesandhumanities" => {
                Ok(Category::SocialHumanities)
            }
            _ => Err(Error::Config(format!("unknown category {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    #[default]
    Division,
    Group,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "division" => Ok(Level::Division),
            "group" => Ok(Level::Group),
            other => Err(Error::InvalidArgument(format!("unknown level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Division {
    pub label: String,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    pub parent: String,
}

/// Two-level discipline classification (2-digit divisions, 4-digit groups)
/// with a broad category per division.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisciplineTaxonomy {
    divisions: BTreeMap<String, Division>,
    groups: BTreeMap<String, Group>,
}

const DEFAULT_DIVISIONS: [(&str, &str, Category); 22] = [
    ("30", "Agricultural, Veterinary and Food Sciences", Category::NaturalHealth),
    ("31", "Biological Sciences", Category::NaturalHealth),
    ("32", "Biomedical and Clinical Sciences", Category::NaturalHealth),
    ("33", "Built Environment and Design", Category::SocialHumanities),
    ("34", "Chemical Sciences", Category::PhysicalTechnical),
    ("35", "Commerce, Management, Tourism and Services", Category::SocialHumanities),
    ("36", "Creative Arts and Writing", Category::SocialHumanities),
    ("37", "Earth Sciences", Category::NaturalHealth),
    ("38", "Economics", Category::SocialHumanities),
    ("39", "Education", Category::SocialHumanities),
    ("40", "Engineering", Category::PhysicalTechnical),
    ("41", "Environmental Sciences", Category::NaturalHealth),
    ("42", "Health Sciences", Category::NaturalHealth),
    ("43", "History, Heritage and Archaeology", Category::SocialHumanities),
    ("44", "Human Society", Category::SocialHumanities),
    ("46", "Information and Computing Sciences", Category::PhysicalTechnical),
    ("47", "Language, Communication and Culture", Category::SocialHumanities),
    ("48", "Law and Legal Studies", Category::SocialHumanities),
    ("49", "Mathematical Sciences", Category::PhysicalTechnical),
    ("50", "Philosophy and Religious Studies", Category::SocialHumanities),
    ("51", "Physical Sciences", Category::PhysicalTechnical),
    ("52", "Psychology", Category::SocialHumanities),
];

impl Default for DisciplineTaxonomy {
    /// The 22 ANZSRC 2020 divisions with their broad-category mapping.
    fn default() -> Self {
        let divisions = DEFAULT_DIVISIONS
            .iter()
            .map(|(code, label, category)| {
                (
                    code.to_string(),
                    Division {
                        label: label.to_string(),
                        category: *category,
                    },
                )
            })
            .collect();
        DisciplineTaxonomy {
            divisions,
            groups: BTreeMap::new(),
        }
    }
}

impl DisciplineTaxonomy {
    pub fn new(
        divisions: BTreeMap<String, Division>,
        groups: BTreeMap<String, Group>,
    ) -> Result<Self> {
        for (code, group) in &groups {
            if !divisions.contains_key(&group.parent) {
                return Err(Error::Config(format!(
                    "group {code} has unknown parent division {}",
                    group.parent
                )));
            }
        }
        Ok(DisciplineTaxonomy { divisions, groups })
    }

    /// Reads `code, label, parent_code, category` rows. Rows with an empty
    /// parent are divisions and must carry a category.
    pub fn load(path: &Path) -> Result<Self> {
        let rows = io::table_rows(path, &["code"])?;
        let mut divisions = BTreeMap::new();
        let mut groups = BTreeMap::new();
        for row in rows {
            let cell = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
            let code = cell(0).to_string();
            if code.is_empty() {
                return Err(Error::Config("taxonomy row with empty code".into()));
            }
            let label = cell(1).to_string();
            let parent = cell(2);
            if parent.is_empty() {
                let category = cell(3).parse()?;
                if divisions
                    .insert(code.clone(), Division { label, category })
                    .is_some()
                {
                    return Err(Error::Config(format!("duplicate division {code}")));
                }
            } else if groups
                .insert(
                    code.clone(),
                    Group {
                        label,
                        parent: parent.to_string(),
                    },
                )
                .is_some()
            {
                return Err(Error::Config(format!("duplicate group {code}")));
            }
        }
        Self::new(divisions, groups)
    }

    pub fn divisions(&self) -> &BTreeMap<String, Division> {
        &self.divisions
    }

    pub fn groups(&self) -> &BTreeMap<String, Group> {
        &self.groups
    }

    pub fn category_of(&self, code: &str) -> Option<Category> {
        let division = if self.divisions.contains_key(code) {
            code
        } else {
            self.division_of(code)?
        };
        self.divisions.get(division).map(|d| d.category)
    }

    fn division_of<'a>(&'a self, code: &'a str) -> Option<&'a str> {
        if let Some(g) = self.groups.get(code) {
            return Some(g.parent.as_str());
        }
        let prefix = code.get(..2)?;
        self.divisions.get_key_value(prefix).map(|(k, _)| k.as_str())
    }

    /// Maps a raw discipline code onto the requested level, or `None` when
    /// the code cannot be placed at that level.
    pub fn resolve(&self, code: &str, level: Level) -> Option<String> {
        let code = code.trim();
        match level {
            Level::Division => self.division_of(code).map(str::to_string),
            Level::Group => {
                let group = code.get(..4)?;
                if !group.chars().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                let known = if self.groups.is_empty() {
                    self.divisions.contains_key(&group[..2])
                } else {
                    self.groups.contains_key(group)
                };
                known.then(|| group.to_string())
            }
        }
    }
}

/// Variant name -> canonical name. Canonical names are never keys.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (variant, canonical) in entries {
            if let Some(prev) = map.insert(variant.clone(), canonical.clone()) {
                if prev != canonical {
                    return Err(Error::Config(format!(
                        "alias {variant:?} maps to both {prev:?} and {canonical:?}"
                    )));
                }
            }
        }
        for canonical in map.values() {
            if map.contains_key(canonical) {
                return Err(Error::Config(format!(
                    "alias table is not idempotent: canonical name {canonical:?} is also a variant"
                )));
            }
        }
        Ok(AliasTable { entries: map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rows = io::table_rows(path, &["variant"])?;
        let mut entries = Vec::with_capacity(rows.len());
        for row in rows {
            match row.as_slice() {
                [variant, canonical, ..] if !variant.is_empty() && !canonical.is_empty() => {
                    entries.push((variant.clone(), canonical.clone()))
                }
                _ => return Err(Error::Config(format!("malformed alias row {row:?}"))),
            }
        }
        Self::new(entries)
    }

    pub fn get(&self, variant: &str) -> Option<&str> {
        self.entries.get(variant).map(String::as_str)
    }

    pub fn is_canonical(&self, name: &str) -> bool {
        self.entries.values().any(|c| c == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Names carried by records labeled `software`.
pub fn known_names(records: &[MentionRecord]) -> HashSet<String> {
    records
        .iter()
        .filter(|r| r.label == CurationLabel::Software)
        .map(|r| r.raw_name.clone())
        .collect()
}

/// Keeps `software` records plus `not_curated` records whose name exactly
/// matches a known software name.
pub fn curate(
    records: impl IntoIterator<Item = MentionRecord>,
    known_names: &HashSet<String>,
) -> Vec<MentionRecord> {
    records
        .into_iter()
        .filter(|r| match r.label {
            CurationLabel::Software => true,
            CurationLabel::NotCurated => known_names.contains(&r.raw_name),
            CurationLabel::NotSoftware | CurationLabel::Unclear => false,
        })
        .collect()
}

fn case_key(name: &str) -> String {
    name.to_lowercase()
}

/// Picks the most frequent form; ties go to the smallest byte sequence.
fn dominant<'a>(forms: impl IntoIterator<Item = (&'a str, usize)>) -> &'a str {
    forms
        .into_iter()
        .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then_with(|| b.as_bytes().cmp(a.as_bytes())))
        .map(|(s, _)| s)
        .expect("non-empty group")
}

/// Resolves name variants in two stages: case-variant merging onto the most
/// frequent surface form, then the alias table. Output names are pairwise
/// distinct under case folding, which makes the operation idempotent.
pub fn disambiguate(records: Vec<MentionRecord>, aliases: &AliasTable) -> Vec<MentionRecord> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        *freq.entry(r.raw_name.as_str()).or_default() += 1;
    }
    let mut groups: HashMap<String, Vec<(&str, usize)>> = HashMap::new();
    for (&name, &count) in &freq {
        groups.entry(case_key(name)).or_default().push((name, count));
    }

    let mut stage: HashMap<String, String> = HashMap::with_capacity(freq.len());
    for members in groups.values_mut() {
        members.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.as_bytes().cmp(b.as_bytes())));
        let rep = dominant(members.iter().copied());
        let resolved = aliases
            .get(rep)
            .or_else(|| members.iter().find_map(|(m, _)| aliases.get(m)))
            .unwrap_or(rep)
            .to_string();
        for (m, _) in members.iter() {
            stage.insert((*m).to_string(), resolved.clone());
        }
    }

    // Alias targets can collide with other names up to case; fold once more,
    // preferring alias canonical names.
    let mut out_freq: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        *out_freq.entry(stage[&r.raw_name].as_str()).or_default() += 1;
    }
    let mut out_groups: HashMap<String, Vec<(&str, usize)>> = HashMap::new();
    for (&name, &count) in &out_freq {
        out_groups.entry(case_key(name)).or_default().push((name, count));
    }
    let mut fold: HashMap<String, String> = HashMap::new();
    for members in out_groups.values() {
        if members.len() < 2 {
            continue;
        }
        let canonical: Vec<(&str, usize)> = members
            .iter()
            .copied()
            .filter(|(m, _)| aliases.is_canonical(m))
            .collect();
        let rep = if canonical.is_empty() {
            dominant(members.iter().copied())
        } else {
            dominant(canonical)
        };
        for (m, _) in members {
            fold.insert((*m).to_string(), rep.to_string());
        }
    }

    let mut final_map: HashMap<String, String> = HashMap::with_capacity(stage.len());
    for (raw, staged) in &stage {
        let name = fold.get(staged).unwrap_or(staged).clone();
        final_map.insert(raw.clone(), name);
    }
    records
        .into_iter()
        .map(|mut r| {
            r.raw_name = final_map[&r.raw_name].clone();
            r
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    pub input_records: usize,
    pub missing_doi: usize,
    pub missing_discipline: usize,
    pub out_of_year_range: usize,
    pub retained_records: usize,
}

/// Drops records without a DOI, without discipline codes, or outside the
/// inclusive year range.
pub fn filter_records(
    records: Vec<MentionRecord>,
    year_range: (i32, i32),
) -> (Vec<MentionRecord>, FilterDiagnostics) {
    let mut diag = FilterDiagnostics {
        input_records: records.len(),
        ..Default::default()
    };
    let kept: Vec<MentionRecord> = records
        .into_iter()
        .filter(|r| {
            if r.doi.as_deref().map_or(true, |d| d.trim().is_empty()) {
                diag.missing_doi += 1;
                false
            } else if r.discipline_codes.is_empty() {
                diag.missing_discipline += 1;
                false
            } else if r.year < year_range.0 || r.year > year_range.1 {
                diag.out_of_year_range += 1;
                false
            } else {
                true
            }
        })
        .collect();
    diag.retained_records = kept.len();
    (kept, diag)
}

/// Discipline x software matrix of paper counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    counts: Vec<u64>,
    year_range: Option<(i32, i32)>,
}

impl CountMatrix {
    pub fn from_dense(
        rows: Vec<String>,
        cols: Vec<String>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if counts.len() != rows.len() * cols.len() {
            return Err(Error::InvalidArgument(format!(
                "dense counts length {} does not match {}x{}",
                counts.len(),
                rows.len(),
                cols.len()
            )));
        }
        check_unique(&rows, "row")?;
        check_unique(&cols, "column")?;
        Ok(CountMatrix {
            rows,
            cols,
            counts,
            year_range: None,
        })
    }

    /// Builds a matrix from (row, col, count) triples; labels are sorted and
    /// repeated triples are summed.
    pub fn from_triples<I, R, C>(triples: I) -> Self
    where
        I: IntoIterator<Item = (R, C, u64)>,
        R: Into<String>,
        C: Into<String>,
    {
        let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (r, c, n) in triples {
            *cells.entry((r.into(), c.into())).or_default() += n;
        }
        let rows: BTreeSet<&String> = cells.keys().map(|(r, _)| r).collect();
        let cols: BTreeSet<&String> = cells.keys().map(|(_, c)| c).collect();
        let rows: Vec<String> = rows.into_iter().cloned().collect();
        let cols: Vec<String> = cols.into_iter().cloned().collect();
        let row_ix: HashMap<&str, usize> =
            rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let col_ix: HashMap<&str, usize> =
            cols.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![0u64; rows.len() * cols.len()];
        for ((r, c), n) in &cells {
            counts[row_ix[r.as_str()] * cols.len() + col_ix[c.as_str()]] += n;
        }
        CountMatrix {
            rows,
            cols,
            counts,
            year_range: None,
        }
    }

    pub fn with_year_range(mut self, range: Option<(i32, i32)>) -> Self {
        self.year_range = range;
        self
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        self.year_range
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols.len() + col]
    }

    pub fn row(&self, row: usize) -> &[u64] {
        let n = self.cols.len();
        &self.counts[row * n..(row + 1) * n]
    }

    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.rows.len()).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.cols.len()];
        for r in 0..self.rows.len() {
            for (t, v) in totals.iter_mut().zip(self.row(r)) {
                *t += v;
            }
        }
        totals
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.cols.is_empty()
    }

    /// Nonzero cells as (row label, col label, count), row-major.
    pub fn nonzero(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        let n = self.cols.len();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(move |(i, &v)| (self.rows[i / n].as_str(), self.cols[i % n].as_str(), v))
    }

    /// Keeps the given column indices, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> CountMatrix {
        let mut counts = Vec::with_capacity(self.rows.len() * keep.len());
        for r in 0..self.rows.len() {
            let row = self.row(r);
            counts.extend(keep.iter().map(|&c| row[c]));
        }
        CountMatrix {
            rows: self.rows.clone(),
            cols: keep.iter().map(|&c| self.cols[c].clone()).collect(),
            counts,
            year_range: self.year_range,
        }
    }

    /// Re-indexes onto a fixed column universe; columns absent here are zero,
    /// columns not in `cols` are dropped.
    pub fn with_columns(&self, cols: &[String]) -> CountMatrix {
        let ix: HashMap<&str, usize> =
            self.cols.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![0u64; self.rows.len() * cols.len()];
        for r in 0..self.rows.len() {
            let row = self.row(r);
            for (j, c) in cols.iter().enumerate() {
                if let Some(&src) = ix.get(c.as_str()) {
                    counts[r * cols.len() + j] = row[src];
                }
            }
        }
        CountMatrix {
            rows: self.rows.clone(),
            cols: cols.to_vec(),
            counts,
            year_range: self.year_range,
        }
    }

    /// Cell-wise sum over the union of labels. Matrices built from disjoint
    /// paper shards merge into the matrix of the whole stream.
    pub fn merge(&self, other: &CountMatrix) -> CountMatrix {
        let year_range = match (self.year_range, other.year_range) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        };
        let mut rows: BTreeSet<String> = self.rows.iter().cloned().collect();
        rows.extend(other.rows.iter().cloned());
        let mut cols: BTreeSet<String> = self.cols.iter().cloned().collect();
        cols.extend(other.cols.iter().cloned());
        let triples = self
            .nonzero()
            .chain(other.nonzero())
            .map(|(r, c, n)| (r.to_string(), c.to_string(), n))
            .collect::<Vec<_>>();
        let rows: Vec<String> = rows.into_iter().collect();
        let cols: Vec<String> = cols.into_iter().collect();
        let row_ix: HashMap<&str, usize> =
            rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let col_ix: HashMap<&str, usize> =
            cols.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![0u64; rows.len() * cols.len()];
        for (r, c, n) in triples {
            counts[row_ix[r.as_str()] * cols.len() + col_ix[c.as_str()]] += n;
        }
        CountMatrix {
            rows,
            cols,
            counts,
            year_range,
        }
    }

    /// Long format (discipline, software, count), nonzero cells only.
    pub fn write_long(&self, path: &Path) -> Result<()> {
        let mut w = io::writer(path)?;
        w.write_record(["discipline", "software", "count"])?;
        for (r, c, n) in self.nonzero() {
            w.write_record([r, c, &n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_long(path: &Path) -> Result<Self> {
        let mut rdr = io::reader(path)?;
        let mut triples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Data(format!("short count row {rec:?}")));
            }
            let n: u64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("bad count {:?}", &rec[2])))?;
            triples.push((rec[0].to_string(), rec[1].to_string(), n));
        }
        Ok(Self::from_triples(triples))
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate {what} label {l:?}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub records: usize,
    pub dropped_no_discipline: usize,
    pub unresolved_codes: usize,
    pub papers: usize,
}

/// Counts distinct papers per (discipline, software). A paper with k codes at
/// the requested level contributes once to each of the k rows.
pub fn build_count_matrix(
    records: &[MentionRecord],
    taxonomy: &DisciplineTaxonomy,
    level: Level,
) -> (CountMatrix, BuildDiagnostics) {
    let mut diag = BuildDiagnostics {
        records: records.len(),
        ..Default::default()
    };
    let mut triples: HashSet<(&str, String, &str)> = HashSet::new();
    let mut papers: HashSet<&str> = HashSet::new();
    let mut years: Option<(i32, i32)> = None;
    for r in records {
        let mut resolved: BTreeSet<String> = BTreeSet::new();
        for code in &r.discipline_codes {
            match taxonomy.resolve(code, level) {
                Some(c) => {
                    resolved.insert(c);
                }
                None => diag.unresolved_codes += 1,
            }
        }
        if resolved.is_empty() {
            diag.dropped_no_discipline += 1;
            continue;
        }
        papers.insert(r.paper_id.as_str());
        years = Some(match years {
            None => (r.year, r.year),
            Some((lo, hi)) => (lo.min(r.year), hi.max(r.year)),
        });
        for d in resolved {
            triples.insert((r.paper_id.as_str(), d, r.raw_name.as_str()));
        }
    }
    diag.papers = papers.len();
    let m = CountMatrix::from_triples(triples.into_iter().map(|(_, d, s)| (d, s, 1u64)))
        .with_year_range(years);
    (m, diag)
}

/// Result of the percentile filter on per-software column totals.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileFiltered {
    pub matrix: CountMatrix,
    pub threshold: u64,
    pub retained: usize,
    pub dropped: usize,
}

/// Nearest-rank quantile of a sorted slice: element at 1-based rank ceil(p*n).
pub fn nearest_rank(sorted: &[u64], pct: f64) -> u64 {
    let n = sorted.len();
    let rank = ((pct * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Keeps columns whose total strictly exceeds the nearest-rank `pct` quantile
/// of column totals.
pub fn percentile_filter(m: &CountMatrix, pct: f64) -> Result<PercentileFiltered> {
    if !(pct > 0.0 && pct < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "percentile must lie in (0,1), got {pct}"
        )));
    }
    if m.is_empty() {
        return Err(Error::InvalidArgument("percentile filter on empty matrix".into()));
    }
    let totals = m.col_totals();
    let mut sorted = totals.clone();
    sorted.sort_unstable();
    let threshold = nearest_rank(&sorted, pct);
    let keep: Vec<usize> = (0..totals.len()).filter(|&c| totals[c] > threshold).collect();
    Ok(PercentileFiltered {
        retained: keep.len(),
        dropped: totals.len() - keep.len(),
        matrix: m.select_columns(&keep),
        threshold,
    })
}

/// Reads the corpus input format: header row with `paper_id, software,
/// label, doi, year, discipline_codes` (pipe-separated codes).
pub fn read_records(path: &Path) -> Result<Vec<MentionRecord>> {
    let delim = io::sniff_delimiter(path)?;
    parse_records(io::open(path)?, delim, &path.display().to_string())
}

/// Parses records from any reader; `source` names it in error messages.
pub fn parse_records<R: std::io::Read>(input: R, delimiter: u8, source: &str) -> Result<Vec<MentionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("records file lacks column {name:?}")))
    };
    let (ip, isw, il, id, iy, ic) = (
        col("paper_id")?,
        col("software")?,
        col("label")?,
        col("doi")?,
        col("year")?,
        col("discipline_codes")?,
    );
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = |what: &str| format!("{source} line {}: {what}", line + 2);
        let paper_id = rec[ip].trim().to_string();
        if paper_id.is_empty() {
            return Err(Error::Data(at("empty paper_id")));
        }
        let label = rec[il]
            .parse()
            .map_err(|e: Error| Error::Data(at(&e.to_string())))?;
        let year = rec[iy]
            .trim()
            .parse()
            .map_err(|_| Error::Data(at(&format!("bad year {:?}", &rec[iy]))))?;
        let doi = Some(rec[id].trim()).filter(|d| !d.is_empty()).map(str::to_string);
        let discipline_codes = rec[ic]
            .split('|')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        out.push(MentionRecord {
            paper_id,
            raw_name: rec[isw].to_string(),
            label,
            doi,
            year,
            discipline_codes,
        });
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[MentionRecord]) -> Result<()> {
    let w = io::writer(path)?;
    write_records_with(w, records).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Writes records as tab-separated text to any writer.
pub fn write_records_to<W: std::io::Write>(out: W, records: &[MentionRecord]) -> Result<()> {
    write_records_with(csv::WriterBuilder::new().delimiter(b'\t').from_writer(out), records)
}

fn write_records_with<W: std::io::Write>(mut w: csv::Writer<W>, records: &[MentionRecord]) -> Result<()> {
    w.write_record(["paper_id", "software", "label", "doi", "year", "discipline_codes"])?;
    for r in records {
        w.write_record([
            r.paper_id.as_str(),
            r.raw_name.as_str(),
            r.label.as_str(),
            r.doi.as_deref().unwrap_or(""),
            &r.year.to_string(),
            &r.discipline_codes.join("|"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(paper: &str, name: &str, label: CurationLabel, codes: &[&str]) -> MentionRecord {
        MentionRecord {
            paper_id: paper.into(),
            raw_name: name.into(),
            label,
            doi: Some(format!("10.1/{paper}")),
            year: 2010,
            discipline_codes: codes.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn sw(paper: &str, name: &str) -> MentionRecord {
        rec(paper, name, CurationLabel::Software, &["31"])
    }

    #[test]
    fn curate_keeps_software_and_recovers_exact_not_curated() {
        let records = vec![
            rec("p1", "FlowJo", CurationLabel::Software, &["31"]),
            rec("p2", "FlowJo", CurationLabel::NotCurated, &["31"]),
            rec("p3", "flowjo", CurationLabel::NotCurated, &["31"]),
            rec("p4", "thing", CurationLabel::Unclear, &["31"]),
            rec("p5", "Excel", CurationLabel::NotSoftware, &["31"]),
        ];
        let known = known_names(&records);
        let out = curate(records, &known);
        let ids: Vec<&str> = out.iter().map(|r| r.paper_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2"]);
        assert!(curate(Vec::new(), &known).is_empty());
    }

    #[test]
    fn case_variants_merge_onto_most_frequent_form() {
        let mut records: Vec<_> = (0..2).map(|i| sw(&format!("a{i}"), "Flowjo")).collect();
        records.extend((0..10).map(|i| sw(&format!("b{i}"), "FlowJo")));
        let out = disambiguate(records, &AliasTable::default());
        assert!(out.iter().all(|r| r.raw_name == "FlowJo"));
    }

    #[test]
    fn case_tie_breaks_on_smallest_bytes() {
        let mut records: Vec<_> = (0..3).map(|i| sw(&format!("a{i}"), "imagej")).collect();
        records.extend((0..3).map(|i| sw(&format!("b{i}"), "ImageJ")));
        // "I" (0x49) sorts before "i" (0x69).
        let expected = ["ImageJ", "imagej"].into_iter().min_by(|a, b| a.as_bytes().cmp(b.as_bytes())).unwrap();
        let out = disambiguate(records, &AliasTable::default());
        assert!(out.iter().all(|r| r.raw_name == expected));
        assert_eq!(expected, "ImageJ");
    }

    #[test]
    fn alias_maps_to_canonical() {
        let aliases = AliasTable::new([("sklearn".to_string(), "Scikit-learn".to_string())]).unwrap();
        let out = disambiguate(vec![sw("p1", "sklearn")], &aliases);
        assert_eq!(out[0].raw_name, "Scikit-learn");
    }

    #[test]
    fn alias_target_folds_with_case_variant() {
        let aliases = AliasTable::new([("sklearn".to_string(), "Scikit-learn".to_string())]).unwrap();
        let records = vec![sw("p1", "sklearn"), sw("p2", "scikit-learn"), sw("p3", "scikit-learn")];
        let once = disambiguate(records, &aliases);
        assert!(once.iter().all(|r| r.raw_name == "Scikit-learn"));
        let twice = disambiguate(once.clone(), &aliases);
        assert_eq!(once, twice);
    }

    #[test]
    fn alias_table_rejects_chains() {
        let err = AliasTable::new([
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn dedup_counts_each_paper_once() {
        let records = vec![sw("P", "R"), sw("P", "R"), sw("Q", "R")];
        let (m, _) = build_count_matrix(&records, &DisciplineTaxonomy::default(), Level::Division);
        assert_eq!(m.get(0, 0), 2);
    }

    #[test]
    fn multi_discipline_paper_counts_in_each_row() {
        let records = vec![rec("P", "R", CurationLabel::Software, &["31", "3102", "52"])];
        let (m, _) = build_count_matrix(&records, &DisciplineTaxonomy::default(), Level::Division);
        assert_eq!(m.rows(), ["31", "52"]);
        assert_eq!(m.col_totals(), vec![2]);
    }

    #[test]
    fn records_without_resolvable_codes_are_reported() {
        let records = vec![
            rec("P", "R", CurationLabel::Software, &[]),
            rec("Q", "R", CurationLabel::Software, &["99"]),
            sw("S", "R"),
        ];
        let (m, diag) = build_count_matrix(&records, &DisciplineTaxonomy::default(), Level::Division);
        assert_eq!(diag.dropped_no_discipline, 2);
        assert_eq!(diag.unresolved_codes, 1);
        assert_eq!(m.total(), 1);
    }

    #[test]
    fn group_level_uses_four_digit_codes() {
        let records = vec![rec("P", "R", CurationLabel::Software, &["3102", "31", "310205"])];
        let (m, diag) = build_count_matrix(&records, &DisciplineTaxonomy::default(), Level::Group);
        assert_eq!(m.rows(), ["3102"]);
        assert_eq!(diag.unresolved_codes, 1);
    }

    #[test]
    fn percentile_nearest_rank_on_one_to_hundred() {
        let cols: Vec<String> = (1..=100).map(|i| format!("t{i:03}")).collect();
        let m = CountMatrix::from_dense(vec!["31".into()], cols, (1..=100).collect()).unwrap();
        let f = percentile_filter(&m, 0.90).unwrap();
        assert_eq!(f.threshold, 90);
        assert_eq!(f.matrix.col_totals(), (91..=100).collect::<Vec<u64>>());
    }

    #[test]
    fn percentile_equal_totals_drop_everything() {
        let m = CountMatrix::from_dense(
            vec!["31".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![5, 5, 5],
        )
        .unwrap();
        let f = percentile_filter(&m, 0.5).unwrap();
        assert_eq!(f.retained, 0);
    }

    #[test]
    fn percentile_rejects_out_of_range() {
        let m = CountMatrix::from_dense(vec!["31".into()], vec!["a".into()], vec![1]).unwrap();
        for pct in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(percentile_filter(&m, pct), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn default_taxonomy_matches_category_sizes() {
        let t = DisciplineTaxonomy::default();
        let count = |c| t.divisions().values().filter(|d| d.category == c).count();
        assert_eq!(t.divisions().len(), 22);
        assert_eq!(count(Category::NaturalHealth), 6);
        assert_eq!(count(Category::PhysicalTechnical), 5);
        assert_eq!(count(Category::SocialHumanities), 11);
        assert_eq!(t.category_of("3401"), Some(Category::PhysicalTechnical));
    }

    #[test]
    fn taxonomy_rejects_orphan_group() {
        let mut groups = BTreeMap::new();
        groups.insert(
            "9901".to_string(),
            Group {
                label: "x".into(),
                parent: "99".into(),
            },
        );
        let t = DisciplineTaxonomy::new(DisciplineTaxonomy::default().divisions().clone(), groups);
        assert!(matches!(t, Err(Error::Config(_))));
    }

    #[test]
    fn merge_of_paper_shards_equals_whole() {
        let records: Vec<_> = (0..40)
            .map(|i| {
                rec(
                    &format!("p{}", i % 13),
                    ["R", "SPSS", "BLAST"][i % 3],
                    CurationLabel::Software,
                    &[["31", "52", "34"][i % 3], "42"],
                )
            })
            .collect();
        let tax = DisciplineTaxonomy::default();
        let (whole, _) = build_count_matrix(&records, &tax, Level::Division);
        let (even, odd): (Vec<_>, Vec<_>) = records
            .iter()
            .cloned()
            .partition(|r| r.paper_id.trim_start_matches('p').parse::<u32>().unwrap() % 2 == 0);
        let (a, _) = build_count_matrix(&even, &tax, Level::Division);
        let (b, _) = build_count_matrix(&odd, &tax, Level::Division);
        assert_eq!(a.merge(&b), whole);
        assert_eq!(b.merge(&a), whole);
    }

    #[test]
    fn records_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let records = vec![
            rec("p,1", "R", CurationLabel::Software, &["31", "3102"]),
            MentionRecord {
                doi: None,
                ..rec("p2", "Excel", CurationLabel::NotCurated, &[])
            },
        ];
        write_records(&path, &records).unwrap();
        assert_eq!(read_records(&path).unwrap(), records);
    }
}
