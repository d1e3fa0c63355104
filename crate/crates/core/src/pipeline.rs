//! Stage orchestration: declarative configuration, file contracts and run
//! manifests.
//!
//! Every stage reads named files from the output directory (or the
//! configured input paths), writes its outputs into a private staging
//! directory, and moves them into place only when the stage succeeds. A
//! `manifest_<stage>.json` beside the outputs records input and output
//! digests, the resolved configuration digest, the crate version and the
//! wall time. Wall time lives only in the manifest, so every other output is
//! a pure function of configuration and inputs.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backbone::{backbone, write_backbone};
use crate::community::{describe_communities, fit_sbm_restarts, CommunityAssignment, SbmConfig};
use crate::corpus::{
    build_count_matrix, curate, disambiguate, filter_records, known_names, parse_records,
    percentile_filter, read_records, write_records, write_records_to, AliasTable, BuildDiagnostics,
    CountMatrix, DisciplineTaxonomy, FilterDiagnostics, Level, MentionRecord,
};
use crate::dynamics::{category_aggregate, portfolio_series, rolling_windows, write_categories, write_series};
use crate::error::{Error, Result};
use crate::graphml::write_graphml;
use crate::io;
use crate::proximity::{proximity, to_network, NodeAttrs, ProximityNetwork};
use crate::scalefit::{bootstrap_p_value, fit_power_law, write_ccdf, FitOptions, PowerLawFit};
use crate::specialization::{community_rca, rca, specialize, Comparison};
use crate::synth::{generate_corpus, BlockSpec, SynthConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output file names, relative to the output directory.
pub mod files {
    pub const CONFIG: &str = "config.resolved.toml";
    pub const SYNTH_RECORDS: &str = "records.tsv";
    pub const CLEAN_RECORDS: &str = "clean_records.tsv";
    pub const COUNTS_ALL: &str = "counts_all.tsv";
    pub const COUNTS: &str = "counts.tsv";
    pub const TOOL_TOTALS: &str = "tool_totals.tsv";
    pub const INGEST: &str = "ingest.json";
    pub const RCA: &str = "rca.tsv";
    pub const SPECIALIZATION: &str = "specialization.tsv";
    pub const HEATMAP: &str = "rca_heatmap.json";
    pub const PROXIMITY: &str = "proximity.tsv";
    pub const PROXIMITY_SUMMARY: &str = "proximity.json";
    pub const PROXIMITY_GRAPHML: &str = "proximity.graphml";
    pub const BACKBONE: &str = "backbone.tsv";
    pub const BACKBONE_GRAPHML: &str = "backbone.graphml";
    pub const COMMUNITIES: &str = "communities.tsv";
    pub const COMMUNITY_REPORT: &str = "communities.json";
    pub const COMMUNITY_RCA: &str = "community_rca.tsv";
    pub const PORTFOLIO: &str = "portfolio.json";
    pub const DYNAMICS: &str = "dynamics.tsv";
    pub const DYNAMICS_CATEGORIES: &str = "dynamics_categories.tsv";
    pub const POWERLAW: &str = "powerlaw.json";
    pub const POWERLAW_CCDF: &str = "powerlaw_ccdf.tsv";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    Rca,
    Proximity,
    Backbone,
    Communities,
    Portfolio,
    Dynamics,
    Powerlaw,
    Synth,
    All,
}

impl Stage {
    /// Stages chained by `all`, in order.
    pub const CHAIN: [Stage; 8] = [
        Stage::Ingest,
        Stage::Rca,
        Stage::Proximity,
        Stage::Backbone,
        Stage::Communities,
        Stage::Portfolio,
        Stage::Dynamics,
        Stage::Powerlaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Rca => "rca",
            Stage::Proximity => "proximity",
            Stage::Backbone => "backbone",
            Stage::Communities => "communities",
            Stage::Portfolio => "portfolio",
            Stage::Dynamics => "dynamics",
            Stage::Powerlaw => "powerlaw",
            Stage::Synth => "synth",
            Stage::All => "all",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::CHAIN
            .iter()
            .chain(&[Stage::Synth, Stage::All])
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Mention records; `-` reads standard input.
    pub records: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    /// `-` sends `synth` output to standard output.
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            records: None,
            aliases: None,
            taxonomy: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub first_year: i32,
    pub last_year: i32,
    /// Tools whose total exceeds this quantile of tool totals are kept.
    pub percentile: f64,
    pub level: Level,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            first_year: 2004,
            last_year: 2021,
            percentile: 0.9,
            level: Level::Division,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecializationConfig {
    pub threshold: f64,
    /// Use `RCA >= threshold` instead of `RCA > threshold`.
    pub inclusive: bool,
}

impl Default for SpecializationConfig {
    fn default() -> Self {
        SpecializationConfig {
            threshold: 1.0,
            inclusive: false,
        }
    }
}

impl SpecializationConfig {
    pub fn comparison(&self) -> Comparison {
        if self.inclusive {
            Comparison::Inclusive
        } else {
            Comparison::Strict
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    pub alpha: f64,
    pub mst: bool,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig { alpha: 0.05, mst: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityConfig {
    pub restarts: usize,
    pub binarize: bool,
    pub multiplicity_scale: u32,
    pub sweeps: usize,
    pub move_candidates: usize,
    pub merge_candidates: usize,
    pub merge_ratio: f64,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        let sbm = SbmConfig::default();
        CommunityConfig {
            restarts: 8,
            binarize: sbm.binarize,
            multiplicity_scale: sbm.multiplicity_scale,
            sweeps: sbm.sweeps,
            move_candidates: sbm.move_candidates,
            merge_candidates: sbm.merge_candidates,
            merge_ratio: sbm.merge_ratio,
        }
    }
}

impl CommunityConfig {
    pub fn sbm(&self) -> SbmConfig {
        SbmConfig {
            binarize: self.binarize,
            multiplicity_scale: self.multiplicity_scale,
            sweeps: self.sweeps,
            move_candidates: self.move_candidates,
            merge_candidates: self.merge_candidates,
            merge_ratio: self.merge_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub window_length: i32,
    pub window_step: i32,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            window_length: 5,
            window_step: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PowerlawConfig {
    /// Fixed cutoff; scanned by KS distance when absent.
    pub x_min: Option<u64>,
    /// Bootstrap replicates for the goodness-of-fit p-value; 0 skips it.
    pub bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_disciplines: usize,
    pub n_tools: usize,
    pub n_papers: usize,
    /// Planted tool blocks; 0 disables the block structure.
    pub n_blocks: usize,
    pub affinity: f64,
    pub tail_exponent: Option<f64>,
    pub first_year: i32,
    pub last_year: i32,
    pub mean_tools_per_paper: f64,
    pub second_code_prob: f64,
    pub noise: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let c = SynthConfig::default();
        let blocks = c.blocks.clone().unwrap_or(BlockSpec {
            n_blocks: 0,
            affinity: 1.0,
        });
        SynthSection {
            n_disciplines: c.n_disciplines,
            n_tools: c.n_tools,
            n_papers: c.n_papers,
            n_blocks: blocks.n_blocks,
            affinity: blocks.affinity,
            tail_exponent: c.tail_exponent,
            first_year: c.first_year,
            last_year: c.last_year,
            mean_tools_per_paper: c.mean_tools_per_paper,
            second_code_prob: c.second_code_prob,
            noise: c.noise,
        }
    }
}

impl SynthSection {
    pub fn to_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            n_disciplines: self.n_disciplines,
            n_tools: self.n_tools,
            n_papers: self.n_papers,
            blocks: (self.n_blocks > 0).then(|| BlockSpec {
                n_blocks: self.n_blocks,
                affinity: self.affinity,
            }),
            tail_exponent: self.tail_exponent,
            seed,
            first_year: self.first_year,
            last_year: self.last_year,
            mean_tools_per_paper: self.mean_tools_per_paper,
            second_code_prob: self.second_code_prob,
            noise: self.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write GraphML for the proximity network and backbone.
    pub graphml: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Top-level seed; stages derive their own by hashing it with their name.
    pub seed: u64,
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    pub specialization: SpecializationConfig,
    pub backbone: BackboneConfig,
    pub community: CommunityConfig,
    pub dynamics: DynamicsConfig,
    pub powerlaw: PowerlawConfig,
    pub synth: SynthSection,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            paths: PathsConfig::default(),
            corpus: CorpusConfig::default(),
            specialization: SpecializationConfig::default(),
            backbone: BackboneConfig::default(),
            community: CommunityConfig::default(),
            dynamics: DynamicsConfig::default(),
            powerlaw: PowerlawConfig::default(),
            synth: SynthSection::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Rejects values outside their domains before any stage runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {} to fit a TOML integer", i64::MAX));
        }
        let c = &self.corpus;
        if c.first_year > c.last_year {
            return bad(format!("year range {}..{} is empty", c.first_year, c.last_year));
        }
        if !(c.percentile > 0.0 && c.percentile < 1.0) {
            return bad(format!("percentile must lie in (0,1), got {}", c.percentile));
        }
        let t = self.specialization.threshold;
        if !(t > 0.0 && t.is_finite()) {
            return bad(format!("RCA threshold must be positive, got {t}"));
        }
        let a = self.backbone.alpha;
        if !(a > 0.0 && a < 1.0) {
            return bad(format!("alpha must lie in (0,1), got {a}"));
        }
        if self.dynamics.window_length < 1 || self.dynamics.window_step < 1 {
            return bad("window length and step must be at least 1".into());
        }
        if self.community.restarts == 0 {
            return bad("at least one restart is required".into());
        }
        if self.powerlaw.x_min == Some(0) {
            return bad("x_min must be at least 1".into());
        }
        self.community.sbm().validate()
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Sub-seed for `stage`: the first eight bytes of SHA-256 over the seed
/// (little endian) followed by the stage name.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub stage_seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub year_range: (i32, i32),
    pub level: Level,
    pub percentile: f64,
    pub threshold: u64,
    pub tools_total: usize,
    pub tools_retained: usize,
    pub disciplines: usize,
    pub filter: FilterDiagnostics,
    pub build: BuildDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximitySummary {
    pub nodes: usize,
    pub edges: usize,
    /// Tools with no specializing discipline; isolated in the network.
    pub unsupported: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRun {
    #[serde(flatten)]
    pub report: crate::community::CommunityReport,
    pub restarts: usize,
    pub levels: Vec<(usize, f64)>,
    pub refinement_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerlawRun {
    pub fit: PowerLawFit,
    pub n_tools: usize,
    pub x_min_fixed: bool,
    pub bootstrap_replicates: usize,
    pub bootstrap_p_value: Option<f64>,
}

/// Where stage outputs are assembled before being moved into place.
struct Staging {
    dir: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
}

impl Staging {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = io::sha256_file(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    fn input_bytes(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.push(FileDigest {
            path: label.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    digest: String,
    /// Standard input, read once if a stage asks for it.
    stdin: Option<Vec<u8>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let digest = config.digest()?;
        Ok(Pipeline {
            config,
            digest,
            stdin: None,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn out_dir(&self) -> &Path {
        &self.config.paths.out_dir
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir().join(name)
    }

    pub fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::All => {
                for s in Stage::CHAIN {
                    self.run_stage(s)?;
                }
                Ok(())
            }
            Stage::Synth if self.out_dir() == Path::new("-") => {
                let records = self.synth_records()?;
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                write_records_to(&mut lock, &records)?;
                lock.flush().map_err(|e| Error::io("<stdout>", e))
            }
            s => self.run_stage(s),
        }
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        let started = Instant::now();
        let out_dir = self.out_dir().to_path_buf();
        fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
        let dir = out_dir.join(format!(".staging-{}", stage.name()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut staging = Staging {
            dir: dir.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        info!("stage {} starting", stage.name());
        let result = self
            .execute(stage, &mut staging)
            .and_then(|()| self.commit(stage, &staging, started));
        let cleanup = fs::remove_dir_all(&dir);
        result?;
        cleanup.map_err(|e| Error::io(&dir, e))?;
        info!("stage {} done in {:.3}s", stage.name(), started.elapsed().as_secs_f64());
        Ok(())
    }

    fn execute(&mut self, stage: Stage, st: &mut Staging) -> Result<()> {
        match stage {
            Stage::Ingest => self.ingest(st),
            Stage::Rca => self.rca(st),
            Stage::Proximity => self.proximity(st),
            Stage::Backbone => self.backbone(st),
            Stage::Communities => self.communities(st),
            Stage::Portfolio => self.portfolio(st),
            Stage::Dynamics => self.dynamics(st),
            Stage::Powerlaw => self.powerlaw(st),
            Stage::Synth => self.synth(st),
            Stage::All => unreachable!("expanded by run"),
        }
    }

    fn commit(&self, stage: Stage, st: &Staging, started: Instant) -> Result<()> {
        let config_path = st.dir.join(files::CONFIG);
        self.config.save(&config_path)?;
        let mut outputs = Vec::new();
        for name in &st.outputs {
            outputs.push(FileDigest {
                path: name.clone(),
                sha256: io::sha256_file(&st.dir.join(name))?,
            });
        }
        let manifest = RunManifest {
            stage: stage.name().to_string(),
            version: VERSION.to_string(),
            config_digest: self.digest.clone(),
            seed: self.config.seed,
            stage_seed: derive_seed(self.config.seed, stage.name()),
            inputs: st.inputs.clone(),
            outputs,
            wall_time_seconds: started.elapsed().as_secs_f64(),
        };
        let manifest_name = format!("manifest_{}.json", stage.name());
        io::write_json(&st.dir.join(&manifest_name), &manifest)?;
        let out_dir = self.out_dir();
        let names = st
            .outputs
            .iter()
            .map(String::as_str)
            .chain([files::CONFIG, manifest_name.as_str()]);
        for name in names {
            let from = st.dir.join(name);
            let to = out_dir.join(name);
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(())
    }

    fn stage_seed(&self, stage: Stage) -> u64 {
        derive_seed(self.config.seed, stage.name())
    }

    fn taxonomy(&self, st: &mut Staging) -> Result<DisciplineTaxonomy> {
        match &self.config.paths.taxonomy {
            Some(p) => {
                st.input(p)?;
                DisciplineTaxonomy::load(p)
            }
            None => Ok(DisciplineTaxonomy::default()),
        }
    }

    fn records_input(&mut self, st: &mut Staging) -> Result<Vec<MentionRecord>> {
        let path = self
            .config
            .paths
            .records
            .clone()
            .ok_or_else(|| Error::Config("no records path configured".into()))?;
        if path == Path::new("-") {
            if self.stdin.is_none() {
                let mut buf = Vec::new();
                std::io::stdin()
                    .read_to_end(&mut buf)
                    .map_err(|e| Error::io("<stdin>", e))?;
                self.stdin = Some(buf);
            }
            let bytes = self.stdin.as_deref().unwrap_or_default();
            st.input_bytes("-", bytes);
            let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
            let delim = if first_line.contains(&b'\t') { b'\t' } else { b',' };
            parse_records(bytes, delim, "<stdin>")
        } else {
            st.input(&path)?;
            read_records(&path)
        }
    }

    /// Reads an output of an earlier stage, recording its digest.
    fn upstream(&self, st: &mut Staging, name: &str) -> Result<PathBuf> {
        let path = self.out(name);
        if !path.exists() {
            return Err(Error::MissingInput(path));
        }
        st.input(&path)?;
        Ok(path)
    }

    fn synth_records(&self) -> Result<Vec<MentionRecord>> {
        generate_corpus(&self.config.synth.to_config(self.stage_seed(Stage::Synth)))
    }

    fn synth(&mut self, st: &mut Staging) -> Result<()> {
        let records = self.synth_records()?;
        write_records(&st.path(files::SYNTH_RECORDS), &records)
    }

    fn ingest(&mut self, st: &mut Staging) -> Result<()> {
        let records = self.records_input(st)?;
        let aliases = match &self.config.paths.aliases {
            Some(p) => {
                st.input(p)?;
                AliasTable::load(p)?
            }
            None => AliasTable::default(),
        };
        let taxonomy = self.taxonomy(st)?;
        let c = &self.config.corpus;
        let known = known_names(&records);
        let curated = curate(records, &known);
        let cleaned = disambiguate(curated, &aliases);
        let (kept, filter) = filter_records(cleaned, (c.first_year, c.last_year));
        let (all, build) = build_count_matrix(&kept, &taxonomy, c.level);
        if all.is_empty() || all.total() == 0 {
            return Err(Error::Data("no usable mention records after filtering".into()));
        }
        let all = all.with_year_range(Some((c.first_year, c.last_year)));
        let filtered = percentile_filter(&all, c.percentile)?;
        if filtered.retained == 0 {
            return Err(Error::Data(format!(
                "no tool exceeds the {} percentile threshold of {} mentions",
                c.percentile, filtered.threshold
            )));
        }

        write_records(&st.path(files::CLEAN_RECORDS), &kept)?;
        all.write_long(&st.path(files::COUNTS_ALL))?;
        filtered.matrix.write_long(&st.path(files::COUNTS))?;

        let retained: std::collections::HashSet<&str> =
            filtered.matrix.cols().iter().map(String::as_str).collect();
        let mut totals: Vec<(&str, u64)> = all.cols().iter().map(String::as_str).zip(all.col_totals()).collect();
        totals.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let path = st.path(files::TOOL_TOTALS);
        let mut w = io::writer(&path)?;
        w.write_record(["software", "total", "retained"])?;
        for (name, total) in &totals {
            let flag = if retained.contains(name) { "1" } else { "0" };
            w.write_record([name, total.to_string().as_str(), flag])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let summary = IngestSummary {
            year_range: (c.first_year, c.last_year),
            level: c.level,
            percentile: c.percentile,
            threshold: filtered.threshold,
            tools_total: all.n_cols(),
            tools_retained: filtered.retained,
            disciplines: all.n_rows(),
            filter,
            build,
        };
        io::write_json(&st.path(files::INGEST), &summary)
    }

    fn counts(&self, st: &mut Staging) -> Result<CountMatrix> {
        let path = self.upstream(st, files::COUNTS)?;
        CountMatrix::read_long(&path)
    }

    fn rca(&mut self, st: &mut Staging) -> Result<()> {
        let m = self.counts(st)?;
        let s = &self.config.specialization;
        let r = rca(&m)?;
        let spec = specialize(&r, s.threshold, s.comparison())?;
        r.write_long(&st.path(files::RCA))?;
        spec.write_long(&st.path(files::SPECIALIZATION))?;
        io::write_json(&st.path(files::HEATMAP), &r.heatmap())
    }

    /// Proximity network over the retained tools, with mention totals.
    fn network(&self, m: &CountMatrix) -> Result<(ProximityNetwork, Vec<String>)> {
        let s = &self.config.specialization;
        let spec = specialize(&rca(m)?, s.threshold, s.comparison())?;
        let p = proximity(&spec, m.cols());
        let attrs: BTreeMap<String, NodeAttrs> = m
            .cols()
            .iter()
            .cloned()
            .zip(m.col_totals())
            .map(|(name, total)| {
                (
                    name,
                    NodeAttrs {
                        total_mentions: Some(total),
                        community: None,
                    },
                )
            })
            .collect();
        let unsupported = p.unsupported().into_iter().map(str::to_string).collect();
        Ok((to_network(&p, &attrs), unsupported))
    }

    fn proximity(&mut self, st: &mut Staging) -> Result<()> {
        let m = self.counts(st)?;
        let (net, unsupported) = self.network(&m)?;
        net.write_edges(&st.path(files::PROXIMITY))?;
        if self.config.output.graphml {
            write_graphml(&st.path(files::PROXIMITY_GRAPHML), &net, None)?;
        }
        let summary = ProximitySummary {
            nodes: net.num_nodes(),
            edges: net.num_edges(),
            unsupported,
        };
        io::write_json(&st.path(files::PROXIMITY_SUMMARY), &summary)
    }

    /// Reloads the proximity edge list over the tool universe of `counts`.
    fn load_network(&self, st: &mut Staging, m: &CountMatrix) -> Result<ProximityNetwork> {
        let path = self.upstream(st, files::PROXIMITY)?;
        let mut net = ProximityNetwork::read_edges(&path, m.cols().to_vec())?;
        let totals: HashMap<String, u64> = m.cols().iter().cloned().zip(m.col_totals()).collect();
        net.set_total_mentions(&totals);
        Ok(net)
    }

    fn load_communities(&self, st: &mut Staging) -> Result<CommunityAssignment> {
        let path = self.upstream(st, files::COMMUNITIES)?;
        CommunityAssignment::read(&path)
    }

    fn backbone(&mut self, st: &mut Staging) -> Result<()> {
        let m = self.counts(st)?;
        let mut net = self.load_network(st, &m)?;
        let b = &self.config.backbone;
        let edges = backbone(&net, b.alpha, b.mst)?;
        write_backbone(&st.path(files::BACKBONE), &net, &edges)?;
        if self.config.output.graphml {
            if self.out(files::COMMUNITIES).exists() {
                let a = self.load_communities(st)?;
                net.set_communities(&a.label_map());
            }
            write_graphml(&st.path(files::BACKBONE_GRAPHML), &net, Some(&edges))?;
        }
        Ok(())
    }

    fn communities(&mut self, st: &mut Staging) -> Result<()> {
        let m = self.counts(st)?;
        let net = self.load_network(st, &m)?;
        let c = &self.config.community;
        let fit = fit_sbm_restarts(&net, self.stage_seed(Stage::Communities), c.restarts, &c.sbm())?;
        fit.assignment.write(&st.path(files::COMMUNITIES))?;
        let run = CommunityRun {
            report: describe_communities(&fit.assignment, &m)?,
            restarts: c.restarts,
            levels: fit.levels,
            refinement_steps: fit.trace.len() - 1,
        };
        io::write_json(&st.path(files::COMMUNITY_REPORT), &run)
    }

    fn portfolio(&mut self, st: &mut Staging) -> Result<()> {
        let m = self.counts(st)?;
        let a = self.load_communities(st)?;
        let crca = community_rca(&m, &a)?;
        crca.rca.write_long(&st.path(files::COMMUNITY_RCA))?;
        io::write_json(&st.path(files::PORTFOLIO), &describe_communities(&a, &m)?)
    }

    fn dynamics(&mut self, st: &mut Staging) -> Result<()> {
        let records_path = self.upstream(st, files::CLEAN_RECORDS)?;
        let records = read_records(&records_path)?;
        let m = self.counts(st)?;
        let a = self.load_communities(st)?;
        let taxonomy = self.taxonomy(st)?;
        let c = &self.config.corpus;
        let d = &self.config.dynamics;
        let windows = rolling_windows(c.first_year, c.last_year, d.window_length, d.window_step)?;
        let portfolios = portfolio_series(&records, &windows, &taxonomy, c.level, m.cols(), &a)?;
        write_series(&st.path(files::DYNAMICS), &portfolios.series)?;
        let points = category_aggregate(&portfolios.series, &taxonomy);
        write_categories(&st.path(files::DYNAMICS_CATEGORIES), &points)
    }

    fn powerlaw(&mut self, st: &mut Staging) -> Result<()> {
        let path = self.upstream(st, files::TOOL_TOTALS)?;
        let mut rdr = io::reader(&path)?;
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: u64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Data(format!("bad total in {}: {rec:?}", path.display())))?;
            if v > 0 {
                data.push(v);
            }
        }
        let opts = FitOptions::default();
        let p = &self.config.powerlaw;
        let fit = fit_power_law(&data, p.x_min, &opts)?;
        let pval = if p.bootstrap > 0 {
            Some(bootstrap_p_value(&data, &fit, p.bootstrap, self.stage_seed(Stage::Powerlaw), &opts)?)
        } else {
            None
        };
        write_ccdf(&st.path(files::POWERLAW_CCDF), &data, &fit)?;
        let run = PowerlawRun {
            fit,
            n_tools: data.len(),
            x_min_fixed: p.x_min.is_some(),
            bootstrap_replicates: p.bootstrap,
            bootstrap_p_value: pval,
        };
        io::write_json(&st.path(files::POWERLAW), &run)
    }
}

/// Single-line machine-readable error for standard error.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
    .to_string()
}
