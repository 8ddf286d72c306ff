use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trialeq_core::attribution::ShapleyConfig;
use trialeq_core::classify::{ComponentMapping, FactorBlock, Thresholds};
use trialeq_core::counterfactual::{Ranking as SimRanking, Scenario};
use trialeq_core::decomposition::TrendMetric;
use trialeq_core::metrics::{Ranking, UnitKind, Weighting};
use trialeq_core::network::{SensitivityModel, StatusRule};
use trialeq_core::panel::{BlockSpec, ColumnMapping, IngestOptions, Period, MAX_YEAR, MIN_YEAR};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "TRIALEQ_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide. Never changes results.
    pub threads: usize,
    pub input: InputConfig,
    pub period: PeriodConfig,
    pub metrics: MetricsConfig,
    pub decomposition: DecompositionConfig,
    pub attribution: AttributionConfig,
    pub classification: ClassificationConfig,
    pub simulation: SimulationSection,
    pub network: NetworkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: PathBuf::from("trialeq-out"),
            threads: 0,
            input: InputConfig::default(),
            period: PeriodConfig::default(),
            metrics: MetricsConfig::default(),
            decomposition: DecompositionConfig::default(),
            attribution: AttributionConfig::default(),
            classification: ClassificationConfig::default(),
            simulation: SimulationSection::default(),
            network: NetworkSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Tab,
}

impl Delimiter {
    pub fn byte(self) -> Option<u8> {
        match self {
            Delimiter::Auto => None,
            Delimiter::Comma => Some(b','),
            Delimiter::Tab => Some(b'\t'),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub panel: Option<PathBuf>,
    /// Country predictor table; attribution, classification and network need it.
    pub predictors: Option<PathBuf>,
    /// Per-pair authorship/burden/recruitment components for as-expected pairs.
    pub components: Option<PathBuf>,
    pub delimiter: Delimiter,
    pub relax_year_bounds: bool,
    pub columns: ColumnMapping,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodConfig {
    pub start: u16,
    pub end: u16,
}

impl Default for PeriodConfig {
    fn default() -> Self {
        PeriodConfig { start: MIN_YEAR, end: MAX_YEAR }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub weighting: Weighting,
    /// Bootstrap replicates for CIS intervals; 0 disables them.
    pub bootstrap: usize,
    pub leave_out_fraction: f64,
    pub leave_out_ranking: Ranking,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { weighting: Weighting::Equal, bootstrap: 200, leave_out_fraction: 0.1, leave_out_ranking: Ranking::Cis }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Width of the year bins, in years.
    pub bin_width: u16,
    pub trend_metrics: Vec<TrendMetric>,
    /// Bootstrap replicates for trend slopes; 0 disables them.
    pub trend_bootstrap: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            bin_width: 5,
            trend_metrics: vec![TrendMetric::Gini, TrendMetric::BetweenDiseaseShare, TrendMetric::BetweenCountryShare],
            trend_bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    pub permutations: usize,
    pub bootstrap: usize,
    pub bootstrap_permutations: usize,
    pub exhaustive: bool,
    pub part1_blocks: Vec<BlockSpec>,
    pub part2_blocks: Vec<BlockSpec>,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        let s = ShapleyConfig::default();
        AttributionConfig {
            permutations: s.n_permutations,
            bootstrap: s.n_bootstrap,
            bootstrap_permutations: s.bootstrap_permutations,
            exhaustive: s.exhaustive,
            part1_blocks: BlockSpec::structural(),
            part2_blocks: BlockSpec::policy(),
        }
    }
}

impl AttributionConfig {
    pub fn shapley(&self, seed: u64) -> ShapleyConfig {
        ShapleyConfig {
            n_permutations: self.permutations,
            n_bootstrap: self.bootstrap,
            bootstrap_permutations: self.bootstrap_permutations,
            exhaustive: self.exhaustive,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationConfig {
    pub thresholds: Thresholds,
    pub blocks: Vec<FactorBlock>,
    pub mapping: ComponentMapping,
}

impl Default for ClassificationConfig {
    fn default() -> Self {
        ClassificationConfig {
            thresholds: Thresholds::default(),
            blocks: FactorBlock::policy(),
            mapping: ComponentMapping::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub bootstrap: usize,
    pub ranking: SimRanking,
    pub full_steps: Vec<f64>,
    pub targeted_steps: Vec<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            bootstrap: 200,
            ranking: SimRanking::MedianDeviation,
            full_steps: Scenario::Full.default_steps().to_vec(),
            targeted_steps: Scenario::Targeted.default_steps().to_vec(),
        }
    }
}

impl SimulationSection {
    pub fn steps(&self, s: Scenario) -> &[f64] {
        match s {
            Scenario::Full => &self.full_steps,
            Scenario::Targeted => &self.targeted_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub min_weight: u32,
    pub status_rule: StatusRule,
    pub louvain_restarts: u64,
    /// Noise draws per evolution step; 0 gives point projections only.
    pub noise_bootstrap: usize,
    pub sensitivity: SensitivityModel,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            min_weight: 2,
            status_rule: StatusRule::Modal,
            louvain_restarts: 10,
            noise_bootstrap: 1000,
            sensitivity: SensitivityModel::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.input.panel, &mut cfg.input.predictors, &mut cfg.input.components].into_iter().flatten() {
            anchor(p);
        }
        anchor(&mut cfg.out);
        Ok(cfg)
    }

    pub fn period(&self) -> CliResult<Period> {
        Period::new(self.period.start, self.period.end).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            delimiter: self.input.delimiter.byte(),
            columns: self.input.columns.clone(),
            relax_year_bounds: self.input.relax_year_bounds,
        }
    }

    pub fn panel_path(&self) -> CliResult<&Path> {
        self.input
            .panel
            .as_deref()
            .ok_or_else(|| CliError::config("no panel file: set [input].panel or pass --panel"))
    }

    /// Checks the parameters and that every referenced input file exists.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config(m));
        self.period()?;
        let panel = self.panel_path()?;
        for (what, p) in [("panel", Some(panel)), ("predictors", self.input.predictors.as_deref()), ("components", self.input.components.as_deref())] {
            if let Some(p) = p {
                if !p.is_file() {
                    return bad(format!("{what} file not found: {}", p.display()));
                }
            }
        }
        if self.decomposition.bin_width == 0 {
            return bad("decomposition.bin_width must be at least 1".into());
        }
        if !(self.metrics.leave_out_fraction > 0.0 && self.metrics.leave_out_fraction < 1.0) {
            return bad("metrics.leave_out_fraction must lie in (0, 1)".into());
        }
        for s in [Scenario::Full, Scenario::Targeted] {
            let steps = self.simulation.steps(s);
            if steps.is_empty() || steps.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                return bad(format!("simulation.{}_steps must be non-empty fractions in (0, 1]", s.name()));
            }
            if steps.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("simulation.{}_steps must be increasing", s.name()));
            }
        }
        if self.simulation.bootstrap == 0 {
            return bad("simulation.bootstrap must be at least 1".into());
        }
        if self.network.min_weight == 0 {
            return bad("network.min_weight must be at least 1".into());
        }
        let t = &self.classification.thresholds;
        if !(t.band > 0.0 && t.over >= t.band && t.significance > 0.0 && t.significance < 1.0 && t.multi > 0.0 && t.multi <= 1.0) {
            return bad("classification thresholds need 0 < band <= over, 0 < significance < 1, 0 < multi <= 1".into());
        }
        for blocks in [&self.attribution.part1_blocks, &self.attribution.part2_blocks] {
            BlockSpec::validate(blocks).map_err(|e| CliError::config(e.to_string()))?;
        }
        let fb: Vec<BlockSpec> = self.classification.blocks.iter().map(|b| b.block.clone()).collect();
        BlockSpec::validate(&fb).map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }

    /// Fails with a config error naming the predictor file when it is needed but absent.
    pub fn require_predictors(&self, stage: &str) -> CliResult<&Path> {
        match self.input.predictors.as_deref() {
            Some(p) if p.is_file() => Ok(p),
            Some(p) => Err(CliError::config(format!("{stage} needs the predictor file, not found: {}", p.display()))),
            None => Err(CliError::config(format!("{stage} needs a predictor file: set [input].predictors or pass --predictors"))),
        }
    }

    /// SHA-256 of the canonical TOML form, ignoring settings that cannot change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = 0;
        let text = toml::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Grouping used for leave-out and CIS tables.
pub const UNIT_KINDS: [UnitKind; 2] = [UnitKind::Disease, UnitKind::Country];
