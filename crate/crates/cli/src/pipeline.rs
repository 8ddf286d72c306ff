use std::time::Instant;

use serde::Serialize;
use trialeq_core::counterfactual::Scenario;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::figures::{emit_available, Figure};
use crate::output::{FileRecord, Output, Stamp};
use crate::stages::{self, InputDigest, Part};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub status: StageStatus,
    pub millis: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
    /// Every result file, in write order.
    pub files: Vec<FileRecord>,
    /// Set when a stage failed; files listed are what was written before it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial: Option<String>,
}

struct Runner {
    out: Output,
    manifest: RunManifest,
}

impl Runner {
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Output, &mut Vec<String>) -> CliResult<T>) -> CliResult<T> {
        let t0 = Instant::now();
        log::info!("stage {name}");
        let r = f(&mut self.out, &mut self.manifest.warnings);
        let millis = t0.elapsed().as_millis();
        match r {
            Ok(v) => {
                self.manifest.stages.push(StageRecord { name, status: StageStatus::Ok, millis, note: None });
                Ok(v)
            }
            Err(e) => {
                let e = e.context(name);
                self.manifest.stages.push(StageRecord { name, status: StageStatus::Failed, millis, note: Some(e.to_string()) });
                self.manifest.partial = Some(format!("stopped at stage `{name}`; later stages did not run"));
                self.finish()?;
                Err(e)
            }
        }
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.manifest.warnings.push(format!("{name}: skipped, {why}"));
        self.manifest.stages.push(StageRecord { name, status: StageStatus::Skipped, millis: 0, note: Some(why.to_string()) });
    }

    fn finish(&mut self) -> CliResult<()> {
        self.manifest.files = self.out.files().to_vec();
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(|e| CliError::data(e.to_string()))?;
        bytes.push(b'\n');
        self.out.raw(MANIFEST, bytes)
    }
}

/// Runs every stage in order and writes results plus `manifest.json` to `cfg.out`.
///
/// Stages needing predictors are skipped with a warning when no predictor
/// file is configured. A failing stage stops the run; the manifest is still
/// written and marked partial.
pub fn run_pipeline(cfg: &RunConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let hash = cfg.hash();
    let out = Output::create(&cfg.out, Stamp::new(cfg.seed, &hash))?;
    let manifest = RunManifest {
        tool: "trialeq",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_hash: hash,
        inputs: Vec::new(),
        stages: Vec::new(),
        warnings: Vec::new(),
        files: Vec::new(),
        partial: None,
    };
    let mut r = Runner { out, manifest };

    let inputs = r.stage("ingest", |out, warnings| {
        let inputs = stages::load_inputs(cfg)?;
        for rej in &inputs.summary.rejected {
            warnings.push(format!("ingest: line {} rejected: {}", rej.line, rej.reason));
        }
        if let Some(t) = &inputs.predictors {
            let missing = stages::unmatched_countries(&inputs.panel, t);
            if !missing.is_empty() {
                let list: Vec<String> = missing.iter().map(|c| c.to_string()).collect();
                warnings.push(format!("ingest: {} panel countries lack predictors: {}", list.len(), list.join(" ")));
            }
        }
        stages::write_ingest(out, &inputs)?;
        Ok(inputs)
    })?;
    r.manifest.inputs = inputs.digests.clone();

    r.stage("metrics", |out, _| {
        let m = stages::compute_metrics(cfg, &inputs)?;
        stages::write_metrics(out, &m)
    })?;
    r.stage("decomposition", |out, warnings| {
        let d = stages::compute_decomposition(cfg, &inputs.panel, warnings)?;
        stages::write_decomposition(out, &d)
    })?;

    let mut classified = None;
    match &inputs.predictors {
        Some(table) => {
            r.stage("attribution", |out, _| {
                for part in [Part::One, Part::Two] {
                    let a = stages::compute_attribution(cfg, &inputs.panel, table, part, stages::AttributionWant::ALL)?;
                    stages::write_attribution(out, &a)?;
                }
                Ok(())
            })?;
            classified = Some(r.stage("classification", |out, warnings| {
                let c = stages::compute_classification(cfg, &inputs, table, warnings)?;
                stages::write_classification(out, &c)?;
                Ok(c)
            })?);
        }
        None => {
            r.skip("attribution", "no predictor file configured");
            r.skip("classification", "no predictor file configured");
        }
    }

    let sim = r.stage("simulation", |out, _| {
        let s = stages::compute_simulation(cfg, &inputs.panel, &[Scenario::Full, Scenario::Targeted])?;
        stages::write_simulation(out, &s)?;
        Ok(s)
    })?;

    match &classified {
        Some(c) => r.stage("network", |out, _| {
            let n = stages::compute_network(cfg, &c.pairs, Some(&sim))?;
            stages::write_network(out, &n)
        })?,
        None => r.skip("network", "needs classification, which needs predictors"),
    }

    r.stage("figures", |out, _| {
        let dir = out.dir().to_path_buf();
        emit_available(&dir, out, &Figure::ALL)
    })?;

    r.finish()?;
    Ok(r.manifest)
}
