//! Pipeline stages: each `compute_*` is pure, each `write_*` emits its tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use trialeq_core::attribution::{
    build_design, hierarchical_partition, part1_response, residualize_part2, shapley_r2, BlockStep, Design, Exclusion,
    OlsFit, ShapleyResult,
};
use trialeq_core::classify::{
    assign_factor_as_expected, assign_factor_overperforming, classify_fits, disease_fits, ClassifiedPair, Components,
    DiseaseFits, Factor, Status,
};
use trialeq_core::counterfactual::{
    efficiency, national_pbr, simulate, EfficiencyComparison, NationalTable, ScenarioResult, Scenario, SimulationConfig,
};
use trialeq_core::decomposition::{
    temporal_trend, theil_by_bins, theil_decompose, variance_partition, BinnedTheil, PartitionReport, TheilDecomposition,
    TrendEstimate, TrendMetric,
};
use trialeq_core::metrics::{
    alignment_by_income, cis_all, leave_out_gini, lorenz, national_pbrs, pair_cis, pair_gini, pair_pbrs, pbr_table,
    si_table, units_of, AlignmentFit, CisRecord, LeaveOut, LorenzCurve, PbrTable, SiRecord, UnitKind, Weighting,
};
use trialeq_core::network::{
    build_graph, delta_g_from, edge_redistribution, evolve, louvain_restarts, metrics_with, EdgeRedistribution,
    EvolvableMetrics, EvolvedStep, NetworkMetrics, Partition, ResearchGraph,
};
use trialeq_core::panel::{
    bin_start, emit_panel, ingest_panel, ingest_predictors, BlockSpec, CountryCode, DiseaseCategory, Panel, Predictor,
    PredictorTable, RejectedRow,
};
use trialeq_core::stats::{BootstrapSpec, ResamplingUnit};

use crate::config::{RunConfig, UNIT_KINDS};
use crate::error::{CliError, CliResult};
use crate::output::{num, opt, sha256_hex, Output};

fn kind_name(k: UnitKind) -> &'static str {
    match k {
        UnitKind::Disease => "disease",
        UnitKind::Country => "country",
    }
}

fn disease_name(d: Option<DiseaseCategory>) -> String {
    d.map(|d| d.name().to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------- ingest

#[derive(Clone, Debug, Serialize)]
pub struct IngestSummary {
    pub rows_read: usize,
    pub duplicates: usize,
    pub rejected: Vec<RejectedRow>,
    pub cells: usize,
    pub countries: usize,
    pub diseases: usize,
    pub years: Vec<u16>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

pub struct Inputs {
    pub panel: Panel,
    pub summary: IngestSummary,
    pub predictors: Option<PredictorTable>,
    /// Per-pair overrides read from the components file.
    pub components: Option<BTreeMap<(CountryCode, DiseaseCategory), PartialComponents>>,
    pub digests: Vec<InputDigest>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PartialComponents {
    pub authorship: Option<f64>,
    pub burden: Option<f64>,
    pub recruitment: Option<f64>,
}

fn read_bytes(role: &'static str, path: &Path, digests: &mut Vec<InputDigest>) -> CliResult<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("{role} file {}: {e}", path.display())))?;
    digests.push(InputDigest { role, path: path.display().to_string(), sha256: sha256_hex(&bytes) });
    Ok(bytes)
}

/// Reads the panel and whichever optional inputs the config names.
pub fn load_inputs(cfg: &RunConfig) -> CliResult<Inputs> {
    let mut digests = Vec::new();
    let panel_path = cfg.panel_path()?;
    let bytes = read_bytes("panel", panel_path, &mut digests)?;
    let report = ingest_panel(bytes.as_slice(), &cfg.ingest_options())
        .map_err(|e| CliError::from(e).context(&panel_path.display().to_string()))?;
    for r in &report.rejected {
        log::warn!("{}: line {} rejected: {}", panel_path.display(), r.line, r.reason);
    }
    let panel = report.panel;
    let summary = IngestSummary {
        rows_read: report.rows_read,
        duplicates: report.duplicates,
        rejected: report.rejected,
        cells: panel.len(),
        countries: panel.countries().len(),
        diseases: panel.diseases().len(),
        years: panel.years().into_iter().collect(),
    };
    let predictors = match &cfg.input.predictors {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::config(format!("predictor file not found: {}", p.display())));
            }
            let bytes = read_bytes("predictors", p, &mut digests)?;
            Some(
                ingest_predictors(bytes.as_slice(), cfg.input.delimiter.byte())
                    .map_err(|e| CliError::from(e).context(&p.display().to_string()))?,
            )
        }
        None => None,
    };
    let components = match &cfg.input.components {
        Some(p) => {
            let bytes = read_bytes("components", p, &mut digests)?;
            Some(read_components(&bytes, cfg.input.delimiter.byte()).map_err(|e| e.context(&p.display().to_string()))?)
        }
        None => None,
    };
    Ok(Inputs { panel, summary, predictors, components, digests })
}

fn read_components(
    bytes: &[u8],
    delimiter: Option<u8>,
) -> CliResult<BTreeMap<(CountryCode, DiseaseCategory), PartialComponents>> {
    let first = std::str::from_utf8(bytes).unwrap_or("").lines().next().unwrap_or("");
    let delim = delimiter.unwrap_or_else(|| trialeq_core::panel::detect_delimiter(first));
    let mut r = csv::ReaderBuilder::new().delimiter(delim).from_reader(bytes);
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| CliError::data(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(di)) = (col("country"), col("disease")) else {
        return Err(CliError::data("components file needs `country` and `disease` columns"));
    };
    let fields = [col("authorship"), col("burden"), col("recruitment")];
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(e.to_string()))?;
        let line = i + 2;
        let country = CountryCode::parse(&rec[ci]).map_err(|e| CliError::data(format!("line {line}: {e}")))?;
        let disease = DiseaseCategory::parse(&rec[di]).map_err(|e| CliError::data(format!("line {line}: {e}")))?;
        let mut vals = [None; 3];
        for (v, f) in vals.iter_mut().zip(fields) {
            if let Some(j) = f {
                let s = rec[j].trim();
                if !s.is_empty() {
                    *v = Some(s.parse::<f64>().map_err(|_| CliError::data(format!("line {line}: non-numeric `{s}`")))?);
                }
            }
        }
        out.insert((country, disease), PartialComponents { authorship: vals[0], burden: vals[1], recruitment: vals[2] });
    }
    Ok(out)
}

pub fn write_ingest(out: &mut Output, inputs: &Inputs) -> CliResult<()> {
    let mut buf = Vec::new();
    emit_panel(&inputs.panel, &mut buf, b',')?;
    let text = String::from_utf8(buf).map_err(|e| CliError::data(e.to_string()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Vec<String>> = {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        r.records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::data(e.to_string()))?
    };
    out.csv("panel.csv", &header, rows)?;
    out.json("ingest.json", &inputs.summary)
}

// ---------------------------------------------------------------- metrics

#[derive(Clone, Debug, Serialize)]
pub struct GiniSummary {
    pub pair_gini: f64,
    pub pair_gini_participant_weighted: f64,
    pub national_gini: f64,
    pub lorenz_gini: f64,
    pub n_pairs: usize,
    pub zero_participation_pairs: usize,
}

pub struct MetricsResult {
    pub pairs: PbrTable,
    pub national: PbrTable,
    pub si: Vec<SiRecord>,
    pub gini: GiniSummary,
    pub lorenz: LorenzCurve,
    pub cis: Vec<CisRecord>,
    pub leave_out: Vec<(UnitKind, LeaveOut)>,
    pub alignment: Option<Vec<AlignmentFit>>,
}

pub fn compute_pbr(cfg: &RunConfig, panel: &Panel) -> CliResult<(PbrTable, PbrTable)> {
    let period = cfg.period()?;
    Ok((pair_pbrs(panel, period)?, national_pbrs(panel, period)?))
}

pub fn compute_gini(cfg: &RunConfig, panel: &Panel, pairs: &PbrTable, national: &PbrTable) -> CliResult<(GiniSummary, LorenzCurve)> {
    let period = cfg.period()?;
    let curve = lorenz(panel, period)?;
    let g = GiniSummary {
        pair_gini: pair_gini(panel, period, Weighting::Equal)?,
        pair_gini_participant_weighted: pair_gini(panel, period, Weighting::ParticipantWeighted)?,
        national_gini: trialeq_core::metrics::gini(&national.values())?,
        lorenz_gini: curve.gini,
        n_pairs: pairs.records.len(),
        zero_participation_pairs: pairs.zero_participation(),
    };
    Ok((g, curve))
}

pub fn compute_cis(cfg: &RunConfig, panel: &Panel) -> CliResult<Vec<CisRecord>> {
    let period = cfg.period()?;
    let spec = (cfg.metrics.bootstrap > 0).then(|| BootstrapSpec::new(cfg.metrics.bootstrap, ResamplingUnit::Pair, cfg.seed));
    let mut all = Vec::new();
    for kind in UNIT_KINDS {
        all.extend(cis_all(panel, period, &units_of(panel, kind), cfg.metrics.weighting, spec.as_ref())?);
    }
    Ok(all)
}

pub fn compute_leave_out(cfg: &RunConfig, panel: &Panel) -> CliResult<Vec<(UnitKind, LeaveOut)>> {
    let period = cfg.period()?;
    UNIT_KINDS
        .iter()
        .map(|&k| {
            let lo = leave_out_gini(panel, period, k, cfg.metrics.leave_out_ranking, cfg.metrics.leave_out_fraction, cfg.metrics.weighting)?;
            Ok((k, lo))
        })
        .collect()
}

pub fn compute_metrics(cfg: &RunConfig, inputs: &Inputs) -> CliResult<MetricsResult> {
    let panel = &inputs.panel;
    let period = cfg.period()?;
    let (pairs, national) = compute_pbr(cfg, panel)?;
    let (gini, lorenz) = compute_gini(cfg, panel, &pairs, &national)?;
    Ok(MetricsResult {
        si: si_table(panel, period),
        cis: compute_cis(cfg, panel)?,
        leave_out: compute_leave_out(cfg, panel)?,
        alignment: inputs.predictors.as_ref().map(|t| alignment_by_income(panel, t, period)),
        pairs,
        national,
        gini,
        lorenz,
    })
}

pub fn write_pbr(out: &mut Output, pairs: &PbrTable, national: &PbrTable) -> CliResult<()> {
    let rows = pairs.records.iter().map(|r| {
        vec![
            r.country.to_string(),
            disease_name(r.disease),
            num(r.participants),
            num(r.dalys),
            num(r.pbr),
            opt(r.log_pbr.value()),
        ]
    });
    out.csv("pbr_pairs.csv", &["country", "disease", "participants", "dalys", "pbr", "log_pbr"], rows)?;
    let rows = national
        .records
        .iter()
        .map(|r| vec![r.country.to_string(), num(r.participants), num(r.dalys), num(r.pbr), opt(r.log_pbr.value())]);
    out.csv("pbr_national.csv", &["country", "participants", "dalys", "pbr", "log_pbr"], rows)
}

pub fn write_si(out: &mut Output, si: &[SiRecord]) -> CliResult<()> {
    let rows = si.iter().map(|r| vec![r.country.to_string(), r.disease.name().to_string(), num(r.si)]);
    out.csv("si.csv", &["country", "disease", "si"], rows)
}

pub fn write_gini(out: &mut Output, g: &GiniSummary) -> CliResult<()> {
    out.json("gini.json", g)
}

pub fn write_lorenz(out: &mut Output, curve: &LorenzCurve) -> CliResult<()> {
    let rows = curve.points.iter().map(|(x, y)| vec![num(*x), num(*y)]);
    out.csv("lorenz.csv", &["burden_share", "participant_share"], rows)
}

pub fn write_cis(out: &mut Output, cis: &[CisRecord]) -> CliResult<()> {
    let rows = cis.iter().map(|r| {
        vec![
            kind_name(r.unit.kind()).to_string(),
            r.unit.label(),
            num(r.cis_percent),
            num(r.gini_all),
            num(r.gini_without),
            opt(r.ci_low),
            opt(r.ci_high),
        ]
    });
    out.csv("cis.csv", &["kind", "unit", "cis_percent", "gini_all", "gini_without", "ci_low", "ci_high"], rows)
}

pub fn write_leave_out(out: &mut Output, lo: &[(UnitKind, LeaveOut)]) -> CliResult<()> {
    #[derive(Serialize)]
    struct Row {
        kind: &'static str,
        gini_before: f64,
        gini_after: f64,
        excluded: Vec<String>,
    }
    let rows: Vec<Row> = lo
        .iter()
        .map(|(k, l)| Row {
            kind: kind_name(*k),
            gini_before: l.gini_before,
            gini_after: l.gini_after,
            excluded: l.excluded.iter().map(|u| u.label()).collect(),
        })
        .collect();
    out.json("leave_out.json", &rows)
}

pub fn write_alignment(out: &mut Output, fits: &[AlignmentFit]) -> CliResult<()> {
    let rows = fits.iter().map(|f| {
        vec![
            f.group.to_string(),
            num(f.beta),
            num(f.intercept),
            num(f.p_value),
            num(f.r_squared),
            f.n.to_string(),
            f.dropped_zero.to_string(),
        ]
    });
    out.csv("alignment.csv", &["income_group", "beta", "intercept", "p_value", "r_squared", "n", "dropped_zero"], rows)
}

pub fn write_metrics(out: &mut Output, m: &MetricsResult) -> CliResult<()> {
    write_pbr(out, &m.pairs, &m.national)?;
    write_si(out, &m.si)?;
    write_gini(out, &m.gini)?;
    write_lorenz(out, &m.lorenz)?;
    write_cis(out, &m.cis)?;
    write_leave_out(out, &m.leave_out)?;
    if let Some(a) = &m.alignment {
        write_alignment(out, a)?;
    }
    Ok(())
}

// ---------------------------------------------------------- decomposition

#[derive(Clone, Debug, Serialize)]
pub struct TheilPair {
    /// Raw pair PBRs over the period (zero PBRs excluded).
    pub disease: TheilDecomposition,
    pub country: TheilDecomposition,
}

#[derive(Clone, Debug, Serialize)]
pub struct NamedTrend {
    pub metric: TrendMetric,
    pub bin_width: u16,
    #[serde(flatten)]
    pub estimate: TrendEstimate,
}

pub struct DecompositionResult {
    pub theil: TheilPair,
    pub timeline: Vec<(UnitKind, Vec<BinnedTheil>)>,
    pub partition: PartitionReport,
    pub trends: Vec<NamedTrend>,
}

pub fn compute_theil(cfg: &RunConfig, panel: &Panel) -> CliResult<TheilPair> {
    let pairs = pair_pbrs(panel, cfg.period()?)?;
    Ok(TheilPair {
        disease: theil_decompose(&pairs.records, UnitKind::Disease)?,
        country: theil_decompose(&pairs.records, UnitKind::Country)?,
    })
}

pub fn compute_timeline(cfg: &RunConfig, panel: &Panel) -> CliResult<Vec<(UnitKind, Vec<BinnedTheil>)>> {
    let restricted = panel.restrict(cfg.period()?)?;
    UNIT_KINDS
        .iter()
        .map(|&k| Ok((k, theil_by_bins(&restricted, k, cfg.decomposition.bin_width)?)))
        .collect()
}

pub fn compute_partition(cfg: &RunConfig, panel: &Panel) -> CliResult<PartitionReport> {
    let yearly = pbr_table(&panel.restrict(cfg.period()?)?);
    Ok(variance_partition(&yearly.records)?)
}

/// Trend fits for `metrics`; empty with a warning when fewer than three year bins exist.
pub fn compute_trends(
    cfg: &RunConfig,
    panel: &Panel,
    metrics: &[TrendMetric],
    warnings: &mut Vec<String>,
) -> CliResult<Vec<NamedTrend>> {
    let period = cfg.period()?;
    let width = cfg.decomposition.bin_width;
    let bins: BTreeSet<u16> =
        panel.years().into_iter().filter(|y| period.contains(*y)).map(|y| bin_start(y, width)).collect();
    if bins.len() < 3 {
        warnings.push(format!("decomposition: trend skipped, {} year bin(s) of width {width} (need 3)", bins.len()));
        return Ok(Vec::new());
    }
    let spec = (cfg.decomposition.trend_bootstrap > 0)
        .then(|| BootstrapSpec::new(cfg.decomposition.trend_bootstrap, ResamplingUnit::Observation, cfg.seed));
    metrics
        .iter()
        .map(|&m| {
            let estimate = temporal_trend(panel, period, m, width, spec.as_ref())?;
            Ok(NamedTrend { metric: m, bin_width: width, estimate })
        })
        .collect()
}

pub fn compute_decomposition(cfg: &RunConfig, panel: &Panel, warnings: &mut Vec<String>) -> CliResult<DecompositionResult> {
    Ok(DecompositionResult {
        theil: compute_theil(cfg, panel)?,
        timeline: compute_timeline(cfg, panel)?,
        partition: compute_partition(cfg, panel)?,
        trends: compute_trends(cfg, panel, &cfg.decomposition.trend_metrics, warnings)?,
    })
}

pub fn write_theil(out: &mut Output, t: &TheilPair) -> CliResult<()> {
    out.json("theil.json", t)
}

pub fn write_timeline(out: &mut Output, timeline: &[(UnitKind, Vec<BinnedTheil>)]) -> CliResult<()> {
    let mut rows = Vec::new();
    for (k, bins) in timeline {
        for b in bins {
            let d = &b.decomposition;
            rows.push(vec![
                kind_name(*k).to_string(),
                b.bin_start.to_string(),
                b.bin_end.to_string(),
                num(d.total),
                num(d.between),
                num(d.within),
                num(d.between_share()),
                num(d.within_share()),
            ]);
        }
    }
    out.csv(
        "theil_timeline.csv",
        &["grouping", "bin_start", "bin_end", "total", "between", "within", "between_share", "within_share"],
        rows,
    )
}

pub fn write_partition(out: &mut Output, p: &PartitionReport) -> CliResult<()> {
    out.json("variance_partition.json", p)
}

pub fn write_trends(out: &mut Output, t: &[NamedTrend]) -> CliResult<()> {
    out.json("trend.json", &t)
}

pub fn write_decomposition(out: &mut Output, d: &DecompositionResult) -> CliResult<()> {
    write_theil(out, &d.theil)?;
    write_timeline(out, &d.timeline)?;
    write_partition(out, &d.partition)?;
    write_trends(out, &d.trends)
}

// ------------------------------------------------------------ attribution

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    One,
    Two,
}

impl Part {
    pub fn number(self) -> u8 {
        match self {
            Part::One => 1,
            Part::Two => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualSummary {
    pub fit: OlsFit,
    pub residual_variance_fraction: f64,
    pub dropped: Vec<CountryCode>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttributionPart {
    pub part: u8,
    pub n_countries: usize,
    pub excluded_predictors: Vec<(Predictor, Exclusion)>,
    pub blocks: Vec<BlockSpec>,
    pub hierarchical: Option<Vec<BlockStep>>,
    pub shapley: Option<ShapleyResult>,
    /// Part 2 only: the size-adjustment regression.
    pub residualization: Option<ResidualSummary>,
    #[serde(skip)]
    pub residuals: Vec<(CountryCode, f64)>,
}

/// What to run for a part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttributionWant {
    pub hierarchical: bool,
    pub shapley: bool,
}

impl AttributionWant {
    pub const ALL: AttributionWant = AttributionWant { hierarchical: true, shapley: true };
}

fn design_for(
    response: &BTreeMap<CountryCode, f64>,
    table: &PredictorTable,
    blocks: &[BlockSpec],
) -> CliResult<Design> {
    let wanted: Vec<Predictor> = blocks.iter().flat_map(|b| b.members.iter().copied()).collect();
    Ok(build_design(response, table, &wanted)?)
}

pub fn compute_attribution(
    cfg: &RunConfig,
    panel: &Panel,
    table: &PredictorTable,
    part: Part,
    want: AttributionWant,
) -> CliResult<AttributionPart> {
    let response = part1_response(panel, cfg.period()?);
    let (response, blocks, residualization) = match part {
        Part::One => (response, cfg.attribution.part1_blocks.clone(), None),
        Part::Two => {
            let r = residualize_part2(&response, table)?;
            let summary = ResidualSummary {
                fit: r.fit.clone(),
                residual_variance_fraction: r.residual_variance_fraction,
                dropped: r.dropped.clone(),
            };
            (r.as_response(), cfg.attribution.part2_blocks.clone(), Some(summary))
        }
    };
    let design = design_for(&response, table, &blocks)?;
    let shapley_cfg = cfg.attribution.shapley(cfg.seed);
    Ok(AttributionPart {
        part: part.number(),
        n_countries: design.n(),
        excluded_predictors: design.excluded.clone(),
        hierarchical: if want.hierarchical { Some(hierarchical_partition(&design, &blocks)?) } else { None },
        shapley: if want.shapley { Some(shapley_r2(&design, &blocks, &shapley_cfg)?) } else { None },
        residuals: if part == Part::Two { response.into_iter().collect() } else { Vec::new() },
        blocks,
        residualization,
    })
}

pub fn write_attribution(out: &mut Output, a: &AttributionPart) -> CliResult<()> {
    out.json(&format!("attribution_part{}.json", a.part), a)?;
    if let Some(s) = &a.shapley {
        let block_of = |p: Predictor| {
            a.blocks.iter().find(|b| b.members.contains(&p)).map(|b| b.name.clone()).unwrap_or_default()
        };
        let rows = s.shares.iter().map(|sh| {
            vec![
                sh.predictor.to_string(),
                block_of(sh.predictor),
                num(sh.phi),
                num(sh.percent),
                opt(sh.ci_low),
                opt(sh.ci_high),
            ]
        });
        out.csv(
            &format!("shapley_part{}.csv", a.part),
            &["predictor", "block", "phi", "percent", "ci_low", "ci_high"],
            rows,
        )?;
    }
    if a.part == 2 && !a.residuals.is_empty() {
        let rows = a.residuals.iter().map(|(c, r)| vec![c.to_string(), num(*r)]);
        out.csv("residuals_part2.csv", &["country", "residual"], rows)?;
    }
    Ok(())
}

// --------------------------------------------------------- classification

#[derive(Clone, Debug, Serialize)]
pub struct DiseaseDiagnosis {
    pub disease: String,
    pub n: usize,
    pub r2: f64,
    pub limiting_factor: Factor,
    pub multiple_factor_flag: bool,
    /// (factor, mean |significant coefficient|, significant count)
    pub block_scores: Vec<(Factor, f64, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassificationSummary {
    pub n_pairs: usize,
    pub status_counts: BTreeMap<Status, usize>,
    pub factor_counts: BTreeMap<Factor, usize>,
    pub thresholds: trialeq_core::classify::Thresholds,
    pub mapping: trialeq_core::classify::ComponentMapping,
    pub components_source: &'static str,
    pub diseases: Vec<DiseaseDiagnosis>,
    pub skipped_diseases: Vec<(String, String)>,
}

pub struct ClassificationResult {
    pub pairs: Vec<ClassifiedPair>,
    pub summary: ClassificationSummary,
}

/// Authorship, burden and recruitment for every panel pair.
///
/// Defaults are DALYs for burden, participants for recruitment and zero
/// authorship; values in the components file override them field by field.
fn pair_components(
    panel: &Panel,
    cfg: &RunConfig,
    overrides: Option<&BTreeMap<(CountryCode, DiseaseCategory), PartialComponents>>,
) -> CliResult<BTreeMap<(CountryCode, DiseaseCategory), Components>> {
    let mut out: BTreeMap<_, _> = panel
        .pair_totals(cfg.period()?)
        .into_iter()
        .map(|(k, t)| (k, Components { authorship: 0.0, burden: t.dalys, recruitment: t.participants }))
        .collect();
    for (k, o) in overrides.into_iter().flatten() {
        let c = out.entry(*k).or_default();
        c.authorship = o.authorship.unwrap_or(c.authorship);
        c.burden = o.burden.unwrap_or(c.burden);
        c.recruitment = o.recruitment.unwrap_or(c.recruitment);
    }
    Ok(out)
}

pub fn compute_classification(
    cfg: &RunConfig,
    inputs: &Inputs,
    table: &PredictorTable,
    warnings: &mut Vec<String>,
) -> CliResult<ClassificationResult> {
    let period = cfg.period()?;
    let t = &cfg.classification.thresholds;
    let fits: DiseaseFits = disease_fits(&inputs.panel, table, period, &cfg.classification.blocks, t)?;
    for (d, why) in &fits.skipped {
        warnings.push(format!("classification: disease `{}` skipped: {why}", d.name()));
    }
    let mut pairs = classify_fits(&fits, t);
    let cis: BTreeMap<(CountryCode, DiseaseCategory), f64> =
        pair_cis(&inputs.panel, period, cfg.metrics.weighting)?.into_iter().collect();
    for p in &mut pairs {
        p.cis_contribution = cis.get(&(p.country, p.disease)).copied();
    }
    if pairs.iter().any(|p| p.status == Status::OverPerforming) {
        if let Err(e) = assign_factor_overperforming(&mut pairs) {
            warnings.push(format!("classification: over-performing pairs left unassigned: {e}"));
        }
    }
    if pairs.iter().any(|p| p.status == Status::AsExpected) {
        let comps = pair_components(&inputs.panel, cfg, inputs.components.as_ref())?;
        assign_factor_as_expected(&mut pairs, &comps, &cfg.classification.mapping)?;
    }
    let mut status_counts = BTreeMap::new();
    let mut factor_counts = BTreeMap::new();
    for p in &pairs {
        *status_counts.entry(p.status).or_insert(0) += 1;
        *factor_counts.entry(p.factor).or_insert(0) += 1;
    }
    let diseases = fits
        .fits
        .iter()
        .map(|f| DiseaseDiagnosis {
            disease: f.disease.name().to_string(),
            n: f.fit.n,
            r2: f.fit.r2,
            limiting_factor: f.diagnosis.winner,
            multiple_factor_flag: f.diagnosis.multiple_factor_flag,
            block_scores: f.diagnosis.blocks.clone(),
        })
        .collect();
    let summary = ClassificationSummary {
        n_pairs: pairs.len(),
        status_counts,
        factor_counts,
        thresholds: *t,
        mapping: cfg.classification.mapping,
        components_source: if inputs.components.is_some() { "file with panel defaults" } else { "panel defaults" },
        diseases,
        skipped_diseases: fits.skipped.iter().map(|(d, w)| (d.name().to_string(), w.clone())).collect(),
    };
    Ok(ClassificationResult { pairs, summary })
}

pub fn write_classification(out: &mut Output, c: &ClassificationResult) -> CliResult<()> {
    let rows = c.pairs.iter().map(|p| {
        vec![
            p.country.to_string(),
            p.disease.name().to_string(),
            num(p.residual),
            p.status.name().to_string(),
            p.factor.name().to_string(),
            p.factor_tie.to_string(),
            opt(p.cis_contribution),
        ]
    });
    out.csv("classification.csv", &["country", "disease", "residual", "status", "factor", "factor_tie", "cis"], rows)?;
    out.json("classification_summary.json", &c.summary)
}

// ------------------------------------------------------------- simulation

pub struct SimulationResult {
    pub national: NationalTable,
    pub full: Option<ScenarioResult>,
    pub targeted: Option<ScenarioResult>,
    pub efficiency: Option<EfficiencyComparison>,
}

impl SimulationResult {
    pub fn scenario(&self, s: Scenario) -> Option<&ScenarioResult> {
        match s {
            Scenario::Full => self.full.as_ref(),
            Scenario::Targeted => self.targeted.as_ref(),
        }
    }
}

pub fn compute_simulation(cfg: &RunConfig, panel: &Panel, scenarios: &[Scenario]) -> CliResult<SimulationResult> {
    let national = national_pbr(panel, cfg.period()?)?;
    let sim_cfg = SimulationConfig { bootstrap_iters: cfg.simulation.bootstrap, seed: cfg.seed, ranking: cfg.simulation.ranking };
    let run = |s: Scenario| -> CliResult<Option<ScenarioResult>> {
        if scenarios.contains(&s) {
            Ok(Some(simulate(s, &national, cfg.simulation.steps(s), &sim_cfg)?))
        } else {
            Ok(None)
        }
    };
    let full = run(Scenario::Full)?;
    let targeted = run(Scenario::Targeted)?;
    let efficiency = match (&full, &targeted) {
        (Some(f), Some(t)) => Some(efficiency(f, t)?),
        _ => None,
    };
    Ok(SimulationResult { national, full, targeted, efficiency })
}

/// Row label of a waterfall step: Baseline, Top N%, or All Countries.
pub fn step_label(fraction: f64) -> String {
    if fraction == 0.0 {
        "Baseline".into()
    } else if fraction >= 1.0 {
        "All Countries".into()
    } else {
        format!("Top {}%", (fraction * 100.0).round())
    }
}

pub fn write_simulation(out: &mut Output, s: &SimulationResult) -> CliResult<()> {
    let median = s.national.median;
    let rows = s.national.rows.iter().map(|r| {
        vec![
            r.country.to_string(),
            num(r.participants_total),
            num(r.dalys_total),
            num(r.participant_share),
            num(r.daly_share),
            num(r.pbr),
            if r.pbr > 0.0 { num((r.pbr / median).ln()) } else { String::new() },
        ]
    });
    out.csv(
        "national_pbr.csv",
        &["country", "participants", "dalys", "participant_share", "daly_share", "pbr", "log_deviation_from_median"],
        rows,
    )?;
    for r in [&s.full, &s.targeted].into_iter().flatten() {
        let rows = r.steps.iter().map(|st| {
            vec![
                step_label(st.fraction),
                num(st.fraction),
                st.countries_adjusted.to_string(),
                num(st.gini),
                num(st.pct_reduction),
                num(st.ci_low),
                num(st.ci_high),
            ]
        });
        out.csv(
            &format!("waterfall_{}.csv", r.scenario.name()),
            &["step", "fraction", "countries", "gini", "pct_reduction", "ci_low", "ci_high"],
            rows,
        )?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        n_countries: usize,
        median: f64,
        baseline_gini: f64,
        excluded: &'a [CountryCode],
        full: Option<&'a ScenarioResult>,
        targeted: Option<&'a ScenarioResult>,
        efficiency: Option<&'a EfficiencyComparison>,
    }
    out.json(
        "simulation.json",
        &Summary {
            n_countries: s.national.rows.len(),
            median,
            baseline_gini: s.national.gini,
            excluded: &s.national.excluded,
            full: s.full.as_ref(),
            targeted: s.targeted.as_ref(),
            efficiency: s.efficiency.as_ref(),
        },
    )
}

// ---------------------------------------------------------------- network

pub struct NetworkResult {
    pub graph: ResearchGraph,
    pub partition: Partition,
    pub metrics: NetworkMetrics,
    /// Evolution along each simulated scenario's Gini reductions.
    pub evolution: Vec<(Scenario, Vec<EvolvedStep>)>,
    pub redistribution: Option<EdgeRedistribution>,
}

pub fn compute_graph(cfg: &RunConfig, pairs: &[ClassifiedPair]) -> CliResult<(ResearchGraph, Partition, NetworkMetrics)> {
    let n = &cfg.network;
    let graph = build_graph(pairs, n.min_weight, n.status_rule, &cfg.classification.thresholds)?;
    let partition = louvain_restarts(&graph, cfg.seed, n.louvain_restarts);
    let metrics = metrics_with(&graph, &partition)?;
    Ok((graph, partition, metrics))
}

pub fn compute_network(cfg: &RunConfig, pairs: &[ClassifiedPair], sim: Option<&SimulationResult>) -> CliResult<NetworkResult> {
    let (graph, partition, metrics) = compute_graph(cfg, pairs)?;
    let base = EvolvableMetrics::from(&metrics);
    let mut evolution = Vec::new();
    for s in [Scenario::Full, Scenario::Targeted] {
        if let Some(r) = sim.and_then(|x| x.scenario(s)) {
            let steps = evolve(&base, &cfg.network.sensitivity, &delta_g_from(r), cfg.network.noise_bootstrap, cfg.seed)?;
            evolution.push((s, steps));
        }
    }
    // edges are redistributed at the most complete alignment simulated
    let redistribution = match evolution.first().and_then(|(_, st)| st.last()) {
        Some(last) => Some(edge_redistribution(&graph, last.factor_homophily.value)?),
        None => None,
    };
    Ok(NetworkResult { graph, partition, metrics, evolution, redistribution })
}

pub fn write_graph(out: &mut Output, graph: &ResearchGraph, partition: &Partition) -> CliResult<()> {
    let rows = graph.nodes.iter().enumerate().map(|(i, n)| {
        vec![
            i.to_string(),
            n.label(),
            n.country.to_string(),
            n.factor.name().to_string(),
            n.status.name().to_string(),
            n.disease_count().to_string(),
            n.diseases.iter().map(|d| d.name()).collect::<Vec<_>>().join(";"),
            num(n.mean_residual),
            partition.membership[i].to_string(),
        ]
    });
    out.csv(
        "network_nodes.csv",
        &["id", "label", "country", "factor", "status", "n_diseases", "diseases", "mean_residual", "community"],
        rows,
    )?;
    let rows = graph.edges.iter().map(|e| vec![e.source.to_string(), e.target.to_string(), e.weight.to_string()]);
    out.csv("network_edges.csv", &["source", "target", "weight"], rows)
}

pub fn write_network_metrics(out: &mut Output, graph: &ResearchGraph, m: &NetworkMetrics) -> CliResult<()> {
    #[derive(Serialize)]
    struct Wrapped<'a> {
        min_weight: u32,
        #[serde(flatten)]
        metrics: &'a NetworkMetrics,
    }
    out.json("network_metrics.json", &Wrapped { min_weight: graph.min_weight, metrics: m })
}

pub fn write_evolution(out: &mut Output, evolution: &[(Scenario, Vec<EvolvedStep>)]) -> CliResult<()> {
    let mut rows = Vec::new();
    for (s, steps) in evolution {
        for (i, st) in steps.iter().enumerate() {
            let mut r = vec![s.name().to_string(), i.to_string(), num(st.delta_g), num(st.noise_level)];
            for e in [&st.density, &st.factor_homophily, &st.modularity, &st.avg_path_length] {
                r.extend([num(e.value), num(e.ci_low), num(e.ci_high)]);
            }
            rows.push(r);
        }
    }
    out.csv(
        "network_evolution.csv",
        &[
            "scenario",
            "step",
            "delta_g",
            "noise_level",
            "density",
            "density_ci_low",
            "density_ci_high",
            "factor_homophily",
            "factor_homophily_ci_low",
            "factor_homophily_ci_high",
            "modularity",
            "modularity_ci_low",
            "modularity_ci_high",
            "avg_path_length",
            "avg_path_length_ci_low",
            "avg_path_length_ci_high",
        ],
        rows,
    )
}

pub fn write_redistribution(out: &mut Output, r: &EdgeRedistribution) -> CliResult<()> {
    let rows = r
        .pairs
        .iter()
        .map(|p| vec![p.a.name().to_string(), p.b.name().to_string(), (p.a == p.b).to_string(), p.baseline.to_string(), num(p.evolved)]);
    out.csv("edge_redistribution.csv", &["factor_a", "factor_b", "within", "baseline_edges", "evolved_edges"], rows)
}

pub fn write_network(out: &mut Output, n: &NetworkResult) -> CliResult<()> {
    write_graph(out, &n.graph, &n.partition)?;
    write_network_metrics(out, &n.graph, &n.metrics)?;
    if !n.evolution.is_empty() {
        write_evolution(out, &n.evolution)?;
    }
    if let Some(r) = &n.redistribution {
        write_redistribution(out, r)?;
    }
    Ok(())
}

/// Countries present in the panel but absent from the predictor table.
pub fn unmatched_countries(panel: &Panel, table: &PredictorTable) -> BTreeSet<CountryCode> {
    panel.countries().into_iter().filter(|c| table.row_of(*c).is_none()).collect()
}
