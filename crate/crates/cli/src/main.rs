use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trialeq::config::{Delimiter, RunConfig, CONFIG_ENV};
use trialeq::error::{CliError, CliResult};
use trialeq::figures::{emit_figure, Figure};
use trialeq::output::{Output, Stamp};
use trialeq::stages::{self, AttributionWant, Part};
use trialeq::{pipeline, stats_cmd};
use trialeq_core::classify::Thresholds;
use trialeq_core::counterfactual::{self, Scenario};
use trialeq_core::decomposition::TrendMetric;
use trialeq_core::metrics::{self, Weighting};
use trialeq_core::network::StatusRule;

#[derive(Parser)]
#[command(name = "trialeq", version, about = "Participation-to-burden inequality analysis for clinical-trial panels")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Panel file, overriding the config.
    #[arg(long, global = true)]
    panel: Option<PathBuf>,
    /// Predictor file, overriding the config.
    #[arg(long, global = true)]
    predictors: Option<PathBuf>,
    /// Accept years outside 2000-2024.
    #[arg(long, global = true)]
    relax_years: bool,
    /// Analysis period, e.g. 2000-2024.
    #[arg(long, global = true, value_parser = parse_period)]
    period: Option<(u16, u16)>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the panel and write its canonical form.
    Ingest {
        #[arg(long, value_enum)]
        delimiter: Option<DelimiterArg>,
    },
    /// PBR, SI, Gini, Lorenz, CIS, leave-out and alignment tables.
    Metrics {
        #[arg(value_enum, default_value = "all")]
        what: MetricsWhat,
        #[arg(long, value_enum)]
        weighting: Option<WeightingArg>,
        /// CIS bootstrap replicates (0 for none).
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Share of top-ranked units removed by leave-out.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Theil, variance partition and trend decompositions.
    Decompose {
        #[arg(value_enum, default_value = "all")]
        what: DecomposeWhat,
        /// Year-bin width.
        #[arg(long)]
        bin_width: Option<u16>,
        #[arg(long, value_enum)]
        metric: Vec<TrendArg>,
        /// Trend bootstrap replicates (0 for none).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Hierarchical partitioning and Shapley R² attribution.
    Attribute {
        #[arg(value_enum, default_value = "all")]
        method: AttributeWhat,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        part: Option<u8>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Average over every ordering.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Classify country-disease pairs and diagnose limiting factors.
    Classify {
        /// Over-performing and as-expected thresholds, e.g. 0.5,0.3.
        #[arg(long, value_parser = parse_pair)]
        thresholds: Option<(f64, f64)>,
        #[arg(long)]
        sig: Option<f64>,
        #[arg(long)]
        multi: Option<f64>,
    },
    /// Counterfactual alignment scenarios.
    Simulate {
        #[arg(long, value_enum, default_value = "both")]
        scenario: ScenarioArg,
        /// Comma-separated fractions (single scenario only).
        #[arg(long, value_delimiter = ',')]
        steps: Vec<f64>,
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, value_enum)]
        ranking: Option<RankingArg>,
    },
    /// Country-factor research network.
    Network {
        #[arg(value_enum)]
        action: NetworkAction,
        #[arg(long)]
        min_weight: Option<u32>,
        #[arg(long)]
        restarts: Option<u64>,
        #[arg(long)]
        noise_bootstrap: Option<usize>,
        #[arg(long, value_enum)]
        status_rule: Option<StatusRuleArg>,
    },
    /// Ad-hoc tests on a CSV table; prints JSON.
    Stats {
        #[arg(value_enum)]
        test: StatsTest,
        /// Input table.
        file: PathBuf,
        /// Pool contingency columns with fewer total counts than this.
        #[arg(long)]
        pool_below: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        permutations: usize,
    },
    /// Full pipeline with manifest.
    Run,
    /// Plot-ready table for one figure from existing results.
    Emit {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long, value_enum, default_value = "full")]
        scenario: SingleScenario,
        /// Directory holding the results (default: the output directory).
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DelimiterArg {
    Auto,
    Comma,
    Tab,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricsWhat {
    Pbr,
    Si,
    Gini,
    Lorenz,
    Cis,
    LeaveOut,
    Alignment,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Equal,
    Participant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecomposeWhat {
    Theil,
    Timeline,
    Anova,
    Trend,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrendArg {
    Gini,
    TheilTotal,
    BetweenDisease,
    WithinDisease,
    BetweenCountry,
    WithinCountry,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttributeWhat {
    Hierarchical,
    Shapley,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Full,
    Targeted,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SingleScenario {
    Full,
    Targeted,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingArg {
    Deviation,
    Volume,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NetworkAction {
    Build,
    Metrics,
    Evolve,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatusRuleArg {
    Modal,
    MeanResidual,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsTest {
    ChiSquare,
    CramersV,
    Kruskal,
    Spearman,
    Permutation,
}

fn parse_period(s: &str) -> Result<(u16, u16), String> {
    let (a, b) = s.split_once('-').ok_or("expected START-END")?;
    let p = |x: &str| x.trim().parse::<u16>().map_err(|e| format!("{x}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected OVER,BAND")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(p) = &cli.panel {
        cfg.input.panel = Some(p.clone());
    }
    if let Some(p) = &cli.predictors {
        cfg.input.predictors = Some(p.clone());
    }
    if cli.relax_years {
        cfg.input.relax_year_bounds = true;
    }
    if let Some((a, b)) = cli.period {
        cfg.period.start = a;
        cfg.period.end = b;
    }
    Ok(cfg)
}

fn open_output(cfg: &RunConfig) -> CliResult<Output> {
    Output::create(&cfg.out, Stamp::new(cfg.seed, &cfg.hash()))
}

fn report(out: &Output) {
    for f in out.files() {
        println!("{}", out.dir().join(&f.path).display());
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(&cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    // apply subcommand overrides before validating and hashing
    match &cli.command {
        Command::Ingest { delimiter: Some(d) } => {
            cfg.input.delimiter = match d {
                DelimiterArg::Auto => Delimiter::Auto,
                DelimiterArg::Comma => Delimiter::Comma,
                DelimiterArg::Tab => Delimiter::Tab,
            }
        }
        Command::Metrics { weighting, bootstrap, fraction, .. } => {
            if let Some(w) = weighting {
                cfg.metrics.weighting = match w {
                    WeightingArg::Equal => Weighting::Equal,
                    WeightingArg::Participant => Weighting::ParticipantWeighted,
                };
            }
            cfg.metrics.bootstrap = bootstrap.unwrap_or(cfg.metrics.bootstrap);
            cfg.metrics.leave_out_fraction = fraction.unwrap_or(cfg.metrics.leave_out_fraction);
        }
        Command::Decompose { bin_width, metric, bootstrap, .. } => {
            cfg.decomposition.bin_width = bin_width.unwrap_or(cfg.decomposition.bin_width);
            cfg.decomposition.trend_bootstrap = bootstrap.unwrap_or(cfg.decomposition.trend_bootstrap);
            if !metric.is_empty() {
                cfg.decomposition.trend_metrics = metric
                    .iter()
                    .map(|m| match m {
                        TrendArg::Gini => TrendMetric::Gini,
                        TrendArg::TheilTotal => TrendMetric::TheilTotal,
                        TrendArg::BetweenDisease => TrendMetric::BetweenDiseaseShare,
                        TrendArg::WithinDisease => TrendMetric::WithinDiseaseShare,
                        TrendArg::BetweenCountry => TrendMetric::BetweenCountryShare,
                        TrendArg::WithinCountry => TrendMetric::WithinCountryShare,
                    })
                    .collect();
            }
        }
        Command::Attribute { permutations, bootstrap, exhaustive, .. } => {
            let a = &mut cfg.attribution;
            a.permutations = permutations.unwrap_or(a.permutations);
            a.bootstrap = bootstrap.unwrap_or(a.bootstrap);
            a.exhaustive |= *exhaustive;
        }
        Command::Classify { thresholds, sig, multi } => {
            let t: &mut Thresholds = &mut cfg.classification.thresholds;
            if let Some((over, band)) = thresholds {
                t.over = *over;
                t.band = *band;
            }
            t.significance = sig.unwrap_or(t.significance);
            t.multi = multi.unwrap_or(t.multi);
        }
        Command::Simulate { scenario, steps, bootstrap, ranking } => {
            let s = &mut cfg.simulation;
            s.bootstrap = bootstrap.unwrap_or(s.bootstrap);
            if let Some(r) = ranking {
                s.ranking = match r {
                    RankingArg::Deviation => counterfactual::Ranking::MedianDeviation,
                    RankingArg::Volume => counterfactual::Ranking::ParticipantVolume,
                };
            }
            if !steps.is_empty() {
                match scenario {
                    ScenarioArg::Full => s.full_steps = steps.clone(),
                    ScenarioArg::Targeted => s.targeted_steps = steps.clone(),
                    ScenarioArg::Both => return Err(CliError::config("--steps needs --scenario full or targeted")),
                }
            }
        }
        Command::Network { min_weight, restarts, noise_bootstrap, status_rule, .. } => {
            let n = &mut cfg.network;
            n.min_weight = min_weight.unwrap_or(n.min_weight);
            n.louvain_restarts = restarts.unwrap_or(n.louvain_restarts);
            n.noise_bootstrap = noise_bootstrap.unwrap_or(n.noise_bootstrap);
            if let Some(r) = status_rule {
                n.status_rule = match r {
                    StatusRuleArg::Modal => StatusRule::Modal,
                    StatusRuleArg::MeanResidual => StatusRule::MeanResidual,
                };
            }
        }
        _ => {}
    }

    match cli.command {
        Command::Stats { test, file, pool_below, permutations } => {
            let v = match test {
                StatsTest::ChiSquare => stats_cmd::chi_square_cmd(&file)?,
                StatsTest::CramersV => stats_cmd::cramers_v_cmd(&file, pool_below)?,
                StatsTest::Kruskal => stats_cmd::kruskal_cmd(&file)?,
                StatsTest::Spearman => stats_cmd::spearman_cmd(&file)?,
                StatsTest::Permutation => stats_cmd::permutation_cmd(&file, permutations, cfg.seed)?,
            };
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            return Ok(());
        }
        Command::Emit { figure, scenario, from } => {
            let from = from.unwrap_or_else(|| cfg.out.clone());
            let mut out = open_output(&cfg)?;
            let s = match scenario {
                SingleScenario::Full => Scenario::Full,
                SingleScenario::Targeted => Scenario::Targeted,
            };
            emit_figure(&from, &mut out, figure, s)?;
            report(&out);
            return Ok(());
        }
        Command::Run => {
            let m = pipeline::run_pipeline(&cfg)?;
            for w in &m.warnings {
                log::warn!("{w}");
            }
            println!("{} files written to {}", m.files.len(), cfg.out.display());
            return Ok(());
        }
        _ => {}
    }

    cfg.validate()?;
    let inputs = stages::load_inputs(&cfg)?;
    let mut out = open_output(&cfg)?;
    let panel = &inputs.panel;
    let mut warnings = Vec::new();
    match cli.command {
        Command::Ingest { .. } => stages::write_ingest(&mut out, &inputs)?,
        Command::Metrics { what, .. } => {
            use MetricsWhat as W;
            let period = cfg.period()?;
            match what {
                W::All => {
                    let m = stages::compute_metrics(&cfg, &inputs)?;
                    stages::write_metrics(&mut out, &m)?;
                }
                W::Pbr => {
                    let (p, n) = stages::compute_pbr(&cfg, panel)?;
                    stages::write_pbr(&mut out, &p, &n)?;
                }
                W::Si => stages::write_si(&mut out, &metrics::si_table(panel, period))?,
                W::Gini | W::Lorenz => {
                    let (p, n) = stages::compute_pbr(&cfg, panel)?;
                    let (g, curve) = stages::compute_gini(&cfg, panel, &p, &n)?;
                    if what == W::Gini {
                        stages::write_gini(&mut out, &g)?;
                    } else {
                        stages::write_lorenz(&mut out, &curve)?;
                    }
                }
                W::Cis => stages::write_cis(&mut out, &stages::compute_cis(&cfg, panel)?)?,
                W::LeaveOut => stages::write_leave_out(&mut out, &stages::compute_leave_out(&cfg, panel)?)?,
                W::Alignment => {
                    cfg.require_predictors("alignment")?;
                    let t = inputs.predictors.as_ref().expect("predictors loaded");
                    stages::write_alignment(&mut out, &metrics::alignment_by_income(panel, t, period))?;
                }
            }
        }
        Command::Decompose { what, .. } => match what {
            DecomposeWhat::All => {
                stages::write_decomposition(&mut out, &stages::compute_decomposition(&cfg, panel, &mut warnings)?)?
            }
            DecomposeWhat::Theil => stages::write_theil(&mut out, &stages::compute_theil(&cfg, panel)?)?,
            DecomposeWhat::Timeline => stages::write_timeline(&mut out, &stages::compute_timeline(&cfg, panel)?)?,
            DecomposeWhat::Anova => stages::write_partition(&mut out, &stages::compute_partition(&cfg, panel)?)?,
            DecomposeWhat::Trend => {
                let t = stages::compute_trends(&cfg, panel, &cfg.decomposition.trend_metrics, &mut warnings)?;
                stages::write_trends(&mut out, &t)?;
            }
        },
        Command::Attribute { method, part, .. } => {
            cfg.require_predictors("attribution")?;
            let table = inputs.predictors.as_ref().expect("predictors loaded");
            let want = AttributionWant {
                hierarchical: method != AttributeWhat::Shapley,
                shapley: method != AttributeWhat::Hierarchical,
            };
            let parts = match part {
                Some(1) => vec![Part::One],
                Some(_) => vec![Part::Two],
                None => vec![Part::One, Part::Two],
            };
            for p in parts {
                let a = stages::compute_attribution(&cfg, panel, table, p, want)?;
                stages::write_attribution(&mut out, &a)?;
            }
        }
        Command::Classify { .. } => {
            cfg.require_predictors("classification")?;
            let table = inputs.predictors.as_ref().expect("predictors loaded");
            let c = stages::compute_classification(&cfg, &inputs, table, &mut warnings)?;
            stages::write_classification(&mut out, &c)?;
        }
        Command::Simulate { scenario, .. } => {
            let scenarios = match scenario {
                ScenarioArg::Full => vec![Scenario::Full],
                ScenarioArg::Targeted => vec![Scenario::Targeted],
                ScenarioArg::Both => vec![Scenario::Full, Scenario::Targeted],
            };
            let s = stages::compute_simulation(&cfg, panel, &scenarios)?;
            stages::write_simulation(&mut out, &s)?;
        }
        Command::Network { action, .. } => {
            cfg.require_predictors("network")?;
            let table = inputs.predictors.as_ref().expect("predictors loaded");
            let c = stages::compute_classification(&cfg, &inputs, table, &mut warnings)?;
            match action {
                NetworkAction::Build => {
                    let (g, p, _) = stages::compute_graph(&cfg, &c.pairs)?;
                    stages::write_graph(&mut out, &g, &p)?;
                }
                NetworkAction::Metrics => {
                    let (g, _, m) = stages::compute_graph(&cfg, &c.pairs)?;
                    stages::write_network_metrics(&mut out, &g, &m)?;
                }
                NetworkAction::Evolve => {
                    let sim = stages::compute_simulation(&cfg, panel, &[Scenario::Full, Scenario::Targeted])?;
                    let n = stages::compute_network(&cfg, &c.pairs, Some(&sim))?;
                    stages::write_evolution(&mut out, &n.evolution)?;
                    if let Some(r) = &n.redistribution {
                        stages::write_redistribution(&mut out, r)?;
                    }
                }
            }
        }
        Command::Stats { .. } | Command::Run | Command::Emit { .. } => unreachable!("handled above"),
    }
    for w in warnings {
        log::warn!("{w}");
    }
    report(&out);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
