use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use cimnet::error::{ConfigError, Error};
use cimnet::eval::{CachedCompiler, Evaluator};
use cimnet::experiment::{self, FrontRow, HardwareDoc, SearchSpec};
use cimnet::io;
use cimnet_core::dataflow::{compile_dataflow, option_table, TileOption};
use cimnet_core::predict::{ModelKind, SvrParams};
use cimnet_core::search::{non_dominated_sort, Objectives};
use cimnet_core::{
    ArchSpace, Codec, ConfigSpace, CycleReport, Family, Genome, HardwareConfig, LayerSpec, ProxyParams,
    SearchMode, SubnetArch,
};

#[derive(Parser)]
#[command(name = "cimnet", version, about = "Joint network / CIM hardware search")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON file.
    Run { config: PathBuf },
    /// Run one search with the preset spaces.
    Search {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long, value_parser = parse_mode, default_value = "elastic-arch-elastic-config")]
        setting: SearchMode,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_model, default_value = "ridge")]
        predictor: ModelKind,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Simulate one (sub-network, configuration) pair.
    Simulate {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        /// Sub-network JSON; the canonical sub-network when omitted.
        #[arg(long)]
        arch: Option<PathBuf>,
        /// Hardware JSON (`multipliers` and/or `values`); the static
        /// configuration when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Decode a genome bit string instead of --arch/--config.
        #[arg(long, conflicts_with_all = ["arch", "config"])]
        genome: Option<String>,
        #[arg(long, value_parser = parse_mode, default_value = "elastic-arch-elastic-config")]
        setting: SearchMode,
        /// Include per-layer costs.
        #[arg(long)]
        layers: bool,
    },
    /// Show the chosen tiling and the full option table for one layer.
    Dataflow {
        /// `groups,resolution,reduction,out_channels[,elem_bytes]` or a
        /// layer JSON file.
        #[arg(long)]
        layer: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Predictor learning curves on uniformly sampled genomes.
    PredictorsEval {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long, value_parser = parse_mode, default_value = "elastic-arch-elastic-config")]
        setting: SearchMode,
        #[arg(long, default_value_t = 1200)]
        pool: usize,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_parser = parse_model, default_value = "ridge")]
        model: ModelKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge front CSVs and keep the non-dominated rows.
    Pareto {
        #[arg(required = true)]
        fronts: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the genome layout of a family and setting.
    Layout {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long, value_parser = parse_mode, default_value = "elastic-arch-elastic-config")]
        setting: SearchMode,
    },
}

fn parse_family(s: &str) -> Result<Family, String> {
    Family::parse(s).ok_or_else(|| format!("unknown family `{s}` (mbv3, resnet50, vit)"))
}

fn parse_mode(s: &str) -> Result<SearchMode, String> {
    SearchMode::parse(s).ok_or_else(|| {
        let names: Vec<_> = SearchMode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown setting `{s}` ({})", names.join(", "))
    })
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "ridge" => Ok(ModelKind::Ridge { lambda: None }),
        "svr" => Ok(ModelKind::Svr(SvrParams::default())),
        _ => Err(format!("unknown model `{s}` (ridge, svr)")),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io(Path::new("<stdout>"), e)),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Other(e.into()))?;
    s.push('\n');
    emit(&s)
}

fn load_hardware(path: Option<&Path>, space: &ConfigSpace) -> Result<HardwareConfig, Error> {
    match path {
        None => Ok(space.static_config()),
        Some(p) => {
            let doc: HardwareDoc = io::load_json(p)?;
            let cfg = doc
                .resolve(space)
                .map_err(|m| ConfigError::field(&p.display().to_string(), 0, "config", m))?;
            if !cfg.is_positive() {
                return Err(ConfigError::field(
                    &p.display().to_string(),
                    0,
                    "values",
                    "every hardware value must be positive",
                )
                .into());
            }
            Ok(cfg)
        }
    }
}

#[derive(Serialize)]
struct SimulateOut {
    family: Family,
    arch: SubnetArch,
    config: HardwareDoc,
    /// Valid under the default configuration budgets.
    within_budget: bool,
    /// PROXY accuracy.
    accuracy: f64,
    params: u64,
    total_cycles: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<CycleReport>,
}

fn simulate_cmd(
    family: Family,
    arch: Option<&Path>,
    config: Option<&Path>,
    genome: Option<&str>,
    setting: SearchMode,
    layers: bool,
) -> Result<(), Error> {
    let space = ConfigSpace::default();
    let codec = Codec::new(ArchSpace::preset(family), space.clone(), setting.scope())
        .map_err(|e| Error::Other(e.into()))?;
    let (subnet, cfg) = match genome {
        Some(bits) => {
            let g = Genome::parse(bits)
                .map_err(|e| ConfigError::field("arguments", 0, "genome", e.to_string()))?;
            codec
                .decode(&g)
                .map_err(|e| ConfigError::field("arguments", 0, "genome", e.to_string()))?
        }
        None => {
            let subnet = match arch {
                Some(p) => {
                    let s: SubnetArch = io::load_json(p)?;
                    codec.arch_space().check(&s).map_err(|e| {
                        ConfigError::field(&p.display().to_string(), 0, "arch", e.to_string())
                    })?;
                    s
                }
                None => codec.arch_space().canonical(),
            };
            (subnet, load_hardware(config, &space)?)
        }
    };
    let compiler = CachedCompiler::new();
    let ev = Evaluator::new(&codec, ProxyParams::default(), &compiler).map_err(|e| Error::Other(e.into()))?;
    let r = ev
        .evaluate_pair(&subnet, &cfg)
        .map_err(|e| Error::Infeasible(e.to_string()))?;
    print_json(&SimulateOut {
        family,
        within_budget: space.validate(&cfg).is_ok(),
        config: HardwareDoc::of(&cfg, &space),
        arch: subnet,
        accuracy: r.accuracy,
        params: r.params,
        total_cycles: r.report.total_cycles,
        report: layers.then_some(r.report),
    })
}

fn parse_layer(arg: &str) -> Result<LayerSpec, Error> {
    if arg.ends_with(".json") {
        return io::load_json(Path::new(arg));
    }
    let bad = |m: &str| -> Error { ConfigError::field("arguments", 0, "layer", m).into() };
    let nums: Vec<u64> = arg
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("expected comma-separated integers"))?;
    let (g, i, ic, o, b) = match nums[..] {
        [g, i, ic, o] => (g, i, ic, o, 1),
        [g, i, ic, o, b] => (g, i, ic, o, b),
        _ => {
            return Err(bad(
                "expected groups,resolution,reduction,out_channels[,elem_bytes]",
            ))
        }
    };
    let b = u32::try_from(b).map_err(|_| bad("elem_bytes out of range"))?;
    LayerSpec::new("layer", g, i, ic, o, b).map_err(|e| bad(&e.to_string()))
}

#[derive(Serialize)]
struct DataflowOut {
    layer: LayerSpec,
    config: HardwareConfig,
    chosen: TileOption,
    options: Vec<TileOption>,
}

fn dataflow_cmd(layer: &str, config: Option<&Path>) -> Result<(), Error> {
    let layer = parse_layer(layer)?;
    let cfg = load_hardware(config, &ConfigSpace::default())?;
    let chosen = compile_dataflow(&layer, &cfg).map_err(|e| Error::Infeasible(e.to_string()))?;
    let options = option_table(&layer, &cfg).map_err(|e| Error::Infeasible(e.to_string()))?;
    print_json(&DataflowOut {
        layer,
        config: cfg,
        chosen,
        options,
    })
}

fn pareto_cmd(fronts: &[PathBuf], out: Option<&Path>) -> Result<(), Error> {
    let mut rows: Vec<FrontRow> = Vec::new();
    for p in fronts {
        rows.extend(io::read_csv::<FrontRow>(p)?);
    }
    rows.sort_by(|a, b| a.genome.cmp(&b.genome));
    rows.dedup_by(|a, b| a.genome == b.genome && a.accuracy == b.accuracy && a.cycles == b.cycles);
    let objs: Vec<Objectives> = rows
        .iter()
        .map(|r| Objectives::new(r.accuracy, r.cycles as f64))
        .collect();
    let first = non_dominated_sort(&objs).into_iter().next().unwrap_or_default();
    let mut keep: Vec<FrontRow> = first.into_iter().map(|i| rows[i].clone()).collect();
    keep.sort_by(|a, b| {
        a.cycles
            .cmp(&b.cycles)
            .then(b.accuracy.total_cmp(&a.accuracy))
            .then_with(|| a.genome.cmp(&b.genome))
    });
    match out {
        Some(p) => io::write_csv(p, &keep),
        None => emit(&io::csv_string(&keep)?),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config } => {
            for s in experiment::run_experiment(&config)? {
                emit(&format!(
                    "{} {} seed {}: front {} points, cycles reduced {} at iso-accuracy\n",
                    s.family,
                    s.setting,
                    s.seed,
                    s.front_size,
                    s.cycle_reduction_at_iso_accuracy
                        .map_or_else(|| "n/a".to_string(), |r| format!("{r:.2}x")),
                ))?;
            }
            Ok(())
        }
        Command::Search {
            family,
            setting,
            k,
            m,
            n,
            seed,
            predictor,
            out,
        } => {
            if k == 0 || n == 0 || m < n {
                return Err(ConfigError::field("arguments", 0, "m", "need k ≥ 1, n ≥ 1 and m ≥ n").into());
            }
            let mut spec = SearchSpec::new(family, setting, k, m, n, seed);
            spec.params.predictor = predictor;
            let compiler = CachedCompiler::new();
            let r = experiment::run_search(&spec, &compiler, Some(&out))?;
            print_json(&r.summary)
        }
        Command::Simulate {
            family,
            arch,
            config,
            genome,
            setting,
            layers,
        } => simulate_cmd(
            family,
            arch.as_deref(),
            config.as_deref(),
            genome.as_deref(),
            setting,
            layers,
        ),
        Command::Dataflow { layer, config } => dataflow_cmd(&layer, config.as_deref()),
        Command::PredictorsEval {
            family,
            setting,
            pool,
            sizes,
            trials,
            model,
            seed,
            out,
        } => {
            let compiler = CachedCompiler::new();
            let rows =
                experiment::predictor_curve(family, setting, &compiler, pool, &sizes, trials, model, seed)?;
            match out {
                Some(p) => io::write_csv(&p, &rows),
                None => emit(&io::csv_string(&rows)?),
            }
        }
        Command::Pareto { fronts, out } => pareto_cmd(&fronts, out.as_deref()),
        Command::Layout { family, setting } => {
            let codec = Codec::new(ArchSpace::preset(family), ConfigSpace::default(), setting.scope())
                .map_err(|e| Error::Other(e.into()))?;
            print_json(codec.layout())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
