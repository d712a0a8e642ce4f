use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tav_core::genbench::{
    city_meta, dbn_meta, generate_city_instance, generate_dbn_instance, render_exploration_map, run_benchmark,
    BenchConfig, InstanceMeta,
};
use tav_core::hierarchy::{induce_with, DbnSpec, SpectralOptions};
use tav_core::{
    build_abstract_models, decode, AbstractionHierarchy, Algorithm, DecodeResult, ExplorationRecord, Heuristic,
    HmmModel, ObservationSequence, TavOptions,
};

#[derive(Parser)]
#[command(name = "tav", version, about = "Exact HMM decoding with Viterbi, CFDP and TAV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode an observation sequence.
    Decode(DecodeArgs),
    /// Write a synthetic instance: model.json, hierarchy.json, obs.txt and meta.json.
    Generate {
        #[command(subcommand)]
        kind: Generator,
    },
    /// Induce a binary abstraction hierarchy from a model's transitions.
    InduceHierarchy(InduceArgs),
    /// Run a benchmark config and write the CSV report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the exploration map of a saved record.
    RenderMap(MapArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgorithmArg {
    Viterbi,
    Cfdp,
    Tav,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Viterbi => Algorithm::Viterbi,
            AlgorithmArg::Cfdp => Algorithm::Cfdp,
            AlgorithmArg::Tav => Algorithm::Tav,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum HeuristicArg {
    Cheap,
    Viterbi,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    /// Required by cfdp and tav.
    #[arg(long, required_if_eq_any([("algorithm", "cfdp"), ("algorithm", "tav")]))]
    hierarchy: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cheap")]
    heuristic: HeuristicArg,
    #[arg(long, default_value_t = 0)]
    presegments: usize,
    /// Result JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exploration map, PGM when the name ends in `.pgm`, text otherwise.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Exploration record JSON, for `render-map`.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Generator {
    /// DBN with `vars` variables of `card` values on separated timescales.
    Dbn {
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        card: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// The 27-city travel instance.
    Cities {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    max_children: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    hierarchy: PathBuf,
    /// Decode result JSON whose path is overlaid.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<tav_core::Error> for Failure {
    fn from(e: tav_core::Error) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Decode(args) => run_decode(args),
        Command::Generate { kind } => run_generate(kind),
        Command::InduceHierarchy(args) => {
            let model = HmmModel::from_json(&read(&args.model)?).map_err(invalid)?;
            let log = model.validate().map_err(invalid)?;
            let opts = SpectralOptions {
                max_children: args.max_children,
                min_leaf: args.min_leaf,
                seed: args.seed,
                ..SpectralOptions::default()
            };
            let induced = induce_with(&log, &opts).map_err(invalid)?;
            if induced.fallback_splits > 0 {
                eprintln!("note: {} splits fell back to index order", induced.fallback_splits);
            }
            write(&args.out, &induced.hierarchy.to_json())
        }
        Command::Bench { config, out } => {
            let cfg: BenchConfig = serde_json::from_str(&read(&config)?).map_err(invalid)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let report = run_benchmark(&cfg, base)?;
            let target = out
                .or_else(|| cfg.output.as_ref().map(|p| base.join(p)))
                .ok_or_else(|| invalid("no --out given and the config names no output"))?;
            write(&target, &report.to_csv()?)
        }
        Command::RenderMap(args) => {
            let record = ExplorationRecord::from_json(&read(&args.record)?).map_err(invalid)?;
            let h = AbstractionHierarchy::from_json(&read(&args.hierarchy)?).map_err(invalid)?;
            let result: DecodeResult = serde_json::from_str(&read(&args.result)?).map_err(invalid)?;
            let map = render_exploration_map(&record, &h, &result.path).map_err(tav_core::Error::from)?;
            write(&args.out, &map_text(&map, &args.out))
        }
    }
}

fn map_text(map: &tav_core::genbench::ExplorationMap, path: &Path) -> String {
    if path.extension().is_some_and(|e| e == "pgm") {
        map.to_pgm()
    } else {
        map.to_text()
    }
}

fn run_decode(args: DecodeArgs) -> Result<(), Failure> {
    let model = HmmModel::from_json(&read(&args.model)?).map_err(invalid)?;
    let log = model.validate().map_err(invalid)?;
    let obs = ObservationSequence::parse(&read(&args.obs)?).map_err(invalid)?;
    let algorithm = Algorithm::from(args.algorithm);
    let hierarchy = match &args.hierarchy {
        Some(p) if algorithm != Algorithm::Viterbi => AbstractionHierarchy::from_json(&read(p)?).map_err(invalid)?,
        _ => AbstractionHierarchy::flat(log.num_states()),
    };
    let stack = build_abstract_models(&log, &hierarchy).map_err(invalid)?;
    let options = TavOptions {
        heuristic: match args.heuristic {
            HeuristicArg::Cheap => Heuristic::Cheap,
            HeuristicArg::Viterbi => Heuristic::Viterbi,
        },
        presegments: args.presegments,
        ..TavOptions::default()
    };
    let (result, record) = decode(algorithm, &stack, &hierarchy, &obs, options)?;
    let record = record.unwrap_or_else(|| ExplorationRecord::full(log.num_states(), obs.len()));
    let json = serde_json::to_string(&result).map_err(invalid)?;
    match &args.out {
        Some(p) => write(p, &json)?,
        None => println!("{json}"),
    }
    if let Some(p) = &args.record {
        write(p, &record.to_json())?;
    }
    if let Some(p) = &args.map {
        let map = render_exploration_map(&record, &hierarchy, &result.path).map_err(tav_core::Error::from)?;
        write(p, &map_text(&map, p))?;
    }
    Ok(())
}

fn write_instance(
    dir: &Path,
    model: &HmmModel,
    h: &AbstractionHierarchy,
    obs: &ObservationSequence,
    meta: &InstanceMeta,
) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| invalid(format!("{}: {e}", dir.display())))?;
    write(&dir.join("model.json"), &model.to_json())?;
    write(&dir.join("hierarchy.json"), &h.to_json())?;
    write(&dir.join("obs.txt"), &obs.to_text())?;
    write(&dir.join("meta.json"), &serde_json::to_string_pretty(meta).map_err(invalid)?)
}

fn run_generate(kind: Generator) -> Result<(), Failure> {
    match kind {
        Generator::Dbn {
            vars,
            card,
            epsilon,
            horizon,
            seed,
            out_dir,
        } => {
            let spec = DbnSpec::uniform(vars, card, epsilon, seed);
            let (model, h, obs) = generate_dbn_instance(&spec, horizon)?;
            write_instance(&out_dir, &model, &h, &obs, &dbn_meta(&spec, horizon))
        }
        Generator::Cities { seed, out_dir } => {
            let (model, h, obs) = generate_city_instance(seed)?;
            write_instance(&out_dir, &model, &h, &obs, &city_meta(seed))
        }
    }
}
