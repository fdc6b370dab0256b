//! Command line pipeline from planning sources to station-annotated
//! precedence graphs: extraction, classifier training and evaluation,
//! scheduling, graph export, baseline and oracle comparison, and synthetic
//! data generation.
//!
//! Machine-readable output goes to `--out` files or stdout; diagnostics and
//! timings go to stderr. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 infeasible, 4 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dvcsched_core::extract::nb::{model_from_json, model_to_json, train_nb, NbLabeler};
use dvcsched_core::extract::{
    corpus_from_csv, evaluate_extractor, fuzzy_extract, nb_extract, regex_extract, ExtractError,
    FuzzyLabeler, KeywordConfig, LabeledCorpus, RegexLabeler, TaskAccuracy,
};
use dvcsched_core::graph::{build_precedence_graph, export_dot, graph_to_json};
use dvcsched_core::ingest::{parse_assembly_graph, parse_topology, IngestError};
use dvcsched_core::model::Instance;
use dvcsched_core::pipeline::{load_instance_dir, ExtractMethod, PipelineError};
use dvcsched_core::sched::{
    baseline_sequential, compute_metrics, oracle_optimal, schedule, schedule_from_json,
    schedule_to_json, Schedule, ScheduleError, SchedulerParams,
};
use dvcsched_core::synth::{
    gen_corpus, instance_bundle, write_corpus_dir, write_instance_dir, CorpusCounts, Profile,
    SynthError,
};

#[derive(Parser)]
#[command(name = "dvcsched", version, about = "Digital value chain scheduling pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Fuzzy,
    Regex,
    Nb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphFormat {
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Recover ECU assembly and powered stations from an assembly graph.
    Extract {
        #[arg(long, value_enum)]
        method: Method,
        /// assembly_graph.csv
        #[arg(long)]
        graph: PathBuf,
        /// topology.csv supplying the ECU names
        #[arg(long)]
        topology: PathBuf,
        /// Fuzzy matching threshold in percent
        #[arg(long, default_value_t = 90)]
        threshold: u8,
        /// Trained model (required for --method nb)
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a labeled corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate an extraction method against a labeled corpus.
    Eval {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 90)]
        threshold: u8,
    },
    /// Schedule an instance directory and write the schedule document.
    Schedule {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 1e6)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the precedence graph of a schedule document.
    Graph {
        /// Schedule JSON produced by `schedule`, `baseline` or `oracle`
        #[arg(long)]
        schedule: PathBuf,
        /// Instance directory the schedule belongs to
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        format: GraphFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Schedule with the conservative sequential plan.
    Baseline {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustively optimal schedule for small instances.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic inputs.
    Synth {
        #[command(subcommand)]
        what: SynthCommand,
    },
    /// Compare greedy, baseline and (when small enough) the oracle.
    Compare {
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long, default_value_t = 80)]
    n_id: usize,
    #[arg(long, default_value_t = 4)]
    n_flash: usize,
    #[arg(long, default_value_t = 51)]
    n_conf: usize,
    #[arg(long, default_value_t = 38)]
    n_calcom: usize,
    #[arg(long, default_value_t = 30)]
    n_stations: u32,
    #[arg(long, default_value_t = 88)]
    ct: u32,
}

impl ProfileArgs {
    fn profile(&self) -> Profile {
        Profile {
            n_id: self.n_id,
            n_flash: self.n_flash,
            n_conf: self.n_conf,
            n_calcom: self.n_calcom,
            n_stations: self.n_stations,
            ct_s: self.ct,
        }
    }
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Write a synthetic instance directory.
    Instance {
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic labeled corpus.
    Corpus {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 250)]
        assembly: usize,
        #[arg(long, default_value_t = 250)]
        powered: usize,
        #[arg(long, default_value_t = 500)]
        neither: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Infeasible(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Infeasible(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Infeasible { .. } | ScheduleError::Deadlock { .. } => {
                CliError::Infeasible(e.to_string())
            }
            ScheduleError::InvalidInstance(_) | ScheduleError::TooLarge(_) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Infeasible(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_corpus(path: &Path) -> Result<LabeledCorpus, CliError> {
    Ok(corpus_from_csv(&read_file(path)?)?)
}

fn ecu_names_of(topology: &[dvcsched_core::model::Ecu]) -> Vec<String> {
    let mut names: Vec<String> = topology.iter().map(|e| e.name.clone()).collect();
    names.sort();
    names.dedup();
    names
}

fn load_model(path: &Path) -> Result<dvcsched_core::NbModel64, CliError> {
    let json = String::from_utf8(read_file(path)?)
        .map_err(|e| CliError::Data(format!("model not UTF-8: {e}")))?;
    model_from_json(&json).map_err(CliError::Data)
}

fn load_instance(dir: &Path) -> Result<Instance, CliError> {
    Ok(load_instance_dir(dir, &ExtractMethod::default())?.instance)
}

fn write_out(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn print_summary(schedule: &Schedule<f64>, instance: &Instance) {
    match compute_metrics(schedule, instance) {
        Ok(m) => println!(
            "stations={} u={:.6} p={:.6} f={}",
            schedule.station_count(),
            m.utilization,
            m.parallelization,
            schedule.f
        ),
        Err(_) => println!("stations=0 u=n/a p=n/a f={}", schedule.f),
    }
}

fn worker_threads() -> usize {
    std::env::var("DVC_SCHED_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or(1)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract {
            method,
            graph,
            topology,
            threshold,
            model,
            out,
        } => {
            let rows = parse_assembly_graph(&read_file(&graph)?)?.into_strict()?;
            let ecus = parse_topology(&read_file(&topology)?)?.into_strict()?;
            let names = ecu_names_of(&ecus);
            let keywords = KeywordConfig::default();
            let result = match method {
                Method::Fuzzy => fuzzy_extract(&rows, &names, &keywords, threshold)?,
                Method::Regex => regex_extract(&rows, &names, &keywords),
                Method::Nb => {
                    let model_path = model.ok_or_else(|| {
                        CliError::Usage("--model is required for --method nb".into())
                    })?;
                    nb_extract(&rows, &load_model(&model_path)?, &names)?
                }
            };
            let json = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            write_out(&out, &json)?;
            eprintln!(
                "extracted {} assembly stations, {} powered stations from {} rows",
                result.ecu_stations.len(),
                result.powered_stations.len(),
                result.per_row_decisions.len()
            );
            Ok(())
        }

        Command::Train { corpus, out } => {
            let corpus = read_corpus(&corpus)?;
            let model = train_nb::<f64>(&corpus)?;
            write_out(&out, &model_to_json(&model))?;
            eprintln!(
                "trained on {} rows, vocabulary {} terms",
                corpus.len(),
                model.vocabulary.len()
            );
            Ok(())
        }

        Command::Eval {
            method,
            corpus,
            threshold,
        } => {
            let corpus = read_corpus(&corpus)?;
            let names: Vec<String> = {
                let mut v: Vec<String> =
                    corpus.iter().filter_map(|r| r.ecu_name.clone()).collect();
                v.sort();
                v.dedup();
                v
            };
            let keywords = KeywordConfig::default();
            let acc: TaskAccuracy = match method {
                Method::Fuzzy => evaluate_extractor(
                    &FuzzyLabeler {
                        ecu_names: names,
                        keywords,
                        threshold,
                    },
                    &corpus,
                ),
                Method::Regex => evaluate_extractor(&RegexLabeler::new(&names, &keywords), &corpus),
                Method::Nb => evaluate_extractor(
                    &NbLabeler {
                        model: train_nb::<f64>(&corpus)?,
                    },
                    &corpus,
                ),
            };
            println!("ecu_assembly_accuracy={:.6}", acc.ecu_assembly);
            println!("powered_station_accuracy={:.6}", acc.powered_stations);
            Ok(())
        }

        Command::Schedule {
            instance,
            alpha,
            beta,
            out,
        } => {
            let instance = load_instance(&instance)?;
            let params = SchedulerParams {
                alpha,
                beta,
                ct_override: None,
            };
            let start = Instant::now();
            let solved = schedule::<f64>(&instance, &params)?;
            let wall = start.elapsed();
            write_out(&out, &schedule_to_json(&solved, &instance))?;
            print_summary(&solved, &instance);
            eprintln!("wall_s={:.6}", wall.as_secs_f64());
            Ok(())
        }

        Command::Baseline { instance, out } => {
            let instance = load_instance(&instance)?;
            let solved = baseline_sequential::<f64>(&instance)?;
            write_out(&out, &schedule_to_json(&solved, &instance))?;
            print_summary(&solved, &instance);
            Ok(())
        }

        Command::Oracle { instance, out } => {
            let instance = load_instance(&instance)?;
            let solved = oracle_optimal::<f64>(&instance)?;
            write_out(&out, &schedule_to_json(&solved, &instance))?;
            print_summary(&solved, &instance);
            Ok(())
        }

        Command::Graph {
            schedule: schedule_path,
            instance,
            format,
            out,
        } => {
            let instance = load_instance(&instance)?;
            let json = String::from_utf8(read_file(&schedule_path)?)
                .map_err(|e| CliError::Data(format!("schedule not UTF-8: {e}")))?;
            let solved: Schedule<f64> =
                schedule_from_json(&json, &instance).map_err(CliError::Data)?;
            let graph = build_precedence_graph(&instance, &solved)
                .map_err(|e| CliError::Data(e.to_string()))?;
            let rendered = match format {
                GraphFormat::Dot => export_dot(&graph),
                GraphFormat::Json => graph_to_json(&graph),
            };
            write_out(&out, &rendered)?;
            eprintln!(
                "graph: {} nodes, {} edges, {} anchors",
                graph.nodes.len(),
                graph.edges.len(),
                graph.anchors.len()
            );
            Ok(())
        }

        Command::Synth { what } => match what {
            SynthCommand::Instance { seed, profile, out } => {
                let profile = profile.profile();
                let bundle = instance_bundle(seed, &profile)?;
                let manifest = write_instance_dir(&bundle, seed, &profile, &out)?;
                eprintln!(
                    "wrote instance (seed {seed}, {} tasks, {} ECUs) to {}",
                    bundle.instance.tasks.len(),
                    bundle.instance.topology.len(),
                    out.display()
                );
                let _ = manifest;
                Ok(())
            }
            SynthCommand::Corpus {
                seed,
                assembly,
                powered,
                neither,
                out,
            } => {
                let corpus = gen_corpus(
                    seed,
                    &CorpusCounts {
                        assembly,
                        powered,
                        neither,
                    },
                );
                write_corpus_dir(&corpus, seed, &out)?;
                eprintln!("wrote corpus ({} rows) to {}", corpus.len(), out.display());
                Ok(())
            }
        },

        Command::Compare { instance } => {
            let instance = load_instance(&instance)?;
            let threads = worker_threads();
            let (greedy, baseline) = if threads > 1 {
                std::thread::scope(|scope| {
                    let g = scope
                        .spawn(|| schedule::<f64>(&instance, &SchedulerParams::default()));
                    let b = scope.spawn(|| baseline_sequential::<f64>(&instance));
                    (g.join().expect("greedy thread"), b.join().expect("baseline thread"))
                })
            } else {
                (
                    schedule::<f64>(&instance, &SchedulerParams::default()),
                    baseline_sequential::<f64>(&instance),
                )
            };
            let greedy = greedy?;
            let baseline = baseline?;
            println!(
                "greedy stations={} f={}",
                greedy.station_count(),
                greedy.f
            );
            println!(
                "baseline stations={} f={}",
                baseline.station_count(),
                baseline.f
            );
            match oracle_optimal::<f64>(&instance) {
                Ok(oracle) => println!(
                    "oracle stations={} f={}",
                    oracle.station_count(),
                    oracle.f
                ),
                Err(ScheduleError::TooLarge(why)) => println!("oracle skipped ({why})"),
                Err(e) => return Err(e.into()),
            }
            Ok(())
        }
    }
}
