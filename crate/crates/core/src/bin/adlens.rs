use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adlens::filter::RuleSet;
use adlens::graph::{export_graph, GraphFormat};
use adlens::metrics::{NetworkTime, ScoreTable};
use adlens::report::{
    analyze_dir, run_corpus, with_workers, write_corpus_csv_dir, write_page_csv_dir,
    AnalyzeOptions, AnalyzeReport, CorpusOptions,
};
use adlens::stages::StageMap;
use adlens::Result;

/// Attribute page-load work to resources and measure the cost of ads.
#[derive(Parser)]
#[command(name = "adlens", version)]
struct Cli {
    /// Worker threads.
    #[arg(long, global = true, env = "ADLENS_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Filter list; repeat to combine lists.
    #[arg(long, required = true)]
    filters: Vec<PathBuf>,

    /// Event-name to stage table replacing the built-in one.
    #[arg(long)]
    stage_map: Option<PathBuf>,

    /// Network time per resource: `sum` of fetch durations or `wallclock`
    /// union of fetch intervals.
    #[arg(long, default_value = "sum")]
    network_time: NetworkTime,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one bundle.
    Analyze {
        /// Bundle directory.
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Report path, `-` for standard output.
        #[arg(long)]
        out: PathBuf,
        /// Also write CSV tables into this directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Also write the per-thread call stack dump here.
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
    /// Analyze every bundle under a directory and aggregate.
    Corpus {
        /// Directory searched recursively for bundles.
        #[arg(long)]
        root: PathBuf,
        #[command(flatten)]
        common: Common,
        /// WOT scores: domain,score (0 to 100).
        #[arg(long)]
        wot: Option<PathBuf>,
        /// VirusTotal flags: domain,safeFlags,totalFlags.
        #[arg(long)]
        vt: Option<PathBuf>,
        /// Popularity ranks: domain,rank.
        #[arg(long)]
        ranks: Option<PathBuf>,
        /// Report path, `-` for standard output.
        #[arg(long)]
        out: PathBuf,
        /// Also write CSV tables and curves into this directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// Export the domain-collapsed dependency graph of one bundle.
    Graph {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, required = true)]
        filters: Vec<PathBuf>,
        /// `dot` or `json`.
        #[arg(long, default_value = "dot")]
        format: GraphFormat,
        /// Output path, `-` for standard output.
        #[arg(long)]
        out: PathBuf,
    },
}

fn options(common: &Common) -> Result<(RuleSet, AnalyzeOptions)> {
    let rules = RuleSet::load(&common.filters)?;
    let stage_map = match &common.stage_map {
        Some(p) => StageMap::load(p)?,
        None => StageMap::default(),
    };
    Ok((
        rules,
        AnalyzeOptions {
            stage_map,
            network_time: common.network_time,
        },
    ))
}

fn emit(out: &Path, bytes: &[u8]) -> Result<()> {
    if out == Path::new("-") {
        std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| adlens::Error::io(out, e))
    } else {
        std::fs::write(out, bytes).map_err(|e| adlens::Error::io(out, e))
    }
}

fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::Analyze {
            bundle,
            common,
            out,
            csv_dir,
            timeline,
        } => {
            let (rules, opts) = options(&common)?;
            let analysis = with_workers(workers, || analyze_dir(&bundle, &rules, &opts))?;
            if let Some(path) = timeline {
                let dump =
                    adlens::attribution::render_timeline(&analysis.forest, &analysis.attribution);
                emit(&path, dump.as_bytes())?;
            }
            if let Some(dir) = csv_dir {
                write_page_csv_dir(&dir, &analysis.report)?;
            }
            emit(
                &out,
                AnalyzeReport::new(analysis.report, &rules, &opts)
                    .to_json()
                    .as_bytes(),
            )
        }
        Command::Corpus {
            root,
            common,
            wot,
            vt,
            ranks,
            out,
            csv_dir,
        } => {
            let (rules, analyze) = options(&common)?;
            let mut scores = ScoreTable::default();
            if let Some(p) = wot {
                scores.load_wot(&p)?;
            }
            if let Some(p) = vt {
                scores.load_vt(&p)?;
            }
            if let Some(p) = ranks {
                scores.load_ranks(&p)?;
            }
            let opts = CorpusOptions {
                analyze,
                scores,
                workers,
            };
            let report = run_corpus(&root, &rules, &opts)?;
            if let Some(dir) = csv_dir {
                write_corpus_csv_dir(&dir, &report)?;
            }
            emit(&out, report.to_json().as_bytes())
        }
        Command::Graph {
            bundle,
            filters,
            format,
            out,
        } => {
            let rules = RuleSet::load(&filters)?;
            let analysis = with_workers(workers, || {
                analyze_dir(&bundle, &rules, &AnalyzeOptions::default())
            })?;
            emit(&out, &export_graph(&analysis.graph, format))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adlens: {e}");
            ExitCode::FAILURE
        }
    }
}
