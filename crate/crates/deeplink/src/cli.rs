//! Command-line frontend.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use deeplink_core::{count_declared_deep_links, CrawlOptions, FragmentTransitionGraph};

use crate::formats::{self, export_manifest, to_json, write_file, FormatError};
use crate::pipeline::{self, ErrorBody, PipelineError};
use crate::report::AnalysisReport;

#[derive(Debug, Parser)]
#[command(name = "deeplink", version, about = "Synthesize and replay deep links for app models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the navigation graph and shortcuts and write the report.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Longest path considered, counting the launch (default: number of activities).
        #[arg(long)]
        max_len: Option<usize>,
        /// Also write the navigation graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Crawl the fragments of one activity and write its fragment graph.
    Crawl {
        model: PathBuf,
        #[arg(long)]
        activity: String,
        /// Entry script; defaults to following the shortest shortcut.
        #[arg(long)]
        entry: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        options: CrawlFlags,
    },
    /// Build a release manifest for a selection.
    Link {
        model: PathBuf,
        /// Selection file.
        #[arg(long, required_unless_present = "all")]
        select: Option<PathBuf>,
        /// Select every replayable activity and every crawled fragment.
        #[arg(long, conflicts_with = "select")]
        all: bool,
        /// Fragment graphs from earlier crawls.
        #[arg(long)]
        ftg: Vec<PathBuf>,
        /// Crawl activities that are needed but have no fragment graph.
        #[arg(long)]
        auto_crawl: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        options: CrawlFlags,
    },
    /// Replay a deep link; exits with 0 only if it reaches its target.
    Replay {
        model: PathBuf,
        manifest: PathBuf,
        uri: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append the trace as one JSON line to this file.
        #[arg(long)]
        jsonl: Option<PathBuf>,
    },
    /// Print the number of activities with a declared deep-link filter.
    CountManifest { model: PathBuf },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CrawlFlags {
    /// Click budget per crawl.
    #[arg(long, default_value_t = deeplink_core::crawl::DEFAULT_STEP_BUDGET)]
    pub budget: usize,
    /// Record edges into already known fragments.
    #[arg(long)]
    pub cross_edges: bool,
    /// Identify views without a resource id by tree position.
    #[arg(long)]
    pub position_fallback: bool,
}

impl CrawlFlags {
    fn options(&self) -> CrawlOptions {
        CrawlOptions { step_budget: self.budget, cross_edges: self.cross_edges, position_fallback: self.position_fallback }
    }
}

/// Exit code for errors; replay verdicts other than Reached* exit with 1.
pub const EXIT_ERROR: i32 = 2;

enum Outcome {
    Ok,
    NotReached,
}

/// Runs one command line, writing artifacts to `stdout` (when no `--out`
/// is given) and errors as JSON to `stderr`.
pub fn run(args: impl IntoIterator<Item = String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let body = ErrorBody::new("UsageError", e.to_string());
            let _ = stderr.write_all(to_json(&body).as_bytes());
            return EXIT_ERROR;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::NotReached) => 1,
        Err(e) => {
            let _ = stderr.write_all(to_json(&ErrorBody::from(&e)).as_bytes());
            EXIT_ERROR
        }
    }
}

fn emit(out: &Option<PathBuf>, contents: &str, stdout: &mut dyn Write) -> Result<(), PipelineError> {
    match out {
        Some(path) => write_file(path, contents)?,
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| FormatError::Io { path: "<stdout>".into(), message: e.to_string() })?,
    }
    Ok(())
}

fn load_ftgs(paths: &[PathBuf]) -> Result<BTreeMap<String, FragmentTransitionGraph>, PipelineError> {
    let mut ftgs = BTreeMap::new();
    for path in paths {
        let ftg = formats::parse_ftg(&formats::read_file(path)?)?;
        ftgs.insert(ftg.activity.clone(), ftg);
    }
    Ok(ftgs)
}

fn load(path: &Path) -> Result<deeplink_core::AppModel, PipelineError> {
    Ok(formats::load_app_model(path)?)
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Outcome, PipelineError> {
    match command {
        Command::Analyze { model, out, max_len, dot } => {
            let model = load(&model)?;
            let analysis = pipeline::analyze(&model, max_len)?;
            if let Some(dot) = dot {
                write_file(&dot, &formats::navgraph_dot(&analysis.graph))?;
            }
            emit(&out, &to_json(&AnalysisReport::new(&model, &analysis)), stdout)?;
        }
        Command::Crawl { model, activity, entry, out, dot, options } => {
            let model = load(&model)?;
            let analysis = pipeline::analyze(&model, None)?;
            let entry = entry.map(|p| formats::read_file(&p).and_then(|t| formats::parse_entry_script(&t))).transpose()?;
            let ftg = pipeline::crawl(&model, &analysis, &activity, entry.as_ref(), &options.options())?;
            if let Some(dot) = dot {
                write_file(&dot, &formats::ftg_dot(&ftg))?;
            }
            emit(&out, &to_json(&ftg), stdout)?;
        }
        Command::Link { model, select, all, ftg, auto_crawl, out, options } => {
            let model = load(&model)?;
            let analysis = pipeline::analyze(&model, None)?;
            let mut ftgs = load_ftgs(&ftg)?;
            let selection = if all {
                if auto_crawl {
                    for (activity, graph) in pipeline::crawl_all(&model, &analysis, &options.options())? {
                        ftgs.entry(activity).or_insert(graph);
                    }
                }
                pipeline::select_all(&analysis, &ftgs)
            } else {
                let path = select.expect("clap requires --select without --all");
                let selection = formats::parse_selection(&formats::read_file(&path)?)?;
                if auto_crawl {
                    pipeline::crawl_selected(&model, &analysis, &mut ftgs, &selection, &options.options())?;
                }
                selection
            };
            let manifest = pipeline::link(&model, &analysis, &ftgs, &selection)?;
            emit(&out, &export_manifest(&manifest), stdout)?;
        }
        Command::Replay { model, manifest, uri, out, jsonl } => {
            let model = load(&model)?;
            let manifest = formats::import_manifest(&formats::read_file(&manifest)?, Some(&model))?;
            let trace = pipeline::replay(&model, &manifest, &uri)?;
            if let Some(path) = jsonl {
                append(&path, &formats::traces_jsonl(std::slice::from_ref(&trace)))?;
            }
            emit(&out, &to_json(&trace), stdout)?;
            let _ = writeln!(stderr, "{}", trace.summary());
            if !trace.verdict.is_reached() {
                return Ok(Outcome::NotReached);
            }
        }
        Command::CountManifest { model } => {
            let model = load(&model)?;
            emit(&None, &format!("{}\n", count_declared_deep_links(&model)), stdout)?;
        }
        Command::Serve { port, corpus_dir } => {
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| FormatError::Io { path: "<runtime>".into(), message: e.to_string() })?;
            runtime
                .block_on(crate::service::serve(port, corpus_dir))
                .map_err(|e| FormatError::Io { path: format!("port {port}"), message: e.to_string() })?;
        }
    }
    Ok(Outcome::Ok)
}

fn append(path: &Path, line: &str) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| FormatError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    file.write_all(line.as_bytes()).map_err(io)?;
    Ok(())
}
