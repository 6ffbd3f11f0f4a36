use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hill_core::engine::{Engine, SystemClock};
use hill_core::factor::validate_instrument;
use hill_core::gate::{Decision, FlagKind, GatePolicy};
use hill_core::ingest::Prototype;
use hill_core::instrument::{default_instrument, Dimension, Instrument};
use hill_core::linalg::matrix_from_rows;
use hill_core::model::{init_model, DEFAULT_FORGETTING, DEFAULT_RIDGE};
use hill_core::planner::PlanningStatistic;
use hill_core::simulate::{simulate, PopulationSpec, SimulationOptions};
use hill_core::store::DataDir;
use serde_json::{json, Value};

pub const DATA_DIR_ENV: &str = "HILL_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "hill", version, about = "Design cycles with a human quality gate")]
pub struct Cli {
    /// Directory holding the event log and snapshot.
    #[arg(long, global = true, env = DATA_DIR_ENV, default_value = "hill-data")]
    pub data_dir: PathBuf,

    /// Rank dimensions by median instead of mean when planning.
    #[arg(long, global = true)]
    pub median: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Start a new data directory with a custom instrument or model prior.
    Init(InitArgs),
    #[command(subcommand)]
    Cycle(CycleCmd),
    #[command(subcommand)]
    Prototype(PrototypeCmd),
    /// Ingest survey responses (JSON array or JSON Lines; `-` for stdin).
    Ingest {
        #[arg(long)]
        cycle: String,
        file: PathBuf,
    },
    /// Compute and record per-dimension feedback.
    Score {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        prototype: Option<String>,
    },
    #[command(subcommand)]
    Gate(GateCmd),
    #[command(subcommand)]
    Story(StoryCmd),
    /// Select sprint scope (with --capacity) or show the current plan.
    Plan {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        capacity: Option<i64>,
    },
    /// Train the model on the cycle's newly accepted responses.
    Train {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        forgetting: Option<f64>,
    },
    /// Predict the overall rating from four composite scores.
    Predict {
        #[arg(allow_negative_numbers = true)]
        novelty: f64,
        #[arg(allow_negative_numbers = true)]
        energy: f64,
        #[arg(allow_negative_numbers = true)]
        simplicity: f64,
        #[arg(allow_negative_numbers = true)]
        tool: f64,
    },
    /// Show model weights, version and metric history.
    Metrics,
    /// Run the full cycle pipeline and close the cycle.
    Run {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        capacity: i64,
    },
    /// Simulate a population through several cycles (does not touch the data directory).
    Simulate(SimulateArgs),
    /// Check reliability and factor structure of item-level data (CSV with item-name header).
    ValidateInstrument {
        file: PathBuf,
        #[arg(long)]
        instrument: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Static dashboard assets to serve for non-API paths.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Write a snapshot of the current state next to the log.
    Snapshot,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub instrument: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = DEFAULT_FORGETTING)]
    pub forgetting: f64,
}

#[derive(Debug, Subcommand)]
pub enum CycleCmd {
    Create {
        id: String,
        #[arg(long)]
        start: NaiveDate,
        #[arg(long, default_value_t = 14)]
        days: i64,
    },
    /// planned → running → testing.
    Advance { id: String },
    List,
}

#[derive(Debug, Subcommand)]
pub enum PrototypeCmd {
    Add {
        id: String,
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        title: String,
        #[arg(long = "asset")]
        assets: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DecisionArg {
    Accept,
    Reject,
}

#[derive(Debug, Subcommand)]
pub enum GateCmd {
    /// Screen pending responses and queue the ones needing review.
    Screen {
        #[arg(long)]
        cycle: String,
        /// Queue clean responses too instead of accepting them.
        #[arg(long)]
        review_all: bool,
    },
    /// Open review items, optionally only those with a given flag.
    List {
        #[arg(long)]
        flag: Option<String>,
    },
    Decide {
        response: String,
        decision: DecisionArg,
        #[arg(long)]
        engineer: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum StoryCmd {
    Draft {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        category: String,
        #[arg(long)]
        narrative: String,
        #[arg(long = "criterion")]
        criteria: Vec<String>,
        #[arg(long = "source")]
        sources: Vec<String>,
    },
    Estimate { id: u64, points: i64 },
    Tasks {
        id: u64,
        #[arg(required = true)]
        tasks: Vec<String>,
    },
    /// Mark a dimension as not addressed this sprint.
    Skip {
        #[arg(long)]
        cycle: String,
        #[arg(long)]
        dimension: String,
        #[arg(long)]
        undo: bool,
    },
    List {
        #[arg(long)]
        cycle: String,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub cycles: usize,
    /// PopulationSpec as JSON; defaults apply otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FORGETTING)]
    pub forgetting: f64,
    #[arg(long, default_value_t = 8)]
    pub capacity: i64,
    /// Also write the generated responses (JSON Lines) here.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instrument(path: Option<&Path>) -> anyhow::Result<Instrument> {
    match path {
        Some(p) => Ok(serde_json::from_str(&read_input(p)?)?),
        None => Ok(default_instrument()),
    }
}

fn open(cli: &Cli) -> anyhow::Result<(DataDir, Engine)> {
    let data = DataDir::new(&cli.data_dir);
    let mut engine = data
        .open(Box::new(SystemClock), || {
            Ok((default_instrument(), init_model(DEFAULT_RIDGE, DEFAULT_FORGETTING)?))
        })
        .with_context(|| format!("opening {}", cli.data_dir.display()))?;
    if cli.median {
        engine.config.statistic = PlanningStatistic::Median;
    }
    Ok((data, engine))
}

fn parse_dimension(s: &str) -> anyhow::Result<Dimension> {
    Ok(s.parse::<Dimension>()?)
}

/// Item-level CSV → `n × 12` matrix in instrument order.
pub fn read_item_csv(text: &str, instrument: &Instrument) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let mut index = Vec::with_capacity(instrument.item_count());
    for item in instrument.items() {
        let col = header
            .iter()
            .position(|h| h.trim() == item)
            .with_context(|| format!("column for item {item:?} missing"))?;
        index.push(col);
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = index
            .iter()
            .map(|&c| {
                record
                    .get(c)
                    .unwrap_or_default()
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("row {}: bad number in column {c}", line + 1))
            })
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Executes one command and returns its JSON output.
pub fn run(cli: Cli) -> anyhow::Result<Value> {
    let out = match &cli.command {
        Command::Init(args) => {
            let data = DataDir::new(&cli.data_dir);
            if data.log_path().exists() {
                bail!("{} already holds an event log", cli.data_dir.display());
            }
            let instrument = load_instrument(args.instrument.as_deref())?;
            let model = init_model(args.ridge, args.forgetting)?;
            let engine = data.open(Box::new(SystemClock), || Ok((instrument, model)))?;
            json!({ "data_dir": cli.data_dir, "last_seq": engine.state().last_seq })
        }
        Command::Cycle(cmd) => {
            let (_, mut e) = open(&cli)?;
            match cmd {
                CycleCmd::Create { id, start, days } => serde_json::to_value(e.create_cycle(id, *start, *days)?)?,
                CycleCmd::Advance { id } => {
                    let to = e.advance_cycle(id)?;
                    json!({ "cycle_id": id, "status": to })
                }
                CycleCmd::List => serde_json::to_value(e.state().cycles.values().collect::<Vec<_>>())?,
            }
        }
        Command::Prototype(PrototypeCmd::Add {
            id,
            cycle,
            title,
            assets,
        }) => {
            let (_, mut e) = open(&cli)?;
            let p = Prototype {
                prototype_id: id.clone(),
                cycle_id: cycle.clone(),
                title: title.clone(),
                display_assets: assets.clone(),
            };
            e.register_prototype(p.clone())?;
            serde_json::to_value(p)?
        }
        Command::Ingest { cycle, file } => {
            let text = read_input(file)?;
            let (_, mut e) = open(&cli)?;
            serde_json::to_value(e.ingest_text(cycle, &text)?)?
        }
        Command::Score { cycle, prototype } => {
            let (_, mut e) = open(&cli)?;
            serde_json::to_value(e.score(cycle, prototype.as_deref())?)?
        }
        Command::Gate(cmd) => {
            let (_, mut e) = open(&cli)?;
            match cmd {
                GateCmd::Screen { cycle, review_all } => {
                    let policy = GatePolicy {
                        auto_accept_clean: !review_all,
                        ..e.config.policy.clone()
                    };
                    let queued = e.enqueue_flagged(cycle, &policy)?;
                    json!({ "cycle_id": cycle, "queued": queued })
                }
                GateCmd::List { flag } => {
                    let kind: Option<FlagKind> = flag
                        .as_deref()
                        .map(|f| serde_json::from_value(json!(f)))
                        .transpose()
                        .context("flag must be straightline, acquiescence or outlier")?;
                    let items: Vec<_> = e
                        .review_queue()
                        .into_iter()
                        .filter(|i| kind.is_none_or(|k| i.flags.iter().any(|f| f.kind == k)))
                        .collect();
                    serde_json::to_value(items)?
                }
                GateCmd::Decide {
                    response,
                    decision,
                    engineer,
                } => {
                    let d = match decision {
                        DecisionArg::Accept => Decision::Accept,
                        DecisionArg::Reject => Decision::Reject,
                    };
                    serde_json::to_value(e.review_decision(response, d, engineer)?)?
                }
            }
        }
        Command::Story(cmd) => {
            let (_, mut e) = open(&cli)?;
            match cmd {
                StoryCmd::Draft {
                    cycle,
                    category,
                    narrative,
                    criteria,
                    sources,
                } => serde_json::to_value(e.draft_story(
                    cycle,
                    parse_dimension(category)?,
                    narrative,
                    criteria.clone(),
                    sources.clone(),
                )?)?,
                StoryCmd::Estimate { id, points } => serde_json::to_value(e.estimate_story(*id, *points)?)?,
                StoryCmd::Tasks { id, tasks } => serde_json::to_value(e.task_breakdown(*id, tasks.clone())?)?,
                StoryCmd::Skip { cycle, dimension, undo } => {
                    let d = parse_dimension(dimension)?;
                    e.skip_dimension(cycle, d, !undo)?;
                    json!({ "cycle_id": cycle, "skipped": e.state().skipped_dimensions(cycle) })
                }
                StoryCmd::List { cycle } => serde_json::to_value(e.state().stories_in_cycle(cycle))?,
            }
        }
        Command::Plan { cycle, capacity } => {
            let (_, mut e) = open(&cli)?;
            if let Some(c) = capacity {
                e.select_scope(cycle, *c)?;
            }
            serde_json::to_value(e.plan(cycle)?)?
        }
        Command::Train { cycle, forgetting } => {
            let (_, mut e) = open(&cli)?;
            serde_json::to_value(e.train(cycle, *forgetting)?)?
        }
        Command::Predict {
            novelty,
            energy,
            simplicity,
            tool,
        } => {
            let (_, e) = open(&cli)?;
            serde_json::to_value(e.predict(&[*novelty, *energy, *simplicity, *tool])?)?
        }
        Command::Metrics => {
            let (_, e) = open(&cli)?;
            let m = e.model();
            json!({
                "model_version": m.version,
                "weights": m.weights,
                "forgetting": m.forgetting,
                "ridge": m.ridge,
                "updates_seen": m.updates_seen,
                "history": e.metrics(),
            })
        }
        Command::Run { cycle, capacity } => {
            let (_, mut e) = open(&cli)?;
            serde_json::to_value(e.run_cycle_pipeline(cycle, *capacity)?)?
        }
        Command::Simulate(args) => simulate_cmd(args)?,
        Command::ValidateInstrument { file, instrument } => {
            let instrument = load_instrument(instrument.as_deref())?;
            let rows = read_item_csv(&read_input(file)?, &instrument)?;
            let data = matrix_from_rows(&rows)?;
            serde_json::to_value(validate_instrument(&data, &instrument)?)?
        }
        Command::Serve { addr, ui_dir } => {
            let (_, e) = open(&cli)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::server::serve(e, *addr, ui_dir.clone()))?;
            json!({ "stopped": true })
        }
        Command::Snapshot => {
            let (data, e) = open(&cli)?;
            let path = data.snapshot(&e)?;
            json!({ "snapshot": path, "last_seq": e.state().last_seq })
        }
    };
    Ok(out)
}

fn simulate_cmd(args: &SimulateArgs) -> anyhow::Result<Value> {
    let mut spec: PopulationSpec = match &args.spec {
        Some(p) => serde_json::from_str(&read_input(p)?).context("parsing population spec")?,
        None => PopulationSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let options = SimulationOptions {
        forgetting: args.forgetting,
        capacity: args.capacity,
        ..SimulationOptions::default()
    };
    let sim = simulate(&spec, args.cycles, &options)?;
    if let Some(path) = &args.dataset {
        let mut text = String::new();
        for r in &sim.dataset.responses {
            text.push_str(&serde_json::to_string(&r.to_document())?);
            text.push('\n');
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(json!({
        "spec": spec,
        "cycles": sim.reports,
        "final_weights": sim.engine.model().weights,
    }))
}
