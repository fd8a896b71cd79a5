use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gesture_lang::behavior::{Execution, SimExecutor, TickRecord};
use gesture_lang::classify::bundled::{evaluate, train_bundled, bundled_static_model, ClassifierReport};
use gesture_lang::classify::{GestureSet, StaticModel};
use gesture_lang::episode::{episode_log, episodes, probability_table};
use gesture_lang::handstream::read_stream;
use gesture_lang::pipeline::detect_stream;
use gesture_lang::session::metrics::report_metrics;
use gesture_lang::session::scenario::{catalog, find, replay, run_scenario, ScenarioError, ScenarioReport, SessionSource};
use gesture_lang::session::{to_jsonl, Mode, SessionConfig, SessionFile, SessionHeader};
use gesture_lang::simworld::{scene_document, scenes, WorldState};

use crate::server::{ServeConfig, Server};

#[derive(Debug, Parser)]
#[command(name = "gesture", version, about = "Gesture pseudo-language interpreter")]
pub struct Cli {
    /// Built-in scene: empty, grid9, tabletop, occupied-bowl, stacked, open-drawer.
    #[arg(long, global = true)]
    pub scene: Option<String>,
    /// TOML session config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// teleop, low_level_gesture or high_level_gesture.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and print their reports. Without names, runs the
    /// evaluated scenarios in every mode and adds the metrics table.
    Run {
        scenarios: Vec<String>,
        /// Recorded session to use instead of the scripted one.
        #[arg(long)]
        session: Option<PathBuf>,
        /// Write the session that was run (scripted source only).
        #[arg(long)]
        record: Option<PathBuf>,
        /// Write the outbound event log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Print reports as JSON.
        #[arg(long)]
        json: bool,
        /// Print the comparison table.
        #[arg(long)]
        metrics: bool,
    },
    /// Replay a session file.
    Replay {
        file: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Balanced accuracy of every classifier on the held-out synthetic sets.
    Bench {
        /// Static model file; the bundled model by default.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Train the static classifier on the synthetic set for `--seed`.
    TrainStatic {
        #[arg(long)]
        out: PathBuf,
    },
    /// Probability timeline with activations, for plotting.
    PlotEpisode {
        /// Hand-frame stream file.
        #[arg(long, conflicts_with = "scenario")]
        frames: Option<PathBuf>,
        /// Render the high-level script of a scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Print the event log instead of the timeline.
        #[arg(long)]
        events: bool,
    },
    /// Serve the WebSocket event stream.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 1024)]
        buffer: usize,
        /// Executor ticks per second while a plan runs.
        #[arg(long)]
        tick_hz: Option<f64>,
    },
    /// Behavior tree of a scenario goal as an indented outline.
    Explain {
        scenario: String,
        /// Show the tree before every tick of a reliable run.
        #[arg(long)]
        trace: bool,
    },
    /// List scenarios.
    Scenarios,
}

pub fn load_config(path: Option<&Path>) -> Result<SessionConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SessionConfig::from_toml(&text)?)
        }
        None => Ok(SessionConfig::default()),
    }
}

fn builtin_scene(name: &str) -> Result<WorldState> {
    scenes::builtin(name).with_context(|| format!("unknown scene `{name}`"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs every non-serving command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Run { scenarios, session, record, log, json, metrics } => {
            run(cli, &config, scenarios, session.as_deref(), record.as_deref(), log.as_deref(), *json, *metrics, out)
        }
        Command::Replay { file, log } => {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let mut f = SessionFile::parse(&text)?;
            if let Some(scene) = &cli.scene {
                f.header.world = Some(scene_document(&builtin_scene(scene)?));
            }
            if let Some(mode) = cli.mode {
                f.header.mode = mode;
            }
            let (report, events) = replay(&f, &config)?;
            if let Some(p) = log {
                write_file(p, &to_jsonl(&events))?;
            }
            writeln!(out, "{}", report.to_json())?;
            Ok(())
        }
        Command::Bench { model, json } => {
            let model = match model {
                Some(p) => StaticModel::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
                None => bundled_static_model(),
            };
            let r = evaluate(&GestureSet::default(), &model, cli.seed)?;
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
            } else {
                write!(out, "{}", bench_table(&r))?;
            }
            Ok(())
        }
        Command::TrainStatic { out: path } => {
            let set = GestureSet::default();
            let model = train_bundled(&set, cli.seed)?;
            write_file(path, &model.to_json())?;
            let r = evaluate(&set, &model, cli.seed)?;
            writeln!(out, "wrote {} (held-out BA {:.3})", path.display(), r.static_probabilistic)?;
            Ok(())
        }
        Command::PlotEpisode { frames, scenario, events } => {
            let (world, stream) = match (frames, scenario) {
                (Some(p), _) => {
                    let file = std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
                    let world = builtin_scene(cli.scene.as_deref().unwrap_or("tabletop"))?;
                    (world, read_stream(std::io::BufReader::new(file))?)
                }
                (None, Some(name)) => {
                    let s = find(name).with_context(|| format!("unknown scenario `{name}`"))?;
                    let world = s.world();
                    let frames = s.script.render(&world, 0.0, cli.seed)?;
                    (world, frames)
                }
                (None, None) => bail!("give --frames or --scenario"),
            };
            let (frames, samples) = detect_stream(&config.detector(), &stream, Some(&world))?;
            let eps = episodes(&frames, &samples, &config.episode);
            if *events {
                write!(out, "{}", episode_log(&eps))?;
            } else {
                let all: Vec<_> = eps.iter().flat_map(|e| e.events.iter().cloned()).collect();
                write!(out, "{}", probability_table(&samples, &all))?;
            }
            Ok(())
        }
        Command::Explain { scenario, trace } => explain(scenario, *trace, &config, out),
        Command::Scenarios => {
            for s in catalog() {
                writeln!(out, "{:<22} {:<14} {}", s.name, s.scene, s.description)?;
            }
            Ok(())
        }
        Command::Serve { .. } => bail!("serve runs on its own runtime; use `serve`"),
    }
}

pub fn bench_table(r: &ClassifierReport) -> String {
    let rows = [
        ("static", "probabilistic", r.static_probabilistic),
        ("static", "deterministic rules", r.static_rules),
        ("dynamic", "DTW", r.dynamic_dtw),
        ("dynamic", "Euclidean", r.dynamic_euclidean),
    ];
    let mut s = format!("{:<8} {:<20} {:>6}\n", "channel", "method", "BA");
    for (c, m, v) in rows {
        s.push_str(&format!("{c:<8} {m:<20} {:>5.1}%\n", v * 100.0));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn run(
    cli: &Cli,
    config: &SessionConfig,
    names: &[String],
    session: Option<&Path>,
    record: Option<&Path>,
    log: Option<&Path>,
    json: bool,
    metrics: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let all = names.is_empty();
    let names: Vec<String> = if all {
        gesture_lang::session::scenario::EVALUATED.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    let modes: Vec<Mode> = cli.mode.map_or_else(|| Mode::ALL.to_vec(), |m| vec![m]);
    let single = names.len() == 1 && modes.len() == 1;
    if (session.is_some() || record.is_some() || log.is_some()) && !single {
        bail!("--session, --record and --log need exactly one scenario and --mode");
    }
    let mut reports: Vec<ScenarioReport> = Vec::new();
    for name in &names {
        for &mode in &modes {
            let source = match session {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    SessionSource::Recorded(SessionFile::parse(&text)?)
                }
                None => SessionSource::Scripted,
            };
            if let Some(p) = record {
                let s = find(name).with_context(|| format!("unknown scenario `{name}`"))?;
                write_file(p, &s.session(mode, cli.seed)?.to_text())?;
            }
            match run_scenario(name, mode, source, config, cli.seed) {
                Ok((r, events)) => {
                    if let Some(p) = log {
                        write_file(p, &to_jsonl(&events))?;
                    }
                    reports.push(r);
                }
                Err(ScenarioError::TeleopUnsupported(why)) if !single => {
                    writeln!(out, "{name:<22} {mode:<19} skipped: {why}")?;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&reports)?)?;
    } else {
        for r in &reports {
            writeln!(
                out,
                "{:<22} {:<19} {:<7} interactions {:>3}  inputs {:>4}  ticks {:>3}  time {:>6.2}s{}",
                r.scenario,
                r.mode.name(),
                if r.success { "success" } else { "failed" },
                r.interaction_events,
                r.input_events,
                r.total_ticks,
                r.wall_time,
                r.failure_reason.as_ref().map(|f| format!("  ({f})")).unwrap_or_default()
            )?;
        }
    }
    if metrics || all {
        writeln!(out)?;
        write!(out, "{}", report_metrics(&reports))?;
    }
    Ok(())
}

fn explain(name: &str, trace: bool, config: &SessionConfig, out: &mut dyn Write) -> Result<()> {
    let s = find(name).with_context(|| format!("unknown scenario `{name}`"))?;
    let mut world = s.world();
    let task = s.goal()?;
    let mut exec = Execution::new(task, &world, config.execution.budget);
    let (goals, tree) = exec.preview(&world)?;
    writeln!(out, "task {name}")?;
    for g in &goals {
        writeln!(out, "  goal {g}")?;
    }
    write!(out, "{tree}")?;
    if trace {
        let mut executor = SimExecutor::reliable();
        while let Some(TickRecord { tick, primitive, result, .. }) = exec.step(&mut world, &mut executor) {
            match primitive {
                Some(p) => writeln!(out, "tick {tick}: {p} {}", result.as_deref().unwrap_or(""))?,
                None => writeln!(out, "tick {tick}: all goals hold")?,
            }
            if exec.is_finished() {
                break;
            }
            if let Ok((_, tree)) = exec.preview(&world) {
                write!(out, "{tree}")?;
            }
        }
        writeln!(out, "outcome {}", exec.report().outcome)?;
    }
    Ok(())
}

/// Builds the serving config from the global flags.
pub fn serve_config(cli: &Cli, addr: SocketAddr, buffer: usize, tick_hz: Option<f64>) -> Result<ServeConfig> {
    let header = SessionHeader {
        scene: cli.scene.clone(),
        mode: cli.mode.unwrap_or_default(),
        seed: cli.seed,
        ..Default::default()
    };
    Ok(ServeConfig { addr, buffer, tick_hz, session: load_config(cli.config.as_deref())?, header })
}

pub async fn serve(config: ServeConfig) -> Result<()> {
    let server = Server::bind(config).await?;
    tracing::info!("listening on ws://{}/ws/<session>", server.local_addr());
    server
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
