use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use asmon::config::MonitorConfig;
use asmon::eval::{evaluate, predictions_from_rows, write_per_frame_csv, PredictionSource};
use asmon::fusion::{
    parse_calibrations, parse_tray_regions, write_calibrations, write_tray_regions, CameraCalibration, Fuser,
    ObservationLayout, TrayRegion,
};
use asmon::ingest::{DetlogReader, DetlogWriter, FrameBundle, LiveOptions, LiveServer, Replay, SyncStats};
use asmon::monitor::{FrameReport, Monitor, MonitorSummary};
use asmon::planner::{build_state_graph, enumerate_plans, transition_matrix, StateGraph};
use asmon::reasoner::{read_timeline_csv, write_timeline_csv};
use asmon::simulator::{
    sample_session, GroundTruthTimeline, NoiseModel, Scene, SessionShape, Timing, MAX_ENUMERATED_PLANS,
};
use asmon::task::{parse_task_definition, TaskDefinition};

use crate::{CliError, Column, EvalArgs, MonitorArgs, PlanArgs, ReplayArgs, SimulateArgs, ValidateArgs};

type CliResult<T> = Result<T, CliError>;

fn invalid(e: impl ToString) -> CliError {
    CliError::Invalid(e.to_string())
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Output errors, except that a closed pipe ends the output quietly.
fn stdout_result(r: io::Result<()>) -> CliResult<bool> {
    match r {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(runtime(e)),
    }
}

pub fn load_config(path: Option<&Path>) -> CliResult<MonitorConfig> {
    let mut config = match path {
        Some(p) => MonitorConfig::load(p).map_err(invalid)?,
        None => MonitorConfig::default(),
    };
    config.apply_env().map_err(invalid)?;
    config.validate().map_err(invalid)?;
    Ok(config)
}

fn read_input(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {what} file {}: {e}", path.display())))
}

fn open_input(path: &Path, what: &str) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::Invalid(format!("cannot open {what} file {}: {e}", path.display())))
}

fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_task(path: &Path) -> CliResult<TaskDefinition> {
    let text = read_input(path, "task")?;
    parse_task_definition(&text).map_err(|e| {
        let lines: Vec<String> = e
            .diagnostics
            .iter()
            .map(|d| format!("{}:{d}", path.display()))
            .collect();
        CliError::Invalid(lines.join("\n"))
    })
}

fn load_graph(task: &TaskDefinition) -> CliResult<StateGraph> {
    build_state_graph(task).map_err(invalid)
}

fn load_calibrations(path: &Path) -> CliResult<Vec<CameraCalibration>> {
    let text = read_input(path, "calibration")?;
    parse_calibrations(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn load_trays(path: &Path) -> CliResult<Vec<TrayRegion>> {
    let text = read_input(path, "tray")?;
    parse_tray_regions(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn validate(config: &MonitorConfig, args: &ValidateArgs) -> CliResult<()> {
    let task = load_task(&args.task)?;
    let graph = load_graph(&task)?;
    println!(
        "task: {} objects ({} elements, {} trays), {} predicate schemas, {} steps",
        task.objects.len(),
        task.element_count(),
        task.tray_count(),
        task.predicate_schemas.len(),
        task.steps.len()
    );
    println!("state graph: {} nodes, {} edges", graph.node_count(), graph.edges.len());
    let cameras = args.calib.as_deref().map(load_calibrations).transpose()?;
    let regions = args.trays.as_deref().map(load_trays).transpose()?;
    if let Some(c) = &cameras {
        println!("calibration: {} cameras", c.len());
    }
    if let Some(r) = &regions {
        println!("trays: {} regions", r.len());
    }
    match (cameras, regions) {
        (Some(c), Some(r)) => {
            Fuser::new(ObservationLayout::from_task(&task), c, r, config.fusion_config()).map_err(invalid)?;
        }
        (Some(c), None) => {
            Fuser::new(
                ObservationLayout::from_task(&task),
                c,
                Vec::new(),
                config.fusion_config(),
            )
            .map_err(invalid)?;
        }
        _ => {}
    }
    println!("ok");
    Ok(())
}

pub fn plan(config: &MonitorConfig, args: &PlanArgs) -> CliResult<()> {
    let task = load_task(&args.task)?;
    let graph = load_graph(&task)?;
    let stay = args.stay_prob.unwrap_or(config.reasoner.stay_prob);
    let matrix = transition_matrix(&graph, stay).map_err(invalid)?;

    let plans = enumerate_plans(&graph, MAX_ENUMERATED_PLANS);
    let count = if plans.len() >= MAX_ENUMERATED_PLANS {
        format!("at least {MAX_ENUMERATED_PLANS}")
    } else {
        plans.len().to_string()
    };
    println!("nodes: {}", graph.node_count());
    println!("edges: {}", graph.edges.len());
    println!("final node: {}", graph.final_index);
    println!("plans: {count}");
    for (i, p) in plans.iter().take(args.plans).enumerate() {
        let names: Vec<&str> = p.iter().map(|&s| task.steps[s].name.as_str()).collect();
        println!("plan {i}: {}", names.join(" -> "));
    }
    if args.nodes {
        print!("{}", graph.to_text_dump(&task));
    }
    if let Some(path) = &args.dot {
        write_output(path, &graph.to_dot(&task))?;
    }
    if let Some(path) = &args.matrix {
        let mut w = create_output(path)?;
        let res = (0..matrix.size()).try_for_each(|i| {
            let row: Vec<String> = matrix.row(i).iter().map(|p| p.to_string()).collect();
            writeln!(w, "{}", row.join(","))
        });
        res.and_then(|_| w.flush()).map_err(runtime)?;
    }
    Ok(())
}

pub fn simulate(config: &MonitorConfig, args: &SimulateArgs) -> CliResult<()> {
    let task = load_task(&args.task)?;
    let graph = load_graph(&task)?;
    let layout = ObservationLayout::from_task(&task);
    let s = &config.simulator;
    let noise = NoiseModel {
        dropout_prob: args.dropout.unwrap_or(s.dropout_prob),
        confusion: NoiseModel::similar_pair_confusion(&layout.elements, args.confusion.unwrap_or(s.similar_confusion)),
        confidence_base: s.confidence_base,
        confidence_jitter: args.confidence_jitter.unwrap_or(s.confidence_jitter),
        position_jitter: args.position_jitter.unwrap_or(s.position_jitter),
        seed: args.seed,
    };
    let shape = SessionShape {
        step_frames: s.step_frames,
        step_jitter: s.step_jitter,
        total_frames: args.frames,
    };
    let scene = Scene::standard(&layout).map_err(invalid)?;
    let session = sample_session(&graph, &task, noise, shape, scene, Timing::default()).map_err(invalid)?;

    let timeline = session.timeline().clone();
    let scene = session.scene().clone();
    let mut log = DetlogWriter::create(&args.out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", args.out.display())))?;
    let mut messages = 0u64;
    for frame in session {
        for m in &frame.messages {
            log.write(m).map_err(runtime)?;
            messages += 1;
        }
    }
    log.finish().map_err(runtime)?;
    timeline.write_csv(create_output(&args.gt)?).map_err(runtime)?;
    if let Some(path) = &args.calib_out {
        write_output(path, &write_calibrations(&scene.cameras))?;
    }
    if let Some(path) = &args.trays_out {
        write_output(path, &write_tray_regions(&scene.tray_regions()))?;
    }

    let steps: Vec<&str> = timeline
        .entries()
        .iter()
        .filter_map(|e| e.step.map(|s| task.steps[s].name.as_str()))
        .collect();
    println!("plan: {}", steps.join(" -> "));
    println!("frames: {}", timeline.total_frames());
    println!("messages: {messages}");
    Ok(())
}

fn report_warning(r: &FrameReport) {
    if let Some(w) = &r.warning {
        let candidates: Vec<String> = w.candidates.iter().map(|(s, p)| format!("{s} ({p:.3})")).collect();
        eprintln!(
            "warning: frame {}: no confident state for {} frames; candidates {}",
            r.frame,
            w.frames,
            candidates.join(", ")
        );
    }
}

fn print_summary(summary: &MonitorSummary, sync: &SyncStats) {
    eprintln!(
        "frames {}, warnings {}, partial bundles {}, skipped detections {}",
        summary.frames, summary.warnings, summary.partial_bundles, summary.skipped_detections
    );
    eprintln!(
        "dropped messages: {} late, {} out of order, {} unknown camera",
        sync.late_dropped, sync.out_of_order_dropped, sync.unknown_camera_dropped
    );
    eprintln!(
        "latency per frame: mean {:.3} ms, max {:.3} ms",
        summary.mean_latency_us / 1000.0,
        summary.max_latency_us as f64 / 1000.0
    );
}

pub fn monitor(config: &MonitorConfig, args: &MonitorArgs) -> CliResult<()> {
    let task = load_task(&args.task)?;
    let graph = load_graph(&task)?;
    let cameras = load_calibrations(&args.calib)?;
    let regions = load_trays(&args.trays)?;
    let mut mon = Monitor::new(
        &task,
        &graph,
        cameras,
        regions,
        config.fusion_config(),
        config.reasoner_config(),
    )
    .map_err(invalid)?;
    let ids = mon.camera_ids();
    let window = config.sync.window_us;

    let mut handle = |b: &FrameBundle| match mon.process(b) {
        Ok(r) => report_warning(&r),
        Err(e) => log::error!("bundle at {}: {e}", b.bundle_time),
    };
    let mut failure = None;
    let sync = if let Some(addr) = &args.listen {
        let server =
            LiveServer::bind(addr.as_str()).map_err(|e| CliError::Runtime(format!("cannot listen on {addr}: {e}")))?;
        let local = server.local_addr().map_err(runtime)?;
        eprintln!("listening on {local}");
        let mut opts = LiveOptions::new(ids, window);
        opts.stall_timeout = Duration::from_millis(config.sync.stall_timeout_ms);
        opts.idle_timeout = args.idle_timeout_ms.map(Duration::from_millis);
        let stats = server.run(&opts, |b| handle(&b)).map_err(runtime)?;
        if stats.decode_errors > 0 {
            log::warn!("{} frames could not be decoded", stats.decode_errors);
        }
        stats.sync
    } else {
        let path = args.log.as_deref().expect("clap requires a source");
        open_input(path, "log")?;
        let mut replay = Replay::open(path, ids, window, args.speed)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        for b in replay.by_ref() {
            match b {
                Ok(b) => handle(&b),
                Err(e) => {
                    failure = Some(CliError::Runtime(format!("{}: {e}", path.display())));
                    break;
                }
            }
        }
        replay.stats()
    };

    let summary = mon.finish();
    match &args.out {
        Some(path) => write_timeline_csv(create_output(path)?, &summary.rows),
        None => write_timeline_csv(io::stdout().lock(), &summary.rows),
    }
    .map_err(runtime)?;
    print_summary(&summary, &sync);
    failure.map_or(Ok(()), Err)
}

fn log_cameras(path: &Path) -> CliResult<Vec<String>> {
    let mut ids = BTreeSet::new();
    let reader = DetlogReader::open(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    for m in reader {
        let m = m.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        if !ids.contains(&m.camera_id) {
            ids.insert(m.camera_id);
        }
    }
    Ok(ids.into_iter().collect())
}

pub fn replay(config: &MonitorConfig, args: &ReplayArgs) -> CliResult<()> {
    open_input(&args.log, "log")?;
    let cameras = if args.cameras.is_empty() {
        log_cameras(&args.log)?
    } else {
        args.cameras.clone()
    };
    let mut replay = Replay::open(&args.log, cameras, config.sync.window_us, args.speed)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", args.log.display())))?;
    let mut out = BufWriter::new(io::stdout().lock());
    let mut failure = None;
    let mut open = stdout_result(writeln!(out, "bundle_time,frame,cameras,detections,partial"))?;
    for b in replay.by_ref() {
        if !open {
            break;
        }
        let b = match b {
            Ok(b) => b,
            Err(e) => {
                failure = Some(CliError::Runtime(format!("{}: {e}", args.log.display())));
                break;
            }
        };
        let frame = b.per_camera.values().map(|m| m.frame_index).min().unwrap_or(0);
        let ids: Vec<&str> = b.per_camera.keys().map(String::as_str).collect();
        let detections: usize = b.per_camera.values().map(|m| m.detections.len()).sum();
        let line = writeln!(
            out,
            "{},{frame},{},{detections},{}",
            b.bundle_time,
            ids.join(";"),
            u8::from(b.partial)
        );
        open = stdout_result(line.and_then(|_| if args.speed > 0.0 { out.flush() } else { Ok(()) }))?;
    }
    if open {
        stdout_result(out.flush())?;
    }
    let s = replay.stats();
    eprintln!(
        "bundles {}, partial {}, dropped {} late, {} out of order, {} unknown camera",
        s.bundles, s.partial_bundles, s.late_dropped, s.out_of_order_dropped, s.unknown_camera_dropped
    );
    failure.map_or(Ok(()), Err)
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let rows = read_timeline_csv(open_input(&args.predicted, "timeline")?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", args.predicted.display())))?;
    let gt = GroundTruthTimeline::read_csv(open_input(&args.gt, "ground-truth")?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", args.gt.display())))?;
    let source = match args.column {
        Column::Path => PredictionSource::Path,
        Column::Map => PredictionSource::Map,
    };
    let predicted = predictions_from_rows(&rows, gt.total_frames(), source).map_err(invalid)?;
    let c = evaluate(&predicted, &gt, args.tol).map_err(invalid)?;
    println!("tolerance: {} frames", c.tolerance);
    println!(
        "precision: {:.4} ({}/{})",
        c.precision, c.matched_predicted, c.total_predicted
    );
    println!("recall: {:.4} ({}/{})", c.recall, c.matched_gt, c.total_gt);
    if let Some(path) = &args.per_frame {
        write_per_frame_csv(create_output(path)?, &c.per_frame).map_err(runtime)?;
    }
    Ok(())
}
