use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mobile_charger::classifier::{self, CnnModel, Tensor, TrainConfig};
use mobile_charger::delta_kin::{self, JointAngles};
use mobile_charger::geometry::{self, Vec3};
use mobile_charger::harness::{
    self, records, summarize, ClassifierBank, Config, DetectionEval, HarnessError,
};
use mobile_charger::tactile::{self, MisalignmentKind, MisalignmentLabel, TactileDataset};

#[derive(Parser, Debug)]
#[command(name = "mobile-charger", version, about = "Docking pipeline simulator for a mobile EV charger")]
struct Cli {
    /// JSON config file; missing sections take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed relevant to the subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// Print the default config and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl From<OutFormat> for records::Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => records::Format::Json,
            OutFormat::Csv => records::Format::Csv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Joint angles (degrees) for an actuator-frame target (cm).
    Ik {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
    },
    /// Platform position (cm) for three joint angles (degrees).
    Fk {
        #[arg(allow_negative_numbers = true)]
        theta1: f64,
        #[arg(allow_negative_numbers = true)]
        theta2: f64,
        #[arg(allow_negative_numbers = true)]
        theta3: f64,
    },
    /// Camera-frame point to actuator frame.
    Transform {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
        /// Map actuator frame back to camera frame instead.
        #[arg(long)]
        inverse: bool,
    },
    /// Generate a labelled tactile dataset as CSV.
    SynthTactile {
        #[arg(long)]
        kind: MisalignmentKind,
        #[arg(long)]
        n_per_class: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Train a classifier and write the model JSON.
    TrainClassifier {
        #[arg(long)]
        kind: MisalignmentKind,
        /// Tactile CSV to train on; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Classify every frame of a tactile CSV.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frames: PathBuf,
    },
    /// Run the docking experiment and export trial records.
    Simulate {
        /// Directory with angular.json, vertical.json and horizontal.json.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Skip tactile classification.
        #[arg(long)]
        no_classify: bool,
    },
    /// Summarize exported trial records.
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Detection AP, precision and recall for a JSON evaluation set.
    EvalDetection {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        iou: Option<f64>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e.exit_code() {
            1 => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(runtime),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, v: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(runtime)?;
    s.push('\n');
    emit(out, s.as_bytes())
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    match &cli.config {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

#[derive(Serialize)]
struct Classified {
    row: usize,
    label: MisalignmentLabel,
    value: f64,
    probabilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate: Option<classifier::GateDecision>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    if cli.print_default_config {
        return emit(cli.out.as_deref(), (Config::default().to_json_pretty() + "\n").as_bytes());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Usage("no subcommand given (see --help)".into()));
    };
    let out = cli.out.as_deref();
    match command {
        Command::Ik { x, y, z } => {
            let j = delta_kin::inverse_kinematics(&cfg.delta_geometry, Vec3::new(*x, *y, *z))
                .map_err(runtime)?;
            emit_json(out, &j)
        }
        Command::Fk { theta1, theta2, theta3 } => {
            let p = delta_kin::forward_kinematics(
                &cfg.delta_geometry,
                JointAngles { theta1: *theta1, theta2: *theta2, theta3: *theta3 },
            )
            .map_err(runtime)?;
            emit_json(out, &p)
        }
        Command::Transform { x, y, z, inverse } => {
            let p = Vec3::new(*x, *y, *z);
            let m = cfg.world.mount;
            let q = if *inverse {
                geometry::delta_to_camera(p, m.camera_pitch_deg, m.camera_offset_y)
            } else {
                geometry::camera_to_delta(p, m.camera_pitch_deg, m.camera_offset_y)
            };
            emit_json(out, &q)
        }
        Command::SynthTactile { kind, n_per_class, sigma } => {
            let ds = tactile::generate_dataset(
                *kind,
                n_per_class.unwrap_or(cfg.tactile.n_per_class),
                sigma.unwrap_or(cfg.tactile.noise_sigma),
                cli.seed.unwrap_or(cfg.tactile.dataset_seed),
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).map_err(runtime)?;
            emit(out, &buf)
        }
        Command::TrainClassifier { kind, data, epochs } => {
            let seed = cli.seed.unwrap_or(cfg.tactile.dataset_seed);
            let ds = match data {
                Some(p) => {
                    let file = std::fs::File::open(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
                    let frames = tactile::read_frames_csv(file).map_err(runtime)?;
                    let ds = TactileDataset::from_labelled(frames, seed).map_err(runtime)?;
                    if ds.kind != *kind {
                        return Err(CliError::Usage(format!("{} holds {} frames", p.display(), ds.kind)));
                    }
                    ds
                }
                None => tactile::generate_dataset(*kind, cfg.tactile.n_per_class, cfg.tactile.noise_sigma, seed)
                    .map_err(runtime)?,
            };
            let tc = TrainConfig {
                epochs: epochs.unwrap_or(cfg.train.epochs),
                seed: cli.seed.unwrap_or(cfg.train.seed),
                ..cfg.train
            };
            let report = classifier::train(&ds, &tc).map_err(runtime)?;
            eprintln!(
                "{kind}: best validation accuracy {:.4} at epoch {}",
                report.best_val_accuracy, report.best_epoch
            );
            match out {
                Some(p) => report.model.save(p).map_err(runtime),
                None => emit(None, (report.model.to_json().map_err(runtime)? + "\n").as_bytes()),
            }
        }
        Command::Classify { model, frames } => {
            let m = CnnModel::load(model).map_err(runtime)?;
            let file = std::fs::File::open(frames).map_err(|e| runtime(format!("{}: {e}", frames.display())))?;
            let rows = tactile::read_frames_csv(file).map_err(runtime)?;
            let mut results = Vec::with_capacity(rows.len());
            for (row, (frame, _)) in rows.iter().enumerate() {
                let t = Tensor::from(frame);
                let probabilities = m.predict_proba(&t).map_err(runtime)?;
                let label = m.classify(&t).map_err(runtime)?;
                let gate = (m.kind == MisalignmentKind::Angular)
                    .then(|| classifier::safety_gate(label, cfg.tactile.critical_angle_deg))
                    .transpose()
                    .map_err(runtime)?;
                results.push(Classified { row, label, value: label.value(), probabilities, gate });
            }
            emit_json(out, &results)
        }
        Command::Simulate { models, no_classify } => {
            if let Some(s) = cli.seed {
                cfg.experiment.master_seed = s;
            }
            let classify = cfg.experiment.classify && !no_classify;
            let records = if !classify {
                harness::run_trials(&cfg, None)?
            } else if let Some(dir) = models {
                let bank = ClassifierBank::load_dir(dir)?;
                harness::run_trials(&cfg, Some(&bank))?
            } else {
                let (bank, _) = ClassifierBank::train(&cfg)?;
                harness::run_trials(&cfg, Some(&bank))?
            };
            let mut buf = Vec::new();
            match cli.format {
                OutFormat::Json => records::write_json(&records, &mut buf)?,
                OutFormat::Csv => records::write_csv(&records, &mut buf)?,
            }
            emit(out, &buf)
        }
        Command::Analyze { input } => {
            let fmt = match input.extension().and_then(|e| e.to_str()) {
                Some("csv") => records::Format::Csv,
                Some("json") => records::Format::Json,
                _ => cli.format.into(),
            };
            let recs = records::import(fmt, input)?;
            emit_json(out, &summarize(&recs)?)
        }
        Command::EvalDetection { input, iou } => {
            let text = std::fs::read_to_string(input).map_err(|e| runtime(format!("{}: {e}", input.display())))?;
            let mut e: DetectionEval =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
            if let Some(t) = iou {
                e.iou_threshold = *t;
            }
            e.validate().map_err(CliError::Usage)?;
            emit_json(out, &harness::detection_metrics(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
