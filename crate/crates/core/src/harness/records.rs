//! Trial record persistence.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `trial_id` | index in the ω × trial grid |
//! | `omega_deg`, `l_cm` | initial yaw offset and distance |
//! | `seed` | per-trial seed |
//! | `success`, `reason` | search outcome (`Reached`, `NotInView`, `Unreachable`) |
//! | `steps`, `sim_time_s` | actions taken and simulated duration |
//! | `target_x_cm`, `target_y_cm`, `target_z_cm` | actuator-frame target, empty on failure |
//! | `true_phi_deg`, `true_dx_mm`, `true_dy_mm` | drawn misalignment |
//! | `pred_angular_class`, `pred_vertical_class`, `pred_horizontal_class` | classifier output |
//! | `gate` | `charge` or `abort` |
//!
//! Empty cells mean "not applicable". Floats use shortest round-trip
//! formatting, so import(export(r)) == r.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::{PredictedMisalignment, TrialRecord, TrueMisalignment};
use super::HarnessError;
use crate::classifier::GateDecision;
use crate::geometry::Vec3;
use crate::search::{OutcomeReason, SearchOutcome};
use crate::tactile::{MisalignmentKind, MisalignmentLabel};

pub const CSV_COLUMNS: [&str; 18] = [
    "trial_id",
    "omega_deg",
    "l_cm",
    "seed",
    "success",
    "reason",
    "steps",
    "sim_time_s",
    "target_x_cm",
    "target_y_cm",
    "target_z_cm",
    "true_phi_deg",
    "true_dx_mm",
    "true_dy_mm",
    "pred_angular_class",
    "pred_vertical_class",
    "pred_horizontal_class",
    "gate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(HarnessError::Config(format!("unknown format '{other}'"))),
        }
    }
}

fn sorted(records: &[TrialRecord]) -> Vec<TrialRecord> {
    let mut v = records.to_vec();
    v.sort_by_key(|r| r.trial_id);
    v
}

pub fn write_json<W: Write>(records: &[TrialRecord], mut out: W) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut out, &sorted(records))
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    serde_json::from_reader(input).map_err(|e| HarnessError::Format(e.to_string()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in sorted(records) {
        let t = r.outcome.final_target_delta_frame;
        let m = r.misalignment_true;
        let p = r.misalignment_predicted;
        w.write_record([
            r.trial_id.to_string(),
            r.omega_deg.to_string(),
            r.l_cm.to_string(),
            r.seed.to_string(),
            r.outcome.success.to_string(),
            r.outcome.reason.as_str().to_string(),
            r.steps.to_string(),
            r.sim_time.to_string(),
            opt(t.map(|v| v.x)),
            opt(t.map(|v| v.y)),
            opt(t.map(|v| v.z)),
            opt(m.map(|v| v.phi_deg)),
            opt(m.map(|v| v.dx_mm)),
            opt(m.map(|v| v.dy_mm)),
            opt(p.map(|v| v.angular.class_index)),
            opt(p.map(|v| v.vertical.class_index)),
            opt(p.map(|v| v.horizontal.class_index)),
            opt(r.gate.map(|g| match g {
                GateDecision::Charge => "charge",
                GateDecision::Abort => "abort",
            })),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(row: usize, col: &str, s: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| HarnessError::Format(format!("row {row}, {col}: {e}")))
}

fn parse_opt<T: std::str::FromStr>(row: usize, col: &str, s: &str) -> Result<Option<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        parse(row, col, s).map(Some)
    }
}

fn all_or_none<T: Copy>(row: usize, what: &str, v: [Option<T>; 3]) -> Result<Option<[T; 3]>, HarnessError> {
    match v {
        [Some(a), Some(b), Some(c)] => Ok(Some([a, b, c])),
        [None, None, None] => Ok(None),
        _ => Err(HarnessError::Format(format!("row {row}: partial {what}"))),
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(HarnessError::Format("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let reason = OutcomeReason::parse(f(5))
            .ok_or_else(|| HarnessError::Format(format!("row {row}: bad reason '{}'", f(5))))?;
        let steps: u32 = parse(row, "steps", f(6))?;
        let sim_time: f64 = parse(row, "sim_time_s", f(7))?;
        let target = all_or_none(
            row,
            "target",
            [parse_opt(row, "target_x_cm", f(8))?, parse_opt(row, "target_y_cm", f(9))?, parse_opt(row, "target_z_cm", f(10))?],
        )?;
        let truth = all_or_none(
            row,
            "misalignment_true",
            [parse_opt(row, "true_phi_deg", f(11))?, parse_opt(row, "true_dx_mm", f(12))?, parse_opt(row, "true_dy_mm", f(13))?],
        )?;
        let pred = all_or_none(
            row,
            "misalignment_predicted",
            [
                parse_opt::<usize>(row, "pred_angular_class", f(14))?,
                parse_opt(row, "pred_vertical_class", f(15))?,
                parse_opt(row, "pred_horizontal_class", f(16))?,
            ],
        )?;
        let label = |kind, i| MisalignmentLabel::new(kind, i).map_err(HarnessError::from);
        let misalignment_predicted = match pred {
            Some([a, v, h]) => Some(PredictedMisalignment {
                angular: label(MisalignmentKind::Angular, a)?,
                vertical: label(MisalignmentKind::Vertical, v)?,
                horizontal: label(MisalignmentKind::Horizontal, h)?,
            }),
            None => None,
        };
        let gate = match f(17) {
            "" => None,
            "charge" => Some(GateDecision::Charge),
            "abort" => Some(GateDecision::Abort),
            other => return Err(HarnessError::Format(format!("row {row}: bad gate '{other}'"))),
        };
        out.push(TrialRecord {
            trial_id: parse(row, "trial_id", f(0))?,
            omega_deg: parse(row, "omega_deg", f(1))?,
            l_cm: parse(row, "l_cm", f(2))?,
            seed: parse(row, "seed", f(3))?,
            outcome: SearchOutcome {
                success: parse(row, "success", f(4))?,
                reason,
                steps,
                sim_time,
                final_target_delta_frame: target.map(|[x, y, z]| Vec3::new(x, y, z)),
            },
            misalignment_true: truth.map(|[phi_deg, dx_mm, dy_mm]| TrueMisalignment { phi_deg, dx_mm, dy_mm }),
            misalignment_predicted,
            gate,
            sim_time,
            steps,
        });
    }
    Ok(out)
}

pub fn export(records: &[TrialRecord], format: Format, path: &Path) -> Result<(), HarnessError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Json => write_json(records, file),
        Format::Csv => write_csv(records, file),
    }
}

pub fn import(format: Format, path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match format {
        Format::Json => read_json(file),
        Format::Csv => read_csv(file),
    }
}
