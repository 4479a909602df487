//! Synthetic tactile frames for electrode misalignment.
//!
//! Two sensor arrays of 10×10 taxels each cover 5.8 cm², sensing 1–9 N.
//! The contact model is a stand-in for the physical elastomer:
//!
//! * aligned contact presses a full-width band on rows 4–5 at 5 N;
//! * angular misalignment tilts the band force linearly across columns, with
//!   opposite slope on the two arrays, reaching 1 N / 9 N at the edges for 5°;
//! * vertical offset `dy` moves the band up by `dy / pitch` rows;
//! * horizontal offset `dx` slides the contact support by `dx / pitch` columns.
//!
//! Shifts are rounded half away from zero. Gaussian noise is added to every
//! taxel, then values are clamped to [0, 9] N and anything under 1 N reads 0.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

pub const CHANNELS: usize = 2;
pub const ROWS: usize = 10;
pub const COLS: usize = 10;
pub const FRAME_LEN: usize = CHANNELS * ROWS * COLS;

pub const MAX_FORCE_N: f64 = 9.0;
pub const SENSING_FLOOR_N: f64 = 1.0;
pub const NOMINAL_FORCE_N: f64 = 5.0;
pub const SENSOR_AREA_MM2: f64 = 580.0;
pub const BAND_ROWS: [usize; 2] = [4, 5];
pub const MAX_ANGLE_DEG: f64 = 5.0;
pub const MAX_OFFSET_MM: f64 = 10.0;
pub const OFFSET_STEP_MM: f64 = 5.0;
pub const TRAIN_FRACTION: f64 = 0.67;

/// Taxel spacing, mm.
pub fn taxel_pitch_mm() -> f64 {
    SENSOR_AREA_MM2.sqrt() / COLS as f64
}

/// Per-column tilt at 5° so the band edges land on 1 N and 9 N.
const FULL_TILT_N_PER_COL: f64 = 8.0 / 9.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TactileError {
    #[error("misalignment out of modeled range: phi={phi}°, dx={dx} mm, dy={dy} mm")]
    OutOfRange { phi: f64, dx: f64, dy: f64 },
    #[error("class index {index} invalid for {kind} (has {classes} classes)")]
    BadClass { kind: MisalignmentKind, index: usize, classes: usize },
    #[error("expected {FRAME_LEN} force values, got {0}")]
    BadLength(usize),
    #[error("unknown misalignment kind '{0}'")]
    UnknownKind(String),
    #[error("dataset mixes kinds {0} and {1}")]
    MixedKinds(MisalignmentKind, MisalignmentKind),
    #[error("csv: {0}")]
    Csv(String),
    #[error("n_per_class must be >= 1")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MisalignmentKind {
    Angular,
    Vertical,
    Horizontal,
}

impl MisalignmentKind {
    pub const ALL: [MisalignmentKind; 3] =
        [MisalignmentKind::Angular, MisalignmentKind::Vertical, MisalignmentKind::Horizontal];

    pub fn num_classes(self) -> usize {
        match self {
            MisalignmentKind::Angular => 6,
            MisalignmentKind::Vertical | MisalignmentKind::Horizontal => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MisalignmentKind::Angular => "angular",
            MisalignmentKind::Vertical => "vertical",
            MisalignmentKind::Horizontal => "horizontal",
        }
    }
}

impl fmt::Display for MisalignmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MisalignmentKind {
    type Err = TactileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "angular" => Ok(MisalignmentKind::Angular),
            "vertical" => Ok(MisalignmentKind::Vertical),
            "horizontal" => Ok(MisalignmentKind::Horizontal),
            other => Err(TactileError::UnknownKind(other.to_string())),
        }
    }
}

/// Class of a misalignment: tilt angle 0..=5° in 1° steps, or offset
/// −10..=10 mm in 5 mm steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MisalignmentLabel {
    pub kind: MisalignmentKind,
    pub class_index: usize,
}

impl MisalignmentLabel {
    pub fn new(kind: MisalignmentKind, class_index: usize) -> Result<Self, TactileError> {
        let classes = kind.num_classes();
        if class_index >= classes {
            return Err(TactileError::BadClass { kind, index: class_index, classes });
        }
        Ok(Self { kind, class_index })
    }

    /// Degrees for angular labels, millimeters otherwise.
    pub fn value(&self) -> f64 {
        match self.kind {
            MisalignmentKind::Angular => self.class_index as f64,
            _ => (self.class_index as f64 - 2.0) * OFFSET_STEP_MM,
        }
    }

    /// `(phi, dx, dy)` that realizes this class with no other misalignment.
    pub fn misalignment(&self) -> (f64, f64, f64) {
        match self.kind {
            MisalignmentKind::Angular => (self.value(), 0.0, 0.0),
            MisalignmentKind::Vertical => (0.0, 0.0, self.value()),
            MisalignmentKind::Horizontal => (0.0, self.value(), 0.0),
        }
    }
}

/// Pressure on both arrays, N, indexed `[channel][row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TactileFrame {
    pub pressure: [[[f64; COLS]; ROWS]; CHANNELS],
}

impl TactileFrame {
    pub fn zeros() -> Self {
        Self { pressure: [[[0.0; COLS]; ROWS]; CHANNELS] }
    }

    /// Channel-major, then row, then column.
    pub fn to_flat(&self) -> Vec<f64> {
        self.pressure.iter().flatten().flatten().copied().collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self, TactileError> {
        if values.len() != FRAME_LEN {
            return Err(TactileError::BadLength(values.len()));
        }
        let mut f = Self::zeros();
        for (i, v) in values.iter().enumerate() {
            f.pressure[i / (ROWS * COLS)][(i / COLS) % ROWS][i % COLS] = *v;
        }
        Ok(f)
    }

    /// Reflects every channel left to right.
    pub fn mirrored(&self) -> Self {
        let mut out = *self;
        for ch in out.pressure.iter_mut() {
            for row in ch.iter_mut() {
                row.reverse();
            }
        }
        out
    }

    pub fn channels_swapped(&self) -> Self {
        let mut out = *self;
        out.pressure.swap(0, 1);
        out
    }

    pub fn max_abs_diff(&self, other: &TactileFrame) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Every value in [0, 9] and nothing strictly between 0 and 1.
    pub fn satisfies_sensor_range(&self) -> bool {
        self.pressure.iter().flatten().flatten().all(|&v| {
            (0.0..=MAX_FORCE_N).contains(&v) && (v == 0.0 || v >= SENSING_FLOOR_N)
        })
    }
}

fn sensor_reading(v: f64) -> f64 {
    let v = v.clamp(0.0, MAX_FORCE_N);
    if v < SENSING_FLOOR_N {
        0.0
    } else {
        v
    }
}

fn check_range(phi: f64, dx: f64, dy: f64) -> Result<(), TactileError> {
    let ok = phi.is_finite()
        && dx.is_finite()
        && dy.is_finite()
        && (0.0..=MAX_ANGLE_DEG).contains(&phi)
        && dx.abs() <= MAX_OFFSET_MM
        && dy.abs() <= MAX_OFFSET_MM;
    if ok {
        Ok(())
    } else {
        Err(TactileError::OutOfRange { phi, dx, dy })
    }
}

/// Noise-free contact pattern.
pub fn base_pattern(phi: f64, dx: f64, dy: f64) -> Result<TactileFrame, TactileError> {
    check_range(phi, dx, dy)?;
    let pitch = taxel_pitch_mm();
    let row_shift = (dy / pitch).round() as i64;
    let col_shift = (dx / pitch).round() as i64;
    let slope = FULL_TILT_N_PER_COL * phi / MAX_ANGLE_DEG;
    let center = (COLS as f64 - 1.0) / 2.0;

    let mut f = TactileFrame::zeros();
    for band_row in BAND_ROWS {
        let r = band_row as i64 - row_shift;
        if !(0..ROWS as i64).contains(&r) {
            continue;
        }
        for c in 0..COLS as i64 {
            let support = c - col_shift;
            if !(0..COLS as i64).contains(&support) {
                continue;
            }
            let tilt = slope * (support as f64 - center);
            f.pressure[0][r as usize][c as usize] = NOMINAL_FORCE_N + tilt;
            f.pressure[1][r as usize][c as usize] = NOMINAL_FORCE_N - tilt;
        }
    }
    Ok(f)
}

pub fn synthesize<R: Rng + ?Sized>(
    phi: f64,
    dx: f64,
    dy: f64,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<TactileFrame, TactileError> {
    let mut f = base_pattern(phi, dx, dy)?;
    for v in f.pressure.iter_mut().flatten().flatten() {
        let n: f64 = rng.sample(StandardNormal);
        *v = sensor_reading(*v + noise_sigma * n);
    }
    Ok(f)
}

/// Frame for a labelled class.
pub fn synthesize_label<R: Rng + ?Sized>(
    label: MisalignmentLabel,
    noise_sigma: f64,
    rng: &mut R,
) -> TactileFrame {
    let (phi, dx, dy) = label.misalignment();
    synthesize(phi, dx, dy, noise_sigma, rng).expect("class grid lies inside the modeled range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileSample {
    pub frame: TactileFrame,
    pub label: MisalignmentLabel,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileDataset {
    pub kind: MisalignmentKind,
    pub samples: Vec<TactileSample>,
    pub split_seed: u64,
}

/// Stratified train/validation assignment: per class, a seeded shuffle and
/// the first `round(0.67·n)` go to training.
fn assign_split(samples: &mut [TactileSample], num_classes: usize, split_seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    for class in 0..num_classes {
        let mut idx: Vec<usize> =
            (0..samples.len()).filter(|&i| samples[i].label.class_index == class).collect();
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * TRAIN_FRACTION).round() as usize;
        for (k, &i) in idx.iter().enumerate() {
            samples[i].split = if k < n_train { Split::Train } else { Split::Validation };
        }
    }
}

pub fn generate_dataset(
    kind: MisalignmentKind,
    n_per_class: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<TactileDataset, TactileError> {
    if n_per_class == 0 {
        return Err(TactileError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[0]));
    let mut samples = Vec::with_capacity(n_per_class * kind.num_classes());
    for class in 0..kind.num_classes() {
        let label = MisalignmentLabel::new(kind, class)?;
        for _ in 0..n_per_class {
            samples.push(TactileSample {
                frame: synthesize_label(label, noise_sigma, &mut rng),
                label,
                split: Split::Train,
            });
        }
    }
    let split_seed = seed::derive(seed, &[1]);
    assign_split(&mut samples, kind.num_classes(), split_seed);
    Ok(TactileDataset { kind, samples, split_seed })
}

impl TactileDataset {
    /// Builds a dataset from labelled frames, assigning a fresh split.
    pub fn from_labelled(
        frames: Vec<(TactileFrame, MisalignmentLabel)>,
        split_seed: u64,
    ) -> Result<Self, TactileError> {
        let kind = frames.first().map(|(_, l)| l.kind).ok_or(TactileError::Empty)?;
        if let Some((_, l)) = frames.iter().find(|(_, l)| l.kind != kind) {
            return Err(TactileError::MixedKinds(kind, l.kind));
        }
        let mut samples: Vec<TactileSample> = frames
            .into_iter()
            .map(|(frame, label)| TactileSample { frame, label, split: Split::Train })
            .collect();
        assign_split(&mut samples, kind.num_classes(), split_seed);
        Ok(Self { kind, samples, split_seed })
    }

    pub fn split(&self, which: Split) -> impl Iterator<Item = &TactileSample> {
        self.samples.iter().filter(move |s| s.split == which)
    }

    pub fn class_counts(&self, which: Option<Split>) -> Vec<usize> {
        let mut counts = vec![0; self.kind.num_classes()];
        for s in self.samples.iter().filter(|s| which.is_none_or(|w| s.split == w)) {
            counts[s.label.class_index] += 1;
        }
        counts
    }

    /// Writes `kind,class,f0..f199` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), TactileError> {
        write_frames_csv(out, self.samples.iter().map(|s| (&s.frame, s.label)))
    }
}

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["kind".to_string(), "class".to_string()];
    h.extend((0..FRAME_LEN).map(|i| format!("f{i}")));
    h
}

pub fn write_frames_csv<'a, W, I>(out: W, rows: I) -> Result<(), TactileError>
where
    W: std::io::Write,
    I: IntoIterator<Item = (&'a TactileFrame, MisalignmentLabel)>,
{
    let csv_err = |e: csv::Error| TactileError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header()).map_err(csv_err)?;
    for (frame, label) in rows {
        let mut rec = vec![label.kind.to_string(), label.class_index.to_string()];
        rec.extend(frame.to_flat().iter().map(|v| v.to_string()));
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| TactileError::Csv(e.to_string()))
}

pub fn read_frames_csv<R: std::io::Read>(
    input: R,
) -> Result<Vec<(TactileFrame, MisalignmentLabel)>, TactileError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| TactileError::Csv(e.to_string()))?;
        if rec.len() != FRAME_LEN + 2 {
            return Err(TactileError::BadLength(rec.len().saturating_sub(2)));
        }
        let kind: MisalignmentKind = rec[0].parse()?;
        let class: usize =
            rec[1].trim().parse().map_err(|e| TactileError::Csv(format!("class: {e}")))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| TactileError::Csv(format!("force value: {e}")))?;
        out.push((TactileFrame::from_flat(&values)?, MisalignmentLabel::new(kind, class)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(9)
    }

    #[test]
    fn pitch_is_about_2_41_mm() {
        assert!((taxel_pitch_mm() - 2.41).abs() < 0.01);
    }

    #[test]
    fn aligned_contact_is_symmetric() {
        let f = synthesize(0.0, 0.0, 0.0, 0.0, &mut rng()).unwrap();
        assert_eq!(f.pressure[0], f.pressure[1]);
        assert_eq!(f.mirrored(), f);
        assert_eq!(f.pressure[0][4], [5.0; 10]);
        assert_eq!(f.pressure[0][3], [0.0; 10]);
    }

    #[test]
    fn full_tilt_is_monotone_across_columns() {
        let f = synthesize(5.0, 0.0, 0.0, 0.0, &mut rng()).unwrap();
        for r in BAND_ROWS {
            let ch0 = f.pressure[0][r];
            let ch1 = f.pressure[1][r];
            assert!(ch0.windows(2).all(|w| w[1] > w[0]), "{ch0:?}");
            assert!(ch1.windows(2).all(|w| w[1] < w[0]), "{ch1:?}");
            assert!((ch0[0] - 1.0).abs() < 1e-12 && (ch0[9] - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_offset_moves_band_up() {
        let f = synthesize(0.0, 0.0, 10.0, 0.0, &mut rng()).unwrap();
        let loaded: Vec<usize> =
            (0..ROWS).filter(|&r| f.pressure[0][r].iter().any(|&v| v > 0.0)).collect();
        assert_eq!(loaded, vec![0, 1]);
        let g = synthesize(0.0, 0.0, -5.0, 0.0, &mut rng()).unwrap();
        let loaded: Vec<usize> =
            (0..ROWS).filter(|&r| g.pressure[0][r].iter().any(|&v| v > 0.0)).collect();
        assert_eq!(loaded, vec![6, 7]);
    }

    #[test]
    fn horizontal_offset_slides_support() {
        let f = synthesize(0.0, 10.0, 0.0, 0.0, &mut rng()).unwrap();
        let row = f.pressure[0][4];
        assert_eq!(&row[..4], &[0.0; 4]);
        assert_eq!(&row[4..], &[5.0; 6]);
    }

    #[test]
    fn mirror_swaps_channels() {
        for phi in [1.0, 2.5, 5.0] {
            let f = base_pattern(phi, 0.0, 0.0).unwrap();
            assert_eq!(f.mirrored(), f.channels_swapped());
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(
            synthesize(6.0, 0.0, 0.0, 0.0, &mut rng()),
            Err(TactileError::OutOfRange { .. })
        ));
        assert!(synthesize(-0.5, 0.0, 0.0, 0.0, &mut rng()).is_err());
        assert!(synthesize(0.0, 10.5, 0.0, 0.0, &mut rng()).is_err());
        assert!(synthesize(0.0, 0.0, f64::NAN, 0.0, &mut rng()).is_err());
    }

    #[test]
    fn heavy_noise_stays_in_sensor_range() {
        let mut r = rng();
        for _ in 0..50 {
            let f = synthesize(3.0, 5.0, -5.0, 4.0, &mut r).unwrap();
            assert!(f.satisfies_sensor_range());
        }
    }

    #[test]
    fn default_dataset_sizes() {
        let a = generate_dataset(MisalignmentKind::Angular, 100, 0.4, 1).unwrap();
        assert_eq!(a.samples.len(), 600);
        assert_eq!(a.class_counts(None), vec![100; 6]);
        assert_eq!(a.class_counts(Some(Split::Train)), vec![67; 6]);
        let t = generate_dataset(MisalignmentKind::Vertical, 100, 0.4, 1).unwrap();
        assert_eq!(t.samples.len(), 500);
        assert_eq!(t.class_counts(Some(Split::Validation)), vec![33; 5]);
    }

    #[test]
    fn dataset_deterministic() {
        let a = generate_dataset(MisalignmentKind::Horizontal, 7, 0.4, 5).unwrap();
        let b = generate_dataset(MisalignmentKind::Horizontal, 7, 0.4, 5).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(MisalignmentKind::Horizontal, 7, 0.4, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let a = generate_dataset(MisalignmentKind::Angular, 3, 0.4, 2).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,class,f0,"));
        let rows = read_frames_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 18);
        for (s, (f, l)) in a.samples.iter().zip(&rows) {
            assert_eq!(&s.frame, f);
            assert_eq!(s.label, *l);
        }
    }

    #[test]
    fn labels() {
        assert!(MisalignmentLabel::new(MisalignmentKind::Vertical, 5).is_err());
        let l = MisalignmentLabel::new(MisalignmentKind::Horizontal, 0).unwrap();
        assert_eq!(l.value(), -10.0);
        assert_eq!(l.misalignment(), (0.0, -10.0, 0.0));
        assert!("Dark".parse::<MisalignmentKind>().is_err());
    }
}
