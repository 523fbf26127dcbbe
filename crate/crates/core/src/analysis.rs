//! Spectrograms, encoder time series and the single-parameter sweep study.
//!
//! Every function here only reads the model.

use std::fmt::Write as _;

use serde::Serialize;

use crate::autoencoder::{AutoencoderModel, LatentVector, LATENT_DIM};
use crate::dsp::{normalized_magnitudes, stft, AudioBuffer, MagnitudeFrame, StftConfig};
use crate::netmod::{
    frames_for_duration, render_architecture, ParamTrack, RenderConfig, SynthArchitecture,
    SynthNode,
};
use crate::{Error, Result, SAMPLE_RATE};

/// Lowest value a spectrogram cell can take.
pub const DB_FLOOR: f64 = -100.0;
const MAGNITUDE_FLOOR: f64 = 1e-5;

/// Fraction of the widest column range a carrier encoding column must exceed
/// to count as moving.
pub const MOVING_FRACTION: f64 = 0.05;

fn frame_times(n: usize, cfg: &StftConfig) -> Vec<f64> {
    (0..n)
        .map(|t| (t * cfg.hop_size()) as f64 / SAMPLE_RATE as f64)
        .collect()
}

fn to_db(magnitude: f64) -> f32 {
    (20.0 * magnitude.max(MAGNITUDE_FLOOR).log10()) as f32
}

/// Frames × bins matrix of dB magnitudes, reference 1.0, floored at
/// [`DB_FLOOR`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrogram {
    pub times_s: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    pub db: Vec<Vec<f32>>,
}

impl Spectrogram {
    /// dB view of magnitude frames as they are (no window compensation), so
    /// normalized frames land in `[-100, 0]`.
    pub fn from_magnitudes(frames: &[MagnitudeFrame], cfg: &StftConfig) -> Self {
        let db = frames
            .iter()
            .map(|f| f.bins().iter().map(|&m| to_db(m as f64)).collect())
            .collect();
        Self::with_axes(db, frames.len(), cfg)
    }

    fn with_axes(db: Vec<Vec<f32>>, n: usize, cfg: &StftConfig) -> Self {
        let df = SAMPLE_RATE as f64 / cfg.fft_size() as f64;
        Self {
            times_s: frame_times(n, cfg),
            frequencies_hz: (0..cfg.bins()).map(|k| k as f64 * df).collect(),
            db,
        }
    }

    pub fn frames(&self) -> usize {
        self.db.len()
    }

    pub fn bins(&self) -> usize {
        self.frequencies_hz.len()
    }

    /// `‖a − b‖ / max(‖a‖, ‖b‖)` over all cells (Frobenius norms).
    pub fn relative_l2(&self, other: &Spectrogram) -> Result<f64> {
        if self.frames() != other.frames() || self.bins() != other.bins() {
            return Err(Error::Argument(format!(
                "spectrogram shapes differ: {}x{} vs {}x{}",
                self.frames(),
                self.bins(),
                other.frames(),
                other.bins()
            )));
        }
        let (mut diff, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (ra, rb) in self.db.iter().zip(&other.db) {
            for (&a, &b) in ra.iter().zip(rb) {
                let (a, b) = (a as f64, b as f64);
                diff += (a - b) * (a - b);
                na += a * a;
                nb += b * b;
            }
        }
        let denom = na.max(nb).sqrt();
        Ok(if denom == 0.0 { 0.0 } else { diff.sqrt() / denom })
    }

    /// Header `time_s,<bin frequencies...>`, then one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s");
        for f in &self.frequencies_hz {
            write!(out, ",{f}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.times_s.iter().zip(&self.db) {
            write!(out, "{t}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// dB spectrogram of `audio`. Magnitudes are divided by the window's
/// sinusoid gain (`Σw / 2`), so a unit-amplitude bin-centered sinusoid peaks
/// at 0 dB.
pub fn spectrogram(audio: &AudioBuffer, cfg: &StftConfig) -> Result<Spectrogram> {
    let gain = cfg.window().iter().sum::<f64>() / 2.0;
    let db = stft(audio, cfg)?
        .iter()
        .map(|frame| frame.iter().map(|c| to_db(c.norm() / gain)).collect())
        .collect::<Vec<_>>();
    let n = db.len();
    Ok(Spectrogram::with_axes(db, n, cfg))
}

/// N × 8 latent values with a time axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingSeries {
    pub times_s: Vec<f64>,
    pub values: Vec<[f32; LATENT_DIM]>,
}

impl EncodingSeries {
    fn from_rows(rows: Vec<LatentVector>, cfg: &StftConfig) -> Self {
        Self {
            times_s: frame_times(rows.len(), cfg),
            values: rows.into_iter().map(|r| r.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column(&self, index: usize) -> Vec<f32> {
        self.values.iter().map(|row| row[index]).collect()
    }

    /// `max − min` of each column.
    pub fn column_ranges(&self) -> [f64; LATENT_DIM] {
        let mut out = [0.0; LATENT_DIM];
        for (i, r) in out.iter_mut().enumerate() {
            let col = self.column(i);
            let lo = col.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = col.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            *r = if col.is_empty() { 0.0 } else { (hi - lo) as f64 };
        }
        out
    }

    /// Header `time_s,p0,...,p7`, then one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s");
        for i in 0..LATENT_DIM {
            write!(out, ",p{i}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.times_s.iter().zip(&self.values) {
            write!(out, "{t}").unwrap();
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Encodes every normalized STFT frame of `audio`.
pub fn encoding_timeseries(model: &AutoencoderModel, audio: &AudioBuffer) -> Result<EncodingSeries> {
    let cfg = StftConfig::default();
    let rows = normalized_magnitudes(audio, &cfg)?
        .iter()
        .map(|f| model.encode(f))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodingSeries::from_rows(rows, &cfg))
}

/// One parameter ramps linearly from `from` to `to` over `seconds`; the other
/// seven hold `others`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepConfig {
    pub param_index: usize,
    pub from: f64,
    pub to: f64,
    pub seconds: f64,
    pub others: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param_index: 3,
            from: 0.0,
            to: 3.0,
            seconds: 10.0,
            others: 1.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.param_index >= LATENT_DIM {
            return Err(Error::Argument(format!(
                "param_index must be in 0..{LATENT_DIM}, got {}",
                self.param_index
            )));
        }
        for (name, v) in [("from", self.from), ("to", self.to), ("others", self.others)] {
            if !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.seconds.is_finite() && self.seconds > 0.0) {
            return Err(Error::Argument(format!("seconds must be > 0, got {}", self.seconds)));
        }
        Ok(())
    }

    /// The modulator's automation rows, one per frame.
    pub fn rows(&self, cfg: &StftConfig) -> Result<Vec<LatentVector>> {
        self.validate()?;
        let n = frames_for_duration(self.seconds, cfg)?;
        Ok((0..n)
            .map(|t| {
                let frac = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
                let mut row = LatentVector::splat(self.others as f32);
                row.0[self.param_index] = (self.from + (self.to - self.from) * frac) as f32;
                row
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// The automation fed to the modulator.
    pub modulator_series: EncodingSeries,
    /// Encoder readings of the carrier's audio.
    pub carrier_series: EncodingSeries,
    pub column_ranges: [f64; LATENT_DIM],
    /// Column ranges of the same render with the swept parameter held at the
    /// midpoint of the sweep. Griffin-Lim phase drift alone moves the carrier
    /// encoding this much.
    pub jitter_ranges: [f64; LATENT_DIM],
    /// `MOVING_FRACTION` of the widest column range.
    pub threshold: f64,
    pub moving_dims: usize,
}

fn carrier_encoding(
    model: &AutoencoderModel,
    rows: Vec<LatentVector>,
    seconds: f64,
    cfg: &RenderConfig,
) -> Result<EncodingSeries> {
    let arch = SynthArchitecture::new(vec![
        SynthNode::modulator("modulator", ParamTrack::automation(rows)?),
        SynthNode::carrier("carrier", "modulator", None, 0.0),
    ])?;
    let result = render_architecture(model, &arch, seconds, cfg)?;
    encoding_timeseries(model, result.leaf("carrier").expect("carrier is the only leaf"))
}

/// Renders modulator -> carrier with the swept automation and reads the
/// carrier's audio back through the encoder. A second, unswept render is
/// reported alongside for comparison; it does not affect `moving_dims`.
pub fn run_param_sweep(model: &AutoencoderModel, sweep: &SweepConfig) -> Result<SweepReport> {
    let cfg = RenderConfig::default();
    let rows = sweep.rows(&cfg.stft)?;
    let modulator_series = EncodingSeries::from_rows(rows.clone(), &cfg.stft);
    let carrier_series = carrier_encoding(model, rows, sweep.seconds, &cfg)?;

    let mid = (sweep.from + sweep.to) / 2.0;
    let flat = SweepConfig { from: mid, to: mid, ..*sweep };
    let jitter_ranges = carrier_encoding(model, flat.rows(&cfg.stft)?, sweep.seconds, &cfg)?.column_ranges();

    let column_ranges = carrier_series.column_ranges();
    let widest = column_ranges.iter().copied().fold(0.0, f64::max);
    let threshold = MOVING_FRACTION * widest;
    let moving_dims = column_ranges.iter().filter(|&&r| r > threshold).count();
    Ok(SweepReport {
        config: *sweep,
        modulator_series,
        carrier_series,
        column_ranges,
        jitter_ranges,
        threshold,
        moving_dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{LayerSpec, FRAME_BINS};
    use std::f64::consts::PI;

    fn small_model() -> AutoencoderModel {
        AutoencoderModel::initialize(LayerSpec::new(vec![64, 8, 64, FRAME_BINS]).unwrap(), 3)
    }

    #[test]
    fn silence_sits_on_the_floor() {
        let cfg = StftConfig::default();
        let s = spectrogram(&AudioBuffer::silence(10_000), &cfg).unwrap();
        assert_eq!(s.frames(), crate::dsp::frame_count(10_000, &cfg));
        assert!(s.db.iter().flatten().all(|&v| v as f64 == DB_FLOOR));
    }

    #[test]
    fn unit_sinusoid_peaks_at_zero_db() {
        let cfg = StftConfig::default();
        let k = 200.0;
        let samples = (0..3 * 4096)
            .map(|n| (2.0 * PI * k * n as f64 / 4096.0).sin())
            .collect();
        let s = spectrogram(&AudioBuffer::new(samples), &cfg).unwrap();
        for row in &s.db {
            let (argmax, peak) = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert_eq!(argmax, 200);
            assert!(peak.abs() < 0.5, "peak {peak} dB");
        }
        assert!((s.frequencies_hz[200] - 200.0 * 44100.0 / 4096.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_frames_stay_in_range() {
        let cfg = StftConfig::default();
        let frame = MagnitudeFrame::new((0..FRAME_BINS).map(|k| (k % 7) as f32 / 6.0).collect())
            .unwrap();
        let s = Spectrogram::from_magnitudes(&[frame], &cfg);
        assert!(s.db[0].iter().all(|&v| (-100.0..=0.0).contains(&v)));
        assert_eq!(s.relative_l2(&s).unwrap(), 0.0);
    }

    #[test]
    fn csv_headers() {
        let cfg = StftConfig::default();
        let s = spectrogram(&AudioBuffer::silence(4096), &cfg).unwrap();
        let csv = s.to_csv();
        let header = csv.lines().next().unwrap();
        assert!(header.starts_with("time_s,0,10.7666015625,"));
        assert_eq!(header.split(',').count(), 1 + 2049);
        assert_eq!(csv.lines().count(), 2);

        let e = EncodingSeries::from_rows(vec![LatentVector::splat(1.0); 3], &cfg);
        let csv = e.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "time_s,p0,p1,p2,p3,p4,p5,p6,p7");
        assert_eq!(csv.lines().nth(2).unwrap(), "0.023219954648526078,1,1,1,1,1,1,1,1");
    }

    #[test]
    fn silence_encodes_to_the_zero_frame_encoding() {
        let model = small_model();
        let series = encoding_timeseries(&model, &AudioBuffer::silence(3 * 4096)).unwrap();
        let zero = model.encode(&MagnitudeFrame::zeros(FRAME_BINS)).unwrap();
        assert_eq!(series.len(), 9);
        assert!(series.values.iter().all(|row| *row == zero.0));
        assert!(series.values.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn sweep_rows_ramp_one_column() {
        let cfg = StftConfig::default();
        let rows = SweepConfig::default().rows(&cfg).unwrap();
        assert_eq!(rows.len(), 431);
        assert_eq!(rows[0].0[3], 0.0);
        assert_eq!(rows[430].0[3], 3.0);
        assert!(rows.windows(2).all(|w| w[1].0[3] > w[0].0[3]));
        assert!(rows
            .iter()
            .all(|r| (0..8).filter(|&i| i != 3).all(|i| r.0[i] == 1.0)));
    }

    #[test]
    fn sweep_rejects_bad_index() {
        let model = small_model();
        let bad = SweepConfig {
            param_index: 9,
            ..SweepConfig::default()
        };
        assert!(matches!(run_param_sweep(&model, &bad), Err(Error::Argument(_))));
    }
}
