//! Pitch (f0) and intensity tracking on mono PCM, plus per-span statistics.
//!
//! Pitch uses a windowed, window-normalized autocorrelation per frame with
//! parabolic peak interpolation and a small octave cost favouring shorter lags.
//! Intensity is frame RMS in dB relative to unit full scale.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Floor for frames whose RMS is below [`SILENCE_RMS`].
pub const INTENSITY_FLOOR_DB: f64 = -120.0;
pub const SILENCE_RMS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("empty signal")]
    EmptySignal,
    #[error("unsupported sample rate {0} Hz (minimum {1} Hz)")]
    UnsupportedRate(u32, u32),
    #[error("invalid span [{start}, {end})")]
    InvalidSpan { start: f64, end: f64 },
    #[error("invalid dsp config: {0}")]
    InvalidConfig(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Frames whose peak amplitude is below this fraction of the global peak are unvoiced.
    pub silence_threshold: f64,
    /// Strength penalty per octave of lag, relative to the lowest allowed pitch.
    pub octave_cost: f64,
    pub min_sample_rate: u32,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            window_s: 0.04,
            hop_s: 0.01,
            f_min_hz: 75.0,
            f_max_hz: 600.0,
            voicing_threshold: 0.45,
            silence_threshold: 0.03,
            octave_cost: 0.01,
            min_sample_rate: 8000,
        }
    }
}

impl DspConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::InvalidConfig(m.to_string()));
        if !(self.window_s > 0.0 && self.hop_s > 0.0) {
            return bad("window and hop must be positive");
        }
        if !(self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz) {
            return bad("pitch band must satisfy 0 < f_min < f_max");
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) || !(0.0..=1.0).contains(&self.silence_threshold) {
            return bad("thresholds must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame<F> {
    pub time_s: F,
    /// `None` marks an unvoiced frame.
    pub f0_hz: Option<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack<F> {
    pub frame_hop_s: F,
    pub duration_s: F,
    pub frames: Vec<PitchFrame<F>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityFrame<F> {
    pub time_s: F,
    pub db: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTrack<F> {
    pub frame_hop_s: F,
    pub duration_s: F,
    pub frames: Vec<IntensityFrame<F>>,
}

/// Statistics of one track over a time span. `mean`/`max` are `None` when
/// the span holds no (voiced) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats<F> {
    pub mean: Option<F>,
    pub max: Option<F>,
    pub voiced_duration_s: F,
    pub total_duration_s: F,
}

/// A frame-based track that [`segment_stats`] can summarize.
pub trait FrameTrack<F: Scalar> {
    fn hop_s(&self) -> F;
    fn duration_s(&self) -> F;
    /// `(frame center, value)`; value is `None` where the frame carries no measurement.
    fn frame_values(&self) -> Box<dyn Iterator<Item = (F, Option<F>)> + '_>;
}

impl<F: Scalar> FrameTrack<F> for PitchTrack<F> {
    fn hop_s(&self) -> F {
        self.frame_hop_s
    }
    fn duration_s(&self) -> F {
        self.duration_s
    }
    fn frame_values(&self) -> Box<dyn Iterator<Item = (F, Option<F>)> + '_> {
        Box::new(self.frames.iter().map(|f| (f.time_s, f.f0_hz)))
    }
}

impl<F: Scalar> FrameTrack<F> for IntensityTrack<F> {
    fn hop_s(&self) -> F {
        self.frame_hop_s
    }
    fn duration_s(&self) -> F {
        self.duration_s
    }
    fn frame_values(&self) -> Box<dyn Iterator<Item = (F, Option<F>)> + '_> {
        Box::new(self.frames.iter().map(|f| (f.time_s, Some(f.db))))
    }
}

/// Mean, max and coverage of the frames whose centers lie in `[start_s, end_s)`.
///
/// For pitch tracks only voiced frames count; `voiced_duration_s` is the number
/// of counted frames times the hop.
pub fn segment_stats<F: Scalar, T: FrameTrack<F> + ?Sized>(track: &T, start_s: F, end_s: F) -> Result<SegmentStats<F>, DspError> {
    if !(start_s < end_s) {
        return Err(DspError::InvalidSpan { start: start_s.as_f64(), end: end_s.as_f64() });
    }
    let mut sum = F::zero();
    let mut max: Option<F> = None;
    let mut n = 0usize;
    for (t, v) in track.frame_values() {
        if t < start_s || t >= end_s {
            continue;
        }
        if let Some(v) = v {
            sum += v;
            n += 1;
            max = Some(max.map_or(v, |m| m.max(v)));
        }
    }
    let mean = if n > 0 { Some(sum / F::of(n as f64)) } else { None };
    Ok(SegmentStats { mean, max, voiced_duration_s: F::of(n as f64) * track.hop_s(), total_duration_s: end_s - start_s })
}

fn check_signal<F: Scalar>(samples: &[F], sample_rate: u32, cfg: &DspConfig) -> Result<(), DspError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(DspError::EmptySignal);
    }
    if sample_rate < cfg.min_sample_rate {
        return Err(DspError::UnsupportedRate(sample_rate, cfg.min_sample_rate));
    }
    Ok(())
}

/// Frame layout shared by pitch and intensity: window length in samples and frame centers in seconds.
struct Framing {
    window_len: usize,
    centers: Vec<f64>,
}

fn framing(n_samples: usize, sample_rate: u32, cfg: &DspConfig) -> Framing {
    let sr = sample_rate as f64;
    let window_len = ((cfg.window_s * sr).round() as usize).max(2);
    let duration = n_samples as f64 / sr;
    let half = window_len as f64 / sr / 2.0;
    let mut centers = Vec::new();
    let mut k = 0usize;
    loop {
        let t = half + k as f64 * cfg.hop_s;
        if t + half > duration + 1e-12 {
            break;
        }
        centers.push(t);
        k += 1;
    }
    if centers.is_empty() {
        centers.push(duration / 2.0);
    }
    Framing { window_len, centers }
}

/// Copies the window around `center_s`, zero-padding outside the signal.
fn frame_samples<F: Scalar>(samples: &[F], sample_rate: u32, center_s: f64, window_len: usize, out: &mut Vec<F>) {
    out.clear();
    let start = (center_s * sample_rate as f64).round() as i64 - (window_len / 2) as i64;
    for i in 0..window_len as i64 {
        let idx = start + i;
        out.push(if idx >= 0 && (idx as usize) < samples.len() { samples[idx as usize] } else { F::zero() });
    }
}

fn hann<F: Scalar>(n: usize) -> Vec<F> {
    (0..n)
        .map(|i| {
            let x = std::f64::consts::PI * 2.0 * (i as f64 + 0.5) / n as f64;
            F::of(0.5 - 0.5 * x.cos())
        })
        .collect()
}

fn autocorrelation<F: Scalar>(x: &[F], max_lag: usize, out: &mut Vec<F>) {
    out.clear();
    for lag in 0..=max_lag.min(x.len() - 1) {
        let mut acc = F::zero();
        for i in 0..x.len() - lag {
            acc += x[i] * x[i + lag];
        }
        out.push(acc);
    }
}

/// Frame-wise autocorrelation pitch estimate.
pub fn estimate_pitch<F: Scalar>(samples: &[F], sample_rate: u32, cfg: &DspConfig) -> Result<PitchTrack<F>, DspError> {
    check_signal(samples, sample_rate, cfg)?;
    let sr = sample_rate as f64;
    let Framing { window_len, centers } = framing(samples.len(), sample_rate, cfg);
    let window: Vec<F> = hann(window_len);
    let lag_min = ((sr / cfg.f_max_hz).floor() as usize).max(2);
    let lag_max = ((sr / cfg.f_min_hz).ceil() as usize).min(window_len - 2);

    let mut window_ac = Vec::new();
    autocorrelation(&window, lag_max + 1, &mut window_ac);
    let global_peak = samples.iter().fold(F::zero(), |m, &s| m.max(s.abs()));

    let mut buf = Vec::with_capacity(window_len);
    let mut ac = Vec::new();
    let mut frames = Vec::with_capacity(centers.len());
    for &center in &centers {
        frame_samples(samples, sample_rate, center, window_len, &mut buf);
        let mean = buf.iter().copied().sum::<F>() / F::of(window_len as f64);
        let local_peak = buf.iter().fold(F::zero(), |m, &s| m.max((s - mean).abs()));
        let mut f0 = None;
        if global_peak > F::zero() && local_peak >= F::of(cfg.silence_threshold) * global_peak && lag_min < lag_max {
            for (s, w) in buf.iter_mut().zip(&window) {
                *s = (*s - mean) * *w;
            }
            autocorrelation(&buf, lag_max + 1, &mut ac);
            if ac[0] > F::zero() {
                f0 = best_candidate(&ac, &window_ac, lag_min, lag_max, sr, cfg);
            }
        }
        frames.push(PitchFrame { time_s: F::of(center), f0_hz: f0 });
    }
    Ok(PitchTrack { frame_hop_s: F::of(cfg.hop_s), duration_s: F::of(samples.len() as f64 / sr), frames })
}

fn best_candidate<F: Scalar>(ac: &[F], window_ac: &[F], lag_min: usize, lag_max: usize, sr: f64, cfg: &DspConfig) -> Option<F> {
    let norm = |lag: usize| -> f64 { (ac[lag] / ac[0]).as_f64() / (window_ac[lag] / window_ac[0]).as_f64() };
    let mut best: Option<(f64, f64, f64)> = None; // (strength, value, lag)
    for lag in lag_min.max(1)..=lag_max {
        let (l, c, r) = (norm(lag - 1), norm(lag), norm(lag + 1));
        if !(c >= l && c > r) {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let (offset, value) = if denom < 0.0 {
            let off = 0.5 * (l - r) / denom;
            (off, c - 0.25 * (l - r) * off)
        } else {
            (0.0, c)
        };
        let lag_f = lag as f64 + offset;
        let freq = sr / lag_f;
        if freq < cfg.f_min_hz || freq > cfg.f_max_hz {
            continue;
        }
        let strength = value - cfg.octave_cost * (cfg.f_min_hz * lag_f / sr).log2();
        if best.is_none_or(|(s, _, _)| strength > s) {
            best = Some((strength, value, lag_f));
        }
    }
    match best {
        Some((_, value, lag)) if value >= cfg.voicing_threshold => Some(F::of(sr / lag)),
        _ => None,
    }
}

/// Frame RMS in dB re unit full scale; frames below [`SILENCE_RMS`] get [`INTENSITY_FLOOR_DB`].
pub fn compute_intensity<F: Scalar>(samples: &[F], sample_rate: u32, cfg: &DspConfig) -> Result<IntensityTrack<F>, DspError> {
    check_signal(samples, sample_rate, cfg)?;
    let Framing { window_len, centers } = framing(samples.len(), sample_rate, cfg);
    let mut buf = Vec::with_capacity(window_len);
    let frames = centers
        .iter()
        .map(|&center| {
            frame_samples(samples, sample_rate, center, window_len, &mut buf);
            let power = buf.iter().map(|&s| s * s).sum::<F>() / F::of(window_len as f64);
            let rms = power.sqrt();
            let db = if rms.as_f64() < SILENCE_RMS { F::of(INTENSITY_FLOOR_DB) } else { F::of(20.0) * rms.log10() };
            IntensityFrame { time_s: F::of(center), db }
        })
        .collect();
    Ok(IntensityTrack { frame_hop_s: F::of(cfg.hop_s), duration_s: F::of(samples.len() as f64 / sample_rate as f64), frames })
}

/// Reads a WAV file as mono samples in [-1, 1]; multi-channel audio is averaged.
pub fn read_wav<F: Scalar>(path: impl AsRef<Path>) -> Result<(Vec<F>, u32), DspError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader.samples::<i32>().map(|s| s.map(|v| v as f64 / scale)).collect::<Result<_, _>>()?
        }
    };
    let mono = interleaved.chunks(channels).map(|c| F::of(c.iter().sum::<f64>() / channels as f64)).collect();
    Ok((mono, spec.sample_rate))
}
