//! Welch power spectra of axial motion and peak matching against predicted
//! drumhead frequencies.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpectrumError {
    #[error("record of {have} samples is shorter than one segment; need at least {need}")]
    TooShort { have: usize, need: usize },
    #[error("no ion series given")]
    Empty,
    #[error("ion series have different lengths")]
    Ragged,
    #[error("invalid spectrum option: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            // periodic Hann: exact 50% overlap-add
            Window::Hann => (0..len)
                .map(|n| {
                    let s = (std::f64::consts::PI * n as f64 / len as f64).sin();
                    s * s
                })
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Samples per segment; segments overlap by half.
    pub segment_len: usize,
    pub window: Window,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            segment_len: 1 << 16,
            window: Window::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Hz, uniform from 0 to Nyquist.
    pub frequencies: Vec<f64>,
    /// One-sided PSD summed over ions (m^2/Hz).
    pub psd: Vec<f64>,
    /// `psd` scaled to unit peak.
    pub power: Vec<f64>,
    pub segment_len: usize,
    pub sample_rate: f64,
    pub segments: usize,
    pub window: Window,
}

impl SpectrumResult {
    pub fn resolution(&self) -> f64 {
        self.sample_rate / self.segment_len as f64
    }

    /// Integral of the PSD, `sum psd * df`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution()
    }
}

/// Welch-averaged periodogram of `sum_i |z_i(f)|^2` with 50% overlap.
/// `z[i]` is the sampled axial coordinate of ion `i`.
pub fn drumhead_spectrum(z: &[Vec<f64>], sample_dt: f64, opts: &SpectrumOptions) -> Result<SpectrumResult, SpectrumError> {
    let len = opts.segment_len;
    if len < 4 {
        return Err(SpectrumError::Invalid("segment_len must be at least 4"));
    }
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(SpectrumError::Invalid("sample_dt must be positive"));
    }
    let first = z.first().ok_or(SpectrumError::Empty)?;
    let t = first.len();
    if z.iter().any(|s| s.len() != t) {
        return Err(SpectrumError::Ragged);
    }
    if t < len {
        return Err(SpectrumError::TooShort { have: t, need: len });
    }
    let hop = len / 2;
    let segments = (t - len) / hop + 1;
    let w = opts.window.coefficients(len);
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let fs = 1.0 / sample_dt;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let half = len / 2 + 1;
    let mut acc = vec![0.0; half];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for series in z {
        for s in 0..segments {
            let seg = &series[s * hop..s * hop + len];
            for (b, (x, wn)) in buf.iter_mut().zip(seg.iter().zip(&w)) {
                *b = Complex::new(x * wn, 0.0);
            }
            fft.process(&mut buf);
            for (k, a) in acc.iter_mut().enumerate() {
                *a += buf[k].norm_sqr();
            }
        }
    }
    let scale = 1.0 / (fs * w2 * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            // one-sided: fold negative frequencies except DC and Nyquist
            let fold = if k == 0 || (len % 2 == 0 && k == len / 2) { 1.0 } else { 2.0 };
            fold * a * scale
        })
        .collect();
    let peak = psd.iter().cloned().fold(0.0, f64::max);
    let power = psd.iter().map(|p| if peak > 0.0 { p / peak } else { 0.0 }).collect();
    let frequencies = (0..half).map(|k| k as f64 * fs / len as f64).collect();
    Ok(SpectrumResult {
        frequencies,
        psd,
        power,
        segment_len: len,
        sample_rate: fs,
        segments,
        window: opts.window,
    })
}

/// Outcome of looking for one predicted mode in a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMatch {
    pub predicted_hz: f64,
    /// Strongest qualifying local maximum within the window.
    pub peak_hz: Option<f64>,
}

impl PeakMatch {
    pub fn detected(&self) -> bool {
        self.peak_hz.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakCriteria {
    /// Half width of the search window around each prediction (Hz).
    pub window_hz: f64,
    /// A peak must exceed this multiple of the local median.
    pub threshold: f64,
    /// Half width (Hz) of the neighbourhood whose median sets the floor.
    /// Position spectra fall off as 1/f^2, so a floor taken over the whole
    /// drumhead band would be set by the strong low-frequency modes.
    pub floor_hz: f64,
}

/// Median of `power` over bins inside `band`.
pub fn band_median(spec: &SpectrumResult, band: (f64, f64)) -> f64 {
    let mut v: Vec<f64> = spec
        .frequencies
        .iter()
        .zip(&spec.power)
        .filter(|(f, _)| **f >= band.0 && **f <= band.1)
        .map(|(_, p)| *p)
        .collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// For each predicted frequency, the strongest local maximum within
/// `window_hz` that clears `threshold` times the median power within
/// `floor_hz` of the prediction.
pub fn match_peaks(spec: &SpectrumResult, predicted_hz: &[f64], criteria: &PeakCriteria) -> Vec<PeakMatch> {
    let p = &spec.power;
    let df = spec.resolution();
    predicted_hz
        .iter()
        .map(|&f| {
            let floor = criteria.threshold * band_median(spec, (f - criteria.floor_hz, f + criteria.floor_hz));
            let lo = ((f - criteria.window_hz) / df).ceil().max(1.0) as usize;
            let hi = (((f + criteria.window_hz) / df).floor() as usize).min(p.len().saturating_sub(2));
            let mut best: Option<usize> = None;
            for k in lo..=hi {
                let local = p[k] > p[k - 1] && p[k] >= p[k + 1];
                if local && p[k] > floor && best.is_none_or(|b| p[k] > p[b]) {
                    best = Some(k);
                }
            }
            PeakMatch {
                predicted_hz: f,
                peak_hz: best.map(|k| spec.frequencies[k]),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_short_record_reports_needed_length() {
        let z = vec![vec![0.0; 100]];
        let e = drumhead_spectrum(&z, 1e-8, &SpectrumOptions { segment_len: 128, window: Window::Hann }).unwrap_err();
        assert_eq!(e, SpectrumError::TooShort { have: 100, need: 128 });
    }

    #[test]
    fn segment_count_follows_half_overlap() {
        let z = vec![vec![1.0; 1024]];
        let s = drumhead_spectrum(&z, 1.0, &SpectrumOptions { segment_len: 256, window: Window::Hann }).unwrap();
        assert_eq!(s.segments, 7);
        assert_eq!(s.frequencies.len(), 129);
        assert!((s.frequencies[128] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn median_of_band() {
        let s = SpectrumResult {
            frequencies: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            psd: vec![5.0, 1.0, 3.0, 2.0, 9.0],
            power: vec![5.0, 1.0, 3.0, 2.0, 9.0],
            segment_len: 8,
            sample_rate: 8.0,
            segments: 1,
            window: Window::Hann,
        };
        assert_eq!(band_median(&s, (1.0, 3.0)), 2.0);
        assert_eq!(band_median(&s, (0.0, 3.0)), 2.5);
    }
}
