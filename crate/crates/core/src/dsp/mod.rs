//! Signal analysis for vibration and wingbeat recordings.

mod analysis;
mod impulses;
mod spectral;
mod wav;

pub use analysis::{analyze, decode_audio, AnalysisOp, AnalysisParams, AudioDecoder, SpectralAnalysis};
pub use impulses::{detect_impulses, infestation_verdict, ImpulseParams, ImpulseReport, InfestationVerdict};
pub use spectral::{
    classify_mosquito_sex, fundamental_frequency, hann, harmonics, spectrogram, welch_psd, MosquitoSex, Psd,
    Spectrogram, WelchParams,
};
pub use wav::{decode_wav, encode_wav};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DspError {
    #[error("signal is too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("invalid samples: {0}")]
    InvalidSamples(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl DspError {
    pub fn code(&self) -> &'static str {
        match self {
            DspError::TooShort { .. } => "too_short",
            DspError::UnsupportedEncoding(_) => "unsupported_encoding",
            DspError::CorruptHeader(_) => "corrupt_header",
            DspError::InvalidSamples(_) => "invalid_samples",
            DspError::InvalidParameter(_) => "invalid_parameter",
        }
    }
}

/// Mono audio normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    data: Vec<f64>,
    sample_rate: u32,
}

impl Samples {
    pub fn new(data: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::InvalidSamples("sample rate must be positive".into()));
        }
        if data.is_empty() {
            return Err(DspError::InvalidSamples("no samples".into()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite() || x.abs() > 1.0) {
            return Err(DspError::InvalidSamples(format!("sample {i} is {} (outside [-1, 1])", data[i])));
        }
        Ok(Samples { data, sample_rate })
    }

    /// Clamps to [-1, 1] and maps non-finite values to 0.
    pub fn clamped(data: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        let data = data.into_iter().map(|x| if x.is_finite() { x.clamp(-1.0, 1.0) } else { 0.0 }).collect();
        Samples::new(data, sample_rate)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.data.len() as f64 / self.sample_rate as f64
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_invariants() {
        assert!(Samples::new(vec![0.5, -1.0, 1.0], 8000).is_ok());
        assert!(Samples::new(vec![], 8000).is_err());
        assert!(Samples::new(vec![1.5], 8000).is_err());
        assert!(Samples::new(vec![f64::NAN], 8000).is_err());
        assert!(Samples::new(vec![0.0], 0).is_err());
        assert_eq!(Samples::clamped(vec![2.0, f64::NAN], 10).unwrap().data(), &[1.0, 0.0]);
    }
}
