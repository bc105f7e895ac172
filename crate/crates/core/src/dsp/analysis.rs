//! Combined analysis of one recording and the hook for non-WAV payloads.

use serde::{Deserialize, Serialize};

use super::impulses::{detect_impulses, infestation_verdict, ImpulseParams, ImpulseReport, InfestationVerdict};
use super::spectral::{
    classify_mosquito_sex, fundamental_frequency, harmonics, spectrogram, welch_psd, MosquitoSex, Psd, Spectrogram,
    WelchParams,
};
use super::wav::{decode_wav, looks_like_mp3};
use super::{DspError, Samples};

/// Converts an encoded payload (MP3 in practice) into WAV bytes.
pub trait AudioDecoder: Send + Sync {
    fn to_wav(&self, bytes: &[u8]) -> Result<Vec<u8>, DspError>;
}

/// WAV directly; anything else goes through `decoder` when one is installed.
pub fn decode_audio(bytes: &[u8], decoder: Option<&dyn AudioDecoder>) -> Result<Samples, DspError> {
    if bytes.starts_with(b"RIFF") {
        return decode_wav(bytes);
    }
    match decoder {
        Some(d) => decode_wav(&d.to_wav(bytes)?),
        None if looks_like_mp3(bytes) => Err(DspError::UnsupportedEncoding("MP3 needs an external decoder".into())),
        None => decode_wav(bytes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisOp {
    Psd,
    Spectrogram,
    Fundamental,
    Classify,
    Impulses,
}

impl AnalysisOp {
    pub const ALL: [AnalysisOp; 5] =
        [AnalysisOp::Psd, AnalysisOp::Spectrogram, AnalysisOp::Fundamental, AnalysisOp::Classify, AnalysisOp::Impulses];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisOp::Psd => "psd",
            AnalysisOp::Spectrogram => "spectrogram",
            AnalysisOp::Fundamental => "fundamental",
            AnalysisOp::Classify => "classify",
            AnalysisOp::Impulses => "impulses",
        }
    }

    /// Comma-separated list, e.g. `psd,fundamental`.
    pub fn parse_list(s: &str) -> Result<Vec<AnalysisOp>, DspError> {
        let mut ops = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let op = part.parse()?;
            if !ops.contains(&op) {
                ops.push(op);
            }
        }
        if ops.is_empty() {
            return Err(DspError::InvalidParameter("no operations requested".into()));
        }
        ops.sort();
        Ok(ops)
    }
}

impl std::str::FromStr for AnalysisOp {
    type Err = DspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnalysisOp::ALL
            .into_iter()
            .find(|op| op.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DspError::InvalidParameter(format!("unknown operation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    pub welch: WelchParams,
    pub frame: usize,
    pub hop: usize,
    pub band: (f64, f64),
    pub max_harmonic: u32,
    pub impulses: ImpulseParams,
    pub min_rate_per_min: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            welch: WelchParams::default(),
            frame: 512,
            hop: 256,
            band: (100.0, 1200.0),
            max_harmonic: 8,
            impulses: ImpulseParams::default(),
            min_rate_per_min: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralAnalysis {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub psd: Option<Psd>,
    pub spectrogram: Option<Spectrogram>,
    pub fundamental_hz: Option<f64>,
    pub harmonics_hz: Vec<f64>,
    pub sex: Option<MosquitoSex>,
    pub impulses: Option<ImpulseReport>,
    pub infestation: Option<InfestationVerdict>,
}

/// Runs the requested operations. `classify` implies `fundamental`, which
/// computes (but does not report) the PSD when `psd` is not requested.
pub fn analyze(s: &Samples, ops: &[AnalysisOp], params: &AnalysisParams) -> Result<SpectralAnalysis, DspError> {
    let wants = |op| ops.contains(&op);
    let mut out = SpectralAnalysis { sample_rate: s.sample_rate(), duration_s: s.duration_s(), ..Default::default() };

    if wants(AnalysisOp::Psd) || wants(AnalysisOp::Fundamental) || wants(AnalysisOp::Classify) {
        let psd = welch_psd(s, params.welch)?;
        if wants(AnalysisOp::Fundamental) || wants(AnalysisOp::Classify) {
            out.fundamental_hz = fundamental_frequency(&psd, params.band);
            if let Some(f0) = out.fundamental_hz {
                out.harmonics_hz = harmonics(&psd, f0, params.max_harmonic);
            }
            if wants(AnalysisOp::Classify) {
                out.sex = Some(out.fundamental_hz.map_or(MosquitoSex::Unknown, classify_mosquito_sex));
            }
        }
        if wants(AnalysisOp::Psd) {
            out.psd = Some(psd);
        }
    }
    if wants(AnalysisOp::Spectrogram) {
        out.spectrogram = Some(spectrogram(s, params.frame, params.hop)?);
    }
    if wants(AnalysisOp::Impulses) {
        let mut rep = detect_impulses(s, params.impulses)?;
        let verdict = infestation_verdict(&rep, params.min_rate_per_min);
        rep.infested = Some(verdict.infested);
        out.impulses = Some(rep);
        out.infestation = Some(verdict);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::encode_wav;

    struct Fixed(Vec<u8>);

    impl AudioDecoder for Fixed {
        fn to_wav(&self, _: &[u8]) -> Result<Vec<u8>, DspError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn op_lists() {
        assert_eq!(
            AnalysisOp::parse_list("fundamental, psd,psd").unwrap(),
            vec![AnalysisOp::Psd, AnalysisOp::Fundamental]
        );
        assert!(AnalysisOp::parse_list("").is_err());
        assert!(AnalysisOp::parse_list("psd,fft").is_err());
    }

    #[test]
    fn classify_without_psd_output() {
        let s = Samples::new(
            (0..8000).map(|i| 0.5 * (2.0 * std::f64::consts::PI * 600.0 * i as f64 / 8000.0).sin()).collect(),
            8000,
        )
        .unwrap();
        let a = analyze(&s, &[AnalysisOp::Classify], &AnalysisParams::default()).unwrap();
        assert!(a.psd.is_none());
        assert_eq!(a.sex, Some(MosquitoSex::Male));
        assert!((a.fundamental_hz.unwrap() - 600.0).abs() <= 10.0);
        assert!(a.impulses.is_none());

        let a = analyze(&s, &[AnalysisOp::Impulses], &AnalysisParams::default()).unwrap();
        assert_eq!(a.impulses.unwrap().infested, Some(a.infestation.unwrap().infested));
    }

    #[test]
    fn mp3_needs_a_decoder() {
        let mp3 = b"ID3\x04\x00\x00\x00\x00\x00\x00".to_vec();
        assert!(matches!(decode_audio(&mp3, None), Err(DspError::UnsupportedEncoding(_))));
        let wav = encode_wav(&Samples::new(vec![0.0, 0.5], 8000).unwrap());
        let decoded = decode_audio(&mp3, Some(&Fixed(wav))).unwrap();
        assert_eq!(decoded.len(), 2);
    }
}
