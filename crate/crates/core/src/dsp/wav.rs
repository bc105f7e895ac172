//! Minimal RIFF/WAVE reader and 16-bit PCM writer.

use super::{DspError, Samples};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub(crate) fn looks_like_mp3(bytes: &[u8]) -> bool {
    bytes.starts_with(b"ID3") || (bytes.len() >= 2 && bytes[0] == 0xFF && bytes[1] & 0xE0 == 0xE0)
}

struct Format {
    code: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes PCM (8/16/24/32-bit integer) or 32/64-bit float WAV. Integer
/// samples are divided by 2^(bits-1); only the first channel is kept.
pub fn decode_wav(bytes: &[u8]) -> Result<Samples, DspError> {
    if looks_like_mp3(bytes) {
        return Err(DspError::UnsupportedEncoding("MP3 needs an external decoder".into()));
    }
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(DspError::CorruptHeader("missing RIFF/WAVE signature".into()));
    }

    let mut fmt: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(DspError::CorruptHeader("fmt chunk shorter than 16 bytes".into()));
                }
                let mut code = u16_at(body, 0);
                if code == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(DspError::CorruptHeader("truncated extensible fmt chunk".into()));
                    }
                    code = u16_at(body, 24);
                }
                fmt = Some(Format {
                    code,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }

    let fmt = fmt.ok_or_else(|| DspError::CorruptHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| DspError::CorruptHeader("no data chunk".into()))?;
    if fmt.channels == 0 || fmt.sample_rate == 0 {
        return Err(DspError::CorruptHeader("zero channels or sample rate".into()));
    }
    let width = match (fmt.code, fmt.bits) {
        (FORMAT_PCM, 8 | 16 | 24 | 32) | (FORMAT_FLOAT, 32 | 64) => fmt.bits as usize / 8,
        (code, bits) => {
            return Err(DspError::UnsupportedEncoding(format!("format {code} with {bits} bits per sample")))
        }
    };
    let stride = width * fmt.channels as usize;
    let frames = data.len() / stride;
    if frames == 0 {
        return Err(DspError::CorruptHeader("data chunk holds no complete frame".into()));
    }

    let decode = |s: &[u8]| -> f64 {
        match (fmt.code, width) {
            (FORMAT_PCM, 1) => (s[0] as f64 - 128.0) / 128.0,
            (FORMAT_PCM, 2) => i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0,
            (FORMAT_PCM, 3) => (i32::from_le_bytes([0, s[0], s[1], s[2]]) >> 8) as f64 / 8_388_608.0,
            (FORMAT_PCM, _) => i32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64 / 2_147_483_648.0,
            (_, 4) => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
            _ => f64::from_le_bytes(s[..8].try_into().expect("8 bytes")),
        }
    };
    let samples = (0..frames).map(|i| decode(&data[i * stride..i * stride + width])).collect();
    Samples::clamped(samples, fmt.sample_rate)
}

/// Mono 16-bit PCM.
pub fn encode_wav(samples: &Samples) -> Vec<u8> {
    let n = samples.len();
    let data_len = (n * 2) as u32;
    let rate = samples.sample_rate();
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in samples.data() {
        let v = (x * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
