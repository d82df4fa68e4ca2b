//! WAV input and output (16-bit PCM and 32-bit float).

use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// De-interleaved audio with samples as `f64` in `[-1, 1]` nominal range.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub format: SampleFormat,
    pub channels: Vec<Vec<f64>>,
}

impl WavData {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavData> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let (format, interleaved): (SampleFormat, Vec<f64>) =
        match (spec.sample_format, spec.bits_per_sample) {
            (HoundFormat::Int, 16) => (
                SampleFormat::Pcm16,
                reader
                    .samples::<i16>()
                    .map(|s| s.map(|v| v as f64 / 32768.0))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            (HoundFormat::Float, 32) => (
                SampleFormat::Float32,
                reader
                    .samples::<f32>()
                    .map(|s| s.map(f64::from))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            (fmt, bits) => {
                return Err(Error::UnsupportedWav(format!(
                    "{bits}-bit {fmt:?} samples (expected 16-bit PCM or 32-bit float)"
                )))
            }
        };
    if n_ch == 0 {
        return Err(Error::UnsupportedWav("zero channels".into()));
    }
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for chunk in interleaved.chunks_exact(n_ch) {
        for (ch, v) in channels.iter_mut().zip(chunk) {
            ch.push(*v);
        }
    }
    Ok(WavData {
        sample_rate: spec.sample_rate,
        format,
        channels,
    })
}

/// Writes equal-length channels as one interleaved file.
pub fn write_wav(
    path: impl AsRef<Path>,
    sample_rate: u32,
    format: SampleFormat,
    channels: &[&[f64]],
) -> Result<()> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::invalid(format!("cannot write {n_ch} channels")));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("channels have unequal lengths"));
    }
    let spec = WavSpec {
        channels: n_ch as u16,
        sample_rate,
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..len {
        for ch in channels {
            match format {
                SampleFormat::Pcm16 => {
                    let v = (ch[i] * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    writer.write_sample(v)?;
                }
                SampleFormat::Float32 => writer.write_sample(ch[i] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
