//! WAV ingestion and export. Loads 8/16/24-bit PCM and 32-bit float, mono or
//! stereo (downmixed by channel average); saves 16-bit PCM mono.

use std::path::Path;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let reader = hound::WavReader::open(path.as_ref())
        .map_err(|e| Error::AudioFormat(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::AudioFormat(format!(
            "{} channels unsupported (mono or stereo only)",
            spec.channels
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::AudioFormat(e.to_string()))?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24)) => {
            let full_scale = (1i64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::AudioFormat(e.to_string()))?
        }
        (fmt, bits) => {
            return Err(Error::AudioFormat(format!(
                "unsupported encoding: {bits}-bit {fmt:?}"
            )))
        }
    };

    let samples = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|lr| 0.5 * (lr[0] + lr[1]))
            .collect()
    } else {
        interleaved
    };
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes 16-bit PCM mono. Out-of-range samples are clamped; the number of
/// clamped samples is returned so callers can warn.
pub fn save_wav(path: impl AsRef<Path>, sig: &AudioSignal) -> Result<usize> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sig.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)
        .map_err(|e| Error::AudioFormat(e.to_string()))?;
    let mut clamped = 0usize;
    for &s in &sig.samples {
        let v = if s.abs() > 1.0 {
            clamped += 1;
            s.clamp(-1.0, 1.0)
        } else {
            s
        };
        let q = (v * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer
            .write_sample(q)
            .map_err(|e| Error::AudioFormat(e.to_string()))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::AudioFormat(e.to_string()))?;
    Ok(clamped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{synth_signal, SynthKind};

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let sig = synth_signal(SynthKind::Sines, 4096, 2);
        let clamped = save_wav(&path, &sig).unwrap();
        assert_eq!(clamped, 0);
        let back = load_wav(&path).unwrap();
        assert_eq!(back.sample_rate, sig.sample_rate);
        assert_eq!(back.len(), sig.len());
        let bound = 2.0f64.powi(-15) + 1e-9;
        for (a, b) in sig.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= bound, "{a} vs {b}");
        }
    }

    #[test]
    fn stereo_with_identical_channels_matches_mono() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let sig = synth_signal(SynthKind::Sines, 1024, 4);
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: sig.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for &s in &sig.samples {
            let q = (s * 32768.0).round() as i16;
            w.write_sample(q).unwrap();
            w.write_sample(q).unwrap();
        }
        w.finalize().unwrap();

        let stereo = load_wav(&path).unwrap();
        let mono_path = dir.path().join("mono.wav");
        save_wav(&mono_path, &sig).unwrap();
        let mono = load_wav(&mono_path).unwrap();
        assert_eq!(stereo.samples, mono.samples);
    }

    #[test]
    fn clipping_is_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hot.wav");
        let sig = AudioSignal::new(vec![0.5, 1.5, -2.0, 0.0], 8000).unwrap();
        assert_eq!(save_wav(&path, &sig).unwrap(), 2);
        let back = load_wav(&path).unwrap();
        assert!(back.samples.iter().all(|s| s.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn truncated_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"RIFF\x10\x00\x00\x00WAVE").unwrap();
        assert!(matches!(load_wav(&path), Err(Error::AudioFormat(_))));
    }

    #[test]
    fn float_wav_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..256 {
            w.write_sample((i as f32 / 256.0).sin()).unwrap();
        }
        w.finalize().unwrap();
        let sig = load_wav(&path).unwrap();
        assert_eq!(sig.len(), 256);
    }
}
