//! Mono 44.1 kHz WAV I/O. Files are written as 32-bit float; integer PCM is
//! accepted on read and scaled to `[-1, 1)`.

use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::AudioBuffer;
use crate::{Error, Result, SAMPLE_RATE};

pub fn wav_spec() -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    }
}

fn wav_err(e: hound::Error) -> Error {
    Error::Wav(e.to_string())
}

/// Encodes `audio` as an in-memory WAV file.
pub fn wav_bytes(audio: &AudioBuffer) -> Vec<u8> {
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut cursor, wav_spec()).expect("in-memory writer");
        for &s in audio.samples() {
            w.write_sample(s as f32).expect("in-memory write");
        }
        w.finalize().expect("in-memory finalize");
    }
    cursor.into_inner()
}

pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, wav_bytes(audio)).map_err(|e| Error::io(path, e))
}

/// Decodes a mono 44.1 kHz WAV file held in memory.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Wav(format!(
            "expected {SAMPLE_RATE} Hz, found {} Hz",
            spec.sample_rate
        )));
    }
    let samples = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<Vec<_>, _>>(),
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect()
        }
    }
    .map_err(wav_err)?;
    Ok(AudioBuffer::new(samples))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}
