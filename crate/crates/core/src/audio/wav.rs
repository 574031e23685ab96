//! Minimal RIFF/WAVE reader and writer.
//!
//! Reading accepts PCM16, PCM24, PCM32, and 32-bit float, mono or stereo
//! (stereo is averaged to mono); integer formats are scaled by their
//! full-scale magnitude (e.g. PCM16 by 1/32768). Writing produces the
//! canonical 44-byte-header layout in PCM16 (round-half-away-from-zero,
//! saturating) or 32-bit float (lossless round trip).

use crate::dsp::{AudioBuffer, IO_SAMPLE_RATES};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::WavParse {
                offset: self.pos as u64,
                msg: format!("unexpected end of file reading {what}"),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn check_io_rate(rate: u32) -> Result<()> {
    if !IO_SAMPLE_RATES.contains(&rate) {
        return Err(Error::Domain(format!(
            "sample rate {rate} Hz not supported at I/O boundaries (expected one of {IO_SAMPLE_RATES:?})"
        )));
    }
    Ok(())
}

/// Read a WAV file into a mono [`AudioBuffer`] scaled to `[-1, 1]`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
    };
    if cur.take(4, "RIFF tag")? != b"RIFF" {
        return Err(Error::WavParse {
            offset: 0,
            msg: "missing RIFF tag".into(),
        });
    }
    let _riff_size = cur.u32("RIFF size")?;
    if cur.take(4, "WAVE tag")? != b"WAVE" {
        return Err(Error::WavParse {
            offset: 8,
            msg: "missing WAVE tag".into(),
        });
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut payload: Option<&[u8]> = None;
    while cur.pos + 8 <= data.len() {
        let id_off = cur.pos as u64;
        let id: [u8; 4] = cur.take(4, "chunk id")?.try_into().unwrap();
        let size = cur.u32("chunk size")? as usize;
        let body = cur.take(size.min(data.len() - cur.pos), "chunk body")?;
        if body.len() < size && &id != b"data" {
            return Err(Error::WavParse {
                offset: id_off,
                msg: format!("chunk {:?} truncated", String::from_utf8_lossy(&id)),
            });
        }
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::WavParse {
                        offset: id_off,
                        msg: "fmt chunk shorter than 16 bytes".into(),
                    });
                }
                let mut c = Cursor {
                    data: body,
                    pos: 0,
                };
                let tag = c.u16("format tag")?;
                let channels = c.u16("channels")?;
                let rate = c.u32("sample rate")?;
                let _byte_rate = c.u32("byte rate")?;
                let _block_align = c.u16("block align")?;
                let bits = c.u16("bits per sample")?;
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                payload = Some(body);
            }
            _ => {}
        }
        if size % 2 == 1 && cur.pos < data.len() {
            cur.pos += 1; // chunk padding byte
        }
    }

    let (tag, channels, rate, bits) = fmt.ok_or(Error::WavParse {
        offset: 12,
        msg: "no fmt chunk".into(),
    })?;
    let payload = payload.ok_or(Error::WavParse {
        offset: 12,
        msg: "no data chunk".into(),
    })?;
    if channels == 0 || channels > 2 {
        return Err(Error::Domain(format!(
            "only mono or stereo WAV supported, got {channels} channels"
        )));
    }
    check_io_rate(rate)?;

    let decode = |bytes: &[u8]| -> Result<Vec<f64>> {
        match (tag, bits) {
            (1, 16) => Ok(bytes
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                .collect()),
            (1, 24) => Ok(bytes
                .chunks_exact(3)
                .map(|b| {
                    let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                    v as f64 / 8_388_608.0
                })
                .collect()),
            (1, 32) => Ok(bytes
                .chunks_exact(4)
                .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0)
                .collect()),
            (3, 32) => Ok(bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect()),
            _ => Err(Error::UnsupportedCodec { tag }),
        }
    };
    let interleaved = decode(payload)?;
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect()
    };
    Ok(AudioBuffer::new(samples, rate))
}

/// Write a mono buffer as a canonical 44-byte-header WAV file.
pub fn write_wav(buf: &AudioBuffer, path: impl AsRef<Path>, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    buf.check_finite()?;
    check_io_rate(buf.sample_rate_hz)?;

    let (tag, bits): (u16, u16) = match format {
        WavFormat::Pcm16 => (1, 16),
        WavFormat::Float32 => (3, 32),
    };
    let bytes_per = (bits / 8) as u32;
    let data_len = buf.len() as u32 * bytes_per;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate_hz * bytes_per).to_le_bytes());
    out.extend_from_slice(&(bytes_per as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    match format {
        WavFormat::Pcm16 => {
            for &s in &buf.samples {
                // Round half away from zero, then saturate.
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WavFormat::Float32 => {
            for &s in &buf.samples {
                out.extend_from_slice(&(s as f32).to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        std::mem::forget(dir); // keep alive for the test process
        p
    }

    #[test]
    fn pcm16_full_scale_values() {
        let path = tmp("fs.wav");
        let buf = AudioBuffer::new(vec![32767.0 / 32768.0, -1.0], 8000);
        write_wav(&buf, &path, WavFormat::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples[0], 32767.0 / 32768.0);
        assert_eq!(back.samples[1], -1.0);
    }

    #[test]
    fn pcm16_saturates_above_full_scale() {
        let path = tmp("sat.wav");
        let buf = AudioBuffer::new(vec![1.5], 8000);
        write_wav(&buf, &path, WavFormat::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples[0], 32767.0 / 32768.0);
    }

    #[test]
    fn float32_round_trip_bit_exact() {
        let path = tmp("f32.wav");
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f32) * 0.01).sin() as f64).collect();
        let buf = AudioBuffer::new(samples.clone(), 48000);
        write_wav(&buf, &path, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, samples);
        assert_eq!(back.sample_rate_hz, 48000);
    }

    #[test]
    fn float32_file_size_is_canonical() {
        let path = tmp("size.wav");
        let buf = AudioBuffer::new(vec![0.0; 48000], 48000);
        write_wav(&buf, &path, WavFormat::Float32).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 44 + 4 * 48000);
    }

    #[test]
    fn empty_buffer_round_trips() {
        let path = tmp("empty.wav");
        write_wav(&AudioBuffer::new(vec![], 8000), &path, WavFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn malformed_riff_reports_offset() {
        let path = tmp("bad.wav");
        std::fs::write(&path, b"RIFX....WAVE").unwrap();
        match read_wav(&path) {
            Err(Error::WavParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_codec_names_tag() {
        let path = tmp("alaw.wav");
        // fmt tag 6 (A-law), 8 bits.
        let mut f = Vec::new();
        f.extend_from_slice(b"RIFF");
        f.extend_from_slice(&28u32.to_le_bytes());
        f.extend_from_slice(b"WAVE");
        f.extend_from_slice(b"fmt ");
        f.extend_from_slice(&16u32.to_le_bytes());
        f.extend_from_slice(&6u16.to_le_bytes());
        f.extend_from_slice(&1u16.to_le_bytes());
        f.extend_from_slice(&8000u32.to_le_bytes());
        f.extend_from_slice(&8000u32.to_le_bytes());
        f.extend_from_slice(&1u16.to_le_bytes());
        f.extend_from_slice(&8u16.to_le_bytes());
        f.extend_from_slice(b"data");
        f.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, f).unwrap();
        match read_wav(&path) {
            Err(Error::UnsupportedCodec { tag }) => assert_eq!(tag, 6),
            other => panic!("expected codec error, got {other:?}"),
        }
    }

    #[test]
    fn stereo_averages_to_mono() {
        // Hand-build a stereo PCM16 file: L = 0.5, R = -0.5 -> 0.0.
        let path = tmp("stereo.wav");
        let mut f = Vec::new();
        f.extend_from_slice(b"RIFF");
        f.extend_from_slice(&40u32.to_le_bytes());
        f.extend_from_slice(b"WAVE");
        f.extend_from_slice(b"fmt ");
        f.extend_from_slice(&16u32.to_le_bytes());
        f.extend_from_slice(&1u16.to_le_bytes());
        f.extend_from_slice(&2u16.to_le_bytes());
        f.extend_from_slice(&8000u32.to_le_bytes());
        f.extend_from_slice(&32000u32.to_le_bytes());
        f.extend_from_slice(&4u16.to_le_bytes());
        f.extend_from_slice(&16u16.to_le_bytes());
        f.extend_from_slice(b"data");
        f.extend_from_slice(&4u32.to_le_bytes());
        f.extend_from_slice(&16384i16.to_le_bytes());
        f.extend_from_slice(&(-16384i16).to_le_bytes());
        std::fs::write(&path, f).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.samples, vec![0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn pcm16_round_trip_within_lsb(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
            let path = tmp("rt.wav");
            let buf = AudioBuffer::new(samples.clone(), 16000);
            write_wav(&buf, &path, WavFormat::Pcm16).unwrap();
            let back = read_wav(&path).unwrap();
            for (a, b) in back.samples.iter().zip(&samples) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
