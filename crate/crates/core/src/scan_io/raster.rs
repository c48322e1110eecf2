//! 8-bit binary PGM (P5) and PPM (P6) rasters with samples scaled to [0,1].

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// 1 (gray, depth, mask) or 3 (RGB).
    pub channels: usize,
    /// Row-major, channel-interleaved.
    pub samples: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, fill: f64) -> Self {
        Raster {
            width,
            height,
            channels,
            samples: vec![fill; width * height * channels],
        }
    }

    pub fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("unsupported channel count {channels}")));
        }
        if samples.len() != width * height * channels {
            return Err(Error::Format(format!(
                "expected {} samples, found {}",
                width * height * channels,
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Format("sample outside [0,1]".into()));
        }
        Ok(Raster {
            width,
            height,
            channels,
            samples,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.samples[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.samples[i] = v;
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Mean over channels at `(x, y)`.
    pub fn gray(&self, x: usize, y: usize) -> f64 {
        let base = self.index(x, y, 0);
        let px = &self.samples[base..base + self.channels];
        px.iter().sum::<f64>() / self.channels as f64
    }

    /// Single channel `c` as a one-channel raster.
    pub fn channel(&self, c: usize) -> Raster {
        let samples = self
            .samples
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            samples,
        }
    }

    /// Count of pixels with any non-zero channel.
    pub fn nonzero_pixels(&self) -> usize {
        self.samples
            .chunks(self.channels)
            .filter(|px| px.iter().any(|&v| v != 0.0))
            .count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let magic = match self.channels {
            1 => "P5",
            _ => "P6",
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.samples
                .iter()
                .map(|&s| (s.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        let magic = cursor.token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(Error::Format(format!("unknown magic number {other:?}"))),
        };
        let width = cursor.number()?;
        let height = cursor.number()?;
        let maxval = cursor.number()?;
        if maxval != 255 {
            return Err(Error::Format(format!("only 8-bit rasters supported, maxval {maxval}")));
        }
        // Exactly one whitespace byte separates the header from the payload.
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(Error::Format("missing header terminator".into())),
        }
        let payload = &bytes[cursor.pos..];
        let need = width * height * channels;
        if payload.len() < need {
            return Err(Error::Format(format!(
                "truncated payload: need {need} bytes, found {}",
                payload.len()
            )));
        }
        if payload.len() > need {
            return Err(Error::Format(format!(
                "trailing bytes: need {need}, found {}",
                payload.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            samples: payload.iter().map(|&b| b as f64 / 255.0).collect(),
        })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Format(format!("bad header number {tok:?}")))
    }
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Raster::from_bytes(&bytes)
}

pub fn write_raster(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, raster.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_scaling() {
        let r = Raster::from_bytes(b"P5\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!(r.channels, 1);
        assert_eq!(r.samples, vec![0.0, 1.0]);
    }

    #[test]
    fn p6_short_payload() {
        let err = Raster::from_bytes(b"P6\n2 1\n255\n\x01\x02\x03\x04\x05").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn unknown_magic() {
        assert!(Raster::from_bytes(b"P3\n1 1\n255\n0 0 0").is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let r = Raster::from_bytes(b"P5\n# made by hand\n1 1\n255\n\x80").unwrap();
        assert_eq!(r.samples, vec![128.0 / 255.0]);
    }

    #[test]
    fn bytes_round_trip() {
        let bytes = b"P6\n2 1\n255\n\x00\x10\x20\x30\x40\xff".to_vec();
        let r = Raster::from_bytes(&bytes).unwrap();
        assert_eq!(r.to_bytes(), bytes);
    }
}
