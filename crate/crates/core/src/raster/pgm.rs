use std::fmt::Write as _;
use std::path::Path;

use super::{scale_255, IntensityImage};
use crate::{Error, Result};

const GEOREF_TAG: &str = "georef";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`, decimal text.
    Ascii,
    /// `P5`, one byte per pixel.
    Binary,
}

/// 8-bit grayscale raster in file order (first row north).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
    /// Header comment lines without the leading `#`.
    pub comments: Vec<String>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            maxval: 255,
            pixels: vec![0; width * height],
            comments: Vec::new(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// North-up 8-bit rendering of `img`, values mapped from `[lo, hi]`
    /// onto 0..=255. The georeference goes into a header comment.
    pub fn from_intensity(img: &IntensityImage, lo: f64, hi: f64) -> GrayImage {
        let mut out = GrayImage::new(img.width, img.height);
        for row in 0..img.height {
            let file_row = img.height - 1 - row;
            for col in 0..img.width {
                let v = scale_255(img.get(row, col), lo, hi).round().clamp(0.0, 255.0);
                out.pixels[file_row * img.width + col] = v as u8;
            }
        }
        out.comments.push(format!(
            " {GEOREF_TAG} x0={} y0={} resolution={} first_row=north",
            img.x0, img.y0, img.resolution
        ));
        out
    }

    /// Back to a south-first intensity image with values 0..=255. Without a
    /// georeference comment the origin is (0, 0) at 1 m per pixel.
    pub fn to_intensity(&self) -> IntensityImage {
        let (x0, y0, res) = self.georef().unwrap_or((0.0, 0.0, 1.0));
        let mut img = IntensityImage::new(x0, y0, res, self.width, self.height);
        for file_row in 0..self.height {
            let row = self.height - 1 - file_row;
            for col in 0..self.width {
                img.set(row, col, self.get(file_row, col) as f64);
            }
        }
        img
    }

    fn georef(&self) -> Option<(f64, f64, f64)> {
        let line = self.comments.iter().find(|c| c.trim_start().starts_with(GEOREF_TAG))?;
        let field = |key: &str| -> Option<f64> {
            line.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
        };
        Some((field("x0")?, field("y0")?, field("resolution")?))
    }

    fn header(&self, magic: &str) -> String {
        let mut h = format!("{magic}\n");
        for c in &self.comments {
            let _ = writeln!(h, "#{c}");
        }
        let _ = write!(h, "{} {}\n{}\n", self.width, self.height, self.maxval);
        h
    }

    pub fn encode(&self, format: PgmFormat) -> Vec<u8> {
        match format {
            PgmFormat::Binary => {
                let mut out = self.header("P5").into_bytes();
                out.extend_from_slice(&self.pixels);
                out
            }
            PgmFormat::Ascii => {
                let mut out = self.header("P2");
                for row in self.pixels.chunks(self.width.max(1)) {
                    // Netpbm asks for lines of at most 70 characters.
                    let mut line = String::new();
                    for v in row {
                        let tok = v.to_string();
                        if !line.is_empty() && line.len() + 1 + tok.len() > 70 {
                            out.push_str(&line);
                            out.push('\n');
                            line.clear();
                        }
                        if !line.is_empty() {
                            line.push(' ');
                        }
                        line.push_str(&tok);
                    }
                    out.push_str(&line);
                    out.push('\n');
                }
                out.into_bytes()
            }
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<GrayImage> {
        let mut cur = Cursor { bytes, pos: 0, comments: Vec::new() };
        let magic = cur.token()?;
        let binary = match magic.as_str() {
            "P5" => true,
            "P2" => false,
            other => return Err(parse_err(format!("unsupported PGM magic {other:?}"))),
        };
        let width = cur.number()?;
        let height = cur.number()?;
        let maxval = cur.number()?;
        if width == 0 || height == 0 {
            return Err(parse_err("PGM dimensions must be positive"));
        }
        if !(1..=255).contains(&maxval) {
            return Err(parse_err(format!("only 8-bit PGM is supported, maxval {maxval}")));
        }
        let n = width * height;
        let pixels = if binary {
            // Exactly one whitespace byte separates the header from the data.
            let start = cur.pos + 1;
            let data = bytes
                .get(start..start + n)
                .ok_or_else(|| parse_err(format!("P5 data truncated: need {n} bytes")))?;
            data.to_vec()
        } else {
            (0..n).map(|_| cur.number().map(|v| v as u8)).collect::<Result<Vec<u8>>>()?
        };
        if let Some(v) = pixels.iter().find(|&&v| v as usize > maxval) {
            return Err(parse_err(format!("pixel value {v} exceeds maxval {maxval}")));
        }
        Ok(GrayImage {
            width,
            height,
            maxval: maxval as u8,
            pixels,
            comments: cur.comments,
        })
    }
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse { line: 0, message: message.into() }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    comments: Vec<String>,
}

impl Cursor<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                None => return Err(parse_err("unexpected end of PGM header")),
                Some(b'#') => {
                    let end = self.bytes[self.pos..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(self.bytes.len(), |k| self.pos + k);
                    self.comments.push(String::from_utf8_lossy(&self.bytes[self.pos + 1..end]).into_owned());
                    self.pos = end;
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse().map_err(|_| parse_err(format!("expected a number, found {tok:?}")))
    }
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage, format: PgmFormat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, image.encode(format)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    GrayImage::decode(&bytes)
}
