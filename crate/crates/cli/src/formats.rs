//! Binary problem, solution and dual files, and Netpbm rasters.
//!
//! All three binary formats share an 18-byte little-endian header:
//! 4-byte magic, `u16` version, then `u32` width, height and labels. The
//! payload follows in row-major, label-fastest order.
//!
//! | magic  | payload                             |
//! |--------|-------------------------------------|
//! | `MCDT` | `w·h·l` f32 costs                   |
//! | `MCSF` | `w·h·l` f32 relaxed labeling values |
//! | `MCDV` | `w·h·2·l` f64 dual values           |

use mcrelax::{DataTerm, DualField, GridShape, IntegralField, MatrixField, SimplexField, DIM};

pub const PROBLEM_MAGIC: [u8; 4] = *b"MCDT";
pub const SOLUTION_MAGIC: [u8; 4] = *b"MCSF";
pub const DUAL_MAGIC: [u8; 4] = *b"MCDV";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

/// Largest simplex violation accepted when loading a solution file; f32
/// storage alone introduces about `l · 6e-8`.
pub const SOLUTION_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {found:?}, expected {expected:?}")]
    Magic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("{0}")]
    Malformed(String),
    /// Well-formed file whose content violates a domain invariant.
    #[error(transparent)]
    Invalid(#[from] mcrelax::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

fn encode_header(magic: [u8; 4], shape: GridShape, payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for n in [shape.width(), shape.height(), shape.labels()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out
}

/// Parses the header and returns the shape and the payload slice, checked
/// to hold exactly `per_entry · elem` bytes per label vector entry.
fn decode_header(bytes: &[u8], magic: [u8; 4], per_entry: usize, elem: usize) -> Result<(GridShape, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Malformed(format!("file too short for header ({} bytes)", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(FormatError::Magic { found, expected: magic });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[6 + 4 * k..10 + 4 * k].try_into().unwrap()) as usize;
    let shape = GridShape::new(dim(0), dim(1), dim(2))?;
    let payload = &bytes[HEADER_LEN..];
    let expected = shape
        .vector_len()
        .checked_mul(per_entry * elem)
        .ok_or_else(|| FormatError::Malformed("declared size overflows".into()))?;
    if payload.len() != expected {
        return Err(FormatError::Malformed(format!(
            "payload has {} bytes, header declares {expected}",
            payload.len()
        )));
    }
    Ok((shape, payload))
}

fn f32_values(payload: &[u8]) -> Vec<f64> {
    payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect()
}

fn push_f32(out: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_problem(s: &DataTerm) -> Vec<u8> {
    let mut out = encode_header(PROBLEM_MAGIC, s.shape(), 4 * s.costs().len());
    push_f32(&mut out, s.costs());
    out
}

pub fn decode_problem(bytes: &[u8]) -> Result<DataTerm> {
    let (shape, payload) = decode_header(bytes, PROBLEM_MAGIC, 1, 4)?;
    Ok(DataTerm::new(shape, f32_values(payload))?)
}

pub fn encode_solution(u: &SimplexField) -> Vec<u8> {
    let mut out = encode_header(SOLUTION_MAGIC, u.shape(), 4 * u.values().len());
    push_f32(&mut out, u.values());
    out
}

/// Solution file content exactly as stored.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSolution {
    pub shape: GridShape,
    pub values: Vec<f32>,
}

impl RawSolution {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = encode_header(SOLUTION_MAGIC, self.shape, 4 * self.values.len());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (shape, payload) = decode_header(bytes, SOLUTION_MAGIC, 1, 4)?;
        let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { shape, values })
    }

    /// Projects each pixel back onto the simplex to undo f32 storage error.
    /// Fails if a pixel is off by more than [`SOLUTION_TOL`].
    pub fn into_field(self) -> Result<SimplexField> {
        let l = self.shape.labels();
        let values: Vec<f64> = self.values.iter().map(|&v| v as f64).collect();
        for (px, v) in values.chunks_exact(l).enumerate() {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                return Err(mcrelax::Error::NonFinite { index: px * l + k }.into());
            }
            let neg = v.iter().fold(0.0f64, |m, &x| m.max(-x));
            let off = (v.iter().sum::<f64>() - 1.0).abs();
            if neg.max(off) > SOLUTION_TOL {
                return Err(mcrelax::Error::Infeasible(format!(
                    "pixel {px} is {:e} away from the simplex",
                    neg.max(off)
                ))
                .into());
            }
        }
        Ok(SimplexField::from_projection(self.shape, values)?)
    }
}

pub fn decode_solution(bytes: &[u8]) -> Result<SimplexField> {
    RawSolution::decode(bytes)?.into_field()
}

pub fn encode_dual(p: &DualField) -> Vec<u8> {
    let mut out = encode_header(DUAL_MAGIC, p.shape(), 8 * p.values().len());
    for &v in p.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dual(bytes: &[u8]) -> Result<DualField> {
    let (shape, payload) = decode_header(bytes, DUAL_MAGIC, DIM, 8)?;
    let values: Vec<f64> =
        payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(MatrixField::new(shape, values)?)
}

/// Gray level of label `i` (zero-based) among `l`: `⌊255 i / (l − 1)⌋`.
pub fn pgm_level(label: u32, labels: usize) -> u8 {
    if labels < 2 {
        return 0;
    }
    (255 * label as usize / (labels - 1)) as u8
}

/// Binary PGM (P5) rendering of a label map.
pub fn encode_pgm(labels: &IntegralField) -> Vec<u8> {
    let shape = labels.shape();
    let mut out = format!("P5\n{} {}\n255\n", shape.width(), shape.height()).into_bytes();
    out.extend(labels.labels().iter().map(|&i| pgm_level(i, shape.labels())));
    out
}

/// An 8- or 16-bit Netpbm raster with `channels` samples per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub channels: usize,
    pub samples: Vec<u16>,
}

impl Raster {
    pub fn pixel(&self, index: usize) -> &[u16] {
        &self.samples[index * self.channels..(index + 1) * self.channels]
    }
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn header_token(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| FormatError::Malformed(format!("bad header field at byte {start}")))
}

fn decode_netpbm(bytes: &[u8], magic: &[u8; 2], channels: usize) -> Result<Raster> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(FormatError::Malformed(format!(
            "expected {} header",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let width = header_token(bytes, &mut pos)?;
    let height = header_token(bytes, &mut pos)?;
    let maxval = header_token(bytes, &mut pos)?;
    if width == 0 || height == 0 || !(1..=65535).contains(&maxval) {
        return Err(FormatError::Malformed(format!("bad dimensions {width}x{height}, maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(FormatError::Malformed("missing raster separator".into()));
    }
    pos += 1;
    let wide = maxval > 255;
    let count = width * height * channels;
    let need = count * if wide { 2 } else { 1 };
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(FormatError::Malformed(format!("raster has {} bytes, need {need}", raster.len())));
    }
    let samples: Vec<u16> = if wide {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster[..need].iter().map(|&b| b as u16).collect()
    };
    if let Some(s) = samples.iter().find(|&&s| s as usize > maxval) {
        return Err(FormatError::Malformed(format!("sample {s} exceeds maxval {maxval}")));
    }
    Ok(Raster { width, height, maxval: maxval as u16, channels, samples })
}

/// Binary PPM (P6) reader.
pub fn decode_ppm(bytes: &[u8]) -> Result<Raster> {
    decode_netpbm(bytes, b"P6", 3)
}

/// Binary PGM (P5) reader.
pub fn decode_pgm(bytes: &[u8]) -> Result<Raster> {
    decode_netpbm(bytes, b"P5", 1)
}

/// Binary PPM (P6) writer for 8-bit RGB data.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for px in rgb {
        out.extend_from_slice(px);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let s = DataTerm::zeros(GridShape::new(3, 2, 4).unwrap());
        let b = encode_problem(&s);
        assert_eq!(&b[..4], b"MCDT");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[6..10], &[3, 0, 0, 0]);
        assert_eq!(&b[10..14], &[2, 0, 0, 0]);
        assert_eq!(&b[14..18], &[4, 0, 0, 0]);
        assert_eq!(b.len(), 18 + 4 * 24);
    }

    #[test]
    fn rejects_bad_files() {
        let s = DataTerm::zeros(GridShape::new(2, 2, 2).unwrap());
        let b = encode_problem(&s);
        assert!(matches!(decode_problem(&b[..10]), Err(FormatError::Malformed(_))));
        assert!(matches!(decode_problem(&b[..b.len() - 1]), Err(FormatError::Malformed(_))));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_problem(&bad), Err(FormatError::Magic { .. })));
        let mut bad = b.clone();
        bad[4] = 2;
        assert!(matches!(decode_problem(&bad), Err(FormatError::Version(2))));
        let mut bad = b.clone();
        bad[18..22].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode_problem(&bad), Err(FormatError::Invalid(_))));
        let mut bad = b;
        bad[18..22].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_problem(&bad), Err(FormatError::Invalid(_))));
        assert!(matches!(decode_solution(&encode_problem(&s)), Err(FormatError::Magic { .. })));
    }

    #[test]
    fn solution_off_simplex_is_rejected() {
        let shape = GridShape::new(1, 1, 2).unwrap();
        let mut b = encode_solution(&SimplexField::uniform(shape));
        b[18..22].copy_from_slice(&0.6f32.to_le_bytes());
        assert!(matches!(decode_solution(&b), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn pgm_levels() {
        assert_eq!(pgm_level(0, 3), 0);
        assert_eq!(pgm_level(1, 3), 127);
        assert_eq!(pgm_level(2, 3), 255);
        assert_eq!(pgm_level(1, 2), 255);
        let lab = IntegralField::new(GridShape::new(2, 1, 2).unwrap(), vec![1, 0]).unwrap();
        assert_eq!(encode_pgm(&lab), b"P5\n2 1\n255\n\xff\x00".to_vec());
    }

    #[test]
    fn netpbm_headers_with_comments() {
        let img = b"P6\n# made by hand\n2 1\n# max\n255\n\x01\x02\x03\x04\x05\x06";
        let r = decode_ppm(img).unwrap();
        assert_eq!((r.width, r.height, r.maxval), (2, 1, 255));
        assert_eq!(r.pixel(1), &[4, 5, 6]);
        let wide = b"P6 1 1 1000\n\x03\xe8\x00\x00\x00\x01";
        assert_eq!(decode_ppm(wide).unwrap().samples, vec![1000, 0, 1]);
        assert!(decode_ppm(b"P6 1 1 255\n\x01\x02").is_err());
        assert!(decode_ppm(b"P5 1 1 255\n\x01").is_err());
        assert_eq!(decode_ppm(&encode_ppm(1, 1, &[[7, 8, 9]])).unwrap().samples, vec![7, 8, 9]);
    }
}
