//! Image containers, pixel access, and bit-exact PPM/PGM file I/O.
//!
//! Pixel data is stored as `f64` throughout the pipeline; quantization to
//! 8-bit happens only when writing files (clamp to `[0, 255]`, round half
//! up), so ratio-heavy downstream math never sees truncation artifacts.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} samples, got {got}")]
    TruncatedData { expected: usize, got: usize },
    #[error("expected {expected} channels, got {got}")]
    WrongChannelCount { expected: usize, got: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// Width x height pixel grid, 1 (gray) or 3 (RGB) channels, row-major
/// interleaved samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidImage("zero dimension".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(RasterError::WrongChannelCount {
                expected: 1,
                got: channels,
            });
        }
        if data.len() != width * height * channels {
            return Err(RasterError::TruncatedData {
                expected: width * height * channels,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(RasterError::InvalidImage("non-finite sample".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// All-zero gray image.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Sample at (row, col, channel). Panics out of bounds.
    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        self.data[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width && channel < self.channels);
        self.data[(row * self.width + col) * self.channels + channel] = value;
    }

    /// RGB triple at (row, col). Panics if not 3-channel.
    #[inline]
    pub fn rgb(&self, row: usize, col: usize) -> [f64; 3] {
        assert_eq!(self.channels, 3);
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Foreground/background grid from segmentation, row-major bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, RasterError> {
        if bits.len() != width * height {
            return Err(RasterError::TruncatedData {
                expected: width * height,
                got: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(RasterError::InvalidImage("mask bits must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value as u8;
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Foreground pixel with at least one background 4-neighbor; the image
    /// edge counts as background.
    pub fn is_boundary(&self, row: usize, col: usize) -> bool {
        if !self.get(row, col) {
            return false;
        }
        row == 0
            || col == 0
            || row == self.height - 1
            || col == self.width - 1
            || !self.get(row - 1, col)
            || !self.get(row + 1, col)
            || !self.get(row, col - 1)
            || !self.get(row, col + 1)
    }

    /// Render as a gray image (foreground 255, background 0).
    pub fn to_image(&self) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.bits.iter().map(|&b| f64::from(b) * 255.0).collect(),
        }
    }

    /// Threshold a gray image at 128: values >= 128 become foreground.
    pub fn from_image(image: &RasterImage) -> Result<Self, RasterError> {
        if image.channels != 1 {
            return Err(RasterError::WrongChannelCount {
                expected: 1,
                got: image.channels,
            });
        }
        Ok(Self {
            width: image.width,
            height: image.height,
            bits: image.data.iter().map(|&v| (v >= 128.0) as u8).collect(),
        })
    }
}

/// Ordered boundary trace, (row, col) per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(usize, usize)>,
}

impl fmt::Display for Contour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (row, col) in &self.points {
            writeln!(f, "{},{}", row, col)?;
        }
        Ok(())
    }
}

/// Quantize one sample for file output: clamp to [0, 255], round half up.
#[inline]
pub fn quantize(value: f64) -> u8 {
    (value.clamp(0.0, 255.0) + 0.5).floor().min(255.0) as u8
}

fn open_err(path: &Path, source: io::Error) -> RasterError {
    if source.kind() == io::ErrorKind::NotFound {
        RasterError::FileNotFound(path.display().to_string())
    } else {
        RasterError::IoFailure {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Load a binary PPM (P6) or PGM (P5) file with maxval 255.
pub fn load_image<P: AsRef<Path>>(path: P) -> Result<RasterImage, RasterError> {
    let path = path.as_ref();
    let mut raw = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| open_err(path, e))?
        .read_to_end(&mut raw)
        .map_err(|e| open_err(path, e))?;

    let (header, payload_start) = parse_pnm_header(&raw)?;
    let (width, height, channels) = header;
    let expected = width * height * channels;
    let payload = &raw[payload_start..];
    if payload.len() < expected {
        return Err(RasterError::TruncatedData {
            expected,
            got: payload.len(),
        });
    }
    let data = payload[..expected].iter().map(|&b| f64::from(b)).collect();
    RasterImage::new(width, height, channels, data)
}

/// Returns ((width, height, channels), payload offset).
fn parse_pnm_header(raw: &[u8]) -> Result<((usize, usize, usize), usize), RasterError> {
    if raw.len() < 2 {
        return Err(RasterError::MalformedHeader("file too short".into()));
    }
    let channels = match &raw[..2] {
        b"P6" => 3,
        b"P5" => 1,
        _ => {
            return Err(RasterError::MalformedHeader(
                "magic must be P5 or P6".into(),
            ))
        }
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace run
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < raw.len() && raw[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(RasterError::MalformedHeader(
                "expected decimal header field".into(),
            ));
        }
        let text = std::str::from_utf8(&raw[start..pos]).unwrap();
        *field = text
            .parse()
            .map_err(|_| RasterError::MalformedHeader(format!("bad field `{text}`")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(RasterError::MalformedHeader("zero dimension".into()));
    }
    if maxval != 255 {
        return Err(RasterError::MalformedHeader(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= raw.len() || !raw[pos].is_ascii_whitespace() {
        return Err(RasterError::MalformedHeader(
            "missing whitespace before payload".into(),
        ));
    }
    Ok(((width, height, channels), pos + 1))
}

/// Write a binary PPM/PGM file; parses back to an identical 8-bit image.
pub fn save_image<P: AsRef<Path>>(image: &RasterImage, path: P) -> Result<(), RasterError> {
    let path = path.as_ref();
    let magic = if image.channels == 3 { "P6" } else { "P5" };
    let mut out = Vec::with_capacity(image.data.len() + 32);
    write!(out, "{magic}\n{} {}\n255\n", image.width, image.height).unwrap();
    out.extend(image.data.iter().map(|&v| quantize(v)));
    std::fs::write(path, out).map_err(|e| RasterError::IoFailure {
        path: path.display().to_string(),
        source: e,
    })
}

/// Rec. 601 luma: 0.299 R + 0.587 G + 0.114 B, kept real-valued.
pub fn to_gray(image: &RasterImage) -> Result<RasterImage, RasterError> {
    if image.channels != 3 {
        return Err(RasterError::WrongChannelCount {
            expected: 3,
            got: image.channels,
        });
    }
    let data = image
        .data
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect();
    Ok(RasterImage {
        width: image.width,
        height: image.height,
        channels: 1,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn load_pgm_2x2() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        std::fs::write(&path, b"P5\n2 2\n255\n\x00\x40\x80\xff").unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.data(), &[0.0, 64.0, 128.0, 255.0]);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("deep.ppm");
        std::fs::write(&path, b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00").unwrap();
        match load_image(&path) {
            Err(RasterError::MalformedHeader(_)) => {}
            other => panic!("expected MalformedHeader, got {other:?}"),
        }
    }

    #[test]
    fn missing_file() {
        match load_image("/nonexistent/x.pgm") {
            Err(RasterError::FileNotFound(_)) => {}
            other => panic!("expected FileNotFound, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        std::fs::write(&path, b"P5\n2 2\n255\n\x01\x02").unwrap();
        match load_image(&path) {
            Err(RasterError::TruncatedData {
                expected: 4,
                got: 2,
            }) => {}
            other => panic!("expected TruncatedData, got {other:?}"),
        }
    }

    #[test]
    fn save_quantizes_and_clamps() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        let img = RasterImage::new(4, 1, 1, vec![0.0, 255.0, 254.6, -3.0]).unwrap();
        save_image(&img, &path).unwrap();
        let raw = std::fs::read(&path).unwrap();
        let payload = &raw[raw.len() - 4..];
        assert_eq!(payload, &[0, 255, 255, 0]);
    }

    #[test]
    fn round_trip_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.ppm");
        let data: Vec<f64> = (0..3 * 5 * 4).map(|i| f64::from((i * 37 % 256) as u8)).collect();
        let img = RasterImage::new(5, 4, 3, data).unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn gray_weights() {
        let img = RasterImage::new(3, 1, 3, vec![
            255.0, 255.0, 255.0, //
            255.0, 0.0, 0.0, //
            0.0, 0.0, 0.0,
        ])
        .unwrap();
        let gray = to_gray(&img).unwrap();
        assert!((gray.data()[0] - 255.0).abs() < 1e-12);
        assert!((gray.data()[1] - 76.245).abs() < 1e-12);
        assert_eq!(gray.data()[2], 0.0);
    }

    #[test]
    fn gray_requires_rgb() {
        let img = RasterImage::zeros(2, 2);
        assert!(matches!(
            to_gray(&img),
            Err(RasterError::WrongChannelCount { .. })
        ));
    }

    #[test]
    fn gray_bounded_and_monotone() {
        // monotone in each channel, output within [0, 255]
        let base = [10.0, 200.0, 90.0];
        let gray_at = |px: [f64; 3]| {
            let img = RasterImage::new(1, 1, 3, px.to_vec()).unwrap();
            to_gray(&img).unwrap().data()[0]
        };
        let g0 = gray_at(base);
        assert!((0.0..=255.0).contains(&g0));
        for ch in 0..3 {
            let mut up = base;
            up[ch] += 30.0;
            assert!(gray_at(up) > g0);
        }
    }
}
