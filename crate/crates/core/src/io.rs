//! Raw planar YUV 4:2:0 decoding and dataset manifests.
//!
//! Samples are normalized onto a shared `[0, 255]` scale: 8-bit values pass
//! through unchanged and 10-bit values are divided by four.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Color channel of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Y,
    Cb,
    Cr,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Y, Channel::Cb, Channel::Cr];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Y => "Y",
            Channel::Cb => "Cb",
            Channel::Cr => "Cr",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Y" => Ok(Channel::Y),
            "Cb" => Ok(Channel::Cb),
            "Cr" => Ok(Channel::Cr),
            _ => Err(Error::InvalidSpec(format!("unknown channel `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitDepth {
    Eight,
    Ten,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            10 => Ok(BitDepth::Ten),
            _ => Err(Error::InvalidSpec(format!(
                "unsupported bit depth {bits} (expected 8 or 10)"
            ))),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Ten => 10,
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            BitDepth::Eight => 1,
            BitDepth::Ten => 2,
        }
    }
}

/// Geometry of a planar 4:2:0 video file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    pub frame_count: usize,
}

impl VideoSpec {
    pub fn new(width: usize, height: usize, bit_depth: BitDepth, frame_count: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSpec("width and height must be positive".into()));
        }
        if !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::InvalidSpec(format!(
                "4:2:0 video needs even dimensions, got {width}x{height}"
            )));
        }
        if frame_count == 0 {
            return Err(Error::InvalidSpec("video has no frames".into()));
        }
        Ok(VideoSpec {
            width,
            height,
            bit_depth,
            frame_count,
        })
    }

    pub fn luma_samples(&self) -> usize {
        self.width * self.height
    }

    pub fn chroma_samples(&self) -> usize {
        (self.width / 2) * (self.height / 2)
    }

    /// Bytes occupied by one frame (Y, Cb, Cr planes).
    pub fn frame_size(&self) -> usize {
        (self.luma_samples() + 2 * self.chroma_samples()) * self.bit_depth.bytes_per_sample()
    }

    /// Derives the frame count from a file length, rejecting partial frames.
    pub fn from_file_len(width: usize, height: usize, bit_depth: BitDepth, len: u64) -> Result<Self> {
        let probe = VideoSpec::new(width, height, bit_depth, 1)?;
        let frame = probe.frame_size() as u64;
        let count = len / frame;
        let rem = len % frame;
        if rem != 0 {
            return Err(Error::Truncated {
                offset: count * frame,
                needed: frame,
                available: rem,
            });
        }
        VideoSpec::new(width, height, bit_depth, count as usize)
    }
}

/// One frame as normalized Y, Cb and Cr planes.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePlanes {
    pub y: Array2<f64>,
    pub cb: Array2<f64>,
    pub cr: Array2<f64>,
}

impl FramePlanes {
    pub fn plane(&self, channel: Channel) -> &Array2<f64> {
        match channel {
            Channel::Y => &self.y,
            Channel::Cb => &self.cb,
            Channel::Cr => &self.cr,
        }
    }

    pub fn plane_mut(&mut self, channel: Channel) -> &mut Array2<f64> {
        match channel {
            Channel::Y => &mut self.y,
            Channel::Cb => &mut self.cb,
            Channel::Cr => &mut self.cr,
        }
    }

    /// Uniform gray frame of the given luma size.
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        FramePlanes {
            y: Array2::from_elem((height, width), value),
            cb: Array2::from_elem((height / 2, width / 2), value),
            cr: Array2::from_elem((height / 2, width / 2), value),
        }
    }

    pub fn width(&self) -> usize {
        self.y.ncols()
    }

    pub fn height(&self) -> usize {
        self.y.nrows()
    }
}

/// Decodes one frame's worth of bytes. `base_offset` is only used to report
/// the absolute file offset of out-of-range 10-bit samples.
pub fn decode_frame(bytes: &[u8], spec: &VideoSpec, base_offset: u64) -> Result<FramePlanes> {
    let need = spec.frame_size();
    if bytes.len() < need {
        return Err(Error::Truncated {
            offset: base_offset,
            needed: need as u64,
            available: bytes.len() as u64,
        });
    }
    let (w, h) = (spec.width, spec.height);
    let (cw, ch) = (w / 2, h / 2);
    let bps = spec.bit_depth.bytes_per_sample();
    let luma_bytes = w * h * bps;
    let chroma_bytes = cw * ch * bps;

    let plane = |start: usize, rows: usize, cols: usize| -> Result<Array2<f64>> {
        let raw = &bytes[start..start + rows * cols * bps];
        let samples = match spec.bit_depth {
            BitDepth::Eight => raw.iter().map(|&b| f64::from(b)).collect::<Vec<_>>(),
            BitDepth::Ten => {
                let mut out = Vec::with_capacity(rows * cols);
                for (i, pair) in raw.chunks_exact(2).enumerate() {
                    let v = u16::from_le_bytes([pair[0], pair[1]]);
                    if v > 1023 {
                        return Err(Error::SampleRange {
                            offset: base_offset + (start + 2 * i) as u64,
                            value: v,
                        });
                    }
                    out.push(f64::from(v) / 4.0);
                }
                out
            }
        };
        Ok(Array2::from_shape_vec((rows, cols), samples).expect("plane size matches"))
    };

    Ok(FramePlanes {
        y: plane(0, h, w)?,
        cb: plane(luma_bytes, ch, cw)?,
        cr: plane(luma_bytes + chroma_bytes, ch, cw)?,
    })
}

/// Inverse of [`decode_frame`]: rounds and clamps samples back to the
/// container's integer range.
pub fn encode_frame(frame: &FramePlanes, bit_depth: BitDepth) -> Vec<u8> {
    let mut out = Vec::new();
    for plane in [&frame.y, &frame.cb, &frame.cr] {
        for &v in plane.iter() {
            match bit_depth {
                BitDepth::Eight => out.push(v.round().clamp(0.0, 255.0) as u8),
                BitDepth::Ten => {
                    let word = (v * 4.0).round().clamp(0.0, 1023.0) as u16;
                    out.extend_from_slice(&word.to_le_bytes());
                }
            }
        }
    }
    out
}

/// Random-access reader over a raw `.yuv` file.
///
/// Reads are positional, so a shared reader can serve concurrent requests for
/// distinct frames.
#[derive(Debug)]
pub struct YuvReader {
    file: File,
    path: PathBuf,
    spec: VideoSpec,
}

impl YuvReader {
    pub fn open(path: impl AsRef<Path>, width: usize, height: usize, bit_depth: BitDepth) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        let spec = VideoSpec::from_file_len(width, height, bit_depth, len)?;
        Ok(YuvReader { file, path, spec })
    }

    pub fn spec(&self) -> &VideoSpec {
        &self.spec
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_frame(&self, index: usize) -> Result<FramePlanes> {
        if index >= self.spec.frame_count {
            return Err(Error::FrameIndex {
                index,
                count: self.spec.frame_count,
            });
        }
        let size = self.spec.frame_size();
        let offset = (index * size) as u64;
        let mut buf = vec![0u8; size];
        read_exact_at(&self.file, &mut buf, offset).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    offset,
                    needed: size as u64,
                    available: 0,
                }
            } else {
                Error::io(&self.path, e)
            }
        })?;
        decode_frame(&buf, &self.spec, offset)
    }
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> std::io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> std::io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset)? {
            0 => return Err(std::io::ErrorKind::UnexpectedEof.into()),
            n => {
                buf = &mut buf[n..];
                offset += n as u64;
            }
        }
    }
    Ok(())
}

/// Reads frame `index` of a raw file.
pub fn read_frame(path: impl AsRef<Path>, spec: &VideoSpec, index: usize) -> Result<FramePlanes> {
    let reader = YuvReader::open(path, spec.width, spec.height, spec.bit_depth)?;
    reader.read_frame(index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub ref_path: PathBuf,
    pub dis_path: PathBuf,
    pub spec: VideoSpec,
    pub mos: f64,
}

/// A subjective database: reference/distorted pairs with their MOS.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub rows: Vec<ManifestRow>,
}

const MANIFEST_COLUMNS: [&str; 6] = ["ref_path", "dis_path", "width", "height", "bit_depth", "mos"];

/// Loads a manifest CSV. Relative video paths resolve against the manifest's
/// directory; both files of every row must exist and agree in size.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let err = |row: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| err(0, e.to_string()))?.clone();
    let mut index = [0usize; 6];
    for (slot, col) in index.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| err(0, format!("missing column `{col}`")))?;
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| err(row, e.to_string()))?;
        let field = |c: usize| record.get(index[c]).unwrap_or("");
        let int = |c: usize| -> Result<usize> {
            field(c)
                .parse()
                .map_err(|_| err(row, format!("`{}` is not a valid {}", field(c), MANIFEST_COLUMNS[c])))
        };
        let width = int(2)?;
        let height = int(3)?;
        let bit_depth = BitDepth::from_bits(int(4)? as u32).map_err(|e| err(row, e.to_string()))?;
        let mos: f64 = field(5)
            .parse()
            .map_err(|_| err(row, format!("mos `{}` is not numeric", field(5))))?;
        if !mos.is_finite() {
            return Err(err(row, format!("mos `{}` is not finite", field(5))));
        }

        let resolve = |c: usize| -> Result<(PathBuf, u64)> {
            let raw = PathBuf::from(field(c));
            let p = if raw.is_absolute() { raw } else { base.join(raw) };
            let len = std::fs::metadata(&p)
                .map_err(|e| err(row, format!("{}: {e}", p.display())))?
                .len();
            Ok((p, len))
        };
        let (ref_path, ref_len) = resolve(0)?;
        let (dis_path, dis_len) = resolve(1)?;
        if ref_len != dis_len {
            return Err(err(
                row,
                format!("reference ({ref_len} bytes) and distorted ({dis_len} bytes) differ in length"),
            ));
        }
        let spec = VideoSpec::from_file_len(width, height, bit_depth, ref_len)
            .map_err(|e| err(row, e.to_string()))?;
        rows.push(ManifestRow {
            ref_path,
            dis_path,
            spec,
            mos,
        });
    }

    Ok(DatasetManifest { name, rows })
}
