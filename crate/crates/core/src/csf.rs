//! Contrast sensitivity models, in pixel-domain filter form or as per-subband
//! wavelet weights.
//!
//! Frequencies are in cycles/degree. `dh_ratio` is the viewing distance in
//! units of display height, for a 1080-line display.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Channel;

const BUNDLED_CONFIG: &str = include_str!("../data/csf.toml");

/// Tail coefficients kept by a truncated filter are below this fraction of the
/// peak magnitude.
pub const TAIL_FRACTION: f64 = 0.05;

/// Frequency samples between DC and Nyquist used to invert a sampled
/// frequency response.
pub const INVERSE_DFT_POINTS: usize = 1024;

/// Default viewing distance, in picture heights.
pub const DEFAULT_DH_RATIO: f64 = 3.0;

/// Wavelet subband orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subband {
    A,
    H,
    V,
    D,
}

impl Subband {
    pub const ALL: [Subband; 4] = [Subband::A, Subband::H, Subband::V, Subband::D];
    pub const DETAIL: [Subband; 3] = [Subband::H, Subband::V, Subband::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsfKind {
    SpatialFilter,
    SubbandWeights,
}

/// The seven contrast sensitivity methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CsfMethod {
    NganSpat,
    LiSW,
    NadenauSpat,
    NadenauSW,
    LarsonSW,
    WatsonSW,
    HillSW,
}

impl CsfMethod {
    pub const ALL: [CsfMethod; 7] = [
        CsfMethod::NganSpat,
        CsfMethod::LiSW,
        CsfMethod::NadenauSpat,
        CsfMethod::NadenauSW,
        CsfMethod::LarsonSW,
        CsfMethod::WatsonSW,
        CsfMethod::HillSW,
    ];

    pub fn kind(self) -> CsfKind {
        match self {
            CsfMethod::NganSpat | CsfMethod::NadenauSpat => CsfKind::SpatialFilter,
            _ => CsfKind::SubbandWeights,
        }
    }

    /// Whether the method has distinct responses for the chroma channels.
    pub fn is_color_aware(self) -> bool {
        matches!(
            self,
            CsfMethod::NadenauSpat | CsfMethod::NadenauSW | CsfMethod::WatsonSW
        )
    }

    /// Channel whose response the method uses for `channel`.
    pub fn effective_channel(self, channel: Channel) -> Channel {
        if self.is_color_aware() {
            channel
        } else {
            Channel::Y
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CsfMethod::NganSpat => "NganSpat",
            CsfMethod::LiSW => "LiSW",
            CsfMethod::NadenauSpat => "NadenauSpat",
            CsfMethod::NadenauSW => "NadenauSW",
            CsfMethod::LarsonSW => "LarsonSW",
            CsfMethod::WatsonSW => "WatsonSW",
            CsfMethod::HillSW => "HillSW",
        }
    }
}

impl fmt::Display for CsfMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CsfMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CsfMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::CsfConfig(format!(
                    "unknown csf method `{s}` (expected one of NganSpat, LiSW, NadenauSpat, NadenauSW, LarsonSW, WatsonSW, HillSW)"
                ))
            })
    }
}

pub fn ngan_csf(f: f64) -> f64 {
    (0.31 + 0.69 * f) * (-0.29 * f).exp()
}

/// Closed-form inverse Fourier transform of [`ngan_csf`], in degrees.
pub fn ngan_spat(theta: f64) -> f64 {
    let t2 = theta * theta;
    let den = 0.0841 + 39.4784 * t2;
    2.0 * (0.0656 - 23.6910 * t2) / (den * den)
}

pub fn nadenau_csf(f: f64, params: NadenauParams) -> f64 {
    (1.0 + 255.0 * (-params.b * f.powf(params.c)).exp()) / 256.0
}

/// Larson's modified Mannos-Sakrison CSF at radial frequency `f_r` and
/// orientation `phi` (radians).
///
/// The high-frequency branch decays: the exponent is negative, which is also
/// what makes the two branches meet (≈0.981) at `f_r = 4`.
pub fn larson_csf(f_r: f64, phi: f64) -> f64 {
    if f_r < 4.0 {
        0.981
    } else {
        let f_phi = f_r / (0.15 * (4.0 * phi).cos() + 0.85);
        (0.0499 + 0.5928 * f_phi) * (-(0.228 * f_phi).powf(1.1)).exp()
    }
}

/// Angle subtended by one pixel, in degrees.
pub fn pixel_angle_deg(dh_ratio: f64) -> f64 {
    (180.0 / PI) / (dh_ratio * 1080.0)
}

/// Nominal spatial frequency of a detail subband. The A band has no nominal
/// frequency and is rejected.
pub fn nominal_frequency(level: usize, subband: Subband, dh_ratio: f64) -> f64 {
    let p = match subband {
        Subband::H | Subband::V => 1.0,
        Subband::D => -1.0,
        Subband::A => panic!("the approximation band has no nominal frequency"),
    };
    1080.0 * PI * dh_ratio / (2f64.powi(level as i32) * 180.0 * (0.15 * p + 0.85))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadenauParams {
    pub b: f64,
    pub c: f64,
}

/// Symmetric 1-D filter applied separably along rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFilter {
    pub taps: Vec<f64>,
    pub sample_step_deg: f64,
}

impl SpatialFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn half_width(&self) -> usize {
        self.taps.len() / 2
    }

    /// Separable 2-D convolution with half-sample symmetric extension.
    pub fn apply(&self, plane: &Array2<f64>) -> Array2<f64> {
        let rows = convolve_axis(plane, &self.taps, Axis(1));
        convolve_axis(&rows, &self.taps, Axis(0))
    }
}

/// Index into `0..n` after mirror extension (`x[-1] = x[0]`), periodic with
/// period `2n` so filters longer than the signal stay well defined.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn convolve_axis(plane: &Array2<f64>, taps: &[f64], axis: Axis) -> Array2<f64> {
    let half = (taps.len() / 2) as isize;
    let mut out = Array2::zeros(plane.raw_dim());
    for (src, mut dst) in plane.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        let n = src.len();
        let line: Vec<f64> = src.iter().copied().collect();
        let mut padded = Vec::with_capacity(n + 2 * half as usize);
        for i in -half..(n as isize + half) {
            padded.push(line[mirror(i, n)]);
        }
        for (j, d) in dst.iter_mut().enumerate() {
            let window = &padded[j..j + taps.len()];
            *d = window.iter().zip(taps).map(|(x, t)| x * t).sum();
        }
    }
    out
}

/// Smallest half-width `h` such that every coefficient at offset `>= h` is
/// below the tail fraction of the peak. `one_sided[n]` is the response at
/// offset `n >= 0`.
fn truncation_half_width(one_sided: &[f64]) -> usize {
    let peak = one_sided.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = one_sided.len() - 1;
    while h > 0 && one_sided[h - 1].abs() < TAIL_FRACTION * peak {
        h -= 1;
    }
    h
}

fn symmetric_taps(one_sided: &[f64], half: usize) -> Vec<f64> {
    (0..=2 * half)
        .map(|i| one_sided[(i as isize - half as isize).unsigned_abs()])
        .collect()
}

/// Sampled Ngan spatial filter.
///
/// The closed-form response oscillates slowly around zero past its first
/// lobe, so the support is a fixed visual angle of about 0.18 degrees on each
/// side rather than a magnitude test. At three picture heights that is 21
/// taps, and the outermost tap is about 4.2% of the peak.
pub fn ngan_spatial_filter(dh_ratio: f64) -> SpatialFilter {
    let step = pixel_angle_deg(dh_ratio);
    let half = ((10.0 * dh_ratio / 3.0).round() as usize).max(1);
    let one_sided: Vec<f64> = (0..=half)
        .map(|n| step * ngan_spat(n as f64 * step))
        .collect();
    SpatialFilter {
        taps: symmetric_taps(&one_sided, half),
        sample_step_deg: step,
    }
}

/// Spatial filter whose frequency response approximates the Nadenau CSF,
/// obtained by inverse FFT of the response sampled from DC to Nyquist and
/// truncated by the tail rule. Taps are rescaled to unit sum so flat regions
/// pass unchanged.
pub fn nadenau_spatial_filter(params: NadenauParams, dh_ratio: f64) -> SpatialFilter {
    let step = pixel_angle_deg(dh_ratio);
    let nyquist = 0.5 / step;
    let m = INVERSE_DFT_POINTS;
    let n = 2 * (m - 1);
    let mut spectrum: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let bin = if k < m { k } else { n - k };
            let f = nyquist * bin as f64 / (m - 1) as f64;
            Complex::new(nadenau_csf(f, params), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    let one_sided: Vec<f64> = spectrum[..m].iter().map(|c| c.re / n as f64).collect();

    let half = truncation_half_width(&one_sided);
    let mut taps = symmetric_taps(&one_sided, half);
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    SpatialFilter {
        taps,
        sample_step_deg: step,
    }
}

/// Per-level weights for the A, H, V and D subbands. Index 0 is level 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandWeights {
    levels: Vec<[f64; 4]>,
}

impl SubbandWeights {
    pub fn new(levels: Vec<[f64; 4]>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::CsfConfig("subband weight table has no levels".into()));
        }
        for (i, row) in levels.iter().enumerate() {
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::CsfConfig(format!(
                    "level {} has a negative or non-finite weight",
                    i + 1
                )));
            }
        }
        Ok(SubbandWeights { levels })
    }

    /// Every weight equal to one.
    pub fn identity(levels: usize) -> Self {
        SubbandWeights {
            levels: vec![[1.0; 4]; levels],
        }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Weight for `subband` at `level` (1-based).
    pub fn get(&self, level: usize, subband: Subband) -> f64 {
        self.levels[level - 1][subband.index()]
    }

    fn from_closed_form(levels: usize, dh_ratio: f64, csf: impl Fn(f64) -> f64) -> Self {
        let rows = (1..=levels)
            .map(|l| {
                let hv = csf(nominal_frequency(l, Subband::H, dh_ratio));
                let d = csf(nominal_frequency(l, Subband::D, dh_ratio));
                [1.0, hv, hv, d]
            })
            .collect();
        SubbandWeights { levels: rows }
    }
}

pub fn li_subband_weights(levels: usize, dh_ratio: f64) -> SubbandWeights {
    SubbandWeights::from_closed_form(levels, dh_ratio, ngan_csf)
}

pub fn nadenau_subband_weights(params: NadenauParams, levels: usize, dh_ratio: f64) -> SubbandWeights {
    SubbandWeights::from_closed_form(levels, dh_ratio, |f| nadenau_csf(f, params))
}

pub fn larson_subband_weights(levels: usize, dh_ratio: f64) -> SubbandWeights {
    SubbandWeights::from_closed_form(levels, dh_ratio, |f| larson_csf(f, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableRow {
    method: CsfMethod,
    channel: Channel,
    level: usize,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "H")]
    h: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "D")]
    d: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    #[serde(default)]
    nadenau: BTreeMap<Channel, NadenauParams>,
    #[serde(default, rename = "table")]
    tables: Vec<TableRow>,
}

/// Numeric parameters for the parametric and table-driven methods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsfConfig {
    nadenau: BTreeMap<Channel, NadenauParams>,
    tables: BTreeMap<(CsfMethod, Channel), BTreeMap<usize, [f64; 4]>>,
}

impl CsfConfig {
    /// The configuration compiled into the library.
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_CONFIG).expect("bundled csf config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::CsfConfig(e.to_string()))?;
        let mut tables: BTreeMap<_, BTreeMap<usize, [f64; 4]>> = BTreeMap::new();
        for row in raw.tables {
            if !matches!(row.method, CsfMethod::WatsonSW | CsfMethod::HillSW) {
                return Err(Error::CsfConfig(format!(
                    "{} is not a table-driven method",
                    row.method
                )));
            }
            if row.level == 0 {
                return Err(Error::CsfConfig("table levels start at 1".into()));
            }
            let w = [row.a, row.h, row.v, row.d];
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::CsfConfig(format!(
                    "{} {} level {} has a negative or non-finite weight",
                    row.method, row.channel, row.level
                )));
            }
            let slot = tables.entry((row.method, row.channel)).or_default();
            if slot.insert(row.level, w).is_some() {
                return Err(Error::CsfConfig(format!(
                    "{} {} level {} is listed twice",
                    row.method, row.channel, row.level
                )));
            }
        }
        for (ch, p) in &raw.nadenau {
            if !(p.b > 0.0 && p.c > 0.0 && p.b.is_finite() && p.c.is_finite()) {
                return Err(Error::CsfConfig(format!(
                    "nadenau parameters for {ch} must be positive"
                )));
            }
        }
        Ok(CsfConfig {
            nadenau: raw.nadenau,
            tables,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn nadenau(&self, channel: Channel) -> Result<NadenauParams> {
        self.nadenau
            .get(&channel)
            .copied()
            .ok_or_else(|| Error::CsfConfig(format!("no nadenau (b, c) parameters for channel {channel}")))
    }

    /// Table weights for levels `1..=levels`, verbatim.
    pub fn table_weights(&self, method: CsfMethod, channel: Channel, levels: usize) -> Result<SubbandWeights> {
        let table = self.tables.get(&(method, channel));
        let rows = (1..=levels)
            .map(|l| {
                table.and_then(|t| t.get(&l)).copied().ok_or_else(|| {
                    Error::CsfConfig(format!("{method} has no {channel} weights for level {l}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SubbandWeights::new(rows)
    }
}

/// A CSF instantiated for one channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelCsf {
    Spatial(SpatialFilter),
    Weights(SubbandWeights),
}

/// Builds the filter or weight table of `method` for `channel`.
pub fn build_channel_csf(
    method: CsfMethod,
    channel: Channel,
    levels: usize,
    dh_ratio: f64,
    config: &CsfConfig,
) -> Result<ChannelCsf> {
    if !(dh_ratio > 0.0 && dh_ratio.is_finite()) {
        return Err(Error::CsfConfig(format!("dh_ratio must be positive, got {dh_ratio}")));
    }
    let ch = method.effective_channel(channel);
    Ok(match method {
        CsfMethod::NganSpat => ChannelCsf::Spatial(ngan_spatial_filter(dh_ratio)),
        CsfMethod::NadenauSpat => ChannelCsf::Spatial(nadenau_spatial_filter(config.nadenau(ch)?, dh_ratio)),
        CsfMethod::LiSW => ChannelCsf::Weights(li_subband_weights(levels, dh_ratio)),
        CsfMethod::NadenauSW => {
            ChannelCsf::Weights(nadenau_subband_weights(config.nadenau(ch)?, levels, dh_ratio))
        }
        CsfMethod::LarsonSW => ChannelCsf::Weights(larson_subband_weights(levels, dh_ratio)),
        CsfMethod::WatsonSW | CsfMethod::HillSW => {
            ChannelCsf::Weights(config.table_weights(method, ch, levels)?)
        }
    })
}
