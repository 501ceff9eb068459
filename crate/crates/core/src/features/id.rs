//! Canonical feature identifiers of the form `{Y|Cb|Cr}-KIND@level`,
//! e.g. `Y-MS-ESSIM@2` or `Cb-SRRED-HV@3`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKind {
    Ssim,
    Essim,
    MsSsim,
    MsEssim,
    VifA,
    VifHv,
    SrredA,
    SrredHv,
    TrredA,
    TrredHv,
    StrredA,
    StrredHv,
    DlmS,
    DeltaTlSai,
    DeltaTlBlur,
    MadRef,
    MadDis,
    Mad,
    Blur,
    Edge,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 20] = [
        FeatureKind::Ssim,
        FeatureKind::Essim,
        FeatureKind::MsSsim,
        FeatureKind::MsEssim,
        FeatureKind::VifA,
        FeatureKind::VifHv,
        FeatureKind::SrredA,
        FeatureKind::SrredHv,
        FeatureKind::TrredA,
        FeatureKind::TrredHv,
        FeatureKind::StrredA,
        FeatureKind::StrredHv,
        FeatureKind::DlmS,
        FeatureKind::DeltaTlSai,
        FeatureKind::DeltaTlBlur,
        FeatureKind::MadRef,
        FeatureKind::MadDis,
        FeatureKind::Mad,
        FeatureKind::Blur,
        FeatureKind::Edge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Ssim => "SSIM",
            FeatureKind::Essim => "ESSIM",
            FeatureKind::MsSsim => "MS-SSIM",
            FeatureKind::MsEssim => "MS-ESSIM",
            FeatureKind::VifA => "VIF-A",
            FeatureKind::VifHv => "VIF-HV",
            FeatureKind::SrredA => "SRRED-A",
            FeatureKind::SrredHv => "SRRED-HV",
            FeatureKind::TrredA => "TRRED-A",
            FeatureKind::TrredHv => "TRRED-HV",
            FeatureKind::StrredA => "STRRED-A",
            FeatureKind::StrredHv => "STRRED-HV",
            FeatureKind::DlmS => "DLM-S",
            FeatureKind::DeltaTlSai => "dTL-SAI",
            FeatureKind::DeltaTlBlur => "dTL-Blur",
            FeatureKind::MadRef => "MAD-Ref",
            FeatureKind::MadDis => "MAD-Dis",
            FeatureKind::Mad => "MAD",
            FeatureKind::Blur => "Blur",
            FeatureKind::Edge => "Edge",
        }
    }

    /// Needs the previous frame; undefined on the first frame.
    pub fn is_lagged(self) -> bool {
        matches!(
            self,
            FeatureKind::TrredA
                | FeatureKind::TrredHv
                | FeatureKind::StrredA
                | FeatureKind::StrredHv
                | FeatureKind::MadRef
                | FeatureKind::MadDis
        )
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::FeatureId(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId {
    pub channel: Channel,
    pub kind: FeatureKind,
    pub level: usize,
}

impl FeatureId {
    pub fn new(channel: Channel, kind: FeatureKind, level: usize) -> Self {
        FeatureId { channel, kind, level }
    }

    pub fn is_lagged(&self) -> bool {
        self.kind.is_lagged()
    }

    /// Parses `KIND@level` or `{ch}-KIND@level`; a missing channel prefix
    /// means `default_channel`.
    pub fn parse_with_default(s: &str, default_channel: Channel) -> Result<Self> {
        let bad = || Error::FeatureId(s.to_string());
        let (head, level) = s.rsplit_once('@').ok_or_else(bad)?;
        let level: usize = level.parse().map_err(|_| bad())?;
        if level == 0 {
            return Err(bad());
        }
        for ch in Channel::ALL {
            if let Some(rest) = head.strip_prefix(ch.as_str()).and_then(|r| r.strip_prefix('-')) {
                if let Ok(kind) = rest.parse() {
                    return Ok(FeatureId::new(ch, kind, level));
                }
            }
        }
        let kind = head.parse().map_err(|_| bad())?;
        Ok(FeatureId::new(default_channel, kind, level))
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}@{}", self.channel, self.kind, self.level)
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    /// Requires the channel prefix.
    fn from_str(s: &str) -> Result<Self> {
        let id = FeatureId::parse_with_default(s, Channel::Y)?;
        if !s.starts_with(id.channel.as_str()) || !s[id.channel.as_str().len()..].starts_with('-') {
            return Err(Error::FeatureId(s.to_string()));
        }
        Ok(id)
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every feature kind at every level `1..=levels` for each channel.
pub fn all_feature_ids(channels: &[Channel], levels: usize) -> Vec<FeatureId> {
    let mut out = Vec::new();
    for &ch in channels {
        for kind in FeatureKind::ALL {
            for l in 1..=levels {
                out.push(FeatureId::new(ch, kind, l));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}
