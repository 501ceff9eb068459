//! The four published model configurations.

use std::fmt;
use std::str::FromStr;

use funque_core::csf::{CsfMethod, DEFAULT_DH_RATIO};
use funque_core::io::Channel;
use funque_core::transform::TransformConfig;
use funque_core::FeatureId;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    YFunquePlus,
    ThreeCFunquePlus,
    FsYFunquePlus,
    FsThreeCFunquePlus,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::YFunquePlus,
        Preset::ThreeCFunquePlus,
        Preset::FsYFunquePlus,
        Preset::FsThreeCFunquePlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::YFunquePlus => "Y-FUNQUE+",
            Preset::ThreeCFunquePlus => "3C-FUNQUE+",
            Preset::FsYFunquePlus => "FS-Y-FUNQUE+",
            Preset::FsThreeCFunquePlus => "FS-3C-FUNQUE+",
        }
    }

    /// Feature list as published; unprefixed names are luma.
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            Preset::YFunquePlus => &["MS-ESSIM@2", "MAD-Ref@2", "DLM-S@2"],
            Preset::ThreeCFunquePlus => &[
                "Y-MS-ESSIM@2",
                "Y-MAD-Dis@2",
                "Y-DLM-S@2",
                "Y-SRRED-HV@2",
                "Y-TRRED-HV@2",
                "Cb-Edge@2",
                "Cr-MAD@2",
            ],
            Preset::FsYFunquePlus => &["MS-ESSIM@2", "dTL-SAI@2", "MAD-Dis@2", "DLM-S@2", "STRRED-HV@2"],
            Preset::FsThreeCFunquePlus => &[
                "Y-MS-ESSIM@3",
                "Y-dTL-SAI@3",
                "Y-DLM-S@3",
                "Cb-MAD-Dis@3",
                "Cb-SRRED-HV@3",
                "Cb-TRRED-HV@3",
                "Cb-Edge@3",
                "Cr-MAD@3",
                "Cr-Blur@3",
            ],
        }
    }

    pub fn features(self) -> Vec<FeatureId> {
        self.feature_names()
            .iter()
            .map(|s| FeatureId::parse_with_default(s, Channel::Y).expect("preset ids are well formed"))
            .collect()
    }

    pub fn csf(self) -> CsfMethod {
        match self {
            Preset::YFunquePlus => CsfMethod::NadenauSW,
            Preset::ThreeCFunquePlus => CsfMethod::LiSW,
            Preset::FsYFunquePlus => CsfMethod::NadenauSpat,
            Preset::FsThreeCFunquePlus => CsfMethod::WatsonSW,
        }
    }

    pub fn uses_sast(self) -> bool {
        matches!(self, Preset::YFunquePlus | Preset::ThreeCFunquePlus)
    }

    pub fn levels(self) -> usize {
        match self {
            Preset::FsThreeCFunquePlus => 3,
            _ => 2,
        }
    }

    pub fn transform(self) -> TransformConfig {
        TransformConfig {
            levels: self.levels(),
            csf: Some(self.csf()),
            use_sast: self.uses_sast(),
            dh_ratio: DEFAULT_DH_RATIO,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown preset `{s}` (expected Y-FUNQUE+, 3C-FUNQUE+, FS-Y-FUNQUE+ or FS-3C-FUNQUE+)"
                ))
            })
    }
}
