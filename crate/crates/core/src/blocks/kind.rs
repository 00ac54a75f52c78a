use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BlockError, Result};

/// Temporal block families. `StarI`..`StarIV` are experimental.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    BaselineTcn,
    Linear,
    FusedMb,
    InvertedResidual,
    Cib,
    Uib,
    StarV,
    StarI,
    StarII,
    StarIII,
    StarIV,
}

impl BlockKind {
    pub const ALL: [BlockKind; 11] = [
        BlockKind::BaselineTcn,
        BlockKind::Linear,
        BlockKind::FusedMb,
        BlockKind::InvertedResidual,
        BlockKind::Cib,
        BlockKind::Uib,
        BlockKind::StarV,
        BlockKind::StarI,
        BlockKind::StarII,
        BlockKind::StarIII,
        BlockKind::StarIV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::BaselineTcn => "baseline",
            BlockKind::Linear => "linear",
            BlockKind::FusedMb => "fusedmb",
            BlockKind::InvertedResidual => "inverted_residual",
            BlockKind::Cib => "cib",
            BlockKind::Uib => "uib",
            BlockKind::StarV => "starv",
            BlockKind::StarI => "stari",
            BlockKind::StarII => "starii",
            BlockKind::StarIII => "stariii",
            BlockKind::StarIV => "stariv",
        }
    }

    pub fn is_experimental(self) -> bool {
        matches!(
            self,
            BlockKind::StarI | BlockKind::StarII | BlockKind::StarIII | BlockKind::StarIV
        )
    }

    pub fn is_star(self) -> bool {
        self == BlockKind::StarV || self.is_experimental()
    }

    pub fn default_expansion(self) -> Expansion {
        match self {
            BlockKind::BaselineTcn | BlockKind::Linear => Expansion::ONE,
            BlockKind::FusedMb => Expansion::new(7, 2),
            BlockKind::InvertedResidual | BlockKind::Cib => Expansion::new(2, 1),
            _ => Expansion::new(4, 1),
        }
    }

    /// Depth-wise kernel used when the configuration leaves it unset.
    pub fn default_dw_kernel(self, tcn_kernel: usize) -> usize {
        if self.is_star() {
            7
        } else {
            tcn_kernel
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = BlockError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        let kind = match norm.as_str() {
            "baseline" | "baselinetcn" | "tcn" => BlockKind::BaselineTcn,
            "linear" => BlockKind::Linear,
            "fusedmb" => BlockKind::FusedMb,
            "invertedresidual" | "ir" => BlockKind::InvertedResidual,
            "cib" => BlockKind::Cib,
            "uib" => BlockKind::Uib,
            "starv" | "star" | "star5" => BlockKind::StarV,
            "stari" | "star1" => BlockKind::StarI,
            "starii" | "star2" => BlockKind::StarII,
            "stariii" | "star3" => BlockKind::StarIII,
            "stariv" | "star4" => BlockKind::StarIV,
            _ => return Err(BlockError::UnknownKind(s.to_string())),
        };
        Ok(kind)
    }
}

impl Serialize for BlockKind {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for BlockKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Positive rational channel multiplier, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Expansion {
    num: u32,
    den: u32,
}

const fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Expansion {
    pub const ONE: Expansion = Expansion { num: 1, den: 1 };

    /// Panics on a zero numerator or denominator.
    pub const fn new(num: u32, den: u32) -> Self {
        assert!(num > 0 && den > 0, "expansion must be positive");
        let g = gcd(num, den);
        Expansion {
            num: num / g,
            den: den / g,
        }
    }

    pub fn try_new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(BlockError::InvalidExpansion(format!("{num}/{den}")));
        }
        Ok(Self::new(num, den))
    }

    /// Recovers a ratio with denominator at most 64 from a decimal value.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0 && v < 1e6) {
            return Err(BlockError::InvalidExpansion(format!("{v}")));
        }
        for den in 1..=64u32 {
            let num = num_traits::Float::round(v * den as f64);
            if num >= 1.0 && num_traits::Float::abs(num / den as f64 - v) < 1e-9 {
                return Ok(Self::new(num as u32, den));
            }
        }
        Err(BlockError::InvalidExpansion(format!("{v}")))
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self · channels`, which must be a whole number.
    pub fn apply(self, channels: usize) -> Result<usize> {
        let scaled = channels * self.num as usize;
        if !scaled.is_multiple_of(self.den as usize) {
            return Err(BlockError::FractionalWidth {
                expansion: self,
                channels,
            });
        }
        Ok(scaled / self.den as usize)
    }
}

impl fmt::Display for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Expansion {
    type Err = BlockError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || BlockError::InvalidExpansion(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => {
                let n = n.trim().parse().map_err(|_| bad())?;
                let d = d.trim().parse().map_err(|_| bad())?;
                Self::try_new(n, d)
            }
            None => Self::from_f64(s.trim().parse().map_err(|_| bad())?),
        }
    }
}

impl Serialize for Expansion {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        if self.den == 1 {
            s.serialize_u32(self.num)
        } else {
            s.serialize_f64(self.as_f64())
        }
    }
}

impl<'de> Deserialize<'de> for Expansion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Expansion;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or a ratio such as \"7/2\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<Expansion, E> {
                u32::try_from(v)
                    .map_err(E::custom)
                    .and_then(|v| Expansion::try_new(v, 1).map_err(E::custom))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<Expansion, E> {
                let v = u64::try_from(v).map_err(|_| E::custom("expansion must be positive"))?;
                self.visit_u64(v)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<Expansion, E> {
                Expansion::from_f64(v).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<Expansion, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A block kind together with its resolved width multiplier and depth-wise
/// kernel size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub expansion: Expansion,
    pub dw_kernel: usize,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, tcn_kernel: usize) -> Self {
        BlockSpec {
            kind,
            expansion: kind.default_expansion(),
            dw_kernel: kind.default_dw_kernel(tcn_kernel),
        }
    }

    pub fn with_expansion(mut self, e: Expansion) -> Self {
        self.expansion = e;
        self
    }

    pub fn with_dw_kernel(mut self, k: usize) -> Self {
        self.dw_kernel = k;
        self
    }

    /// Internal width for `channels` input channels. The baseline and linear
    /// blocks have no expansion and always return `channels`.
    pub fn expanded(&self, channels: usize) -> Result<usize> {
        match self.kind {
            BlockKind::BaselineTcn | BlockKind::Linear => Ok(channels),
            _ => self.expansion.apply(channels),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.dw_kernel == 0 || self.dw_kernel.is_multiple_of(2) {
            return Err(BlockError::EvenKernel(self.dw_kernel));
        }
        self.expanded(channels).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in BlockKind::ALL {
            assert_eq!(k.name().parse::<BlockKind>().unwrap(), k);
        }
        assert_eq!(
            "Inverted-Residual".parse::<BlockKind>().unwrap(),
            BlockKind::InvertedResidual
        );
        assert!(matches!("mamba".parse::<BlockKind>(), Err(BlockError::UnknownKind(_))));
    }

    #[test]
    fn expansion_parsing() {
        assert_eq!("3.5".parse::<Expansion>().unwrap(), Expansion::new(7, 2));
        assert_eq!("14/4".parse::<Expansion>().unwrap(), Expansion::new(7, 2));
        assert_eq!(Expansion::from_f64(4.0).unwrap().to_string(), "4");
        assert!("0".parse::<Expansion>().is_err());
        assert!("-2".parse::<Expansion>().is_err());
    }

    #[test]
    fn fractional_width_rejected() {
        let e = Expansion::new(7, 2);
        assert_eq!(e.apply(512).unwrap(), 1792);
        assert!(matches!(e.apply(5), Err(BlockError::FractionalWidth { .. })));
    }
}
