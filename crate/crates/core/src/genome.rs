//! Chromosome labels and GRCh37 reference lengths.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const LABELS: [&str; 24] = [
    "1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", "15", "16", "17",
    "18", "19", "20", "21", "22", "X", "Y",
];

const GRCH37_LENGTHS: [u64; 24] = [
    249_250_621,
    243_199_373,
    198_022_430,
    191_154_276,
    180_915_260,
    171_115_067,
    159_138_663,
    146_364_022,
    141_213_431,
    135_534_747,
    135_006_516,
    133_851_895,
    115_169_878,
    107_349_540,
    102_531_392,
    90_354_753,
    81_195_210,
    78_077_248,
    59_128_983,
    63_025_520,
    48_129_895,
    51_304_566,
    155_270_560,
    59_373_566,
];

/// Reference build every coordinate in this crate is relative to.
pub const BUILD: &str = "GRCh37";

/// A human chromosome, ordered 1..22, then X, then Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chromosome(u8);

impl Chromosome {
    /// Accepts `6`, `chr6`, `X`, `chrx`. Leading zeros are rejected.
    pub fn parse(label: &str) -> Option<Self> {
        let label = label.trim();
        let bare = label
            .strip_prefix("chr")
            .or_else(|| label.strip_prefix("CHR"))
            .or_else(|| label.strip_prefix("Chr"))
            .unwrap_or(label);
        let upper = bare.to_ascii_uppercase();
        LABELS
            .iter()
            .position(|l| *l == upper)
            .map(|i| Chromosome(i as u8))
    }

    pub fn label(self) -> &'static str {
        LABELS[self.0 as usize]
    }

    pub fn grch37_length(self) -> u64 {
        GRCH37_LENGTHS[self.0 as usize]
    }

    pub fn all() -> impl Iterator<Item = Chromosome> {
        (0..24u8).map(Chromosome)
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Chromosome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Chromosome::parse(s).ok_or_else(|| format!("invalid chromosome label `{s}`"))
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Chromosome::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid chromosome `{s}`")))
    }
}
