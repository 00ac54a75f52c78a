use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::blocks::{BlockError, BlockKind, BlockSpec, Expansion, ExtractorSpec, StemSpec, TemporalBlock};

/// Dilation doubles per stage; beyond this many stages `2^stage` stops being
/// a meaningful temporal offset.
pub const MAX_STAGES: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("stages must be ≥ 1")]
    NoStages,
    #[error("stages must be ≤ {MAX_STAGES}, got {0}")]
    TooManyStages(usize),
    #[error("{0} must be ≥ 1")]
    NonPositive(&'static str),
    #[error("num_classes must be ≥ 2, got {0}")]
    TooFewClasses(usize),
    #[error("channel list has {got} entries for {stages} stages")]
    ChannelList { stages: usize, got: usize },
    #[error("dropout must lie in [0, 1), got {0}")]
    Dropout(f64),
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// TCN width: one value for every stage, or one per stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Channels {
    Uniform(usize),
    PerStage(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcnConfig {
    #[serde(alias = "block")]
    pub block_kind: BlockKind,
    pub stages: usize,
    pub channels: Channels,
    pub kernel: usize,
    pub dropout: f64,
    /// Overrides the block kind's default width multiplier.
    pub expansion: Option<Expansion>,
    /// Overrides the block kind's default depth-wise kernel.
    pub dw_kernel: Option<usize>,
    /// Required for the Star I–IV kinds.
    pub experimental: bool,
}

impl Default for TcnConfig {
    fn default() -> Self {
        TcnConfig {
            block_kind: BlockKind::BaselineTcn,
            stages: 4,
            channels: Channels::Uniform(512),
            kernel: 3,
            dropout: 0.2,
            expansion: None,
            dw_kernel: None,
            experimental: false,
        }
    }
}

impl TcnConfig {
    pub fn block_spec(&self) -> BlockSpec {
        let mut spec = BlockSpec::new(self.block_kind, self.kernel);
        if let Some(e) = self.expansion {
            spec = spec.with_expansion(e);
        }
        if let Some(k) = self.dw_kernel {
            spec = spec.with_dw_kernel(k);
        }
        spec
    }

    pub fn stage_widths(&self) -> Vec<usize> {
        match &self.channels {
            Channels::Uniform(c) => vec![*c; self.stages],
            Channels::PerStage(v) => v.clone(),
        }
    }

    /// `[1, 2, 4, ..., 2^(stages-1)]`.
    pub fn dilations(&self) -> Vec<usize> {
        (0..self.stages).map(|i| 1usize << i).collect()
    }

    pub fn input_channels(&self) -> usize {
        self.stage_widths().first().copied().unwrap_or(0)
    }

    pub fn output_channels(&self) -> usize {
        self.stage_widths().last().copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub num_classes: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { num_classes: 500 }
    }
}

/// Declarative model description. Without an extractor (`extractor = "none"`)
/// the model is TCN-only: it consumes `[N, C, T]` features directly and the
/// stem section is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub stem: StemSpec,
    #[serde(serialize_with = "ser_extractor", deserialize_with = "de_extractor")]
    pub extractor: Option<ExtractorSpec>,
    pub tcn: TcnConfig,
    pub classifier: ClassifierConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            stem: StemSpec::default(),
            extractor: Some(ExtractorSpec::default()),
            tcn: TcnConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

fn ser_extractor<S: Serializer>(v: &Option<ExtractorSpec>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(spec) => spec.serialize(s),
        None => s.serialize_str("none"),
    }
}

fn de_extractor<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ExtractorSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Field {
        Name(String),
        Spec(ExtractorSpec),
    }
    match Field::deserialize(d)? {
        Field::Spec(s) => Ok(Some(s)),
        Field::Name(n) if n.eq_ignore_ascii_case("none") => Ok(None),
        Field::Name(n) if n.eq_ignore_ascii_case("reference") => Ok(Some(ExtractorSpec::default())),
        Field::Name(n) => Err(serde::de::Error::custom(format!(
            "unknown extractor `{n}` (expected \"none\", \"reference\" or a table)"
        ))),
    }
}

impl ModelConfig {
    /// TCN-only model with default kernel, dropout and classifier.
    pub fn tcn_only(kind: BlockKind, stages: usize, channels: usize) -> Self {
        ModelConfig {
            extractor: None,
            tcn: TcnConfig {
                block_kind: kind,
                stages,
                channels: Channels::Uniform(channels),
                experimental: kind.is_experimental(),
                ..TcnConfig::default()
            },
            ..ModelConfig::default()
        }
    }

    pub fn is_tcn_only(&self) -> bool {
        self.extractor.is_none()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tcn;
        if t.stages == 0 {
            return Err(ConfigError::NoStages);
        }
        if t.stages > MAX_STAGES {
            return Err(ConfigError::TooManyStages(t.stages));
        }
        if t.kernel == 0 {
            return Err(ConfigError::NonPositive("tcn.kernel"));
        }
        let widths = t.stage_widths();
        if widths.len() != t.stages {
            return Err(ConfigError::ChannelList {
                stages: t.stages,
                got: widths.len(),
            });
        }
        if widths.contains(&0) {
            return Err(ConfigError::NonPositive("tcn.channels"));
        }
        if !(t.dropout.is_finite() && (0.0..1.0).contains(&t.dropout)) {
            return Err(ConfigError::Dropout(t.dropout));
        }
        if t.block_kind.is_experimental() && !t.experimental {
            return Err(BlockError::Experimental(t.block_kind.name()).into());
        }
        let spec = t.block_spec();
        for &c in &widths {
            spec.validate(c)?;
        }
        if self.classifier.num_classes < 2 {
            return Err(ConfigError::TooFewClasses(self.classifier.num_classes));
        }
        if let Some(e) = &self.extractor {
            self.stem.validate()?;
            e.validate()?;
        }
        Ok(())
    }

    /// Projection from extractor features to the first TCN stage, if needed.
    pub fn needs_projection(&self) -> bool {
        self.extractor
            .as_ref()
            .is_some_and(|e| e.out_dim != self.tcn.input_channels())
    }

    /// Parameter count from closed-form layer formulas, split as
    /// `(stem, extractor, projection, tcn, classifier)`.
    pub fn closed_form_params(&self) -> Result<[u64; 5], ConfigError> {
        self.validate()?;
        let mut parts = [0u64; 5];
        if let Some(e) = &self.extractor {
            let s = &self.stem;
            parts[0] =
                (s.out_channels * s.in_channels * s.kernel.iter().product::<usize>() + 2 * s.out_channels) as u64;
            parts[1] = e.closed_form_params(s.out_channels);
            if self.needs_projection() {
                let c = self.tcn.input_channels() as u64;
                parts[2] = e.out_dim as u64 * c + c;
            }
        }
        let spec = self.tcn.block_spec();
        let widths = self.tcn.stage_widths();
        for (i, &c) in widths.iter().enumerate() {
            if i > 0 && widths[i - 1] != c {
                parts[3] += (widths[i - 1] * c + c) as u64;
            }
            parts[3] += TemporalBlock::closed_form_params(&spec, c, self.tcn.kernel)?;
        }
        let k = self.classifier.num_classes as u64;
        parts[4] = self.tcn.output_channels() as u64 * k + k;
        Ok(parts)
    }

    /// Every field as `path = value`, one per line, in a fixed order.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.extractor {
            Some(e) => {
                let s = &self.stem;
                line("stem.in_channels", s.in_channels.to_string());
                line("stem.out_channels", s.out_channels.to_string());
                line("stem.kernel", format!("{:?}", s.kernel));
                line("stem.stride", format!("{:?}", s.stride));
                line("stem.padding", format!("{:?}", s.padding));
                line("extractor.widths", format!("{:?}", e.widths));
                line("extractor.blocks_per_stage", e.blocks_per_stage.to_string());
                line("extractor.expansion", e.expansion.to_string());
                line("extractor.out_dim", e.out_dim.to_string());
            }
            None => line("extractor", "\"none\"".into()),
        }
        let t = &self.tcn;
        line("tcn.block_kind", format!("\"{}\"", t.block_kind));
        line("tcn.stages", t.stages.to_string());
        line(
            "tcn.channels",
            match &t.channels {
                Channels::Uniform(c) => c.to_string(),
                Channels::PerStage(v) => format!("{v:?}"),
            },
        );
        line("tcn.kernel", t.kernel.to_string());
        line("tcn.dropout", format!("{}", t.dropout));
        line("tcn.expansion", t.expansion.map_or("default".into(), |e| e.to_string()));
        line("tcn.dw_kernel", t.dw_kernel.map_or("default".into(), |k| k.to_string()));
        line("tcn.experimental", t.experimental.to_string());
        line("classifier.num_classes", self.classifier.num_classes.to_string());
        out
    }

    /// 64-bit FNV-1a of [`canonical`](Self::canonical).
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
