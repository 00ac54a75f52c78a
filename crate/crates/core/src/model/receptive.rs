use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::blocks::TemporalBlock;

/// Receptive field in frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptiveField {
    /// Past frames (inclusive of the current one) that reach one TCN output.
    pub tcn: usize,
    /// Extra temporal span of the stem (`kernel_t - 1`), 0 when TCN-only.
    pub stem: usize,
    pub total: usize,
}

/// `1 + Σ_blocks Σ_convs (k - 1) · d`, plus the stem's temporal span.
pub fn receptive_field(config: &ModelConfig) -> ReceptiveField {
    let spec = config.tcn.block_spec();
    let tcn = 1 + config
        .tcn
        .dilations()
        .into_iter()
        .map(|d| TemporalBlock::lookback(&spec, config.tcn.kernel, d))
        .sum::<usize>();
    let stem = if config.is_tcn_only() {
        0
    } else {
        config.stem.kernel[0] - 1
    };
    ReceptiveField {
        tcn,
        stem,
        total: tcn + stem,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockKind;

    #[test]
    fn closed_forms() {
        let one = ModelConfig::tcn_only(BlockKind::BaselineTcn, 1, 8);
        assert_eq!(receptive_field(&one).tcn, 5);
        let base = ModelConfig::tcn_only(BlockKind::BaselineTcn, 4, 8);
        assert_eq!(receptive_field(&base).tcn, 61);
        let star = ModelConfig::tcn_only(BlockKind::StarV, 4, 8);
        assert_eq!(receptive_field(&star).tcn, 181);
        assert_eq!(receptive_field(&ModelConfig::default()).total, 63);
    }
}
