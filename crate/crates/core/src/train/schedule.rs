use super::{Result, TrainError};

/// `base · ½(1 + cos(π · epoch / total))`, the rate used throughout `epoch`.
pub fn cosine_lr(epoch: usize, total: usize, base: f64) -> Result<f64> {
    if total == 0 || epoch > total {
        return Err(TrainError::EpochOutOfRange { epoch, total });
    }
    let phase = core::f64::consts::PI * epoch as f64 / total as f64;
    Ok(base * 0.5 * (1.0 + num_traits::Float::cos(phase)))
}
