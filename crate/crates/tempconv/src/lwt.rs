//! `LWT1` tensor files: the magic `LWT1`, a dtype code byte (0 = f32,
//! 1 = f64), a rank byte, `rank` little-endian `u32` dimensions, then the
//! row-major little-endian payload.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tempconv_core::{DType, Scalar, Tensor, TensorError};

pub const MAGIC: &[u8; 4] = b"LWT1";

#[derive(Debug, thiserror::Error)]
pub enum LwtError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not an LWT1 tensor (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("expected {expected:?} payload, file holds {found:?}")]
    DtypeMismatch { expected: DType, found: DType },
    #[error("dimension {0} does not fit in u32")]
    DimTooLarge(usize),
    #[error("rank {0} does not fit in u8")]
    RankTooLarge(usize),
    #[error("payload: {0}")]
    Tensor(#[from] TensorError),
}

/// A tensor read from disk in whichever precision it was stored.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// Converts to the requested precision.
    pub fn cast<F: Scalar>(&self) -> Tensor<F> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }

    /// Returns the tensor only if it is stored in precision `F`.
    pub fn exact<F: Scalar>(self) -> Result<Tensor<F>, LwtError> {
        if self.dtype() != F::DTYPE {
            return Err(LwtError::DtypeMismatch {
                expected: F::DTYPE,
                found: self.dtype(),
            });
        }
        Ok(self.cast())
    }
}

pub fn write<F: Scalar, W: Write>(w: &mut W, t: &Tensor<F>) -> Result<(), LwtError> {
    w.write_all(MAGIC)?;
    let rank = u8::try_from(t.rank()).map_err(|_| LwtError::RankTooLarge(t.rank()))?;
    w.write_all(&[F::DTYPE.code(), rank])?;
    for &d in t.shape() {
        let d32 = u32::try_from(d).map_err(|_| LwtError::DimTooLarge(d))?;
        w.write_all(&d32.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * F::DTYPE.size_of());
    for &v in t.data() {
        match F::DTYPE {
            DType::F32 => buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
            DType::F64 => buf.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read<R: Read>(r: &mut R) -> Result<AnyTensor, LwtError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LwtError::BadMagic(magic));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    let dtype = DType::from_code(head[0]).ok_or(LwtError::UnknownDtype(head[0]))?;
    let mut shape = Vec::with_capacity(head[1] as usize);
    for _ in 0..head[1] {
        let mut d = [0u8; 4];
        r.read_exact(&mut d)?;
        shape.push(u32::from_le_bytes(d) as usize);
    }
    let n: usize = shape.iter().product();
    let mut payload = vec![0u8; n * dtype.size_of()];
    r.read_exact(&mut payload)?;
    Ok(match dtype {
        DType::F32 => AnyTensor::F32(Tensor::new(
            shape,
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )?),
        DType::F64 => AnyTensor::F64(Tensor::new(
            shape,
            payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )?),
    })
}

pub fn save<F: Scalar>(path: &Path, t: &Tensor<F>) -> Result<(), LwtError> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<AnyTensor, LwtError> {
    read(&mut BufReader::new(File::open(path)?))
}
