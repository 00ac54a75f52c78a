//! `LWCK` checkpoints: every parameter and buffer of a model, by name, with
//! the model configuration needed to rebuild it.
//!
//! Layout (little-endian): magic `LWCK`, `u32` version, `u64` seed, `u32`
//! length + UTF-8 TOML of the model config, `u32` entry count, then per
//! entry a kind byte (0 = parameter, 1 = buffer), `u32` length + UTF-8 name
//! and an `LWT1` tensor record.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tempconv_core::model::{build_model, ModelConfig, ModelError, ModelGraph};
use tempconv_core::{Scalar, TensorError};

use crate::lwt::{self, AnyTensor, LwtError};

pub const MAGIC: &[u8; 4] = b"LWCK";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("tensor record: {0}")]
    Tensor(#[from] LwtError),
    #[error("embedded config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("checkpoint and model disagree: {0}")]
    Mismatch(String),
}

impl From<TensorError> for CheckpointError {
    fn from(e: TensorError) -> Self {
        CheckpointError::Tensor(LwtError::Tensor(e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Param,
    Buffer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub kind: EntryKind,
    pub name: String,
    pub tensor: AnyTensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub seed: u64,
    pub entries: Vec<Entry>,
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let n = read_u32(r)? as usize;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| CheckpointError::Mismatch(format!("invalid UTF-8 string: {e}")))
}

pub fn write<F: Scalar, W: Write>(w: &mut W, graph: &ModelGraph<F>) -> Result<(), CheckpointError> {
    let config = toml::to_string(&graph.config).map_err(|e| CheckpointError::Config(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&graph.meta.seed.to_le_bytes())?;
    write_str(w, &config)?;
    let store = &graph.store;
    let count = store.params().len() + store.buffers().len();
    w.write_all(&(count as u32).to_le_bytes())?;
    for (kind, list) in [(0u8, store.params()), (1u8, store.buffers())] {
        for nt in list {
            w.write_all(&[kind])?;
            write_str(w, &nt.name)?;
            lwt::write(w, &nt.tensor)?;
        }
    }
    Ok(())
}

pub fn read<R: Read>(r: &mut R) -> Result<Checkpoint, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut seed = [0u8; 8];
    r.read_exact(&mut seed)?;
    let text = read_str(r)?;
    let config: ModelConfig = toml::from_str(&text).map_err(|e| CheckpointError::Config(e.to_string()))?;
    let count = read_u32(r)?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut k = [0u8; 1];
        r.read_exact(&mut k)?;
        let kind = match k[0] {
            0 => EntryKind::Param,
            1 => EntryKind::Buffer,
            other => return Err(CheckpointError::Mismatch(format!("unknown entry kind {other}"))),
        };
        let name = read_str(r)?;
        let tensor = lwt::read(r)?;
        entries.push(Entry { kind, name, tensor });
    }
    Ok(Checkpoint {
        config,
        seed: u64::from_le_bytes(seed),
        entries,
    })
}

pub fn save<F: Scalar>(path: &Path, graph: &ModelGraph<F>) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w, graph)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    read(&mut BufReader::new(File::open(path)?))
}

impl Checkpoint {
    /// Rebuilds the model and overwrites every parameter and buffer with the
    /// stored values. Names must match one-to-one with equal shapes.
    pub fn restore<F: Scalar>(&self) -> Result<ModelGraph<F>, CheckpointError> {
        let mut graph = build_model::<F>(&self.config, self.seed)?;
        let mut stored: BTreeMap<(bool, String), &AnyTensor> = BTreeMap::new();
        for e in &self.entries {
            if stored
                .insert((e.kind == EntryKind::Buffer, e.name.clone()), &e.tensor)
                .is_some()
            {
                return Err(CheckpointError::Mismatch(format!("duplicate entry `{}`", e.name)));
            }
        }
        let mut take = |buffer: bool, name: &str| {
            stored
                .remove(&(buffer, name.to_string()))
                .ok_or_else(|| CheckpointError::Mismatch(format!("missing `{name}`")))
        };
        let store = &mut graph.store;
        for id in store.param_ids().collect::<Vec<_>>() {
            let name = store.param_name(id).to_string();
            let t = take(false, &name)?.cast::<F>();
            store
                .set_param(id, t)
                .map_err(|e| CheckpointError::Mismatch(format!("`{name}`: {e}")))?;
        }
        for id in store.buffer_ids().collect::<Vec<_>>() {
            let name = store.buffers()[id.index()].name.clone();
            let t = take(true, &name)?.cast::<F>();
            store
                .set_buffer(id, t)
                .map_err(|e| CheckpointError::Mismatch(format!("`{name}`: {e}")))?;
        }
        if let Some(((_, name), _)) = stored.into_iter().next() {
            return Err(CheckpointError::Mismatch(format!("unexpected entry `{name}`")));
        }
        Ok(graph)
    }
}
