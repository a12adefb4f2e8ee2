//! Binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"NEMA"
//! version u32
//! count   u32
//! entry*  name_len u32, name bytes (UTF-8),
//!         rank u32, dims u32 * rank,
//!         values f32 * product(dims)
//! ```
//!
//! Every parameter — including batch-norm running statistics — is stored by
//! name. Values are always serialized as f32 (the training precision), so a
//! checkpoint written by an f64 model round-trips through f32.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::engine::scalar::Scalar;
use crate::model::graph::Model;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"NEMA";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Sanity bounds while parsing; anything beyond these is a corrupt file, not
/// a real model.
const MAX_NAME_LEN: usize = 4096;
const MAX_RANK: usize = 8;
const MAX_ELEMENTS: usize = 1 << 31;

/// Outcome of a by-name partial load.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TransferReport {
    /// Parameter names copied from the checkpoint into the model.
    pub matched: Vec<String>,
    /// Model parameters with no checkpoint entry (left at their current values).
    pub skipped_model: Vec<String>,
    /// Checkpoint entries with no matching model parameter.
    pub skipped_file: Vec<String>,
}

pub fn save_checkpoint<S: Scalar>(model: &Model<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_to_writer(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_to_writer<S: Scalar>(model: &Model<S>, w: &mut impl Write) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(model.params().len() as u32).to_le_bytes())?;
    for (_, param) in model.params().iter() {
        let name = param.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let shape = param.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut bytes = Vec::with_capacity(param.value.len() * 4);
        for &v in param.value.data() {
            bytes.extend_from_slice(&v.to_f32().to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Strict load: the checkpoint must contain exactly the model's parameter
/// set with identical shapes. Use this to resume or evaluate a run.
pub fn load_checkpoint<S: Scalar>(model: &mut Model<S>, path: impl AsRef<Path>) -> Result<()> {
    let entries = read_entries_from_path(path.as_ref())?;
    let by_name: HashMap<&str, usize> =
        entries.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect();
    for name in entries.iter().map(|e| &e.name) {
        if model.params().id_of(name).is_none() {
            return Err(Error::Checkpoint(format!(
                "checkpoint entry `{name}` has no counterpart in this model; use a partial load for transfer"
            )));
        }
    }
    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    for id in ids {
        let param = model.params_mut().get_mut(id);
        let entry = by_name
            .get(param.name.as_str())
            .map(|&i| &entries[i])
            .ok_or_else(|| Error::Checkpoint(format!("checkpoint is missing parameter `{}`", param.name)))?;
        copy_entry(entry, param.value.shape().to_vec(), param.value.data_mut(), &param.name)?;
    }
    Ok(())
}

/// By-name partial load for transfer learning: matching names must agree in
/// shape (a mismatch is an error naming the parameter); everything else is
/// reported rather than touched. Fails if nothing matches at all.
pub fn load_partial<S: Scalar>(model: &mut Model<S>, path: impl AsRef<Path>) -> Result<TransferReport> {
    let entries = read_entries_from_path(path.as_ref())?;
    let by_name: HashMap<&str, usize> =
        entries.iter().enumerate().map(|(i, e)| (e.name.as_str(), i)).collect();
    let mut report = TransferReport {
        matched: Vec::new(),
        skipped_model: Vec::new(),
        skipped_file: Vec::new(),
    };
    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    for id in ids {
        let param = model.params_mut().get_mut(id);
        match by_name.get(param.name.as_str()) {
            Some(&i) => {
                copy_entry(&entries[i], param.value.shape().to_vec(), param.value.data_mut(), &param.name)?;
                report.matched.push(param.name.clone());
            }
            None => report.skipped_model.push(param.name.clone()),
        }
    }
    for entry in &entries {
        if model.params().id_of(&entry.name).is_none() {
            report.skipped_file.push(entry.name.clone());
        }
    }
    if report.matched.is_empty() {
        return Err(Error::Checkpoint(
            "no checkpoint parameter matched the model (nothing to transfer)".into(),
        ));
    }
    Ok(report)
}

struct Entry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f32>,
}

fn copy_entry<S: Scalar>(entry: &Entry, shape: Vec<usize>, out: &mut [S], name: &str) -> Result<()> {
    if entry.shape != shape {
        return Err(Error::Checkpoint(format!(
            "parameter `{name}`: checkpoint shape {:?} does not fit model shape {:?}",
            entry.shape, shape
        )));
    }
    for (dst, &src) in out.iter_mut().zip(&entry.values) {
        *dst = S::from_f32(src);
    }
    Ok(())
}

fn read_entries_from_path(path: &Path) -> Result<Vec<Entry>> {
    let mut r = BufReader::new(File::open(path)?);
    read_entries(&mut r)
}

fn read_entries(r: &mut impl Read) -> Result<Vec<Entry>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = read_u32(r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (this build reads version {CHECKPOINT_VERSION})"
        )));
    }
    let count = read_u32(r, "entry count")? as usize;
    let mut entries = Vec::with_capacity(count.min(4096));
    for i in 0..count {
        let name_len = read_u32(r, "name length")? as usize;
        if name_len == 0 || name_len > MAX_NAME_LEN {
            return Err(Error::Checkpoint(format!("entry {i}: implausible name length {name_len}")));
        }
        let mut name_bytes = vec![0u8; name_len];
        read_exact(r, &mut name_bytes, "name")?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Checkpoint(format!("entry {i}: name is not valid UTF-8")))?;
        let rank = read_u32(r, "rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Checkpoint(format!("`{name}`: implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len = 1usize;
        for _ in 0..rank {
            let d = read_u32(r, "dimension")? as usize;
            len = len
                .checked_mul(d)
                .filter(|&l| l <= MAX_ELEMENTS)
                .ok_or_else(|| Error::Checkpoint(format!("`{name}`: implausible tensor size")))?;
            shape.push(d);
        }
        let mut bytes = vec![0u8; len * 4];
        read_exact(r, &mut bytes, "values")?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push(Entry { name, shape, values });
    }
    Ok(entries)
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated or unreadable checkpoint while reading {what}: {e}")))
}
