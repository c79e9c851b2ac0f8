//! Binary persistence for embedding matrices and alignment rotations.
//!
//! Embedding file layout (`TEMB`): magic `TEMB`, version u32 = 1, dim u32,
//! vocab_size u32, period i32, then vocab_size length-prefixed UTF-8 tokens,
//! then vocab_size×dim little-endian f32 input vectors (row-major), then one
//! flag byte; when it is 1, the output vectors follow in the same shape.
//!
//! Rotation sidecar (`TROT`): magic `TROT`, version u32 = 1, dim u32,
//! step_count u32, then per step a header (from_period i32, to_period i32)
//! followed by dim×dim little-endian f32 values, row-major.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::embedder::{EmbeddingMatrix, Vocabulary};

const TEMB_MAGIC: &[u8; 4] = b"TEMB";
const TROT_MAGIC: &[u8; 4] = b"TROT";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TembError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_i32<W: Write>(w: &mut W, v: i32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f32s<W: Write>(w: &mut W, vs: &[f32]) -> std::io::Result<()> {
    for &v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TembError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_i32<R: Read>(r: &mut R) -> Result<i32, TembError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(i32::from_le_bytes(buf))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>, TembError> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn write_embedding<W: Write>(w: &mut W, m: &EmbeddingMatrix) -> Result<(), TembError> {
    w.write_all(TEMB_MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, m.dim as u32)?;
    write_u32(w, m.vocab.len() as u32)?;
    write_i32(w, m.period)?;
    for token in m.vocab.tokens() {
        write_u32(w, token.len() as u32)?;
        w.write_all(token.as_bytes())?;
    }
    write_f32s(w, &m.input)?;
    match &m.output {
        Some(out) => {
            w.write_all(&[1])?;
            write_f32s(w, out)?;
        }
        None => w.write_all(&[0])?,
    }
    Ok(())
}

pub fn read_embedding<R: Read>(r: &mut R) -> Result<EmbeddingMatrix, TembError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TEMB_MAGIC {
        return Err(TembError::BadMagic { expected: "TEMB" });
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(TembError::UnsupportedVersion(version));
    }
    let dim = read_u32(r)? as usize;
    let vocab_size = read_u32(r)? as usize;
    let period = read_i32(r)?;
    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        let len = read_u32(r)? as usize;
        if len > 1 << 20 {
            return Err(TembError::Corrupt(format!("token length {len} is implausible")));
        }
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let token = String::from_utf8(buf)
            .map_err(|e| TembError::Corrupt(format!("token is not UTF-8: {e}")))?;
        tokens.push(token);
    }
    let input = read_f32s(r, vocab_size * dim)?;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let output = match flag[0] {
        0 => None,
        1 => Some(read_f32s(r, vocab_size * dim)?),
        other => return Err(TembError::Corrupt(format!("bad output flag byte {other}"))),
    };
    // counts are not part of the format; they reload as zero
    let vocab = Vocabulary::from_ordered(tokens, vec![0; vocab_size]);
    Ok(EmbeddingMatrix { period, vocab, dim, input, output })
}

pub fn save_embedding(path: &Path, m: &EmbeddingMatrix) -> Result<(), TembError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_embedding(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingMatrix, TembError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_embedding(&mut r)
}

/// One persisted alignment step: the rotation taking period `to_period` into
/// the frame anchored at the series start, fitted against `from_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationRecord {
    pub from_period: i32,
    pub to_period: i32,
    /// dim×dim, row-major.
    pub rotation: Vec<f32>,
}

pub fn write_rotations<W: Write>(
    w: &mut W,
    dim: usize,
    steps: &[RotationRecord],
) -> Result<(), TembError> {
    w.write_all(TROT_MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, dim as u32)?;
    write_u32(w, steps.len() as u32)?;
    for step in steps {
        if step.rotation.len() != dim * dim {
            return Err(TembError::Corrupt(format!(
                "rotation for {}→{} has {} entries, expected {}",
                step.from_period,
                step.to_period,
                step.rotation.len(),
                dim * dim
            )));
        }
        write_i32(w, step.from_period)?;
        write_i32(w, step.to_period)?;
        write_f32s(w, &step.rotation)?;
    }
    Ok(())
}

pub fn read_rotations<R: Read>(r: &mut R) -> Result<(usize, Vec<RotationRecord>), TembError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TROT_MAGIC {
        return Err(TembError::BadMagic { expected: "TROT" });
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(TembError::UnsupportedVersion(version));
    }
    let dim = read_u32(r)? as usize;
    let n_steps = read_u32(r)? as usize;
    let mut steps = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let from_period = read_i32(r)?;
        let to_period = read_i32(r)?;
        let rotation = read_f32s(r, dim * dim)?;
        steps.push(RotationRecord { from_period, to_period, rotation });
    }
    Ok((dim, steps))
}

pub fn save_rotations(path: &Path, dim: usize, steps: &[RotationRecord]) -> Result<(), TembError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_rotations(&mut w, dim, steps)?;
    w.flush()?;
    Ok(())
}

pub fn load_rotations(path: &Path) -> Result<(usize, Vec<RotationRecord>), TembError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_rotations(&mut r)
}
