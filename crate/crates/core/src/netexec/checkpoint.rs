//! Parameter files: `FNP1`, 32-byte genome digest, u64 LE count, then f32 LE values.

use thiserror::Error;

use super::CompiledNetwork;

const MAGIC: &[u8; 4] = b"FNP1";
const HEADER: usize = 4 + 32 + 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("not a parameter checkpoint")]
    BadMagic,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint belongs to genome {found}, network compiled from {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error("checkpoint holds {found} parameters, network has {expected}")]
    CountMismatch { expected: usize, found: usize },
}

impl CompiledNetwork {
    pub fn checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + 4 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
        out
    }

    /// Replace the parameters with a checkpoint written for the same genome.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> Result<(), CheckpointError> {
        if bytes.len() < HEADER {
            return Err(if bytes.starts_with(MAGIC) { CheckpointError::Truncated } else { CheckpointError::BadMagic });
        }
        if &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let digest = &bytes[4..36];
        if digest != self.digest {
            return Err(CheckpointError::DigestMismatch {
                expected: hex::encode(self.digest),
                found: hex::encode(digest),
            });
        }
        let count = u64::from_le_bytes(bytes[36..44].try_into().expect("8 bytes")) as usize;
        if count != self.params.len() {
            return Err(CheckpointError::CountMismatch { expected: self.params.len(), found: count });
        }
        let body = &bytes[HEADER..];
        if body.len() != 4 * count {
            return Err(CheckpointError::Truncated);
        }
        for (p, chunk) in self.params.iter_mut().zip(body.chunks_exact(4)) {
            *p = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
        Ok(())
    }
}
