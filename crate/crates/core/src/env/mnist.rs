//! IDX files and shuffled mini-batches for MNIST.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const PIXELS: usize = 28 * 28;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { found: u32, expected: u32 },
    #[error("truncated: header promises {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("images are {rows}x{cols}, expected 28x28")]
    Dimensions { rows: usize, cols: usize },
    #[error("label {label} at index {index} is not a digit")]
    BadLabel { index: usize, label: u8 },
    #[error("no {0} file found (tried raw and .gz names)")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

/// Parsed IDX payload: dimension sizes and raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Idx {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

pub fn parse_idx(bytes: &[u8], magic: u32) -> Result<Idx, IdxError> {
    let word = |k: usize| -> Option<u32> {
        bytes.get(4 * k..4 * k + 4).map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
    };
    let found = word(0).ok_or(IdxError::Truncated { expected: 4, found: bytes.len() })?;
    if found != magic {
        return Err(IdxError::BadMagic { found, expected: magic });
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    let dims: Vec<usize> = (1..=ndims)
        .map(|k| word(k).map(|d| d as usize).ok_or(IdxError::Truncated { expected: header, found: bytes.len() }))
        .collect::<Result<_, _>>()?;
    let payload: usize = dims.iter().product();
    let found = bytes.len() - header;
    if found != payload {
        return Err(IdxError::Truncated { expected: payload, found });
    }
    Ok(Idx { dims, data: bytes[header..].to_vec() })
}

pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let magic = 0x0800 | dims.len() as u32;
    let mut out = magic.to_be_bytes().to_vec();
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io { path: path.to_path_buf(), source };
    let mut raw = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut raw)).map_err(io_err)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf, IdxError> {
    for name in [stem.to_string(), format!("{stem}.gz")] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(IdxError::Missing(stem.to_string()))
}

/// Labeled 28×28 byte images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistSet {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistSet {
    pub fn from_idx(images: Idx, labels: Idx) -> Result<Self, IdxError> {
        if images.dims.len() != 3 || labels.dims.len() != 1 {
            return Err(IdxError::Dimensions { rows: 0, cols: 0 });
        }
        if images.dims[1] != 28 || images.dims[2] != 28 {
            return Err(IdxError::Dimensions { rows: images.dims[1], cols: images.dims[2] });
        }
        if images.dims[0] != labels.dims[0] {
            return Err(IdxError::CountMismatch { images: images.dims[0], labels: labels.dims[0] });
        }
        if let Some((index, &label)) = labels.data.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(IdxError::BadLabel { index, label });
        }
        Ok(MnistSet { images: images.data, labels: labels.data })
    }

    pub fn from_bytes(images: &[u8], labels: &[u8]) -> Result<Self, IdxError> {
        Self::from_idx(parse_idx(images, IMAGE_MAGIC)?, parse_idx(labels, LABEL_MAGIC)?)
    }

    /// Load a split from `dir`, accepting the canonical names with or without `.gz`.
    pub fn load(dir: &Path, split: Split) -> Result<Self, IdxError> {
        let p = split.prefix();
        let images = read_file(&find(dir, &format!("{p}-images-idx3-ubyte"))?)?;
        let labels = read_file(&find(dir, &format!("{p}-labels-idx1-ubyte"))?)?;
        Self::from_bytes(&images, &labels)
    }

    /// Write uncompressed IDX files under the canonical names.
    pub fn write(&self, dir: &Path, split: Split) -> io::Result<()> {
        let p = split.prefix();
        let n = self.len();
        File::create(dir.join(format!("{p}-images-idx3-ubyte")))?.write_all(&encode_idx(&[n, 28, 28], &self.images))?;
        File::create(dir.join(format!("{p}-labels-idx1-ubyte")))?.write_all(&encode_idx(&[n], &self.labels))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * PIXELS..(i + 1) * PIXELS]
    }

    /// Pixels of image `i` scaled to [0, 1].
    pub fn normalized(&self, i: usize, out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(self.image(i)) {
            *o = p as f64 / 255.0;
        }
    }
}

/// A mini-batch of flattened images.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// `indices.len() × 784` values in [0, 1], row-major.
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * PIXELS..(k + 1) * PIXELS]
    }
}

/// Endless stream of batches, reshuffled every epoch from a fixed seed.
/// The last batch of an epoch may be short.
#[derive(Debug, Clone)]
pub struct BatchStream {
    batch_size: usize,
    len: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
    consumed: u64,
}

impl BatchStream {
    pub fn new(len: usize, batch_size: usize, seed: u64) -> Self {
        assert!(batch_size >= 1, "batch size must be positive");
        assert!(len >= 1, "empty data set");
        let mut s = BatchStream { batch_size, len, seed, epoch: 0, order: Vec::new(), cursor: 0, consumed: 0 };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        self.order = (0..self.len).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ self.epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        self.order.shuffle(&mut rng);
        self.cursor = 0;
    }

    /// The stream as it stands after `batches` batches have been drawn.
    pub fn starting_at(len: usize, batch_size: usize, seed: u64, batches: u64) -> Self {
        let mut s = Self::new(len, batch_size, seed);
        let per_epoch = s.batches_per_epoch() as u64;
        let epoch = batches / per_epoch;
        let within = (batches % per_epoch) as usize;
        if epoch > 0 {
            s.epoch = epoch;
            s.shuffle();
        }
        s.cursor = within * batch_size;
        s.consumed = batches;
        s
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.len.div_ceil(self.batch_size)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        if self.cursor >= self.len {
            self.epoch += 1;
            self.shuffle();
        }
        let end = (self.cursor + self.batch_size).min(self.len);
        let out = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        self.consumed += 1;
        out
    }

    pub fn next_batch(&mut self, set: &MnistSet) -> Batch {
        let indices = self.next_indices();
        let mut inputs = vec![0.0; indices.len() * PIXELS];
        for (k, &i) in indices.iter().enumerate() {
            set.normalized(i, &mut inputs[k * PIXELS..(k + 1) * PIXELS]);
        }
        let labels = indices.iter().map(|&i| set.labels[i] as usize).collect();
        Batch { indices, inputs, labels }
    }
}
