//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "RSGD"            4 bytes magic
//! version           u32
//! L                 u32
//! widths            L x u32
//! hidden activation u8   (0 sigmoid, 1 relu)
//! output activation u8   (0 sigmoid, 2 softmax)
//! loss              u8   (0 quadratic, 1 cross-entropy)
//! use_bias          u8
//! W^2 ... W^L       row-major f64
//! ```

use std::fs;
use std::path::Path;

use super::{Activation, Architecture, LossKind, NetworkParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RSGD";
pub const CHECKPOINT_VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Sigmoid => 0,
        Activation::Relu => 1,
        Activation::Softmax => 2,
    }
}

fn activation_from_code(c: u8) -> Option<Activation> {
    match c {
        0 => Some(Activation::Sigmoid),
        1 => Some(Activation::Relu),
        2 => Some(Activation::Softmax),
        _ => None,
    }
}

pub fn encode_checkpoint(params: &NetworkParams) -> Vec<u8> {
    let arch = params.architecture();
    let mut out = Vec::with_capacity(24 + 8 * params.num_params());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.depth() as u32).to_le_bytes());
    for &w in arch.widths() {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.push(activation_code(arch.hidden_activation()));
    out.push(activation_code(arch.output_activation()));
    out.push(match arch.loss() {
        LossKind::Quadratic => 0,
        LossKind::CrossEntropy => 1,
    });
    out.push(u8::from(arch.use_bias()));
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<NetworkParams> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4) != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let depth = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
    if depth > 1024 {
        return Err(bad("implausible layer count"));
    }
    let mut widths = Vec::with_capacity(depth);
    for _ in 0..depth {
        widths.push(cur.u32().ok_or_else(|| bad("truncated header"))? as usize);
    }
    let hidden = cur
        .u8()
        .and_then(activation_from_code)
        .ok_or_else(|| bad("bad hidden activation code"))?;
    let output = cur
        .u8()
        .and_then(activation_from_code)
        .ok_or_else(|| bad("bad output activation code"))?;
    let loss = match cur.u8() {
        Some(0) => LossKind::Quadratic,
        Some(1) => LossKind::CrossEntropy,
        _ => return Err(bad("bad loss code")),
    };
    let use_bias = match cur.u8() {
        Some(0) => false,
        Some(1) => true,
        _ => return Err(bad("bad bias flag")),
    };
    let arch = Architecture::new(widths, hidden, output, loss, use_bias)?;
    let mut weights = Vec::new();
    for (r, c) in arch.weight_shapes() {
        let raw = cur
            .take(r * c * 8)
            .ok_or_else(|| bad("truncated weights"))?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        weights.push(Matrix::from_vec(r, c, data));
    }
    if cur.pos != bytes.len() {
        return Err(bad("trailing bytes after weights"));
    }
    NetworkParams::new(arch, weights)
}

pub fn write_checkpoint(params: &NetworkParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<NetworkParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
