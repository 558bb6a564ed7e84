//! Binary model container.
//!
//! ```text
//! magic      4 bytes  "FSBL"
//! version    u32 LE
//! variant    u32 LE   0 = slstm, 1 = elstm
//! max_len    u32 LE
//! hidden     u32 LE
//! embed_dim  u32 LE
//! then f32 LE blocks: forward W, U, b; backward W, U, b; dense_w; dense_b
//! ```

use std::fs;
use std::path::Path;

use super::network::Params;
use super::{BlstmConfig, BlstmModel, TrainingHistory, Variant};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"FSBL";
pub const MODEL_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 5 * 4;

impl BlstmModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.params.len() * 4);
        out.extend_from_slice(&MODEL_MAGIC);
        let variant = match self.config.variant {
            Variant::Slstm => 0u32,
            Variant::Elstm => 1,
        };
        for v in [
            MODEL_VERSION,
            variant,
            self.max_len() as u32,
            self.params.hidden as u32,
            self.params.embed_dim as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in self.params.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Training-only fields of the config are defaults for the variant.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("BLSTM model: {m}"));
        if bytes.len() < HEADER_LEN || bytes[..4] != MODEL_MAGIC {
            return Err(bad("missing magic"));
        }
        let word = |i: usize| {
            let o = 4 + 4 * i;
            u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]])
        };
        if word(0) != MODEL_VERSION {
            return Err(bad(&format!("unsupported version {}", word(0))));
        }
        let variant = match word(1) {
            0 => Variant::Slstm,
            1 => Variant::Elstm,
            v => return Err(bad(&format!("unknown variant {v}"))),
        };
        let (max_len, hidden, embed_dim) = (word(2) as usize, word(3) as usize, word(4) as usize);
        if max_len == 0 || hidden == 0 || embed_dim == 0 {
            return Err(bad("zero dimension"));
        }
        let mut params = Params::<f32>::zeros(hidden, embed_dim);
        if bytes.len() != HEADER_LEN + 4 * params.len() {
            return Err(bad("parameter block length does not match header"));
        }
        let mut floats = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = floats.next().expect("length checked");
            }
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("BLSTM model file"));
        }
        let config = BlstmConfig {
            max_len: Some(max_len),
            hidden,
            embed_dim,
            ..BlstmConfig::for_variant(variant)
        };
        Ok(BlstmModel {
            params,
            config,
            history: TrainingHistory::default(),
        })
    }
}

pub fn write_model(model: &BlstmModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<BlstmModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    BlstmModel::from_bytes(&bytes)
}
