//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        6 bytes  "BLSTM1"
//! version      u16
//! vocab_size   u32
//! embed_dim    u32
//! hidden       u32
//! layers       u32
//! classes      u32
//! max_seq_len  u32
//! flags        u32      bit 0: "RT" mapped to <RT>
//! payload_len  u64
//! payload      payload_len bytes
//! crc32        u32      of the payload
//! ```
//!
//! The payload holds, in order: the vocabulary (per entry a u32 byte length
//! and UTF-8 bytes, ids ascending), one byte per embedding row (1 =
//! trainable), the embedding matrix row-major, then for each layer the
//! forward and backward cell tensors in
//! [`botlstm_core::nn::TENSOR_NAMES`] order, then the
//! softmax weights and bias. Every float is an f64.

use botlstm_core::embedding::EmbeddingTable;
use botlstm_core::linalg::Matrix;
use botlstm_core::nn::{BiLayer, LstmCellParams, ModelConfig, ModelParams, NUM_CLASSES};
use botlstm_core::Vocabulary;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 6] = b"BLSTM1";
pub const VERSION: u16 = 1;
pub const FLAG_RT_TOKEN: u32 = 1;
const HEADER_LEN: usize = 6 + 2 + 7 * 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub model: ModelParams,
    pub rt_token: bool,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| CliError::Internal(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_floats(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        if self.vocab.len() != m.embedding.vocab_size() {
            return Err(CliError::Internal(format!(
                "vocabulary has {} entries but the embedding table {} rows",
                self.vocab.len(),
                m.embedding.vocab_size()
            )));
        }
        let mut payload = Vec::new();
        for surface in self.vocab.surfaces() {
            put_u32(&mut payload, surface.len())?;
            payload.extend_from_slice(surface.as_bytes());
        }
        payload.extend(m.embedding.trainable_mask().iter().map(|&t| t as u8));
        put_floats(&mut payload, m.embedding.rows().as_slice());
        for layer in &m.layers {
            for cell in [&layer.forward, &layer.backward] {
                for t in cell.tensors() {
                    put_floats(&mut payload, t);
                }
            }
        }
        put_floats(&mut payload, m.softmax_w.as_slice());
        put_floats(&mut payload, &m.softmax_b);

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [
            self.vocab.len(),
            m.embedding.dim(),
            m.config.hidden,
            m.config.layers,
            NUM_CLASSES,
            m.config.max_seq_len,
        ] {
            put_u32(&mut out, v)?;
        }
        put_u32(
            &mut out,
            if self.rt_token {
                FLAG_RT_TOKEN as usize
            } else {
                0
            },
        )?;
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |why: &str| CliError::CorruptCheckpoint(why.to_string());
        if bytes.len() < HEADER_LEN {
            return Err(corrupt("file shorter than header"));
        }
        if &bytes[..6] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut header = Reader {
            buf: &bytes[6..HEADER_LEN],
        };
        let version = u16::from_le_bytes(header.take(2)?.try_into().unwrap());
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 7];
        for d in &mut dims {
            *d = header.u32()? as usize;
        }
        let [vocab_size, embed_dim, hidden, layers, classes, max_seq_len, flags] = dims;
        let payload_len = u64::from_le_bytes(header.take(8)?.try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        if payload_len.checked_add(4) != Some(body.len() as u64) {
            return Err(corrupt("length does not match header"));
        }
        let (payload, trailer) = body.split_at(payload_len as usize);
        if crc32fast::hash(payload).to_le_bytes() != trailer {
            return Err(corrupt("checksum mismatch"));
        }
        if classes != NUM_CLASSES {
            return Err(corrupt(&format!("{classes} classes")));
        }

        let mut r = Reader { buf: payload };
        let mut surfaces = Vec::with_capacity(vocab_size.min(1 << 20));
        for _ in 0..vocab_size {
            let n = r.u32()? as usize;
            let s = std::str::from_utf8(r.take(n)?)
                .map_err(|_| corrupt("vocabulary entry is not UTF-8"))?;
            surfaces.push(s.to_string());
        }
        let vocab = Vocabulary::from_surfaces(surfaces).map_err(|e| corrupt(&e.to_string()))?;
        let trainable: Vec<bool> = r.take(vocab_size)?.iter().map(|&b| b != 0).collect();
        let rows = r.matrix(vocab_size, embed_dim)?;
        let embedding =
            EmbeddingTable::from_parts(rows, trainable).map_err(|e| corrupt(&e.to_string()))?;
        let mut stack = Vec::with_capacity(layers.min(64));
        for l in 0..layers {
            let input_dim = if l == 0 { embed_dim } else { 2 * hidden };
            let mut layer = BiLayer {
                forward: LstmCellParams::zeros(input_dim, hidden),
                backward: LstmCellParams::zeros(input_dim, hidden),
            };
            for cell in [&mut layer.forward, &mut layer.backward] {
                for t in cell.tensors_mut() {
                    r.floats_into(t)?;
                }
            }
            stack.push(layer);
        }
        let softmax_w = r.matrix(NUM_CLASSES, 2 * hidden)?;
        let mut softmax_b = vec![0.0; NUM_CLASSES];
        r.floats_into(&mut softmax_b)?;
        if !r.buf.is_empty() {
            return Err(corrupt("trailing bytes in payload"));
        }
        let model = ModelParams {
            config: ModelConfig {
                hidden,
                layers,
                max_seq_len,
            },
            embedding,
            layers: stack,
            softmax_w,
            softmax_b,
        };
        model.validate().map_err(|e| corrupt(&e.to_string()))?;
        Ok(Checkpoint {
            vocab,
            model,
            rt_token: flags as u32 & FLAG_RT_TOKEN != 0,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_file(path, self.to_bytes()?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(CliError::CorruptCheckpoint("payload ends early".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn floats_into(&mut self, out: &mut [f64]) -> Result<()> {
        let bytes = self.take(
            out.len()
                .checked_mul(8)
                .ok_or_else(|| CliError::CorruptCheckpoint("size overflow".into()))?,
        )?;
        for (x, chunk) in out.iter_mut().zip(bytes.chunks_exact(8)) {
            *x = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| CliError::CorruptCheckpoint("size overflow".into()))?;
        if n.saturating_mul(8) > self.buf.len() {
            return Err(CliError::CorruptCheckpoint("payload ends early".into()));
        }
        let mut data = vec![0.0; n];
        self.floats_into(&mut data)?;
        Ok(Matrix::from_vec(rows, cols, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use botlstm_core::data::synthetic;
    use botlstm_core::nn::init_params;

    fn cell_float_count(input_dim: usize, hidden: usize) -> usize {
        4 * hidden * input_dim + 4 * hidden * hidden + 7 * hidden
    }

    fn sample() -> Checkpoint {
        let c = synthetic(3, 2, 6).unwrap();
        let model = init_params(
            ModelConfig {
                hidden: 3,
                layers: 2,
                max_seq_len: 16,
            },
            c.table,
            11,
        )
        .unwrap();
        Checkpoint {
            vocab: c.vocab,
            model,
            rt_token: true,
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn header_fields() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..6], b"BLSTM1");
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), VERSION);
        let field = |i: usize| {
            u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize
        };
        assert_eq!(field(0), ck.vocab.len());
        assert_eq!(field(1), ck.model.embedding.dim());
        assert_eq!(field(2), 3);
        assert_eq!(field(3), 2);
        assert_eq!(field(4), 2);
        assert_eq!(field(5), 16);
        assert_eq!(field(6), 1);
    }

    #[test]
    fn payload_size_matches_layout() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let m = &ck.model;
        let (v, d, h) = (ck.vocab.len(), m.embedding.dim(), 3);
        let strings: usize = ck.vocab.surfaces().map(|s| 4 + s.len()).sum();
        let floats =
            v * d + 2 * cell_float_count(d, h) + 2 * cell_float_count(2 * h, h) + 2 * 2 * h + 2;
        assert_eq!(bytes.len(), HEADER_LEN + strings + v + 8 * floats + 4);
    }

    #[test]
    fn every_truncation_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [
            0,
            5,
            HEADER_LEN - 1,
            HEADER_LEN,
            bytes.len() / 2,
            bytes.len() - 1,
        ] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(err.to_string().starts_with("corrupt checkpoint"), "{err}");
        }
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[HEADER_LEN + 40] ^= 0x10;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(
            matches!(err, CliError::CorruptCheckpoint(ref m) if m.contains("checksum")),
            "{err}"
        );
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(CliError::CorruptCheckpoint(_))
        ));
    }
}
