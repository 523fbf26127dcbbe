//! Weight file format, all integers and floats little-endian:
//!
//! ```text
//! "NMS1" | version u32 | layer_count u32 |
//!   per layer: rows u32 | cols u32 | bias_len u32 (0 or cols) |
//!              rows*cols f32 weights (row-major) | bias_len f32 biases
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use super::network::{Dense, Network};
use super::{AutoencoderModel, LayerSpec, FRAME_BINS};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NMS1";
pub const FORMAT_VERSION: u32 = 1;

/// Serializes `model` into `out`.
pub fn write_weights(model: &AutoencoderModel, mut out: impl Write) -> std::io::Result<()> {
    let net = model.network();
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        let bias_len = layer.bias.as_ref().map_or(0, Vec::len);
        out.write_all(&(layer.fan_in as u32).to_le_bytes())?;
        out.write_all(&(layer.fan_out as u32).to_le_bytes())?;
        out.write_all(&(bias_len as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(4 * (layer.weights.len() + bias_len));
        for w in layer.weights.iter().chain(layer.bias.iter().flatten()) {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_weights(model: &AutoencoderModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_weights(model, &mut bytes).expect("writing to a Vec cannot fail");
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Where the loss history of the weights at `weights` is kept: the same path
/// with `.loss.csv` appended.
pub fn loss_csv_path(weights: impl AsRef<Path>) -> PathBuf {
    let mut name = weights.as_ref().as_os_str().to_owned();
    name.push(".loss.csv");
    PathBuf::from(name)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_weights(&bytes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Option<Vec<f32>> {
        let raw = self.take(n.checked_mul(4)?)?;
        Some(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        )
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Parses a weight file, naming the offending field on any inconsistency.
pub fn read_weights(bytes: &[u8]) -> Result<AutoencoderModel> {
    let mut r = Reader { bytes, pos: 0 };
    match r.take(4) {
        Some(m) if m == MAGIC => {}
        Some(m) => return Err(Error::format("magic", format!("expected \"NMS1\", found {m:?}"))),
        None => return Err(Error::format("magic", "file shorter than 4 bytes")),
    }
    let version = r
        .u32()
        .ok_or_else(|| Error::format("version", "truncated"))?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let count = r
        .u32()
        .ok_or_else(|| Error::format("layer_count", "truncated"))? as usize;
    if count == 0 {
        return Err(Error::format("layer_count", "must be at least 1"));
    }

    let mut layers = Vec::new();
    let mut expected_rows = FRAME_BINS;
    for k in 0..count {
        let field = |name: &str| format!("layer[{k}].{name}");
        if r.remaining() == 0 {
            return Err(Error::format(
                "layer_count",
                format!("header declares {count} layers but the payload ends after {k}"),
            ));
        }
        let mut header = [0usize; 3];
        for (slot, name) in header.iter_mut().zip(["rows", "cols", "bias_len"]) {
            *slot = r
                .u32()
                .ok_or_else(|| Error::format(field(name), "truncated"))? as usize;
        }
        let [rows, cols, bias_len] = header;
        if rows != expected_rows {
            return Err(Error::format(
                field("rows"),
                format!("{rows} does not chain with the previous width {expected_rows}"),
            ));
        }
        if cols == 0 {
            return Err(Error::format(field("cols"), "must be at least 1"));
        }
        if bias_len != 0 && bias_len != cols {
            return Err(Error::format(
                field("bias_len"),
                format!("must be 0 or {cols}, found {bias_len}"),
            ));
        }
        let weights = r.f32s(rows * cols).ok_or_else(|| {
            Error::format(field("weights"), format!("truncated (need {} values)", rows * cols))
        })?;
        let bias = if bias_len > 0 {
            Some(r.f32s(bias_len).ok_or_else(|| {
                Error::format(field("biases"), format!("truncated (need {bias_len} values)"))
            })?)
        } else {
            None
        };
        layers.push(Dense {
            fan_in: rows,
            fan_out: cols,
            weights,
            bias,
        });
        expected_rows = cols;
    }
    if r.remaining() != 0 {
        return Err(Error::format(
            "layer_count",
            format!(
                "header declares {count} layers but {} bytes follow them",
                r.remaining()
            ),
        ));
    }

    let spec = LayerSpec::new(layers.iter().map(|l| l.fan_out).collect())
        .map_err(|e| Error::format("layer sizes", e.to_string()))?;
    for (k, layer) in layers.iter().enumerate() {
        if layer.bias.is_some() != spec.has_bias(k) {
            return Err(Error::format(
                format!("layer[{k}].bias_len"),
                if spec.has_bias(k) {
                    "this layer requires a bias vector"
                } else {
                    "only the first and latent layers may carry biases"
                },
            ));
        }
    }
    Ok(AutoencoderModel::from_parts(spec, Network { layers }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::LATENT_DIM;

    fn model() -> AutoencoderModel {
        AutoencoderModel::initialize(
            LayerSpec::new(vec![32, LATENT_DIM, 16, FRAME_BINS]).unwrap(),
            7,
        )
    }

    fn bytes(m: &AutoencoderModel) -> Vec<u8> {
        let mut out = Vec::new();
        write_weights(m, &mut out).unwrap();
        out
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::Format { field, .. } => field,
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn loss_csv_sits_beside_weights() {
        assert_eq!(loss_csv_path("out/m.bin"), PathBuf::from("out/m.bin.loss.csv"));
    }

    #[test]
    fn header_layout() {
        let b = bytes(&model());
        assert_eq!(&b[..4], b"NMS1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 2049);
        assert_eq!(u32::from_le_bytes(b[16..20].try_into().unwrap()), 32);
        assert_eq!(u32::from_le_bytes(b[20..24].try_into().unwrap()), 32);
        let expected = 12
            + (12 + 4 * (2049 * 32 + 32))
            + (12 + 4 * (32 * 8 + 8))
            + (12 + 4 * (8 * 16))
            + (12 + 4 * (16 * 2049));
        assert_eq!(b.len(), expected);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        assert_eq!(read_weights(&bytes(&m)).unwrap(), m);
    }

    #[test]
    fn corrupt_magic() {
        let mut b = bytes(&model());
        b[0] = b'X';
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "magic");
        assert_eq!(field_of(read_weights(b"NM").unwrap_err()), "magic");
    }

    #[test]
    fn bad_version() {
        let mut b = bytes(&model());
        b[4] = 9;
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "version");
    }

    #[test]
    fn layer_count_mismatch() {
        let mut b = bytes(&model());
        b[8] = 5;
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "layer_count");
        b[8] = 3;
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "layer_count");
    }

    #[test]
    fn truncated_weights() {
        let b = bytes(&model());
        let cut = &b[..b.len() - 10];
        assert_eq!(field_of(read_weights(cut).unwrap_err()), "layer[3].weights");
    }

    #[test]
    fn broken_chain_and_bias_placement() {
        let mut b = bytes(&model());
        b[12] = 0; // layer 0 rows: 2049 -> 2048
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "layer[0].rows");

        let mut b = bytes(&model());
        b[20] = 3; // layer 0 bias_len: 32 -> 3
        assert_eq!(field_of(read_weights(&b).unwrap_err()), "layer[0].bias_len");
    }
}
