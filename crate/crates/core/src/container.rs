//! Versioned binary containers for trained models.
//!
//! Layout: 8-byte magic, little-endian u32 format version, u64 payload
//! length, payload, then a SHA-256 digest of everything before the digest.
//! Numbers inside payloads are little-endian; f64 tensors are raw IEEE 754
//! bytes. A failed magic, version, length, or digest check aborts the load
//! before any payload is interpreted.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::cnn::{CnnArchitecture, CnnModel, LayerSpec};
use crate::error::{Error, Result};

/// Magic for a standalone CNN checkpoint.
pub const CNN_MAGIC: &[u8; 8] = b"HQCCNN1\n";
/// Magic for a full pipeline bundle.
pub const BUNDLE_MAGIC: &[u8; 8] = b"HQCMDL1\n";
pub const FORMAT_VERSION: u32 = 1;

const DIGEST_LEN: usize = 32;

/// Append-only payload builder.
#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_usize(&mut self, v: usize) {
        self.put_u64(v as u64);
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64_slice(&mut self, values: &[f64]) {
        self.put_usize(values.len());
        for &v in values {
            self.put_f64(v);
        }
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn put_bytes(&mut self, bytes: &[u8]) {
        self.put_usize(bytes.len());
        self.buf.extend_from_slice(bytes);
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a payload; every read is bounds-checked.
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Container(format!(
                "payload truncated: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.data.len() - self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_usize(&mut self) -> Result<usize> {
        let v = self.get_u64()?;
        usize::try_from(v).map_err(|_| Error::Container(format!("length {v} overflows usize")))
    }

    /// Bounded length read for collection preallocation: rejects lengths
    /// that cannot fit in the remaining payload.
    fn get_len(&mut self, unit: usize) -> Result<usize> {
        let n = self.get_usize()?;
        if n.saturating_mul(unit) > self.data.len() - self.pos {
            return Err(Error::Container(format!(
                "declared length {n} exceeds remaining payload"
            )));
        }
        Ok(n)
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.get_len(8)?;
        let mut out = Vec::with_capacity(n);
        for chunk in self.take(n * 8)?.chunks_exact(8) {
            out.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Ok(out)
    }

    pub fn get_str(&mut self) -> Result<String> {
        let n = self.get_len(1)?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Container("string field is not valid UTF-8".into()))
    }

    pub fn get_bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.get_len(1)?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Container(format!(
                "{} unexpected trailing byte(s)",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Frame a payload with magic, version, length, and digest.
pub fn seal(magic: &[u8; 8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(magic.len() + 12 + payload.len() + DIGEST_LEN);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Verify framing and digest, returning the payload slice.
pub fn unseal<'a>(magic: &[u8; 8], bytes: &'a [u8]) -> Result<&'a [u8]> {
    let header_len = 8 + 4 + 8;
    if bytes.len() < header_len + DIGEST_LEN {
        return Err(Error::Container("file too short for a container".into()));
    }
    if &bytes[..8] != magic {
        return Err(Error::Container(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[..8],
            magic
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if bytes.len() != header_len + payload_len + DIGEST_LEN {
        return Err(Error::Container(format!(
            "length mismatch: header claims {payload_len} payload bytes, file holds {}",
            bytes.len().saturating_sub(header_len + DIGEST_LEN)
        )));
    }
    let body_end = header_len + payload_len;
    let digest = Sha256::digest(&bytes[..body_end]);
    if digest.as_slice() != &bytes[body_end..] {
        return Err(Error::Checksum);
    }
    Ok(&bytes[header_len..body_end])
}

fn write_arch(w: &mut ByteWriter, arch: &CnnArchitecture) {
    w.put_usize(arch.hidden.len());
    for spec in &arch.hidden {
        match *spec {
            LayerSpec::Conv1d { filters, kernel } => {
                w.put_u8(0);
                w.put_usize(filters);
                w.put_usize(kernel);
            }
            LayerSpec::Dropout { rate } => {
                w.put_u8(1);
                w.put_f64(rate);
            }
            LayerSpec::Flatten => w.put_u8(2),
            LayerSpec::Dense { units } => {
                w.put_u8(3);
                w.put_usize(units);
            }
        }
    }
}

fn read_arch(r: &mut ByteReader) -> Result<CnnArchitecture> {
    let n = r.get_usize()?;
    let mut hidden = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let spec = match r.get_u8()? {
            0 => LayerSpec::Conv1d {
                filters: r.get_usize()?,
                kernel: r.get_usize()?,
            },
            1 => LayerSpec::Dropout { rate: r.get_f64()? },
            2 => LayerSpec::Flatten,
            3 => LayerSpec::Dense {
                units: r.get_usize()?,
            },
            tag => return Err(Error::Container(format!("unknown layer tag {tag}"))),
        };
        hidden.push(spec);
    }
    Ok(CnnArchitecture { hidden })
}

/// Serialize a CNN to checkpoint payload bytes (no framing).
pub fn cnn_payload(model: &CnnModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_usize(model.input_len());
    w.put_usize(model.input_dim());
    w.put_usize(model.class_count());
    write_arch(&mut w, model.architecture());
    let params = model.params();
    w.put_usize(params.len());
    for tensor in params {
        w.put_f64_slice(tensor);
    }
    w.into_payload()
}

pub fn cnn_from_payload(payload: &[u8]) -> Result<CnnModel> {
    let mut r = ByteReader::new(payload);
    let model = read_cnn(&mut r)?;
    r.finish()?;
    Ok(model)
}

fn read_cnn(r: &mut ByteReader) -> Result<CnnModel> {
    let input_len = r.get_usize()?;
    let input_dim = r.get_usize()?;
    let class_count = r.get_usize()?;
    let arch = read_arch(r)?;
    let mut model = CnnModel::build(arch, input_len, input_dim, class_count, None)?;
    let n = r.get_usize()?;
    let mut tensors = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let tensor = r.get_f64_vec()?;
        if tensor.iter().any(|v| !v.is_finite()) {
            return Err(Error::Container("non-finite parameter value".into()));
        }
        tensors.push(tensor);
    }
    model.set_params(&tensors)?;
    Ok(model)
}

pub fn save_cnn(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, seal(CNN_MAGIC, &cnn_payload(model)))?;
    Ok(())
}

pub fn load_cnn(path: impl AsRef<Path>) -> Result<CnnModel> {
    let bytes = std::fs::read(path)?;
    cnn_from_payload(unseal(CNN_MAGIC, &bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{CnnArchitecture, LayerSpec};

    fn sample_model() -> CnnModel {
        let arch = CnnArchitecture {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 3,
                    kernel: 2,
                },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 4 },
                LayerSpec::Dropout { rate: 0.5 },
            ],
        };
        CnnModel::build(arch, 5, 2, 3, Some(99)).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_preserves_model() {
        let model = sample_model();
        let bytes = seal(CNN_MAGIC, &cnn_payload(&model));
        let back = cnn_from_payload(unseal(CNN_MAGIC, &bytes).unwrap()).unwrap();
        assert_eq!(back, model);
        // Identical inference on a probe input.
        let data: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        assert_eq!(
            model.forward(&data, 1, false, None).unwrap(),
            back.forward(&data, 1, false, None).unwrap()
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.cnn");
        let model = sample_model();
        save_cnn(&model, &path).unwrap();
        assert_eq!(load_cnn(&path).unwrap(), model);
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let mut bytes = seal(CNN_MAGIC, &cnn_payload(&sample_model()));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            unseal(CNN_MAGIC, &bytes).unwrap_err(),
            Error::Checksum
        ));
    }

    #[test]
    fn corrupted_digest_fails_checksum() {
        let mut bytes = seal(CNN_MAGIC, &cnn_payload(&sample_model()));
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        assert!(matches!(
            unseal(CNN_MAGIC, &bytes).unwrap_err(),
            Error::Checksum
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let mut bytes = seal(CNN_MAGIC, &cnn_payload(&sample_model()));
        bytes[8] = 2;
        // Redo the digest so only the version differs.
        let body_end = bytes.len() - DIGEST_LEN;
        let digest = Sha256::digest(&bytes[..body_end]);
        bytes[body_end..].copy_from_slice(&digest);
        match unseal(CNN_MAGIC, &bytes).unwrap_err() {
            Error::Version { expected, found } => {
                assert_eq!(expected, 1);
                assert_eq!(found, 2);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let bytes = seal(CNN_MAGIC, &cnn_payload(&sample_model()));
        assert!(unseal(BUNDLE_MAGIC, &bytes).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = seal(CNN_MAGIC, &cnn_payload(&sample_model()));
        for cut in [3, 15, bytes.len() / 2, bytes.len() - 1] {
            assert!(unseal(CNN_MAGIC, &bytes[..cut]).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn trailing_bytes_in_payload_are_rejected() {
        let mut payload = cnn_payload(&sample_model());
        payload.push(0);
        assert!(cnn_from_payload(&payload).is_err());
    }

    #[test]
    fn writer_reader_primitives_round_trip() {
        let mut w = ByteWriter::new();
        w.put_u8(7);
        w.put_u64(u64::MAX);
        w.put_f64(-0.125);
        w.put_f64_slice(&[1.5, 2.5]);
        w.put_str("টাকা");
        w.put_bytes(&[9, 8, 7]);
        let payload = w.into_payload();
        let mut r = ByteReader::new(&payload);
        assert_eq!(r.get_u8().unwrap(), 7);
        assert_eq!(r.get_u64().unwrap(), u64::MAX);
        assert_eq!(r.get_f64().unwrap(), -0.125);
        assert_eq!(r.get_f64_vec().unwrap(), vec![1.5, 2.5]);
        assert_eq!(r.get_str().unwrap(), "টাকা");
        assert_eq!(r.get_bytes().unwrap(), vec![9, 8, 7]);
        r.finish().unwrap();
    }

    #[test]
    fn reader_rejects_overlong_declared_lengths() {
        let mut w = ByteWriter::new();
        w.put_u64(u64::MAX);
        let payload = w.into_payload();
        let mut r = ByteReader::new(&payload);
        assert!(r.get_f64_vec().is_err());
    }
}
