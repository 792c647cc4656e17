//! Model persistence: magic bytes, format version, architecture tag,
//! dimensions, little-endian f64 parameter blobs, the embedded normalizer,
//! and a SHA-256 checksum over everything before it. Round trips are
//! bit-exact.

use super::{Architecture, LstmModelParams, ModelError, ModelParams, WindowModelParams};
use crate::nn::{DenseLayerParams, LstmCellParams};
use crate::pipeline::Normalizer;
use crate::Tensor2;
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MOCAPRCN";
const FORMAT_VERSION: u32 = 1;

/// Everything needed to run a saved model on new data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: ModelParams,
    pub normalizer: Normalizer,
    pub marker_names: Vec<String>,
    pub frame_rate: f64,
    pub unit_scale_to_cm: f64,
    /// SHA-256 of the training config, recorded for provenance.
    pub config_hash: [u8; 32],
}

impl ModelFile {
    pub fn architecture(&self) -> Architecture {
        self.params.architecture()
    }

    /// The LSTM parameters, or a mismatch error naming both architectures.
    pub fn expect_lstm(&self) -> Result<&LstmModelParams, ModelError> {
        match &self.params {
            ModelParams::Lstm(p) => Ok(p),
            ModelParams::Window(_) => Err(ModelError::VersionMismatch {
                expected: "lstm".into(),
                found: "window".into(),
            }),
        }
    }

    pub fn expect_window(&self) -> Result<&WindowModelParams, ModelError> {
        match &self.params {
            ModelParams::Window(p) => Ok(p),
            ModelParams::Lstm(_) => Err(ModelError::VersionMismatch {
                expected: "window".into(),
                found: "lstm".into(),
            }),
        }
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        self.u32(vs.len() as u32);
        for &v in vs {
            self.f64(v);
        }
    }

    fn tensor(&mut self, t: &Tensor2) {
        self.u32(t.rows() as u32);
        self.u32(t.cols() as u32);
        for &v in t.data() {
            self.f64(v);
        }
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.at + n > self.buf.len() {
            return Err(ModelError::CorruptFile("unexpected end of file".into()));
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>, ModelError> {
        let n = self.u32()? as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn tensor(&mut self) -> Result<Tensor2, ModelError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Ok(Tensor2::from_vec(rows, cols, data))
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelError::CorruptFile("invalid utf-8 in string".into()))
    }
}

fn encode(file: &ModelFile) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.u8(match file.params {
        ModelParams::Window(_) => 0,
        ModelParams::Lstm(_) => 1,
    });
    w.buf.extend_from_slice(&file.config_hash);
    w.u32(file.marker_names.len() as u32);
    for name in &file.marker_names {
        w.string(name);
    }
    w.f64(file.frame_rate);
    w.f64(file.unit_scale_to_cm);
    w.f64_slice(&file.normalizer.mean_pose);
    w.f64(file.normalizer.max_abs);
    w.f64_slice(&file.normalizer.sigma);
    match &file.params {
        ModelParams::Window(p) => {
            w.u32(p.window_len as u32);
            w.u32(p.dims as u32);
            w.u32(p.layers.len() as u32);
            for l in &p.layers {
                w.tensor(&l.w);
                w.f64_slice(&l.b);
            }
        }
        ModelParams::Lstm(p) => {
            w.u32(p.dims as u32);
            w.u32(p.cells.len() as u32);
            for c in &p.cells {
                w.tensor(&c.w_input);
                w.f64_slice(&c.b_input);
                w.tensor(&c.w_forget);
                w.f64_slice(&c.b_forget);
                w.tensor(&c.w_output);
                w.f64_slice(&c.b_output);
                w.tensor(&c.w_candidate);
                w.f64_slice(&c.b_candidate);
            }
            w.tensor(&p.readout.w);
            w.f64_slice(&p.readout.b);
        }
    }
    let digest = Sha256::digest(&w.buf);
    w.buf.extend_from_slice(&digest);
    w.buf
}

fn decode(bytes: &[u8]) -> Result<ModelFile, ModelError> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(ModelError::CorruptFile("file too short".into()));
    }
    let (body, checksum) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(ModelError::CorruptFile("checksum mismatch".into()));
    }
    let mut r = Reader::new(body);
    if r.take(8)? != MAGIC {
        return Err(ModelError::CorruptFile("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            expected: format!("format v{FORMAT_VERSION}"),
            found: format!("format v{version}"),
        });
    }
    let arch = r.u8()?;
    let mut config_hash = [0u8; 32];
    config_hash.copy_from_slice(r.take(32)?);
    let name_count = r.u32()? as usize;
    let mut marker_names = Vec::with_capacity(name_count);
    for _ in 0..name_count {
        marker_names.push(r.string()?);
    }
    let frame_rate = r.f64()?;
    let unit_scale_to_cm = r.f64()?;
    let mean_pose = r.f64_vec()?;
    let max_abs = r.f64()?;
    let sigma = r.f64_vec()?;
    let normalizer = Normalizer {
        mean_pose,
        max_abs,
        sigma,
    };
    let params = match arch {
        0 => {
            let window_len = r.u32()? as usize;
            let dims = r.u32()? as usize;
            let layer_count = r.u32()? as usize;
            let mut layers = Vec::with_capacity(layer_count);
            for _ in 0..layer_count {
                let w = r.tensor()?;
                let b = r.f64_vec()?;
                layers.push(DenseLayerParams::new(w, b));
            }
            ModelParams::Window(WindowModelParams {
                layers,
                window_len,
                dims,
            })
        }
        1 => {
            let dims = r.u32()? as usize;
            let cell_count = r.u32()? as usize;
            let mut cells = Vec::with_capacity(cell_count);
            for _ in 0..cell_count {
                cells.push(LstmCellParams {
                    w_input: r.tensor()?,
                    b_input: r.f64_vec()?,
                    w_forget: r.tensor()?,
                    b_forget: r.f64_vec()?,
                    w_output: r.tensor()?,
                    b_output: r.f64_vec()?,
                    w_candidate: r.tensor()?,
                    b_candidate: r.f64_vec()?,
                });
            }
            let w = r.tensor()?;
            let b = r.f64_vec()?;
            ModelParams::Lstm(LstmModelParams {
                cells,
                readout: DenseLayerParams::new(w, b),
                dims,
            })
        }
        other => {
            return Err(ModelError::CorruptFile(format!(
                "unknown architecture tag {other}"
            )))
        }
    };
    Ok(ModelFile {
        params,
        normalizer,
        marker_names,
        frame_rate,
        unit_scale_to_cm,
        config_hash,
    })
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, encode(file))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelError> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

/// SHA-256 of a canonical config rendering; embedded in model files.
pub fn config_hash(text: &str) -> [u8; 32] {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_file(arch: Architecture) -> ModelFile {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = 9;
        let params = match arch {
            Architecture::Window => {
                ModelParams::Window(WindowModelParams::init(7, 2, 4, dims, &mut rng))
            }
            Architecture::Lstm => ModelParams::Lstm(LstmModelParams::init(5, 2, dims, &mut rng)),
        };
        ModelFile {
            params,
            normalizer: Normalizer {
                mean_pose: vec![0.25; dims],
                max_abs: 17.5,
                sigma: vec![1.0 / 3.0; dims],
            },
            marker_names: vec!["Hips".into(), "Knee".into(), "Foot".into()],
            frame_rate: 120.0,
            unit_scale_to_cm: 2.54,
            config_hash: config_hash("cfg"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact_for_both_architectures() {
        let dir = tempfile::tempdir().unwrap();
        for arch in [Architecture::Window, Architecture::Lstm] {
            let file = sample_file(arch);
            let path = dir.path().join(format!("{arch}.model"));
            save_model(&file, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(file, loaded);
            // Re-encoding is byte-identical.
            assert_eq!(encode(&file), encode(&loaded));
        }
    }

    #[test]
    fn wrong_architecture_is_a_version_mismatch() {
        let file = sample_file(Architecture::Window);
        assert!(file.expect_window().is_ok());
        match file.expect_lstm() {
            Err(ModelError::VersionMismatch { expected, found }) => {
                assert_eq!(expected, "lstm");
                assert_eq!(found, "window");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tampered_bytes_are_corrupt() {
        let file = sample_file(Architecture::Lstm);
        let mut bytes = encode(&file);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        match decode(&bytes) {
            Err(ModelError::CorruptFile(msg)) => assert!(msg.contains("checksum")),
            other => panic!("unexpected {other:?}"),
        }
        // Truncation is also corrupt.
        let file2 = sample_file(Architecture::Window);
        let bytes2 = encode(&file2);
        assert!(matches!(
            decode(&bytes2[..bytes2.len() - 5]),
            Err(ModelError::CorruptFile(_))
        ));
    }

    #[test]
    fn future_format_version_is_rejected() {
        let file = sample_file(Architecture::Window);
        let mut bytes = encode(&file);
        // Bump the version field (offset 8) and re-checksum.
        bytes[8] = 99;
        let body_len = bytes.len() - 32;
        let digest = Sha256::digest(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&digest);
        assert!(matches!(
            decode(&bytes),
            Err(ModelError::VersionMismatch { .. })
        ));
    }
}
