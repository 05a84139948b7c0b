//! Versioned flat-binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic          8 bytes  "PILSTMv1"
//! kind           u8       0 = LSTM, 1 = MLP
//! window_n       u32
//! feature_dim    u32
//! target_channel u32
//! n_channels     u32      followed by (min f64, max f64) per channel
//! dims           LSTM: hidden u32
//!                MLP: n_layers u32, then (in u32, out u32) per layer
//! param_count    u64      followed by that many f64 parameter values in
//!                         the documented flat order
//! ```
//!
//! The loader validates the magic, every dimension, the parameter count,
//! and that all parameter values are finite.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::NormalizationParams;
use crate::mat::Mat;

use super::lstm::LstmParams;
use super::mlp::MlpParams;
use super::NeuralError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PILSTMv1";

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Lstm(LstmParams<f64>),
    Mlp(MlpParams<f64>),
}

impl ModelParams {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelParams::Lstm(_) => "lstm",
            ModelParams::Mlp(_) => "mlp",
        }
    }
}

/// A trained model plus everything needed to run it on raw traces: window
/// length, feature layout, and the normalization fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub window_n: usize,
    pub feature_dim: usize,
    pub target_channel: usize,
    pub norm: NormalizationParams,
}

impl Checkpoint {
    /// Scalar forecast (normalized units) for one `[n × d]` window.
    pub fn predict(&self, window: &Mat<f64>) -> Result<f64, NeuralError> {
        self.check_window(window)?;
        match &self.model {
            ModelParams::Lstm(p) => Ok(super::lstm::forward_sequence(window, p)?.0),
            ModelParams::Mlp(p) => Ok(super::mlp::mlp_forward(window.as_slice(), p)?.0),
        }
    }

    /// Autoregressive forecast of `horizon` normalized temperatures.
    pub fn predict_multi(&self, window: &Mat<f64>, horizon: usize) -> Result<Vec<f64>, NeuralError> {
        self.check_window(window)?;
        match &self.model {
            ModelParams::Lstm(p) => {
                super::lstm::forward_multi(window, p, horizon, self.target_channel)
            }
            ModelParams::Mlp(p) => {
                // same feedback rule as the recurrent path
                let mut rows: Vec<Vec<f64>> =
                    (0..window.rows()).map(|r| window.row(r).to_vec()).collect();
                let mut out = Vec::with_capacity(horizon);
                for _ in 0..horizon {
                    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                    let (pred, _) = super::mlp::mlp_forward(&flat, p)?;
                    out.push(pred);
                    let mut next = rows.last().expect("non-empty window").clone();
                    next[self.target_channel] = pred;
                    rows.remove(0);
                    rows.push(next);
                }
                Ok(out)
            }
        }
    }

    fn check_window(&self, window: &Mat<f64>) -> Result<(), NeuralError> {
        if window.rows() != self.window_n || window.cols() != self.feature_dim {
            return Err(NeuralError::ShapeMismatch(format!(
                "window is {}x{}, checkpoint expects {}x{}",
                window.rows(),
                window.cols(),
                self.window_n,
                self.feature_dim
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let (kind, flat): (u8, Vec<f64>) = match &self.model {
            ModelParams::Lstm(p) => (0, p.to_flat()),
            ModelParams::Mlp(p) => (1, p.to_flat()),
        };
        out.push(kind);
        push_u32(&mut out, self.window_n);
        push_u32(&mut out, self.feature_dim);
        push_u32(&mut out, self.target_channel);
        push_u32(&mut out, self.norm.mins.len());
        for c in 0..self.norm.mins.len() {
            out.extend_from_slice(&self.norm.mins[c].to_le_bytes());
            out.extend_from_slice(&self.norm.maxs[c].to_le_bytes());
        }
        match &self.model {
            ModelParams::Lstm(p) => push_u32(&mut out, p.h),
            ModelParams::Mlp(p) => {
                push_u32(&mut out, p.layers.len());
                for layer in &p.layers {
                    push_u32(&mut out, layer.w.cols());
                    push_u32(&mut out, layer.w.rows());
                }
            }
        }
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in &flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader { bytes: &bytes, pos: 0 };

        let magic = r.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(NeuralError::BadCheckpoint(format!(
                "bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
            )));
        }
        let kind = r.take(1)?[0];
        let window_n = r.u32()? as usize;
        let feature_dim = r.u32()? as usize;
        let target_channel = r.u32()? as usize;
        if target_channel >= feature_dim {
            return Err(NeuralError::BadCheckpoint(format!(
                "target channel {target_channel} out of range for {feature_dim} features"
            )));
        }
        let n_channels = r.u32()? as usize;
        let mut mins = Vec::with_capacity(n_channels);
        let mut maxs = Vec::with_capacity(n_channels);
        for _ in 0..n_channels {
            mins.push(r.f64()?);
            maxs.push(r.f64()?);
        }
        let norm = NormalizationParams { mins, maxs };

        let model = match kind {
            0 => {
                let h = r.u32()? as usize;
                let count = r.u64()? as usize;
                let mut p = LstmParams::<f64>::zeros(feature_dim, h);
                if count != p.num_params() {
                    return Err(NeuralError::BadCheckpoint(format!(
                        "LSTM d={feature_dim} h={h} expects {} params, file has {count}",
                        p.num_params()
                    )));
                }
                let flat = r.f64_vec(count)?;
                p.load_flat(&flat)?;
                ModelParams::Lstm(p)
            }
            1 => {
                let n_layers = r.u32()? as usize;
                if n_layers == 0 {
                    return Err(NeuralError::BadCheckpoint("MLP with zero layers".into()));
                }
                let mut dims = Vec::with_capacity(n_layers);
                for _ in 0..n_layers {
                    let fan_in = r.u32()? as usize;
                    let fan_out = r.u32()? as usize;
                    dims.push((fan_in, fan_out));
                }
                if dims[0].0 != window_n * feature_dim || dims[n_layers - 1].1 != 1 {
                    return Err(NeuralError::BadCheckpoint(format!(
                        "MLP dims {dims:?} inconsistent with window {window_n}x{feature_dim}"
                    )));
                }
                for pair in dims.windows(2) {
                    if pair[0].1 != pair[1].0 {
                        return Err(NeuralError::BadCheckpoint(format!(
                            "MLP layer dims do not chain: {dims:?}"
                        )));
                    }
                }
                let hidden: Vec<usize> = dims[..n_layers - 1].iter().map(|d| d.1).collect();
                let mut p = MlpParams::<f64>::zeros(window_n * feature_dim, &hidden);
                let count = r.u64()? as usize;
                if count != p.num_params() {
                    return Err(NeuralError::BadCheckpoint(format!(
                        "MLP expects {} params, file has {count}",
                        p.num_params()
                    )));
                }
                let flat = r.f64_vec(count)?;
                p.load_flat(&flat)?;
                ModelParams::Mlp(p)
            }
            other => {
                return Err(NeuralError::BadCheckpoint(format!("unknown model kind {other}")));
            }
        };

        let ckpt = Self { model, window_n, feature_dim, target_channel, norm };
        let flat = match &ckpt.model {
            ModelParams::Lstm(p) => p.to_flat(),
            ModelParams::Mlp(p) => p.to_flat(),
        };
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::BadCheckpoint("non-finite parameter value".into()));
        }
        Ok(ckpt)
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], NeuralError> {
        if self.pos + len > self.bytes.len() {
            return Err(NeuralError::BadCheckpoint("unexpected end of file".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64_vec(&mut self, count: usize) -> Result<Vec<f64>, NeuralError> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn norm6() -> NormalizationParams {
        NormalizationParams {
            mins: vec![0.0, 0.5, 0.0, 2.5, 25.0, 0.0],
            maxs: vec![1.0, 5.0, 10.0, 4.2, 140.0, 1.0],
        }
    }

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pilstm-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn lstm_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ckpt = Checkpoint {
            model: ModelParams::Lstm(LstmParams::init(6, 8, &mut rng)),
            window_n: 10,
            feature_dim: 6,
            target_channel: 4,
            norm: norm6(),
        };
        let path = tmp("lstm.bin");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);

        let window = Mat::from_fn(10, 6, |r, c| (r * 6 + c) as f64 * 0.01);
        assert_eq!(ckpt.predict(&window).unwrap(), loaded.predict(&window).unwrap());
    }

    #[test]
    fn mlp_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ckpt = Checkpoint {
            model: ModelParams::Mlp(MlpParams::init(60, &[16, 8], &mut rng)),
            window_n: 10,
            feature_dim: 6,
            target_channel: 4,
            norm: norm6(),
        };
        let path = tmp("mlp.bin");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ckpt);
    }

    #[test]
    fn corrupted_magic_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ckpt = Checkpoint {
            model: ModelParams::Lstm(LstmParams::init(6, 4, &mut rng)),
            window_n: 5,
            feature_dim: 6,
            target_channel: 4,
            norm: norm6(),
        };
        let path = tmp("bad-magic.bin");
        ckpt.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xFF;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(NeuralError::BadCheckpoint(_))));
    }

    #[test]
    fn truncated_file_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ckpt = Checkpoint {
            model: ModelParams::Lstm(LstmParams::init(6, 4, &mut rng)),
            window_n: 5,
            feature_dim: 6,
            target_channel: 4,
            norm: norm6(),
        };
        let path = tmp("truncated.bin");
        ckpt.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(NeuralError::BadCheckpoint(_))));
    }

    #[test]
    fn wrong_window_shape_rejected_at_predict() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ckpt = Checkpoint {
            model: ModelParams::Lstm(LstmParams::init(6, 4, &mut rng)),
            window_n: 5,
            feature_dim: 6,
            target_channel: 4,
            norm: norm6(),
        };
        let window = Mat::from_fn(4, 6, |_, _| 0.0);
        assert!(matches!(ckpt.predict(&window), Err(NeuralError::ShapeMismatch(_))));
    }
}
