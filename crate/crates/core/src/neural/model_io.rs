//! Model file container: a JSON header (format version, config, tensor
//! names/shapes/offsets, training seed) followed by little-endian IEEE-754
//! 32-bit float payloads in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LstmLayer, NetworkConfig, NetworkParameters};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EQCM";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
    /// Offset from the start of the payload, in f32 elements.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    config: NetworkConfig,
    seed: u64,
    tensors: Vec<TensorInfo>,
}

fn tensor_layout(cfg: &NetworkConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut input = cfg.input_dim;
    for (i, &hidden) in cfg.lstm_layer_sizes.iter().enumerate() {
        out.push((format!("layer{i}.w_input"), vec![4 * hidden, input]));
        out.push((format!("layer{i}.w_recurrent"), vec![4 * hidden, hidden]));
        out.push((format!("layer{i}.bias"), vec![4 * hidden]));
        input = hidden;
    }
    out.push(("head.w".to_string(), vec![2, cfg.last_hidden()]));
    out.push(("head.b".to_string(), vec![2]));
    out
}

pub fn save_model(
    path: &Path,
    cfg: &NetworkConfig,
    params: &NetworkParameters,
    seed: u64,
) -> Result<()> {
    if !params.matches(cfg) {
        return Err(Error::ShapeMismatch(
            "parameters do not match the network config".into(),
        ));
    }
    let mut tensors = Vec::new();
    let mut offset = 0usize;
    for ((name, shape), data) in tensor_layout(cfg).into_iter().zip(params.tensors()) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        tensors.push(TensorInfo {
            name,
            shape,
            offset,
        });
        offset += data.len();
    }
    let header = ModelHeader {
        format: "equilcast-model".to_string(),
        version: FORMAT_VERSION,
        config: cfg.clone(),
        seed,
        tensors,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for tensor in params.tensors() {
        for &v in tensor {
            file.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(NetworkConfig, NetworkParameters, u64)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::ModelFormat(format!(
            "{} is not a model file",
            path.display()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload_start = 8 + header_len;
    if bytes.len() < payload_start {
        return Err(Error::ModelFormat("truncated header".into()));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[8..payload_start])?;
    if header.format != "equilcast-model" || header.version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format {}/{}",
            header.format, header.version
        )));
    }
    header.config.validate()?;

    let expected = tensor_layout(&header.config);
    if header.tensors.len() != expected.len() {
        return Err(Error::ModelFormat("tensor list does not match config".into()));
    }
    let payload = &bytes[payload_start..];
    let n_floats = payload.len() / 4;

    let read_tensor = |info: &TensorInfo, want: &(String, Vec<usize>)| -> Result<Vec<f64>> {
        if info.name != want.0 || info.shape != want.1 {
            return Err(Error::ModelFormat(format!(
                "tensor {} has unexpected name or shape",
                info.name
            )));
        }
        let len: usize = info.shape.iter().product();
        if info.offset + len > n_floats {
            return Err(Error::ModelFormat(format!("tensor {} overruns payload", info.name)));
        }
        Ok((0..len)
            .map(|j| {
                let at = (info.offset + j) * 4;
                f32::from_le_bytes(payload[at..at + 4].try_into().unwrap()) as f64
            })
            .collect())
    };

    let cfg = header.config.clone();
    let mut layers = Vec::new();
    let mut idx = 0;
    let mut input = cfg.input_dim;
    for &hidden in &cfg.lstm_layer_sizes {
        let w_input = read_tensor(&header.tensors[idx], &expected[idx])?;
        let w_recurrent = read_tensor(&header.tensors[idx + 1], &expected[idx + 1])?;
        let bias = read_tensor(&header.tensors[idx + 2], &expected[idx + 2])?;
        layers.push(LstmLayer {
            input_size: input,
            hidden_size: hidden,
            w_input,
            w_recurrent,
            bias,
        });
        input = hidden;
        idx += 3;
    }
    let head_w = read_tensor(&header.tensors[idx], &expected[idx])?;
    let head_b = read_tensor(&header.tensors[idx + 1], &expected[idx + 1])?;

    let params = NetworkParameters {
        layers,
        head_w,
        head_b,
    };
    if !params.matches(&cfg) {
        return Err(Error::ModelFormat("loaded tensors do not match config".into()));
    }
    Ok((cfg, params, header.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_preserves_weights_at_f32_precision() {
        let cfg = NetworkConfig {
            lstm_layer_sizes: vec![4, 6],
            input_dim: 1,
            sequence_length: 12,
            variance_floor: 1e-6,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = NetworkParameters::init(&cfg, &mut rng);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.eqm");
        save_model(&path, &cfg, &params, 17).unwrap();
        let (cfg2, params2, seed) = load_model(&path).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(seed, 17);
        for (a, b) in params.tensors().iter().zip(params2.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= (*x as f32).abs() as f64 * 1e-6 + 1e-9);
            }
        }
    }

    #[test]
    fn rejects_garbage_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.eqm");
        std::fs::write(&path, b"not a model").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }
}
