//! Versioned binary model checkpoints with bit-exact round-tripping.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic          4 bytes  "SDCP"
//! version        u32      currently 1
//! config_hash    u64      fingerprint of the training configuration
//! in_channels    u32
//! in_width       u32
//! layer_count    u32
//! per layer:
//!   tag          u8       0 = conv1d, 1 = dense, 2 = flatten
//!   conv1d:      in u32, out u32, kernel u32, activation u8
//!   dense:       in u32, out u32, activation u8
//!   (activation: 0 = relu, 1 = sigmoid, 2 = identity)
//! param_len      u64
//! params         f64 × param_len
//! optimizer tag  u8       0 = none, 1 = adam, 2 = momentum
//!   adam:        lr f64, beta1 f64, beta2 f64, eps f64, step u64,
//!                first_moment f64 × param_len, second_moment f64 × param_len
//!   momentum:    lr f64, momentum f64, velocity f64 × param_len
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensornet::{Activation, AdamState, LayerSpec, MomentumState, Network, Optimizer};

const MAGIC: &[u8; 4] = b"SDCP";
const VERSION: u32 = 1;

/// A network together with its optimizer state and config fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Option<Optimizer>,
    pub config_hash: u64,
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = encode(ckpt);
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}

fn act_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Sigmoid => 1,
        Activation::Identity => 2,
    }
}

fn act_from(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Sigmoid),
        2 => Ok(Activation::Identity),
        t => Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let net = &ckpt.network;
    let mut out = Vec::with_capacity(64 + net.param_len() * 8 * 3);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&ckpt.config_hash.to_le_bytes());
    let (c, w) = net.input_shape();
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        match *layer {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation,
            } => {
                out.push(0);
                out.extend_from_slice(&(in_channels as u32).to_le_bytes());
                out.extend_from_slice(&(out_channels as u32).to_le_bytes());
                out.extend_from_slice(&(kernel as u32).to_le_bytes());
                out.push(act_tag(activation));
            }
            LayerSpec::Dense {
                inputs,
                outputs,
                activation,
            } => {
                out.push(1);
                out.extend_from_slice(&(inputs as u32).to_le_bytes());
                out.extend_from_slice(&(outputs as u32).to_le_bytes());
                out.push(act_tag(activation));
            }
            LayerSpec::Flatten => out.push(2),
        }
    }
    out.extend_from_slice(&(net.param_len() as u64).to_le_bytes());
    write_f64s(&mut out, net.params());
    match &ckpt.optimizer {
        None => out.push(0),
        Some(Optimizer::Adam(a)) => {
            out.push(1);
            for v in [a.learning_rate, a.beta1, a.beta2, a.epsilon] {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            out.extend_from_slice(&a.step.to_le_bytes());
            write_f64s(&mut out, &a.first_moment);
            write_f64s(&mut out, &a.second_moment);
        }
        Some(Optimizer::Momentum(m)) => {
            out.push(2);
            for v in [m.learning_rate, m.momentum] {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
            write_f64s(&mut out, &m.velocity);
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let config_hash = r.u64()?;
    let in_channels = r.u32()? as usize;
    let in_width = r.u32()? as usize;
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let tag = r.u8()?;
        let layer = match tag {
            0 => LayerSpec::Conv1d {
                in_channels: r.u32()? as usize,
                out_channels: r.u32()? as usize,
                kernel: r.u32()? as usize,
                activation: act_from(r.u8()?)?,
            },
            1 => LayerSpec::Dense {
                inputs: r.u32()? as usize,
                outputs: r.u32()? as usize,
                activation: act_from(r.u8()?)?,
            },
            2 => LayerSpec::Flatten,
            t => return Err(Error::Checkpoint(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    let mut network = Network::new(in_channels, in_width, layers)
        .map_err(|e| Error::Checkpoint(format!("inconsistent layer stack: {e}")))?;
    let param_len = r.u64()? as usize;
    if param_len != network.param_len() {
        return Err(Error::Checkpoint(format!(
            "file stores {param_len} parameters, layer stack implies {}",
            network.param_len()
        )));
    }
    r.f64s(network.params_mut())?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let learning_rate = r.f64()?;
            let beta1 = r.f64()?;
            let beta2 = r.f64()?;
            let epsilon = r.f64()?;
            let step = r.u64()?;
            let mut adam = AdamState::new(learning_rate, beta1, beta2, epsilon, param_len)
                .map_err(|e| Error::Checkpoint(format!("bad adam state: {e}")))?;
            adam.step = step;
            r.f64s(&mut adam.first_moment)?;
            r.f64s(&mut adam.second_moment)?;
            Some(Optimizer::Adam(adam))
        }
        2 => {
            let learning_rate = r.f64()?;
            let momentum = r.f64()?;
            let mut state = MomentumState::new(learning_rate, momentum, param_len)
                .map_err(|e| Error::Checkpoint(format!("bad momentum state: {e}")))?;
            r.f64s(&mut state.velocity)?;
            Some(Optimizer::Momentum(state))
        }
        t => return Err(Error::Checkpoint(format!("unknown optimizer tag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        network,
        optimizer,
        config_hash,
    })
}

fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        for v in out.iter_mut() {
            *v = self.f64()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_network(seed: u64) -> Network {
        let mut net = Network::new(
            2,
            10,
            vec![
                LayerSpec::Conv1d {
                    in_channels: 2,
                    out_channels: 3,
                    kernel: 3,
                    activation: Activation::Relu,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 24,
                    outputs: 1,
                    activation: Activation::Sigmoid,
                },
            ],
        )
        .unwrap();
        net.init_xavier(seed);
        net
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let net = sample_network(9);
        let mut adam = AdamState::new(1e-3, 0.9, 0.999, 1e-8, net.param_len()).unwrap();
        adam.step = 17;
        for (i, m) in adam.first_moment.iter_mut().enumerate() {
            *m = (i as f64 * 0.1).sin();
        }
        let ckpt = Checkpoint {
            network: net,
            optimizer: Some(Optimizer::Adam(adam)),
            config_hash: 0xDEAD_BEEF_u64,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&ckpt, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(ckpt, loaded);
        // saving again produces identical bytes
        let again = encode(&loaded);
        assert_eq!(encode(&ckpt), again);
    }

    #[test]
    fn momentum_round_trip() {
        let net = sample_network(4);
        let state = MomentumState::new(0.01, 0.9, net.param_len()).unwrap();
        let ckpt = Checkpoint {
            network: net,
            optimizer: Some(Optimizer::Momentum(state)),
            config_hash: 7,
        };
        let decoded = decode(&encode(&ckpt)).unwrap();
        assert_eq!(ckpt, decoded);
    }

    #[test]
    fn rejects_corrupt_files() {
        let net = sample_network(2);
        let ckpt = Checkpoint {
            network: net,
            optimizer: None,
            config_hash: 1,
        };
        let mut bytes = encode(&ckpt);
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());

        let mut truncated = encode(&ckpt);
        truncated.truncate(truncated.len() - 3);
        assert!(decode(&truncated).is_err());

        let mut trailing = encode(&ckpt);
        trailing.push(0);
        assert!(decode(&trailing).is_err());
    }
}
