//! Binary model container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic        4 bytes  "BLPM"
//! version      u32
//! obs_dim      u32
//! n_actions    u32
//! obs_scale    obs_dim × f64
//! actor        u32 layer count L, then L × u32 layer widths (input first)
//! critic       same layout as actor
//! param_count  u64      total parameters in both networks
//! params       param_count × f64: actor then critic; per layer the
//!                       weights (row-major, outputs × inputs) then biases
//! ```

use std::path::Path;

use super::agent::{PolicyModel, MODEL_VERSION};
use super::nn::{Dense, Mlp};
use crate::error::{Error, ModelFormatError, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"BLPM";

const MAX_LAYERS: usize = 64;
const MAX_WIDTH: usize = 1 << 20;

pub fn encode_model(model: &PolicyModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&model.version.to_le_bytes());
    out.extend_from_slice(&(model.obs_dim as u32).to_le_bytes());
    out.extend_from_slice(&(model.n_actions as u32).to_le_bytes());
    for s in &model.obs_scale {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for net in [&model.actor, &model.critic] {
        let sizes = net.layer_sizes();
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
    }
    let count = model.actor.param_count() + model.critic.param_count();
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for p in model.actor.params().chain(model.critic.params()) {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], ModelFormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(ModelFormatError::Truncated {
                needed: self.pos.saturating_add(n),
                have: self.buf.len(),
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, ModelFormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, ModelFormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, ModelFormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn read_sizes(r: &mut Reader<'_>, which: &str) -> std::result::Result<Vec<usize>, ModelFormatError> {
    let n = r.u32()? as usize;
    if !(2..=MAX_LAYERS).contains(&n) {
        return Err(ModelFormatError::ShapeInconsistency(format!(
            "{which}: {n} layer widths"
        )));
    }
    let sizes = (0..n)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.iter().any(|&s| s == 0 || s > MAX_WIDTH) {
        return Err(ModelFormatError::ShapeInconsistency(format!(
            "{which}: widths {sizes:?}"
        )));
    }
    Ok(sizes)
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn read_net(r: &mut Reader<'_>, sizes: &[usize], next_index: &mut usize) -> std::result::Result<Mlp, ModelFormatError> {
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for w in sizes.windows(2) {
        let mut layer = Dense::zeros(w[0], w[1]);
        for p in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *p = r.f64()?;
            if !p.is_finite() {
                return Err(ModelFormatError::NonFinite(*next_index));
            }
            *next_index += 1;
        }
        layers.push(layer);
    }
    Mlp::from_layers(layers).map_err(|e| ModelFormatError::ShapeInconsistency(e.to_string()))
}

pub fn decode_model(bytes: &[u8]) -> std::result::Result<PolicyModel, ModelFormatError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(ModelFormatError::BadMagic);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(ModelFormatError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let obs_dim = r.u32()? as usize;
    let n_actions = r.u32()? as usize;
    if obs_dim == 0 || obs_dim > MAX_WIDTH || n_actions == 0 || n_actions > MAX_WIDTH {
        return Err(ModelFormatError::ShapeInconsistency(format!(
            "obs_dim {obs_dim}, n_actions {n_actions}"
        )));
    }
    let obs_scale = (0..obs_dim)
        .map(|_| r.f64())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let actor_sizes = read_sizes(&mut r, "actor")?;
    let critic_sizes = read_sizes(&mut r, "critic")?;

    let inconsistent = |msg: String| Err(ModelFormatError::ShapeInconsistency(msg));
    if actor_sizes[0] != obs_dim || critic_sizes[0] != obs_dim {
        return inconsistent(format!(
            "input widths {}/{} do not match obs_dim {obs_dim}",
            actor_sizes[0], critic_sizes[0]
        ));
    }
    if *actor_sizes.last().unwrap() != n_actions {
        return inconsistent(format!("actor output {actor_sizes:?} vs n_actions {n_actions}"));
    }
    if *critic_sizes.last().unwrap() != 1 {
        return inconsistent(format!("critic output {critic_sizes:?} must be 1"));
    }
    let declared = r.u64()?;
    let expected = param_count(&actor_sizes) + param_count(&critic_sizes);
    if declared != expected as u64 {
        return inconsistent(format!("declared {declared} parameters, shapes imply {expected}"));
    }
    let needed = expected * 8;
    if r.remaining() < needed {
        return Err(ModelFormatError::Truncated {
            needed: r.pos + needed,
            have: bytes.len(),
        });
    }
    if r.remaining() > needed {
        return inconsistent(format!("{} trailing bytes", r.remaining() - needed));
    }
    let mut index = 0;
    let actor = read_net(&mut r, &actor_sizes, &mut index)?;
    let critic = read_net(&mut r, &critic_sizes, &mut index)?;
    let model = PolicyModel {
        actor,
        critic,
        obs_dim,
        n_actions,
        version,
        obs_scale,
    };
    model
        .validate()
        .map_err(|e| ModelFormatError::ShapeInconsistency(e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &PolicyModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !model.is_finite() {
        return Err(Error::TrainingDiverged("refusing to save non-finite model".into()));
    }
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PolicyModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_model(&bytes)?)
}
