//! Binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field            | type                          |
//! |------------------|-------------------------------|
//! | magic            | 8 bytes `APEXCKPT`            |
//! | version          | u32                           |
//! | config hash      | u64                           |
//! | clock            | u64                           |
//! | seed             | u64                           |
//! | config JSON      | u64 length, then UTF-8 bytes  |
//! | array count      | u32                           |
//! | each array       | u64 length, then f64 values   |
//!
//! Arrays, in order: actor mean network (flat), actor log std, style
//! critic (flat), task critic (flat). Flat networks list each layer's
//! weights row-major (`in x out`) followed by its biases. A JSON sidecar
//! next to the file records the layer shapes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::obs::{actor_obs_dim, critic_obs_dim};
use super::{sizes, CriticPair, GaussianPolicy, Mlp};
use crate::error::{ApexError, Result};
use crate::ppo::TrainConfig;
use crate::priors::TrainingClock;

pub const MAGIC: &[u8; 8] = b"APEXCKPT";
pub const VERSION: u32 = 1;
const ARRAY_NAMES: [&str; 4] = ["actor_mean", "actor_log_std", "critic_style", "critic_task"];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub seed: u64,
    pub clock: TrainingClock,
    pub policy: GaussianPolicy,
    pub critics: CriticPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayShape {
    pub name: String,
    pub len: usize,
    /// Layer sizes for networks, `[len]` for plain vectors.
    pub layer_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub config_hash: String,
    pub clock: u64,
    pub seed: u64,
    pub arrays: Vec<ArrayShape>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(ApexError::IncompatibleCheckpoint(format!("truncated at byte {}", self.pos)));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| ApexError::IncompatibleCheckpoint("array too long".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    fn arrays(&self) -> [Vec<f64>; 4] {
        [
            self.policy.mean_net.flatten(),
            self.policy.log_std.clone(),
            self.critics.v_style.flatten(),
            self.critics.v_task.flatten(),
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.hash().to_le_bytes());
        out.extend_from_slice(&self.clock.t.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let arrays = self.arrays();
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for a in &arrays {
            put_f64s(&mut out, a);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(ApexError::IncompatibleCheckpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(ApexError::IncompatibleCheckpoint(format!("version {version}, expected {VERSION}")));
        }
        let hash = r.u64()?;
        let clock = TrainingClock::new(r.u64()?);
        let seed = r.u64()?;
        let len = r.u64()? as usize;
        let config: TrainConfig = serde_json::from_slice(r.take(len)?)?;
        if config.hash() != hash {
            return Err(ApexError::IncompatibleCheckpoint(format!(
                "embedded config hashes to {:016x}, header says {hash:016x}",
                config.hash()
            )));
        }
        config.validate()?;
        let count = r.u32()? as usize;
        if count != ARRAY_NAMES.len() {
            return Err(ApexError::IncompatibleCheckpoint(format!("{count} arrays, expected {}", ARRAY_NAMES.len())));
        }
        let [actor_sizes, critic_sizes] = network_sizes(&config);
        let n = config.n_joints();
        let mean_net = Mlp::from_flat(&actor_sizes, &r.f64s()?).map_err(incompatible("actor_mean"))?;
        let log_std = r.f64s()?;
        if log_std.len() != n {
            return Err(ApexError::IncompatibleCheckpoint(format!("log std has {} entries for {n} joints", log_std.len())));
        }
        let v_style = Mlp::from_flat(&critic_sizes, &r.f64s()?).map_err(incompatible("critic_style"))?;
        let v_task = Mlp::from_flat(&critic_sizes, &r.f64s()?).map_err(incompatible("critic_task"))?;
        if r.pos != bytes.len() {
            return Err(ApexError::IncompatibleCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            config,
            seed,
            clock,
            policy: GaussianPolicy { mean_net, log_std },
            critics: CriticPair { v_style, v_task },
        })
    }

    pub fn sidecar(&self) -> Sidecar {
        let [actor_sizes, critic_sizes] = network_sizes(&self.config);
        let n = self.config.n_joints();
        let arrays = self.arrays();
        let shapes = [actor_sizes, vec![n], critic_sizes.clone(), critic_sizes];
        Sidecar {
            version: VERSION,
            config_hash: format!("{:016x}", self.config.hash()),
            clock: self.clock.t,
            seed: self.seed,
            arrays: ARRAY_NAMES
                .iter()
                .zip(arrays.iter().zip(shapes))
                .map(|(name, (a, s))| ArrayShape {
                    name: name.to_string(),
                    len: a.len(),
                    layer_sizes: s,
                })
                .collect(),
        }
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".json");
        PathBuf::from(p)
    }

    /// Writes the binary file and its `.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Loads and checks the checkpoint was produced under `expected`.
    pub fn load_expecting(path: &Path, expected: &TrainConfig) -> Result<Self> {
        let ck = Self::load(path)?;
        ck.check_compatible(expected)?;
        Ok(ck)
    }

    pub fn check_compatible(&self, expected: &TrainConfig) -> Result<()> {
        if self.config.n_joints() != expected.n_joints() {
            return Err(ApexError::IncompatibleCheckpoint(format!(
                "checkpoint has {} joints, config has {}",
                self.config.n_joints(),
                expected.n_joints()
            )));
        }
        if self.config.hash() != expected.hash() {
            return Err(ApexError::IncompatibleCheckpoint(format!(
                "config hash {:016x} does not match checkpoint {:016x}",
                expected.hash(),
                self.config.hash()
            )));
        }
        Ok(())
    }
}

fn incompatible(what: &'static str) -> impl Fn(ApexError) -> ApexError {
    move |e| ApexError::IncompatibleCheckpoint(format!("{what}: {e}"))
}

fn network_sizes(cfg: &TrainConfig) -> [Vec<usize>; 2] {
    let n = cfg.n_joints();
    [
        sizes(actor_obs_dim(n, &cfg.variant), &cfg.network.actor_hidden, n),
        sizes(critic_obs_dim(n, &cfg.variant), &cfg.network.critic_hidden, 1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Variant;
    use crate::rng::seeded;

    fn sample() -> Checkpoint {
        let mut config = TrainConfig::new(Variant::ApexFull);
        config.network.actor_hidden = vec![6];
        config.network.critic_hidden = vec![5, 4];
        let n = config.n_joints();
        let mut rng = seeded(3, 0);
        let policy = GaussianPolicy::new(actor_obs_dim(n, &config.variant), n, &config.network, &mut rng).unwrap();
        let critics = CriticPair::new(critic_obs_dim(n, &config.variant), &config.network, &mut rng).unwrap();
        Checkpoint {
            config,
            seed: 3,
            clock: TrainingClock::new(12345),
            policy,
            critics,
        }
    }

    #[test]
    fn byte_round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.clock.t, 12345);
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = std::env::temp_dir().join(format!("apex-ckpt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        let first = fs::read(&path).unwrap();
        Checkpoint::load(&path).unwrap().save(&path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(Checkpoint::sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side.arrays.len(), 4);
        assert_eq!(side.arrays[0].len, ck.policy.mean_net.num_params());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn corrupted_or_mismatched_files_are_rejected() {
        let ck = sample();
        let mut bytes = ck.to_bytes();
        bytes[8] = 9; // version
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(ApexError::IncompatibleCheckpoint(_))));
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut other = TrainConfig::new(Variant::ApexFull);
        other.chain = crate::dynamics::ChainParams::uniform(6);
        assert!(matches!(ck.check_compatible(&other), Err(ApexError::IncompatibleCheckpoint(_))));
        let mut tweaked = ck.config.clone();
        tweaked.ppo.lr = 0.5;
        assert!(ck.check_compatible(&tweaked).is_err());
        assert!(ck.check_compatible(&ck.config).is_ok());
    }
}
