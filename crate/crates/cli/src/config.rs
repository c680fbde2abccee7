//! JSON run configuration.
//!
//! A run file names a variant and optionally overrides any section of the
//! training configuration. Sections are merged key by key onto the
//! variant's defaults, so a file only lists what it changes:
//!
//! ```json
//! { "variant": "APEX", "seeds": [0, 1, 2], "ppo": { "iterations": 200 } }
//! ```

use std::path::{Path, PathBuf};

use apex::{ApexError, TrainConfig, Variant, VariantConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "APEX_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    variant: Variant,
    /// Optional explicit flags; must match the variant's row of the matrix.
    #[serde(default)]
    flags: Option<VariantConfig>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    chain: Option<Value>,
    #[serde(default)]
    gains: Option<Value>,
    #[serde(default)]
    gaits: Option<Value>,
    #[serde(default)]
    train_gaits: Option<Value>,
    #[serde(default)]
    rewards: Option<Value>,
    #[serde(default)]
    prior: Option<Value>,
    #[serde(default)]
    ppo: Option<Value>,
    #[serde(default)]
    dr: Option<Value>,
    #[serde(default)]
    network: Option<Value>,
    #[serde(default)]
    obs_scale: Option<Value>,
    #[serde(default)]
    episode_steps: Option<Value>,
    #[serde(default)]
    divergence_threshold: Option<Value>,
    #[serde(default)]
    eval_steps: Option<Value>,
}

/// A validated run: the full training configuration plus seeds and where
/// outputs go.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for `variant`: seed 0, output under [`DEFAULT_OUT_DIR`].
    pub fn defaults(variant: Variant) -> Self {
        Self {
            train: TrainConfig::new(variant),
            seeds: vec![0],
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawRunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))?;
        if let Some(flags) = raw.flags {
            if flags.name != raw.variant {
                return Err(CliError::Config(format!(
                    "flags are for {} but the variant is {}",
                    flags.name, raw.variant
                )));
            }
            flags.validate().map_err(|e| CliError::Config(format!("flags: {e}")))?;
        }
        let mut base = serde_json::to_value(TrainConfig::new(raw.variant)).expect("config serializes");
        let sections = [
            ("chain", &raw.chain),
            ("gains", &raw.gains),
            ("gaits", &raw.gaits),
            ("train_gaits", &raw.train_gaits),
            ("rewards", &raw.rewards),
            ("prior", &raw.prior),
            ("ppo", &raw.ppo),
            ("dr", &raw.dr),
            ("network", &raw.network),
            ("obs_scale", &raw.obs_scale),
            ("episode_steps", &raw.episode_steps),
            ("divergence_threshold", &raw.divergence_threshold),
            ("eval_steps", &raw.eval_steps),
        ];
        let obj = base.as_object_mut().expect("config is an object");
        for (key, value) in sections {
            if let Some(v) = value {
                merge(obj.get_mut(key).expect("known section"), v);
            }
        }
        let train: TrainConfig = serde_json::from_value(base).map_err(|e| CliError::Config(format!("{e}")))?;
        train.validate().map_err(config_error)?;
        let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(CliError::Config("seeds: at least one seed is required".into()));
        }
        Ok(Self {
            train,
            seeds,
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies the output-directory precedence: flag, then environment,
    /// then the file.
    pub fn resolve_out_dir(&mut self, flag: Option<&Path>, env: Option<&str>) {
        if let Some(p) = flag {
            self.out_dir = p.to_path_buf();
        } else if let Some(e) = env.filter(|e| !e.is_empty()) {
            self.out_dir = PathBuf::from(e);
        }
    }

    /// Full JSON form, accepted back by [`RunConfig::from_json`].
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(&self.train).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        let flags = obj.remove("variant").expect("variant present");
        obj.insert("variant".into(), Value::String(self.train.variant.name.name().into()));
        obj.insert("flags".into(), flags);
        obj.insert("seeds".into(), serde_json::to_value(&self.seeds).expect("seeds serialize"));
        obj.insert("out_dir".into(), Value::String(self.out_dir.display().to_string()));
        serde_json::to_string_pretty(&v).expect("config serializes")
    }
}

fn config_error(e: ApexError) -> CliError {
    CliError::Config(e.to_string())
}

/// Recursively overlays `patch` onto `base`. Objects merge per key; any
/// other value replaces.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => merge_maps(b, p),
        (b, p) => *b = p.clone(),
    }
}

fn merge_maps(base: &mut Map<String, Value>, patch: &Map<String, Value>) {
    for (k, v) in patch {
        match base.get_mut(k) {
            Some(slot) => merge(slot, v),
            None => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Parses `"1,2,3"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let seeds = s
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| CliError::Usage(format!("bad seed {p:?} in {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(CliError::Usage("empty seed list".into()));
    }
    Ok(seeds)
}

/// Parses a selector written `M/N`: gait `M` of an `N`-gait library.
pub fn parse_selector(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("selector {s:?} is not of the form M/N"));
    let (m, n) = s.split_once('/').ok_or_else(bad)?;
    let m: usize = m.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || m >= n {
        return Err(CliError::Usage(format!("selector {s:?}: need 0 <= M < N")));
    }
    Ok((m, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gives_variant_defaults() {
        let rc = RunConfig::from_json(r#"{"variant": "DM_NIA"}"#).unwrap();
        assert_eq!(rc.train, TrainConfig::new(Variant::DmNia));
        assert_eq!(rc.seeds, vec![0]);
    }

    #[test]
    fn partial_sections_merge() {
        let rc = RunConfig::from_json(r#"{"variant": "APEX", "ppo": {"iterations": 7}, "rewards": {"joint_track": {"sigma": 0.1}}}"#).unwrap();
        assert_eq!(rc.train.ppo.iterations, 7);
        assert_eq!(rc.train.ppo.horizon, 42);
        assert_eq!(rc.train.rewards.joint_track.sigma, 0.1);
        assert_eq!(rc.train.rewards.joint_track.weight, 1.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            r#"{"variant": "APEX", "colour": 1}"#,
            r#"{"variant": "APEX", "ppo": {"lr_typo": 1}}"#,
            r#"{"variant": "APEX", "rewards": {"joint_track": {"weight": 1, "extra": 2}}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn flags_must_match_the_matrix() {
        let ok = r#"{"variant": "APEX", "flags": {"name": "APEX", "prior_enabled": true, "phase_in_actor": false, "ref_in_actor": false, "rsi_enabled": false}}"#;
        assert!(RunConfig::from_json(ok).is_ok());
        let bad = ok.replace(r#""rsi_enabled": false"#, r#""rsi_enabled": true"#);
        assert!(RunConfig::from_json(&bad).is_err());
        let other = ok.replace(r#""name": "APEX""#, r#""name": "DM_NIA""#);
        assert!(RunConfig::from_json(&other).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"variant": "APEX", "ppo": {"clip_eps": 0.9}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"variant": "APEX", "seeds": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"variant": "NOPE"}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rc = RunConfig::defaults(Variant::ApexFull);
        rc.seeds = vec![3, 4];
        rc.train.ppo.iterations = 11;
        assert_eq!(RunConfig::from_json(&rc.to_json()).unwrap(), rc);
    }

    #[test]
    fn out_dir_precedence() {
        let mut rc = RunConfig::defaults(Variant::Apex);
        rc.resolve_out_dir(None, Some("from_env"));
        assert_eq!(rc.out_dir, PathBuf::from("from_env"));
        rc.resolve_out_dir(Some(Path::new("from_flag")), Some("from_env"));
        assert_eq!(rc.out_dir, PathBuf::from("from_flag"));
        rc.resolve_out_dir(None, Some(""));
        assert_eq!(rc.out_dir, PathBuf::from("from_flag"));
    }

    #[test]
    fn seed_and_selector_parsing() {
        assert_eq!(parse_seeds("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_seeds("1,x").is_err());
        assert_eq!(parse_selector("2/4").unwrap(), (2, 4));
        assert!(parse_selector("4/4").is_err());
        assert!(parse_selector("2").is_err());
    }
}
