// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: one TOML file, then environment, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tal_core::detect::DetectorConfig;
use tal_core::forecast::{Family, ForecasterSpec};
use tal_core::ingest::{ArrayFormat, BehaviorKind};
use tal_core::signature::KMeansConfig;

use crate::outcome::usage;

pub const OUTPUT_ENV: &str = "TAL_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub output: PathBuf,
    /// Global seed; every per-channel stream is derived from it by label.
    pub seed: u64,
    /// Worker threads. Results do not depend on it.
    pub parallel: usize,
    pub architectures: Vec<ArchitectureEntry>,
    pub synth: SynthConfig,
    pub clustering: ClusteringConfig,
    pub detector: DetectorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data"),
            output: PathBuf::from("out"),
            seed: 0,
            parallel: 1,
            architectures: Family::ALL
                .iter()
                .map(|f| ArchitectureEntry::Preset(f.name().to_string()))
                .collect(),
            synth: SynthConfig::default(),
            clustering: ClusteringConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

/// A preset name, or a table that starts from a family preset and
/// overrides some of its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchitectureEntry {
    Preset(String),
    Custom(CustomArchitecture),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomArchitecture {
    /// Directory and report id; defaults to the family name.
    pub name: Option<String>,
    pub family: Family,
    pub window: Option<usize>,
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub base_lr: Option<f64>,
    pub lr_patience: Option<usize>,
    pub lr_factor: Option<f64>,
}

/// A resolved architecture. `spec.seed` is replaced per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub name: String,
    pub spec: ForecasterSpec,
}

impl Architecture {
    /// Spec for one channel, seeded from the global seed by architecture and channel id.
    pub fn spec_for(&self, global_seed: u64, channel: &str) -> ForecasterSpec {
        ForecasterSpec {
            seed: tal_core::seed::derive(global_seed, &format!("train/{}/{channel}", self.name)),
            ..self.spec.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub per_kind: usize,
    pub kinds: Vec<BehaviorKind>,
    pub train_len: usize,
    pub test_len: usize,
    /// Command columns next to the target.
    pub context: usize,
    /// Planted level shifts per channel.
    pub anomalies: usize,
    pub magnitude: f64,
    pub min_anomaly_len: usize,
    pub max_anomaly_len: usize,
    pub format: ArrayFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            per_kind: 20,
            kinds: BehaviorKind::ALL.to_vec(),
            train_len: 2000,
            test_len: 2000,
            context: 2,
            anomalies: 1,
            magnitude: 0.5,
            min_anomaly_len: 50,
            max_anomaly_len: 150,
            format: ArrayFormat::Npy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Fixed cluster count; `None` takes the elbow choice.
    pub k: Option<usize>,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        ClusteringConfig {
            k_min: 1,
            k_max: 10,
            k: None,
            restarts: km.restarts,
            max_iter: km.max_iter,
            tol: km.tol,
        }
    }
}

impl ClusteringConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    /// Applies `TAL_OUTPUT_DIR`, then flags. Flags win.
    pub fn apply(&mut self, env_output: Option<PathBuf>, flags: Overrides) {
        if let Some(out) = env_output {
            self.output = out;
        }
        if let Some(d) = flags.dataset {
            self.dataset = d;
        }
        if let Some(o) = flags.output {
            self.output = o;
        }
        if let Some(s) = flags.seed {
            self.seed = s;
        }
        if let Some(p) = flags.parallel {
            self.parallel = p;
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.parallel == 0 {
            return Err(usage("parallel must be at least 1"));
        }
        self.resolve_architectures()?;
        let s = &self.synth;
        if s.min_anomaly_len == 0 || s.max_anomaly_len < s.min_anomaly_len {
            return Err(usage(format!(
                "anomaly length range {}..={} is empty",
                s.min_anomaly_len, s.max_anomaly_len
            )));
        }
        if !(s.magnitude > 0.0 && s.magnitude.is_finite()) {
            return Err(usage(format!("magnitude must be positive, got {}", s.magnitude)));
        }
        let c = &self.clustering;
        if c.k == Some(0) || c.k_min == 0 || c.k_max < c.k_min {
            return Err(usage(format!(
                "invalid cluster range {}..={} (k {:?})",
                c.k_min, c.k_max, c.k
            )));
        }
        Ok(())
    }

    /// Architectures in configured order. Unknown presets, invalid specs and
    /// duplicate names are usage errors.
    pub fn resolve_architectures(&self) -> anyhow::Result<Vec<Architecture>> {
        let mut out: Vec<Architecture> = Vec::new();
        for entry in &self.architectures {
            let arch = match entry {
                ArchitectureEntry::Preset(name) => {
                    let family: Family = name.parse().map_err(|e| usage(format!("{e}")))?;
                    Architecture {
                        name: family.name().to_string(),
                        spec: ForecasterSpec::preset(family),
                    }
                }
                ArchitectureEntry::Custom(c) => {
                    let base = ForecasterSpec::preset(c.family);
                    Architecture {
                        name: c.name.clone().unwrap_or_else(|| c.family.name().to_string()),
                        spec: ForecasterSpec {
                            window: c.window.unwrap_or(base.window),
                            hidden: c.hidden.unwrap_or(base.hidden),
                            epochs: c.epochs.unwrap_or(base.epochs),
                            base_lr: c.base_lr.unwrap_or(base.base_lr),
                            lr_patience: c.lr_patience.unwrap_or(base.lr_patience),
                            lr_factor: c.lr_factor.unwrap_or(base.lr_factor),
                            ..base
                        },
                    }
                }
            };
            let valid_name = !arch.name.is_empty()
                && arch
                    .name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
            if !valid_name {
                return Err(usage(format!(
                    "architecture name {:?} must be alphanumeric, '_' or '-'",
                    arch.name
                )));
            }
            arch.spec
                .validate()
                .map_err(|e| usage(format!("architecture {}: {e}", arch.name)))?;
            if out.iter().any(|a| a.name == arch.name) {
                return Err(usage(format!("architecture {} listed twice", arch.name)));
            }
            out.push(arch);
        }
        if out.is_empty() {
            return Err(usage("no architectures configured"));
        }
        Ok(out)
    }

    /// SHA-256 of the canonical JSON of everything that affects results.
    /// Parallelism is excluded; object keys are sorted.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            parallel: 1,
            ..self.clone()
        };
        let value = serde_json::to_value(&canonical).expect("config serializes");
        let text = serde_json::to_string(&value).expect("json value serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_env_then_flags() {
        let mut c: RunConfig = toml::from_str("output = \"file\"\nseed = 3\n").unwrap();
        c.apply(
            Some("env".into()),
            Overrides {
                seed: Some(9),
                ..Overrides::default()
            },
        );
        assert_eq!(c.output, PathBuf::from("env"));
        assert_eq!(c.seed, 9);
        c.apply(
            Some("env".into()),
            Overrides {
                output: Some("flag".into()),
                ..Overrides::default()
            },
        );
        assert_eq!(c.output, PathBuf::from("flag"));
    }

    #[test]
    fn hash_ignores_parallelism_and_key_order() {
        let a: RunConfig = toml::from_str("seed = 1\nparallel = 4\n[synth]\nper_kind = 3\ncontext = 1\n").unwrap();
        let b: RunConfig = toml::from_str("[synth]\ncontext = 1\nper_kind = 3\n").unwrap();
        let b = RunConfig { seed: 1, ..b };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn custom_architectures_override_presets() {
        let c: RunConfig = toml::from_str(
            "architectures = [\"linear_ar\", { family = \"mlp\", name = \"mlp_small\", hidden = 4, window = 20 }]\n",
        )
        .unwrap();
        let archs = c.resolve_architectures().unwrap();
        assert_eq!(archs[0].spec, ForecasterSpec::preset(Family::LinearAr));
        assert_eq!(archs[1].name, "mlp_small");
        assert_eq!((archs[1].spec.hidden, archs[1].spec.window), (4, 20));
        assert_eq!(archs[1].spec.epochs, ForecasterSpec::preset(Family::Mlp).epochs);
    }

    #[test]
    fn bad_architectures_are_rejected() {
        for text in [
            "architectures = [\"transformer\"]",
            "architectures = []",
            "architectures = [\"mlp\", \"mlp\"]",
            "architectures = [{ family = \"mlp\", hidden = 0 }]",
            "architectures = [{ family = \"mlp\", name = \"../x\" }]",
        ] {
            let c: RunConfig = toml::from_str(text).unwrap();
            assert!(c.resolve_architectures().is_err(), "{text}");
        }
    }

    #[test]
    fn per_channel_seeds_differ() {
        let arch = RunConfig::default().resolve_architectures().unwrap().remove(2);
        assert_ne!(arch.spec_for(0, "a").seed, arch.spec_for(0, "b").seed);
        assert_eq!(arch.spec_for(5, "a"), arch.spec_for(5, "a"));
    }
}
