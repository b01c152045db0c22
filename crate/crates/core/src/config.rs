//! TOML run configuration: `[model]`, `[network]`, `[verify]`, `[report]`
//! and `[constants]` sections, all optional.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::models::ModelSet;
use crate::netsim::{ActivationKind, LayerSpec, RandomNetwork};
use crate::verify::VerificationConfig;

fn default_beta() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Gmm {
        n: usize,
        subspaces: usize,
        dim: usize,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        basis_seed: u64,
    },
    Sparse {
        /// Matrix file with header `n L`; mutually exclusive with `identity`.
        #[serde(default)]
        dictionary: Option<PathBuf>,
        #[serde(default)]
        identity: Option<usize>,
        sparsity: usize,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    Cloud {
        path: PathBuf,
        #[serde(default = "default_beta")]
        beta: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSet> {
        match self {
            ModelConfig::Gmm {
                n,
                subspaces,
                dim,
                beta,
                basis_seed,
            } => ModelSet::random_gmm(*n, *subspaces, *dim, *beta, *basis_seed),
            ModelConfig::Sparse {
                dictionary,
                identity,
                sparsity,
                beta,
            } => match (dictionary, identity) {
                (Some(path), None) => ModelSet::sparse(io::load_matrix(path)?, *sparsity, *beta),
                (None, Some(n)) => ModelSet::sparse_identity(*n, *sparsity, *beta),
                _ => Err(Error::Config(
                    "sparse model needs exactly one of `dictionary` or `identity`".into(),
                )),
            },
            ModelConfig::Cloud { path, beta } => ModelSet::cloud(io::load_cloud(path)?, *beta),
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            ModelConfig::Sparse {
                dictionary: Some(p), ..
            } => *p = base.join(&*p),
            ModelConfig::Cloud { path, .. } => *path = base.join(&*path),
            _ => {}
        }
    }
}

/// Either an explicit layer list or the `input_dim` + `widths` shorthand.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layers: Option<Vec<LayerSpec>>,
    pub input_dim: Option<usize>,
    pub widths: Option<Vec<usize>>,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn build(&self) -> Result<RandomNetwork> {
        match (&self.layers, self.input_dim, &self.widths) {
            (Some(layers), None, None) => RandomNetwork::new(layers.clone()),
            (None, Some(n), Some(widths)) => RandomNetwork::uniform(n, widths, self.activation, self.seed),
            _ => Err(Error::Config(
                "network needs either `layers` or both `input_dim` and `widths`".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub hist_bins: usize,
    pub angle_bins: Vec<[f64; 2]>,
    pub pairs_per_bin: usize,
    pub depths: Vec<usize>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            hist_bins: 50,
            angle_bins: vec![[0.0, PI / 4.0], [PI / 4.0, PI / 2.0], [PI / 2.0, PI]],
            pairs_per_bin: 10_000,
            depths: vec![1],
        }
    }
}

/// Constants of the asymptotic bounds. None is known, so all default to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConstants {
    pub mean_width: f64,
    pub sudakov: f64,
    pub dudley: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            mean_width: 1.0,
            sudakov: 1.0,
            dudley: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub model: Option<ModelConfig>,
    pub network: Option<NetworkConfig>,
    pub verify: VerificationConfig,
    pub report: ReportConfig,
    pub constants: BoundConstants,
}

impl Config {
    /// Parses `text`; relative file paths are taken from `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(model) = cfg.model.as_mut() {
            model.resolve(base);
        }
        if let Some(seed) = cfg.seed {
            cfg.verify.seed = seed;
        }
        cfg.verify.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Config::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn model(&self) -> Result<ModelSet> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("no [model] section".into()))?
            .build()
    }

    pub fn network(&self) -> Result<RandomNetwork> {
        self.network
            .as_ref()
            .ok_or_else(|| Error::Config("no [network] section".into()))?
            .build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = Config::parse("", Path::new(".")).unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn full_config() {
        let text = r#"
seed = 7

[model]
kind = "gmm"
n = 20
subspaces = 3
dim = 2

[network]
input_dim = 20
widths = [100, 50]
activation = { kind = "capped_relu", cap = 0.5 }
seed = 3

[verify]
trials = 40
angle_bins = [[0.0, 0.5], [1.0, 1.0]]

[verify.hamming]
m_grid = [10, 100]

[report]
depths = [1, 2]
"#;
        let c = Config::parse(text, Path::new(".")).unwrap();
        assert_eq!(c.verify.seed, 7);
        assert_eq!(c.verify.trials, 40);
        assert_eq!(c.verify.m, 10_000);
        assert_eq!(c.verify.hamming.m_grid, vec![10, 100]);
        assert_eq!(c.model().unwrap().ambient_dim, 20);
        let net = c.network().unwrap();
        assert_eq!(net.widths(), vec![100, 50]);
        assert_eq!(net.layers[1].activation, ActivationKind::CappedRelu { cap: 0.5 });
    }

    #[test]
    fn explicit_layers() {
        let text = r#"
[[network.layers]]
n = 4
m = 8
seed = 1

[[network.layers]]
n = 8
m = 3
activation = { kind = "sign" }
seed = 2
"#;
        let net = Config::parse(text, Path::new(".")).unwrap().network().unwrap();
        assert_eq!(net.depth(), 2);
        let bad = "[[network.layers]]\nn = 4\nm = 8\nseed = 1\n[[network.layers]]\nn = 7\nm = 3\nseed = 2\n";
        assert!(Config::parse(bad, Path::new(".")).unwrap().network().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(Config::parse("[verify]\nbeta = 1.5\n", Path::new(".")).is_err());
        assert!(Config::parse("[verify]\nbogus = 1\n", Path::new(".")).is_err());
        assert!(Config::parse("[model]\nkind = \"sparse\"\nsparsity = 1\n", Path::new("."))
            .unwrap()
            .model()
            .is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = Config::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"));
    }

    #[test]
    fn relative_paths_follow_config() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("pts.txt"), "2 2\n0.5 0.5 0\n-0.5 0.5 1\n").unwrap();
        let cfg = dir.path().join("run.toml");
        fs::write(&cfg, "[model]\nkind = \"cloud\"\npath = \"pts.txt\"\n").unwrap();
        let model = Config::load(&cfg).unwrap().model().unwrap();
        assert_eq!(model.ambient_dim, 2);
    }
}
