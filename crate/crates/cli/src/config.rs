//! Experiment configuration: a TOML document with typed fields.

use std::path::{Path, PathBuf};

use maxout_core::data::{
    gen_blobs, gen_circle, gen_rotation_manifold, load_delimited, load_idx, Dataset,
    DelimitedOptions,
};
use maxout_core::experiment::{default_lambda_grid, load_mnist, DEFAULT_HOLDOUT_FRACTION};
use maxout_core::linear::SgdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Unit counts; every command except `sweep` uses the first.
    #[serde(default = "default_m")]
    pub m: Vec<usize>,
    /// Pool sizes; every command except `sweep` uses the first.
    #[serde(default = "default_q")]
    pub q: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub normalization: NormalizationSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub embed: EmbedSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_m() -> Vec<usize> {
    vec![1000]
}

fn default_q() -> Vec<usize> {
    vec![4]
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Directory with the four standard MNIST IDX files.
    Mnist {
        dir: PathBuf,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
    },
    Delimited {
        path: PathBuf,
        test_path: Option<PathBuf>,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        label_first: bool,
    },
    /// Dataset container files written by this tool.
    Container {
        path: PathBuf,
        test_path: Option<PathBuf>,
    },
    Circle {
        n: usize,
        seed: u64,
    },
    /// Training and test sets are drawn with `seed` and `seed + 1`.
    Blobs {
        n_per_class: usize,
        test_per_class: usize,
        classes: usize,
        dim: usize,
        separation: f64,
        seed: u64,
    },
    Rotation {
        n_angles: usize,
        side: usize,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationSpec {
    #[default]
    None,
    UnitSphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Ridge {
        #[serde(default = "default_lambda_grid")]
        lambda_grid: Vec<f64>,
        #[serde(default = "default_holdout")]
        holdout_fraction: f64,
        #[serde(default = "default_true")]
        intercept: bool,
    },
    Logistic {
        epochs: usize,
        batch_size: usize,
        eta0: f64,
        t0: f64,
        l2: f64,
        #[serde(default = "default_true")]
        intercept: bool,
    },
}

fn default_holdout() -> f64 {
    DEFAULT_HOLDOUT_FRACTION
}

fn default_true() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Ridge {
            lambda_grid: default_lambda_grid(),
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            intercept: true,
        }
    }
}

impl ModelSpec {
    pub fn sgd(&self, seed: u64) -> Option<SgdConfig> {
        match *self {
            ModelSpec::Logistic {
                epochs,
                batch_size,
                eta0,
                t0,
                l2,
                intercept,
            } => Some(SgdConfig {
                epochs,
                batch_size,
                eta0,
                t0,
                l2,
                seed,
                intercept,
            }),
            ModelSpec::Ridge { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Also write all-pairs distance curves (requires unit-sphere rows).
    #[serde(default)]
    pub distance_curve: bool,
}

fn default_k() -> usize {
    2
}

impl Default for EmbedSpec {
    fn default() -> Self {
        Self {
            k: 2,
            distance_curve: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "default_probe_q")]
    pub q: Vec<usize>,
    #[serde(default = "default_rho_points")]
    pub rho_points: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probe_q() -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}

fn default_rho_points() -> usize {
    21
}

fn default_samples() -> usize {
    1_000_000
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            q: default_probe_q(),
            rho_points: default_rho_points(),
            samples: default_samples(),
            seed: 0,
        }
    }
}

impl ProbeSpec {
    /// Evenly spaced grid on `[-1, 1]`.
    pub fn rho_grid(&self) -> Vec<f64> {
        let n = self.rho_points;
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| (-1.0 + 2.0 * i as f64 / (n - 1) as f64).clamp(-1.0, 1.0))
            .collect()
    }
}

impl ExperimentConfig {
    /// Parses a config file. A report written by this tool is also accepted:
    /// its embedded `[config]` table is used.
    pub fn parse(text: &str) -> CliResult<Self> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config(format!("config parse error: {e}")))?;
        let cfg: ExperimentConfig = match value.get("config") {
            Some(toml::Value::Table(inner)) if !value.contains_key("dataset") => {
                inner.clone().try_into().map_err(|e: toml::de::Error| {
                    CliError::config(format!("config field error in [config]: {e}"))
                })?
            }
            _ => toml::from_str(text).map_err(|e: toml::de::Error| {
                CliError::config(format!("config field error: {e}"))
            })?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds: list must be nonempty"));
        }
        if self.m.is_empty() || self.m.contains(&0) {
            return Err(CliError::config("m: need at least one value, all ≥ 1"));
        }
        if self.q.is_empty() || self.q.contains(&0) {
            return Err(CliError::config("q: need at least one value, all ≥ 1"));
        }
        match &self.model {
            ModelSpec::Ridge {
                lambda_grid,
                holdout_fraction,
                ..
            } => {
                if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(*l > 0.0)) {
                    return Err(CliError::config(
                        "model.lambda_grid: values must be positive",
                    ));
                }
                if !(*holdout_fraction > 0.0 && *holdout_fraction < 1.0) {
                    return Err(CliError::config(
                        "model.holdout_fraction: must lie in (0, 1)",
                    ));
                }
            }
            ModelSpec::Logistic {
                epochs,
                batch_size,
                eta0,
                t0,
                l2,
                ..
            } => {
                if *epochs == 0
                    || *batch_size == 0
                    || !(*eta0 > 0.0)
                    || !(*t0 > 0.0)
                    || !(*l2 >= 0.0)
                {
                    return Err(CliError::config(
                        "model: epochs, batch_size, eta0, t0 must be positive and l2 non-negative",
                    ));
                }
            }
        }
        if self.embed.k == 0 {
            return Err(CliError::config("embed.k: must be ≥ 1"));
        }
        if self.probe.q.is_empty()
            || self.probe.q.contains(&0)
            || self.probe.rho_points == 0
            || self.probe.samples == 0
        {
            return Err(CliError::config(
                "probe: q values, rho_points and samples must be positive",
            ));
        }
        Ok(())
    }
}

/// Training split and optional test split.
pub struct Splits {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl DatasetSpec {
    pub fn load(&self) -> CliResult<Splits> {
        let opt = |p: &Option<PathBuf>, f: &dyn Fn(&Path) -> maxout_core::Result<Dataset>| {
            p.as_deref().map(f).transpose()
        };
        Ok(match self {
            DatasetSpec::Mnist { dir } => {
                let (train, test) = load_mnist(dir)?;
                Splits {
                    train,
                    test: Some(test),
                }
            }
            DatasetSpec::Idx {
                images,
                labels,
                test_images,
                test_labels,
            } => {
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(load_idx(i, l)?),
                    (None, None) => None,
                    _ => {
                        return Err(CliError::config(
                            "dataset: test_images and test_labels must be given together",
                        ))
                    }
                };
                Splits {
                    train: load_idx(images, labels)?,
                    test,
                }
            }
            DatasetSpec::Delimited {
                path,
                test_path,
                has_header,
                label_first,
            } => {
                let o = DelimitedOptions {
                    has_header: *has_header,
                    label_first: *label_first,
                };
                Splits {
                    train: load_delimited(path, o)?,
                    test: opt(test_path, &|p| load_delimited(p, o))?,
                }
            }
            DatasetSpec::Container { path, test_path } => Splits {
                train: Dataset::load(path)?,
                test: opt(test_path, &|p| Dataset::load(p))?,
            },
            DatasetSpec::Circle { n, seed } => Splits {
                train: gen_circle(*n, *seed)?,
                test: None,
            },
            DatasetSpec::Blobs {
                n_per_class,
                test_per_class,
                classes,
                dim,
                separation,
                seed,
            } => Splits {
                train: gen_blobs(*n_per_class, *classes, *dim, *separation, *seed)?,
                test: Some(gen_blobs(
                    *test_per_class,
                    *classes,
                    *dim,
                    *separation,
                    seed.wrapping_add(1),
                )?),
            },
            DatasetSpec::Rotation {
                n_angles,
                side,
                seed,
            } => Splits {
                train: gen_rotation_manifold(*n_angles, *side, *seed)?,
                test: None,
            },
        })
    }
}

impl Splits {
    pub fn normalized(self, n: NormalizationSpec) -> CliResult<Self> {
        match n {
            NormalizationSpec::None => Ok(self),
            NormalizationSpec::UnitSphere => Ok(Splits {
                train: self.train.normalized_to_sphere()?,
                test: self.test.map(|t| t.normalized_to_sphere()).transpose()?,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[dataset]
kind = "circle"
n = 10
seed = 3
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(c.m, vec![1000]);
        assert_eq!(c.model, ModelSpec::default());
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn roundtrip_is_lossless() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.model = ModelSpec::Logistic {
            epochs: 3,
            batch_size: 7,
            eta0: 0.123456789,
            t0: 1e3,
            l2: 1e-7,
            intercept: false,
        };
        c.q = vec![1, 2, 32];
        c.normalization = NormalizationSpec::UnitSphere;
        let back = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::parse(&format!("{MINIMAL}\nseeds = []\n")).unwrap_err();
        assert!(e.to_string().contains("seeds"), "{e}");
        let e = ExperimentConfig::parse(&format!("{MINIMAL}\nm = \"many\"\n")).unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let e =
            ExperimentConfig::parse("[dataset]\nkind = \"circle\"\nn = 1\nseed = 1\nbogus = 2\n")
                .unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn rho_grid_endpoints() {
        let g = ProbeSpec::default().rho_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[20], 1.0);
        assert!((g[10]).abs() < 1e-15);
    }
}
