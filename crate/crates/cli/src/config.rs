//! Run configuration: `key = value` text files with `#` comments, every
//! key validated and typed, CLI flags layered on top.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use giam_core::models::{Activation, Variant};

#[derive(Debug, Clone)]
pub struct RunConfig {
    // Dataset paths.
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,

    // Synthetic generator.
    pub generator: Option<String>,
    pub n: usize,
    pub groups: usize,
    pub z_in: f64,
    pub z_out: f64,
    pub degree_exponent: f64,
    pub size_exponent: f64,
    pub mixing: f64,
    pub min_degree: usize,
    pub max_degree: usize,

    // Model.
    pub variant: Variant,
    pub k: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub activation: Option<Activation>,
    pub candidate_paths: Vec<String>,
    pub constrained: bool,

    // Training.
    pub learning_rate: f64,
    pub dropout: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
    pub train_count: Option<usize>,
    pub val_count: Option<usize>,
    pub train_frac: f64,
    pub val_frac: f64,

    // Evaluation.
    pub repeats: usize,
    pub kmeans_k: usize,

    // Diagnostics.
    pub k_list: Vec<usize>,
    pub c_max: usize,
    pub dense_grid: bool,

    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nodes: None,
            edges: None,
            features: None,
            labels: None,
            embeddings: None,
            checkpoint: None,
            generator: None,
            n: 128,
            groups: 4,
            z_in: 14.0,
            z_out: 2.0,
            degree_exponent: 2.5,
            size_exponent: 1.5,
            mixing: 0.1,
            min_degree: 5,
            max_degree: 50,
            variant: Variant::Giam,
            k: 10,
            hidden: 64,
            heads: 8,
            layers: 2,
            activation: None,
            candidate_paths: Vec::new(),
            constrained: true,
            learning_rate: 0.005,
            dropout: 0.5,
            patience: 50,
            max_epochs: 1000,
            weight_decay: 0.0,
            train_count: None,
            val_count: None,
            train_frac: 0.1,
            val_frac: 0.1,
            repeats: 10,
            kmeans_k: 0,
            k_list: vec![2, 6, 10],
            c_max: 16,
            dense_grid: false,
            seed: 0,
            out_dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("GIAM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

impl RunConfig {
    /// The effective activation: explicit key or the variant's default.
    pub fn activation(&self) -> Activation {
        self.activation.unwrap_or(self.variant.default_activation())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line_no = line_no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`, got `{raw}`"))?;
            let key = key.trim();
            let value = value.trim();
            config
                .set(key, value)
                .with_context(|| format!("line {line_no}: key `{key}`"))?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(value: &str, what: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| anyhow!("`{value}` is not a valid {what}"))
        }
        let path = |v: &str| Some(PathBuf::from(v));
        match key {
            "nodes" => self.nodes = path(value),
            "edges" => self.edges = path(value),
            "features" => self.features = path(value),
            "labels" => self.labels = path(value),
            "embeddings" => self.embeddings = path(value),
            "checkpoint" => self.checkpoint = path(value),
            "generator" => {
                if !matches!(value, "newman" | "powerlaw") {
                    bail!("`{value}` is not a generator (newman, powerlaw)");
                }
                self.generator = Some(value.to_string());
            }
            "n" => self.n = parse(value, "integer")?,
            "groups" => self.groups = parse(value, "integer")?,
            "z_in" => self.z_in = parse(value, "number")?,
            "z_out" => self.z_out = parse(value, "number")?,
            "degree_exponent" => self.degree_exponent = parse(value, "number")?,
            "size_exponent" => self.size_exponent = parse(value, "number")?,
            "mixing" => self.mixing = parse(value, "number")?,
            "min_degree" => self.min_degree = parse(value, "integer")?,
            "max_degree" => self.max_degree = parse(value, "integer")?,
            "variant" => {
                self.variant = Variant::parse(value).ok_or_else(|| {
                    anyhow!("`{value}` is not a variant (gcn, giam1, giam2, giam, giam3)")
                })?;
            }
            "k" => self.k = parse(value, "integer")?,
            "hidden" => self.hidden = parse(value, "integer")?,
            "heads" => self.heads = parse(value, "integer")?,
            "layers" => self.layers = parse(value, "integer")?,
            "activation" => {
                self.activation = Some(Activation::parse(value).ok_or_else(|| {
                    anyhow!("`{value}` is not an activation (identity, relu, elu)")
                })?);
            }
            "candidate_paths" => {
                self.candidate_paths = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
            }
            "constrained" => self.constrained = parse(value, "boolean")?,
            "lr" | "learning_rate" => self.learning_rate = parse(value, "number")?,
            "dropout" => self.dropout = parse(value, "number")?,
            "patience" => self.patience = parse(value, "integer")?,
            "max_epochs" => self.max_epochs = parse(value, "integer")?,
            "weight_decay" => self.weight_decay = parse(value, "number")?,
            "train_count" => self.train_count = Some(parse(value, "integer")?),
            "val_count" => self.val_count = Some(parse(value, "integer")?),
            "train_frac" => self.train_frac = parse(value, "number")?,
            "val_frac" => self.val_frac = parse(value, "number")?,
            "repeats" => self.repeats = parse(value, "integer")?,
            "kmeans_k" => self.kmeans_k = parse(value, "integer")?,
            "k_list" => {
                self.k_list = value
                    .split(',')
                    .map(|s| parse(s.trim(), "integer"))
                    .collect::<Result<Vec<usize>>>()?;
            }
            "c_max" => self.c_max = parse(value, "integer")?,
            "dense_grid" => self.dense_grid = parse(value, "boolean")?,
            "seed" => self.seed = parse(value, "integer")?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => bail!("unknown key"),
        }
        Ok(())
    }

    /// Cross-field rules shared by every subcommand that builds a model.
    pub fn validate_model(&self) -> Result<()> {
        if self.variant == Variant::Giam3 && self.candidate_paths.is_empty() {
            bail!("variant = giam3 requires candidate_paths");
        }
        if matches!(self.variant, Variant::Giam | Variant::Giam3) && self.hidden % self.heads != 0
        {
            bail!(
                "heads = {} must divide hidden = {}",
                self.heads,
                self.hidden
            );
        }
        if !(0.0..1.0).contains(&self.dropout) {
            bail!("dropout = {} not in [0, 1)", self.dropout);
        }
        if self.learning_rate <= 0.0 {
            bail!("lr must be positive");
        }
        if self.patience == 0 {
            bail!("patience must be at least 1");
        }
        Ok(())
    }

    /// The dataset must be loadable: either explicit tables or a generator.
    pub fn validate_dataset(&self) -> Result<()> {
        match (&self.nodes, &self.edges, &self.generator) {
            (Some(nodes), Some(edges), _) => {
                for (what, p) in [("nodes", nodes), ("edges", edges)] {
                    if !p.exists() {
                        bail!("{what} file {} does not exist", p.display());
                    }
                }
                Ok(())
            }
            (None, None, Some(_)) => Ok(()),
            _ => bail!("set either `nodes` and `edges` paths or a `generator`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let config = RunConfig::parse("").unwrap();
        assert_eq!(config.k, 10);
        assert_eq!(config.hidden, 64);
        assert_eq!(config.heads, 8);
        assert_eq!(config.learning_rate, 0.005);
        assert_eq!(config.dropout, 0.5);
        assert_eq!(config.patience, 50);
        assert_eq!(config.variant, Variant::Giam);
    }

    #[test]
    fn keys_are_parsed_and_comments_skipped() {
        let config = RunConfig::parse(
            "# a comment\nheads = 8\nvariant = giam2\nk = 6\ncandidate_paths = M-D-M, M-A-M\n",
        )
        .unwrap();
        assert_eq!(config.heads, 8);
        assert_eq!(config.variant, Variant::Giam2);
        assert_eq!(config.k, 6);
        assert_eq!(config.candidate_paths, vec!["M-D-M", "M-A-M"]);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = RunConfig::parse("k = 10\nwat = 3\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("wat"), "{msg}");
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = RunConfig::parse("\nk = banana\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("`k`"), "{msg}");
    }

    #[test]
    fn giam3_without_candidates_fails_validation() {
        let config = RunConfig::parse("variant = giam3\n").unwrap();
        let err = config.validate_model().unwrap_err();
        assert!(err.to_string().contains("candidate_paths"));
    }
}
