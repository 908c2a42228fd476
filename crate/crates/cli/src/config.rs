use std::path::{Path, PathBuf};

use pqv_core::eval::CaseSpec;
use pqv_core::fixtures;
use pqv_core::generate::GenerateConfig;
use pqv_core::grid::{load_grid, GridModel};
use pqv_core::nn::{conv_chain, LayerSpec};
use pqv_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Grid JSON file, or `builtin:nine_bus`, `builtin:nine_bus_heavy`, `builtin:three_bus`.
    pub grid: String,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/dataset.pqvd`.
    pub dataset: Option<PathBuf>,
    /// Defaults to `<out_dir>/model.pqvm`.
    pub checkpoint: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            grid: format!("{BUILTIN_PREFIX}nine_bus_heavy"),
            out_dir: PathBuf::from("."),
            dataset: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub filters: [usize; 3],
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            filters: [20, 40, 80],
            hidden: 250,
        }
    }
}

impl ModelConfig {
    pub fn chain(&self) -> Vec<LayerSpec> {
        conv_chain(self.filters, self.hidden)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Cluster counts for the misclassification analysis.
    pub ks: Vec<usize>,
    /// Loss configurations to sweep; empty scores only the trained checkpoint.
    pub cases: Vec<CaseSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![3, 5, 10, 20],
            cases: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the generation, training and clustering seeds when set.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub generate: GenerateConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
}

/// A config with every path made absolute and seed overrides applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: RunConfig,
    pub grid: GridSource,
    pub out_dir: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSource {
    Builtin(String),
    File(PathBuf),
}

impl GridSource {
    pub fn load(&self) -> Result<GridModel, CliError> {
        match self {
            GridSource::Builtin(name) => match name.as_str() {
                "nine_bus" => Ok(fixtures::nine_bus()),
                "nine_bus_heavy" => Ok(fixtures::nine_bus_heavy()),
                "three_bus" => Ok(fixtures::three_bus()),
                other => Err(CliError::Config(format!("unknown builtin grid `{other}`"))),
            },
            GridSource::File(path) => {
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "grid file {} not found",
                        path.display()
                    )));
                }
                Ok(load_grid(path)?)
            }
        }
    }
}

/// Reads an optional TOML file; relative paths inside it are taken from its directory.
pub fn load(path: Option<&Path>) -> Result<(RunConfig, PathBuf), CliError> {
    let Some(path) = path else {
        return Ok((RunConfig::default(), PathBuf::from(".")));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub fn resolve(
    mut run: RunConfig,
    base: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Resolved, CliError> {
    if let Some(s) = seed.or(run.seed) {
        run.seed = Some(s);
        run.generate.seed = s;
        run.train.seed = s;
    }
    let join = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let out_dir = out.unwrap_or_else(|| join(&run.paths.out_dir));
    let dataset = run
        .paths
        .dataset
        .as_deref()
        .map(join)
        .unwrap_or_else(|| out_dir.join("dataset.pqvd"));
    let checkpoint = run
        .paths
        .checkpoint
        .as_deref()
        .map(join)
        .unwrap_or_else(|| out_dir.join("model.pqvm"));
    let grid = match run.paths.grid.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => GridSource::Builtin(name.to_string()),
        None => GridSource::File(join(Path::new(&run.paths.grid))),
    };
    run.train.checkpoint = Some(checkpoint.clone());
    run.train.validate()?;
    if run.eval.ks.contains(&0) {
        return Err(CliError::Config(
            "cluster counts in eval.ks must be positive".into(),
        ));
    }
    Ok(Resolved {
        run,
        grid,
        out_dir,
        dataset,
        checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_reference_training_setup() {
        let run = RunConfig::default();
        assert_eq!(run.train.batch_size, 128);
        assert_eq!(run.train.max_epochs, 200);
        assert_eq!(run.train.patience, 30);
        assert_eq!(run.train.adam.lr, 1e-3);
        assert_eq!(
            run.model,
            ModelConfig {
                filters: [20, 40, 80],
                hidden: 250
            }
        );
    }

    #[test]
    fn paths_follow_the_config_directory() {
        let run: RunConfig = toml::from_str(
            r#"
            seed = 9
            [paths]
            grid = "grids/case.json"
            out_dir = "runs"
            "#,
        )
        .unwrap();
        let r = resolve(run, Path::new("/cfg"), None, None).unwrap();
        assert_eq!(
            r.grid,
            GridSource::File(PathBuf::from("/cfg/grids/case.json"))
        );
        assert_eq!(r.dataset, PathBuf::from("/cfg/runs/dataset.pqvd"));
        assert_eq!(r.checkpoint, PathBuf::from("/cfg/runs/model.pqvm"));
        assert_eq!((r.run.generate.seed, r.run.train.seed), (9, 9));

        let r = resolve(
            RunConfig::default(),
            Path::new("/cfg"),
            Some(4),
            Some(PathBuf::from("/tmp/o")),
        )
        .unwrap();
        assert_eq!(r.dataset, PathBuf::from("/tmp/o/dataset.pqvd"));
        assert_eq!(r.run.train.seed, 4);
    }

    #[test]
    fn reference_case_table_parses() {
        let run: RunConfig = toml::from_str(
            r#"
            [[eval.cases]]
            id = 6
            phi = 2.0
            alpha = [0.5, 0.0, 0.5, 0.5]
            "#,
        )
        .unwrap();
        assert_eq!(
            run.eval.cases,
            vec![CaseSpec {
                id: 6,
                phi: 2.0,
                alpha: [0.5, 0.0, 0.5, 0.5]
            }]
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
    }
}
