use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::MackeyGlass;
use crate::error::{Error, Result};
use crate::pso::{Dimension, PsoConstants, SearchSpace};
use crate::reservoir::HyperParameters;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Mackey,
    Melbourne,
    Pianomidi,
    CustomCsv,
}

impl TaskName {
    pub fn is_binary(self) -> bool {
        self == TaskName::Pianomidi
    }
}

/// Data source and preprocessing. Unset fields take task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub washout: Option<usize>,
    /// (train, validation, test) pair counts.
    pub splits: Option<[usize; 3]>,
    /// Trailing moving-average window applied before pairing.
    pub smoothing: Option<usize>,
    /// Min-max scale the series with the training range.
    #[serde(default)]
    pub min_max: bool,
    #[serde(default)]
    pub mackey: MackeyGlass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub breadth: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Network-wide neuron budget N_N.
    pub budget: usize,
    /// Reservoir counts N_L to partition into.
    pub layers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Leak,
    SpectralRadius,
    RecurrentSparsity,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Leak => "leak",
            SweepParameter::SpectralRadius => "spectral_radius",
            SweepParameter::RecurrentSparsity => "recurrent_sparsity",
        }
    }

    pub fn apply(self, hp: &mut HyperParameters, value: f64) {
        match self {
            SweepParameter::Leak => hp.leak = value,
            SweepParameter::SpectralRadius => hp.spectral_radius = value,
            SweepParameter::RecurrentSparsity => hp.recurrent_sparsity = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// (breadth, depth) cells.
    pub grid: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub constants: PsoConstants,
    /// Searched dimensions; defaults to [`default_search_space`].
    pub space: Option<SearchSpace>,
}

fn default_iterations() -> usize {
    20
}

fn default_particles() -> usize {
    16
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            iterations: default_iterations(),
            particles: default_particles(),
            constants: PsoConstants::default(),
            space: None,
        }
    }
}

impl PsoConfig {
    pub fn space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(default_search_space)
    }
}

/// Forecasting search space. Names match [`HyperParameters`] fields; norms
/// are searched in log10.
pub fn default_search_space() -> SearchSpace {
    SearchSpace {
        dims: vec![
            Dimension::continuous("spectral_radius", 0.1, 1.5),
            Dimension::continuous("leak", 0.01, 1.0),
            Dimension::log10("input_norm", -2.0, 1.0),
            Dimension::log10("feedforward_norm", -2.0, 1.0),
            Dimension::continuous("input_sparsity", 0.0, 0.95),
            Dimension::continuous("feedforward_sparsity", 0.0, 0.95),
            Dimension::continuous("recurrent_sparsity", 0.0, 0.95),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Estimate the local maximum Lyapunov exponent on validation inputs.
    #[serde(default = "yes")]
    pub lyapunov: bool,
    /// Use every n-th post-washout timestep for the estimate.
    #[serde(default = "one")]
    pub lyapunov_stride: usize,
    /// Emit separation-ratio points for the first repetition.
    #[serde(default)]
    pub separation: bool,
    #[serde(default = "max_pairs")]
    pub separation_pairs: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn max_pairs() -> usize {
    crate::diagnostics::DEFAULT_MAX_PAIRS
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            lyapunov: true,
            lyapunov_stride: 1,
            separation: false,
            separation_pairs: max_pairs(),
        }
    }
}

/// One experiment, read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskName,
    #[serde(default)]
    pub data: DataConfig,
    pub topology: Option<TopologyConfig>,
    pub partition: Option<PartitionConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub hyper: HyperParameters,
    pub pso: Option<PsoConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Explicit repetition seeds; when absent they derive from `seed`.
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_repetitions() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Fixed(TopologyConfig),
    Partition,
    Sweep,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let active = [
            self.topology.is_some(),
            self.partition.is_some(),
            self.sweep.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if active != 1 {
            return Err(Error::Config(format!(
                "exactly one of [topology], [partition], [sweep] must be set, found {active}"
            )));
        }
        if let Some(t) = self.topology {
            if t.breadth == 0 || t.depth == 0 {
                return Err(Error::Config(
                    "topology breadth and depth must be positive".into(),
                ));
            }
        }
        if let Some(p) = &self.partition {
            if p.layers.is_empty() || p.layers.contains(&0) {
                return Err(Error::Config(
                    "partition layers must be nonempty and positive".into(),
                ));
            }
            let max = *p.layers.iter().max().unwrap();
            if p.budget < max {
                return Err(Error::Config(format!(
                    "neuron budget {} is below the largest reservoir count {max}",
                    p.budget
                )));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.grid.is_empty() {
                return Err(Error::Config(
                    "sweep needs at least one value and one grid cell".into(),
                ));
            }
            if s.grid.iter().any(|c| c[0] == 0 || c[1] == 0) {
                return Err(Error::Config("sweep grid cells must be positive".into()));
            }
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) || self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        if self.task != TaskName::Mackey && self.data.path.is_none() {
            return Err(Error::Config(format!(
                "task {:?} needs data.path",
                self.task
            )));
        }
        if self.task == TaskName::CustomCsv && self.data.splits.is_none() {
            return Err(Error::Config("task custom_csv needs data.splits".into()));
        }
        if let Some(p) = &self.pso {
            p.space().validate()?;
            if p.iterations == 0 || p.particles == 0 {
                return Err(Error::Config(
                    "PSO needs positive iterations and particles".into(),
                ));
            }
        }
        if self.diagnostics.lyapunov_stride == 0 {
            return Err(Error::Config("lyapunov_stride must be positive".into()));
        }
        self.hyper.validate()
    }

    pub fn mode(&self) -> RunMode {
        match (self.topology, &self.partition) {
            (Some(t), _) => RunMode::Fixed(t),
            (None, Some(_)) => RunMode::Partition,
            _ => RunMode::Sweep,
        }
    }

    /// Per-repetition network seeds.
    pub fn repetition_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repetitions)
                .map(|i| derive_seed(self.seed, &format!("repetition/{i}")))
                .collect(),
        }
    }

    pub fn washout(&self) -> usize {
        self.data.washout.unwrap_or(match self.task {
            TaskName::Mackey => 100,
            TaskName::Melbourne => 30,
            TaskName::Pianomidi => 20,
            TaskName::CustomCsv => 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXED: &str = r#"
task = "mackey"
seeds = [1, 2]
[topology]
breadth = 2
depth = 3
[hyper]
neurons = 20
spectral_radius = 1.1
leak = 0.5
input_norm = 1.0
feedforward_norm = 0.5
input_sparsity = 0.0
feedforward_sparsity = 0.0
recurrent_sparsity = 0.5
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(FIXED).unwrap();
        assert_eq!(
            cfg.mode(),
            RunMode::Fixed(TopologyConfig {
                breadth: 2,
                depth: 3
            })
        );
        assert_eq!(cfg.repetition_seeds(), vec![1, 2]);
        assert_eq!(cfg.washout(), 100);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_ambiguous_modes() {
        let both = format!("{FIXED}\n[partition]\nbudget = 8\nlayers = [1, 2]\n");
        assert!(ExperimentConfig::from_toml(&both).is_err());
        let none = FIXED.replace("[topology]\nbreadth = 2\ndepth = 3\n", "");
        assert!(ExperimentConfig::from_toml(&none).is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_missing_paths() {
        assert!(ExperimentConfig::from_toml(&format!("bogus = 1\n{FIXED}")).is_err());
        let melb = FIXED.replace("\"mackey\"", "\"melbourne\"");
        assert!(ExperimentConfig::from_toml(&melb).is_err());
    }

    #[test]
    fn derived_seeds_are_stable() {
        let cfg =
            ExperimentConfig::from_toml(&FIXED.replace("seeds = [1, 2]\n", "repetitions = 3\n"))
                .unwrap();
        let s = cfg.repetition_seeds();
        assert_eq!(s.len(), 3);
        assert_eq!(s, cfg.repetition_seeds());
        assert_ne!(s[0], s[1]);
    }
}
