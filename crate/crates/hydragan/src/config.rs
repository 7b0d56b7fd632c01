//! Flat `key=value` run configuration.
//!
//! One entry per line, `#` starts a comment line, blank lines are ignored.
//! Every key has a default, so an empty file is a valid configuration.
//! The canonical rendering lists every key in sorted order with its resolved
//! value; its SHA-256 is the config hash stamped on every artifact.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hydragan_core::evaluator::EmMode;
use hydragan_core::numcore::{Activation, OptimizerKind};
use hydragan_core::trainer::{
    DiscriminatorObjective, EquilibriumProbeConfig, GateScope, ReidSharing, TrainConfig,
};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub sliced: bool,
    /// Used only when `sliced` is set.
    pub projections: usize,
    /// Utility targets by column name; empty means every non-sensitive column.
    pub targets: Vec<String>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            sliced: false,
            projections: 64,
            targets: Vec::new(),
        }
    }
}

impl EvalSettings {
    pub fn em_mode(&self) -> EmMode {
        if self.sliced {
            EmMode::Sliced {
                projections: self.projections,
            }
        } else {
            EmMode::PerFeature
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub sensitive: Option<String>,
    pub output: Option<PathBuf>,
    /// Holds the run seed as `train.seed`.
    pub train: TrainConfig,
    /// `probe.seed` is ignored; the run seed is used.
    pub probe: EquilibriumProbeConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            sensitive: None,
            output: None,
            train: TrainConfig::default(),
            probe: EquilibriumProbeConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn render_list<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> CliResult<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("{key}: expected one of {}, got {value:?}", names.join(", ")))
        })
}

fn name_of<T: Copy + PartialEq>(v: T, options: &[(&'static str, T)]) -> &'static str {
    options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).expect("option listed")
}

const OPTIMIZERS: &[(&str, OptimizerKind)] = &[("rmsprop", OptimizerKind::Rmsprop), ("adam", OptimizerKind::Adam)];
const GATE_SCOPES: &[(&str, GateScope)] = &[("per_head", GateScope::PerHead), ("global", GateScope::Global)];
const SHARING: &[(&str, ReidSharing)] = &[("per_head", ReidSharing::PerHead), ("shared", ReidSharing::Shared)];
const EM_MODES: &[(&str, bool)] = &[("per_feature", false), ("sliced", true)];
const OBJECTIVES: &[(&str, DiscriminatorObjective)] = &[
    ("own", DiscriminatorObjective::Own),
    ("combined", DiscriminatorObjective::Combined),
];

/// Every recognised key, in canonical order.
pub const KEYS: &[&str] = &[
    "batch_size",
    "clip",
    "conv_channels",
    "conv_kernel",
    "critic_hidden",
    "critic_optimizer",
    "dataset",
    "discriminator_objective",
    "elbow_threshold",
    "em_gate",
    "epochs",
    "eval.em_mode",
    "eval.projections",
    "eval.targets",
    "gate_scope",
    "generator_optimizer",
    "head_widths",
    "hidden_activation",
    "init_scale",
    "k_max",
    "learning_rate",
    "n_critic",
    "n_heads",
    "noise_dim",
    "output",
    "probe.batch_size",
    "probe.epsilon",
    "probe.gamma",
    "probe.trials",
    "reid_enabled",
    "reid_optimizer",
    "reid_sharing",
    "seed",
    "sensitive",
    "trunk_widths",
    "w_reid",
];

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Probe settings with the run seed applied.
    pub fn probe_config(&self) -> EquilibriumProbeConfig {
        EquilibriumProbeConfig {
            seed: self.seed(),
            ..self.probe
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        let t = &mut self.train;
        let net = &mut t.network;
        match key {
            "dataset" => self.dataset = (!value.is_empty()).then(|| PathBuf::from(value)),
            "sensitive" => self.sensitive = (!value.is_empty()).then(|| value.to_owned()),
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "seed" => t.seed = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "clip" => t.clip = parse(key, value)?,
            "n_critic" => t.n_critic = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "w_reid" => t.w_reid = parse(key, value)?,
            "em_gate" => t.em_gate = parse(key, value)?,
            "gate_scope" => t.gate_scope = choice(key, value, GATE_SCOPES)?,
            "reid_sharing" => t.reid_sharing = choice(key, value, SHARING)?,
            "reid_enabled" => t.reid_enabled = parse_bool(key, value)?,
            "discriminator_objective" => t.discriminator_objective = choice(key, value, OBJECTIVES)?,
            "critic_optimizer" => t.critic_optimizer = choice(key, value, OPTIMIZERS)?,
            "generator_optimizer" => t.generator_optimizer = choice(key, value, OPTIMIZERS)?,
            "reid_optimizer" => t.reid_optimizer = choice(key, value, OPTIMIZERS)?,
            "n_heads" => {
                t.n_heads = if value == "auto" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "k_max" => t.k_max = parse(key, value)?,
            "elbow_threshold" => t.elbow_threshold = parse(key, value)?,
            "noise_dim" => net.noise_dim = parse(key, value)?,
            "trunk_widths" => net.trunk_widths = parse_list(key, value)?,
            "head_widths" => net.head_widths = parse_list(key, value)?,
            "critic_hidden" => net.critic_hidden = parse_list(key, value)?,
            "hidden_activation" => {
                net.hidden_activation = Activation::from_name(value)
                    .ok_or_else(|| CliError::Config(format!("{key}: unknown activation {value:?}")))?
            }
            "conv_kernel" => net.conv_kernel = parse(key, value)?,
            "conv_channels" => net.conv_channels = parse(key, value)?,
            "init_scale" => net.init_scale = parse(key, value)?,
            "probe.gamma" => self.probe.gamma = parse(key, value)?,
            "probe.epsilon" => self.probe.epsilon = parse(key, value)?,
            "probe.trials" => self.probe.trials = parse(key, value)?,
            "probe.batch_size" => self.probe.batch_size = parse(key, value)?,
            "eval.em_mode" => self.eval.sliced = choice(key, value, EM_MODES)?,
            "eval.projections" => self.eval.projections = parse(key, value)?,
            "eval.targets" => {
                self.eval.targets = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| s.trim().to_owned()).collect()
                }
            }
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` string.
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn parse_str(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_owned(), i + 1) {
                return Err(CliError::Config(format!("line {}: {k:?} already set on line {prev}", i + 1)));
            }
            cfg.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {}", i + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let t = &self.train;
        let net = &t.network;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let entries: Vec<(&str, String)> = vec![
            ("batch_size", t.batch_size.to_string()),
            ("clip", t.clip.to_string()),
            ("conv_channels", net.conv_channels.to_string()),
            ("conv_kernel", net.conv_kernel.to_string()),
            ("critic_hidden", render_list(&net.critic_hidden)),
            ("critic_optimizer", name_of(t.critic_optimizer, OPTIMIZERS).into()),
            ("dataset", path(&self.dataset)),
            ("discriminator_objective", name_of(t.discriminator_objective, OBJECTIVES).into()),
            ("elbow_threshold", t.elbow_threshold.to_string()),
            ("em_gate", t.em_gate.to_string()),
            ("epochs", t.epochs.to_string()),
            ("eval.em_mode", name_of(self.eval.sliced, EM_MODES).into()),
            ("eval.projections", self.eval.projections.to_string()),
            ("eval.targets", self.eval.targets.join(",")),
            ("gate_scope", name_of(t.gate_scope, GATE_SCOPES).into()),
            ("generator_optimizer", name_of(t.generator_optimizer, OPTIMIZERS).into()),
            ("head_widths", render_list(&net.head_widths)),
            ("hidden_activation", net.hidden_activation.name().into()),
            ("init_scale", net.init_scale.to_string()),
            ("k_max", t.k_max.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("n_critic", t.n_critic.to_string()),
            ("n_heads", t.n_heads.map_or_else(|| "auto".into(), |k| k.to_string())),
            ("noise_dim", net.noise_dim.to_string()),
            ("output", path(&self.output)),
            ("probe.batch_size", self.probe.batch_size.to_string()),
            ("probe.epsilon", self.probe.epsilon.to_string()),
            ("probe.gamma", self.probe.gamma.to_string()),
            ("probe.trials", self.probe.trials.to_string()),
            ("reid_enabled", t.reid_enabled.to_string()),
            ("reid_optimizer", name_of(t.reid_optimizer, OPTIMIZERS).into()),
            ("reid_sharing", name_of(t.reid_sharing, SHARING).into()),
            ("seed", t.seed.to_string()),
            ("sensitive", self.sensitive.clone().unwrap_or_default()),
            ("trunk_widths", render_list(&net.trunk_widths)),
            ("w_reid", t.w_reid.to_string()),
        ];
        entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in map {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn canonical(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Lowercase hex SHA-256 of the canonical rendering minus the `output`
    /// line, which does not influence any result.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_map()
            .iter()
            .filter(|(k, _)| k.as_str() != "output")
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        sha256_hex(text.as_bytes())
    }

    /// Checks the numeric settings without touching any files.
    pub fn validate(&self) -> CliResult<()> {
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.probe_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.eval.projections == 0 {
            return Err(CliError::Config("eval.projections must be positive".into()));
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> CliResult<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Config("no dataset given (set dataset= or --dataset)".into()))
    }

    pub fn require_sensitive(&self) -> CliResult<&str> {
        self.sensitive
            .as_deref()
            .ok_or_else(|| CliError::Config("no sensitive column given (set sensitive= or --sensitive)".into()))
    }

    pub fn require_output(&self) -> CliResult<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Config("no output path given (set output= or --output)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_match_rendering() {
        let map = RunConfig::default().to_map();
        let keys: Vec<&str> = map.keys().map(String::as_str).collect();
        assert_eq!(keys, KEYS);
    }

    #[test]
    fn defaults() {
        let c = RunConfig::parse_str("# nothing\n\n").unwrap();
        assert_eq!(c.train.learning_rate, 0.0002);
        assert_eq!(c.train.clip, 0.05);
        assert_eq!(c.train.em_gate, 0.3);
        assert_eq!(c.probe.gamma, 0.01);
        assert_eq!(c.probe.epsilon, 1e-3);
        assert_eq!(c.probe.trials, 64);
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn canonical_round_trip() {
        let mut c = RunConfig::default();
        for pair in [
            "learning_rate=0.00031",
            "n_heads=3",
            "trunk_widths=16, 8",
            "hidden_activation=leaky_relu",
            "eval.em_mode=sliced",
            "eval.projections=10",
            "eval.targets=a,b",
            "dataset=data/x.csv",
            "gate_scope=global",
        ] {
            c.set_pair(pair).unwrap();
        }
        let back = RunConfig::parse_str(&c.canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(RunConfig::from_map(&c.to_map()).unwrap(), c);
        assert_eq!(c.hash().len(), 64);
        assert_ne!(c.hash(), RunConfig::default().hash());
        let mut moved = c.clone();
        moved.set("output", "elsewhere").unwrap();
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn errors() {
        let code = |text: &str| RunConfig::parse_str(text).unwrap_err().exit_code();
        assert_eq!(code("nope=1"), 2);
        assert_eq!(code("epochs=ten"), 2);
        assert_eq!(code("epochs"), 2);
        assert_eq!(code("seed=1\nseed=2"), 2);
        assert_eq!(code("gate_scope=sideways"), 2);
        let msg = RunConfig::parse_str("clip=0.05\nepochs=x").unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }
}
