//! Campaign configuration and its flat `key: value` text format.
//!
//! ```text
//! # comments run to end of line
//! problem_name: ackley10
//! p_fb: 0.25
//! selector = bald        # `=` works as a separator too
//! ```
//!
//! Keys are the [`CampaignConfig`] field names. Unspecified keys take the
//! defaults documented on each field.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testbed::problems;

macro_rules! text_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{other}` is not one of {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

/// Largest network the dense `P x P` Laplace factors are built for.
pub const MAX_NETWORK_PARAMS: usize = 8192;

text_enum!(SurrogateKind { Gp => "gp", LaplaceMlp => "laplace_mlp" });
text_enum!(KernelKind { Matern52 => "matern52", Tanimoto => "tanimoto" });
text_enum!(SelectorKind { Random => "random", Bald => "bald", Sdiff => "sdiff", Ldiff => "ldiff" });
text_enum!(ExpertKind { Hint => "hint", Constraint => "constraint", None => "none", Human => "human" });
text_enum!(Mode { Sim => "sim", Live => "live" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// One of `ackley10`, `levy10`, `rastrigin10`, `hartmann6`, `fingerprints`.
    pub problem_name: String,
    /// Defaults to the problem's dimension; required for `fingerprints`.
    pub dimension: usize,
    /// Box bounds, default to the problem's standard domain.
    pub lb: f64,
    pub ub: f64,
    /// Default `gp`.
    pub surrogate_kind: SurrogateKind,
    /// Default `matern52` (`tanimoto` for `fingerprints`).
    pub kernel_kind: KernelKind,
    /// Default 10.
    pub n_init: usize,
    /// Number of BO iterations `T`, default 100.
    pub horizon: usize,
    /// Default 1024.
    pub pool_size: usize,
    /// Default 1.0.
    pub gamma0: f64,
    /// Per-iteration multiplicative decay of γ, default 1.0 (constant).
    pub gamma_decay: f64,
    /// Probability of a feedback event per iteration, default 0.1.
    pub p_fb: f64,
    /// Labels per feedback event `k`, default 3.
    pub pairs_per_event: usize,
    /// Default `random`.
    pub selector: SelectorKind,
    /// Default `hint`.
    pub expert_kind: ExpertKind,
    /// Constraint radius; defaults to 100 for ackley10 and 22 for levy10.
    pub constraint_c: Option<f64>,
    /// Default 0.
    pub seed: u64,
    /// Default `sim`.
    pub mode: Mode,
    /// Fingerprint CSV for the `fingerprints` problem.
    pub dataset_path: Option<PathBuf>,
    /// Z-score `f̂` and `r̂` over the pool before combining. Default false.
    pub zscore_combine: bool,
    /// Prior precision of the preference network, default 1.0.
    pub pref_prior_precision: f64,
    /// Pause between BO iterations in live mode (ms), default 0.
    pub iteration_delay_ms: u64,
}

const KEYS: &[&str] = &[
    "problem_name",
    "dimension",
    "lb",
    "ub",
    "surrogate_kind",
    "kernel_kind",
    "n_init",
    "horizon",
    "pool_size",
    "gamma0",
    "gamma_decay",
    "p_fb",
    "pairs_per_event",
    "selector",
    "expert_kind",
    "constraint_c",
    "seed",
    "mode",
    "dataset_path",
    "zscore_combine",
    "pref_prior_precision",
    "iteration_delay_ms",
];

impl CampaignConfig {
    /// Defaults for a named problem.
    pub fn for_problem(problem_name: &str) -> Result<Self> {
        let (dimension, lb, ub, kernel_kind) = if problem_name == problems::FINGERPRINTS {
            (0, 0.0, 1.0, KernelKind::Tanimoto)
        } else {
            let spec = problems::standard_domain(problem_name)
                .ok_or_else(|| Error::config("problem_name", format!("unknown problem `{problem_name}`")))?;
            (spec.0, spec.1, spec.2, KernelKind::Matern52)
        };
        Ok(Self {
            problem_name: problem_name.to_string(),
            dimension,
            lb,
            ub,
            surrogate_kind: SurrogateKind::Gp,
            kernel_kind,
            n_init: 10,
            horizon: 100,
            pool_size: 1024,
            gamma0: 1.0,
            gamma_decay: 1.0,
            p_fb: 0.1,
            pairs_per_event: 3,
            selector: SelectorKind::Random,
            expert_kind: ExpertKind::Hint,
            constraint_c: problems::default_constraint_radius(problem_name),
            seed: 0,
            mode: Mode::Sim,
            dataset_path: None,
            zscore_combine: false,
            pref_prior_precision: 1.0,
            iteration_delay_ms: 0,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let idx = line
                .find([':', '='])
                .ok_or_else(|| Error::config(line, format!("line {} has no `:` or `=` separator", lineno + 1)))?;
            let key = line[..idx].trim().to_string();
            let value = unquote(line[idx + 1..].trim()).to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(&key, "unknown key"));
            }
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::config(&key, "given more than once"));
            }
            entries.push((key, value));
        }

        let problem = entries
            .iter()
            .find(|(k, _)| k == "problem_name")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::config("problem_name", "required"))?;
        let mut cfg = Self::for_problem(&problem)?;
        for (key, value) in &entries {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem_name" => {}
            "dimension" => self.dimension = parse_value(key, value)?,
            "lb" => self.lb = parse_value(key, value)?,
            "ub" => self.ub = parse_value(key, value)?,
            "surrogate_kind" => self.surrogate_kind = parse_value(key, value)?,
            "kernel_kind" => self.kernel_kind = parse_value(key, value)?,
            "n_init" => self.n_init = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "pool_size" => self.pool_size = parse_value(key, value)?,
            "gamma0" => self.gamma0 = parse_value(key, value)?,
            "gamma_decay" => self.gamma_decay = parse_value(key, value)?,
            "p_fb" => self.p_fb = parse_value(key, value)?,
            "pairs_per_event" => self.pairs_per_event = parse_value(key, value)?,
            "selector" => self.selector = parse_value(key, value)?,
            "expert_kind" => self.expert_kind = parse_value(key, value)?,
            "constraint_c" => self.constraint_c = Some(parse_value(key, value)?),
            "seed" => self.seed = parse_value(key, value)?,
            "mode" => self.mode = parse_value(key, value)?,
            "dataset_path" => self.dataset_path = Some(PathBuf::from(value)),
            "zscore_combine" => self.zscore_combine = parse_value(key, value)?,
            "pref_prior_precision" => self.pref_prior_precision = parse_value(key, value)?,
            "iteration_delay_ms" => self.iteration_delay_ms = parse_value(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Checks every invariant, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        let fingerprints = self.problem_name == problems::FINGERPRINTS;
        if fingerprints {
            if self.dataset_path.is_none() {
                return Err(Error::config("dataset_path", "required for the fingerprints problem"));
            }
            if self.dimension == 0 {
                return Err(Error::config("dimension", "required for the fingerprints problem"));
            }
            if self.kernel_kind != KernelKind::Tanimoto && self.surrogate_kind == SurrogateKind::Gp {
                return Err(Error::config("kernel_kind", "fingerprints need the tanimoto kernel"));
            }
            if self.lb != 0.0 || self.ub != 1.0 {
                return Err(Error::config("lb", "fingerprint bits live in [0, 1]"));
            }
        } else {
            let (d, ..) = problems::standard_domain(&self.problem_name)
                .ok_or_else(|| Error::config("problem_name", format!("unknown problem `{}`", self.problem_name)))?;
            if self.dimension != d {
                return Err(Error::config("dimension", format!("{} is fixed at {d}", self.problem_name)));
            }
            if self.kernel_kind == KernelKind::Tanimoto && self.surrogate_kind == SurrogateKind::Gp {
                return Err(Error::config("kernel_kind", "tanimoto needs binary inputs"));
            }
        }
        if !(self.lb.is_finite() && self.ub.is_finite() && self.lb < self.ub) {
            return Err(Error::config("ub", "bounds must be finite with lb < ub"));
        }
        if self.n_init < 2 {
            return Err(Error::config("n_init", "must be at least 2"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.pool_size < 2 {
            return Err(Error::config("pool_size", "must be at least 2"));
        }
        if self.pool_size > crate::acquisition::MAX_POOL {
            return Err(Error::config(
                "pool_size",
                format!("at most {} (dense sampling budget)", crate::acquisition::MAX_POOL),
            ));
        }
        if self.pairs_per_event < 1 {
            return Err(Error::config("pairs_per_event", "must be at least 1"));
        }
        if !(self.gamma0.is_finite() && self.gamma0 >= 0.0) {
            return Err(Error::config("gamma0", "must be a non-negative number"));
        }
        if !(self.gamma_decay > 0.0 && self.gamma_decay <= 1.0) {
            return Err(Error::config("gamma_decay", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.p_fb) {
            return Err(Error::config("p_fb", format!("{} is not a probability", self.p_fb)));
        }
        if !(self.pref_prior_precision.is_finite() && self.pref_prior_precision > 0.0) {
            return Err(Error::config("pref_prior_precision", "must be positive"));
        }
        match self.constraint_c {
            Some(c) if !(c.is_finite() && c >= 0.0) => {
                return Err(Error::config("constraint_c", "must be non-negative"));
            }
            None if self.expert_kind == ExpertKind::Constraint => {
                return Err(Error::config(
                    "constraint_c",
                    format!("no default radius for {}; set it explicitly", self.problem_name),
                ));
            }
            _ => {}
        }
        let uses_network = self.surrogate_kind == SurrogateKind::LaplaceMlp || self.expert_kind != ExpertKind::None;
        let n_params = crate::nn::MlpArchitecture::standard(self.dimension).n_params();
        if uses_network && n_params > MAX_NETWORK_PARAMS {
            return Err(Error::config(
                "dimension",
                format!(
                    "a {}-input network has {n_params} parameters; dense Laplace factors allow at most {MAX_NETWORK_PARAMS}",
                    self.dimension
                ),
            ));
        }
        if (self.expert_kind == ExpertKind::Human) != (self.mode == Mode::Live) {
            return Err(Error::config(
                "expert_kind",
                format!("expert_kind `{}` is incompatible with mode `{}`", self.expert_kind, self.mode),
            ));
        }
        Ok(())
    }

    /// Serializes every key; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(": ");
            out.push_str(&v);
            out.push('\n');
        };
        put("problem_name", self.problem_name.clone());
        put("dimension", self.dimension.to_string());
        put("lb", fmt_f64(self.lb));
        put("ub", fmt_f64(self.ub));
        put("surrogate_kind", self.surrogate_kind.to_string());
        put("kernel_kind", self.kernel_kind.to_string());
        put("n_init", self.n_init.to_string());
        put("horizon", self.horizon.to_string());
        put("pool_size", self.pool_size.to_string());
        put("gamma0", fmt_f64(self.gamma0));
        put("gamma_decay", fmt_f64(self.gamma_decay));
        put("p_fb", fmt_f64(self.p_fb));
        put("pairs_per_event", self.pairs_per_event.to_string());
        put("selector", self.selector.to_string());
        put("expert_kind", self.expert_kind.to_string());
        if let Some(c) = self.constraint_c {
            put("constraint_c", fmt_f64(c));
        }
        put("seed", self.seed.to_string());
        put("mode", self.mode.to_string());
        if let Some(p) = &self.dataset_path {
            put("dataset_path", p.display().to_string());
        }
        put("zscore_combine", self.zscore_combine.to_string());
        put("pref_prior_precision", fmt_f64(self.pref_prior_precision));
        put("iteration_delay_ms", self.iteration_delay_ms.to_string());
        out
    }

    /// Whether a feedback loop runs at all.
    pub fn feedback_enabled(&self) -> bool {
        self.expert_kind != ExpertKind::None
    }
}

impl FromStr for CampaignConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| v.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(v)
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    value
        .parse::<V>()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

// `{:?}` keeps a decimal point and round-trips exactly
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
