//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use railcomfort::index::MeanRule;
use railcomfort::ingest::DatasetConfig;
use railcomfort::logit::FitConfig;
use railcomfort::report::DEFAULT_SMOOTHING_WINDOW;
use railcomfort::signal::FeatureSet;
use railcomfort::synth::LabelRule;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "RAILCOMFORT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

/// Every tunable key, all with defaults. Paths to inputs are per-command
/// arguments and not part of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rate_hz: f64,
    pub pulse_width_s: f64,
    pub feature_set: FeatureSet,
    pub clock_offset_s: f64,
    pub mean_subtract: bool,

    pub max_iterations: usize,
    pub tolerance: f64,
    pub ridge: f64,
    pub step_halving_limit: usize,
    pub threshold: f64,
    pub positive_weight: f64,

    pub mean_rule: MeanRule,
    pub smoothing_window: usize,
    pub label_rule: LabelRule,
    /// Overrides the seed in trip profiles when set.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DatasetConfig::default();
        let f = FitConfig::default();
        Self {
            rate_hz: d.rate_hz,
            pulse_width_s: d.pulse_width_s,
            feature_set: d.feature_set,
            clock_offset_s: d.clock_offset_s,
            mean_subtract: d.mean_subtract,
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            ridge: f.ridge,
            step_halving_limit: f.step_halving_limit,
            threshold: f.threshold,
            positive_weight: f.positive_weight,
            mean_rule: MeanRule::default(),
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            label_rule: LabelRule::default(),
            seed: None,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            jobs: 1,
        }
    }
}

/// Flags shared by every subcommand. Anything left unset falls through to
/// the config file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides $RAILCOMFORT_OUT_DIR and the config file).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for independent trips or lines.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[arg(long, global = true)]
    pub rate_hz: Option<f64>,
    #[arg(long, global = true)]
    pub pulse_width_s: Option<f64>,
    #[arg(long, global = true)]
    pub feature_set: Option<FeatureSet>,
    #[arg(long, global = true)]
    pub clock_offset_s: Option<f64>,
    #[arg(long, global = true)]
    pub mean_subtract: Option<bool>,
    #[arg(long, global = true)]
    pub ridge: Option<f64>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true, value_parser = parse_mean_rule)]
    pub mean_rule: Option<MeanRule>,
    #[arg(long, global = true)]
    pub smoothing_window: Option<usize>,
    #[arg(long, global = true, value_parser = parse_label_rule)]
    pub label_rule: Option<LabelRule>,
}

fn parse_mean_rule(s: &str) -> Result<MeanRule, String> {
    match s {
        "absolute" => Ok(MeanRule::Absolute),
        "signed" => Ok(MeanRule::Signed),
        _ => Err(format!("expected `absolute` or `signed`, got {s:?}")),
    }
}

fn parse_label_rule(s: &str) -> Result<LabelRule, String> {
    match s {
        "bernoulli" => Ok(LabelRule::Bernoulli),
        "threshold" => Ok(LabelRule::Threshold),
        _ => Err(format!("expected `bernoulli` or `threshold`, got {s:?}")),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map_or(1, |sp| 1 + text[..sp.start].matches('\n').count()),
            message: e.message().to_string(),
        })
    }

    /// defaults < file < environment (output directory only) < flags.
    pub fn resolve(args: &GlobalArgs, env_out_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let mut c = match &args.config {
            Some(path) => {
                let text = crate::commands::read_text(path)?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        if let Some(dir) = env_out_dir {
            c.out_dir = dir;
        }
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field.clone() { c.$field = v; })*
            };
        }
        overlay!(
            out_dir,
            jobs,
            rate_hz,
            pulse_width_s,
            feature_set,
            clock_offset_s,
            mean_subtract,
            ridge,
            threshold,
            max_iterations,
            mean_rule,
            smoothing_window,
            label_rule
        );
        if args.seed.is_some() {
            c.seed = args.seed;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dataset().validate()?;
        self.fit().validate()?;
        if self.jobs == 0 {
            return Err(railcomfort::Error::InvalidConfig("jobs must be at least 1".into()).into());
        }
        Ok(())
    }

    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            rate_hz: self.rate_hz,
            pulse_width_s: self.pulse_width_s,
            feature_set: self.feature_set,
            clock_offset_s: self.clock_offset_s,
            mean_subtract: self.mean_subtract,
        }
    }

    pub fn fit(&self) -> FitConfig {
        FitConfig {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ridge: self.ridge,
            step_halving_limit: self.step_halving_limit,
            threshold: self.threshold,
            positive_weight: self.positive_weight,
        }
    }

    /// The subset recorded in output documents. Paths and thread counts are
    /// left out so outputs do not depend on where or how the run happened.
    pub fn provenance(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
            obj.remove("jobs");
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "ridge = 0.5\nthreshold = 0.3\nout_dir = \"from_file\"\n").unwrap();
        let args = GlobalArgs {
            config: Some(path),
            threshold: Some(0.7),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args, None).unwrap();
        assert_eq!(c.ridge, 0.5);
        assert_eq!(c.threshold, 0.7);
        assert_eq!(c.rate_hz, 50.0);
        assert_eq!(c.out_dir, PathBuf::from("from_file"));

        let c = RunConfig::resolve(&args, Some("env".into())).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("env"));
        let args = GlobalArgs {
            out_dir: Some("flag".into()),
            ..args
        };
        let c = RunConfig::resolve(&args, Some("env".into())).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("flag"));
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let err = RunConfig::from_toml("rate_hz = 50.0\nbogus = 1\n", Path::new("c.toml")).unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let args = GlobalArgs {
            rate_hz: Some(-1.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());
        let args = GlobalArgs {
            jobs: Some(0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());
    }

    #[test]
    fn provenance_omits_run_location() {
        let v = RunConfig::default().provenance();
        assert!(v.get("out_dir").is_none());
        assert!(v.get("jobs").is_none());
        assert_eq!(v["feature_set"], "acceleration");
    }
}
