//! Run configuration: flat key-value file with flag overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::motion::{Family, Kernel};
use crate::optim::EnergyParams;
use crate::pipeline::{InitConfig, SegmentConfig};

/// Optional settings as read from a config file or given as flags. Keys and
/// flags share their names.
#[derive(Args, Deserialize, Clone, Debug, Default, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigOverrides {
    /// Events per window.
    #[arg(long)]
    pub events_per_window: Option<usize>,
    /// Events between consecutive window starts (defaults to the window size).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Candidate motion families, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Subdivision levels of the initialization.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Fit only the whole volume and the finest level.
    #[arg(long)]
    pub finest_only: Option<bool>,
    /// Potts weight.
    #[arg(long)]
    pub lambda_p: Option<f64>,
    /// Per-label cost.
    #[arg(long)]
    pub lambda_m: Option<f64>,
    /// Refitting kernel: gaussian or bilinear.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Gaussian kernel width in pixels.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Denoising radius in pixels; 0 disables denoising.
    #[arg(long)]
    pub denoise_radius: Option<u32>,
    /// Denoising time horizon in seconds.
    #[arg(long)]
    pub denoise_horizon: Option<f64>,
    /// Maximum labeling/refitting iterations per window.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Seed recorded with the outputs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every logical core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(skip)]
    pub out: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            events_per_window: self.events_per_window.or(base.events_per_window),
            stride: self.stride.or(base.stride),
            families: self.families.or(base.families),
            levels: self.levels.or(base.levels),
            finest_only: self.finest_only.or(base.finest_only),
            lambda_p: self.lambda_p.or(base.lambda_p),
            lambda_m: self.lambda_m.or(base.lambda_m),
            kernel: self.kernel.or(base.kernel),
            epsilon: self.epsilon.or(base.epsilon),
            denoise_radius: self.denoise_radius.or(base.denoise_radius),
            denoise_horizon: self.denoise_horizon.or(base.denoise_horizon),
            max_iters: self.max_iters.or(base.max_iters),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
        }
    }
}

/// Fully resolved settings of a segmentation run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub events_per_window: usize,
    pub stride: usize,
    pub families: Vec<Family>,
    pub levels: usize,
    pub finest_only: bool,
    pub lambda_p: f64,
    pub lambda_m: f64,
    pub kernel: KernelChoice,
    pub epsilon: f64,
    pub denoise_radius: u32,
    pub denoise_horizon: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelChoice {
    Bilinear,
    Gaussian,
}

impl std::str::FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(KernelChoice::Bilinear),
            "gaussian" => Ok(KernelChoice::Gaussian),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events_per_window: 20_000,
            stride: 20_000,
            families: vec![Family::Flow2],
            levels: 4,
            finest_only: false,
            lambda_p: 40.0,
            lambda_m: 8000.0,
            kernel: KernelChoice::Gaussian,
            epsilon: 1.0,
            denoise_radius: 0,
            denoise_horizon: 0.01,
            max_iters: 10,
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Applies `overrides` to the defaults and validates the result.
    pub fn resolve(overrides: ConfigOverrides) -> Result<Self> {
        let d = RunConfig::default();
        let events_per_window = overrides.events_per_window.unwrap_or(d.events_per_window);
        let families = match overrides.families {
            Some(names) => names
                .iter()
                .map(|n| n.trim().parse())
                .collect::<Result<Vec<Family>>>()?,
            None => d.families,
        };
        let kernel = match overrides.kernel {
            Some(k) => k.parse()?,
            None => d.kernel,
        };
        let config = RunConfig {
            events_per_window,
            stride: overrides.stride.unwrap_or(events_per_window),
            families,
            levels: overrides.levels.unwrap_or(d.levels),
            finest_only: overrides.finest_only.unwrap_or(d.finest_only),
            lambda_p: overrides.lambda_p.unwrap_or(d.lambda_p),
            lambda_m: overrides.lambda_m.unwrap_or(d.lambda_m),
            kernel,
            epsilon: overrides.epsilon.unwrap_or(d.epsilon),
            denoise_radius: overrides.denoise_radius.unwrap_or(d.denoise_radius),
            denoise_horizon: overrides.denoise_horizon.unwrap_or(d.denoise_horizon),
            max_iters: overrides.max_iters.unwrap_or(d.max_iters),
            seed: overrides.seed.unwrap_or(d.seed),
            threads: overrides.threads.unwrap_or(d.threads),
            out: overrides.out.unwrap_or(d.out),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.events_per_window == 0 {
            return bad("events-per-window must be at least 1".to_string());
        }
        if self.stride == 0 || self.stride > self.events_per_window {
            return bad(format!(
                "stride {} must lie in 1..={}",
                self.stride, self.events_per_window
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.denoise_radius > 0 && !(self.denoise_horizon.is_finite() && self.denoise_horizon > 0.0) {
            return bad(format!(
                "denoise-horizon must be positive, got {}",
                self.denoise_horizon
            ));
        }
        self.segment_config()?.init.validate()
    }

    pub fn refit_kernel(&self) -> Kernel {
        match self.kernel {
            KernelChoice::Bilinear => Kernel::Bilinear,
            KernelChoice::Gaussian => Kernel::Gaussian { sigma: self.epsilon },
        }
    }

    pub fn segment_config(&self) -> Result<SegmentConfig> {
        Ok(SegmentConfig {
            init: InitConfig {
                levels: self.levels,
                families: self.families.clone(),
                finest_only: self.finest_only,
                ..InitConfig::default()
            },
            energy: EnergyParams::new(self.lambda_p, self.lambda_m)?,
            refit_kernel: self.refit_kernel(),
            max_iters: self.max_iters,
            ..SegmentConfig::default()
        })
    }

    /// Flat key-value form, readable as a config file.
    pub fn to_text(&self) -> String {
        let families: Vec<String> = self.families.iter().map(|f| format!("\"{f}\"")).collect();
        let kernel = match self.kernel {
            KernelChoice::Bilinear => "bilinear",
            KernelChoice::Gaussian => "gaussian",
        };
        format!(
            "events-per-window = {}\nstride = {}\nfamilies = [{}]\nlevels = {}\nfinest-only = {}\n\
             lambda-p = {:?}\nlambda-m = {:?}\nkernel = \"{kernel}\"\nepsilon = {:?}\n\
             denoise-radius = {}\ndenoise-horizon = {:?}\nmax-iters = {}\nseed = {}\n",
            self.events_per_window,
            self.stride,
            families.join(", "),
            self.levels,
            self.finest_only,
            self.lambda_p,
            self.lambda_m,
            self.epsilon,
            self.denoise_radius,
            self.denoise_horizon,
            self.max_iters,
            self.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(ConfigOverrides::default()).unwrap();
        assert_eq!(c.events_per_window, 20_000);
        assert_eq!(c.stride, 20_000);
        assert_eq!(c.levels, 4);
        assert_eq!(c.lambda_p, 40.0);
        assert_eq!(c.lambda_m, 8000.0);
        assert_eq!(c.epsilon, 1.0);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigOverrides::parse("lambda-m = 100.0\nlevels = 2\nfamilies = [\"sim4\"]\n").unwrap();
        let flags = ConfigOverrides {
            lambda_m: Some(5.0),
            ..ConfigOverrides::default()
        };
        let c = RunConfig::resolve(flags.over(file)).unwrap();
        assert_eq!(c.lambda_m, 5.0);
        assert_eq!(c.levels, 2);
        assert_eq!(c.families, vec![Family::Sim4]);
    }

    #[test]
    fn stride_follows_window_size() {
        let c = RunConfig::resolve(ConfigOverrides::parse("events-per-window = 500").unwrap()).unwrap();
        assert_eq!(c.stride, 500);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ConfigOverrides::parse("lambda_p = 3.0").is_err());
        let bad = ConfigOverrides::parse("stride = 30000").unwrap();
        assert!(RunConfig::resolve(bad).is_err());
        let bad = ConfigOverrides::parse("kernel = \"box\"").unwrap();
        assert!(RunConfig::resolve(bad).is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let c = RunConfig {
            families: vec![Family::Flow2, Family::Rot3],
            denoise_radius: 2,
            ..RunConfig::default()
        };
        let back = RunConfig::resolve(ConfigOverrides::parse(&c.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
