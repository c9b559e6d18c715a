//! Estimator settings from an optional TOML file overlaid by command-line
//! flags (flags win).

use std::path::Path;

use fdastream_core::{BandwidthRule, DesignMode, GridSpec, KernelFamily, StreamConfig};
use serde::Deserialize;

use crate::error::{IoError, Result};

/// Every key is optional; unset keys keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Slots of both banks.
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Slots of the covariance bank, if different.
    #[serde(rename = "L_cov")]
    pub l_cov: Option<usize>,
    #[serde(rename = "J_mean")]
    pub j_mean: Option<usize>,
    #[serde(rename = "J_cov")]
    pub j_cov: Option<usize>,
    #[serde(rename = "G_mu")]
    pub g_mu: Option<f64>,
    #[serde(rename = "R_mu")]
    pub r_mu: Option<f64>,
    #[serde(rename = "G_gamma")]
    pub g_gamma: Option<f64>,
    #[serde(rename = "R_gamma")]
    pub r_gamma: Option<f64>,
    pub kernel: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub curve_points: Option<usize>,
    pub surface_points: Option<usize>,
    pub design_mode: Option<String>,
    pub freeze_mean_after: Option<u64>,
    pub freeze_cov_after: Option<u64>,
    pub theta_floor: Option<f64>,
    pub nu_floor: Option<f64>,
    pub trim: Option<f64>,
    pub presmooth_scale: Option<f64>,
    pub ridge: Option<f64>,
    /// Pinned bandwidths; both must be set to disable the plug-in rule.
    pub h_mu: Option<f64>,
    pub h_gamma: Option<f64>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: &Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: other.$f.clone().or(self.$f),)* } };
        }
        pick!(
            l,
            l_cov,
            j_mean,
            j_cov,
            g_mu,
            r_mu,
            g_gamma,
            r_gamma,
            kernel,
            lo,
            hi,
            curve_points,
            surface_points,
            design_mode,
            freeze_mean_after,
            freeze_cov_after,
            theta_floor,
            nu_floor,
            trim,
            presmooth_scale,
            ridge,
            h_mu,
            h_gamma
        )
    }

    pub fn stream_config(&self) -> Result<StreamConfig> {
        let l = self.l.unwrap_or(5);
        let mut c = StreamConfig::with_slots(l);
        c.slots_cov = self.l_cov.unwrap_or(l);
        let p = &mut c.pilots;
        macro_rules! set {
            ($($src:ident => $dst:expr),*) => { $(if let Some(v) = self.$src { $dst = v; })* };
        }
        set!(j_mean => p.j_mean, j_cov => p.j_cov, g_mu => p.g_mu, r_mu => p.r_mu,
             g_gamma => p.g_gamma, r_gamma => p.r_gamma, freeze_mean_after => p.freeze_mean_after,
             freeze_cov_after => p.freeze_cov_after, theta_floor => p.theta_floor,
             nu_floor => p.nu_floor, trim => p.trim, presmooth_scale => p.presmooth_scale,
             ridge => c.ridge);
        if let Some(k) = &self.kernel {
            c.kernel = KernelFamily::from_name(k)
                .ok_or_else(|| IoError::Config(format!("unknown kernel '{k}'")))?;
        }
        if let Some(m) = &self.design_mode {
            c.mode = DesignMode::from_name(m)
                .ok_or_else(|| IoError::Config(format!("unknown design mode '{m}'")))?;
        }
        let lo = self.lo.unwrap_or(0.0);
        let hi = self.hi.unwrap_or(1.0);
        c.curve_grid = GridSpec::new(lo, hi, self.curve_points.unwrap_or(101))?;
        c.surface_grid = GridSpec::new(lo, hi, self.surface_points.unwrap_or(51))?;
        c.rule = match (self.h_mu, self.h_gamma) {
            (Some(mu), Some(gamma)) => BandwidthRule::Pinned { mu, gamma },
            (None, None) => BandwidthRule::PlugIn,
            _ => {
                return Err(IoError::Config(
                    "h_mu and h_gamma must be pinned together".into(),
                ))
            }
        };
        c.validate()?;
        Ok(c)
    }
}
