//! JSON experiment configs. Unknown keys are rejected; missing keys take the
//! desk-scale defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::GeometryConfig;
use crate::error::{Error, Result};
use crate::optimizer::OptimizerOptions;
use crate::pa::PaParams;
use crate::units::{db_to_linear, dbm_to_watts};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderKind {
    Mrt,
    Zf,
    Dab,
}

impl PrecoderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrecoderKind::Mrt => "mrt",
            PrecoderKind::Zf => "zf",
            PrecoderKind::Dab => "dab",
        }
    }
}

/// Amplifier coefficients as `[re, im]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaSection {
    pub beta1: [f64; 2],
    pub beta3: [f64; 2],
}

impl Default for PaSection {
    fn default() -> Self {
        let pa = PaParams::default();
        PaSection {
            beta1: [pa.beta1().re, pa.beta1().im],
            beta3: [pa.beta3().re, pa.beta3().im],
        }
    }
}

impl PaSection {
    pub fn params(&self, key: &str) -> Result<PaParams> {
        PaParams::new(
            C64::new(self.beta1[0], self.beta1[1]),
            C64::new(self.beta3[0], self.beta3[1]),
        )
        .map_err(|e| Error::config(key, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub antennas: usize,
    pub users: usize,
    pub paths: usize,
    pub gamma2_db: f64,
    pub aod_range_deg: [f64; 2],
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            antennas: 16,
            users: 2,
            paths: 10,
            gamma2_db: -110.0,
            aod_range_deg: [0.0, 180.0],
        }
    }
}

impl GeometrySection {
    pub fn geometry(&self) -> Result<GeometryConfig> {
        let g = GeometryConfig {
            antennas: self.antennas,
            users: self.users,
            paths: self.paths,
            gamma2: db_to_linear(self.gamma2_db),
            aod_range: self.aod_range_deg,
        };
        g.validate().map_err(|e| match e {
            Error::Config { key, message } => {
                let key = match key.as_str() {
                    "gamma2" => "gamma2_db".to_string(),
                    "aod_range" => "aod_range_deg".to_string(),
                    _ => key,
                };
                Error::config(&format!("geometry.{key}"), message)
            }
            other => other,
        })?;
        Ok(g)
    }
}

/// Optimizer settings. The seed is not configured here; it is derived per
/// job from the experiment's master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iters: usize,
    pub mu0: f64,
    pub n_random_inits: usize,
    pub include_mrt: bool,
    pub include_zf: bool,
    pub stall_tol: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            max_iters: 50,
            mu0: 1.0,
            n_random_inits: 16,
            include_mrt: true,
            include_zf: true,
            stall_tol: 0.0,
        }
    }
}

impl OptimizerSection {
    pub fn options(&self, seed: u64) -> Result<OptimizerOptions> {
        let opts = OptimizerOptions {
            max_iters: self.max_iters,
            mu0: self.mu0,
            n_random_inits: self.n_random_inits,
            include_mrt: self.include_mrt,
            include_zf: self.include_zf,
            seed,
            stall_tol: self.stall_tol,
        };
        opts.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(&format!("optimizer.{key}"), message),
            other => other,
        })?;
        Ok(opts)
    }
}

/// Sum-rate sweep and convergence experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub geometry: GeometrySection,
    pub pa: PaSection,
    pub p_tot_dbm: f64,
    pub snr_db_list: Vec<f64>,
    pub n_channels: usize,
    pub optimizer: OptimizerSection,
    pub precoders: Vec<PrecoderKind>,
    pub seed: u64,
    pub output_path: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            geometry: GeometrySection::default(),
            pa: PaSection::default(),
            p_tot_dbm: 43.0,
            snr_db_list: (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect(),
            n_channels: 100,
            optimizer: OptimizerSection::default(),
            precoders: vec![PrecoderKind::Mrt, PrecoderKind::Zf, PrecoderKind::Dab],
            seed: 0,
            output_path: PathBuf::from("sweep.csv"),
        }
    }
}

/// Validated, linear-unit view of a [`SweepConfig`].
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub geometry: GeometryConfig,
    pub pa: PaParams,
    pub p_tot: f64,
    pub snr_db: Vec<f64>,
    pub n_channels: usize,
    pub optimizer: OptimizerSection,
    pub precoders: Vec<PrecoderKind>,
    pub seed: u64,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn plan(&self) -> Result<SweepPlan> {
        let geometry = self.geometry.geometry()?;
        let pa = self.pa.params("pa")?;
        if !self.p_tot_dbm.is_finite() {
            return Err(Error::config("p_tot_dbm", "must be finite"));
        }
        if self.snr_db_list.is_empty() {
            return Err(Error::config("snr_db_list", "must not be empty"));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_db_list", "entries must be finite"));
        }
        if self.n_channels == 0 {
            return Err(Error::config("n_channels", "must be at least 1"));
        }
        if self.precoders.is_empty() {
            return Err(Error::config("precoders", "must list at least one of mrt, zf, dab"));
        }
        self.optimizer.options(0)?;
        Ok(SweepPlan {
            geometry,
            pa,
            p_tot: dbm_to_watts(self.p_tot_dbm),
            snr_db: self.snr_db_list.clone(),
            n_channels: self.n_channels,
            optimizer: self.optimizer.clone(),
            precoders: self.precoders.clone(),
            seed: self.seed,
        })
    }
}

/// Far-field radiation pattern experiment with fixed line-of-sight users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub user_aods_deg: Vec<f64>,
    pub snr_db: f64,
    pub pa: PaSection,
    pub antennas: usize,
    pub p_tot_dbm: f64,
    pub grid_step_deg: f64,
    pub optimizer: OptimizerSection,
    pub seed: u64,
    pub output_path: PathBuf,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            user_aods_deg: vec![90.0],
            snr_db: 30.0,
            pa: PaSection::default(),
            antennas: 16,
            p_tot_dbm: 43.0,
            grid_step_deg: crate::metrics::DEFAULT_GRID_STEP_DEG,
            optimizer: OptimizerSection::default(),
            seed: 0,
            output_path: PathBuf::from("pattern.csv"),
        }
    }
}

impl PatternConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_aods_deg.is_empty() {
            return Err(Error::config("user_aods_deg", "must list at least one user"));
        }
        if self.user_aods_deg.iter().any(|a| !(0.0..=180.0).contains(a)) {
            return Err(Error::config("user_aods_deg", "angles must lie in [0, 180] degrees"));
        }
        if self.antennas == 0 {
            return Err(Error::config("antennas", "must be at least 1"));
        }
        if !(self.grid_step_deg > 0.0) || !self.grid_step_deg.is_finite() {
            return Err(Error::config("grid_step_deg", "must be positive"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db", "must be finite"));
        }
        if !self.p_tot_dbm.is_finite() {
            return Err(Error::config("p_tot_dbm", "must be finite"));
        }
        self.pa.params("pa")?;
        self.optimizer.options(0)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SweepConfig::default().plan().unwrap();
        PatternConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let mut cfg = SweepConfig::default();
        cfg.seed = 17;
        cfg.snr_db_list = vec![-3.5, 12.25];
        cfg.pa.beta3 = [-0.1, 0.02];
        cfg.precoders = vec![PrecoderKind::Dab];
        let back = SweepConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);

        let mut pc = PatternConfig::default();
        pc.user_aods_deg = vec![30.0, 90.0];
        assert_eq!(PatternConfig::from_json(&pc.to_json()).unwrap(), pc);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = SweepConfig::from_json(r#"{"n_channels": 3, "geometry": {"users": 4}}"#).unwrap();
        assert_eq!(cfg.n_channels, 3);
        assert_eq!(cfg.geometry.users, 4);
        assert_eq!(cfg.geometry.antennas, 16);
        let plan = cfg.plan().unwrap();
        assert!((plan.geometry.gamma2 - 1e-11).abs() < 1e-23);
        assert!((plan.p_tot - 19.952_623_149_688_797).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(SweepConfig::from_json(r#"{"n_channel": 3}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"geometry": {"antenas": 3}}"#).is_err());
        assert!(PatternConfig::from_json(r#"{"optimizer": {"seed": 3}}"#).is_err());
    }

    #[test]
    fn invalid_fields_name_their_key() {
        let key_of = |cfg: SweepConfig| match cfg.plan() {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        };
        let mut cfg = SweepConfig::default();
        cfg.n_channels = 0;
        assert_eq!(key_of(cfg), "n_channels");
        let mut cfg = SweepConfig::default();
        cfg.snr_db_list.clear();
        assert_eq!(key_of(cfg), "snr_db_list");
        let mut cfg = SweepConfig::default();
        cfg.geometry.antennas = 0;
        assert_eq!(key_of(cfg), "geometry.antennas");
        let mut cfg = SweepConfig::default();
        cfg.optimizer.mu0 = 0.0;
        assert_eq!(key_of(cfg), "optimizer.mu0");
        let mut cfg = SweepConfig::default();
        cfg.pa.beta1 = [0.0, 0.0];
        assert_eq!(key_of(cfg), "pa");
    }
}
