//! Geometric mmWave channel with a half-wavelength uniform linear array.
//!
//! `h_k = √(M/L) Σ_ℓ α_{k,ℓ} a(ψ_{k,ℓ})` with `α ~ CN(0, γ²)` and AoDs
//! drawn uniformly (in degrees) over the configured range, independently
//! for every user and path.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::C64;

/// Carrier frequency the default path loss was derived for. Documentation
/// only; no computation depends on it.
pub const CARRIER_HZ: f64 = 28e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub antennas: usize,
    pub users: usize,
    pub paths: usize,
    /// Average path loss γ², linear.
    pub gamma2: f64,
    /// AoD interval in degrees.
    pub aod_range: [f64; 2],
}

impl GeometryConfig {
    pub fn new(antennas: usize, users: usize, paths: usize, gamma2: f64) -> Self {
        GeometryConfig {
            antennas,
            users,
            paths,
            gamma2,
            aod_range: [0.0, 180.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, msg));
        if self.antennas == 0 {
            return bad("antennas", "must be at least 1");
        }
        if self.users == 0 {
            return bad("users", "must be at least 1");
        }
        if self.paths == 0 {
            return bad("paths", "must be at least 1");
        }
        if !(self.gamma2 > 0.0) || !self.gamma2.is_finite() {
            return bad("gamma2", "must be positive and finite");
        }
        let [lo, hi] = self.aod_range;
        if !(0.0..=180.0).contains(&lo) || !(0.0..=180.0).contains(&hi) || lo > hi {
            return bad("aod_range", "must be an ordered interval within [0, 180] degrees");
        }
        Ok(())
    }
}

/// Per-user channel vectors plus the geometry that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    vectors: Vec<DVector<C64>>,
    /// `aods[k][l]` in degrees; empty when built from raw vectors.
    aods: Vec<Vec<f64>>,
    gains: Vec<Vec<C64>>,
    seed: Option<u64>,
}

impl ChannelSet {
    /// Wraps arbitrary channel vectors (all of the same length).
    pub fn from_vectors(vectors: Vec<DVector<C64>>) -> Result<Self> {
        let m = match vectors.first() {
            Some(v) if !v.is_empty() => v.len(),
            _ => return Err(Error::InvalidInput("need at least one nonempty channel".into())),
        };
        if vectors.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidInput("channel vectors differ in length".into()));
        }
        if vectors
            .iter()
            .flat_map(|v| v.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidInput("channel has non-finite entries".into()));
        }
        Ok(ChannelSet {
            vectors,
            aods: Vec::new(),
            gains: Vec::new(),
            seed: None,
        })
    }

    pub fn antennas(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn users(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[DVector<C64>] {
        &self.vectors
    }

    pub fn aods(&self) -> &[Vec<f64>] {
        &self.aods
    }

    pub fn gains(&self) -> &[Vec<C64>] {
        &self.gains
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `K x M` matrix with rows `h_kᵀ` (no conjugation).
    pub fn matrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.users(), self.antennas(), |k, m| self.vectors[k][m])
    }

    /// Same geometry with every channel multiplied by `factor`.
    pub fn scaled(&self, factor: C64) -> ChannelSet {
        ChannelSet {
            vectors: self.vectors.iter().map(|v| v * factor).collect(),
            aods: self.aods.clone(),
            gains: self.gains.iter().map(|g| g.iter().map(|a| a * factor).collect()).collect(),
            seed: self.seed,
        }
    }
}

/// ULA response `[a(ψ)]_m = e^{−jπ m cos ψ} / √M` (0-indexed `m`), ψ in degrees.
pub fn array_response(psi_deg: f64, antennas: usize) -> DVector<C64> {
    let phase = -std::f64::consts::PI * psi_deg.to_radians().cos();
    let amp = 1.0 / (antennas as f64).sqrt();
    DVector::from_fn(antennas, |m, _| C64::from_polar(amp, phase * m as f64))
}

/// Draws one channel realization. Deterministic in `seed`; per user and path
/// the generator yields the gain first, then the AoD.
pub fn draw_channels(cfg: &GeometryConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = seed::rng(seed);
    draw_channels_with(cfg, &mut rng).map(|mut set| {
        set.seed = Some(seed);
        set
    })
}

fn draw_channels_with<R: Rng>(cfg: &GeometryConfig, rng: &mut R) -> Result<ChannelSet> {
    let (m, l) = (cfg.antennas, cfg.paths);
    let gain_scale = (cfg.gamma2 / 2.0).sqrt();
    let [lo, hi] = cfg.aod_range;
    let norm = C64::new((m as f64 / l as f64).sqrt(), 0.0);

    let mut vectors = Vec::with_capacity(cfg.users);
    let mut aods = Vec::with_capacity(cfg.users);
    let mut gains = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        let mut h = DVector::zeros(m);
        let mut user_aods = Vec::with_capacity(l);
        let mut user_gains = Vec::with_capacity(l);
        for _ in 0..l {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let alpha = C64::new(re * gain_scale, im * gain_scale);
            let psi = lo + (hi - lo) * rng.random::<f64>();
            h += array_response(psi, m) * alpha;
            user_aods.push(psi);
            user_gains.push(alpha);
        }
        vectors.push(h * norm);
        aods.push(user_aods);
        gains.push(user_gains);
    }
    Ok(ChannelSet {
        vectors,
        aods,
        gains,
        seed: None,
    })
}

/// Deterministic line-of-sight channels `h_k = a(ψ_k)` (γ² = 1).
pub fn fixed_channels(aods_deg: &[f64], antennas: usize) -> Result<ChannelSet> {
    if aods_deg.is_empty() || antennas == 0 {
        return Err(Error::InvalidInput("need at least one user and one antenna".into()));
    }
    let mut set = ChannelSet::from_vectors(
        aods_deg.iter().map(|&psi| array_response(psi, antennas)).collect(),
    )?;
    set.aods = aods_deg.iter().map(|&psi| vec![psi]).collect();
    set.gains = aods_deg.iter().map(|_| vec![C64::new(1.0, 0.0)]).collect();
    Ok(set)
}

/// Transmit power, noise power, path loss and the SNR linking them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub p_tot: f64,
    pub n0: f64,
    pub gamma2: f64,
    pub snr: f64,
}

impl LinkBudget {
    /// Budget for a target SNR; the noise power follows from `SNR = γ²P/N₀`.
    pub fn from_snr(snr: f64, gamma2: f64, p_tot: f64) -> Result<Self> {
        let n0 = noise_power(snr, gamma2, p_tot)?;
        Ok(LinkBudget {
            p_tot,
            n0,
            gamma2,
            snr,
        })
    }
}

/// `N₀ = γ² P_tot / SNR`.
pub fn noise_power(snr: f64, gamma2: f64, p_tot: f64) -> Result<f64> {
    for (name, v) in [("snr", snr), ("gamma2", gamma2), ("p_tot", p_tot)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(gamma2 * p_tot / snr)
}
