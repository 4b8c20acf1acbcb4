//! SINDR, achievable sum rate and far-field radiation patterns.
//!
//! All quantities come from closed forms. The only randomness-dependent
//! checks for these live in the test suites.

use nalgebra::DVector;

use crate::channel::{array_response, ChannelSet};
use crate::error::{Error, Result};
use crate::pa::{bussgang_gain, distortion_covariance, DistortionCovariance, PaParams};
use crate::precoding::Precoder;
use crate::C64;

/// Default angular resolution of radiation patterns, degrees.
pub const DEFAULT_GRID_STEP_DEG: f64 = 0.25;
/// Floor applied when patterns are written in dB.
pub const PATTERN_FLOOR_DB: f64 = -100.0;

/// Terms of the SINDR of one user. All powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SindrBreakdown {
    pub signal: f64,
    pub mui: f64,
    pub dist: f64,
    pub noise: f64,
    pub sindr: f64,
}

impl SindrBreakdown {
    /// Denominator `d_k = mui + dist + N₀`.
    pub fn denominator(&self) -> f64 {
        self.mui + self.dist + self.noise
    }

    pub fn rate(&self) -> f64 {
        self.sindr.ln_1p() / std::f64::consts::LN_2
    }
}

/// Precomputed `B(P)` and `C_e(P)` shared by all users.
pub(crate) struct LinkTerms {
    pub gain: DVector<C64>,
    pub cov: DistortionCovariance,
}

impl LinkTerms {
    pub fn new(p: &Precoder, pa: &PaParams) -> Self {
        LinkTerms {
            gain: bussgang_gain(p, pa).diag().clone(),
            cov: distortion_covariance(p, pa),
        }
    }

    /// `hᵀ B(P) p_r` for every column `r`.
    pub fn effective_gains(&self, p: &Precoder, h: &DVector<C64>) -> Vec<C64> {
        let pm = p.matrix();
        (0..p.users())
            .map(|r| {
                (0..p.antennas())
                    .map(|m| h[m] * self.gain[m] * pm[(m, r)])
                    .sum()
            })
            .collect()
    }

    pub fn breakdown(&self, p: &Precoder, h: &DVector<C64>, k: usize, n0: f64) -> SindrBreakdown {
        let g = self.effective_gains(p, h);
        let signal = g[k].norm_sqr();
        let mui: f64 = g
            .iter()
            .enumerate()
            .filter(|&(r, _)| r != k)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        let dist = self.cov.quad_form(h).re.max(0.0);
        let sindr = signal / (mui + dist + n0);
        SindrBreakdown {
            signal,
            mui,
            dist,
            noise: n0,
            sindr,
        }
    }
}

fn check_shapes(p: &Precoder, channels: &ChannelSet) {
    assert_eq!(p.antennas(), channels.antennas(), "precoder/channel antenna mismatch");
    assert_eq!(p.users(), channels.users(), "precoder/channel user mismatch");
}

/// SINDR breakdown of user `k` (0-based).
pub fn sindr(
    p: &Precoder,
    channels: &ChannelSet,
    k: usize,
    pa: &PaParams,
    n0: f64,
) -> Result<SindrBreakdown> {
    check_shapes(p, channels);
    if k >= channels.users() {
        return Err(Error::IndexOutOfRange {
            index: k,
            users: channels.users(),
        });
    }
    let terms = LinkTerms::new(p, pa);
    Ok(terms.breakdown(p, &channels.vectors()[k], k, n0))
}

/// SINDR breakdown of every user.
pub fn sindr_all(p: &Precoder, channels: &ChannelSet, pa: &PaParams, n0: f64) -> Vec<SindrBreakdown> {
    check_shapes(p, channels);
    let terms = LinkTerms::new(p, pa);
    channels
        .vectors()
        .iter()
        .enumerate()
        .map(|(k, h)| terms.breakdown(p, h, k, n0))
        .collect()
}

/// `Σ_k log₂(1 + SINDR_k)` in bits per channel use.
pub fn sum_rate(p: &Precoder, channels: &ChannelSet, pa: &PaParams, n0: f64) -> f64 {
    sindr_all(p, channels, pa, n0).iter().map(SindrBreakdown::rate).sum()
}

/// Radiated power of the linear and distortion terms towards one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPoint {
    pub psi: f64,
    pub linear_power: f64,
    pub distortion_power: f64,
}

/// Uniform grid over `[0°, 180°]` with the given step (the end point is
/// included when the step divides 180).
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || !step_deg.is_finite() {
        return Err(Error::InvalidInput(format!("grid step must be positive, got {step_deg}")));
    }
    let n = (180.0 / step_deg + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step_deg).collect())
}

/// Far-field pattern: `aᵀ(ψ)BPPᴴBᴴa*(ψ)` for the linear term and
/// `aᵀ(ψ)C_e a*(ψ)` for the distortion term.
pub fn radiation_pattern(p: &Precoder, pa: &PaParams, psi_grid: &[f64]) -> Result<Vec<PatternPoint>> {
    if psi_grid.is_empty() {
        return Err(Error::InvalidInput("angle grid is empty".into()));
    }
    let terms = LinkTerms::new(p, pa);
    Ok(psi_grid
        .iter()
        .map(|&psi| {
            let a = array_response(psi, p.antennas());
            let linear_power = terms
                .effective_gains(p, &a)
                .iter()
                .map(|z| z.norm_sqr())
                .sum();
            let distortion_power = terms.cov.quad_form(&a).re.max(0.0);
            PatternPoint {
                psi,
                linear_power,
                distortion_power,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::{mrt, zf};
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_user_setup() -> (Precoder, ChannelSet) {
        let h1 = DVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.1)]);
        let h2 = DVector::from_vec(vec![c(0.2, -0.4), c(1.2, 0.1), c(-0.5, 0.6)]);
        let p = Precoder::new(DMatrix::from_row_slice(
            3,
            2,
            &[c(0.5, 0.1), c(-0.2, 0.3), c(0.4, -0.6), c(0.8, 0.0), c(-0.1, 0.2), c(0.3, 0.3)],
        ))
        .unwrap();
        (p, ChannelSet::from_vectors(vec![h1, h2]).unwrap())
    }

    #[test]
    fn linear_single_user() {
        let pa = PaParams::linear(c(0.9, 0.3)).unwrap();
        let h = DVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.1)]);
        let p = Precoder::new(DMatrix::from_column_slice(2, 1, &[c(0.3, 0.0), c(0.1, -0.7)])).unwrap();
        let set = ChannelSet::from_vectors(vec![h.clone()]).unwrap();
        let b = sindr(&p, &set, 0, &pa, 0.2).unwrap();
        let hp = (h.transpose() * p.column(0))[(0, 0)];
        let expect = pa.beta1().norm_sqr() * hp.norm_sqr() / 0.2;
        assert!((b.sindr - expect).abs() < 1e-12 * expect);
        assert_eq!(b.mui, 0.0);
        assert_eq!(b.dist, 0.0);
    }

    #[test]
    fn zf_linear_has_no_interference() {
        let (_, set) = two_user_setup();
        let p = zf(&set).unwrap();
        let pa = PaParams::linear(c(0.98, 0.0)).unwrap();
        for b in sindr_all(&p, &set, &pa, 1.0) {
            assert!(b.mui < 1e-20 * b.signal);
        }
    }

    #[test]
    fn sindr_identity_and_index() {
        let (p, set) = two_user_setup();
        let pa = PaParams::default();
        for k in 0..2 {
            let b = sindr(&p, &set, k, &pa, 0.05).unwrap();
            assert!(b.signal >= 0.0 && b.mui >= 0.0 && b.dist >= 0.0);
            assert_eq!(b.sindr, b.signal / (b.mui + b.dist + b.noise));
        }
        assert!(matches!(
            sindr(&p, &set, 2, &pa, 0.05),
            Err(Error::IndexOutOfRange { index: 2, users: 2 })
        ));
    }

    #[test]
    fn rate_examples() {
        let set = ChannelSet::from_vectors(vec![DVector::from_vec(vec![c(1.0, 0.0)])]).unwrap();
        let pa = PaParams::linear(c(1.0, 0.0)).unwrap();
        let p = Precoder::new(DMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        assert!((sum_rate(&p, &set, &pa, 1.0) - 1.0).abs() < 1e-15);

        let (p, set) = two_user_setup();
        assert_eq!(sum_rate(&Precoder::zeros(3, 2), &set, &PaParams::default(), 0.1), 0.0);

        let pa = PaParams::default();
        let total: f64 = (0..2)
            .map(|k| (1.0 + sindr(&p, &set, k, &pa, 0.1).unwrap().sindr).log2())
            .sum();
        assert!((total - sum_rate(&p, &set, &pa, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn rate_decreases_with_noise() {
        let (p, set) = two_user_setup();
        let pa = PaParams::default();
        let mut last = f64::INFINITY;
        for n0 in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let r = sum_rate(&p, &set, &pa, n0);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn mrt_beam_points_at_user() {
        let set = crate::channel::fixed_channels(&[90.0], 16).unwrap();
        let p = mrt(&set).unwrap();
        let pa = PaParams::default();
        let grid = angle_grid(DEFAULT_GRID_STEP_DEG).unwrap();
        let pat = radiation_pattern(&p, &pa, &grid).unwrap();
        let best = pat
            .iter()
            .max_by(|a, b| a.linear_power.total_cmp(&b.linear_power))
            .unwrap();
        assert_eq!(best.psi, 90.0);
        let lin = radiation_pattern(&p, &pa.linearized(), &grid).unwrap();
        assert!(lin.iter().all(|pt| pt.distortion_power == 0.0));
    }

    #[test]
    fn grid_shape() {
        let g = angle_grid(0.25).unwrap();
        assert_eq!(g.len(), 721);
        assert_eq!(*g.last().unwrap(), 180.0);
        assert!(angle_grid(0.0).is_err());
        assert!(radiation_pattern(&Precoder::zeros(2, 1), &PaParams::default(), &[]).is_err());
    }
}
