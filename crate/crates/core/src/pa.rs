//! Third-order memoryless amplifier model and its Bussgang decomposition.
//!
//! With `x = Ps` and `s ~ CN(0, I)`, each antenna sees a zero-mean complex
//! Gaussian input of power `σ²_m = [PPᴴ]_{m,m}`. The amplifier output splits
//! into `φ(x) = B x + e`, with `B` diagonal and `e` uncorrelated with `x`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::precoding::Precoder;
use crate::seed;
use crate::C64;

/// Coefficients of `φ(x) = β₁x + β₃x|x|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaParams {
    beta1: C64,
    beta3: C64,
}

impl PaParams {
    pub fn new(beta1: C64, beta3: C64) -> Result<Self> {
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        if !finite(beta1) || !finite(beta3) {
            return Err(Error::InvalidInput("PA coefficients must be finite".into()));
        }
        if beta1 == C64::new(0.0, 0.0) {
            return Err(Error::InvalidInput("beta1 must be nonzero".into()));
        }
        Ok(PaParams { beta1, beta3 })
    }

    /// Linear amplifier with gain `beta1`.
    pub fn linear(beta1: C64) -> Result<Self> {
        Self::new(beta1, C64::new(0.0, 0.0))
    }

    pub fn beta1(&self) -> C64 {
        self.beta1
    }

    pub fn beta3(&self) -> C64 {
        self.beta3
    }

    pub fn is_linear(&self) -> bool {
        self.beta3 == C64::new(0.0, 0.0)
    }

    /// Same amplifier with the third-order term removed.
    pub fn linearized(&self) -> Self {
        PaParams {
            beta1: self.beta1,
            beta3: C64::new(0.0, 0.0),
        }
    }

    #[inline]
    pub fn apply(&self, x: C64) -> C64 {
        self.beta1 * x + self.beta3 * x * x.norm_sqr()
    }
}

impl Default for PaParams {
    /// `β₁ = 0.98`, `β₃ = −0.04 − 0.01j`.
    fn default() -> Self {
        PaParams {
            beta1: C64::new(0.98, 0.0),
            beta3: C64::new(-0.04, -0.01),
        }
    }
}

/// Applies the amplifier entrywise.
pub fn apply_pa(x: &[C64], pa: &PaParams) -> Result<Vec<C64>> {
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("amplifier input has non-finite entries".into()));
    }
    Ok(x.iter().map(|&z| pa.apply(z)).collect())
}

/// Diagonal of the Bussgang gain matrix `B(P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangGain(DVector<C64>);

impl BussgangGain {
    pub fn diag(&self) -> &DVector<C64> {
        &self.0
    }

    /// Dense `M x M` form. Only meant for tests and diagnostics.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&self.0)
    }
}

/// `B(P) = β₁I + 2β₃ diag(PPᴴ)`.
pub fn bussgang_gain(p: &Precoder, pa: &PaParams) -> BussgangGain {
    let two_b3 = pa.beta3 * 2.0;
    BussgangGain(DVector::from_iterator(
        p.antennas(),
        p.antenna_powers().into_iter().map(|s| pa.beta1 + two_b3 * s),
    ))
}

/// Covariance of the amplifier distortion term.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCovariance(DMatrix<C64>);

impl DistortionCovariance {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// `vᵀ C v*`, real for Hermitian `C`.
    pub fn quad_form(&self, v: &DVector<C64>) -> C64 {
        let vc = v.map(|z| z.conj());
        (v.transpose() * &self.0 * vc)[(0, 0)]
    }
}

/// `C_e(P) = 2|β₃|² (PPᴴ ⊙ P*Pᵀ ⊙ PPᴴ)`, entrywise `2|β₃|²|A_ij|²A_ij`
/// with `A = PPᴴ`.
pub fn distortion_covariance(p: &Precoder, pa: &PaParams) -> DistortionCovariance {
    let scale = 2.0 * pa.beta3.norm_sqr();
    let a = p.gram();
    let mut c = a.map(|z| z * (scale * z.norm_sqr()));
    // PPᴴ is Hermitian up to rounding; make the diagonal exactly real
    for i in 0..c.nrows() {
        c[(i, i)].im = 0.0;
    }
    DistortionCovariance(c)
}

/// Mean output power of one amplifier driven by `CN(0, sigma2)`:
/// `|β₁|²σ² + 4Re(β₁*β₃)σ⁴ + 6|β₃|²σ⁶`.
#[inline]
pub fn antenna_output_power(sigma2: f64, pa: &PaParams) -> f64 {
    let cross = 4.0 * (pa.beta1.conj() * pa.beta3).re;
    sigma2 * (pa.beta1.norm_sqr() + sigma2 * (cross + sigma2 * 6.0 * pa.beta3.norm_sqr()))
}

/// `E‖φ(Ps)‖²` in closed form.
pub fn expected_output_power(p: &Precoder, pa: &PaParams) -> f64 {
    p.antenna_powers()
        .into_iter()
        .map(|s| antenna_output_power(s, pa))
        .sum()
}

/// Draws `s ~ CN(0, I_K)`.
pub fn draw_symbols<R: Rng>(rng: &mut R, users: usize) -> DVector<C64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(users, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    })
}

/// Streams `(x, e)` pairs with `x = Ps` and `e = φ(x) − B(P)x`.
pub struct DistortionSampler {
    precoder: DMatrix<C64>,
    gain: DVector<C64>,
    pa: PaParams,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl DistortionSampler {
    pub fn new(p: &Precoder, pa: &PaParams, n: usize, seed: u64) -> Self {
        DistortionSampler {
            precoder: p.matrix().clone(),
            gain: bussgang_gain(p, pa).0,
            pa: *pa,
            rng: seed::rng(seed),
            remaining: n,
        }
    }
}

impl Iterator for DistortionSampler {
    type Item = (DVector<C64>, DVector<C64>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let s = draw_symbols(&mut self.rng, self.precoder.ncols());
        let x = &self.precoder * s;
        let e = DVector::from_fn(x.len(), |m, _| self.pa.apply(x[m]) - self.gain[m] * x[m]);
        Some((x, e))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// Collected Monte Carlo draws of amplifier input and distortion.
#[derive(Debug, Clone)]
pub struct DistortionSamples {
    pub x: Vec<DVector<C64>>,
    pub e: Vec<DVector<C64>>,
}

/// Draws `n` pairs `(x, e)`; deterministic for a fixed seed. For very large
/// `n` prefer [`DistortionSampler`], which does not buffer.
pub fn sample_distortion(p: &Precoder, pa: &PaParams, n: usize, seed: u64) -> Result<DistortionSamples> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let (x, e) = DistortionSampler::new(p, pa, n, seed).unzip();
    Ok(DistortionSamples { x, e })
}
