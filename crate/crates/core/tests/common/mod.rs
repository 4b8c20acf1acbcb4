//! Independent oracles shared by the integration suites. None of these call
//! the closed forms they are used to check.

#![allow(dead_code)]

use dab_core::channel::{draw_channels, GeometryConfig};
use dab_core::metrics::sum_rate;
use dab_core::pa::{draw_symbols, PaParams};
use dab_core::precoding::Precoder;
use dab_core::{ChannelSet, C64};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, m: usize, k: usize) -> DMatrix<C64> {
    let cols: Vec<DVector<C64>> = (0..k).map(|_| draw_symbols(rng, m)).collect();
    DMatrix::from_columns(&cols)
}

pub fn gaussian_precoder(rng: &mut impl Rng, m: usize, k: usize) -> Precoder {
    Precoder::new(gaussian_matrix(rng, m, k)).unwrap()
}

pub fn geometric_channels(m: usize, k: usize, seed: u64) -> ChannelSet {
    draw_channels(&GeometryConfig::new(m, k, 10, 1e-11), seed).unwrap()
}

/// Central differences of the sum rate: returns `∂R/∂Re + j ∂R/∂Im` per entry.
pub fn fd_gradient(p: &Precoder, channels: &ChannelSet, pa: &PaParams, n0: f64, step: f64) -> DMatrix<C64> {
    DMatrix::from_fn(p.antennas(), p.users(), |m, j| {
        let mut d = [0.0; 2];
        for (slot, dir) in [C64::new(step, 0.0), C64::new(0.0, step)].into_iter().enumerate() {
            let mut plus = p.matrix().clone();
            let mut minus = p.matrix().clone();
            plus[(m, j)] += dir;
            minus[(m, j)] -= dir;
            let rp = sum_rate(&Precoder::new(plus).unwrap(), channels, pa, n0);
            let rm = sum_rate(&Precoder::new(minus).unwrap(), channels, pa, n0);
            d[slot] = (rp - rm) / (2.0 * step);
        }
        C64::new(d[0], d[1])
    })
}

/// Running mean of complex samples with the standard error of that mean.
#[derive(Clone, Copy, Default)]
pub struct MeanAcc {
    sum: C64,
    sq: f64,
    n: u64,
}

impl MeanAcc {
    #[inline]
    pub fn push(&mut self, z: C64) {
        self.sum += z;
        self.sq += z.norm_sqr();
        self.n += 1;
    }

    pub fn mean(&self) -> C64 {
        self.sum / self.n as f64
    }

    /// `sqrt(E|z − mean|² / n)`.
    pub fn std_err(&self) -> f64 {
        let n = self.n as f64;
        ((self.sq / n - self.mean().norm_sqr()).max(0.0) / n).sqrt()
    }
}

/// Empirical `E[x eᴴ]` and `E[e eᴴ]` with `e = φ(x) − diag(gain) x`, where
/// the amplifier is evaluated directly from its coefficients.
pub struct BussgangMc {
    pub xe: Vec<MeanAcc>,
    pub ee: Vec<MeanAcc>,
    pub m: usize,
}

pub fn bussgang_monte_carlo(p: &Precoder, pa: &PaParams, n: usize, seed: u64, gain: &[C64]) -> BussgangMc {
    let m = p.antennas();
    let mut r = rng(seed);
    let mut xe = vec![MeanAcc::default(); m * m];
    let mut ee = vec![MeanAcc::default(); m * m];
    let pm = p.matrix();
    let mut x = vec![C64::new(0.0, 0.0); m];
    let mut e = vec![C64::new(0.0, 0.0); m];
    for _ in 0..n {
        let s = draw_symbols(&mut r, p.users());
        for i in 0..m {
            x[i] = (0..p.users()).map(|k| pm[(i, k)] * s[k]).sum();
            let v = x[i];
            let y = pa.beta1() * v + pa.beta3() * v * v.norm_sqr();
            e[i] = y - gain[i] * v;
        }
        for i in 0..m {
            for j in 0..m {
                xe[i * m + j].push(x[i] * e[j].conj());
                ee[i * m + j].push(e[i] * e[j].conj());
            }
        }
    }
    BussgangMc { xe, ee, m }
}

/// Monte Carlo estimate of `E‖φ(Ps)‖²` with its standard error.
pub fn output_power_mc(p: &Precoder, pa: &PaParams, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let pm = p.matrix();
    let mut acc = MeanAcc::default();
    for _ in 0..n {
        let s = draw_symbols(&mut r, p.users());
        let mut tot = 0.0;
        for i in 0..p.antennas() {
            let v: C64 = (0..p.users()).map(|k| pm[(i, k)] * s[k]).sum();
            tot += (pa.beta1() * v + pa.beta3() * v * v.norm_sqr()).norm_sqr();
        }
        acc.push(C64::new(tot, 0.0));
    }
    (acc.mean().re, acc.std_err())
}
