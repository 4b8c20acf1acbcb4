//! Distortion-aware beamforming (DAB): projected gradient ascent on the
//! SINDR sum rate.
//!
//! The gradient is assembled from closed forms. With `n_k = |h_kᵀBp_k|²`
//! and `d_k = mui_k + dist_k + N₀`,
//!
//! ```text
//! ∇R = Σ_k 2·log₂(e) / (d_k (d_k + n_k)) · (d_k ∂n_k/∂P* − n_k ∂d_k/∂P*)
//! ∂n_k/∂p_j*   = (Γ_k 1{j=k} + Υ_k(p_k)) p_j
//! ∂mui_k/∂p_j* = (Γ_k 1{j≠k} + Σ_{r≠k} Υ_k(p_r)) p_j
//! ∂dist_k/∂p*_{m,j} = 2|β₃|² ( 2h*_m Σ_m' h_m' p_m'j |A_m'm|²
//!                            +  h_m  Σ_m' h*_m' p_m'j A_mm'² ),  A = PPᴴ
//! ```
//!
//! where the partial derivatives are Wirtinger derivatives. The returned
//! matrix is therefore [`GRADIENT_SCALE`] times `∂R/∂P*`, which is exactly
//! `∂R/∂Re P + j ∂R/∂Im P`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{sum_rate, LinkTerms};
use crate::pa::{draw_symbols, PaParams};
use crate::precoding::{mrt, project_power, zf, Precoder};
use crate::seed;
use crate::C64;

/// Ratio between [`sum_rate_gradient`] and the Wirtinger derivative
/// `½(∂/∂Re + j∂/∂Im)` of the sum rate.
pub const GRADIENT_SCALE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    /// Iteration budget `I`.
    pub max_iters: usize,
    /// Initial (and reset) step size.
    pub mu0: f64,
    pub n_random_inits: usize,
    pub include_mrt: bool,
    pub include_zf: bool,
    pub seed: u64,
    /// Relative improvement below which an accepted step is reported as a
    /// stall in [`AscentTrace::stalled_at`]. Zero disables reporting. The
    /// ascent always runs all `max_iters` iterations.
    pub stall_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iters: 50,
            mu0: 1.0,
            n_random_inits: 48,
            include_mrt: true,
            include_zf: true,
            seed: 0,
            stall_tol: 0.0,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return Err(Error::config("mu0", "must be positive and finite"));
        }
        if !(self.stall_tol >= 0.0) {
            return Err(Error::config("stall_tol", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Per-iteration record of one ascent run.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace {
    /// `R⁽⁰⁾ … R⁽ᴵ⁾`; non-decreasing.
    pub rates: Vec<f64>,
    /// Step size used at iterations `1 … I`.
    pub step_sizes: Vec<f64>,
    pub accepted: Vec<bool>,
    /// First iteration whose accepted improvement fell below `stall_tol`.
    pub stalled_at: Option<usize>,
}

impl AscentTrace {
    pub fn initial_rate(&self) -> f64 {
        self.rates[0]
    }

    pub fn final_rate(&self) -> f64 {
        *self.rates.last().expect("trace holds at least R⁽⁰⁾")
    }
}

/// `Γ_k(P) = |β₁|² h*hᵀ + 2(β₁*β₃ h*hᵀD + β₁β₃* D h*hᵀ) + 4|β₃|² D h*hᵀ D`
/// with `D = diag(PPᴴ)`.
pub fn gamma_matrix(p: &Precoder, h: &DVector<C64>, pa: &PaParams) -> DMatrix<C64> {
    let d = p.antenna_powers();
    let (b1, b3) = (pa.beta1(), pa.beta3());
    let lin = b1.norm_sqr();
    let left = b1.conj() * b3 * 2.0;
    let right = b1 * b3.conj() * 2.0;
    let quad = 4.0 * b3.norm_sqr();
    DMatrix::from_fn(h.len(), h.len(), |i, j| {
        let outer = h[i].conj() * h[j];
        outer * (lin + left * d[j] + right * d[i] + quad * d[i] * d[j])
    })
}

/// Diagonal of `Υ_k(q)` for column `q`:
///
/// ```text
/// 2(β₁*β₃ diag(qqᴴh*hᵀ) + β₁β₃* diag(h*hᵀqqᴴ))
///   + 4|β₃|²(diag(h*hᵀDqqᴴ) + diag(qqᴴDh*hᵀ))
/// ```
pub(crate) fn upsilon_diag(d: &[f64], h: &DVector<C64>, q: &DVector<C64>, pa: &PaParams) -> DVector<C64> {
    let (b1, b3) = (pa.beta1(), pa.beta3());
    // hᵀq, hᵀDq and their conjugate counterparts qᴴh*, qᴴDh*
    let mut hq = C64::new(0.0, 0.0);
    let mut hdq = C64::new(0.0, 0.0);
    for m in 0..h.len() {
        let t = h[m] * q[m];
        hq += t;
        hdq += t * d[m];
    }
    let c1 = b1.conj() * b3 * 2.0;
    let c2 = b1 * b3.conj() * 2.0;
    let c3 = 4.0 * b3.norm_sqr();
    DVector::from_fn(h.len(), |m, _| {
        let qh = q[m] * h[m]; // q_m h_m
        let hq_c = qh.conj(); // h*_m q*_m
        c1 * qh * hq.conj() + c2 * hq_c * hq + c3 * (hq_c * hdq + qh * hdq.conj())
    })
}

/// `Υ(P)` for channel `h` and column `q`, as a dense (diagonal) matrix.
pub fn upsilon_matrix(p: &Precoder, h: &DVector<C64>, q: &DVector<C64>, pa: &PaParams) -> DMatrix<C64> {
    DMatrix::from_diagonal(&upsilon_diag(&p.antenna_powers(), h, q, pa))
}

/// Closed-form ascent direction of the sum rate, `M x K`. See the module
/// docs for the expression and [`GRADIENT_SCALE`] for its normalization.
pub fn sum_rate_gradient(p: &Precoder, channels: &ChannelSet, pa: &PaParams, n0: f64) -> DMatrix<C64> {
    assert_eq!(p.antennas(), channels.antennas(), "precoder/channel antenna mismatch");
    assert_eq!(p.users(), channels.users(), "precoder/channel user mismatch");
    let (m_ant, users) = (p.antennas(), p.users());
    let d = p.antenna_powers();
    let terms = LinkTerms::new(p, pa);
    let a = p.gram();
    let abs_sq = a.map(|z| z.norm_sqr());
    let sq = a.map(|z| z * z);
    let dist_scale = 2.0 * pa.beta3().norm_sqr();
    let log2e = std::f64::consts::LOG2_E;
    let columns: Vec<DVector<C64>> = (0..users).map(|j| p.column(j)).collect();

    let mut grad = DMatrix::zeros(m_ant, users);
    for (k, h) in channels.vectors().iter().enumerate() {
        let sindr = terms.breakdown(p, h, k, n0);
        let n = sindr.signal;
        let den = sindr.denominator();
        let gamma = gamma_matrix(p, h, pa);
        let ups: Vec<DVector<C64>> = columns.iter().map(|q| upsilon_diag(&d, h, q, pa)).collect();
        let mut ups_others = DVector::zeros(m_ant);
        for (r, u) in ups.iter().enumerate() {
            if r != k {
                ups_others += u;
            }
        }
        let coef = 2.0 * log2e / (den * (den + n));

        for (j, q) in columns.iter().enumerate() {
            let gq = &gamma * q;
            let mut dn = ups[k].component_mul(q);
            let mut dd = ups_others.component_mul(q);
            if j == k {
                dn += &gq;
            } else {
                dd += &gq;
            }
            if dist_scale > 0.0 {
                let u = h.component_mul(q);
                let v = h.map(|z| z.conj()).component_mul(q);
                for m in 0..m_ant {
                    let mut s1 = C64::new(0.0, 0.0);
                    let mut s2 = C64::new(0.0, 0.0);
                    for mp in 0..m_ant {
                        s1 += u[mp] * abs_sq[(mp, m)];
                        s2 += v[mp] * sq[(m, mp)];
                    }
                    dd[m] += (h[m].conj() * s1 * 2.0 + h[m] * s2) * dist_scale;
                }
            }
            let mut col = grad.column_mut(j);
            col += (dn * C64::new(den, 0.0) - dd * C64::new(n, 0.0)) * C64::new(coef, 0.0);
        }
    }
    grad
}

/// One iteration as seen by an observer of [`dab_precoder_observed`].
#[derive(Debug)]
pub struct IterationEvent<'a> {
    pub iteration: usize,
    pub precoder: &'a Precoder,
    pub rate: f64,
    pub accepted: bool,
}

/// Runs the projected ascent from `p0` (which must already meet the power
/// constraint). Returns `P⁽ᴵ⁾` and the trace.
pub fn dab_precoder(
    channels: &ChannelSet,
    pa: &PaParams,
    n0: f64,
    p_tot: f64,
    p0: &Precoder,
    opts: &OptimizerOptions,
) -> Result<(Precoder, AscentTrace)> {
    dab_precoder_observed(channels, pa, n0, p_tot, p0, opts, |_| {})
}

/// [`dab_precoder`] with a callback invoked after every iteration with the
/// current iterate.
pub fn dab_precoder_observed(
    channels: &ChannelSet,
    pa: &PaParams,
    n0: f64,
    p_tot: f64,
    p0: &Precoder,
    opts: &OptimizerOptions,
    mut observer: impl FnMut(IterationEvent<'_>),
) -> Result<(Precoder, AscentTrace)> {
    opts.validate()?;
    if p0.antennas() != channels.antennas() || p0.users() != channels.users() {
        return Err(Error::InvalidInput(format!(
            "initial precoder is {}x{}, channels need {}x{}",
            p0.antennas(),
            p0.users(),
            channels.antennas(),
            channels.users()
        )));
    }
    if !(n0 > 0.0) {
        return Err(Error::InvalidInput(format!("noise power must be positive, got {n0}")));
    }

    let mut current = p0.clone();
    let mut rate = sum_rate(&current, channels, pa, n0);
    let mut mu = opts.mu0;
    let mut trace = AscentTrace {
        rates: Vec::with_capacity(opts.max_iters + 1),
        step_sizes: Vec::with_capacity(opts.max_iters),
        accepted: Vec::with_capacity(opts.max_iters),
        stalled_at: None,
    };
    trace.rates.push(rate);

    for iteration in 1..=opts.max_iters {
        let grad = sum_rate_gradient(&current, channels, pa, n0);
        let step = current.matrix() + grad * C64::new(mu, 0.0);
        // a non-finite or unprojectable candidate counts as a rejected step
        let candidate = Precoder::new(step)
            .and_then(|c| project_power(&c, pa, p_tot))
            .ok()
            .map(|c| {
                let r = sum_rate(&c, channels, pa, n0);
                (c, r)
            });
        trace.step_sizes.push(mu);
        let accepted = match candidate {
            Some((c, r)) if r > rate => {
                if opts.stall_tol > 0.0
                    && trace.stalled_at.is_none()
                    && (r - rate) <= opts.stall_tol * rate.abs()
                {
                    trace.stalled_at = Some(iteration);
                }
                current = c;
                rate = r;
                mu = opts.mu0;
                true
            }
            _ => {
                mu *= 0.5;
                false
            }
        };
        trace.accepted.push(accepted);
        trace.rates.push(rate);
        observer(IterationEvent {
            iteration,
            precoder: &current,
            rate,
            accepted,
        });
    }
    Ok((current, trace))
}

/// Which starting point an ascent run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitLabel {
    Mrt,
    Zf,
    Random(usize),
}

impl fmt::Display for InitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitLabel::Mrt => write!(f, "mrt"),
            InitLabel::Zf => write!(f, "zf"),
            InitLabel::Random(j) => write!(f, "random-{j}"),
        }
    }
}

/// One completed ascent run.
#[derive(Debug, Clone)]
pub struct InitRun {
    pub label: InitLabel,
    pub trace: AscentTrace,
}

#[derive(Debug, Clone)]
pub struct MultiInitResult {
    pub precoder: Precoder,
    pub label: InitLabel,
    pub rate: f64,
    /// Completed runs in initialization order.
    pub runs: Vec<InitRun>,
    /// Initializations that could not be built (e.g. ZF on a rank-deficient
    /// channel), with the reason.
    pub failures: Vec<(InitLabel, String)>,
}

impl MultiInitResult {
    /// Best rate over all runs after each iteration.
    pub fn best_so_far(&self) -> Vec<f64> {
        let len = self.runs.iter().map(|r| r.trace.rates.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                self.runs
                    .iter()
                    .filter_map(|r| r.trace.rates.get(i))
                    .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            })
            .collect()
    }
}

/// Random starting matrix with i.i.d. `CN(0, 1)` entries.
pub fn random_init(antennas: usize, users: usize, seed: u64) -> Precoder {
    let mut rng = seed::rng(seed);
    let cols: Vec<DVector<C64>> = (0..users).map(|_| draw_symbols(&mut rng, antennas)).collect();
    Precoder::new(DMatrix::from_columns(&cols)).expect("Gaussian draws are finite")
}

/// Runs the ascent from projected MRT, projected ZF and `n_random_inits`
/// projected random matrices, and keeps the best final rate. Exact ties go
/// to the lowest initialization index. Runs execute in parallel but are
/// reduced in index order, so the result does not depend on scheduling.
pub fn multi_init_dab(
    channels: &ChannelSet,
    pa: &PaParams,
    n0: f64,
    p_tot: f64,
    opts: &OptimizerOptions,
) -> Result<MultiInitResult> {
    opts.validate()?;
    let (m, k) = (channels.antennas(), channels.users());
    let mut starts: Vec<(InitLabel, Result<Precoder>)> = Vec::new();
    if opts.include_mrt {
        starts.push((InitLabel::Mrt, mrt(channels).and_then(|p| project_power(&p, pa, p_tot))));
    }
    if opts.include_zf {
        starts.push((InitLabel::Zf, zf(channels).and_then(|p| project_power(&p, pa, p_tot))));
    }
    for j in 0..opts.n_random_inits {
        let p = random_init(m, k, seed::derive(opts.seed, seed::DOMAIN_INIT, j as u64));
        starts.push((InitLabel::Random(j), project_power(&p, pa, p_tot)));
    }

    let outcomes: Vec<(InitLabel, Result<(Precoder, AscentTrace)>)> = starts
        .into_par_iter()
        .map(|(label, start)| {
            let run = start.and_then(|p0| dab_precoder(channels, pa, n0, p_tot, &p0, opts));
            (label, run)
        })
        .collect();

    let mut best: Option<(Precoder, InitLabel, f64)> = None;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (label, outcome) in outcomes {
        match outcome {
            Ok((p, trace)) => {
                let r = trace.final_rate();
                if best.as_ref().map_or(true, |(_, _, b)| r > *b) {
                    best = Some((p, label, r));
                }
                runs.push(InitRun { label, trace });
            }
            Err(e) => failures.push((label, e.to_string())),
        }
    }
    let (precoder, label, rate) =
        best.ok_or_else(|| Error::InvalidInput("no initialization could be started".into()))?;
    Ok(MultiInitResult {
        precoder,
        label,
        rate,
        runs,
        failures,
    })
}
