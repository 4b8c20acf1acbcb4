//! Fast self-check suite behind `dab validate`.
//!
//! Each check compares a closed form against an independent numerical
//! route (finite differences, Monte Carlo sampling, brute-force search) on
//! small random instances. The full-size versions live in the test suite.

use nalgebra::DVector;

use crate::channel::{draw_channels, noise_power, ChannelSet, GeometryConfig};
use crate::metrics::{sindr_all, sum_rate};
use crate::optimizer::{random_init, sum_rate_gradient};
use crate::pa::{distortion_covariance, expected_output_power, DistortionSampler, PaParams};
use crate::precoding::{mrt, project_power, zf, Precoder};
use crate::seed;
use crate::C64;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn random_instance(m: usize, k: usize, s: u64) -> (Precoder, ChannelSet, f64) {
    let pa = PaParams::default();
    let p_tot = 19.95;
    let gamma2 = 1e-11;
    let cfg = GeometryConfig::new(m, k, 5, gamma2);
    let channels = draw_channels(&cfg, seed::derive(s, seed::DOMAIN_CHANNEL, 0)).expect("valid geometry");
    let p = project_power(&random_init(m, k, s), &pa, p_tot).expect("random init is nonzero");
    let n0 = noise_power(10f64.powf((s % 5) as f64), gamma2, p_tot).expect("positive inputs");
    (p, channels, n0)
}

/// Central differences of the sum rate along real and imaginary directions.
fn finite_difference(p: &Precoder, channels: &ChannelSet, pa: &PaParams, n0: f64, step: f64) -> Vec<C64> {
    let mut out = Vec::new();
    for j in 0..p.users() {
        for m in 0..p.antennas() {
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
            out.push(C64::new(d[0], d[1]));
        }
    }
    out
}

fn gradient_check(seed_base: u64) -> CheckResult {
    let pa = PaParams::default();
    let mut worst = 0.0f64;
    for t in 0..10 {
        let (p, channels, n0) = random_instance(4, 2, seed_base + t);
        let g = sum_rate_gradient(&p, &channels, &pa, n0);
        let fd = finite_difference(&p, &channels, &pa, n0, 1e-5);
        let scale = fd.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (j, col) in g.column_iter().enumerate() {
            for (m, a) in col.iter().enumerate() {
                let f = fd[j * p.antennas() + m];
                worst = worst.max((a - f).norm() / f.norm().max(1e-6 * scale));
            }
        }
    }
    check("gradient-vs-finite-differences", worst < 1e-5, format!("max relative error {worst:.3e}"))
}

fn bussgang_check(seed_base: u64) -> CheckResult {
    let pa = PaParams::default();
    let n = 200_000;
    let (m, k) = (4, 2);
    let p = random_init(m, k, seed_base);
    let cov = distortion_covariance(&p, &pa);
    // running sums of each product and of its squared magnitude
    let mut xe = vec![(C64::new(0.0, 0.0), 0.0); m * m];
    let mut ee = vec![(C64::new(0.0, 0.0), 0.0); m * m];
    for (x, e) in DistortionSampler::new(&p, &pa, n, seed_base) {
        for i in 0..m {
            for j in 0..m {
                let a = x[i] * e[j].conj();
                let b = e[i] * e[j].conj() - cov.matrix()[(i, j)];
                xe[i * m + j].0 += a;
                xe[i * m + j].1 += a.norm_sqr();
                ee[i * m + j].0 += b;
                ee[i * m + j].1 += b.norm_sqr();
            }
        }
    }
    let nf = n as f64;
    // deviation of the sample mean from zero, in standard errors
    let z_score = |(sum, sq): (C64, f64)| {
        let mean = sum / nf;
        let var = (sq / nf - mean.norm_sqr()).max(f64::MIN_POSITIVE);
        mean.norm() / (var / nf).sqrt()
    };
    let cross = xe.iter().map(|&t| z_score(t)).fold(0.0, f64::max);
    let cov_err = ee.iter().map(|&t| z_score(t)).fold(0.0, f64::max);
    let tol = 5.0;
    check(
        "bussgang-monte-carlo",
        cross < tol && cov_err < tol,
        format!("max z-score of E[xeᴴ] {cross:.2}, of E[eeᴴ] - C_e {cov_err:.2} (tol {tol})"),
    )
}

fn power_check(seed_base: u64) -> CheckResult {
    let pa = PaParams::default();
    let p_tot = 19.95;
    let p = project_power(&random_init(16, 2, seed_base), &pa, p_tot).expect("nonzero");
    let closed = expected_output_power(&p, &pa);
    let n = 200_000;
    let mut rng = seed::rng(seed_base ^ 0x5eed);
    let mut acc = 0.0;
    for _ in 0..n {
        let s = crate::pa::draw_symbols(&mut rng, 2);
        let x = p.matrix() * s;
        acc += x.iter().map(|&z| pa.apply(z).norm_sqr()).sum::<f64>();
    }
    let mc = acc / n as f64;
    let rel = (closed - p_tot).abs() / p_tot;
    let mc_rel = (mc - p_tot).abs() / p_tot;
    check(
        "power-projection",
        rel < 1e-8 && mc_rel < 0.02,
        format!("closed form {rel:.2e}, Monte Carlo {mc_rel:.2e}"),
    )
}

fn linear_check(seed_base: u64) -> CheckResult {
    let lin = PaParams::linear(C64::new(0.98, 0.0)).expect("nonzero gain");
    let (p, channels, n0) = random_instance(8, 3, seed_base);
    let cov_zero = distortion_covariance(&p, &lin).matrix().iter().all(|z| z.norm() == 0.0);
    let z = zf(&channels).and_then(|z| project_power(&z, &lin, 19.95));
    let zf_ok = match z {
        Ok(z) => sindr_all(&z, &channels, &lin, n0)
            .iter()
            .all(|b| b.mui <= 1e-10 * b.signal),
        Err(_) => false,
    };
    check(
        "linear-pa-degeneration",
        cov_zero && zf_ok,
        format!("C_e zero: {cov_zero}, ZF interference-free: {zf_ok}"),
    )
}

fn mrt_check(seed_base: u64) -> CheckResult {
    let (_, channels, _) = random_instance(6, 2, seed_base);
    let p = mrt(&channels).expect("nonzero channels");
    let mut rng = seed::rng(seed_base);
    let mut ok = true;
    for (k, h) in channels.vectors().iter().enumerate() {
        let best = (h.transpose() * p.column(k))[(0, 0)].norm();
        for _ in 0..2000 {
            let v: DVector<C64> = crate::pa::draw_symbols(&mut rng, h.len());
            let v = &v / C64::new(v.norm(), 0.0);
            if (h.transpose() * v)[(0, 0)].norm() > best + 1e-12 {
                ok = false;
            }
        }
    }
    check("mrt-argmax", ok, "random unit vectors never beat MRT".into())
}

/// Runs every check; the seed only changes the random instances.
pub fn run_validation(seed_base: u64) -> Vec<CheckResult> {
    vec![
        gradient_check(seed_base),
        bussgang_check(seed_base),
        power_check(seed_base),
        linear_check(seed_base),
        mrt_check(seed_base),
    ]
}
