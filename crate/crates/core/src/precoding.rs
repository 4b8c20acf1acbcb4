//! Baseline precoders and the nonlinear power projection.
//!
//! Channel convention: user `k` receives `h_kᵀ φ(P s)`, so the channel
//! matrix stacks the rows `h_kᵀ` without conjugation. MRT therefore uses
//! `h_k*` and ZF uses the right pseudo-inverse `Hᴴ(HHᴴ)⁻¹`.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::pa::{self, PaParams};
use crate::C64;

/// Singular-value ratio above which the channel is treated as rank deficient.
pub const ZF_MAX_CONDITION: f64 = 1e12;

/// Linear precoding matrix `P` (M antennas by K users). Column `k` maps the
/// symbol of user `k` onto the array. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(DMatrix<C64>);

impl Precoder {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidInput("precoder must be at least 1x1".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("precoder has non-finite entries".into()));
        }
        Ok(Precoder(matrix))
    }

    pub fn zeros(antennas: usize, users: usize) -> Self {
        Precoder(DMatrix::zeros(antennas, users))
    }

    /// Builds an `antennas x users` precoder from a closure over `(m, k)`.
    pub fn from_fn(
        antennas: usize,
        users: usize,
        f: impl FnMut(usize, usize) -> C64,
    ) -> Result<Self> {
        Self::new(DMatrix::from_fn(antennas, users, f))
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn users(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn column(&self, k: usize) -> DVector<C64> {
        self.0.column(k).into_owned()
    }

    /// `PPᴴ`, the covariance of the amplifier input `x = Ps`.
    pub fn gram(&self) -> DMatrix<C64> {
        &self.0 * self.0.adjoint()
    }

    /// Per-antenna input powers `[PPᴴ]_{m,m}`.
    pub fn antenna_powers(&self) -> Vec<f64> {
        self.0
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Squared Frobenius norm, `trace(PPᴴ)`.
    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn scaled(&self, alpha: f64) -> Precoder {
        Precoder(&self.0 * C64::new(alpha, 0.0))
    }
}

fn normalize_columns(mut p: DMatrix<C64>) -> DMatrix<C64> {
    for mut col in p.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
    }
    p
}

/// Maximal-ratio transmission: column `k` is `h_k* / ‖h_k‖`.
pub fn mrt(channels: &ChannelSet) -> Result<Precoder> {
    let m = channels.antennas();
    let mut p = DMatrix::zeros(m, channels.users());
    for (k, h) in channels.vectors().iter().enumerate() {
        let norm = h.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateChannel { user: k });
        }
        p.set_column(k, &(h.map(|z| z.conj()) / C64::new(norm, 0.0)));
    }
    Precoder::new(p)
}

/// Zero-forcing: `Hᴴ(HHᴴ)⁻¹` with unit-norm columns.
pub fn zf(channels: &ChannelSet) -> Result<Precoder> {
    let (m, k) = (channels.antennas(), channels.users());
    if k > m {
        return Err(Error::SingularChannel(format!(
            "{k} users exceed {m} antennas"
        )));
    }
    let h = channels.matrix();
    let sv = h.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > ZF_MAX_CONDITION {
        return Err(Error::SingularChannel(format!(
            "condition number {:e} exceeds {:e}",
            smax / smin,
            ZF_MAX_CONDITION
        )));
    }
    let gram = &h * h.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::SingularChannel("HHᴴ is not invertible".into()))?;
    Precoder::new(normalize_columns(h.adjoint() * inv))
}

const SCAN_POINTS: usize = 64;
const BISECTION_STEPS: usize = 200;

/// Rescales `p` by the smallest `α > 0` such that the expected amplifier
/// output power equals `p_tot`.
///
/// The root is searched in `(0, 4·α_lin]` where `α_lin` solves the same
/// problem for a linear amplifier. The bracket is scanned for the first sign
/// change of `g(α) = E‖φ(αPs)‖² − p_tot` and then bisected to machine
/// precision, so non-monotone output power at extreme drive is handled by
/// picking the smallest root.
pub fn project_power(p: &Precoder, pa: &PaParams, p_tot: f64) -> Result<Precoder> {
    if !(p_tot > 0.0) || !p_tot.is_finite() {
        return Err(Error::InvalidInput(format!("p_tot must be positive, got {p_tot}")));
    }
    let sigma2 = p.antenna_powers();
    let trace: f64 = sigma2.iter().sum();
    if !(trace > 0.0) {
        return Err(Error::DegenerateInput);
    }
    let g = |alpha: f64| {
        let a2 = alpha * alpha;
        sigma2
            .iter()
            .map(|s| pa::antenna_output_power(a2 * s, pa))
            .sum::<f64>()
            - p_tot
    };
    let alpha_max = 4.0 * (p_tot / (pa.beta1().norm_sqr() * trace)).sqrt();

    let mut lo = 0.0;
    let mut hi = None;
    for j in 1..=SCAN_POINTS {
        let a = alpha_max * j as f64 / SCAN_POINTS as f64;
        let v = g(a);
        if v.is_nan() {
            break;
        }
        if v >= 0.0 {
            hi = Some(a);
            break;
        }
        lo = a;
    }
    let mut hi = hi.ok_or(Error::ProjectionInfeasible { p_tot, alpha_max })?;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // pick whichever endpoint lands closer to the target
    let alpha = if g(hi).abs() <= g(lo).abs() { hi } else { lo };
    Ok(p.scaled(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{array_response, ChannelSet};
    use crate::pa::expected_output_power;
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_precoder(m: usize, k: usize, s: u64) -> Precoder {
        let mut rng = seed::rng(s);
        Precoder::from_fn(m, k, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c(re, im)
        })
        .unwrap()
    }

    fn random_channels(m: usize, k: usize, s: u64) -> ChannelSet {
        let p = random_precoder(m, k, s);
        ChannelSet::from_vectors((0..k).map(|i| p.column(i)).collect()).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_element(2, 1, c(f64::NAN, 0.0));
        assert!(matches!(Precoder::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mrt_real_single_user() {
        let h = DVector::from_vec(vec![c(3.0, 0.0), c(4.0, 0.0)]);
        let ch = ChannelSet::from_vectors(vec![h]).unwrap();
        let p = mrt(&ch).unwrap();
        assert!((p.matrix()[(0, 0)] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((p.matrix()[(1, 0)] - c(0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mrt_broadside_is_uniform() {
        let m = 8;
        let ch = ChannelSet::from_vectors(vec![array_response(90.0, m)]).unwrap();
        let p = mrt(&ch).unwrap();
        let expect = 1.0 / (m as f64).sqrt();
        for z in p.matrix().iter() {
            assert!((z - c(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn mrt_gain_equals_channel_norm() {
        let ch = random_channels(6, 3, 11);
        let p = mrt(&ch).unwrap();
        for (k, h) in ch.vectors().iter().enumerate() {
            let gain = h.transpose() * p.column(k);
            assert!((gain[(0, 0)].norm() - h.norm()).abs() < 1e-12 * h.norm());
        }
    }

    #[test]
    fn mrt_zero_channel_errors() {
        let ch = ChannelSet::from_vectors(vec![DVector::zeros(4)]).unwrap();
        assert!(matches!(mrt(&ch), Err(Error::DegenerateChannel { user: 0 })));
    }

    #[test]
    fn zf_nulls_cross_terms() {
        let ch = random_channels(8, 4, 3);
        let p = zf(&ch).unwrap();
        for (k, h) in ch.vectors().iter().enumerate() {
            for r in 0..4 {
                let v = (h.transpose() * p.column(r))[(0, 0)].norm();
                if r != k {
                    assert!(v < 1e-10 * h.norm(), "k={k} r={r} v={v}");
                }
            }
            assert!((p.column(k).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_single_user_is_mrt() {
        let ch = random_channels(5, 1, 9);
        let a = zf(&ch).unwrap();
        let b = mrt(&ch).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn zf_orthogonal_channels_match_mrt() {
        // array responses at cos ψ = 0 and cos ψ = 0.5 are orthogonal for M = 4
        let m = 4;
        let ch = ChannelSet::from_vectors(vec![array_response(90.0, m), array_response(60.0, m)])
            .unwrap();
        let a = zf(&ch).unwrap();
        let b = mrt(&ch).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn zf_errors() {
        let ch = random_channels(2, 3, 1);
        assert!(matches!(zf(&ch), Err(Error::SingularChannel(_))));
        let h = array_response(45.0, 4);
        let ch = ChannelSet::from_vectors(vec![h.clone(), h * c(2.0, 0.0)]).unwrap();
        assert!(matches!(zf(&ch), Err(Error::SingularChannel(_))));
    }

    #[test]
    fn projection_linear_closed_form() {
        let pa = PaParams::new(c(0.9, 0.2), c(0.0, 0.0)).unwrap();
        let p = random_precoder(4, 2, 5);
        let q = project_power(&p, &pa, 3.0).unwrap();
        let alpha = (3.0 / (pa.beta1().norm_sqr() * p.frobenius_sq())).sqrt();
        assert!((q.matrix() - p.scaled(alpha).matrix()).norm() < 1e-12 * q.matrix().norm());
    }

    #[test]
    fn projection_hits_target_and_is_idempotent() {
        let pa = PaParams::default();
        let p_tot = crate::units::dbm_to_watts(43.0);
        let p = random_precoder(16, 2, 21);
        let q = project_power(&p, &pa, p_tot).unwrap();
        let power = expected_output_power(&q, &pa);
        assert!((power - p_tot).abs() / p_tot < 1e-8);
        let q2 = project_power(&q, &pa, p_tot).unwrap();
        assert!((q2.matrix() - q.matrix()).norm() <= 1e-10 * q.matrix().norm());
    }

    #[test]
    fn projection_errors() {
        let pa = PaParams::default();
        assert!(matches!(
            project_power(&Precoder::zeros(3, 2), &pa, 1.0),
            Err(Error::DegenerateInput)
        ));
    }

    #[test]
    fn bracket_always_contains_a_root() {
        // E|φ(x)|² >= |β₁|²σ²/3 for every β, so at 4·α_lin the output power is
        // at least 16/3 of the target
        let p = random_precoder(3, 2, 2);
        for b3 in [c(-1.0, 0.0), c(-0.5, 0.5), c(-0.04, -0.01), c(2.0, -3.0)] {
            let pa = PaParams::new(c(1.0, 0.0), b3).unwrap();
            for p_tot in [1e-6, 1.0, 1e6] {
                let q = project_power(&p, &pa, p_tot).unwrap();
                let power = expected_output_power(&q, &pa);
                assert!((power - p_tot).abs() / p_tot < 1e-8);
            }
        }
    }
}
