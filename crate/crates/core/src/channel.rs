//! Rayleigh flat-fading statistics and the non-coherent MFSK error map.
//!
//! Within one codeword the fading coefficient is frozen, so the decoder sees
//! a binary symmetric channel whose crossover is the conditional bit error
//! probability at that codeword's instantaneous SNR.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::sync::OnceLock;

use crate::error::{domain, Result};

/// One draw of the squared fading amplitude `|h|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub gain_sq: f64,
}

impl FadingDraw {
    /// Squared composite coefficient `|G|^2 = |h|^2 / L_d`.
    pub fn composite_gain_sq(&self, path_loss: f64) -> f64 {
        self.gain_sq / path_loss
    }
}

/// Instantaneous and average SNR of one codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub inst_snr: f64,
    pub avg_snr: f64,
}

impl SnrPoint {
    /// Scales a fading draw onto an average SNR: `gamma = (|h|^2 / omega) * avg`.
    pub fn from_draw(draw: FadingDraw, omega: f64, avg_snr: f64) -> Self {
        SnrPoint {
            inst_snr: draw.gain_sq / omega * avg_snr,
            avg_snr,
        }
    }
}

/// `|h|^2` for a Rayleigh amplitude is exponential with mean `omega`.
pub fn sample_fading<R: Rng + ?Sized>(omega: f64, rng: &mut R) -> FadingDraw {
    let e: f64 = Exp1.sample(rng);
    FadingDraw { gain_sq: omega * e }
}

pub(crate) fn check_constellation(m: u32) -> Result<()> {
    if m < 2 || !m.is_power_of_two() {
        return Err(domain(format!("constellation size {m} is not a power of two >= 2")));
    }
    Ok(())
}

/// Largest admissible target BER for size `m`; at this value `P_s = 1`.
pub fn max_target_ber(m: u32) -> f64 {
    m as f64 / (2.0 * (m as f64 - 1.0))
}

/// Average SNR an uncoded NC-MFSK link needs to reach `target_ber` in
/// Rayleigh fading:
///
/// `[ (1 - (1 - 2(M-1)/M * P_b)^(1/(M-1)))^-1 - 2 ]`
///
/// Clamped at zero for target BERs above the random-guess level.
pub fn required_average_snr_uncoded(m: u32, target_ber: f64) -> Result<f64> {
    check_constellation(m)?;
    if !(target_ber > 0.0 && target_ber < max_target_ber(m)) {
        return Err(domain(format!(
            "target BER {target_ber} outside (0, {}) for M = {m}",
            max_target_ber(m)
        )));
    }
    let mf = m as f64;
    let ps = 2.0 * (mf - 1.0) / mf * target_ber;
    // 1 - (1 - ps)^(1/(M-1)) without cancellation for small ps
    let per_branch = -((-ps).ln_1p() / (mf - 1.0)).exp_m1();
    Ok((1.0 / per_branch - 2.0).max(0.0))
}

/// Conditional symbol error probability of non-coherent MFSK at SNR `gamma`.
///
/// Uses the alternating series
/// `sum_{j=1}^{M-1} (-1)^{j+1} C(M-1,j)/(j+1) exp(-j gamma/(j+1))`
/// when its rounding bound is small relative to the result; otherwise (large
/// `M` at moderate SNR, where the binomials cancel catastrophically) it
/// integrates the Rician envelope against the noise-branch maximum directly.
pub fn conditional_symbol_error_prob(gamma: f64, m: u32) -> f64 {
    debug_assert!(m >= 2 && m.is_power_of_two());
    let gamma = gamma.max(0.0);
    if let Some(ps) = ser_series(gamma, m) {
        return ps.clamp(0.0, 1.0);
    }
    ser_quadrature(gamma, m).clamp(0.0, 1.0)
}

/// Conditional bit error probability, `P_b = M / (2(M-1)) * P_s`, in `[0, 1/2]`.
pub fn conditional_bit_error_prob(gamma: f64, m: u32) -> f64 {
    let ps = conditional_symbol_error_prob(gamma, m);
    (max_target_ber(m) * ps).clamp(0.0, 0.5)
}

/// BSC crossover seen by the LT decoder for one codeword at SNR `gamma`.
/// Identical to [`conditional_bit_error_prob`].
#[inline]
pub fn crossover_for_snr(gamma: f64, m: u32) -> f64 {
    conditional_bit_error_prob(gamma, m)
}

fn ser_series(gamma: f64, m: u32) -> Option<f64> {
    let n = (m - 1) as usize;
    let mut binom = 1.0f64;
    // Neumaier summation
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut abs_sum = 0.0f64;
    for j in 1..=n {
        binom = binom * (n - j + 1) as f64 / j as f64;
        let jf = j as f64;
        let mag = binom / (jf + 1.0) * (-jf * gamma / (jf + 1.0)).exp();
        let term = if j % 2 == 1 { mag } else { -mag };
        abs_sum += mag;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    if abs_sum == 0.0 {
        // every term underflowed: P_s is below the smallest double
        return Some(0.0);
    }
    let ps = sum + comp;
    let bound = 8.0 * f64::EPSILON * abs_sum;
    if n == 1 || (ps > 0.0 && bound <= 1e-13 * ps) {
        Some(ps)
    } else {
        None
    }
}

/// `P_s = int_0^inf f_rice(r; s) [1 - (1 - e^{-r^2/2})^{M-1}] dr`, `s^2 = 2 gamma`.
fn ser_quadrature(gamma: f64, m: u32) -> f64 {
    let s = (2.0 * gamma).sqrt();
    let others = (m - 1) as f64;
    let integrand = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let q = (-0.5 * r * r).exp();
        let err = -(others * (-q).ln_1p()).exp_m1();
        let d = r - s;
        r * (-0.5 * d * d).exp() * bessel_i0e(r * s) * err
    };
    let upper = s + 12.0;
    let panel = 0.5;
    let panels = (upper / panel).ceil() as usize;
    let (nodes, weights) = gauss_legendre_16();
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 * panel;
        let half = 0.5 * panel;
        let mid = a + half;
        let mut acc = 0.0;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            acc += w * integrand(mid + half * x);
        }
        total += acc * half;
    }
    total
}

/// Exponentially scaled modified Bessel function, `e^{-x} I0(x)`, `x >= 0`.
pub(crate) fn bessel_i0e(x: f64) -> f64 {
    if x <= 30.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= y / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            let odd = 2.0 * k + 1.0;
            term *= odd * odd / (8.0 * (k + 1.0) * x);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

fn gauss_legendre_16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
