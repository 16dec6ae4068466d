//! Closed-form energy accounting for one reporting period.
//!
//! A sensor wakes (transient), sends `N / R_c` coded bits with NC-MFSK over
//! `T_ac`, and sleeps. Sleep power is taken as zero. The total per period is
//!
//! ```text
//! E_N = (1+a) [bracket] L_d N0 / (Omega Y_c) * N / (R_c log2 M)
//!     + (P_c - P_amp) * M N / (B R_c log2 M)
//!     + 1.75 P_sy T_tr
//!     + E_dec
//! ```

use serde::{Deserialize, Serialize};

use crate::channel::{check_constellation, required_average_snr_uncoded};
use crate::error::{domain, invalid, Error, Result};

/// Radio and timing parameters, SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub payload_bits: u32,
    pub period_s: f64,
    pub transient_s: f64,
    /// One-sided noise density `N0` in J/Hz.
    pub noise_n0: f64,
    /// Power amplifier overhead, `P_amp = alpha * P_t`.
    pub amp_alpha: f64,
    pub p_sy: f64,
    pub p_filt: f64,
    pub p_filr: f64,
    pub p_lna: f64,
    pub p_ed: f64,
    pub p_ifa: f64,
    pub p_adc: f64,
}

impl Default for SystemParams {
    /// 802.15.4-style link: 62.5 kHz, 1 KiB per 1.4 s, class-B amplifier.
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 62.5e3,
            payload_bits: 8192,
            period_s: 1.4,
            transient_s: 5e-6,
            noise_n0: 1e-18,
            amp_alpha: 0.33,
            p_sy: 10e-3,
            p_filt: 2.5e-3,
            p_filr: 2.5e-3,
            p_lna: 9e-3,
            p_ed: 3e-3,
            p_ifa: 3e-3,
            p_adc: 7e-3,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("system.bandwidth_hz", self.bandwidth_hz),
            ("system.period_s", self.period_s),
            ("system.transient_s", self.transient_s),
            ("system.noise_n0", self.noise_n0),
            ("system.p_sy", self.p_sy),
            ("system.p_filt", self.p_filt),
            ("system.p_filr", self.p_filr),
            ("system.p_lna", self.p_lna),
            ("system.p_ed", self.p_ed),
            ("system.p_ifa", self.p_ifa),
            ("system.p_adc", self.p_adc),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be strictly positive, got {v}")));
            }
        }
        if self.payload_bits == 0 {
            return Err(invalid("system.payload_bits", "must be strictly positive"));
        }
        if !(self.amp_alpha >= 0.0 && self.amp_alpha.is_finite()) {
            return Err(invalid("system.amp_alpha", "must be >= 0"));
        }
        if self.transient_s >= self.period_s {
            return Err(invalid(
                "system.transient_s",
                "transient duration must be shorter than the period",
            ));
        }
        Ok(())
    }

    /// Transmitter circuit power excluding the amplifier: `P_sy + P_filt`.
    pub fn tx_circuit_power(&self) -> f64 {
        self.p_sy + self.p_filt
    }

    /// Receiver circuit power for `m` tones: `P_lna + M(P_filr + P_ed) + P_ifa + P_adc`.
    pub fn rx_circuit_power(&self, m: u32) -> f64 {
        self.p_lna + m as f64 * (self.p_filr + self.p_ed) + self.p_ifa + self.p_adc
    }

    /// `P_c - P_amp`.
    pub fn circuit_power(&self, m: u32) -> f64 {
        self.tx_circuit_power() + self.rx_circuit_power(m)
    }

    /// Wake-up energy, governed by the synthesizer: `1.75 P_sy T_tr`.
    pub fn transient_energy(&self) -> f64 {
        1.75 * self.p_sy * self.transient_s
    }
}

/// Rayleigh fading scale and the path-loss model `L_d = M_l d^eta L_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub omega: f64,
    pub eta: f64,
    /// Linear gain margin.
    pub margin_ml: f64,
    /// Linear gain factor at 1 m (antenna gains and wavelength folded in).
    pub l1: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            omega: 1.0,
            eta: 3.5,
            margin_ml: 1e4,
            l1: 1e3,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(invalid("channel.omega", "must be > 0"));
        }
        if !(self.eta >= 2.0 && self.eta.is_finite()) {
            return Err(invalid("channel.eta", format!("path-loss exponent must be >= 2, got {}", self.eta)));
        }
        if !(self.margin_ml >= 1.0 && self.margin_ml.is_finite()) {
            return Err(invalid("channel.margin_ml", "gain margin must be >= 1 (0 dB)"));
        }
        if !(self.l1 > 0.0 && self.l1.is_finite()) {
            return Err(invalid("channel.l1", "must be > 0"));
        }
        Ok(())
    }
}

/// NC-MFSK with `m` orthogonal tones filling bandwidth `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationConfig {
    pub m: u32,
    pub bits_per_symbol: u32,
    pub symbol_time_s: f64,
}

impl ModulationConfig {
    pub fn new(m: u32, sys: &SystemParams) -> Result<Self> {
        check_constellation(m)?;
        Ok(ModulationConfig {
            m,
            bits_per_symbol: m.trailing_zeros(),
            symbol_time_s: m as f64 / sys.bandwidth_hz,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub radiated: f64,
    pub tx_circuit: f64,
    pub rx_circuit: f64,
    pub transient: f64,
    pub decoder: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(radiated: f64, tx_circuit: f64, rx_circuit: f64, transient: f64, decoder: f64) -> Self {
        EnergyBreakdown {
            radiated,
            tx_circuit,
            rx_circuit,
            transient,
            decoder,
            total: radiated + tx_circuit + rx_circuit + transient + decoder,
        }
    }
}

/// Linear path-loss gain `M_l d^eta L_1`.
pub fn path_loss_gain(d: f64, ch: &ChannelSpec) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("distance must be > 0, got {d}")));
    }
    Ok(ch.margin_ml * d.powf(ch.eta) * ch.l1)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(domain(format!("code rate must lie in (0, 1], got {rate}")));
    }
    Ok(())
}

/// `T_ac = M N / (B log2(M) R_c)`.
pub fn active_mode_duration(sys: &SystemParams, modc: &ModulationConfig, rate: f64) -> Result<f64> {
    check_rate(rate)?;
    Ok(modc.m as f64 * sys.payload_bits as f64
        / (sys.bandwidth_hz * modc.bits_per_symbol as f64 * rate))
}

/// Largest `M = 2^b` with `2^b / b <= (B/N)(T_N - T_tr)`, i.e. the largest
/// constellation whose uncoded active period fits in the duty cycle.
pub fn max_constellation_size(sys: &SystemParams) -> Result<u32> {
    let budget = sys.bandwidth_hz / sys.payload_bits as f64 * (sys.period_s - sys.transient_s);
    let fits = |b: u32| (1u64 << b) as f64 / b as f64 <= budget * (1.0 + 1e-12);
    if !fits(1) {
        return Err(Error::PeriodTooShort(budget));
    }
    // 2^b / b is non-decreasing for b >= 1
    let mut b = 1;
    while b < 31 && fits(b + 1) {
        b += 1;
    }
    Ok(1u32 << b)
}

/// Uncoded transmit energy per symbol reaching `target_ber` at path loss `path_loss`.
pub fn transmit_energy_per_symbol(
    modc: &ModulationConfig,
    target_ber: f64,
    path_loss: f64,
    ch: &ChannelSpec,
    sys: &SystemParams,
) -> Result<f64> {
    let bracket = required_average_snr_uncoded(modc.m, target_ber)?;
    Ok(bracket * path_loss * sys.noise_n0 / ch.omega)
}

/// Per-period energy of a (possibly coded) NC-MFSK link at distance `d`.
///
/// `gain_linear` is the coding gain as a linear factor; `rate = 1`,
/// `gain_linear = 1`, `decoder_energy = 0` is the uncoded link.
#[allow(clippy::too_many_arguments)]
pub fn total_energy(
    sys: &SystemParams,
    modc: &ModulationConfig,
    ch: &ChannelSpec,
    d: f64,
    target_ber: f64,
    rate: f64,
    gain_linear: f64,
    decoder_energy: f64,
) -> Result<EnergyBreakdown> {
    let m_max = max_constellation_size(sys)?;
    if modc.m > m_max {
        return Err(Error::Constraint(format!("M = {} exceeds M_max = {m_max}", modc.m)));
    }
    check_rate(rate)?;
    if !(gain_linear > 0.0 && gain_linear.is_finite()) {
        return Err(domain(format!("coding gain must be positive, got {gain_linear}")));
    }
    if !(decoder_energy >= 0.0) {
        return Err(domain("decoder energy must be >= 0"));
    }
    let ld = path_loss_gain(d, ch)?;
    let e_sym = transmit_energy_per_symbol(modc, target_ber, ld, ch, sys)?;
    let symbols = sys.payload_bits as f64 / (rate * modc.bits_per_symbol as f64);
    let radiated = (1.0 + sys.amp_alpha) * e_sym / gain_linear * symbols;
    let t_ac = active_mode_duration(sys, modc, rate)?;
    Ok(EnergyBreakdown::from_parts(
        radiated,
        sys.tx_circuit_power() * t_ac,
        sys.rx_circuit_power(modc.m) * t_ac,
        sys.transient_energy(),
        decoder_energy,
    ))
}

/// Distance beyond which a fixed-rate code (rate `R_c`, gain `Y_c`) spends
/// less per period than the uncoded link at the same `M`:
///
/// `d^eta = M Omega (P_c - P_amp) / ((1+a) bracket N0 B L_1 M_l) * Y_c (1 - R_c) / (Y_c R_c - 1)`
pub fn crossover_distance(
    sys: &SystemParams,
    modc: &ModulationConfig,
    ch: &ChannelSpec,
    target_ber: f64,
    rate: f64,
    gain_linear: f64,
) -> Result<f64> {
    check_rate(rate)?;
    let excess = gain_linear * rate - 1.0;
    if !(excess > 1e-12) {
        return Err(Error::NoFiniteCrossover(format!(
            "gain x rate = {} <= 1, coded radiated saving never repays the circuit overhead",
            gain_linear * rate
        )));
    }
    let bracket = required_average_snr_uncoded(modc.m, target_ber)?;
    if bracket == 0.0 {
        return Err(Error::NoFiniteCrossover("zero required SNR".into()));
    }
    let m = modc.m as f64;
    let ratio = m * ch.omega * sys.circuit_power(modc.m)
        / ((1.0 + sys.amp_alpha) * bracket * sys.noise_n0 * sys.bandwidth_hz * ch.l1 * ch.margin_ml);
    let factor = gain_linear * (1.0 - rate) / excess;
    Ok((ratio * factor).powf(1.0 / ch.eta))
}

/// BCH decoder energy for an `N`-bit payload: `ceil(N/k) (2nt + 2t^2)(E_add + E_mult)`.
/// A partial last block is zero-padded and charged in full.
pub fn bch_decoder_energy(n: u32, k: u32, t: u32, payload_bits: u32, e_add: f64, e_mult: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("BCH message length k must be >= 1"));
    }
    if n <= k {
        return Err(domain(format!("BCH block length n = {n} must exceed k = {k}")));
    }
    let blocks = payload_bits.div_ceil(k) as f64;
    let (n, t) = (n as f64, t as f64);
    Ok(blocks * (2.0 * n * t + 2.0 * t * t) * (e_add + e_mult))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::db_to_linear;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    /// Term-by-term uncoded evaluation, written out independently of `total_energy`.
    fn uncoded_by_hand(m: u32, d: f64, pb: f64) -> f64 {
        let (b, n, n0, alpha) = (62_500.0, 8192.0, 1e-18, 0.33);
        let mf = m as f64;
        let bits = mf.log2();
        let ps = 2.0 * (mf - 1.0) / mf * pb;
        // the direct pow form loses up to ~12 digits at small P_b
        let naive = 1.0 / (1.0 - (1.0 - ps).powf(1.0 / (mf - 1.0))) - 2.0;
        let bracket = crate::channel::required_average_snr_uncoded(m, pb).unwrap();
        assert!(rel(bracket, naive) < 1e-10);
        let ld = 1e4 * d.powf(3.5) * 1e3;
        let pc = 0.010 + 0.0025 + 0.009 + mf * (0.0025 + 0.003) + 0.003 + 0.007;
        (1.0 + alpha) * bracket * ld * n0 * n / bits + pc * mf * n / (b * bits) + 1.75 * 0.010 * 5e-6
    }

    #[test]
    fn path_loss_examples() {
        let ch = ChannelSpec::default();
        assert_eq!(path_loss_gain(1.0, &ch).unwrap(), 1e7);
        let l40 = path_loss_gain(40.0, &ch).unwrap();
        assert!(rel(l40, 4.046e12) < 1e-3, "{l40}");
        assert!(rel(l40, 1e7 * 40f64.powf(3.5)) < 1e-15);
        assert!(path_loss_gain(0.0, &ch).is_err());
        assert!(path_loss_gain(-3.0, &ch).is_err());
    }

    #[test]
    fn active_duration_examples() {
        let sys = SystemParams::default();
        let m2 = ModulationConfig::new(2, &sys).unwrap();
        let m64 = ModulationConfig::new(64, &sys).unwrap();
        assert!(rel(active_mode_duration(&sys, &m2, 1.0).unwrap(), 0.262144) < 1e-15);
        assert!(rel(active_mode_duration(&sys, &m64, 1.0).unwrap(), 64.0 * 8192.0 / (62500.0 * 6.0)) < 1e-15);
        assert_eq!(
            active_mode_duration(&sys, &m2, 0.5).unwrap(),
            2.0 * active_mode_duration(&sys, &m2, 1.0).unwrap()
        );
        assert!(active_mode_duration(&sys, &m2, 0.0).is_err());
        assert!(active_mode_duration(&sys, &m2, 1.2).is_err());
        assert_eq!(m64.symbol_time_s * sys.bandwidth_hz, 64.0);
    }

    #[test]
    fn max_constellation_examples() {
        assert_eq!(max_constellation_size(&SystemParams::default()).unwrap(), 64);

        // (B/N)(T_N - T_tr) = 2: M = 2 and M = 4 share T_ac = 2N/B, both fit.
        let mut sys = SystemParams::default();
        sys.transient_s = 0.0625;
        sys.period_s = 2.0 * 8192.0 / 62_500.0 + sys.transient_s;
        assert_eq!(max_constellation_size(&sys).unwrap(), 4);

        sys.period_s = 8192.0 / 62_500.0 + sys.transient_s;
        assert!(matches!(max_constellation_size(&sys), Err(Error::PeriodTooShort(_))));
    }

    #[test]
    fn transmit_energy_examples() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        let m2 = ModulationConfig::new(2, &sys).unwrap();
        let e = transmit_energy_per_symbol(&m2, 1e-3, 1e7, &ch, &sys).unwrap();
        assert!(rel(e, 9.98e-9) < 1e-12);
        assert_eq!(transmit_energy_per_symbol(&m2, 0.5, 1e7, &ch, &sys).unwrap(), 0.0);
        let m4 = ModulationConfig::new(4, &sys).unwrap();
        let e4 = transmit_energy_per_symbol(&m4, 1e-3, 1e7, &ch, &sys).unwrap();
        assert!(rel(e4, 1996.999_666_416_693 * 1e-11) < 1e-9);
        assert!(transmit_energy_per_symbol(&m4, 0.8, 1e7, &ch, &sys).is_err());
    }

    #[test]
    fn uncoded_regression_at_40m() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        let m2 = ModulationConfig::new(2, &sys).unwrap();
        let e = total_energy(&sys, &m2, &ch, 40.0, 1e-3, 1.0, 1.0, 0.0).unwrap();
        let by_hand = uncoded_by_hand(2, 40.0, 1e-3);
        assert!(rel(e.total, by_hand) < 1e-12);
        // Frozen from the term-by-term evaluation above.
        assert!(rel(e.total, 44.024_255_089_659_54) < 1e-12, "{}", e.total);
    }

    #[test]
    fn uncoded_matches_hand_formula() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        for m in [2u32, 4, 8, 16, 32, 64] {
            let modc = ModulationConfig::new(m, &sys).unwrap();
            for d in [0.5, 1.0, 7.0, 40.0, 180.0] {
                for pb in [1e-3, 1e-4, 0.05] {
                    let e = total_energy(&sys, &modc, &ch, d, pb, 1.0, 1.0, 0.0).unwrap();
                    let r = rel(e.total, uncoded_by_hand(m, d, pb));
                    assert!(r < 1e-12, "M={m} d={d} pb={pb} rel={r:e}");
                }
            }
        }
    }

    #[test]
    fn gain_only_touches_radiated() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        let modc = ModulationConfig::new(4, &sys).unwrap();
        let a = total_energy(&sys, &modc, &ch, 30.0, 1e-3, 0.5, 2.0, 0.0).unwrap();
        let b = total_energy(&sys, &modc, &ch, 30.0, 1e-3, 0.5, 4.0, 0.0).unwrap();
        assert!(rel(b.radiated, a.radiated / 2.0) < 1e-15);
        assert_eq!(a.tx_circuit, b.tx_circuit);
        assert_eq!(a.rx_circuit, b.rx_circuit);
        assert_eq!(a.transient, b.transient);
    }

    #[test]
    fn total_energy_errors() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        let m128 = ModulationConfig::new(128, &sys).unwrap();
        assert!(matches!(
            total_energy(&sys, &m128, &ch, 10.0, 1e-3, 1.0, 1.0, 0.0),
            Err(Error::Constraint(_))
        ));
        assert!(ModulationConfig::new(12, &sys).is_err());
    }

    #[test]
    fn crossover_examples() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::default();
        let m2 = ModulationConfig::new(2, &sys).unwrap();
        assert!(matches!(
            crossover_distance(&sys, &m2, &ch, 1e-3, 0.5, 2.0),
            Err(Error::NoFiniteCrossover(_))
        ));
        let gain = db_to_linear(4.0);
        let d = crossover_distance(&sys, &m2, &ch, 1e-3, 0.5, gain).unwrap();
        let e = |d: f64, r: f64, g: f64| total_energy(&sys, &m2, &ch, d, 1e-3, r, g, 0.0).unwrap().total;
        assert!(rel(e(d, 0.5, gain), e(d, 1.0, 1.0)) < 1e-3);
        assert!(e(1.1 * d, 0.5, gain) < e(1.1 * d, 1.0, 1.0));
        assert!(e(0.9 * d, 0.5, gain) > e(0.9 * d, 1.0, 1.0));
        // Frozen from the energy-equality root (independent Python evaluation).
        assert!(rel(d, 5.913_216_025_163_059) < 1e-9, "{d}");
    }

    #[test]
    fn bch_decoder_examples() {
        let per_codeword = bch_decoder_energy(31, 16, 3, 16, 0.5e-12, 0.5e-12).unwrap();
        assert!(rel(per_codeword, 204e-12) < 1e-12);
        let full = bch_decoder_energy(31, 16, 3, 8192, 0.5e-12, 0.5e-12).unwrap();
        assert!(rel(full, 104.448e-9) < 1e-12);
        assert_eq!(bch_decoder_energy(31, 16, 0, 8192, 0.5e-12, 0.5e-12).unwrap(), 0.0);
        assert!(bch_decoder_energy(31, 0, 3, 8192, 0.5e-12, 0.5e-12).is_err());
        // 8192 / 11 is not integral: 745 padded blocks
        let padded = bch_decoder_energy(15, 11, 1, 8192, 1e-12, 0.0).unwrap();
        assert!(rel(padded, 745.0 * 32e-12) < 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let mut ch = ChannelSpec::default();
        ch.eta = 1.5;
        match ch.validate() {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "channel.eta"),
            other => panic!("{other:?}"),
        }
        let mut sys = SystemParams::default();
        sys.transient_s = 2.0;
        assert!(sys.validate().is_err());
    }

    proptest! {
        #[test]
        fn breakdown_sums_and_scales(
            b in 1u32..=6,
            d in 0.5f64..300.0,
            pb in 1e-6f64..0.2,
            rate in 0.05f64..=1.0,
            gain_db in 0.0f64..12.0,
            dec in 0.0f64..1e-3,
        ) {
            let sys = SystemParams::default();
            let ch = ChannelSpec::default();
            let modc = ModulationConfig::new(1 << b, &sys).unwrap();
            let g = db_to_linear(gain_db);
            let e = total_energy(&sys, &modc, &ch, d, pb, rate, g, dec).unwrap();
            let parts = e.radiated + e.tx_circuit + e.rx_circuit + e.transient + e.decoder;
            prop_assert!(rel(e.total, parts) <= 1e-12);
            for p in [e.radiated, e.tx_circuit, e.rx_circuit, e.transient, e.decoder] {
                prop_assert!(p >= 0.0);
            }
            let e2 = total_energy(&sys, &modc, &ch, 2.0 * d, pb, rate, g, dec).unwrap();
            prop_assert!(rel(e2.radiated, e.radiated * 2f64.powf(ch.eta)) < 1e-12);
            prop_assert_eq!(e2.tx_circuit, e.tx_circuit);
            prop_assert_eq!(e2.rx_circuit, e.rx_circuit);
            prop_assert_eq!(e2.transient, e.transient);
        }

        #[test]
        fn per_symbol_energy_monotone(m_exp in 1u32..=6, pb in 1e-6f64..0.4, ld in 1e3f64..1e13) {
            let sys = SystemParams::default();
            let ch = ChannelSpec::default();
            let modc = ModulationConfig::new(1 << m_exp, &sys).unwrap();
            let e = transmit_energy_per_symbol(&modc, pb, ld, &ch, &sys).unwrap();
            let looser = transmit_energy_per_symbol(&modc, pb * 1.01, ld, &ch, &sys).unwrap();
            let farther = transmit_energy_per_symbol(&modc, pb, ld * 1.01, &ch, &sys).unwrap();
            prop_assert!(looser < e);
            prop_assert!(farther > e);
        }
    }
}
