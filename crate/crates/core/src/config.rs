//! Experiment configuration file.
//!
//! Quantities that the tables quote in dB (noise density, margins) are dB in
//! the file; powers are in mW, energies in pJ. Every field has a default, so
//! an empty file describes the reference setup.

use serde::{Deserialize, Serialize};

use crate::codes::{default_codes, FixedRateCode};
use crate::energy::{ChannelSpec, SystemParams};
use crate::error::{invalid, Error, Result};
use crate::lt::{default_rate_grid, DegreeDistribution, SessionConfig};
use crate::montecarlo::{default_p_grid, PmfQuadrature};
use crate::optimizer::LinkContext;
use crate::units::db_to_linear;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub bandwidth_hz: f64,
    pub payload_bits: u32,
    pub period_s: f64,
    pub transient_s: f64,
    pub noise_n0_db: f64,
    pub amp_alpha: f64,
    pub p_sy_mw: f64,
    pub p_filt_mw: f64,
    pub p_filr_mw: f64,
    pub p_lna_mw: f64,
    pub p_ed_mw: f64,
    pub p_ifa_mw: f64,
    pub p_adc_mw: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            bandwidth_hz: 62.5e3,
            payload_bits: 8192,
            period_s: 1.4,
            transient_s: 5e-6,
            noise_n0_db: -180.0,
            amp_alpha: 0.33,
            p_sy_mw: 10.0,
            p_filt_mw: 2.5,
            p_filr_mw: 2.5,
            p_lna_mw: 9.0,
            p_ed_mw: 3.0,
            p_ifa_mw: 3.0,
            p_adc_mw: 7.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub omega: f64,
    pub eta: f64,
    pub margin_db: f64,
    pub l1_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            omega: 1.0,
            eta: 3.5,
            margin_db: 40.0,
            l1_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LtSection {
    pub k: usize,
    pub degree_dist: DegreeDistribution,
    pub rate_grid: Vec<f64>,
    pub batch: usize,
    pub max_iters: u32,
    pub trials: usize,
    pub p_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub quadrature_nodes: usize,
    pub quadrature_range: f64,
    pub snr_db_min: f64,
    pub snr_db_max: f64,
    pub snr_db_step: f64,
}

impl Default for LtSection {
    fn default() -> Self {
        let q = PmfQuadrature::default();
        LtSection {
            k: 1000,
            degree_dist: DegreeDistribution::bsc_optimized(),
            rate_grid: default_rate_grid(),
            batch: 1,
            max_iters: 50,
            trials: 2000,
            p_points: 40,
            p_min: 1e-5,
            p_max: 0.49,
            quadrature_nodes: q.nodes,
            quadrature_range: q.range_factor,
            snr_db_min: 0.0,
            snr_db_max: 50.0,
            snr_db_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub target_ber: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub d_points: usize,
    pub lt_substeps: usize,
    pub threshold_lo: f64,
    pub threshold_hi: f64,
    pub threshold_tol_m: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            target_ber: 1e-3,
            d_min: 1.0,
            d_max: 200.0,
            d_points: 60,
            lt_substeps: 10,
            threshold_lo: 0.1,
            threshold_hi: 200.0,
            threshold_tol_m: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSection {
    pub e_add_pj: f64,
    pub e_mult_pj: f64,
}

impl Default for DecoderSection {
    fn default() -> Self {
        DecoderSection {
            e_add_pj: 0.5,
            e_mult_pj: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub lt: LtSection,
    pub sweep: SweepSection,
    pub decoder: DecoderSection,
    pub codes: Vec<FixedRateCode>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 2024,
            system: SystemSection::default(),
            channel: ChannelSection::default(),
            lt: LtSection::default(),
            sweep: SweepSection::default(),
            decoder: DecoderSection::default(),
            codes: default_codes(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn system_params(&self) -> SystemParams {
        let s = &self.system;
        SystemParams {
            bandwidth_hz: s.bandwidth_hz,
            payload_bits: s.payload_bits,
            period_s: s.period_s,
            transient_s: s.transient_s,
            noise_n0: db_to_linear(s.noise_n0_db),
            amp_alpha: s.amp_alpha,
            p_sy: s.p_sy_mw / 1e3,
            p_filt: s.p_filt_mw / 1e3,
            p_filr: s.p_filr_mw / 1e3,
            p_lna: s.p_lna_mw / 1e3,
            p_ed: s.p_ed_mw / 1e3,
            p_ifa: s.p_ifa_mw / 1e3,
            p_adc: s.p_adc_mw / 1e3,
        }
    }

    pub fn channel_spec(&self) -> ChannelSpec {
        let c = &self.channel;
        ChannelSpec {
            omega: c.omega,
            eta: c.eta,
            margin_ml: db_to_linear(c.margin_db),
            l1: db_to_linear(c.l1_db),
        }
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            k: self.lt.k,
            dist: self.lt.degree_dist.clone(),
            rate_grid: self.lt.rate_grid.clone(),
            batch: self.lt.batch,
            max_iters: self.lt.max_iters,
        }
    }

    pub fn p_grid(&self) -> Vec<f64> {
        default_p_grid(self.lt.p_points, self.lt.p_min, self.lt.p_max)
    }

    pub fn quadrature(&self) -> PmfQuadrature {
        PmfQuadrature {
            nodes: self.lt.quadrature_nodes,
            range_factor: self.lt.quadrature_range,
        }
    }

    /// Average-SNR rows of the LT tables, `snr_db_min..=snr_db_max`.
    pub fn snr_rows(&self) -> Vec<f64> {
        let l = &self.lt;
        let n = ((l.snr_db_max - l.snr_db_min) / l.snr_db_step + 1e-9).floor() as usize;
        (0..=n).map(|i| l.snr_db_min + i as f64 * l.snr_db_step).collect()
    }

    pub fn link_context(&self) -> LinkContext {
        LinkContext {
            sys: self.system_params(),
            ch: self.channel_spec(),
            target_ber: self.sweep.target_ber,
            e_add: self.decoder.e_add_pj / 1e12,
            e_mult: self.decoder.e_mult_pj / 1e12,
            lt_substeps: self.sweep.lt_substeps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system_params().validate()?;
        self.channel_spec().validate()?;
        let lt = &self.lt;
        self.session_config().validate()?;
        if lt.trials < 100 {
            return Err(invalid("lt.trials", "need at least 100 trials"));
        }
        if lt.p_points == 0 || !(lt.p_min > 0.0 && lt.p_min < lt.p_max && lt.p_max < 0.5) {
            return Err(invalid("lt.p_min", "need 0 < p_min < p_max < 0.5 and p_points >= 1"));
        }
        if lt.quadrature_nodes < 2 {
            return Err(invalid("lt.quadrature_nodes", "need at least 2 nodes"));
        }
        if !(lt.quadrature_range > 0.0) {
            return Err(invalid("lt.quadrature_range", "must be positive"));
        }
        if !(lt.snr_db_step > 0.0 && lt.snr_db_max >= lt.snr_db_min) {
            return Err(invalid("lt.snr_db_step", "need a positive step and snr_db_max >= snr_db_min"));
        }
        let sw = &self.sweep;
        if !(sw.target_ber > 0.0 && sw.target_ber < 0.5) {
            return Err(invalid("sweep.target_ber", "must lie in (0, 0.5)"));
        }
        if !(sw.d_min > 0.0 && sw.d_max > sw.d_min && sw.d_points >= 2) {
            return Err(invalid("sweep.d_min", "need 0 < d_min < d_max and d_points >= 2"));
        }
        if !(sw.threshold_lo > 0.0 && sw.threshold_hi > sw.threshold_lo) {
            return Err(invalid("sweep.threshold_lo", "need 0 < threshold_lo < threshold_hi"));
        }
        if !(sw.threshold_tol_m > 0.0) {
            return Err(invalid("sweep.threshold_tol_m", "must be positive"));
        }
        if !(self.decoder.e_add_pj >= 0.0) {
            return Err(invalid("decoder.e_add_pj", "must be >= 0"));
        }
        if !(self.decoder.e_mult_pj >= 0.0) {
            return Err(invalid("decoder.e_mult_pj", "must be >= 0"));
        }
        for (i, c) in self.codes.iter().enumerate() {
            c.validate(&format!("codes[{i}]"))?;
        }
        Ok(())
    }
}
