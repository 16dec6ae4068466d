//! Channel code descriptions. Fixed-rate codes are characterised only by
//! their rate and a coding-gain table; no BCH or Viterbi decoding happens
//! here.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lt::DegreeDistribution;
use crate::units::db_to_linear;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeFamily {
    Bch,
    Conv,
}

impl CodeFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CodeFamily::Bch => "bch",
            CodeFamily::Conv => "conv",
        }
    }
}

/// Coding gains (dB) at one target BER, indexed by `log2(M) - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub ber: f64,
    pub db: Vec<f64>,
}

/// `(n, k, t)` of a BCH code, used for decoder energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BchParams {
    pub n: u32,
    pub k: u32,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedRateCode {
    pub name: String,
    pub family: CodeFamily,
    pub rate: f64,
    pub gains: Vec<GainRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bch: Option<BchParams>,
}

impl FixedRateCode {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(invalid(format!("{path}.rate"), format!("must lie in (0, 1], got {}", self.rate)));
        }
        for (i, row) in self.gains.iter().enumerate() {
            if !(row.ber > 0.0 && row.ber < 0.5) {
                return Err(invalid(format!("{path}.gains[{i}].ber"), "must lie in (0, 0.5)"));
            }
            if let Some(g) = row.db.iter().find(|g| !(**g >= 0.0)) {
                return Err(invalid(
                    format!("{path}.gains[{i}].db"),
                    format!("fixed-rate coding gains must be >= 0 dB, got {g}"),
                ));
            }
        }
        if let Some(p) = self.bch {
            if p.k == 0 || p.n <= p.k {
                return Err(invalid(format!("{path}.bch"), "need n > k >= 1"));
            }
        }
        Ok(())
    }

    /// Coding gain in dB for constellation `m` at `target_ber`. The BER must
    /// match a tabulated row to within 1e-9 relative.
    pub fn gain_db(&self, m: u32, target_ber: f64) -> Result<f64> {
        let row = self
            .gains
            .iter()
            .find(|r| ((r.ber - target_ber) / target_ber).abs() < 1e-9)
            .ok_or_else(|| {
                Error::Domain(format!("code {} has no gain row for BER {target_ber}", self.name))
            })?;
        let idx = m.trailing_zeros() as usize;
        if idx == 0 || idx > row.db.len() {
            return Err(Error::Domain(format!("code {} has no gain entry for M = {m}", self.name)));
        }
        Ok(row.db[idx - 1])
    }

    pub fn gain_linear(&self, m: u32, target_ber: f64) -> Result<f64> {
        self.gain_db(m, target_ber).map(db_to_linear)
    }

    /// The identity code: rate 1, 0 dB everywhere.
    pub fn identity(bers: &[f64]) -> Self {
        FixedRateCode {
            name: "identity".into(),
            family: CodeFamily::Conv,
            rate: 1.0,
            gains: bers.iter().map(|&ber| GainRow { ber, db: vec![0.0; 6] }).collect(),
            bch: None,
        }
    }
}

/// What a link applies on top of NC-MFSK.
#[derive(Debug, Clone, PartialEq)]
pub enum CodeScheme {
    Uncoded,
    FixedRate(FixedRateCode),
    Lt {
        degree_dist: DegreeDistribution,
        rate_grid: Vec<f64>,
    },
}

impl CodeScheme {
    pub fn id(&self) -> String {
        match self {
            CodeScheme::Uncoded => "uncoded".into(),
            CodeScheme::FixedRate(c) => c.name.clone(),
            CodeScheme::Lt { .. } => "lt".into(),
        }
    }
}

fn code(name: &str, family: CodeFamily, rate: f64, g3: [f64; 6], g4: [f64; 6], bch: Option<(u32, u32, u32)>) -> FixedRateCode {
    FixedRateCode {
        name: name.into(),
        family,
        rate,
        gains: vec![
            GainRow { ber: 1e-3, db: g3.to_vec() },
            GainRow { ber: 1e-4, db: g4.to_vec() },
        ],
        bch: bch.map(|(n, k, t)| BchParams { n, k, t }),
    }
}

/// Hard-decision coding gains of BCH and convolutional codes with NC-MFSK
/// in Rayleigh fading, for M = 2..64 at BER 1e-3 and 1e-4.
pub fn default_codes() -> Vec<FixedRateCode> {
    use CodeFamily::{Bch, Conv};
    vec![
        code("BCH(7,4,1)", Bch, 0.571, [2.5, 0.3, 0.1, 0.0, 0.0, 0.0], [2.8, 0.4, 0.2, 0.0, 0.0, 0.0], Some((7, 4, 1))),
        code("BCH(15,11,1)", Bch, 0.733, [1.4, 0.2, 0.0, 0.0, 0.0, 0.0], [1.6, 0.3, 0.0, 0.0, 0.0, 0.0], Some((15, 11, 1))),
        code("BCH(15,7,2)", Bch, 0.467, [2.4, 2.0, 0.8, 0.3, 0.0, 0.0], [3.3, 2.3, 1.0, 0.4, 0.0, 0.0], Some((15, 7, 2))),
        code("BCH(15,5,3)", Bch, 0.333, [4.1, 2.7, 2.0, 1.5, 0.7, 0.2], [4.6, 2.9, 2.1, 1.6, 0.8, 0.2], Some((15, 5, 3))),
        code("BCH(31,26,1)", Bch, 0.839, [1.2, 0.2, 0.0, 0.0, 0.0, 0.0], [1.5, 0.2, 0.0, 0.0, 0.0, 0.0], Some((31, 26, 1))),
        code("BCH(31,21,2)", Bch, 0.677, [2.3, 1.7, 0.7, 0.2, 0.0, 0.0], [2.9, 2.0, 0.8, 0.2, 0.0, 0.0], Some((31, 21, 2))),
        code("BCH(31,16,3)", Bch, 0.516, [2.9, 2.1, 1.5, 1.3, 0.6, 0.1], [3.1, 2.2, 1.6, 1.4, 0.7, 0.1], Some((31, 16, 3))),
        code("BCH(31,11,5)", Bch, 0.355, [4.1, 3.5, 2.2, 2.0, 1.8, 1.1], [4.4, 4.2, 2.3, 2.1, 2.0, 1.3], Some((31, 11, 5))),
        code("BCH(31,6,7)", Bch, 0.194, [5.4, 4.3, 3.5, 3.2, 2.7, 2.3], [5.9, 4.8, 3.8, 3.3, 2.8, 2.4], Some((31, 6, 7))),
        code("trel(6,[53 75])", Conv, 0.5, [3.8, 2.7, 2.1, 1.8, 1.4, 1.4], [4.6, 3.1, 2.3, 2.0, 1.5, 1.4], None),
        code("trel(7,[133 171])", Conv, 0.5, [4.0, 3.0, 2.2, 1.8, 1.5, 1.4], [4.7, 3.5, 2.4, 2.0, 1.6, 1.5], None),
        code("trel(7,[133 165 171])", Conv, 1.0 / 3.0, [5.7, 4.8, 3.7, 3.1, 2.7, 2.5], [6.4, 5.1, 3.9, 3.3, 2.8, 2.6], None),
        code("trel([4 3],[4 5 17;7 4 2])", Conv, 2.0 / 3.0, [2.2, 1.5, 0.9, 0.6, 0.5, 0.5], [2.6, 1.7, 1.1, 0.6, 0.5, 0.5], None),
        code("trel([5 4],[23 35 0;0 5 13])", Conv, 2.0 / 3.0, [2.9, 1.9, 1.4, 1.1, 0.8, 0.7], [3.5, 2.4, 1.8, 1.2, 0.9, 0.8], None),
    ]
}
