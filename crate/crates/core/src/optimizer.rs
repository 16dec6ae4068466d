//! Per-distance choice of constellation size and code, and the distance at
//! which two schemes cost the same.

use serde::Serialize;

use crate::codes::FixedRateCode;
use crate::energy::{
    bch_decoder_energy, max_constellation_size, total_energy, ChannelSpec, EnergyBreakdown, ModulationConfig,
    SystemParams,
};
use crate::error::{domain, Error, Result};
use crate::montecarlo::LtTable;
use crate::units::db_to_linear;

/// Everything about the link that is not the code.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkContext {
    pub sys: SystemParams,
    pub ch: ChannelSpec,
    pub target_ber: f64,
    /// Energy per addition and per multiplication in the BCH decoder (J).
    pub e_add: f64,
    pub e_mult: f64,
    /// Interpolated operating points inserted between adjacent LT table rows.
    pub lt_substeps: usize,
}

impl Default for LinkContext {
    fn default() -> Self {
        LinkContext {
            sys: SystemParams::default(),
            ch: ChannelSpec::default(),
            target_ber: 1e-3,
            e_add: 0.5e-12,
            e_mult: 0.5e-12,
            lt_substeps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    Uncoded,
    FixedRate(Vec<FixedRateCode>),
    Lt(Vec<LtTable>),
}

/// A family of candidate links, optionally pinned to one constellation size.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub name: String,
    pub kind: SchemeKind,
    pub fixed_m: Option<u32>,
}

impl Scheme {
    pub fn uncoded() -> Self {
        Scheme {
            name: "uncoded".into(),
            kind: SchemeKind::Uncoded,
            fixed_m: None,
        }
    }

    pub fn fixed_rate(name: impl Into<String>, codes: Vec<FixedRateCode>) -> Self {
        Scheme {
            name: name.into(),
            kind: SchemeKind::FixedRate(codes),
            fixed_m: None,
        }
    }

    pub fn lt(tables: Vec<LtTable>) -> Self {
        Scheme {
            name: "lt".into(),
            kind: SchemeKind::Lt(tables),
            fixed_m: None,
        }
    }

    pub fn with_fixed_m(mut self, m: u32) -> Self {
        self.fixed_m = Some(m);
        self
    }
}

/// The cheapest admissible link of a scheme at one distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Choice {
    pub m: u32,
    pub code_id: String,
    pub rate: f64,
    pub gain_db: f64,
    /// Average SNR of the chosen LT operating point.
    pub avg_snr_db: Option<f64>,
    pub energy: EnergyBreakdown,
}

fn better(a: &Choice, b: &Choice) -> bool {
    a.energy
        .total
        .total_cmp(&b.energy.total)
        .then(a.m.cmp(&b.m))
        .then_with(|| a.code_id.cmp(&b.code_id))
        .is_lt()
}

fn constellations(ctx: &LinkContext, fixed: Option<u32>) -> Result<Vec<u32>> {
    let m_max = max_constellation_size(&ctx.sys)?;
    match fixed {
        Some(m) if m > m_max => Err(Error::Constraint(format!("M = {m} exceeds M_max = {m_max}"))),
        Some(m) => Ok(vec![m]),
        None => Ok((1..=m_max.trailing_zeros()).map(|b| 1u32 << b).collect()),
    }
}

/// `(avg SNR, avg rate, gain dB)` operating points: table rows plus linear
/// interpolation between neighbours. Points with zero rate are dropped.
pub fn lt_operating_points(table: &LtTable, substeps: usize) -> Vec<(f64, f64, f64)> {
    let mut pts = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        pts.push((row.avg_snr_db, row.avg_rate, row.gain_db));
        if let Some(next) = table.rows.get(i + 1) {
            for s in 1..=substeps {
                let w = s as f64 / (substeps + 1) as f64;
                let lerp = |a: f64, b: f64| a + w * (b - a);
                pts.push((
                    lerp(row.avg_snr_db, next.avg_snr_db),
                    lerp(row.avg_rate, next.avg_rate),
                    lerp(row.gain_db, next.gain_db),
                ));
            }
        }
    }
    pts.retain(|p| p.1 > 0.0);
    pts
}

/// Every admissible `(M, code, operating point)` of `scheme` at `d`.
pub fn candidates(d: f64, scheme: &Scheme, ctx: &LinkContext) -> Result<Vec<Choice>> {
    let mut out = Vec::new();
    for m in constellations(ctx, scheme.fixed_m)? {
        let modc = ModulationConfig::new(m, &ctx.sys)?;
        let eval = |rate: f64, gain_db: f64, dec: f64| {
            total_energy(&ctx.sys, &modc, &ctx.ch, d, ctx.target_ber, rate, db_to_linear(gain_db), dec)
        };
        match &scheme.kind {
            SchemeKind::Uncoded => out.push(Choice {
                m,
                code_id: "uncoded".into(),
                rate: 1.0,
                gain_db: 0.0,
                avg_snr_db: None,
                energy: eval(1.0, 0.0, 0.0)?,
            }),
            SchemeKind::FixedRate(codes) => {
                for code in codes {
                    let gain_db = code.gain_db(m, ctx.target_ber)?;
                    let dec = match code.bch {
                        Some(p) => bch_decoder_energy(p.n, p.k, p.t, ctx.sys.payload_bits, ctx.e_add, ctx.e_mult)?,
                        None => 0.0,
                    };
                    out.push(Choice {
                        m,
                        code_id: code.name.clone(),
                        rate: code.rate,
                        gain_db,
                        avg_snr_db: None,
                        energy: eval(code.rate, gain_db, dec)?,
                    });
                }
            }
            SchemeKind::Lt(tables) => {
                let Some(table) = tables.iter().find(|t| t.m == m) else {
                    continue;
                };
                for (snr, rate, gain_db) in lt_operating_points(table, ctx.lt_substeps) {
                    out.push(Choice {
                        m,
                        code_id: "lt".into(),
                        rate,
                        gain_db,
                        avg_snr_db: Some(snr),
                        energy: eval(rate, gain_db, 0.0)?,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Cheapest admissible link of `scheme` at distance `d`. Ties go to the
/// smaller `M`, then the lexicographically smaller code id.
pub fn optimize_scheme_at_distance(d: f64, scheme: &Scheme, ctx: &LinkContext) -> Result<Choice> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("distance must be > 0, got {d}")));
    }
    candidates(d, scheme, ctx)?
        .into_iter()
        .reduce(|best, c| if better(&c, &best) { c } else { best })
        .ok_or_else(|| Error::EmptyAdmissibleSet(scheme.name.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub d: f64,
    pub best: Vec<Choice>,
}

/// `n` log-spaced distances from `lo` to `hi`.
pub fn log_distance_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn distance_sweep(d_grid: &[f64], schemes: &[Scheme], ctx: &LinkContext) -> Result<Vec<SweepRow>> {
    if d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("distance grid must be strictly ascending"));
    }
    d_grid
        .iter()
        .map(|&d| {
            let best = schemes
                .iter()
                .map(|s| optimize_scheme_at_distance(d, s, ctx))
                .collect::<Result<_>>()?;
            Ok(SweepRow { d, best })
        })
        .collect()
}

/// Distance in `[lo, hi]` where the optimised energies of `a` and `b`
/// coincide, by bisection to `tol_m`.
pub fn find_threshold_distance(
    a: &Scheme,
    b: &Scheme,
    ctx: &LinkContext,
    lo: f64,
    hi: f64,
    tol_m: f64,
) -> Result<f64> {
    if !(lo > 0.0 && hi > lo && tol_m > 0.0) {
        return Err(domain("need 0 < lo < hi and tol_m > 0"));
    }
    let gap = |d: f64| -> Result<f64> {
        Ok(optimize_scheme_at_distance(d, a, ctx)?.energy.total - optimize_scheme_at_distance(d, b, ctx)?.energy.total)
    };
    let (mut x0, mut x1) = (lo, hi);
    let (mut g0, g1) = (gap(x0)?, gap(x1)?);
    if g0 == 0.0 && g1 != 0.0 {
        return Ok(x0);
    }
    if g1 == 0.0 && g0 != 0.0 {
        return Ok(x1);
    }
    if g0.signum() == g1.signum() {
        return Err(Error::NoCrossoverInRange { lo, hi });
    }
    while x1 - x0 > tol_m {
        let mid = 0.5 * (x0 + x1);
        let gm = gap(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm.signum() == g0.signum() {
            x0 = mid;
            g0 = gm;
        } else {
            x1 = mid;
        }
    }
    Ok(0.5 * (x0 + x1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::default_codes;
    use crate::energy::crossover_distance;
    use crate::montecarlo::LtTableRow;

    #[test]
    fn uncoded_choice_is_brute_force_minimum() {
        let ctx = LinkContext::default();
        for d in [1.0, 10.0, 60.0, 200.0] {
            let best = optimize_scheme_at_distance(d, &Scheme::uncoded(), &ctx).unwrap();
            for m in [2u32, 4, 8, 16, 32, 64] {
                let modc = ModulationConfig::new(m, &ctx.sys).unwrap();
                let e = total_energy(&ctx.sys, &modc, &ctx.ch, d, 1e-3, 1.0, 1.0, 0.0).unwrap();
                assert!(best.energy.total <= e.total);
            }
        }
    }

    #[test]
    fn identity_code_matches_uncoded() {
        let ctx = LinkContext::default();
        let ident = Scheme::fixed_rate("id", vec![FixedRateCode::identity(&[1e-3])]);
        for d in [0.5, 3.0, 40.0, 150.0] {
            let u = optimize_scheme_at_distance(d, &Scheme::uncoded(), &ctx).unwrap();
            let c = optimize_scheme_at_distance(d, &ident, &ctx).unwrap();
            assert_eq!(u.m, c.m);
            assert_eq!(u.energy, c.energy);
        }
    }

    #[test]
    fn threshold_matches_closed_form_for_fixed_m() {
        let ctx = LinkContext::default();
        let code = default_codes().into_iter().find(|c| c.name == "trel(7,[133 171])").unwrap();
        let coded = Scheme::fixed_rate("conv", vec![code.clone()]).with_fixed_m(2);
        let unc = Scheme::uncoded().with_fixed_m(2);
        let d = find_threshold_distance(&unc, &coded, &ctx, 1.0, 100.0, 1e-6).unwrap();
        let modc = ModulationConfig::new(2, &ctx.sys).unwrap();
        let closed = crossover_distance(&ctx.sys, &modc, &ctx.ch, 1e-3, 0.5, db_to_linear(4.0)).unwrap();
        assert!((d - closed).abs() < 1e-5, "{d} vs {closed}");
    }

    #[test]
    fn identical_schemes_have_no_crossover() {
        let ctx = LinkContext::default();
        let s = Scheme::uncoded();
        assert!(matches!(
            find_threshold_distance(&s, &s, &ctx, 1.0, 100.0, 1e-3),
            Err(Error::NoCrossoverInRange { .. })
        ));
    }

    #[test]
    fn empty_family_is_an_error() {
        let ctx = LinkContext::default();
        let s = Scheme::fixed_rate("none", vec![]);
        assert!(matches!(optimize_scheme_at_distance(5.0, &s, &ctx), Err(Error::EmptyAdmissibleSet(_))));
        assert!(optimize_scheme_at_distance(5.0, &Scheme::uncoded().with_fixed_m(128), &ctx).is_err());
    }

    #[test]
    fn lt_points_interpolate_between_rows() {
        let t = LtTable {
            m: 2,
            rows: vec![
                LtTableRow { avg_snr_db: 0.0, avg_rate: 0.0, gain_db: 30.0 },
                LtTableRow { avg_snr_db: 10.0, avg_rate: 0.5, gain_db: 20.0 },
            ],
        };
        let pts = lt_operating_points(&t, 4);
        assert_eq!(pts.len(), 5);
        assert!((pts[0].0 - 2.0).abs() < 1e-12 && (pts[0].1 - 0.1).abs() < 1e-12);
        assert_eq!(pts[4], (10.0, 0.5, 20.0));
    }
}
