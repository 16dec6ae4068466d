//! dB helpers. Everything inside the crate is linear; dB only appears at the
//! configuration and CSV boundaries.

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
