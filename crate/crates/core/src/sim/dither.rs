/// Decaying multi-tone probing signal used to keep the regressor persistently
/// exciting:
///
/// `n(t) = 2e^{-0.009t}(sin²(11.9t)cos(19.5t) + sin²(2.2t)cos(5.8t) + sin²(1.2t)cos(9.5t) + sin⁵(2.4t))`
///
/// Each bracketed summand is bounded by one, so `|n(t)| ≤ 8e^{-0.009t}`.
pub fn dither(t: f64) -> f64 {
    use libm::{cos, exp, sin};
    let s1 = sin(11.9 * t);
    let s2 = sin(2.2 * t);
    let s3 = sin(1.2 * t);
    let s4 = sin(2.4 * t);
    2.0 * exp(-0.009 * t)
        * (s1 * s1 * cos(19.5 * t)
            + s2 * s2 * cos(5.8 * t)
            + s3 * s3 * cos(9.5 * t)
            + s4 * s4 * s4 * s4 * s4)
}
