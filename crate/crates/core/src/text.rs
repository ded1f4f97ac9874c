//! Number formatting shared by the text outputs.

/// Shortest round-trip form, switching to exponent notation for very large
/// or very small magnitudes.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
