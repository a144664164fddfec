/// Formats a float with 17 significant digits, enough to round-trip any
/// `f64` exactly. Used by every CSV writer in the workspace.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0e0" vs "0e0" noise in diffs
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}
