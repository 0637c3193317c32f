//! Degree arithmetic shared by the handlebar encoder, the steering map and
//! the pose integrator.

/// Normalize any finite angle into `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid rounds tiny negative inputs up to exactly 360.0
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Wrap any finite angle into `(-180, 180]`. An exact half turn maps to +180.
pub fn wrap_signed_deg(deg: f64) -> f64 {
    let r = normalize_deg(deg);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Smallest absolute angular distance between two headings, in degrees.
pub fn angular_distance_deg(a: f64, b: f64) -> f64 {
    wrap_signed_deg(a - b).abs()
}
