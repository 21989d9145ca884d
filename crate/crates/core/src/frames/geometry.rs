use super::FrameError;
use crate::constants::EARTH_RADIUS_KM;
use crate::Vec3;

/// Minimum distance from the origin to the segment `a`-`b`, km.
pub fn segment_min_distance(a: &Vec3, b: &Vec3) -> Result<f64, FrameError> {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return Err(FrameError::ZeroLengthSegment);
    }
    let t = -a.dot(&d) / len2;
    if (0.0..=1.0).contains(&t) {
        // |a x d| / |d| is better conditioned than |a + t d| when a and b are far apart.
        Ok(a.cross(&d).norm() / len2.sqrt())
    } else {
        Ok(a.norm().min(b.norm()))
    }
}

/// Minimum altitude of the straight chord above the Earth sphere.
/// Negative when the chord passes through the Earth.
pub fn tangential_altitude(r_tx: &Vec3, r_rx: &Vec3) -> Result<f64, FrameError> {
    let d = r_rx - r_tx;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return Err(FrameError::ZeroLengthSegment);
    }
    let t = -r_tx.dot(&d) / len2;
    if (0.0..=1.0).contains(&t) {
        let perp = r_tx.cross(&d).norm() / len2.sqrt();
        if perp == 0.0 {
            // Through the center: report the full depth.
            return Ok(-EARTH_RADIUS_KM);
        }
        Ok(perp - EARTH_RADIUS_KM)
    } else {
        Ok(r_tx.norm().min(r_rx.norm()) - EARTH_RADIUS_KM)
    }
}

/// True if the segment `a`-`b` passes strictly inside the sphere of `radius`
/// centred at `center`.
pub fn segment_intersects_sphere(
    a: &Vec3,
    b: &Vec3,
    center: &Vec3,
    radius: f64,
) -> Result<bool, FrameError> {
    Ok(segment_min_distance(&(a - center), &(b - center))? < radius)
}
