use crate::imagecore::{rotate_point, rotate_replicate, GrayImage};

use super::{locate_landmarks, AttributeError, Landmarks, Result};

/// Magnitude bound for both reported angles, degrees.
pub const MAX_ANGLE: f64 = 90.0;

/// Default yaw gain, degrees per unit of eye-midpoint asymmetry.
pub const DEFAULT_YAW_GAIN: f64 = 60.0;

/// In-plane head tilt (Euler Z) from the eye line, degrees. Positive when
/// the face is tilted clockwise as displayed (right eye lower).
pub fn estimate_roll(lm: &Landmarks) -> Result<f64> {
    let dx = lm.right_eye.0 - lm.left_eye.0;
    let dy = lm.right_eye.1 - lm.left_eye.1;
    if dx == 0.0 && dy == 0.0 {
        return Err(AttributeError::InvalidInput("eye landmarks coincide".into()));
    }
    if !(dx > 0.0) {
        return Err(AttributeError::InvalidInput(format!("left eye must be left of right eye (dx = {dx})")));
    }
    Ok(dy.atan2(dx).to_degrees().clamp(-MAX_ANGLE, MAX_ANGLE))
}

/// Tilt below which [`refined_roll`] skips the second pass.
const REFINE_MIN_ROLL: f64 = 1.0;

/// Roll from `lm`, followed by one pass on the crop rotated upright: the
/// eyes of a strongly tilted face sit off-centre in their search bands,
/// which biases the first estimate toward zero.
pub fn refined_roll(face: &GrayImage, lm: &Landmarks) -> Result<f64> {
    let first = estimate_roll(lm)?;
    if first.abs() < REFINE_MIN_ROLL {
        return Ok(first);
    }
    let upright = rotate_replicate(face, -first);
    let residual = estimate_roll(&locate_landmarks(&upright)?)?;
    Ok((first + residual).clamp(-MAX_ANGLE, MAX_ANGLE))
}

/// Head turn (Euler Y) from how far the eye midpoint sits off the crop's
/// vertical centre line, scaled by the inter-eye distance and `gain`. The
/// midpoint is first rotated upright about the crop centre so that roll
/// alone does not read as yaw.
pub fn estimate_yaw(face: &GrayImage, lm: &Landmarks, gain: f64) -> Result<f64> {
    let ied = lm.inter_eye_distance();
    if !(ied > 0.0) {
        return Err(AttributeError::InvalidInput("zero inter-eye distance".into()));
    }
    let center = (face.width() as f64 / 2.0, face.height() as f64 / 2.0);
    let roll = estimate_roll(lm).unwrap_or(0.0);
    let upright = rotate_point(lm.eye_midpoint(), center, -roll);
    let asym = (upright.0 - center.0) / ied;
    Ok((gain * asym).clamp(-MAX_ANGLE, MAX_ANGLE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(l: (f64, f64), r: (f64, f64)) -> Landmarks {
        Landmarks { left_eye: l, right_eye: r, mouth_center: (16.0, 26.0), low_confidence: false }
    }

    #[test]
    fn roll_examples() {
        assert_eq!(estimate_roll(&lm((8.0, 12.0), (24.0, 12.0))).unwrap(), 0.0);
        let r = estimate_roll(&lm((8.0, 12.0), (24.0, 16.0))).unwrap();
        // atan2(4, 16) = 14.0362 degrees
        assert!((r - 14.036_243_467_926_479).abs() < 1e-9);
        assert!(estimate_roll(&lm((8.0, 12.0), (8.0, 12.0))).is_err());
        assert!(estimate_roll(&lm((24.0, 12.0), (8.0, 12.0))).is_err());
    }

    #[test]
    fn roll_is_equivariant_under_point_rotation() {
        let base = lm((9.5, 13.0), (22.0, 12.25));
        let r0 = estimate_roll(&base).unwrap();
        let c = (16.0, 16.0);
        for theta in [-30.0, -15.0, -5.0, 0.0, 5.0, 10.0, 15.0, 40.0] {
            let rot = lm(rotate_point(base.left_eye, c, theta), rotate_point(base.right_eye, c, theta));
            let r = estimate_roll(&rot).unwrap();
            assert!((r - (r0 + theta)).abs() < 1e-9, "theta {theta}: {r} vs {}", r0 + theta);
        }
    }

    #[test]
    fn yaw_symmetry() {
        let face = GrayImage::filled(32, 32, 100).unwrap();
        let sym = lm((10.0, 12.0), (22.0, 12.0));
        assert_eq!(estimate_yaw(&face, &sym, DEFAULT_YAW_GAIN).unwrap(), 0.0);
        let off = lm((12.0, 12.0), (24.0, 12.0));
        let mirrored = lm((32.0 - 24.0, 12.0), (32.0 - 12.0, 12.0));
        let a = estimate_yaw(&face, &off, DEFAULT_YAW_GAIN).unwrap();
        let b = estimate_yaw(&face, &mirrored, DEFAULT_YAW_GAIN).unwrap();
        assert!((a - 10.0).abs() < 1e-12);
        assert!((a + b).abs() < 1e-12);
        let extreme = lm((30.0, 12.0), (31.0, 12.0));
        assert_eq!(estimate_yaw(&face, &extreme, DEFAULT_YAW_GAIN).unwrap(), 90.0);
        assert!(estimate_yaw(&face, &lm((5.0, 5.0), (5.0, 5.0)), DEFAULT_YAW_GAIN).is_err());
    }

    #[test]
    fn yaw_ignores_roll_about_the_centre() {
        let face = GrayImage::filled(32, 32, 100).unwrap();
        let off = lm((12.0, 12.0), (24.0, 12.0));
        let base = estimate_yaw(&face, &off, DEFAULT_YAW_GAIN).unwrap();
        for theta in [-15.0, -5.0, 5.0, 15.0] {
            let turn = |p| rotate_point(p, (16.0, 16.0), theta);
            let rolled = lm(turn(off.left_eye), turn(off.right_eye));
            assert!((estimate_yaw(&face, &rolled, DEFAULT_YAW_GAIN).unwrap() - base).abs() < 1e-9);
        }
    }
}
