//! Planar geometry of the handover event: receiving radius, equal-power
//! radii, post-move distance and the lens-complement area.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{AntennaModel, ChannelParams, LinkType};

/// Two disks: A of radius `x` at the pre-move projection, B of radius `y` at
/// the post-move projection, centres `v` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPair {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

pub fn receiving_radius(z: f64, h_b: f64, antenna: &AntennaModel) -> Result<f64> {
    if !(z > h_b) {
        return Err(Error::InvalidGeometry { z, h_b });
    }
    Ok(match *antenna {
        AntennaModel::Directional { beamwidth_deg } => {
            (z - h_b) * (0.5 * beamwidth_deg).to_radians().tan()
        }
        AntennaModel::Omni { r_max } => r_max,
    })
}

/// Horizontal radius at which a `target`-type GBS delivers the same mean
/// power as a `serving`-type GBS at horizontal distance `x`, both seen from
/// height `h_bar` above the GBS plane.
///
/// Solves `eta_t (d^2 + h^2)^(-a_t/2) = eta_s (x^2 + h^2)^(-a_s/2)` for `d`;
/// when no real horizontal distance satisfies it the radius is 0.
pub fn equal_power_radius(serving: LinkType, target: LinkType, x: f64, h_bar: f64, ch: &ChannelParams) -> f64 {
    if serving == target || ch.is_power_symmetric() {
        return x;
    }
    let (eta_s, alpha_s) = (ch.intercept(serving), ch.exponent(serving));
    let (eta_t, alpha_t) = (ch.intercept(target), ch.exponent(target));
    let h2 = h_bar * h_bar;
    let log_d2 = (2.0 / alpha_t) * (eta_t / eta_s).ln() + (alpha_s / alpha_t) * (x * x + h2).ln();
    let radicand = log_d2.exp() - h2;
    if radicand > 0.0 {
        radicand.sqrt()
    } else {
        0.0
    }
}

/// Minimum distance of the nearest opposite-type GBS given a `serving`-type
/// GBS at `r0` is the strongest.
pub fn exclusion_radius(serving: LinkType, r0: f64, h_bar: f64, ch: &ChannelParams) -> f64 {
    equal_power_radius(serving, serving.other(), r0, h_bar, ch)
}

/// Distance from the serving GBS after moving `v_h` at angle `theta` from
/// the GBS-to-UAV direction.
pub fn displaced_distance(r0: f64, v_h: f64, theta: f64) -> f64 {
    (r0 * r0 + v_h * v_h + 2.0 * r0 * v_h * theta.cos()).max(0.0).sqrt()
}

#[inline]
fn clamped_acos(c: f64) -> f64 {
    c.clamp(-1.0, 1.0).acos()
}

/// Area of disk B not covered by disk A.
pub fn lens_complement_area(p: DiskPair) -> f64 {
    let DiskPair { x, y, v } = p;
    if y <= 0.0 || v + y <= x {
        return 0.0;
    }
    if v >= x + y {
        return PI * y * y;
    }
    if v + x <= y {
        return PI * (y * y - x * x);
    }
    let (x2, y2, v2) = (x * x, y * y, v * v);
    let beta = clamped_acos((y2 + v2 - x2) / (2.0 * y * v));
    let alpha = clamped_acos((x2 + v2 - y2) / (2.0 * x * v));
    let kite = ((x + v) * (x + v) - y2) * (y2 - (x - v) * (x - v));
    let area = y2 * (PI - beta) - x2 * alpha + 0.5 * kite.max(0.0).sqrt();
    area.clamp(0.0, PI * y2)
}
