//! sRGB to CIELAB conversion (D65 white point, 2 degree observer).

use crate::fmath;

/// D65 reference white in XYZ, Y normalized to 1.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

/// Linearize one 8-bit sRGB channel.
fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        fmath::powf((c + 0.055) / 1.055, 2.4)
    }
}

/// The CIELAB companding function.
fn lab_f(t: f64) -> f64 {
    const EPSILON: f64 = 216.0 / 24389.0; // (6/29)^3
    if t > EPSILON {
        fmath::cbrt(t)
    } else {
        // t / (3 (6/29)^2) + 4/29
        t * (841.0 / 108.0) + 4.0 / 29.0
    }
}

/// Convert one 8-bit sRGB pixel to CIELAB `(L, a, b)`. `L` spans [0, 100];
/// `a` and `b` stay within roughly [-110, 110] for in-gamut colors.
pub(crate) fn srgb_to_lab(r: u8, g: u8, b: u8) -> [f64; 3] {
    let (rl, gl, bl) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [
        116.0 * fy - 16.0,
        500.0 * (fx - fy),
        200.0 * (fy - fz),
    ]
}
