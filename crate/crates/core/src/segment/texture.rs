//! Texture triple from the Gaussian-windowed gradient second-moment matrix.
//!
//! For each pixel, central-difference gradients of the lightness plane are
//! pooled over a 9x9 Gaussian window into the 2x2 second-moment matrix
//! `M = sum_w g(w) * grad grad^T`, whose eigenstructure yields
//!
//! * anisotropy `1 - lambda_min / lambda_max` — how strongly one gradient
//!   orientation dominates (0 on isotropic or flat patches),
//! * contrast `2 sqrt(lambda_min + lambda_max)` — overall local gradient
//!   energy,
//! * polarity — how consistently the gradients point the *same way* along
//!   the dominant orientation, distinguishing an edge (high) from a stripe
//!   pattern (low).

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

/// Window radius in pixels; the window covers (2R+1)^2 samples.
const RADIUS: i64 = 4;

/// Standard deviation of the Gaussian window, half the radius.
const SIGMA: f64 = 2.0;

/// Per-pixel `(anisotropy, contrast, polarity)` for a lightness plane given
/// in row-major order. Borders replicate the nearest interior value.
pub(crate) fn texture_features(l_plane: &[f64], width: usize, height: usize) -> Vec<[f64; 3]> {
    debug_assert_eq!(l_plane.len(), width * height);
    let clamp_x = |x: i64| x.clamp(0, width as i64 - 1) as usize;
    let clamp_y = |y: i64| y.clamp(0, height as i64 - 1) as usize;
    let at = |x: usize, y: usize| l_plane[y * width + x];

    // Central differences with replicated borders.
    let mut gx = vec![0.0; width * height];
    let mut gy = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            gx[idx] = 0.5 * (at(clamp_x(x as i64 + 1), y) - at(clamp_x(x as i64 - 1), y));
            gy[idx] = 0.5 * (at(x, clamp_y(y as i64 + 1)) - at(x, clamp_y(y as i64 - 1)));
        }
    }

    // Fixed window weights, normalized once over the full kernel.
    let mut kernel = [[0.0; (2 * RADIUS + 1) as usize]; (2 * RADIUS + 1) as usize];
    let mut total = 0.0;
    for dy in -RADIUS..=RADIUS {
        for dx in -RADIUS..=RADIUS {
            let w = fmath::exp(-((dx * dx + dy * dy) as f64) / (2.0 * SIGMA * SIGMA));
            kernel[(dy + RADIUS) as usize][(dx + RADIUS) as usize] = w;
            total += w;
        }
    }
    for row in &mut kernel {
        for w in row.iter_mut() {
            *w /= total;
        }
    }

    let mut out = vec![[0.0; 3]; width * height];
    for y in 0..height {
        for x in 0..width {
            // First pass: pooled second-moment matrix [[a, b], [b, c]].
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -RADIUS..=RADIUS {
                for dx in -RADIUS..=RADIUS {
                    let w = kernel[(dy + RADIUS) as usize][(dx + RADIUS) as usize];
                    let idx = clamp_y(y as i64 + dy) * width + clamp_x(x as i64 + dx);
                    a += w * gx[idx] * gx[idx];
                    b += w * gx[idx] * gy[idx];
                    c += w * gy[idx] * gy[idx];
                }
            }
            let half_trace = 0.5 * (a + c);
            let disc = fmath::sqrt(0.25 * (a - c) * (a - c) + b * b);
            let lambda_max = half_trace + disc;
            let lambda_min = (half_trace - disc).max(0.0);

            let anisotropy = if lambda_max > 0.0 {
                1.0 - lambda_min / lambda_max
            } else {
                0.0
            };
            let contrast = 2.0 * fmath::sqrt(lambda_min + lambda_max);

            // Second pass: gradient coherence along the dominant orientation.
            let polarity = if lambda_max > 0.0 {
                let (nx, ny) = dominant_direction(a, b, c, lambda_max);
                let (mut pos, mut neg) = (0.0, 0.0);
                for dy in -RADIUS..=RADIUS {
                    for dx in -RADIUS..=RADIUS {
                        let w = kernel[(dy + RADIUS) as usize][(dx + RADIUS) as usize];
                        let idx = clamp_y(y as i64 + dy) * width + clamp_x(x as i64 + dx);
                        let d = gx[idx] * nx + gy[idx] * ny;
                        if d >= 0.0 {
                            pos += w * d;
                        } else {
                            neg -= w * d;
                        }
                    }
                }
                let mass = pos + neg;
                if mass > 0.0 {
                    ((pos - neg) / mass).abs()
                } else {
                    0.0
                }
            } else {
                0.0
            };
            out[y * width + x] = [anisotropy.clamp(0.0, 1.0), contrast, polarity.clamp(0.0, 1.0)];
        }
    }
    out
}

/// Unit eigenvector of `[[a, b], [b, c]]` for its largest eigenvalue.
fn dominant_direction(a: f64, b: f64, c: f64, lambda_max: f64) -> (f64, f64) {
    // Of the two algebraic forms, pick the better-conditioned one.
    let (vx, vy) = if (lambda_max - c).abs() >= (lambda_max - a).abs() {
        (lambda_max - c, b)
    } else {
        (b, lambda_max - a)
    };
    let norm = fmath::sqrt(vx * vx + vy * vy);
    if norm > 0.0 {
        (vx / norm, vy / norm)
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plane_has_zero_texture() {
        let plane = vec![42.0; 12 * 10];
        for t in texture_features(&plane, 12, 10) {
            assert_eq!(t, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn vertical_edge_is_anisotropic_and_polar() {
        // Left half dark, right half bright: gradients point uniformly +x
        // near the edge, so anisotropy and polarity both approach 1.
        let (w, h) = (20, 12);
        let mut plane = vec![0.0; w * h];
        for y in 0..h {
            for x in w / 2..w {
                plane[y * w + x] = 80.0;
            }
        }
        let tex = texture_features(&plane, w, h);
        let t = tex[(h / 2) * w + w / 2];
        assert!(t[0] > 0.99, "anisotropy {t:?}");
        assert!(t[1] > 1.0, "contrast {t:?}");
        assert!(t[2] > 0.99, "polarity {t:?}");
    }

    #[test]
    fn stripes_are_anisotropic_but_unpolarized() {
        // A square wave: gradients alternate sign along x, so the dominant
        // orientation is sharp but the directions cancel.
        let (w, h) = (24, 12);
        let mut plane = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                if (x / 2) % 2 == 0 {
                    plane[y * w + x] = 60.0;
                }
            }
        }
        let tex = texture_features(&plane, w, h);
        let t = tex[(h / 2) * w + w / 2];
        assert!(t[0] > 0.99, "anisotropy {t:?}");
        assert!(t[2] < 0.35, "polarity should be low: {t:?}");
    }

    #[test]
    fn ranges_hold_on_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let (w, h) = (17, 13);
        let plane: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..100.0)).collect();
        for t in texture_features(&plane, w, h) {
            assert!((0.0..=1.0).contains(&t[0]));
            assert!(t[1] >= 0.0);
            assert!((0.0..=1.0).contains(&t[2]));
        }
    }
}
