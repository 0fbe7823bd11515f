//! Synthetic test images with smooth, globally unique color fields.

use std::f64::consts::TAU;

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::rng::{self, Stream};

/// Three independent linear ramps: red grows left to right, green top to
/// bottom, blue along the diagonal.
pub fn linear_ramp(height: u32, width: u32) -> RgbImage {
    let (h, w) = (f64::from(height.max(2) - 1), f64::from(width.max(2) - 1));
    RgbImage::from_fn(width, height, |x, y| {
        let (x, y) = (f64::from(x), f64::from(y));
        Rgb([
            (20.0 + 210.0 * x / w).round() as u8,
            (20.0 + 210.0 * y / h).round() as u8,
            (40.0 + 80.0 * x / w + 90.0 * (1.0 - y / h)).round() as u8,
        ])
    })
}

struct Wave {
    amp: f64,
    fx: f64,
    fy: f64,
    phase: f64,
}

/// Per-channel linear ramp plus a few low-frequency waves and a faint
/// per-pixel texture of at most two levels. Values stay inside `[8, 247]`
/// before texture, so nothing saturates into flat regions.
pub fn smooth_image(height: u32, width: u32, seed: u64) -> RgbImage {
    let mut rng = rng::stream(seed, Stream::Synthetic);
    let mut channels = Vec::with_capacity(3);
    for _ in 0..3 {
        let sign = |r: &mut rand_chacha::ChaCha8Rng| if r.gen::<bool>() { 1.0 } else { -1.0 };
        let gx = sign(&mut rng) * rng.gen_range(70.0..100.0);
        let gy = sign(&mut rng) * rng.gen_range(70.0..100.0);
        let waves: Vec<Wave> = (0..3)
            .map(|_| Wave {
                amp: rng.gen_range(3.0..8.0),
                fx: rng.gen_range(-1.0..1.0),
                fy: rng.gen_range(-1.0..1.0),
                phase: rng.gen_range(0.0..TAU),
            })
            .collect();
        channels.push((gx, gy, waves));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let mut img = RgbImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (f64::from(x) / w, f64::from(y) / h);
            let mut px = [0u8; 3];
            for (c, (gx, gy, waves)) in channels.iter().enumerate() {
                let mut val = 128.0 + gx * (u - 0.5) + gy * (v - 0.5);
                for wave in waves {
                    val += wave.amp * (TAU * (wave.fx * u + wave.fy * v) + wave.phase).sin();
                }
                val += f64::from(rng.gen_range(-1i32..=1));
                px[c] = val.round().clamp(0.0, 255.0) as u8;
            }
            img.put_pixel(x, y, Rgb(px));
        }
    }
    img
}

/// Overwrites the `side x side` block at grid cell `(row, col)` with a flat
/// color.
pub fn paint_uniform_block(img: &mut RgbImage, side: u32, row: u32, col: u32, rgb: [u8; 3]) {
    for y in row * side..(row + 1) * side {
        for x in col * side..(col + 1) * side {
            img.put_pixel(x, y, Rgb(rgb));
        }
    }
}
