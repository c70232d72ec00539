use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};

/// Bilinear resize into a `width × height` canvas, preserving aspect
/// ratio; the unused border is filled with `pad`.
pub fn fit_image(src: &RgbImage, width: u32, height: u32, pad: [u8; 3]) -> RgbImage {
    let (sw, sh) = src.dimensions();
    if (sw, sh) == (width, height) {
        return src.clone();
    }
    let scale = (width as f64 / sw as f64).min(height as f64 / sh as f64);
    let nw = ((sw as f64 * scale).round() as u32).clamp(1, width);
    let nh = ((sh as f64 * scale).round() as u32).clamp(1, height);
    let resized = imageops::resize(src, nw, nh, FilterType::Triangle);
    let mut canvas = RgbImage::from_pixel(width, height, Rgb(pad));
    let (x0, y0) = ((width - nw) / 2, (height - nh) / 2);
    imageops::replace(&mut canvas, &resized, x0 as i64, y0 as i64);
    canvas
}
