//! PNG rendering of confusion matrices and accuracy curves.

use std::path::Path;

use image::{Rgb, RgbImage};
use vscnn_core::eval::ConfusionMatrix;

use crate::error::{Error, Result};

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([60, 60, 60]);
const GRID: Rgb<u8> = Rgb([220, 220, 220]);
const LINE: Rgb<u8> = Rgb([200, 40, 40]);

/// White (0) to dark blue (1).
fn shade(v: f64) -> Rgb<u8> {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    Rgb([lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0)])
}

/// Row-normalized heatmap, `cell` pixels per entry.
pub fn confusion_heatmap(m: &ConfusionMatrix, cell: u32) -> RgbImage {
    let n = m.classes as u32;
    let mut img = RgbImage::from_pixel(n * cell, n * cell, WHITE);
    let rows = m.row_sums();
    for t in 0..m.classes {
        for p in 0..m.classes {
            let v = if rows[t] == 0 { 0.0 } else { m.get(t, p) as f64 / rows[t] as f64 };
            let color = shade(v);
            for dy in 0..cell {
                for dx in 0..cell {
                    img.put_pixel(p as u32 * cell + dx, t as u32 * cell + dy, color);
                }
            }
        }
    }
    img
}

/// Heatmap of a square matrix of values in `[0, 1]`.
pub fn matrix_heatmap(values: &[Vec<f64>], cell: u32) -> RgbImage {
    let n = values.len() as u32;
    let mut img = RgbImage::from_pixel(n * cell, n * cell, WHITE);
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            for dy in 0..cell {
                for dx in 0..cell {
                    img.put_pixel(c as u32 * cell + dx, r as u32 * cell + dy, shade(v));
                }
            }
        }
    }
    img
}

fn draw_line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Accuracy curve over equally spaced points; the y axis spans `[0, 1]`
/// with grid lines every 0.1.
pub fn accuracy_plot(values: &[f64], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, WHITE);
    let margin = 20i64;
    let (w, h) = (width as i64 - 2 * margin, height as i64 - 2 * margin);
    let y_of = |v: f64| margin + h - (v.clamp(0.0, 1.0) * h as f64).round() as i64;
    for k in 0..=10 {
        let y = y_of(k as f64 / 10.0);
        draw_line(&mut img, (margin, y), (margin + w, y), GRID);
    }
    draw_line(&mut img, (margin, margin), (margin, margin + h), AXIS);
    draw_line(&mut img, (margin, margin + h), (margin + w, margin + h), AXIS);
    let n = values.len();
    let x_of = |i: usize| if n <= 1 { margin + w / 2 } else { margin + (i as i64 * w) / (n as i64 - 1) };
    let points: Vec<(i64, i64)> = values.iter().enumerate().map(|(i, &v)| (x_of(i), y_of(v))).collect();
    for pair in points.windows(2) {
        draw_line(&mut img, pair[0], pair[1], LINE);
    }
    for &(x, y) in &points {
        for d in -2..=2 {
            draw_line(&mut img, (x - 2, y + d), (x + 2, y + d), LINE);
        }
    }
    img
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    crate::checkpoint::write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_colors_diagonal() {
        let m = vscnn_core::eval::confusion_matrix(&[0, 1, 1], &[0, 1, 1], 2).unwrap();
        let img = confusion_heatmap(&m, 4);
        assert_eq!(img.dimensions(), (8, 8));
        assert_eq!(*img.get_pixel(0, 0), shade(1.0));
        assert_eq!(*img.get_pixel(5, 0), WHITE);
    }

    #[test]
    fn plot_marks_points() {
        let img = accuracy_plot(&[0.0, 1.0], 100, 60);
        assert_eq!(*img.get_pixel(20, 40), LINE);
        assert_eq!(*img.get_pixel(80, 20), LINE);
    }
}
