//! Colour overlays of contours and burn states on the grayscale input.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::Mask;
use crate::image::GrayImage;

pub type Color = [u8; 3];

pub const SNAKE: Color = [0, 200, 0];
pub const BURN: Color = [40, 90, 255];
pub const FRONT: Color = [255, 0, 0];
pub const CHILD: Color = [0, 230, 230];
pub const INIT: Color = [255, 230, 0];

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Closed polyline drawn 1 px wide.
    Contour { points: Vec<Point>, color: Color },
    /// Every set pixel of the mask.
    Region { mask: Mask, color: Color },
}

/// Draws `layers` in order over a gray copy of `img`.
pub fn render_overlay(img: &GrayImage, layers: &[Layer]) -> Result<RgbImage> {
    let (w, h) = (img.width(), img.height());
    let base = img.to_luma8();
    let mut out = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = base.get_pixel(x, y).0[0];
        Rgb([v, v, v])
    });
    for layer in layers {
        match layer {
            Layer::Region { mask, color } => {
                if mask.dims() != (w, h) {
                    return Err(Error::DimensionMismatch {
                        expected: (w, h),
                        actual: mask.dims(),
                    });
                }
                for y in 0..h {
                    for x in 0..w {
                        if mask.get(x, y) {
                            out.put_pixel(x as u32, y as u32, Rgb(*color));
                        }
                    }
                }
            }
            Layer::Contour { points, color } => {
                for (x, y) in polyline_pixels(points, w, h) {
                    out.put_pixel(x as u32, y as u32, Rgb(*color));
                }
            }
        }
    }
    Ok(out)
}

/// Pixels on a closed polyline, rasterized segment by segment with
/// Bresenham's algorithm between rounded vertices. Pixels outside the image
/// are skipped; the result is sorted and free of duplicates.
pub fn polyline_pixels(points: &[Point], w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut px = Vec::new();
    let n = points.len();
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let (mut x0, mut y0) = (a.x.round() as i64, a.y.round() as i64);
        let (x1, y1) = (b.x.round() as i64, b.y.round() as i64);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            if x0 >= 0 && y0 >= 0 && (x0 as usize) < w && (y0 as usize) < h {
                px.push((x0 as usize, y0 as usize));
            }
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
    px.sort_unstable_by_key(|&(x, y)| (y, x));
    px.dedup();
    px
}

/// `.ppm`/`.pnm` selects binary PPM, anything else PNG.
pub fn save_overlay(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pnm") => {
            image::ImageFormat::Pnm
        }
        _ => image::ImageFormat::Png,
    };
    img.save_with_format(path, format)
        .map_err(|source| Error::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn gray(n: usize) -> GrayImage {
        GrayImage::new(Grid::from_fn(n, n, |x, y| ((x + y) % 7) as f64 / 7.0)).unwrap()
    }

    fn changed(a: &RgbImage, b: &RgbImage) -> usize {
        a.pixels().zip(b.pixels()).filter(|(p, q)| p != q).count()
    }

    #[test]
    fn no_layers_is_gray_passthrough() {
        let img = gray(12);
        let out = render_overlay(&img, &[]).unwrap();
        let l = img.to_luma8();
        for (x, y, p) in out.enumerate_pixels() {
            let v = l.get_pixel(x, y).0[0];
            assert_eq!(p.0, [v, v, v]);
        }
    }

    #[test]
    fn contour_recolors_exactly_its_pixels() {
        let img = gray(20);
        let base = render_overlay(&img, &[]).unwrap();
        let sq = vec![
            Point::new(3.0, 3.0),
            Point::new(12.0, 3.0),
            Point::new(12.0, 9.0),
            Point::new(3.0, 9.0),
        ];
        let out = render_overlay(
            &img,
            &[Layer::Contour {
                points: sq.clone(),
                color: SNAKE,
            }],
        )
        .unwrap();
        let px = polyline_pixels(&sq, 20, 20);
        assert_eq!(px.len(), 2 * 10 + 2 * 5);
        assert_eq!(changed(&base, &out), px.len());
        assert!(px.iter().all(|&(x, y)| out.get_pixel(x as u32, y as u32).0 == SNAKE));
    }

    #[test]
    fn region_recolors_n_pixels() {
        let img = gray(10);
        let base = render_overlay(&img, &[]).unwrap();
        let mask = Mask::from_fn(10, 10, |x, y| x < 3 && y < 4);
        let out = render_overlay(&img, &[Layer::Region { mask, color: BURN }]).unwrap();
        assert_eq!(changed(&base, &out), 12);
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let r = render_overlay(
            &gray(10),
            &[Layer::Region {
                mask: Mask::new(5, 5),
                color: BURN,
            }],
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
