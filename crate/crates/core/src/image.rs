//! Image ingestion, gradient edge maps and edge thresholding.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, Mask};

/// Grayscale image with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Grid);

impl GrayImage {
    /// Wraps a grid, checking the size and value-range invariants.
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.width() < 3 || grid.height() < 3 {
            return Err(Error::ImageTooSmall {
                width: grid.width(),
                height: grid.height(),
            });
        }
        if let Some(v) = grid
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(invalid("image", format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub fn inverted(&self) -> GrayImage {
        GrayImage(self.0.map(|v| 1.0 - v))
    }

    /// Quantizes to 8 bits (round to nearest).
    pub fn to_luma8(&self) -> image::GrayImage {
        let (w, h) = self.0.dims();
        image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
            image::Luma([(self.0.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }
}

/// Nonnegative edge-strength raster.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap(Grid);

impl EdgeMap {
    pub fn new(grid: Grid) -> Result<Self> {
        if let Some(v) = grid.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(
                "edges",
                format!("edge strength {v} is not finite and nonnegative"),
            ));
        }
        Ok(Self(grid))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.0.get(x, y)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

/// Reads a raster file and converts it to normalized luminance.
///
/// Any format the `image` crate decodes with the enabled features (PNG and
/// PNM here) is accepted; color inputs are converted to luminance. 16-bit
/// inputs keep their full precision.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let dynimg = image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|source| Error::ImageRead {
            path: path.to_path_buf(),
            source,
        })?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    let grid = match dynimg {
        image::DynamicImage::ImageLuma8(buf) => Grid::from_vec(
            w,
            h,
            buf.into_raw()
                .into_iter()
                .map(|v| v as f64 / 255.0)
                .collect(),
        ),
        image::DynamicImage::ImageLuma16(buf) => Grid::from_vec(
            w,
            h,
            buf.into_raw()
                .into_iter()
                .map(|v| v as f64 / 65535.0)
                .collect(),
        ),
        other => {
            let buf = other.to_luma16();
            Grid::from_vec(
                w,
                h,
                buf.into_raw()
                    .into_iter()
                    .map(|v| v as f64 / 65535.0)
                    .collect(),
            )
        }
    };
    GrayImage::new(grid)
}

fn write_luma8(buf: &image::GrayImage, path: &Path) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm") => {
            image::ImageFormat::Pnm
        }
        _ => image::ImageFormat::Png,
    };
    buf.save_with_format(path, format)
        .map_err(|source| Error::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes an image as 8-bit grayscale; `.pgm` selects binary PGM, anything
/// else PNG.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    write_luma8(&img.to_luma8(), path.as_ref())
}

/// Writes a mask with values 0 / 255.
pub fn save_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = mask.dims();
    let buf = image::GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([if mask.get(x as usize, y as usize) {
            255
        } else {
            0
        }])
    });
    write_luma8(&buf, path.as_ref())
}

/// Rescales an arbitrary grid to `[0, 1]` for inspection output.
pub fn normalized_for_display(grid: &Grid) -> GrayImage {
    let lo = grid.min();
    let hi = grid.max();
    let span = hi - lo;
    let g = if span > 0.0 && span.is_finite() {
        grid.map(|v| ((v - lo) / span).clamp(0.0, 1.0))
    } else {
        Grid::new(grid.width(), grid.height())
    };
    GrayImage(g)
}

/// Gradient magnitude with central differences in the interior and
/// one-sided differences on the border.
pub fn gradient_magnitude(img: &GrayImage) -> EdgeMap {
    let (gx, gy) = img.grid().gradient();
    let data = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(a, b)| a.hypot(*b))
        .collect();
    EdgeMap(Grid::from_vec(img.width(), img.height(), data))
}

/// Zeroes every edge strength below `t`.
pub fn threshold_edges(edges: &EdgeMap, t: f64) -> Result<EdgeMap> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("threshold", format!("{t} must be finite and >= 0")));
    }
    Ok(EdgeMap(edges.0.map(|v| if v < t { 0.0 } else { v })))
}

/// Separable Gaussian blur with the kernel truncated at `ceil(3 sigma)` and
/// edge-replicating borders. `sigma <= 0` returns the input unchanged.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64) -> GrayImage {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let src = img.grid();
    let (w, h) = src.dims();
    let horizontal = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wgt)| wgt * src.get_clamped(x as isize + k as isize - radius, y as isize))
            .sum()
    });
    let both = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, wgt)| {
                wgt * horizontal.get_clamped(x as isize, y as isize + k as isize - radius)
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    });
    GrayImage(both)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> GrayImage {
        GrayImage::new(Grid::from_fn(w, h, f)).unwrap()
    }

    #[test]
    fn rejects_tiny_and_out_of_range_images() {
        assert!(matches!(
            GrayImage::new(Grid::new(2, 5)),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(GrayImage::new(Grid::filled(4, 4, 1.5)).is_err());
        assert!(GrayImage::new(Grid::filled(4, 4, f64::NAN)).is_err());
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = gradient_magnitude(&img(8, 6, |_, _| 0.37));
        assert!(e.grid().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_step_gives_half_on_both_adjacent_columns() {
        // columns 0..4 are 0, 4.. are 1
        let e = gradient_magnitude(&img(8, 5, |x, _| if x >= 4 { 1.0 } else { 0.0 }));
        for y in 1..4 {
            assert_eq!(e.get(3, y), 0.5);
            assert_eq!(e.get(4, y), 0.5);
            assert_eq!(e.get(2, y), 0.0);
            assert_eq!(e.get(5, y), 0.0);
        }
    }

    #[test]
    fn linear_ramp_has_uniform_interior_magnitude() {
        let w = 11;
        let e = gradient_magnitude(&img(w, 5, |x, _| x as f64 / (w - 1) as f64));
        for y in 0..5 {
            for x in 1..w - 1 {
                assert!((e.get(x, y) - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inversion_preserves_magnitude() {
        let a = img(9, 7, |x, y| ((x * 7 + y * 3) % 5) as f64 / 4.0);
        let e1 = gradient_magnitude(&a);
        let e2 = gradient_magnitude(&a.inverted());
        for (p, q) in e1.grid().data().iter().zip(e2.grid().data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_cases() {
        let e = EdgeMap::new(Grid::from_vec(3, 1, vec![0.2, 0.6, 0.9])).unwrap();
        assert_eq!(
            threshold_edges(&e, 0.5).unwrap().grid().data(),
            &[0.0, 0.6, 0.9]
        );
        assert_eq!(threshold_edges(&e, 0.0).unwrap(), e);
        assert!(threshold_edges(&e, 1.0)
            .unwrap()
            .grid()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert!(threshold_edges(&e, -0.1).is_err());
    }

    #[test]
    fn smoothing_preserves_constants() {
        let a = img(10, 10, |_, _| 0.25);
        let s = gaussian_smooth(&a, 1.5);
        assert!(s.grid().data().iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert_eq!(gaussian_smooth(&a, 0.0), a);
    }
}
