//! CSV serialization of contours and grids. Numbers use six decimals so
//! repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::Grid;
use crate::snake::SnakeContour;

pub const CONTOUR_HEADER: &str = "index,x,y";
pub const SNAKE_HEADER: &str = "index,x,y,frozen";

pub fn contour_csv(points: &[Point]) -> String {
    let mut s = String::with_capacity(32 * (points.len() + 1));
    s.push_str(CONTOUR_HEADER);
    s.push('\n');
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(s, "{i},{:.6},{:.6}", p.x, p.y);
    }
    s
}

pub fn snake_csv(contour: &SnakeContour) -> String {
    let mut s = String::with_capacity(34 * (contour.len() + 1));
    s.push_str(SNAKE_HEADER);
    s.push('\n');
    for (i, (p, f)) in contour.vertices().iter().zip(contour.frozen()).enumerate() {
        let _ = writeln!(s, "{i},{:.6},{:.6},{}", p.x, p.y, u8::from(*f));
    }
    s
}

/// One row per pixel: `x,y,value`.
pub fn grid_csv(grid: &Grid) -> String {
    let mut s = String::from("x,y,value\n");
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let _ = writeln!(s, "{x},{y},{:.6}", grid.get(x, y));
        }
    }
    s
}

/// Parses either contour format; a `frozen` column is read when present.
pub fn parse_contour_csv(text: &str) -> Result<(Vec<Point>, Vec<bool>)> {
    let mut lines = text.lines().enumerate();
    let has_frozen = match lines.next() {
        Some((_, h)) if h.trim() == CONTOUR_HEADER => false,
        Some((_, h)) if h.trim() == SNAKE_HEADER => true,
        Some((_, h)) => {
            return Err(Error::Csv {
                line: 1,
                reason: format!("unexpected header `{h}`"),
            })
        }
        None => {
            return Err(Error::Csv {
                line: 1,
                reason: "empty file".into(),
            })
        }
    };
    let mut pts = Vec::new();
    let mut frozen = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let want = if has_frozen { 4 } else { 3 };
        if cols.len() != want {
            return Err(Error::Csv {
                line: line_no,
                reason: format!("expected {want} columns, found {}", cols.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Csv {
                    line: line_no,
                    reason: format!("`{s}` is not a finite number"),
                })
        };
        pts.push(Point::new(num(cols[1])?, num(cols[2])?));
        if has_frozen {
            frozen.push(match cols[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => {
                    return Err(Error::Csv {
                        line: line_no,
                        reason: format!("bad frozen flag `{other}`"),
                    })
                }
            });
        } else {
            frozen.push(false);
        }
    }
    Ok((pts, frozen))
}

pub fn read_contour_csv(path: impl AsRef<Path>) -> Result<(Vec<Point>, Vec<bool>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_contour_csv(&text)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contour_round_trip() {
        let pts = vec![Point::new(1.0, 2.5), Point::new(-3.25, 4.0), Point::new(0.1, 0.2)];
        let text = contour_csv(&pts);
        assert!(text.starts_with("index,x,y\n0,1.000000,2.500000\n"));
        let (back, frozen) = parse_contour_csv(&text).unwrap();
        assert_eq!(back, pts);
        assert!(frozen.iter().all(|f| !f));
    }

    #[test]
    fn snake_round_trip_keeps_frozen_flags() {
        let c = SnakeContour::with_frozen(
            vec![
                Point::new(0.0, 0.0),
                Point::new(4.0, 0.0),
                Point::new(4.0, 4.0),
                Point::new(0.0, 4.0),
            ],
            vec![true, false, false, true],
        )
        .unwrap();
        let (pts, frozen) = parse_contour_csv(&snake_csv(&c)).unwrap();
        assert_eq!(pts, c.vertices());
        assert_eq!(frozen, c.frozen());
    }

    #[test]
    fn malformed_rows_report_the_line() {
        let err = parse_contour_csv("index,x,y\n0,1,2\n1,x,3\n").unwrap_err();
        assert!(matches!(err, Error::Csv { line: 3, .. }), "{err}");
        assert!(parse_contour_csv("a,b\n").is_err());
        assert!(parse_contour_csv("index,x,y\n0,1\n").is_err());
    }
}
