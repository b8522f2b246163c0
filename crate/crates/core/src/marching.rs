//! Marching-squares extraction of the zero level of a scalar grid.
//!
//! The grid is surrounded by a virtual ring of positive values, so regions
//! touching the border still produce closed loops (their vertices are then
//! clamped onto the grid). Saddle cells are resolved by the average of their
//! four corners: a negative average keeps the negative corners connected.

use std::collections::HashMap;

use crate::geometry::Point;
use crate::grid::Grid;

/// Edge of the padded lattice: `(x, y, vertical)` names the edge leaving
/// lattice point `(x, y)` rightward (`false`) or downward (`true`).
type EdgeKey = (isize, isize, bool);

/// Closed polylines along `phi = 0`, each traversed with the negative side
/// on the right (clockwise on screen around a negative region, counter-
/// clockwise around a positive hole). Loops are returned in a deterministic
/// order: by the raster position of their first edge.
pub fn extract_zero_level(phi: &Grid) -> Vec<Vec<Point>> {
    let (w, h) = phi.dims();
    let pad = phi
        .data()
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()))
        + 1.0;
    let val = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            pad
        } else {
            phi.get(x as usize, y as usize)
        }
    };
    let inside = |v: f64| v < 0.0;

    let crossing = |a: (isize, isize), b: (isize, isize)| -> Point {
        let va = val(a.0, a.1);
        let vb = val(b.0, b.1);
        let t = va / (va - vb);
        Point::new(
            a.0 as f64 + t * (b.0 - a.0) as f64,
            a.1 as f64 + t * (b.1 - a.1) as f64,
        )
    };

    // segment from an exit crossing to an enter crossing, keyed by its start
    let mut next: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    let mut starts: Vec<EdgeKey> = Vec::new();
    for cy in -1..h as isize {
        for cx in -1..w as isize {
            // corners clockwise on screen: TL, TR, BR, BL
            let c = [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)];
            let v = c.map(|(x, y)| val(x, y));
            let ins = v.map(inside);
            if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
                continue;
            }
            let edges: [EdgeKey; 4] = [
                (cx, cy, false),
                (cx + 1, cy, true),
                (cx, cy + 1, false),
                (cx, cy, true),
            ];
            // walk the cell boundary clockwise, recording crossings
            let mut xs: Vec<(usize, bool)> = Vec::with_capacity(4);
            for k in 0..4 {
                let a = ins[k];
                let b = ins[(k + 1) % 4];
                if a != b {
                    // `true` = entering the negative region
                    xs.push((k, b));
                }
            }
            let pairs: Vec<(usize, usize)> = if xs.len() == 2 {
                let (e, x) = if xs[0].1 { (xs[0].0, xs[1].0) } else { (xs[1].0, xs[0].0) };
                vec![(x, e)]
            } else {
                let avg = v.iter().sum::<f64>() / 4.0;
                let connected = inside(avg);
                let mut out = Vec::with_capacity(2);
                for i in 0..4 {
                    let (k, enters) = xs[i];
                    let (k2, _) = xs[(i + 1) % 4];
                    // negative corners connected: pair each exit with the
                    // next enter; otherwise pair each enter with the next
                    // exit (then the segment runs exit to enter backwards)
                    if connected && !enters {
                        out.push((k, k2));
                    } else if !connected && enters {
                        out.push((k2, k));
                    }
                }
                out
            };
            for (from, to) in pairs {
                next.insert(edges[from], edges[to]);
                starts.push(edges[from]);
            }
        }
    }

    let mut pts_cache: HashMap<EdgeKey, Point> = HashMap::new();
    let mut point_of = |e: EdgeKey| -> Point {
        *pts_cache.entry(e).or_insert_with(|| {
            let (x, y, vert) = e;
            if vert {
                crossing((x, y), (x, y + 1))
            } else {
                crossing((x, y), (x + 1, y))
            }
        })
    };

    let maxx = (w - 1) as f64;
    let maxy = (h - 1) as f64;
    let mut loops = Vec::new();
    let mut used: HashMap<EdgeKey, bool> = HashMap::new();
    for s in starts {
        if used.contains_key(&s) {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = s;
        loop {
            used.insert(e, true);
            let p = point_of(e);
            lp.push(Point::new(p.x.clamp(0.0, maxx), p.y.clamp(0.0, maxy)));
            match next.get(&e) {
                Some(&n) if n != s => {
                    if used.contains_key(&n) {
                        break;
                    }
                    e = n;
                }
                _ => break,
            }
        }
        lp.dedup_by(|a, b| a.dist(*b) < 1e-12);
        while lp.len() > 1 && lp[0].dist(lp[lp.len() - 1]) < 1e-12 {
            lp.pop();
        }
        if lp.len() >= 3 {
            loops.push(lp);
        }
    }
    loops
}
