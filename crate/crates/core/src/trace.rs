//! Connected-component labelling and Moore-neighbour boundary tracing on
//! binary rasters.

use std::collections::VecDeque;

use crate::grid::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

const N4: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const N8: [(isize, isize); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Connected components of pixels equal to `value`.
#[derive(Debug, Clone)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    /// 0 for pixels not equal to `value`, otherwise `1..=count`.
    pub labels: Vec<u32>,
    pub count: usize,
    /// Pixel count per label (index 0 unused).
    pub sizes: Vec<usize>,
    /// Whether the component touches the image border (index 0 unused).
    pub touches_border: Vec<bool>,
}

impl Components {
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Mask of a single component.
    pub fn mask_of(&self, label: u32) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| self.label_at(x, y) == label)
    }
}

/// Labels components of pixels whose mask value equals `value`.
pub fn label_components(mask: &Mask, value: bool, conn: Connectivity) -> Components {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    let mut touches = vec![false];
    let mut queue = VecDeque::new();
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &N4,
        Connectivity::Eight => &N8,
    };
    let mut next = 0u32;
    for sy in 0..h {
        for sx in 0..w {
            if mask.get(sx, sy) != value || labels[sy * w + sx] != 0 {
                continue;
            }
            next += 1;
            labels[sy * w + sx] = next;
            let mut size = 0;
            let mut border = false;
            queue.push_back((sx, sy));
            while let Some((x, y)) = queue.pop_front() {
                size += 1;
                border |= x == 0 || y == 0 || x == w - 1 || y == h - 1;
                for &(dx, dy) in offsets {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    let i = ny * w + nx;
                    if labels[i] == 0 && mask.get(nx, ny) == value {
                        labels[i] = next;
                        queue.push_back((nx, ny));
                    }
                }
            }
            sizes.push(size);
            touches.push(border);
        }
    }
    Components {
        width: w,
        height: h,
        labels,
        count: next as usize,
        sizes,
        touches_border: touches,
    }
}

/// Traces the outer boundary of the 8-connected foreground component that
/// contains the first foreground pixel in raster order. Returns boundary
/// pixels in tracing order without repeating the start pixel; an empty mask
/// yields an empty chain.
///
/// Uses Moore-neighbour tracing with Jacob's stopping criterion: the trace
/// ends when the start pixel is re-entered from the same direction it was
/// first left.
pub fn moore_trace(mask: &Mask) -> Vec<(usize, usize)> {
    let (w, h) = mask.dims();
    let Some(start) = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .find(|&(x, y)| mask.get(x, y))
    else {
        return Vec::new();
    };
    let fg = |x: isize, y: isize| mask.get_or_false(x, y);

    // N8 is ordered clockwise on screen starting east. The raster-order start
    // pixel has its west neighbour in the background.
    let dir_index = |dx: isize, dy: isize| N8.iter().position(|&d| d == (dx, dy)).unwrap_or(0);
    let (sx, sy) = (start.0 as isize, start.1 as isize);
    let mut chain = vec![start];
    let mut cur = (sx, sy);
    // index (around `cur`) of the background neighbour we came from
    let mut back = dir_index(-1, 0);
    let mut first_move: Option<usize> = None;
    let limit = 4 * w * h + 8;
    for _ in 0..limit {
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dx, dy) = N8[d];
            if fg(cur.0 + dx, cur.1 + dy) {
                found = Some(d);
                break;
            }
        }
        let Some(d) = found else {
            // isolated pixel
            return chain;
        };
        if cur == (sx, sy) {
            match first_move {
                None => first_move = Some(d),
                Some(fm) if fm == d => {
                    chain.pop();
                    return chain;
                }
                _ => {}
            }
        }
        let (dx, dy) = N8[d];
        let prev = cur;
        cur = (cur.0 + dx, cur.1 + dy);
        // the neighbour checked just before `d` was background; express it
        // relative to the new pixel
        let (bx, by) = N8[(d + 7) % 8];
        let bg = (prev.0 + bx, prev.1 + by);
        back = dir_index(bg.0 - cur.0, bg.1 - cur.1);
        chain.push((cur.0 as usize, cur.1 as usize));
    }
    chain
}
