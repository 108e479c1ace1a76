//! Uniform cell grid geometry shared by every module.
//!
//! Cell `(i, j)` covers `[ox + i h, ox + (i+1) h) x [oy + j h, oy + (j+1) h)`
//! and is stored at linear index `j * nx + i`.

/// A 2D point or vector in length units.
pub type Point = [f64; 2];

/// Axis-aligned rectangle in length units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Uniform grid of square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.nx && (j as usize) < self.ny
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        self.center_ij(i as i64, j as i64)
    }

    #[inline]
    pub fn center_ij(&self, i: i64, j: i64) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Continuous cell coordinates of a point (cell `(i, j)` spans `[i, i+1)`).
    /// Coordinates within `1e-9` of a cell edge are snapped onto it, so
    /// edge ties resolve the same way in any similar frame.
    #[inline]
    pub fn to_cell_units(&self, p: Point) -> Point {
        let snap = |u: f64| {
            let r = u.round();
            if (u - r).abs() < 1e-9 {
                r
            } else {
                u
            }
        };
        [snap((p[0] - self.origin[0]) / self.h), snap((p[1] - self.origin[1]) / self.h)]
    }

    /// Cell containing `p`, possibly outside the grid.
    #[inline]
    pub fn cell_of(&self, p: Point) -> (i64, i64) {
        let u = self.to_cell_units(p);
        (u[0].floor() as i64, u[1].floor() as i64)
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.origin,
            [
                self.origin[0] + self.nx as f64 * self.h,
                self.origin[1] + self.ny as f64 * self.h,
            ],
        )
    }
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, lerp(a, b, t))
}

/// Visits every cell whose closed square meets the closed segment `[p, q]`.
///
/// Cells are reported in cell coordinates and may lie outside the grid.
/// Stops early and returns `false` as soon as `visit` returns `false`.
pub fn segment_cells(grid: &Grid, p: Point, q: Point, mut visit: impl FnMut(i64, i64) -> bool) -> bool {
    let a = grid.to_cell_units(p);
    let b = grid.to_cell_units(q);
    let (umin, umax) = (a[0].min(b[0]), a[0].max(b[0]));
    let i_lo = umin.ceil() as i64 - 1;
    let i_hi = umax.floor() as i64;
    let du = b[0] - a[0];
    for i in i_lo..=i_hi {
        let (vlo, vhi) = if du.abs() < 1e-300 {
            (a[1].min(b[1]), a[1].max(b[1]))
        } else {
            let u0 = (i as f64).max(umin);
            let u1 = ((i + 1) as f64).min(umax);
            if u0 > u1 {
                continue;
            }
            let v0 = a[1] + (u0 - a[0]) / du * (b[1] - a[1]);
            let v1 = a[1] + (u1 - a[0]) / du * (b[1] - a[1]);
            (v0.min(v1), v0.max(v1))
        };
        let j_lo = vlo.ceil() as i64 - 1;
        let j_hi = vhi.floor() as i64;
        for j in j_lo..=j_hi {
            if !visit(i, j) {
                return false;
            }
        }
    }
    true
}

/// Whether the closed segment `[p, q]` only meets cells where `inside` holds.
pub fn segment_in_mask(grid: &Grid, mask: &[bool], p: Point, q: Point) -> bool {
    segment_cells(grid, p, q, |i, j| {
        grid.contains(i, j) && mask[grid.index(i as usize, j as usize)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid { nx: n, ny: n, h: 1.0, origin: [0.0, 0.0] }
    }

    fn collect(grid: &Grid, p: Point, q: Point) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        segment_cells(grid, p, q, |i, j| {
            out.push((i, j));
            true
        });
        out.sort();
        out
    }

    #[test]
    fn knight_move_crosses_four_cells() {
        let g = unit_grid(4);
        let cells = collect(&g, [0.5, 0.5], [2.5, 1.5]);
        assert_eq!(cells, vec![(0, 0), (1, 0), (1, 1), (2, 1)]);
    }

    #[test]
    fn diagonal_through_corner_touches_both_sides() {
        let g = unit_grid(3);
        let cells = collect(&g, [0.5, 0.5], [1.5, 1.5]);
        assert_eq!(cells, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn vertical_segment_inside_one_column() {
        let g = unit_grid(5);
        let cells = collect(&g, [2.5, 0.5], [2.5, 3.5]);
        assert_eq!(cells, vec![(2, 0), (2, 1), (2, 2), (2, 3)]);
    }

    #[test]
    fn point_segment_distance_basics() {
        assert!((point_segment_distance([0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((point_segment_distance([3.0, 4.0], [0.0, 0.0], [0.0, 0.0]) - 5.0).abs() < 1e-15);
        assert!((point_segment_distance([2.0, 1.0], [-1.0, 0.0], [1.0, 0.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
