//! Dyadic Whitney decomposition of a rasterized domain and its partition of
//! unity.
//!
//! The dyadic root is the smallest power-of-two block of cells covering the
//! bounding box, anchored at its lower-left corner, so every cube edge lies on
//! cell boundaries. A cube is accepted as soon as all cells of its double are
//! interior; otherwise it is split, down to single cells.

use std::collections::VecDeque;

use crate::domain::{GridDomain, STENCIL};
use crate::error::{Error, Result};
use crate::grid::Point;

/// Marker for cells that belong to no cube.
pub const NO_CUBE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhitneyCube {
    /// Generation (root is 0).
    pub k: u32,
    /// Lower-left cell of the cube.
    pub cell_lo: [usize; 2],
    /// Side in cells.
    pub side_cells: usize,
    pub center: Point,
    /// Side length.
    pub side: f64,
}

impl WhitneyCube {
    /// Cell range of the concentric cube scaled by `factor` (2 or 4),
    /// covering every cell whose open square meets the open scaled cube.
    pub fn scaled_range(&self, factor: usize) -> ([i64; 2], [i64; 2]) {
        let s = self.side_cells as i64;
        let grow = ((factor as i64 - 1) * s + 1) / 2;
        let lo = [self.cell_lo[0] as i64 - grow, self.cell_lo[1] as i64 - grow];
        let hi = [self.cell_lo[0] as i64 + s + grow, self.cell_lo[1] as i64 + s + grow];
        (lo, hi)
    }

    pub fn contains_point(&self, p: Point) -> bool {
        let r = 0.5 * self.side;
        (p[0] - self.center[0]).abs() <= r && (p[1] - self.center[1]).abs() <= r
    }

    /// Distance from `p` to the closed cube.
    pub fn distance_to(&self, p: Point) -> f64 {
        let r = 0.5 * self.side;
        let dx = ((p[0] - self.center[0]).abs() - r).max(0.0);
        let dy = ((p[1] - self.center[1]).abs() - r).max(0.0);
        dx.hypot(dy)
    }
}

/// Node of the dyadic tree used for spatial queries.
#[derive(Debug, Clone, Copy)]
enum Node {
    Empty,
    Leaf(u32),
    Split(u32),
}

#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    pub cubes: Vec<WhitneyCube>,
    /// Cube owning each cell (`NO_CUBE` on exterior cells).
    pub locator: Vec<u32>,
    /// Whether the cell lies inside its cube (false for the boundary layer).
    pub covered: Vec<bool>,
    /// For boundary-layer cells, the next cell on a stencil path towards the
    /// covered region.
    pub layer_next: Vec<u32>,
    /// Number of true cells inside each cube.
    pub cube_cells: Vec<usize>,
    root_cells: usize,
    root_origin: Point,
    h: f64,
    nodes: Vec<Node>,
    children: Vec<[u32; 4]>,
}

/// Summed-area table over a padded grid.
struct Sat {
    w: usize,
    data: Vec<u32>,
}

impl Sat {
    fn new(nx: usize, ny: usize, value: impl Fn(usize, usize) -> bool) -> Self {
        let w = nx + 1;
        let mut data = vec![0u32; w * (ny + 1)];
        for j in 0..ny {
            let mut row = 0u32;
            for i in 0..nx {
                row += value(i, j) as u32;
                data[(j + 1) * w + i + 1] = data[j * w + i + 1] + row;
            }
        }
        Self { w, data }
    }

    /// Count over the clamped cell range `[lo, hi)`.
    fn count(&self, lo: [i64; 2], hi: [i64; 2], nx: usize, ny: usize) -> u32 {
        let x0 = lo[0].clamp(0, nx as i64) as usize;
        let y0 = lo[1].clamp(0, ny as i64) as usize;
        let x1 = hi[0].clamp(0, nx as i64) as usize;
        let y1 = hi[1].clamp(0, ny as i64) as usize;
        if x1 <= x0 || y1 <= y0 {
            return 0;
        }
        let w = self.w;
        self.data[y1 * w + x1] + self.data[y0 * w + x0] - self.data[y0 * w + x1] - self.data[y1 * w + x0]
    }
}

fn inside_grid(lo: [i64; 2], hi: [i64; 2], nx: usize, ny: usize) -> bool {
    lo[0] >= 0 && lo[1] >= 0 && hi[0] <= nx as i64 && hi[1] <= ny as i64
}

/// Builds the Whitney decomposition.
pub fn decompose(dom: &GridDomain) -> Result<WhitneyDecomposition> {
    let g = dom.grid;
    let (nx, ny) = (g.nx, g.ny);
    let root_cells = nx.max(ny).next_power_of_two();
    let false_sat = Sat::new(nx, ny, |i, j| !dom.mask[g.index(i, j)]);
    let true_sat = Sat::new(nx, ny, |i, j| dom.mask[g.index(i, j)]);

    let mut cubes = Vec::new();
    let mut nodes = vec![Node::Empty];
    let mut children: Vec<[u32; 4]> = Vec::new();
    // (node id, generation, lower-left cell, side in cells)
    let mut stack = vec![(0usize, 0u32, [0usize, 0usize], root_cells)];
    while let Some((node, k, lo, s)) = stack.pop() {
        let lo_i = [lo[0] as i64, lo[1] as i64];
        let hi_i = [lo_i[0] + s as i64, lo_i[1] + s as i64];
        if true_sat.count(lo_i, hi_i, nx, ny) == 0 {
            continue;
        }
        let center = [
            g.origin[0] + (lo[0] as f64 + 0.5 * s as f64) * g.h,
            g.origin[1] + (lo[1] as f64 + 0.5 * s as f64) * g.h,
        ];
        let cube = WhitneyCube { k, cell_lo: lo, side_cells: s, center, side: s as f64 * g.h };
        let (dlo, dhi) = cube.scaled_range(2);
        if inside_grid(dlo, dhi, nx, ny) && false_sat.count(dlo, dhi, nx, ny) == 0 {
            nodes[node] = Node::Leaf(cubes.len() as u32);
            cubes.push(cube);
            continue;
        }
        if s == 1 {
            continue;
        }
        let half = s / 2;
        let first = nodes.len();
        nodes.extend([Node::Empty; 4]);
        nodes[node] = Node::Split(children.len() as u32);
        children.push([first as u32, first as u32 + 1, first as u32 + 2, first as u32 + 3]);
        for (c, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            stack.push((first + c, k + 1, [lo[0] + di * half, lo[1] + dj * half], half));
        }
    }
    if cubes.is_empty() {
        return Err(Error::NoCubes);
    }

    // Canonical order: the cube holding x0 first, then by generation and position.
    let (xi, xj) = g.coords(dom.x0);
    let holds_x0 = |c: &WhitneyCube| {
        (c.cell_lo[0]..c.cell_lo[0] + c.side_cells).contains(&xi)
            && (c.cell_lo[1]..c.cell_lo[1] + c.side_cells).contains(&xj)
    };
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by_key(|&c| {
        let q = &cubes[c];
        (!holds_x0(q), q.k, q.cell_lo[1], q.cell_lo[0])
    });
    if !holds_x0(&cubes[order[0]]) {
        return Err(Error::Discretization("reference cell is not covered by a cube".into()));
    }
    let mut rank = vec![0u32; cubes.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new as u32;
    }
    let cubes: Vec<WhitneyCube> = order.iter().map(|&o| cubes[o]).collect();
    for n in nodes.iter_mut() {
        if let Node::Leaf(c) = n {
            *c = rank[*c as usize];
        }
    }

    let mut locator = vec![NO_CUBE; g.len()];
    let mut covered = vec![false; g.len()];
    let mut cube_cells = vec![0usize; cubes.len()];
    for (j, c) in cubes.iter().enumerate() {
        for cj in c.cell_lo[1]..(c.cell_lo[1] + c.side_cells).min(ny) {
            for ci in c.cell_lo[0]..(c.cell_lo[0] + c.side_cells).min(nx) {
                let idx = g.index(ci, cj);
                if dom.mask[idx] {
                    locator[idx] = j as u32;
                    covered[idx] = true;
                    cube_cells[j] += 1;
                }
            }
        }
    }

    // Boundary-layer cells inherit the cube of the nearest covered cell,
    // reached through admissible stencil edges.
    let mut layer_next = vec![NO_CUBE; g.len()];
    let mut queue: VecDeque<usize> = (0..g.len()).filter(|&i| covered[i]).collect();
    while let Some(idx) = queue.pop_front() {
        let (i, j) = g.coords(idx);
        for (k, &(di, dj)) in STENCIL.iter().enumerate().take(8) {
            if dom.edges[idx] & (1 << k) == 0 {
                continue;
            }
            let nidx = g.index((i as i64 + di) as usize, (j as i64 + dj) as usize);
            if locator[nidx] == NO_CUBE {
                locator[nidx] = locator[idx];
                layer_next[nidx] = idx as u32;
                queue.push_back(nidx);
            }
        }
    }
    let stranded = dom.true_cells().filter(|&i| locator[i] == NO_CUBE).count();
    if stranded > 0 {
        return Err(Error::Discretization(format!("{stranded} cells not attached to any cube")));
    }

    Ok(WhitneyDecomposition {
        cubes,
        locator,
        covered,
        layer_next,
        cube_cells,
        root_cells,
        root_origin: g.origin,
        h: g.h,
        nodes,
        children,
    })
}

impl WhitneyDecomposition {
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Cube owning a true cell, and whether the cell is in the boundary layer.
    pub fn locate(&self, cell: usize) -> Option<(usize, bool)> {
        let c = self.locator[cell];
        (c != NO_CUBE).then(|| (c as usize, !self.covered[cell]))
    }

    /// Cubes whose closed square lies within distance `r` of `p`, in
    /// increasing index order.
    pub fn cubes_near(&self, p: Point, r: f64) -> Vec<usize> {
        self.cubes_in_annulus(p, f64::NEG_INFINITY, r)
    }

    /// Cubes whose closed square has a point at distance in `[r_in, r_out]`
    /// from `p`, in increasing index order.
    pub fn cubes_in_annulus(&self, p: Point, r_in: f64, r_out: f64) -> Vec<usize> {
        let r = r_out;
        let mut out = Vec::new();
        let mut stack = vec![(0usize, [0usize, 0usize], self.root_cells)];
        while let Some((node, lo, s)) = stack.pop() {
            let side = s as f64 * self.h;
            let min = [self.root_origin[0] + lo[0] as f64 * self.h, self.root_origin[1] + lo[1] as f64 * self.h];
            let dx = (min[0] - p[0]).max(p[0] - min[0] - side).max(0.0);
            let dy = (min[1] - p[1]).max(p[1] - min[1] - side).max(0.0);
            if dx.hypot(dy) > r {
                continue;
            }
            let fx = (p[0] - min[0]).abs().max((min[0] + side - p[0]).abs());
            let fy = (p[1] - min[1]).abs().max((min[1] + side - p[1]).abs());
            if fx.hypot(fy) < r_in {
                continue;
            }
            match self.nodes[node] {
                Node::Empty => {}
                Node::Leaf(c) => out.push(c as usize),
                Node::Split(ch) => {
                    let half = s / 2;
                    let kids = self.children[ch as usize];
                    for (c, (di, dj)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
                        stack.push((kids[c] as usize, [lo[0] + di * half, lo[1] + dj * half], half));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn min_side(&self) -> f64 {
        self.cubes.iter().map(|c| c.side).fold(f64::INFINITY, f64::min)
    }
}

/// Per-cube outcome of the raster Whitney tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeCheck {
    pub double_inside: bool,
    pub quadruple_meets_exterior: bool,
    pub bracket_ok: bool,
}

impl CubeCheck {
    pub fn passes(&self) -> bool {
        self.double_inside && self.quadruple_meets_exterior && self.bracket_ok
    }
}

/// Summary of [`check`].
#[derive(Debug, Clone)]
pub struct WhitneyReport {
    pub cubes: usize,
    pub pass_fraction: f64,
    pub double_failures: usize,
    pub quadruple_failures: usize,
    pub bracket_failures: usize,
    pub layer_cells: usize,
    pub max_layer_distance: f64,
    pub per_cube: Vec<CubeCheck>,
}

/// Re-tests every cube on the raster: the double inside the mask, the
/// quadruple meeting the exterior (the box boundary counts as exterior), and
/// `l/2 - h <= d(x) <= (5 sqrt(n) / 2) l + h` on its cells.
pub fn check(dom: &GridDomain, dec: &WhitneyDecomposition) -> WhitneyReport {
    let g = dom.grid;
    let (nx, ny) = (g.nx, g.ny);
    let false_sat = Sat::new(nx, ny, |i, j| !dom.mask[g.index(i, j)]);
    let upper = 2.5 * (dom.n as f64).sqrt();
    let mut per_cube: Vec<CubeCheck> = dec
        .cubes
        .iter()
        .map(|c| {
            let (lo2, hi2) = c.scaled_range(2);
            let (lo4, hi4) = c.scaled_range(4);
            CubeCheck {
                double_inside: inside_grid(lo2, hi2, nx, ny) && false_sat.count(lo2, hi2, nx, ny) == 0,
                quadruple_meets_exterior: !inside_grid(lo4, hi4, nx, ny) || false_sat.count(lo4, hi4, nx, ny) > 0,
                bracket_ok: true,
            }
        })
        .collect();
    let mut layer_cells = 0;
    let mut max_layer_distance: f64 = 0.0;
    for idx in dom.true_cells() {
        let j = dec.locator[idx] as usize;
        if !dec.covered[idx] {
            layer_cells += 1;
            max_layer_distance = max_layer_distance.max(dom.d[idx]);
            continue;
        }
        let l = dec.cubes[j].side;
        let d = dom.d[idx];
        if d < 0.5 * l - g.h || d > upper * l + g.h {
            per_cube[j].bracket_ok = false;
        }
    }
    let count = |f: fn(&CubeCheck) -> bool| per_cube.iter().filter(|c| !f(c)).count();
    let passing = per_cube.iter().filter(|c| c.passes()).count();
    WhitneyReport {
        cubes: per_cube.len(),
        pass_fraction: passing as f64 / per_cube.len().max(1) as f64,
        double_failures: count(|c| c.double_inside),
        quadruple_failures: count(|c| c.quadruple_meets_exterior),
        bracket_failures: count(|c| c.bracket_ok),
        layer_cells,
        max_layer_distance,
        per_cube,
    }
}

/// C1 ramp: 1 on `[0, 1]`, smoothstep down to 0 on `[1, 2]`.
#[inline]
fn ramp(t: f64) -> (f64, f64) {
    if t <= 1.0 {
        (1.0, 0.0)
    } else if t >= 2.0 {
        (0.0, 0.0)
    } else {
        let u = t - 1.0;
        (1.0 - u * u * (3.0 - 2.0 * u), -6.0 * u * (1.0 - u))
    }
}

/// Unnormalized tensor-product profile of a cube and its gradient.
#[inline]
pub fn profile(cube: &WhitneyCube, p: Point) -> (f64, [f64; 2]) {
    let half = 0.5 * cube.side;
    let dx = p[0] - cube.center[0];
    let dy = p[1] - cube.center[1];
    let (fx, gx) = ramp(dx.abs() / half);
    let (fy, gy) = ramp(dy.abs() / half);
    let sx = dx.signum() / half;
    let sy = dy.signum() / half;
    (fx * fy, [gx * sx * fy, fx * gy * sy])
}

/// Partition of unity subordinate to the doubled cubes.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    /// Pointwise sum of the unnormalized profiles.
    pub total: Vec<f64>,
    /// Gradient of `total`.
    pub total_grad: Vec<[f64; 2]>,
}

/// Builds the normalizing sums; individual `chi_j` are evaluated on demand.
pub fn partition_of_unity(dom: &GridDomain, dec: &WhitneyDecomposition) -> PartitionOfUnity {
    let g = dom.grid;
    let mut total = vec![0.0; g.len()];
    let mut total_grad = vec![[0.0; 2]; g.len()];
    for cube in &dec.cubes {
        for idx in support_cells(dom, cube) {
            let (v, gr) = profile(cube, g.center(idx));
            total[idx] += v;
            total_grad[idx][0] += gr[0];
            total_grad[idx][1] += gr[1];
        }
    }
    PartitionOfUnity { total, total_grad }
}

/// True cells whose centers lie in the open double of `cube`.
pub fn support_cells<'a>(dom: &'a GridDomain, cube: &WhitneyCube) -> impl Iterator<Item = usize> + 'a {
    let g = dom.grid;
    let s = cube.side_cells as i64;
    let grow = s / 2;
    let lo = [cube.cell_lo[0] as i64 - grow, cube.cell_lo[1] as i64 - grow];
    let hi = [cube.cell_lo[0] as i64 + s + grow, cube.cell_lo[1] as i64 + s + grow];
    let (x0, x1) = (lo[0].max(0), hi[0].min(g.nx as i64));
    let (y0, y1) = (lo[1].max(0), hi[1].min(g.ny as i64));
    (y0..y1).flat_map(move |j| (x0..x1).map(move |i| g.index(i as usize, j as usize)))
        .filter(move |&idx| dom.mask[idx])
}

impl PartitionOfUnity {
    /// `chi_j` and its gradient at a cell; zero on boundary-layer cells.
    pub fn chi(&self, dom: &GridDomain, dec: &WhitneyDecomposition, j: usize, cell: usize) -> (f64, [f64; 2]) {
        if !dec.covered[cell] {
            return (0.0, [0.0; 2]);
        }
        let s = self.total[cell];
        if s <= 0.0 {
            return (0.0, [0.0; 2]);
        }
        let (v, gr) = profile(&dec.cubes[j], dom.grid.center(cell));
        let tg = self.total_grad[cell];
        (v / s, [gr[0] / s - v * tg[0] / (s * s), gr[1] / s - v * tg[1] / (s * s)])
    }

    /// `max_j l_j * max |grad chi_j|` over all cubes.
    pub fn gradient_bound(&self, dom: &GridDomain, dec: &WhitneyDecomposition) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, cube) in dec.cubes.iter().enumerate() {
            for idx in support_cells(dom, cube) {
                let (_, gr) = self.chi(dom, dec, j, idx);
                worst = worst.max(cube.side * gr[0].hypot(gr[1]));
            }
        }
        worst
    }
}
