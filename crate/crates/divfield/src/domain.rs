//! Rasterized planar domains, their generators, and the two distance fields.
//!
//! A [`GridDomain`] stores a cell mask (cell center inside the domain), the
//! reference cell `x0`, the boundary distance `d` and the in-domain geodesic
//! distance `dgeo` to `x0`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{dist, segment_cells, BBox, Grid, Point};

/// Upper bound on the number of grid cells.
pub const MAX_CELLS: u64 = 100_000_000;

/// Radius of the disk that contains the spiral generators.
pub const SPIRAL_OUTER_RADIUS: f64 = 10.0;

/// Generator families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Disk { radius: f64 },
    Square { side: f64 },
    LogSpiral,
    PowerSpiral { a: f64 },
    HoelderCusp { alpha: f64 },
    FriedrichsCusp { k: f64 },
}

/// A generator together with its bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub bbox: BBox,
}

impl DomainSpec {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let bbox = match kind {
            DomainKind::Disk { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidSpec(format!("disk radius {radius}")));
                }
                BBox::new([-radius, -radius], [radius, radius])
            }
            DomainKind::Square { side } => {
                if !(side > 0.0 && side.is_finite()) {
                    return Err(Error::InvalidSpec(format!("square side {side}")));
                }
                BBox::new([-side / 2.0, -side / 2.0], [side / 2.0, side / 2.0])
            }
            DomainKind::LogSpiral => spiral_box(),
            DomainKind::PowerSpiral { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidSpec(format!("power_spiral requires a > 0, got {a}")));
                }
                spiral_box()
            }
            DomainKind::HoelderCusp { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "hoelder_cusp requires 0 < alpha <= 1, got {alpha}"
                    )));
                }
                BBox::new([-1.0, 0.0], [1.0, 2.0])
            }
            DomainKind::FriedrichsCusp { k } => {
                if !(k > 1.0 && k.is_finite()) {
                    return Err(Error::InvalidSpec(format!("friedrichs_cusp requires k > 1, got {k}")));
                }
                BBox::new([0.0, -0.5], [2.0, 0.5])
            }
        };
        Ok(Self { kind, bbox })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(DomainKind::Disk { radius })
    }

    pub fn square(side: f64) -> Result<Self> {
        Self::new(DomainKind::Square { side })
    }

    pub fn log_spiral() -> Self {
        Self { kind: DomainKind::LogSpiral, bbox: spiral_box() }
    }

    pub fn power_spiral(a: f64) -> Result<Self> {
        Self::new(DomainKind::PowerSpiral { a })
    }

    pub fn hoelder_cusp(alpha: f64) -> Result<Self> {
        Self::new(DomainKind::HoelderCusp { alpha })
    }

    pub fn friedrichs_cusp(k: f64) -> Result<Self> {
        Self::new(DomainKind::FriedrichsCusp { k })
    }

    /// Fixed interior anchor for the reference point.
    pub fn anchor(&self) -> Point {
        match self.kind {
            DomainKind::Disk { .. } | DomainKind::Square { .. } => [0.0, 0.0],
            DomainKind::LogSpiral | DomainKind::PowerSpiral { .. } => [5.5, 0.0],
            DomainKind::HoelderCusp { .. } => [0.0, 1.25],
            DomainKind::FriedrichsCusp { .. } => [1.5, 0.0],
        }
    }

    /// Analytic membership test, ignoring the spiral curve itself.
    fn contains_smooth(&self, p: Point) -> bool {
        let [x, y] = p;
        match self.kind {
            DomainKind::Disk { radius } => x * x + y * y < radius * radius,
            DomainKind::Square { side } => x.abs() < side / 2.0 && y.abs() < side / 2.0,
            DomainKind::LogSpiral | DomainKind::PowerSpiral { .. } => {
                x * x + y * y < SPIRAL_OUTER_RADIUS * SPIRAL_OUTER_RADIUS
            }
            DomainKind::HoelderCusp { alpha } => x.abs() < 1.0 && x.abs().powf(alpha) < y && y < 2.0,
            DomainKind::FriedrichsCusp { k } => {
                (1.0..2.0).contains(&x) && y.abs() < 0.5 || (x > 0.0 && x < 1.0 && y.abs() < 0.5 * x.powf(k))
            }
        }
    }
}

fn spiral_box() -> BBox {
    BBox::new(
        [-SPIRAL_OUTER_RADIUS, -SPIRAL_OUTER_RADIUS],
        [SPIRAL_OUTER_RADIUS, SPIRAL_OUTER_RADIUS],
    )
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DomainKind::Disk { radius } => write!(f, "disk({radius})"),
            DomainKind::Square { side } => write!(f, "square({side})"),
            DomainKind::LogSpiral => write!(f, "log_spiral"),
            DomainKind::PowerSpiral { a } => write!(f, "power_spiral({a})"),
            DomainKind::HoelderCusp { alpha } => write!(f, "hoelder_cusp({alpha})"),
            DomainKind::FriedrichsCusp { k } => write!(f, "friedrichs_cusp({k})"),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in {s:?}")))?;
                let arg: f64 = s[open + 1..close]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad parameter in {s:?}")))?;
                (&s[..open], Some(arg))
            }
            None => (s, None),
        };
        let need = |arg: Option<f64>| arg.ok_or_else(|| Error::Parse(format!("{name} needs a parameter")));
        match name.trim() {
            "disk" => Self::disk(arg.unwrap_or(1.0)),
            "square" => Self::square(arg.unwrap_or(1.0)),
            "log_spiral" => Ok(Self::log_spiral()),
            "power_spiral" => Self::power_spiral(need(arg)?),
            "hoelder_cusp" => Self::hoelder_cusp(need(arg)?),
            "friedrichs_cusp" => Self::friedrichs_cusp(need(arg)?),
            other => Err(Error::Parse(format!("unknown domain kind {other:?}"))),
        }
    }
}

/// Polar spiral `r(theta)` for `theta >= theta_start`, decreasing to 0.
trait SpiralCurve {
    fn theta_start(&self) -> f64;
    fn radius(&self, theta: f64) -> f64;
    fn dradius(&self, theta: f64) -> f64;
}

struct PowerSpiralCurve {
    a: f64,
}

impl SpiralCurve for PowerSpiralCurve {
    fn theta_start(&self) -> f64 {
        1.0
    }
    fn radius(&self, theta: f64) -> f64 {
        theta.powf(-1.0 / self.a)
    }
    fn dradius(&self, theta: f64) -> f64 {
        -theta.powf(-1.0 / self.a - 1.0) / self.a
    }
}

struct LogSpiralCurve;

impl SpiralCurve for LogSpiralCurve {
    fn theta_start(&self) -> f64 {
        0.0
    }
    fn radius(&self, theta: f64) -> f64 {
        (-theta).exp()
    }
    fn dradius(&self, theta: f64) -> f64 {
        -(-theta).exp()
    }
}

/// Marks every cell whose closed square meets the spiral, and fills the core
/// disk where consecutive turns are closer than two cells.
fn block_spiral(grid: &Grid, mask: &mut [bool], curve: &dyn SpiralCurve) {
    let h = grid.h;
    let tau = std::f64::consts::TAU;
    let mut theta = curve.theta_start();
    let point = |t: f64| {
        let r = curve.radius(t);
        [r * t.cos(), r * t.sin()]
    };
    let mut prev = point(theta);
    loop {
        let r = curve.radius(theta);
        if r - curve.radius(theta + tau) < 2.0 * h {
            break;
        }
        let speed = curve.dradius(theta).hypot(r);
        theta += 0.25 * h / speed;
        let next = point(theta);
        segment_cells(grid, prev, next, |i, j| {
            if grid.contains(i, j) {
                mask[grid.index(i as usize, j as usize)] = false;
            }
            true
        });
        prev = next;
    }
    let core = curve.radius(theta) + 0.5 * h;
    let (i0, j0) = grid.cell_of([-core, -core]);
    let (i1, j1) = grid.cell_of([core, core]);
    for j in j0.max(0)..=j1.min(grid.ny as i64 - 1) {
        for i in i0.max(0)..=i1.min(grid.nx as i64 - 1) {
            let c = grid.center_ij(i, j);
            if c[0].hypot(c[1]) <= core {
                mask[grid.index(i as usize, j as usize)] = false;
            }
        }
    }
}

/// Offsets of the 16-neighbor stencil (axial, diagonal and knight moves).
pub const STENCIL: [(i64, i64); 16] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (2, 1),
    (2, -1),
    (-2, 1),
    (-2, -1),
    (1, 2),
    (1, -2),
    (-1, 2),
    (-1, -2),
];

/// Rasterized domain with its distance fields.
#[derive(Debug, Clone)]
pub struct GridDomain {
    pub spec: DomainSpec,
    pub grid: Grid,
    /// Spatial dimension.
    pub n: usize,
    pub mask: Vec<bool>,
    /// Linear index of the reference cell.
    pub x0: usize,
    /// Boundary distance per cell (0 on exterior cells).
    pub d: Vec<f64>,
    /// Nearest exterior cell center per cell, in cell coordinates.
    pub feature: Vec<[i32; 2]>,
    /// Geodesic distance to `x0` per cell (infinite on exterior cells).
    pub dgeo: Vec<f64>,
    /// Predecessor on a shortest path to `x0` (`u32::MAX` for none).
    pub parent: Vec<u32>,
    /// Bit `k` set when the stencil edge `STENCIL[k]` is admissible.
    pub edges: Vec<u16>,
}

/// Rasterizes `spec` at `cells_per_unit` and computes both distance fields.
pub fn rasterize(spec: &DomainSpec, cells_per_unit: usize) -> Result<GridDomain> {
    if cells_per_unit == 0 {
        return Err(Error::InvalidSpec("cells_per_unit must be positive".into()));
    }
    let nx = (spec.bbox.width() * cells_per_unit as f64).round() as u64;
    let ny = (spec.bbox.height() * cells_per_unit as f64).round() as u64;
    if nx.saturating_mul(ny) > MAX_CELLS {
        return Err(Error::ResolutionOverflow(nx.saturating_mul(ny), MAX_CELLS));
    }
    let grid = Grid { nx: nx as usize, ny: ny as usize, h: 1.0 / cells_per_unit as f64, origin: spec.bbox.min };
    let mut mask: Vec<bool> = (0..grid.len()).map(|idx| spec.contains_smooth(grid.center(idx))).collect();
    match spec.kind {
        DomainKind::PowerSpiral { a } => block_spiral(&grid, &mut mask, &PowerSpiralCurve { a }),
        DomainKind::LogSpiral => block_spiral(&grid, &mut mask, &LogSpiralCurve),
        _ => {}
    }
    let anchor = spec.anchor();
    let (ai, aj) = grid.cell_of(anchor);
    if !grid.contains(ai, aj) {
        return Err(Error::AnchorNotInterior(anchor));
    }
    let x0 = grid.index(ai as usize, aj as usize);
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyDomain);
    }
    if !mask[x0] {
        return Err(Error::AnchorNotInterior(anchor));
    }
    keep_component(&grid, &mut mask, x0);
    let mut dom = GridDomain {
        spec: *spec,
        grid,
        n: 2,
        mask,
        x0,
        d: Vec::new(),
        feature: Vec::new(),
        dgeo: Vec::new(),
        parent: Vec::new(),
        edges: Vec::new(),
    };
    boundary_distance(&mut dom);
    geodesic_distance(&mut dom)?;
    Ok(dom)
}

/// Keeps only the true cells reachable from `seed` through admissible
/// stencil edges. The kept set is 8-connected.
fn keep_component(grid: &Grid, mask: &mut [bool], seed: usize) {
    let edges = admissible_edges(grid, mask);
    let mut keep = vec![false; mask.len()];
    let mut queue = VecDeque::from([seed]);
    keep[seed] = true;
    while let Some(idx) = queue.pop_front() {
        let (i, j) = grid.coords(idx);
        for (k, &(di, dj)) in STENCIL.iter().enumerate() {
            if edges[idx] & (1 << k) == 0 {
                continue;
            }
            let nidx = grid.index((i as i64 + di) as usize, (j as i64 + dj) as usize);
            if !keep[nidx] {
                keep[nidx] = true;
                queue.push_back(nidx);
            }
        }
    }
    mask.copy_from_slice(&keep);
}

/// Exact Euclidean distance transform to exterior cell centers.
///
/// Cells outside the grid count as exterior. The stored distance is shifted
/// by `-h/2` so that it measures the distance to the midpoint between the
/// last interior and first exterior centers.
pub fn boundary_distance(dom: &mut GridDomain) {
    let grid = dom.grid;
    let (pw, ph) = (grid.nx + 2, grid.ny + 2);
    let outside = |pi: usize, pj: usize| -> bool {
        pi == 0 || pj == 0 || pi == pw - 1 || pj == ph - 1 || !dom.mask[grid.index(pi - 1, pj - 1)]
    };
    const NONE: i32 = i32::MIN / 4;
    // Column pass: nearest exterior row in each padded column.
    let mut near_row = vec![NONE; pw * ph];
    for pi in 0..pw {
        let mut last = NONE;
        for pj in 0..ph {
            if outside(pi, pj) {
                last = pj as i32;
            }
            near_row[pj * pw + pi] = last;
        }
        let mut last = NONE;
        for pj in (0..ph).rev() {
            if outside(pi, pj) {
                last = pj as i32;
            }
            let cur = near_row[pj * pw + pi];
            let best = if last == NONE {
                cur
            } else if cur == NONE || (last - pj as i32).abs() < (pj as i32 - cur).abs() {
                last
            } else {
                cur
            };
            near_row[pj * pw + pi] = best;
        }
    }
    // Row pass: lower envelope of parabolas.
    let mut feature = vec![[0i32; 2]; grid.len()];
    let mut d = vec![0.0; grid.len()];
    let mut g = vec![0f64; pw];
    let mut v = vec![0usize; pw];
    let mut z = vec![0f64; pw + 1];
    for pj in 1..ph - 1 {
        for pi in 0..pw {
            let r = near_row[pj * pw + pi];
            let dy = (pj as i32 - r) as f64;
            g[pi] = dy * dy;
        }
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..pw {
            loop {
                let p = v[k];
                let s = ((g[q] + (q * q) as f64) - (g[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= z[k] && k > 0 {
                    k -= 1;
                } else {
                    k += 1;
                    v[k] = q;
                    z[k] = s;
                    z[k + 1] = f64::INFINITY;
                    break;
                }
            }
        }
        k = 0;
        for pi in 0..pw {
            while z[k + 1] < pi as f64 {
                k += 1;
            }
            if pi == 0 || pi == pw - 1 {
                continue;
            }
            let col = v[k];
            let idx = grid.index(pi - 1, pj - 1);
            let row = near_row[pj * pw + col];
            feature[idx] = [col as i32 - 1, row - 1];
            if dom.mask[idx] {
                let dx = pi as f64 - col as f64;
                d[idx] = ((dx * dx + g[col]).sqrt() - 0.5) * grid.h;
            }
        }
    }
    dom.d = d;
    dom.feature = feature;
}

impl GridDomain {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.grid.h.powi(self.n as i32)
    }

    pub fn x0_point(&self) -> Point {
        self.grid.center(self.x0)
    }

    pub fn true_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.mask[i])
    }

    pub fn true_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Measure of the rasterized domain.
    pub fn area(&self) -> f64 {
        self.true_count() as f64 * self.cell_volume()
    }

    /// Whether the cell containing `p` is a true cell.
    pub fn is_inside(&self, p: Point) -> bool {
        let (i, j) = self.grid.cell_of(p);
        self.grid.contains(i, j) && self.mask[self.grid.index(i as usize, j as usize)]
    }

    /// Boundary distance at an arbitrary point, from the exterior features
    /// of the 3x3 cells around it.
    pub fn d_at(&self, p: Point) -> f64 {
        self.d_with_grad_at(p).0
    }

    /// Boundary distance and its gradient at an arbitrary point.
    pub fn d_with_grad_at(&self, p: Point) -> (f64, [f64; 2]) {
        let g = &self.grid;
        let (ci, cj) = g.cell_of(p);
        let mut best = f64::INFINITY;
        let mut best_f = p;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (ci + di, cj + dj);
                let f = if g.contains(i, j) {
                    let idx = g.index(i as usize, j as usize);
                    if self.mask[idx] {
                        self.feature[idx]
                    } else {
                        [i as i32, j as i32]
                    }
                } else {
                    [i as i32, j as i32]
                };
                let c = g.center_ij(f[0] as i64, f[1] as i64);
                let r = dist(p, c);
                if r < best {
                    best = r;
                    best_f = c;
                }
            }
        }
        let grad = if best > 0.0 { [(p[0] - best_f[0]) / best, (p[1] - best_f[1]) / best] } else { [0.0; 2] };
        (best - 0.5 * g.h, grad)
    }

    /// Linear index of the true cell containing `p`.
    pub fn cell_index(&self, p: Point) -> Option<usize> {
        let (i, j) = self.grid.cell_of(p);
        if !self.grid.contains(i, j) {
            return None;
        }
        let idx = self.grid.index(i as usize, j as usize);
        self.mask[idx].then_some(idx)
    }

    /// Follows predecessors from `idx` to `x0`.
    pub fn grid_path(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![idx];
        let mut cur = idx;
        while self.parent[cur] != u32::MAX {
            cur = self.parent[cur] as usize;
            out.push(cur);
        }
        out
    }

    /// Largest boundary distance over true cells.
    pub fn max_d(&self) -> f64 {
        self.true_cells().map(|i| self.d[i]).fold(0.0, f64::max)
    }
}

/// Computes the admissible stencil edges of every true cell.
fn admissible_edges(grid: &Grid, mask: &[bool]) -> Vec<u16> {
    let through: Vec<Vec<(i64, i64)>> = STENCIL
        .iter()
        .map(|&(di, dj)| {
            let unit = Grid { nx: 8, ny: 8, h: 1.0, origin: [-4.0, -4.0] };
            let mut cells = Vec::new();
            segment_cells(&unit, [0.5, 0.5], [0.5 + di as f64, 0.5 + dj as f64], |i, j| {
                let off = (i - 4, j - 4);
                if off != (0, 0) && off != (di, dj) {
                    cells.push(off);
                }
                true
            });
            cells
        })
        .collect();
    let ok = |i: i64, j: i64| grid.contains(i, j) && mask[grid.index(i as usize, j as usize)];
    (0..grid.len())
        .map(|idx| {
            if !mask[idx] {
                return 0;
            }
            let (i, j) = grid.coords(idx);
            let (i, j) = (i as i64, j as i64);
            let mut bits = 0u16;
            for (k, &(di, dj)) in STENCIL.iter().enumerate() {
                if ok(i + di, j + dj) && through[k].iter().all(|&(a, b)| ok(i + a, j + b)) {
                    bits |= 1 << k;
                }
            }
            bits
        })
        .collect()
}

/// Shortest paths from `x0` over the 16-neighbor graph with Euclidean edges.
pub fn geodesic_distance(dom: &mut GridDomain) -> Result<()> {
    let grid = dom.grid;
    let edges = admissible_edges(&grid, &dom.mask);
    let lengths: Vec<f64> = STENCIL.iter().map(|&(a, b)| grid.h * ((a * a + b * b) as f64).sqrt()).collect();
    let mut dgeo = vec![f64::INFINITY; grid.len()];
    let mut parent = vec![u32::MAX; grid.len()];
    let mut heap = BinaryHeap::new();
    dgeo[dom.x0] = 0.0;
    heap.push(Reverse((0f64.to_bits(), dom.x0 as u32)));
    while let Some(Reverse((bits, idx))) = heap.pop() {
        let idx = idx as usize;
        let du = f64::from_bits(bits);
        if du > dgeo[idx] {
            continue;
        }
        let (i, j) = grid.coords(idx);
        let e = edges[idx];
        for (k, &(di, dj)) in STENCIL.iter().enumerate() {
            if e & (1 << k) == 0 {
                continue;
            }
            let nidx = grid.index((i as i64 + di) as usize, (j as i64 + dj) as usize);
            let cand = du + lengths[k];
            if cand < dgeo[nidx] {
                dgeo[nidx] = cand;
                parent[nidx] = idx as u32;
                heap.push(Reverse((cand.to_bits(), nidx as u32)));
            }
        }
    }
    let unreachable = (0..grid.len()).filter(|&i| dom.mask[i] && dgeo[i].is_infinite()).count();
    dom.edges = edges;
    dom.dgeo = dgeo;
    dom.parent = parent;
    if unreachable > 0 {
        return Err(Error::Unreachable(unreachable));
    }
    Ok(())
}

/// Default relative threshold for a stabilizing Riemann sum.
pub const EPS_STAB: f64 = 0.02;
/// Default relative threshold for a growing Riemann sum.
pub const EPS_GROW: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stabilizing,
    Growing,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stabilizing => "stabilizing",
            Verdict::Growing => "growing",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Riemann sums of the geodesic distance across resolutions.
#[derive(Debug, Clone)]
pub struct IntegrabilityReport {
    pub resolutions: Vec<usize>,
    pub sums: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: Verdict,
}

/// Sum of `dgeo * h^n` over true cells.
pub fn geodesic_integral(dom: &GridDomain) -> f64 {
    let vol = dom.cell_volume();
    dom.true_cells().map(|i| dom.dgeo[i] * vol).sum()
}

/// Probes integrability of the geodesic distance by refinement.
pub fn integrability_probe(
    spec: &DomainSpec,
    resolutions: &[usize],
    eps_stab: f64,
    eps_grow: f64,
) -> Result<IntegrabilityReport> {
    if resolutions.len() < 3 || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Resolutions { needed: 3, got: resolutions.to_vec() });
    }
    let mut sums = Vec::with_capacity(resolutions.len());
    for &r in resolutions {
        let dom = rasterize(spec, r)?;
        sums.push(geodesic_integral(&dom));
    }
    let ratios: Vec<f64> = sums.windows(2).map(|w| w[1] / w[0]).collect();
    let last = *ratios.last().expect("at least two sums");
    let verdict = if last <= 1.0 + eps_stab {
        Verdict::Stabilizing
    } else if last >= 1.0 + eps_grow {
        Verdict::Growing
    } else {
        Verdict::Inconclusive
    };
    Ok(IntegrabilityReport { resolutions: resolutions.to_vec(), sums, ratios, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(DomainSpec::power_spiral(0.0).is_err());
        assert!(DomainSpec::hoelder_cusp(1.5).is_err());
        assert!(DomainSpec::hoelder_cusp(1.0).is_ok());
        assert!(DomainSpec::friedrichs_cusp(1.0).is_err());
        assert_eq!(DomainSpec::power_spiral(2.0).unwrap().bbox, spiral_box());
    }

    #[test]
    fn spec_round_trip() {
        for s in ["disk(1)", "square(2)", "log_spiral", "power_spiral(0.5)", "hoelder_cusp(0.5)", "friedrichs_cusp(3)"] {
            let spec: DomainSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("triangle(1)".parse::<DomainSpec>().is_err());
        assert!("power_spiral".parse::<DomainSpec>().is_err());
    }

    #[test]
    fn square_rows_and_distance() {
        let dom = rasterize(&DomainSpec::square(1.0).unwrap(), 64).unwrap();
        assert_eq!(dom.true_count(), 64 * 64);
        let h = dom.h();
        for idx in dom.true_cells() {
            let [x, y] = dom.grid.center(idx);
            let exact = (0.5 - x.abs()).min(0.5 - y.abs());
            assert!((dom.d[idx] - exact).abs() <= h, "d mismatch at {x},{y}");
        }
    }

    #[test]
    fn x0_has_zero_geodesic_distance() {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), 32).unwrap();
        assert_eq!(dom.dgeo[dom.x0], 0.0);
        assert!(dom.true_cells().all(|i| dom.dgeo[i].is_finite()));
    }

    #[test]
    fn probe_needs_three_resolutions() {
        let spec = DomainSpec::disk(1.0).unwrap();
        assert!(integrability_probe(&spec, &[16, 32], EPS_STAB, EPS_GROW).is_err());
        assert!(integrability_probe(&spec, &[32, 16, 64], EPS_STAB, EPS_GROW).is_err());
    }
}
