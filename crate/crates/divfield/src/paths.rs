//! Path family: a shortest grid path from every cube center to `x0`,
//! straightened inside each cube it crosses, and per-point traces.
//!
//! Shortest paths come from the predecessor tree of the geodesic distance, so
//! two paths that share a grid cell share everything after the next cube
//! crossing. The family is stored once as a forest of crossing nodes: a node
//! is a grid edge `a -> parent(a)` that leaves a cube (or a boundary-layer
//! cell), with the exit point from the region of `a` and the entry point into
//! the region of `parent(a)`. Inside a cube, consecutive crossings are joined
//! by one segment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::grid::{dist, lerp, segment_in_mask, Point};
use crate::whitney::{WhitneyCube, WhitneyDecomposition};

/// Marks the end of a chain of crossings.
pub const TERMINAL: u32 = u32::MAX;

/// A crossing from one region into the next along the predecessor tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Cell whose predecessor lies in another region.
    pub cell: u32,
    /// Point where the grid edge leaves the region of `cell`.
    pub exit: Point,
    /// Point where the grid edge enters the region of the predecessor.
    pub entry: Point,
    /// Next crossing along the path, or `TERMINAL`.
    pub next: u32,
}

#[derive(Debug, Clone)]
pub struct PathFamily {
    pub nodes: Vec<Crossing>,
    /// First crossing of each cube's path (`TERMINAL` for the root cube).
    pub first: Vec<u32>,
    /// Exit point of each cube's path from its cube (`x0` for the root).
    pub exit_point: Vec<Point>,
    /// Straightened length of each cube's path.
    pub length: Vec<f64>,
    /// Grid length of each cube's path before straightening.
    pub raw_length: Vec<f64>,
    /// Length from each crossing's exit point to `x0`.
    pub tail_len: Vec<f64>,
    pub x0: Point,
}

/// Depth-first tour of the crossing forest, roots first: the nodes leading
/// into node `k` occupy positions `tin[k]..tout[k]` of `order`.
#[derive(Debug, Clone)]
pub struct ForestTour {
    pub order: Vec<u32>,
    pub tin: Vec<u32>,
    pub tout: Vec<u32>,
}

/// Parameter interval `[t0, t1]` of the segment `p + t (q - p)` inside the
/// closed cube, if any.
fn clip(cube: &WhitneyCube, p: Point, q: Point) -> Option<(f64, f64)> {
    let r = 0.5 * cube.side;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for ax in 0..2 {
        let lo = cube.center[ax] - r;
        let hi = cube.center[ax] + r;
        let dp = q[ax] - p[ax];
        if dp.abs() < 1e-300 {
            if p[ax] < lo || p[ax] > hi {
                return None;
            }
        } else {
            let (mut a, mut b) = ((lo - p[ax]) / dp, (hi - p[ax]) / dp);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Region id of a cell: its cube when covered, otherwise a per-cell id.
#[inline]
fn region(dec: &WhitneyDecomposition, cell: usize) -> (bool, usize) {
    if dec.covered[cell] {
        (true, dec.locator[cell] as usize)
    } else {
        (false, cell)
    }
}

/// Builds the straightened path family.
pub fn build_family(dom: &GridDomain, dec: &WhitneyDecomposition) -> Result<PathFamily> {
    let g = dom.grid;
    let n = g.len();
    let x0 = dom.x0_point();
    // next_node[c]: first crossing at or after c on its path; UNSET until known.
    const UNSET: u32 = u32::MAX - 1;
    let mut next_node = vec![UNSET; n];
    let mut nodes: Vec<Crossing> = Vec::new();
    let mut chain = Vec::new();
    for start in 0..n {
        if !dom.mask[start] || next_node[start] != UNSET {
            continue;
        }
        chain.clear();
        let mut cur = start;
        while next_node[cur] == UNSET {
            chain.push(cur);
            let p = dom.parent[cur];
            if p == u32::MAX {
                break;
            }
            cur = p as usize;
        }
        // Resolve from the far end of the chain backwards.
        let mut tail = if next_node[cur] == UNSET { TERMINAL } else { next_node[cur] };
        for &c in chain.iter().rev() {
            let p = dom.parent[c];
            if p == u32::MAX {
                next_node[c] = TERMINAL;
                tail = TERMINAL;
                continue;
            }
            let p = p as usize;
            if region(dec, c) != region(dec, p) {
                let pc = g.center(c);
                let pp = g.center(p);
                let exit = match region(dec, c) {
                    (true, j) => {
                        let (_, t1) = clip(&dec.cubes[j], pc, pp).expect("cell lies in its cube");
                        lerp(pc, pp, t1)
                    }
                    (false, _) => pc,
                };
                let entry = match region(dec, p) {
                    (true, j) => {
                        let (t0, _) = clip(&dec.cubes[j], pc, pp).expect("cell lies in its cube");
                        lerp(pc, pp, t0)
                    }
                    (false, _) => pp,
                };
                nodes.push(Crossing { cell: c as u32, exit, entry, next: tail });
                tail = (nodes.len() - 1) as u32;
            }
            next_node[c] = tail;
        }
    }

    let mut first = vec![TERMINAL; dec.len()];
    let mut exit_point = vec![x0; dec.len()];
    let mut raw_length = vec![0.0; dec.len()];
    for (j, cube) in dec.cubes.iter().enumerate() {
        let start = start_cell(dom, cube);
        raw_length[j] = dist(cube.center, g.center(start)) + dom.dgeo[start];
        if j == 0 {
            continue;
        }
        let node = next_node[start];
        if node == TERMINAL {
            return Err(Error::PathViolation(format!("path of cube {j} never leaves it")));
        }
        first[j] = node;
        exit_point[j] = nodes[node as usize].exit;
    }
    // Keep only crossings on some cube's path, renumbered in build order.
    let mut keep = vec![false; nodes.len()];
    for &f in &first {
        let mut k = f;
        while k != TERMINAL && !keep[k as usize] {
            keep[k as usize] = true;
            k = nodes[k as usize].next;
        }
    }
    let mut remap = vec![TERMINAL; nodes.len()];
    let mut kept = 0u32;
    for (k, &on) in keep.iter().enumerate() {
        if on {
            remap[k] = kept;
            kept += 1;
        }
    }
    let relabel = |k: u32| if k == TERMINAL { TERMINAL } else { remap[k as usize] };
    let nodes: Vec<Crossing> = nodes
        .iter()
        .zip(&keep)
        .filter(|(_, &on)| on)
        .map(|(c, _)| Crossing { next: relabel(c.next), ..*c })
        .collect();
    let first: Vec<u32> = first.into_iter().map(relabel).collect();
    let mut fam = PathFamily { nodes, first, exit_point, length: Vec::new(), raw_length, tail_len: Vec::new(), x0 };
    let tour = fam.tour();
    let mut tail_len = vec![0.0; fam.nodes.len()];
    for &k in &tour.order {
        let k = k as usize;
        let n = &fam.nodes[k];
        let rest = if n.next == TERMINAL { 0.0 } else { tail_len[n.next as usize] };
        tail_len[k] = polyline_length(&fam.piece(k)) + rest;
    }
    fam.tail_len = tail_len;
    fam.length = dec
        .cubes
        .iter()
        .enumerate()
        .map(|(j, c)| polyline_length(&fam.cube_path(j, c.center)))
        .collect();
    Ok(fam)
}

/// Cell of the cube closest to its center (lowest index on ties).
fn start_cell(dom: &GridDomain, cube: &WhitneyCube) -> usize {
    let s = cube.side_cells;
    let i = cube.cell_lo[0] + (s - 1) / 2;
    let j = cube.cell_lo[1] + (s - 1) / 2;
    dom.grid.index(i, j)
}

pub fn polyline_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| dist(w[0], w[1])).sum()
}

impl PathFamily {
    /// Polyline `[exit, entry, next exit]` of crossing `k` (`x0` closes the
    /// last crossing of a chain).
    pub fn piece(&self, k: usize) -> [Point; 3] {
        let n = &self.nodes[k];
        let end = if n.next == TERMINAL { self.x0 } else { self.nodes[n.next as usize].exit };
        [n.exit, n.entry, end]
    }

    pub fn tour(&self) -> ForestTour {
        let m = self.nodes.len();
        let mut child_start = vec![0u32; m + 1];
        for n in &self.nodes {
            if n.next != TERMINAL {
                child_start[n.next as usize + 1] += 1;
            }
        }
        for k in 0..m {
            child_start[k + 1] += child_start[k];
        }
        let mut fill = child_start.clone();
        let mut children = vec![0u32; child_start[m] as usize];
        for (k, n) in self.nodes.iter().enumerate() {
            if n.next != TERMINAL {
                let slot = &mut fill[n.next as usize];
                children[*slot as usize] = k as u32;
                *slot += 1;
            }
        }
        let mut tin = vec![0u32; m];
        let mut tout = vec![0u32; m];
        let mut order = Vec::with_capacity(m);
        let mut stack: Vec<(u32, bool)> = Vec::new();
        for root in (0..m).filter(|&k| self.nodes[k].next == TERMINAL) {
            stack.push((root as u32, false));
            while let Some((k, done)) = stack.pop() {
                let ku = k as usize;
                if done {
                    tout[ku] = order.len() as u32;
                    continue;
                }
                tin[ku] = order.len() as u32;
                order.push(k);
                stack.push((k, true));
                for &c in children[child_start[ku] as usize..child_start[ku + 1] as usize].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        ForestTour { order, tin, tout }
    }

    /// Appends the polyline from crossing `node` to `x0`, starting with its
    /// exit point.
    pub fn push_tail(&self, mut node: u32, out: &mut Vec<Point>) {
        while node != TERMINAL {
            let c = &self.nodes[node as usize];
            push_distinct(out, c.exit);
            push_distinct(out, c.entry);
            node = c.next;
        }
        push_distinct(out, self.x0);
    }

    /// Straightened path of cube `j` starting from `from`.
    pub fn cube_path(&self, j: usize, from: Point) -> Vec<Point> {
        let mut pts = vec![from];
        if self.first[j] == TERMINAL {
            push_distinct(&mut pts, self.x0);
        } else {
            self.push_tail(self.first[j], &mut pts);
        }
        pts
    }

    /// Builds the trace of the cell `y`.
    pub fn trace(&self, dom: &GridDomain, dec: &WhitneyDecomposition, y: usize) -> PathTrace {
        self.build_trace(dom, dec, y, false).0
    }

    /// The trace of `y` cut at the exit point of the first shared crossing
    /// that starts at or after `τ(y)`, together with that crossing
    /// (`TERMINAL` when the trace reaches `x0` first, in which case the
    /// trace is complete). The kept prefix is identical to that of
    /// [`PathFamily::trace`].
    pub fn trace_head(&self, dom: &GridDomain, dec: &WhitneyDecomposition, y: usize) -> (PathTrace, u32) {
        self.build_trace(dom, dec, y, true)
    }

    fn build_trace(&self, dom: &GridDomain, dec: &WhitneyDecomposition, y: usize, head: bool) -> (PathTrace, u32) {
        let g = dom.grid;
        let yp = g.center(y);
        let j = dec.locator[y] as usize;
        let mut pts = vec![yp];
        let mut detour = false;
        let mut tail_index = 0;
        let mut cut = TERMINAL;
        if y != dom.x0 {
            let target = self.exit_point[j];
            if !dec.covered[y] && !segment_in_mask(&g, &dom.mask, yp, target) {
                detour = true;
                let mut cur = y;
                while !dec.covered[cur] {
                    cur = dec.layer_next[cur] as usize;
                    push_distinct(&mut pts, g.center(cur));
                }
            }
            if self.first[j] == TERMINAL {
                push_distinct(&mut pts, self.x0);
            } else {
                let exit = self.nodes[self.first[j] as usize].exit;
                tail_index = if pts.last() == Some(&exit) { pts.len() - 1 } else { pts.len() };
                let r2 = (0.5 * dom.d[y]).powi(2);
                let far = |p: &Point| (p[0] - yp[0]).powi(2) + (p[1] - yp[1]).powi(2) >= r2;
                let mut reached = head && pts.iter().any(far);
                let mut node = self.first[j];
                while node != TERMINAL {
                    let c = &self.nodes[node as usize];
                    push_distinct(&mut pts, c.exit);
                    if head {
                        reached |= far(&c.exit);
                        if reached {
                            cut = node;
                            break;
                        }
                        reached |= far(&c.entry);
                    }
                    push_distinct(&mut pts, c.entry);
                    node = c.next;
                }
                if cut == TERMINAL {
                    push_distinct(&mut pts, self.x0);
                }
            }
        }
        let mut tr = PathTrace::new(dom, y, pts, detour);
        if y != dom.x0 && self.first[j] != TERMINAL {
            tr.first_node = self.first[j];
            tr.tail_start = tr.cum[tail_index];
            tr.tail_index = tail_index;
        }
        (tr, cut)
    }
}

fn push_distinct(out: &mut Vec<Point>, p: Point) {
    if out.last() != Some(&p) {
        out.push(p);
    }
}

/// Path of one point with its cut-off parameters.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub cell: usize,
    pub y: Point,
    pub points: Vec<Point>,
    /// Arc length at each vertex.
    pub cum: Vec<f64>,
    pub length: f64,
    /// Arc length of the first point at distance `d(y)/2` from `y`
    /// (the full length when there is none).
    pub tau: f64,
    pub alpha: f64,
    pub d_y: f64,
    /// Whether the trace starts with a boundary-layer detour.
    pub detour: bool,
    /// First crossing of the shared tail (`TERMINAL` if none).
    pub first_node: u32,
    /// Arc length where the shared tail starts.
    pub tail_start: f64,
    /// Vertex index of the first crossing's exit point.
    pub tail_index: usize,
}

impl PathTrace {
    fn new(dom: &GridDomain, cell: usize, points: Vec<Point>, detour: bool) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += dist(w[0], w[1]);
            cum.push(acc);
        }
        let y = points[0];
        let d_y = dom.d[cell];
        let mut tr = PathTrace {
            cell,
            y,
            points,
            cum,
            length: acc,
            tau: acc,
            alpha: 0.0,
            d_y,
            detour,
            first_node: TERMINAL,
            tail_start: acc,
            tail_index: 0,
        };
        tr.tau = tr.first_exit(0.5 * d_y).unwrap_or(acc);
        tr.alpha = 2.0 / 15.0 * tr.boundary_distance(dom, tr.point_at(tr.tau).0).0 / d_y;
        tr
    }

    /// Boundary distance along the trace: the raster estimate, capped by
    /// the 1-Lipschitz bound through `y`.
    pub fn boundary_distance(&self, dom: &GridDomain, p: Point) -> (f64, [f64; 2]) {
        let (d, gd) = dom.d_with_grad_at(p);
        let r = dist(p, self.y);
        let through_y = self.d_y + r;
        if through_y < d && r > 0.0 {
            (through_y, [(p[0] - self.y[0]) / r, (p[1] - self.y[1]) / r])
        } else {
            (d, gd)
        }
    }

    /// Whether this is the degenerate trace of `x0`.
    pub fn is_degenerate(&self) -> bool {
        self.length == 0.0
    }

    /// Smallest arc length at which the trace reaches distance `r` from `y`.
    fn first_exit(&self, r: f64) -> Option<f64> {
        for (k, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            if dist(b, self.y) < r {
                continue;
            }
            // |a + t (b - a) - y| = r with |a - y| < r <= |b - y|.
            let d = [b[0] - a[0], b[1] - a[1]];
            let m = [a[0] - self.y[0], a[1] - self.y[1]];
            let qa = d[0] * d[0] + d[1] * d[1];
            let qb = 2.0 * (d[0] * m[0] + d[1] * m[1]);
            let qc = m[0] * m[0] + m[1] * m[1] - r * r;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let t = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
            return Some(self.cum[k] + t * (self.cum[k + 1] - self.cum[k]));
        }
        None
    }

    /// Point and unit tangent at arc length `s`.
    pub fn point_at(&self, s: f64) -> (Point, Point) {
        if self.points.len() == 1 {
            return (self.points[0], [0.0, 0.0]);
        }
        let k = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(self.points.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.points.len() - 2),
        };
        let seg = self.cum[k + 1] - self.cum[k];
        let t = if seg > 0.0 { ((s - self.cum[k]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (self.points[k], self.points[k + 1]);
        let tan = if seg > 0.0 { [(b[0] - a[0]) / seg, (b[1] - a[1]) / seg] } else { [0.0, 0.0] };
        (lerp(a, b, t), tan)
    }

    /// Cut-off radius and its arc-length derivative at `s`, given the point
    /// and tangent there.
    pub fn rho(&self, dom: &GridDomain, s: f64, p: Point, tan: Point) -> (f64, f64) {
        if self.is_degenerate() {
            return (0.0, 0.0);
        }
        if s <= self.tau {
            let v = [p[0] - self.y[0], p[1] - self.y[1]];
            let r = v[0].hypot(v[1]);
            let dr = if r > 0.0 { (v[0] * tan[0] + v[1] * tan[1]) / r } else { 1.0 };
            (self.alpha * r, self.alpha * dr)
        } else {
            let (d, gd) = self.boundary_distance(dom, p);
            (d / 15.0, (gd[0] * tan[0] + gd[1] * tan[1]) / 15.0)
        }
    }

    /// Length of the trace inside the closed ball `B(x, r)`.
    pub fn length_in_ball(&self, x: Point, r: f64) -> f64 {
        self.points.windows(2).map(|w| chord(w[0], w[1], x, r)).sum()
    }

    /// Distance from `x` to the trace.
    pub fn distance_to(&self, x: Point) -> f64 {
        if self.points.len() == 1 {
            return dist(self.points[0], x);
        }
        self.points
            .windows(2)
            .map(|w| crate::grid::point_segment_distance(x, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Length of the segment `[a, b]` inside the closed ball `B(x, r)`.
pub fn chord(a: Point, b: Point, x: Point, r: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let m = [a[0] - x[0], a[1] - x[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * (d[0] * m[0] + d[1] * m[1]);
    let qc = m[0] * m[0] + m[1] * m[1] - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    (t1 - t0).max(0.0) * qa.sqrt()
}

/// Sampled path diagnostics.
#[derive(Debug, Clone)]
pub struct GammaReport {
    /// Largest `l(gamma(y) ∩ B(x, r)) / r` over sampled triples.
    pub ahlfors: f64,
    /// Largest `l(gamma(y)) / dgeo(y)` over sampled points.
    pub length_ratio: f64,
    /// `(eps, delta)`: smallest boundary distance met by paths starting in
    /// `{d >= eps}`.
    pub depth: Vec<(f64, f64)>,
    pub detours: usize,
    pub samples: usize,
}

/// Samples traces to measure the path constants.
pub fn verify_gamma(
    fam: &PathFamily,
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    sample_count: usize,
    seed: u64,
) -> Result<GammaReport> {
    let cells: Vec<usize> = dom.true_cells().filter(|&c| c != dom.x0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_d = dom.max_d();
    let eps_list: Vec<f64> = [0.5, 0.25, 0.125, 0.0625].iter().map(|f| f * max_d).collect();
    let mut depth: Vec<f64> = vec![f64::INFINITY; eps_list.len()];
    let (mut ahlfors, mut length_ratio) = (0.0f64, 0.0f64);
    let mut detours = 0;
    let h = dom.h();
    for _ in 0..sample_count {
        let y = cells[rng.gen_range(0..cells.len())];
        let tr = fam.trace(dom, dec, y);
        detours += tr.detour as usize;
        length_ratio = length_ratio.max(tr.length / dom.dgeo[y]);
        let s = rng.gen_range(0.0..=tr.length);
        let (p, _) = tr.point_at(s);
        if let Some(xc) = dom.cell_index(p) {
            let x = dom.grid.center(xc);
            let r = rng.gen_range(0.05..=1.0) * 0.5 * dom.d[xc];
            ahlfors = ahlfors.max(tr.length_in_ball(x, r) / r);
        }
        let steps = (tr.length / (0.5 * h)).ceil().max(1.0) as usize;
        let mut lowest = f64::INFINITY;
        for k in 0..=steps {
            let (q, _) = tr.point_at(tr.length * k as f64 / steps as f64);
            lowest = lowest.min(dom.d_at(q));
        }
        for (e, &eps) in eps_list.iter().enumerate() {
            if dom.d[y] >= eps {
                depth[e] = depth[e].min(lowest);
            }
        }
    }
    let depth: Vec<(f64, f64)> = eps_list.into_iter().zip(depth).collect();
    if let Some(&(eps, _)) = depth.iter().find(|&&(_, delta)| delta <= 0.0) {
        return Err(Error::PathViolation(format!("paths from d >= {eps} reach the boundary")));
    }
    Ok(GammaReport { ahlfors, length_ratio, depth, detours, samples: sample_count })
}

/// Outcome of the cut-off radius checks on sampled traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoReport {
    pub traces: usize,
    pub points: usize,
    /// Points with `rho > d / 5`.
    pub rho_violations: usize,
    /// Traces with `alpha > 1/5 + 1e-9`.
    pub alpha_violations: usize,
    pub max_alpha: f64,
    /// Largest `rho / d` seen.
    pub max_rho_ratio: f64,
}

/// Checks `rho(s) <= d(gamma(s)) / 5` at steps of `h/2` (and at `tau`) and
/// `alpha <= 1/5` on `sample_count` seeded traces.
pub fn verify_rho(
    fam: &PathFamily,
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    sample_count: usize,
    seed: u64,
) -> RhoReport {
    let mut rep =
        RhoReport { traces: 0, points: 0, rho_violations: 0, alpha_violations: 0, max_alpha: 0.0, max_rho_ratio: 0.0 };
    let h = dom.h();
    for y in sample_cells(dom, sample_count, seed) {
        let tr = fam.trace(dom, dec, y);
        rep.traces += 1;
        if tr.is_degenerate() {
            continue;
        }
        rep.max_alpha = rep.max_alpha.max(tr.alpha);
        if tr.alpha > 0.2 + 1e-9 {
            rep.alpha_violations += 1;
        }
        let steps = (tr.length / (0.5 * h)).ceil().max(1.0) as usize;
        let params = (0..=steps).map(|k| tr.length * k as f64 / steps as f64).chain(std::iter::once(tr.tau));
        for s in params {
            let (p, tan) = tr.point_at(s);
            let (rho, _) = tr.rho(dom, s, p, tan);
            let (d, _) = tr.boundary_distance(dom, p);
            rep.points += 1;
            if d > 0.0 {
                rep.max_rho_ratio = rep.max_rho_ratio.max(rho / d);
            }
            if rho > 0.2 * d * (1.0 + 1e-12) {
                rep.rho_violations += 1;
            }
        }
    }
    rep
}

/// Seeded sample of distinct-free true cells (with replacement).
pub fn sample_cells(dom: &GridDomain, count: usize, seed: u64) -> Vec<usize> {
    let cells: Vec<usize> = dom.true_cells().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| cells[rng.gen_range(0..cells.len())]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rasterize, DomainSpec};
    use crate::whitney::decompose;

    #[test]
    fn chord_of_diameter() {
        assert!((chord([-2.0, 0.0], [2.0, 0.0], [0.0, 0.0], 1.0) - 2.0).abs() < 1e-12);
        assert_eq!(chord([-2.0, 2.0], [2.0, 2.0], [0.0, 0.0], 1.0), 0.0);
        assert!((chord([0.0, 0.0], [2.0, 0.0], [0.0, 0.0], 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_segment_through_cube() {
        let cube = WhitneyCube { k: 0, cell_lo: [0, 0], side_cells: 2, center: [0.0, 0.0], side: 2.0 };
        let (t0, t1) = clip(&cube, [-2.0, 0.0], [2.0, 0.0]).unwrap();
        assert!((t0 - 0.25).abs() < 1e-15 && (t1 - 0.75).abs() < 1e-15);
        assert!(clip(&cube, [-2.0, 3.0], [2.0, 3.0]).is_none());
    }

    #[test]
    fn paths_end_at_x0_and_stay_inside() {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), 32).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        for y in dom.true_cells() {
            let tr = fam.trace(&dom, &dec, y);
            assert_eq!(*tr.points.last().unwrap(), dom.x0_point());
            for w in tr.points.windows(2) {
                assert!(segment_in_mask(&dom.grid, &dom.mask, w[0], w[1]));
            }
        }
    }

    #[test]
    fn straightening_never_lengthens() {
        let dom = rasterize(&DomainSpec::hoelder_cusp(0.5).unwrap(), 32).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        for j in 0..dec.len() {
            assert!(fam.length[j] <= fam.raw_length[j] + 1e-12);
        }
    }
}
