//! Path-density weight `omega(x)`: the area of the set of points whose trace
//! passes within `d(x)/2 + h` of `x`, with diagnostics.
//!
//! The counts are exact for the continuous polyline traces. Traces share
//! their tails through the crossing forest of the path family, so a hit on a
//! crossing piece accounts for every cube whose path runs through it. The
//! remaining own segments `[y, exit]` are counted row by row inside the cubes
//! near `x`, using that the set of `y` whose segment towards a fixed exit
//! meets a disk is convex.

use rayon::prelude::*;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::grid::{dist, point_segment_distance, Point};
use crate::paths::{ForestTour, PathFamily};
use crate::whitney::{WhitneyCube, WhitneyDecomposition};

/// Sampling strides for the weight computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightOptions {
    /// Only cells with both indices divisible by `y_stride` act as sources.
    pub y_stride: usize,
    /// Only cells with both indices divisible by `x_stride` are evaluated.
    pub x_stride: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { y_stride: 1, x_stride: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct WeightField {
    pub options: WeightOptions,
    /// Evaluated cells in increasing index order.
    pub cells: Vec<usize>,
    /// Source count for each evaluated cell.
    pub counts: Vec<u64>,
    /// `count * (y_stride h)^2` for each evaluated cell.
    pub omega: Vec<f64>,
    /// Number of source cells.
    pub sources: u64,
    /// Area represented by one evaluated cell.
    pub x_area: f64,
}

impl WeightField {
    /// `(cell, omega)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cells.iter().copied().zip(self.omega.iter().copied())
    }

    /// Weight at an evaluated cell.
    pub fn get(&self, cell: usize) -> Option<f64> {
        self.cells.binary_search(&cell).ok().map(|k| self.omega[k])
    }

    /// Weight on every grid cell, NaN where not evaluated.
    pub fn dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![f64::NAN; len];
        for (c, w) in self.iter() {
            out[c] = w;
        }
        out
    }
}

#[inline]
pub(crate) fn on_lattice(dom: &GridDomain, cell: usize, stride: usize) -> bool {
    let (i, j) = dom.grid.coords(cell);
    i % stride == 0 && j % stride == 0
}

/// Rough operation count of `compute_weight`, for cost warnings.
pub fn estimate_work(dom: &GridDomain, fam: &PathFamily, opts: WeightOptions) -> f64 {
    let xs = (dom.true_count() / (opts.x_stride * opts.x_stride)).max(1) as f64;
    let cubes = fam.first.len() as f64;
    let rows = (dom.max_d() / (dom.h() * opts.y_stride as f64)).max(1.0);
    xs * (fam.nodes.len() as f64 / cubes.max(1.0) * 64.0 + rows)
}

/// Largest distance from `p` to a point of the closed cube.
fn farthest(cube: &WhitneyCube, p: Point) -> f64 {
    let r = 0.5 * cube.side;
    let fx = (p[0] - cube.center[0]).abs() + r;
    let fy = (p[1] - cube.center[1]).abs() + r;
    fx.hypot(fy)
}

fn polyline_distance(p: Point, pts: &[Point]) -> f64 {
    if pts.len() == 1 {
        return dist(p, pts[0]);
    }
    pts.windows(2).map(|w| point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

/// Crossing piece `[exit, entry, next exit]` with a bounding circle.
struct Piece {
    pts: [Point; 3],
    center: Point,
    radius: f64,
    tin: u32,
    tout: u32,
}

/// Precomputed structure shared by all evaluations.
struct Index<'a> {
    dom: &'a GridDomain,
    dec: &'a WhitneyDecomposition,
    fam: &'a PathFamily,
    ys: usize,
    /// Euler-tour entry position of each crossing node.
    tin: Vec<u32>,
    /// Prefix sums of source counts over tour positions.
    prefix: Vec<u64>,
    /// Crossing pieces grouped by the cube they lead into.
    bucket_start: Vec<u32>,
    pieces: Vec<Piece>,
    /// Boundary-layer sources grouped by cube, with their own polylines.
    layer_start: Vec<u32>,
    layer_poly: Vec<(u32, u32)>,
    layer_points: Vec<Point>,
    /// How far pieces attached to a cube reach outside it.
    reach: Vec<f64>,
    /// Margin for the tree query; cubes reaching further are listed in `wide`.
    margin: f64,
    wide: Vec<usize>,
    sources: u64,
}

impl<'a> Index<'a> {
    fn new(dom: &'a GridDomain, dec: &'a WhitneyDecomposition, fam: &'a PathFamily, ys: usize) -> Self {
        let m = fam.nodes.len();
        let ncubes = dec.len();
        let ForestTour { order, tin, tout } = fam.tour();

        // Sources per cube, and boundary-layer sources.
        let mut per_cube = vec![0u64; ncubes];
        let mut layer_of: Vec<Vec<usize>> = vec![Vec::new(); ncubes];
        for y in dom.true_cells().filter(|&c| on_lattice(dom, c, ys)) {
            let j = dec.locator[y] as usize;
            per_cube[j] += 1;
            if !dec.covered[y] {
                layer_of[j].push(y);
            }
        }
        let mut weight_at = vec![0u64; m];
        for j in 1..ncubes {
            weight_at[fam.first[j] as usize] += per_cube[j];
        }
        let mut prefix = vec![0u64; m + 1];
        for (pos, &k) in order.iter().enumerate() {
            prefix[pos + 1] = prefix[pos] + weight_at[k as usize];
        }

        let mut reach = vec![0.0f64; ncubes];
        let mut counts = vec![0u32; ncubes + 1];
        let mut owner = vec![0u32; m];
        for (k, n) in fam.nodes.iter().enumerate() {
            let p = dom.parent[n.cell as usize] as usize;
            let c = dec.locator[p] as usize;
            owner[k] = c as u32;
            counts[c + 1] += 1;
            let cube = &dec.cubes[c];
            for q in fam.piece(k) {
                reach[c] = reach[c].max(cube.distance_to(q));
            }
        }
        for c in 0..ncubes {
            counts[c + 1] += counts[c];
        }
        let bucket_start = counts.clone();
        let mut bucket = vec![0u32; m];
        for (k, &c) in owner.iter().enumerate() {
            let slot = &mut counts[c as usize];
            bucket[*slot as usize] = k as u32;
            *slot += 1;
        }
        let pieces = bucket
            .iter()
            .map(|&k| {
                let pts = fam.piece(k as usize);
                let center = [(pts[0][0] + pts[2][0]) / 2.0, (pts[0][1] + pts[2][1]) / 2.0];
                let radius = pts.iter().map(|&q| dist(q, center)).fold(0.0, f64::max);
                Piece { pts, center, radius, tin: tin[k as usize], tout: tout[k as usize] }
            })
            .collect();

        let mut layer_start = vec![0u32; ncubes + 1];
        let mut layer_poly = Vec::new();
        let mut layer_points = Vec::new();
        for (j, ys_in) in layer_of.iter().enumerate() {
            let cube = &dec.cubes[j];
            for &y in ys_in {
                let tr = fam.trace(dom, dec, y);
                let start = layer_points.len() as u32;
                let stop = tr
                    .points
                    .iter()
                    .position(|&p| p == fam.exit_point[j])
                    .unwrap_or(tr.points.len() - 1);
                for &p in &tr.points[..=stop] {
                    reach[j] = reach[j].max(cube.distance_to(p));
                    layer_points.push(p);
                }
                layer_poly.push((start, layer_points.len() as u32));
            }
            layer_start[j + 1] = layer_poly.len() as u32;
        }
        let margin = 3.0 * dom.h();
        let wide = (0..ncubes).filter(|&c| reach[c] > margin).collect();
        Self {
            dom,
            dec,
            fam,
            ys,
            tin,
            prefix,
            bucket_start,
            pieces,
            layer_start,
            layer_poly,
            layer_points,
            reach,
            margin,
            wide,
            sources: per_cube.iter().sum(),
        }
    }

    fn count(&self, x: usize) -> u64 {
        let g = self.dom.grid;
        let xp = g.center(x);
        let r = 0.5 * self.dom.d[x] + self.dom.h();
        if dist(xp, self.fam.x0) <= r {
            return self.sources;
        }
        // Only pieces crossing the sphere can end a run of hits along a
        // chain, and cubes well inside the ball are reached through such
        // runs, so the annulus around the sphere suffices.
        let mut near = self.dec.cubes_in_annulus(xp, r - self.margin, r + self.margin);
        for &c in &self.wide {
            if let Err(pos) = near.binary_search(&c) {
                near.insert(pos, c);
            }
        }
        near.retain(|&c| {
                let cube = &self.dec.cubes[c];
            cube.distance_to(xp) <= r + self.reach[c] && farthest(cube, xp) + self.reach[c] >= r
        });

        let mut spans: Vec<(u32, u32)> = Vec::new();
        for &c in &near {
            for pc in &self.pieces[self.bucket_start[c] as usize..self.bucket_start[c + 1] as usize] {
                // A piece ending inside the ball leads into a hit piece,
                // which is found further along its chain.
                let dc = dist(xp, pc.center);
                if dc - pc.radius > r || dist(xp, pc.pts[2]) <= r {
                    continue;
                }
                if polyline_distance(xp, &pc.pts) <= r {
                    spans.push((pc.tin, pc.tout));
                }
            }
        }
        spans.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(spans.len());
        for (a, b) in spans {
            match merged.last_mut() {
                Some(last) if a < last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let mut total: u64 = merged.iter().map(|&(a, b)| self.prefix[b as usize] - self.prefix[a as usize]).sum();

        let hit = |pos: u32| -> bool {
            let k = merged.partition_point(|&(a, _)| a <= pos);
            k > 0 && pos < merged[k - 1].1
        };
        for &j in &near {
            if j != 0 && hit(self.tin[self.fam.first[j] as usize]) {
                continue;
            }
            let cube = &self.dec.cubes[j];
            if cube.distance_to(xp) <= r {
                total += self.count_cube(j, xp, r);
            }
            let (a, b) = (self.layer_start[j] as usize, self.layer_start[j + 1] as usize);
            for &(s, e) in &self.layer_poly[a..b] {
                if polyline_distance(xp, &self.layer_points[s as usize..e as usize]) <= r {
                    total += 1;
                }
            }
        }
        total
    }

    /// Sources inside cube `j` whose segment to the cube's exit point meets
    /// the closed disk `B(x, r)`.
    fn count_cube(&self, j: usize, x: Point, r: f64) -> u64 {
        let cube = &self.dec.cubes[j];
        let g = self.dom.grid;
        let ys = self.ys;
        let e = self.fam.exit_point[j];
        let lattice = |lo: usize, n: usize| -> (usize, usize) {
            let first = lo.div_ceil(ys) * ys;
            let end = lo + n;
            if first >= end {
                (first, 0)
            } else {
                (first, (end - first).div_ceil(ys))
            }
        };
        let (c0, ncol) = lattice(cube.cell_lo[0], cube.side_cells);
        let (r0, nrow) = lattice(cube.cell_lo[1], cube.side_cells);
        if ncol == 0 || nrow == 0 {
            return 0;
        }
        if dist(x, e) <= r {
            return (ncol * nrow) as u64;
        }
        let h = g.h;
        let col_u = |k: usize| g.origin[0] + ((c0 + k * ys) as f64 + 0.5) * h;
        let to_k = |u: f64| ((u - g.origin[0]) / h - 0.5 - c0 as f64) / ys as f64;

        let xe = [x[0] - e[0], x[1] - e[1]];
        let le = xe[0].hypot(xe[1]);
        let beta = (r / le).asin() * (1.0 - 1e-9);
        let tangent_len = (le * le - r * r).max(0.0).sqrt();
        let axis = [xe[0] / le, xe[1] / le];
        let rot = |s: f64| {
            let (sn, cs) = (s * beta).sin_cos();
            [axis[0] * cs - axis[1] * sn, axis[0] * sn + axis[1] * cs]
        };
        let rays = [rot(1.0), rot(-1.0)];

        let mut total = 0u64;
        for row in 0..nrow {
            let v = g.origin[1] + ((r0 + row * ys) as f64 + 0.5) * h;
            let pred = |k: usize| point_segment_distance(x, [col_u(k), v], e) <= r;
            let mut cands: [Option<f64>; 4] = [None; 4];
            if (v - x[1]).abs() <= r {
                cands[0] = Some(x[0]);
            }
            if xe[1] != 0.0 {
                let t = (v - e[1]) / xe[1];
                if t >= 1.0 {
                    cands[1] = Some(e[0] + t * xe[0]);
                }
            }
            for (s, w) in rays.iter().enumerate() {
                if w[1] != 0.0 {
                    let t = (v - e[1]) / w[1];
                    if t >= tangent_len {
                        cands[2 + s] = Some(e[0] + t * w[0]);
                    }
                }
            }
            let mut inside = None;
            'search: for u in cands.into_iter().flatten() {
                let kf = to_k(u).clamp(0.0, (ncol - 1) as f64);
                for k in [kf.floor() as usize, kf.ceil() as usize] {
                    if pred(k) {
                        inside = Some(k);
                        break 'search;
                    }
                }
            }
            let Some(k_in) = inside else { continue };
            // First index in [0, k_in] where pred holds (pred is monotone there).
            let (mut lo, mut hi) = (0usize, k_in);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if pred(mid) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let left = lo;
            let (mut lo, mut hi) = (k_in, ncol - 1);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if pred(mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            total += (lo - left + 1) as u64;
        }
        total
    }
}

/// Computes the weight on the sampled cells.
pub fn compute_weight(
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    fam: &PathFamily,
    opts: WeightOptions,
) -> Result<WeightField> {
    if opts.y_stride == 0 || opts.x_stride == 0 {
        return Err(Error::InvalidSpec("strides must be positive".into()));
    }
    let index = Index::new(dom, dec, fam, opts.y_stride);
    let cells: Vec<usize> = dom.true_cells().filter(|&c| on_lattice(dom, c, opts.x_stride)).collect();
    let counts: Vec<u64> = cells.par_iter().map(|&x| index.count(x)).collect();
    Ok(finish(dom, opts, cells, counts))
}

/// Computes the weight at the given cells only (`x_stride` is ignored for
/// the cell choice; `x_area` is still `(x_stride h)²`).
pub fn compute_weight_at(
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    fam: &PathFamily,
    opts: WeightOptions,
    cells: &[usize],
) -> Result<WeightField> {
    if opts.y_stride == 0 || opts.x_stride == 0 {
        return Err(Error::InvalidSpec("strides must be positive".into()));
    }
    let mut cells: Vec<usize> = cells.iter().copied().filter(|&c| c < dom.len() && dom.mask[c]).collect();
    cells.sort_unstable();
    cells.dedup();
    let index = Index::new(dom, dec, fam, opts.y_stride);
    let counts: Vec<u64> = cells.par_iter().map(|&x| index.count(x)).collect();
    Ok(finish(dom, opts, cells, counts))
}

fn finish(dom: &GridDomain, opts: WeightOptions, cells: Vec<usize>, counts: Vec<u64>) -> WeightField {
    let h = dom.h();
    let unit = (opts.y_stride as f64 * h).powi(2);
    let omega = counts.iter().map(|&c| c as f64 * unit).collect();
    let sources = dom.true_cells().filter(|&c| on_lattice(dom, c, opts.y_stride)).count() as u64;
    let x_area = (opts.x_stride as f64 * h).powi(2);
    WeightField { options: opts, cells, counts, omega, sources, x_area }
}

/// Direct evaluation: builds every source trace and tests every evaluated
/// cell against it. Quadratic cost; meant for small grids.
pub fn compute_weight_direct(
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    fam: &PathFamily,
    opts: WeightOptions,
) -> WeightField {
    let cells: Vec<usize> = dom.true_cells().filter(|&c| on_lattice(dom, c, opts.x_stride)).collect();
    let traces: Vec<Vec<Point>> = dom
        .true_cells()
        .filter(|&c| on_lattice(dom, c, opts.y_stride))
        .map(|y| fam.trace(dom, dec, y).points)
        .collect();
    let counts = cells
        .par_iter()
        .map(|&x| {
            let xp = dom.grid.center(x);
            let r = 0.5 * dom.d[x] + dom.h();
            traces.iter().filter(|t| polyline_distance(xp, t) <= r).count() as u64
        })
        .collect();
    finish(dom, opts, cells, counts)
}

/// Sources within `radius` of `x`.
pub fn sources_in_ball(dom: &GridDomain, x: usize, radius: f64, y_stride: usize) -> u64 {
    if radius < 0.0 {
        return 0;
    }
    let g = dom.grid;
    let xp = g.center(x);
    let (i_lo, j_lo) = g.cell_of([xp[0] - radius, xp[1] - radius]);
    let (i_hi, j_hi) = g.cell_of([xp[0] + radius, xp[1] + radius]);
    let mut n = 0;
    for j in j_lo.max(0)..=j_hi.min(g.ny as i64 - 1) {
        for i in i_lo.max(0)..=i_hi.min(g.nx as i64 - 1) {
            let c = g.index(i as usize, j as usize);
            if dom.mask[c] && on_lattice(dom, c, y_stride) && dist(g.center(c), xp) <= radius {
                n += 1;
            }
        }
    }
    n
}

/// Least-squares line `log omega = slope log d + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    /// `sum omega d^{-1} dx`, the integral of `w = omega / d`.
    pub integral: f64,
    /// `min omega / (pi (d/2)^2)`.
    pub c_low: f64,
    /// `max omega / d`.
    pub w_max: f64,
    pub fit_cutoff: f64,
    pub fit: PowerFit,
}

/// Default fit cutoff: a fifth of the largest boundary distance.
pub fn default_cutoff(dom: &GridDomain) -> f64 {
    0.2 * dom.max_d()
}

pub fn fit_power_law(points: impl Iterator<Item = (f64, f64)>) -> Result<PowerFit> {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (d, w) in points {
        let (lx, ly) = (d.ln(), w.ln());
        n += 1;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        syy += ly * ly;
    }
    if n < 30 {
        return Err(Error::FitRefused(n));
    }
    let nf = n as f64;
    let vxx = sxx - sx * sx / nf;
    let vxy = sxy - sx * sy / nf;
    let vyy = syy - sy * sy / nf;
    let slope = vxy / vxx;
    let intercept = (sy - slope * sx) / nf;
    let r2 = if vyy > 0.0 { vxy * vxy / (vxx * vyy) } else { 1.0 };
    Ok(PowerFit { slope, intercept, r2, cells: n })
}

pub fn diagnostics(w: &WeightField, dom: &GridDomain, fit_cutoff: f64) -> Result<WeightReport> {
    let mut integral = 0.0;
    let mut c_low = f64::INFINITY;
    let mut w_max: f64 = 0.0;
    for (c, om) in w.iter() {
        let d = dom.d[c];
        integral += om / d * w.x_area;
        c_low = c_low.min(om / (std::f64::consts::PI * 0.25 * d * d));
        w_max = w_max.max(om / d);
    }
    let fit = fit_power_law(w.iter().filter(|&(c, _)| dom.d[c] < fit_cutoff).map(|(c, om)| (dom.d[c], om)))?;
    Ok(WeightReport { integral, c_low, w_max, fit_cutoff, fit })
}

/// `max omega / d^exponent` over evaluated cells with `d < cutoff`.
pub fn sup_ratio(w: &WeightField, dom: &GridDomain, exponent: f64, cutoff: f64) -> f64 {
    w.iter()
        .filter(|&(c, _)| dom.d[c] < cutoff)
        .map(|(c, om)| om / dom.d[c].powf(exponent))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rasterize, DomainSpec};
    use crate::paths::build_family;
    use crate::whitney::decompose;

    fn setup(spec: DomainSpec, res: usize) -> (GridDomain, WhitneyDecomposition, PathFamily) {
        let dom = rasterize(&spec, res).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        (dom, dec, fam)
    }

    #[test]
    fn fast_count_matches_direct_count() {
        for (spec, res) in [(DomainSpec::disk(1.0).unwrap(), 16), (DomainSpec::hoelder_cusp(0.5).unwrap(), 16)] {
            let (dom, dec, fam) = setup(spec, res);
            for ys in [1, 2] {
                let opts = WeightOptions { y_stride: ys, x_stride: 1 };
                let fast = compute_weight(&dom, &dec, &fam, opts).unwrap();
                let slow = compute_weight_direct(&dom, &dec, &fam, opts);
                assert_eq!(fast.counts, slow.counts, "{spec} stride {ys}");
            }
        }
    }

    #[test]
    fn weight_at_anchor_is_full_area() {
        let (dom, dec, fam) = setup(DomainSpec::disk(1.0).unwrap(), 16);
        let w = compute_weight(&dom, &dec, &fam, WeightOptions::default()).unwrap();
        assert_eq!(w.get(dom.x0).unwrap(), dom.area());
    }

    #[test]
    fn fit_recovers_exact_power() {
        let fit = fit_power_law((1..50).map(|k| (k as f64, 3.0 * (k as f64).powf(1.5)))).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(fit_power_law((1..10).map(|k| (k as f64, 1.0))), Err(Error::FitRefused(9))));
    }
}
