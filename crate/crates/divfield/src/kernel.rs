//! The vector kernel `G(x, y)` and the divergence solve `u = ∫ G f`.
//!
//! Each trace is walked by composite midpoint steps of at most `h/2` in arc
//! length. A step at `γ` with cut-off radius `ρ` stamps the vector
//! `[γ' + ρ' z] χ(z) / ρ²` (with `z = (x - γ)/ρ`) onto every cell `x` of the
//! disk `|x - γ| < ρ`. Steps up to `τ(y)` form the near part `G₁`, the rest
//! the far part `G₂`.
//!
//! The solve never walks a full trace per source cell: the part of a trace
//! from the first shared crossing with `s >= τ` onward depends on the crossing
//! only, so source weights are pushed down the crossing forest and each
//! crossing is stamped once.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::battery::TestFunction;
use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::field::{lp_norm, ScalarField, VectorField};
use crate::grid::{dist, lerp, point_segment_distance, Point};
use crate::paths::{PathFamily, PathTrace, TERMINAL};
use crate::weight::{on_lattice, WeightField};
use crate::whitney::WhitneyDecomposition;

/// Exponential integral `E1(1)`.
const E1_ONE: f64 = 0.219_383_934_395_520_27;

/// Number of source chunks in ordered reductions; fixed so results do not
/// depend on the thread count.
const CHUNKS: usize = 64;

/// Mean tolerance of the right-hand side, relative to its `L^1` norm.
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Radial bump `c exp(-1/(1 - |z|²))` on the unit disk with unit integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub norm: f64,
}

impl Default for Bump {
    fn default() -> Self {
        // ∫ exp(-1/(1-|z|²)) dz = π (e^{-1} - E1(1)) in the plane.
        Self { norm: 1.0 / (PI * ((-1.0f64).exp() - E1_ONE)) }
    }
}

impl Bump {
    pub fn value(&self, z: Point) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1];
        if r2 >= 1.0 {
            0.0
        } else {
            self.norm * (-1.0 / (1.0 - r2)).exp()
        }
    }
}

/// Similarity taking `x0` to the origin and `d(x0)` to 15.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFrame {
    pub scale: f64,
    pub origin: Point,
}

impl NormalizedFrame {
    pub fn new(dom: &GridDomain) -> Result<Self> {
        let d0 = dom.d[dom.x0];
        if d0 <= 0.0 {
            return Err(Error::AnchorNotInterior(dom.x0_point()));
        }
        Ok(Self { scale: 15.0 / d0, origin: dom.x0_point() })
    }

    pub fn forward(&self, p: Point) -> Point {
        [self.scale * (p[0] - self.origin[0]), self.scale * (p[1] - self.origin[1])]
    }

    pub fn inverse(&self, q: Point) -> Point {
        [q[0] / self.scale + self.origin[0], q[1] / self.scale + self.origin[1]]
    }

    /// The domain with every length mapped through the frame. Cell
    /// indices, masks and features are unchanged.
    pub fn apply(&self, dom: &GridDomain) -> GridDomain {
        let mut out = dom.clone();
        out.grid.h *= self.scale;
        out.grid.origin = self.forward(dom.grid.origin);
        for v in out.d.iter_mut() {
            *v *= self.scale;
        }
        for v in out.dgeo.iter_mut() {
            *v *= self.scale;
        }
        out
    }

    /// A solution computed in the frame, expressed on the original grid:
    /// `u(x) = u_frame(X) / scale`.
    pub fn pull_back(&self, u: &VectorField, original: &GridDomain) -> VectorField {
        let values = u.values.iter().map(|v| [v[0] / self.scale, v[1] / self.scale]).collect();
        VectorField { grid: original.grid, values }
    }
}

/// One quadrature step along a trace.
#[derive(Debug, Clone, Copy)]
struct Step {
    p: Point,
    vel: Point,
    rho: f64,
    drho: f64,
    w: f64,
    far: bool,
}

impl Step {
    fn at(&self, bump: &Bump, x: Point) -> Option<[f64; 2]> {
        if self.rho <= 0.0 {
            return None;
        }
        let z = [(x[0] - self.p[0]) / self.rho, (x[1] - self.p[1]) / self.rho];
        let chi = bump.value(z);
        if chi == 0.0 {
            return None;
        }
        let c = chi / (self.rho * self.rho) * self.w;
        Some([(self.vel[0] + self.drho * z[0]) * c, (self.vel[1] + self.drho * z[1]) * c])
    }
}

/// Where a trace hands over to the shared forest.
#[derive(Debug, Clone, Copy)]
struct Split {
    /// The source-specific part ends at this vertex.
    vertex: usize,
    /// First shared crossing, `TERMINAL` when the whole trace is specific.
    forest: u32,
}

/// Kernel value split into the part up to `τ(y)` and the rest.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelValue {
    pub near: [f64; 2],
    pub far: [f64; 2],
}

impl KernelValue {
    pub fn total(&self) -> [f64; 2] {
        [self.near[0] + self.far[0], self.near[1] + self.far[1]]
    }
}

/// Kernel assembled from a domain, its decomposition and its path family.
pub struct Kernel<'a> {
    pub dom: &'a GridDomain,
    pub dec: &'a WhitneyDecomposition,
    pub fam: &'a PathFamily,
    pub bump: Bump,
    /// Give the `x = y` cell the near-part mass the cell-center quadrature
    /// misses, so that `Σ_x G₁(x, y) h² = γ(τ) - y` exactly. Off by
    /// default: the plain rule skips that cell.
    pub balance_diagonal: bool,
    preorder: Vec<u32>,
}

fn add(a: &mut [f64; 2], b: [f64; 2]) {
    a[0] += b[0];
    a[1] += b[1];
}

/// Splits `[lo, hi]` into midpoint steps of length at most `max_step`
/// (up to a relative `1e-9`, so integer ratios are frame independent).
fn midpoints(lo: f64, hi: f64, max_step: f64, mut f: impl FnMut(f64, f64)) {
    let m = ((hi - lo) / max_step - 1e-9).ceil().max(1.0) as usize;
    let ds = (hi - lo) / m as f64;
    for q in 0..m {
        f(lo + (q as f64 + 0.5) * ds, ds);
    }
}

/// Maps fixed-size chunks of `items` in parallel and merges the results in
/// chunk order.
fn ordered_reduce<I: Sync, T: Send>(
    items: &[I],
    map: impl Fn(&[I]) -> T + Sync + Send,
    mut merge: impl FnMut(T),
) {
    if items.is_empty() {
        return;
    }
    let size = items.len().div_ceil(CHUNKS);
    let chunks: Vec<&[I]> = items.chunks(size).collect();
    let group = rayon::current_num_threads().max(1);
    for batch in chunks.chunks(group) {
        let out: Vec<T> = batch.par_iter().map(|c| map(c)).collect();
        out.into_iter().for_each(&mut merge);
    }
}

impl<'a> Kernel<'a> {
    pub fn new(dom: &'a GridDomain, dec: &'a WhitneyDecomposition, fam: &'a PathFamily) -> Self {
        let preorder = fam.tour().order;
        Self { dom, dec, fam, bump: Bump::default(), balance_diagonal: false, preorder }
    }

    pub fn trace(&self, y: usize) -> PathTrace {
        self.fam.trace(self.dom, self.dec, y)
    }

    fn step_len(&self) -> f64 {
        0.5 * self.dom.h()
    }

    /// The source-specific prefix of the trace of `y` and where it hands
    /// over to the forest.
    fn head(&self, y: usize) -> (PathTrace, Split) {
        let (tr, forest) = self.fam.trace_head(self.dom, self.dec, y);
        let vertex = tr.points.len() - 1;
        (tr, Split { vertex, forest })
    }

    /// Steps of the source-specific part, followed by the terminal dilation
    /// when the trace reaches `x0` with a radius other than `d(x0)/15`.
    fn own_steps(&self, tr: &PathTrace, split: Split, mut f: impl FnMut(&Step)) {
        if tr.is_degenerate() {
            return;
        }
        let step = self.step_len();
        for i in 0..split.vertex {
            let (a, b) = (tr.points[i], tr.points[i + 1]);
            let (s0, s1) = (tr.cum[i], tr.cum[i + 1]);
            let len = s1 - s0;
            if len <= 0.0 {
                continue;
            }
            let tan = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let mut walk = |lo: f64, hi: f64| {
                midpoints(lo, hi, step, |s, ds| {
                    let p = lerp(a, b, (s - s0) / len);
                    let (rho, drho) = tr.rho(self.dom, s, p, tan);
                    f(&Step { p, vel: tan, rho, drho, w: ds, far: s > tr.tau });
                });
            };
            if tr.tau > s0 && tr.tau < s1 {
                walk(s0, tr.tau);
                walk(tr.tau, s1);
            } else {
                walk(s0, s1);
            }
        }
        if split.forest == TERMINAL {
            let x0 = self.fam.x0;
            let (start, _) = tr.rho(self.dom, tr.length, x0, [0.0, 0.0]);
            let target = self.dom.d[self.dom.x0] / 15.0;
            let span = target - start;
            if span != 0.0 {
                midpoints(0.0, span.abs(), step, |r, dr| {
                    let rho = start + span.signum() * r;
                    f(&Step { p: x0, vel: [0.0, 0.0], rho, drho: 1.0, w: span.signum() * dr, far: true });
                });
            }
        }
    }

    /// Near-part mass of the trace of `y` over all cells but `y`.
    fn near_mass(&self, tr: &PathTrace, split: Split) -> [f64; 2] {
        let vol = self.dom.cell_volume();
        let mut m = [0.0; 2];
        self.own_steps(tr, split, |st| {
            if !st.far {
                self.stamp(st, tr.cell, |_, v| add(&mut m, [v[0] * vol, v[1] * vol]));
            }
        });
        m
    }

    /// `G(y, y)` under the balanced rule, given the near-part mass.
    fn diagonal(&self, tr: &PathTrace, near_mass: [f64; 2]) -> [f64; 2] {
        let (end, _) = tr.point_at(tr.tau);
        let vol = self.dom.cell_volume();
        [(end[0] - tr.y[0] - near_mass[0]) / vol, (end[1] - tr.y[1] - near_mass[1]) / vol]
    }

    /// Steps of crossing `k`, with the uncapped radius `d/15`.
    fn piece_steps(&self, k: usize, mut f: impl FnMut(&Step)) {
        let step = self.step_len();
        let pts = self.fam.piece(k);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = dist(a, b);
            if len <= 0.0 {
                continue;
            }
            let tan = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            midpoints(0.0, len, step, |s, ds| {
                let p = lerp(a, b, s / len);
                let (d, g) = self.dom.d_with_grad_at(p);
                let drho = (g[0] * tan[0] + g[1] * tan[1]) / 15.0;
                f(&Step { p, vel: tan, rho: d / 15.0, drho, w: ds, far: true });
            });
        }
    }

    /// Calls `add` for every true cell other than `skip` under the step's
    /// bump.
    fn stamp(&self, st: &Step, skip: usize, mut add: impl FnMut(usize, [f64; 2])) {
        let r = st.rho;
        if r <= 0.0 {
            return;
        }
        let g = self.dom.grid;
        let (i0, j0) = g.cell_of([st.p[0] - r, st.p[1] - r]);
        let (i1, j1) = g.cell_of([st.p[0] + r, st.p[1] + r]);
        let (i0, j0) = (i0.max(0), j0.max(0));
        let (i1, j1) = (i1.min(g.nx as i64 - 1), j1.min(g.ny as i64 - 1));
        for j in j0..=j1 {
            for i in i0..=i1 {
                let idx = g.index(i as usize, j as usize);
                if idx == skip || !self.dom.mask[idx] {
                    continue;
                }
                if let Some(v) = st.at(&self.bump, g.center(idx)) {
                    add(idx, v);
                }
            }
        }
    }

    /// `G(x, y)` by direct quadrature over the whole trace of `y`. The
    /// source-specific steps skip `x = y`; shared crossings do not, which
    /// matches [`Kernel::solve`].
    pub fn evaluate(&self, x: usize, y: usize) -> KernelValue {
        let mut out = KernelValue::default();
        if y == self.dom.x0 || !self.dom.mask[x] || !self.dom.mask[y] {
            return out;
        }
        let xp = self.dom.grid.center(x);
        let (tr, split) = self.head(y);
        if x == y && self.balance_diagonal {
            out.near = self.diagonal(&tr, self.near_mass(&tr, split));
        }
        let mut acc = |st: &Step| {
            if let Some(v) = st.at(&self.bump, xp) {
                add(if st.far { &mut out.far } else { &mut out.near }, v);
            }
        };
        if x != y {
            self.own_steps(&tr, split, &mut acc);
        }
        let mut k = split.forest;
        while k != TERMINAL {
            self.piece_steps(k as usize, &mut acc);
            k = self.fam.nodes[k as usize].next;
        }
        out
    }

    /// `Σ_x G(x, y) h²`, split into near and far parts; the continuous
    /// kernel integrates to `x0 - y`.
    pub fn mass(&self, y: usize) -> KernelValue {
        let mut out = KernelValue::default();
        if y == self.dom.x0 || !self.dom.mask[y] {
            return out;
        }
        let vol = self.dom.cell_volume();
        let (tr, split) = self.head(y);
        if self.balance_diagonal {
            let g = self.diagonal(&tr, self.near_mass(&tr, split));
            out.near = [g[0] * vol, g[1] * vol];
        }
        let mut acc = |st: &Step, skip: usize| {
            let slot = if st.far { &mut out.far } else { &mut out.near };
            self.stamp(st, skip, |_, v| add(slot, [v[0] * vol, v[1] * vol]));
        };
        self.own_steps(&tr, split, |st| acc(st, y));
        let mut k = split.forest;
        while k != TERMINAL {
            self.piece_steps(k as usize, |st| acc(st, usize::MAX));
            k = self.fam.nodes[k as usize].next;
        }
        out
    }

    /// `u(x) = Σ_y G(x, y) f(y) h²`. Rejects `f` whose mean is not zero
    /// within [`MEAN_TOLERANCE`].
    pub fn solve(&self, f: &ScalarField) -> Result<VectorField> {
        let dom = self.dom;
        if f.grid != dom.grid || f.values.len() != dom.len() {
            return Err(Error::GridMismatch);
        }
        let vol = dom.cell_volume();
        let l1 = f.norm(dom, 1.0);
        let mean = f.integral(dom);
        let tol = MEAN_TOLERANCE * l1;
        if mean.abs() > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
        let n = dom.len();
        let sources: Vec<usize> = dom.true_cells().filter(|&c| c != dom.x0 && f.values[c] != 0.0).collect();
        let mut u = vec![[0.0; 2]; n];
        let mut weight = vec![0.0; self.fam.nodes.len()];
        ordered_reduce(
            &sources,
            |chunk| {
                let mut acc = vec![[0.0; 2]; n];
                let mut seeds = Vec::new();
                for &y in chunk {
                    let fy = f.values[y] * vol;
                    let (tr, split) = self.head(y);
                    let mut near = [0.0; 2];
                    self.own_steps(&tr, split, |st| {
                        self.stamp(st, y, |x, v| {
                            add(&mut acc[x], [v[0] * fy, v[1] * fy]);
                            if !st.far {
                                add(&mut near, [v[0] * vol, v[1] * vol]);
                            }
                        });
                    });
                    if self.balance_diagonal {
                        let g = self.diagonal(&tr, near);
                        add(&mut acc[y], [g[0] * fy, g[1] * fy]);
                    }
                    if split.forest != TERMINAL {
                        seeds.push((split.forest, fy));
                    }
                }
                (acc, seeds)
            },
            |(acc, seeds)| {
                for (a, b) in u.iter_mut().zip(acc) {
                    add(a, b);
                }
                for (k, v) in seeds {
                    weight[k as usize] += v;
                }
            },
        );
        for &k in self.preorder.iter().rev() {
            let next = self.fam.nodes[k as usize].next;
            if next != TERMINAL {
                weight[next as usize] += weight[k as usize];
            }
        }
        let active: Vec<u32> = (0..weight.len() as u32).filter(|&k| weight[k as usize] != 0.0).collect();
        ordered_reduce(
            &active,
            |chunk| {
                let mut acc = vec![[0.0; 2]; n];
                for &k in chunk {
                    let wk = weight[k as usize];
                    self.piece_steps(k as usize, |st| {
                        self.stamp(st, usize::MAX, |x, v| add(&mut acc[x], [v[0] * wk, v[1] * wk]));
                    });
                }
                acc
            },
            |acc| {
                for (a, b) in u.iter_mut().zip(acc) {
                    add(a, b);
                }
            },
        );
        Ok(VectorField { grid: dom.grid, values: u })
    }

    /// Samples `∫ |G(x, y)| dy` at the cells `samples`, with sources on the
    /// lattice of stride `y_stride`.
    pub fn abs_integral(&self, samples: &[usize], y_stride: usize) -> Result<KernelBound> {
        if y_stride == 0 {
            return Err(Error::Discretization("y_stride must be positive".into()));
        }
        let dom = self.dom;
        let h = dom.h();
        let pts: Vec<Point> = samples.iter().map(|&c| dom.grid.center(c)).collect();
        let reach: Vec<f64> = samples.iter().map(|&c| 0.25 * dom.d[c] + 2.0 * h).collect();
        let near_segment = |a: Point, b: Point| -> Vec<u32> {
            (0..samples.len() as u32)
                .filter(|&s| point_segment_distance(pts[s as usize], a, b) < reach[s as usize])
                .collect()
        };
        // Per crossing: its contribution to each sample it reaches, and
        // whether a contributing step lies at least d(x)/14 from the sample.
        let flags: Vec<Vec<(u32, [f64; 2], bool)>> = (0..self.fam.nodes.len())
            .into_par_iter()
            .map(|k| {
                let [a, b, c] = self.fam.piece(k);
                let mut list = near_segment(a, b);
                list.extend(near_segment(b, c));
                list.sort_unstable();
                list.dedup();
                let mut out: Vec<(u32, [f64; 2], bool)> = list.iter().map(|&s| (s, [0.0; 2], false)).collect();
                self.piece_steps(k, |st| {
                    for e in out.iter_mut() {
                        let x = pts[e.0 as usize];
                        if let Some(v) = st.at(&self.bump, x) {
                            add(&mut e.1, v);
                            e.2 |= dist(x, st.p) >= dom.d[samples[e.0 as usize]] / 14.0;
                        }
                    }
                });
                out.retain(|e| e.1 != [0.0; 2] || e.2);
                out
            })
            .collect();
        let mut next_flag = vec![TERMINAL; flags.len()];
        for &k in &self.preorder {
            let ku = k as usize;
            let next = self.fam.nodes[ku].next;
            next_flag[ku] = if !flags[ku].is_empty() {
                k
            } else if next == TERMINAL {
                TERMINAL
            } else {
                next_flag[next as usize]
            };
        }
        let x0_samples: Vec<u32> = (0..samples.len() as u32)
            .filter(|&s| dist(pts[s as usize], self.fam.x0) < reach[s as usize] + dom.d[dom.x0] / 5.0)
            .collect();
        let sources: Vec<usize> =
            dom.true_cells().filter(|&c| c != dom.x0 && on_lattice(dom, c, y_stride)).collect();
        let area = (y_stride as f64 * h).powi(2);
        let mut out = KernelBound {
            cells: samples.to_vec(),
            abs_integral: vec![0.0; samples.len()],
            near_bound: 0.0,
            support_violations: 0,
            pairs: 0,
        };
        ordered_reduce(
            &sources,
            |chunk| {
                let mut acc = vec![0.0; samples.len()];
                let mut val = vec![KernelValue::default(); samples.len()];
                let mut seen = vec![false; samples.len()];
                let mut touched: Vec<u32> = Vec::new();
                let mut checked = vec![false; samples.len()];
                let mut near_bound: f64 = 0.0;
                let mut violations = 0usize;
                let mut pairs = 0u64;
                for &y in chunk {
                    let (tr, split) = self.head(y);
                    let mut visit = |st: &Step, list: &[u32], skip: usize| {
                        for &s in list {
                            let su = s as usize;
                            if samples[su] == skip {
                                continue;
                            }
                            let Some(v) = st.at(&self.bump, pts[su]) else { continue };
                            if !seen[su] {
                                seen[su] = true;
                                touched.push(s);
                            }
                            if st.far {
                                add(&mut val[su].far, v);
                                let limit = dom.d[samples[su]] / 14.0;
                                if !checked[su] && dist(pts[su], st.p) >= limit {
                                    checked[su] = true;
                                    if self.trace(y).distance_to(pts[su]) >= limit {
                                        violations += 1;
                                    }
                                }
                            } else {
                                add(&mut val[su].near, v);
                            }
                        }
                    };
                    if !tr.is_degenerate() {
                        let mut seg = usize::MAX;
                        let mut list: Vec<u32> = Vec::new();
                        let mut dilation = false;
                        let mut i_cur = 0usize;
                        // Own steps arrive in vertex order; recompute the
                        // candidate list whenever the segment changes.
                        self.own_steps(&tr, split, |st| {
                            if st.vel == [0.0, 0.0] && st.p == self.fam.x0 && st.drho == 1.0 {
                                if !dilation {
                                    dilation = true;
                                    list = x0_samples.clone();
                                }
                            } else {
                                while i_cur + 1 < tr.points.len()
                                    && (tr.cum[i_cur + 1] <= tr.cum[i_cur] || !on_segment(&tr, i_cur, st.p))
                                {
                                    i_cur += 1;
                                }
                                if seg != i_cur {
                                    seg = i_cur;
                                    list = near_segment(tr.points[i_cur], tr.points[i_cur + 1]);
                                }
                            }
                            visit(st, &list, y);
                        });
                    }
                    let mut k = if split.forest == TERMINAL { TERMINAL } else { next_flag[split.forest as usize] };
                    while k != TERMINAL {
                        for &(s, v, suspicious) in &flags[k as usize] {
                            let su = s as usize;
                            if !seen[su] {
                                seen[su] = true;
                                touched.push(s);
                            }
                            add(&mut val[su].far, v);
                            if suspicious && !checked[su] {
                                checked[su] = true;
                                if self.trace(y).distance_to(pts[su]) >= dom.d[samples[su]] / 14.0 {
                                    violations += 1;
                                }
                            }
                        }
                        let next = self.fam.nodes[k as usize].next;
                        k = if next == TERMINAL { TERMINAL } else { next_flag[next as usize] };
                    }
                    let yp = dom.grid.center(y);
                    for &s in &touched {
                        let su = s as usize;
                        let g = val[su].total();
                        acc[su] += g[0].hypot(g[1]) * area;
                        let r = dist(pts[su], yp);
                        near_bound = near_bound.max(val[su].near[0].hypot(val[su].near[1]) * r);
                        val[su] = KernelValue::default();
                        seen[su] = false;
                        checked[su] = false;
                        pairs += 1;
                    }
                    touched.clear();
                }
                (acc, near_bound, violations, pairs)
            },
            |(acc, nb, viol, pairs)| {
                for (a, b) in out.abs_integral.iter_mut().zip(acc) {
                    *a += b;
                }
                out.near_bound = out.near_bound.max(nb);
                out.support_violations += viol;
                out.pairs += pairs;
            },
        );
        Ok(out)
    }
}

/// Whether `p` lies on segment `i` of the trace, up to rounding.
fn on_segment(tr: &PathTrace, i: usize, p: Point) -> bool {
    let (a, b) = (tr.points[i], tr.points[i + 1]);
    point_segment_distance(p, a, b) <= 1e-9 * (1.0 + dist(a, b))
}

/// Sampled `∫ |G(x, ·)|` with the checks made along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBound {
    pub cells: Vec<usize>,
    pub abs_integral: Vec<f64>,
    /// Largest `|G₁(x, y)| |x - y|` seen.
    pub near_bound: f64,
    /// Pairs where `G₂(x, y) ≠ 0` although the trace of `y` stays at least
    /// `d(x)/14` away from `x`.
    pub support_violations: usize,
    /// Pairs with a nonzero kernel value.
    pub pairs: u64,
}

impl KernelBound {
    /// `∫ |G(x, ·)| d(x) / ω(x)` per sampled cell with a known weight.
    pub fn ratios(&self, dom: &GridDomain, w: &WeightField) -> Vec<(usize, f64)> {
        self.cells
            .iter()
            .zip(&self.abs_integral)
            .filter_map(|(&c, &v)| w.get(c).filter(|&o| o > 0.0).map(|o| (c, v * dom.d[c] / o)))
            .collect()
    }

    pub fn max_ratio(&self, dom: &GridDomain, w: &WeightField) -> f64 {
        self.ratios(dom, w).into_iter().map(|(_, r)| r).fold(0.0, f64::max)
    }
}

/// Seeded cells for the kernel bound: uniform points in the bounding box,
/// kept when they land on a true cell with `d > 2h`.
pub fn interior_samples(dom: &GridDomain, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = dom.grid.bbox();
    let mut cells = Vec::with_capacity(count);
    if !dom.true_cells().any(|c| dom.d[c] > 2.0 * dom.h()) {
        return cells;
    }
    while cells.len() < count {
        let p = [rng.gen_range(b.min[0]..b.max[0]), rng.gen_range(b.min[1]..b.max[1])];
        if let Some(c) = dom.cell_index(p) {
            if dom.d[c] > 2.0 * dom.h() {
                cells.push(c);
            }
        }
    }
    cells
}

/// Weak residual of one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    /// Gradient taken by finite differences.
    pub approximate: bool,
}

/// `|Σ u·∇φ h² + Σ f φ h²| / (‖φ‖_∞ + ‖∇φ‖_∞)` for each test function.
pub fn weak_residual(
    dom: &GridDomain,
    u: &VectorField,
    f: &ScalarField,
    battery: &[TestFunction],
) -> Result<Vec<Residual>> {
    if battery.is_empty() {
        return Err(Error::Discretization("empty test battery".into()));
    }
    if u.grid != dom.grid || f.grid != dom.grid {
        return Err(Error::GridMismatch);
    }
    let vol = dom.cell_volume();
    battery
        .iter()
        .map(|tf| {
            let s = tf.sample(dom);
            if !s.is_finite() {
                return Err(Error::Discretization(format!("test function {} is not finite", s.name)));
            }
            let sum: f64 = dom
                .true_cells()
                .map(|c| u.values[c][0] * s.grads[c][0] + u.values[c][1] * s.grads[c][1] + f.values[c] * s.values[c])
                .sum();
            let den = s.max_abs(dom) + s.max_grad(dom);
            let value = if den > 0.0 { (sum * vol).abs() / den } else { 0.0 };
            Ok(Residual { name: s.name, value, approximate: s.approximate })
        })
        .collect()
}

/// Residuals and measured weighted constants of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    /// `max |u| d / (ω ‖f‖_∞)` over cells with a weight.
    pub c_inf: f64,
    pub p: f64,
    /// `‖(d/ω) u‖_p / ‖f‖_p`; equals `c_inf` for `p = ∞`.
    pub c_p: f64,
}

/// `u` together with its report.
pub fn solve_divergence(
    kernel: &Kernel<'_>,
    f: &ScalarField,
    w: &WeightField,
    p: f64,
    battery: &[TestFunction],
) -> Result<(VectorField, SolveReport)> {
    if !(p > 1.0) {
        return Err(Error::BadExponent(p));
    }
    let u = kernel.solve(f)?;
    let report = solve_report(kernel.dom, f, &u, w, p, battery)?;
    Ok((u, report))
}

pub fn solve_report(
    dom: &GridDomain,
    f: &ScalarField,
    u: &VectorField,
    w: &WeightField,
    p: f64,
    battery: &[TestFunction],
) -> Result<SolveReport> {
    let residuals = weak_residual(dom, u, f, battery)?;
    let max_residual = residuals.iter().map(|r| r.value).fold(0.0, f64::max);
    let scaled: Vec<f64> = w
        .iter()
        .filter(|&(_, o)| o > 0.0)
        .map(|(c, o)| u.values[c][0].hypot(u.values[c][1]) * dom.d[c] / o)
        .collect();
    let fmax = f.max_abs(dom);
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let c_inf = ratio(scaled.iter().copied().fold(0.0, f64::max), fmax);
    let c_p = if p.is_infinite() {
        c_inf
    } else {
        ratio(lp_norm(scaled.iter().copied(), w.x_area, p), f.norm(dom, p))
    };
    Ok(SolveReport { residuals, max_residual, c_inf, p, c_p })
}
