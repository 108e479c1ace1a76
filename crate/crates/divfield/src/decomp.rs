//! Atomic decomposition over Whitney cubes, local Bogovskii solves on the
//! doubled cubes, and the assembled weighted Sobolev solve.

use rayon::prelude::*;

use crate::battery::TestFunction;
use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::field::{fd_gradient, lp_norm, ScalarField, VectorField};
use crate::grid::Point;
use crate::kernel::{weak_residual, Bump, Kernel, Residual};
use crate::weight::WeightField;
use crate::whitney::{support_cells, PartitionOfUnity, WhitneyCube, WhitneyDecomposition};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, eight points.
#[allow(clippy::excessive_precision)]
const GAUSS: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicOptions {
    /// Largest admissible mean correction relative to `‖f_j‖_1`.
    pub mean_tolerance: f64,
}

impl Default for AtomicOptions {
    fn default() -> Self {
        Self { mean_tolerance: 1e-4 }
    }
}

/// One piece `f_j`, stored on the true cells of the open doubled cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub cube: usize,
    pub cells: Vec<usize>,
    /// Mean-corrected values.
    pub values: Vec<f64>,
    /// Constant subtracted on `cells`.
    pub shift: f64,
    /// `|Σ f_j h²| / ‖f_j‖_1` before the correction.
    pub correction: f64,
}

#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    pub atoms: Vec<Atom>,
    /// Field the pieces were built from.
    pub u: VectorField,
    pub max_correction: f64,
    /// `max |Σ_j f_j - f|` on covered cells before the mean correction.
    pub telescoping: f64,
    /// Same after the correction.
    pub corrected_telescoping: f64,
}

impl AtomicDecomposition {
    /// `Σ_j Σ |f_j|^p (d²/ω)^p / Σ |f|^p` over the weighted cells.
    pub fn weighted_sum_ratio(&self, dom: &GridDomain, f: &ScalarField, w: &WeightField, p: f64) -> f64 {
        let mut num = 0.0;
        for a in &self.atoms {
            for (&c, &v) in a.cells.iter().zip(&a.values) {
                if let Some(om) = w.get(c).filter(|&o| o > 0.0) {
                    num += (v.abs() * dom.d[c] * dom.d[c] / om).powf(p);
                }
            }
        }
        let den: f64 = w.iter().map(|(c, _)| f.values[c].abs().powf(p)).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// `Σ_j ‖f_j‖_p^p / ‖f‖_p^p`.
    pub fn unweighted_sum_ratio(&self, dom: &GridDomain, f: &ScalarField, p: f64) -> f64 {
        let num: f64 = self.atoms.iter().flat_map(|a| a.values.iter()).map(|v| v.abs().powf(p)).sum();
        let den: f64 = dom.true_cells().map(|c| f.values[c].abs().powf(p)).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// Splits `f = div u` into `f_j = χ_j f + ∇χ_j·u` supported in the doubled
/// cubes, each shifted to zero mean.
pub fn atomic_decompose(
    dom: &GridDomain,
    dec: &WhitneyDecomposition,
    pou: &PartitionOfUnity,
    f: &ScalarField,
    u: &VectorField,
    opts: AtomicOptions,
) -> Result<AtomicDecomposition> {
    if f.grid != dom.grid || u.grid != dom.grid {
        return Err(Error::GridMismatch);
    }
    let vol = dom.cell_volume();
    let mut atoms: Vec<Atom> = (0..dec.cubes.len())
        .into_par_iter()
        .map(|j| {
            let cells: Vec<usize> = support_cells(dom, &dec.cubes[j]).collect();
            let mut values: Vec<f64> = cells
                .iter()
                .map(|&c| {
                    let (chi, g) = pou.chi(dom, dec, j, c);
                    chi * f.values[c] + g[0] * u.values[c][0] + g[1] * u.values[c][1]
                })
                .collect();
            let sum: f64 = values.iter().sum::<f64>() * vol;
            let l1: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * vol;
            let correction = if l1 > 0.0 { sum.abs() / l1 } else { 0.0 };
            Atom { cube: j, cells, values: std::mem::take(&mut values), shift: 0.0, correction }
        })
        .collect();

    let mut raw = vec![0.0; dom.len()];
    for a in &atoms {
        for (&c, &v) in a.cells.iter().zip(&a.values) {
            raw[c] += v;
        }
    }
    let mut corrected = raw.clone();
    let mut max_correction: f64 = 0.0;
    for a in &mut atoms {
        max_correction = max_correction.max(a.correction);
        if a.cells.is_empty() {
            continue;
        }
        let shift = a.values.iter().sum::<f64>() / a.cells.len() as f64;
        a.shift = shift;
        for (&c, v) in a.cells.iter().zip(a.values.iter_mut()) {
            *v -= shift;
            corrected[c] -= shift;
        }
    }
    let deviation = |sums: &[f64]| {
        dom.true_cells()
            .filter(|&c| dec.covered[c])
            .map(|c| (sums[c] - f.values[c]).abs())
            .fold(0.0, f64::max)
    };
    let telescoping = deviation(&raw);
    let corrected_telescoping = deviation(&corrected);
    if max_correction > opts.mean_tolerance {
        return Err(Error::Discretization(format!(
            "atomic mean correction {max_correction:e} exceeds {:e} of the piece L1 norm",
            opts.mean_tolerance
        )));
    }
    Ok(AtomicDecomposition { atoms, u: u.clone(), max_correction, telescoping, corrected_telescoping })
}

/// Star-shaped Bogovskii operator averaged over a ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallBogovskii {
    pub center: Point,
    pub radius: f64,
    pub bump: Bump,
}

impl BallBogovskii {
    /// Ball of radius `l/2` at the cube center.
    pub fn for_cube(cube: &WhitneyCube) -> Self {
        Self { center: cube.center, radius: 0.5 * cube.side, bump: Bump::default() }
    }

    fn weight(&self, z: Point) -> f64 {
        let r = self.radius;
        self.bump.value([(z[0] - self.center[0]) / r, (z[1] - self.center[1]) / r]) / (r * r)
    }

    /// `(x - y) ∫_1^∞ χ(y + s(x - y)) s ds`.
    pub fn kernel(&self, x: Point, y: Point) -> [f64; 2] {
        let e = [x[0] - y[0], x[1] - y[1]];
        let r2 = e[0] * e[0] + e[1] * e[1];
        if r2 == 0.0 {
            return [0.0; 2];
        }
        let r = r2.sqrt();
        let dir = [e[0] / r, e[1] / r];
        let w = [y[0] - self.center[0], y[1] - self.center[1]];
        let b = dir[0] * w[0] + dir[1] * w[1];
        let q2 = w[0] * w[0] + w[1] * w[1] - b * b;
        let a2 = self.radius * self.radius - q2;
        if a2 <= 0.0 {
            return [0.0; 2];
        }
        let a = a2.sqrt();
        let lo = r.max(-b - a);
        let hi = -b + a;
        if hi <= lo {
            return [0.0; 2];
        }
        let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        let tail: f64 = GAUSS
            .iter()
            .map(|&(t, wt)| {
                let s = mid + half * t;
                wt * self.weight([y[0] + s * dir[0], y[1] + s * dir[1]]) * s
            })
            .sum::<f64>()
            * half;
        let scale = tail / r2;
        [e[0] * scale, e[1] * scale]
    }

    /// `u(x) = Σ_y K(x, y) f(y) vol` at each target.
    pub fn apply(&self, sources: &[(Point, f64)], vol: f64, targets: &[Point]) -> Vec<[f64; 2]> {
        targets
            .iter()
            .map(|&x| {
                let mut acc = [0.0; 2];
                for &(y, fy) in sources {
                    if fy != 0.0 {
                        let k = self.kernel(x, y);
                        acc[0] += k[0] * fy;
                        acc[1] += k[1] * fy;
                    }
                }
                [acc[0] * vol, acc[1] * vol]
            })
            .collect()
    }
}

/// `u_j` on the cells of an atom (zero outside them).
pub fn local_bogovskii(dom: &GridDomain, cube: &WhitneyCube, atom: &Atom) -> Vec<[f64; 2]> {
    let op = BallBogovskii::for_cube(cube);
    let pts: Vec<Point> = atom.cells.iter().map(|&c| dom.grid.center(c)).collect();
    let sources: Vec<(Point, f64)> = pts.iter().copied().zip(atom.values.iter().copied()).collect();
    op.apply(&sources, dom.cell_volume(), &pts)
}

/// `[∂_x u, ∂_y u]` per component on `cells`, with `u` extended by zero to
/// the other true cells.
fn local_jacobian(dom: &GridDomain, cells: &[usize], u: &[[f64; 2]]) -> Vec<[[f64; 2]; 2]> {
    let g = dom.grid;
    let lookup: std::collections::HashMap<usize, usize> = cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let value = |c: usize| lookup.get(&c).map_or([0.0; 2], |&k| u[k]);
    cells
        .iter()
        .map(|&c| {
            let (i, j) = g.coords(c);
            let at = |di: i64, dj: i64| -> Option<[f64; 2]> {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if !g.contains(a, b) {
                    return None;
                }
                let k = g.index(a as usize, b as usize);
                dom.mask[k].then(|| value(k))
            };
            let here = value(c);
            let mut jac = [[0.0; 2]; 2];
            for (ax, (di, dj)) in [(1i64, 0i64), (0, 1)].into_iter().enumerate() {
                for comp in 0..2 {
                    jac[comp][ax] = match (at(-di, -dj), at(di, dj)) {
                        (Some(m), Some(p)) => (p[comp] - m[comp]) / (2.0 * g.h),
                        (None, Some(p)) => (p[comp] - here[comp]) / g.h,
                        (Some(m), None) => (here[comp] - m[comp]) / g.h,
                        (None, None) => 0.0,
                    };
                }
            }
            jac
        })
        .collect()
}

/// `Σ_{i,k} ‖∂_i u_k‖_p` of per-cell Jacobians with per-cell weights.
fn jacobian_norm(jacs: impl Iterator<Item = ([[f64; 2]; 2], f64)> + Clone, vol: f64, p: f64) -> f64 {
    let mut total = 0.0;
    for comp in 0..2 {
        for ax in 0..2 {
            total += lp_norm(jacs.clone().map(|(j, w)| (j[comp][ax] * w).abs()), vol, p);
        }
    }
    total
}

/// Constants of one cube solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolve {
    pub cube: usize,
    /// `‖Du_j‖_p / ‖f_j‖_p`, zero for a vanishing piece.
    pub gradient_ratio: f64,
    /// Largest weak residual against polynomials of degree at most 2 in
    /// cube coordinates, normalized by `‖f_j‖_1`.
    pub residual: f64,
}

fn local_residual(dom: &GridDomain, cube: &WhitneyCube, atom: &Atom, u: &[[f64; 2]]) -> f64 {
    let vol = dom.cell_volume();
    let l1: f64 = atom.values.iter().map(|v| v.abs()).sum::<f64>() * vol;
    if l1 == 0.0 {
        return 0.0;
    }
    let l = cube.side;
    let mut worst: f64 = 0.0;
    for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
        let mut sum = 0.0;
        for (k, &c) in atom.cells.iter().enumerate() {
            let p = dom.grid.center(c);
            let (x, y) = ((p[0] - cube.center[0]) / l, (p[1] - cube.center[1]) / l);
            let phi = x.powi(a) * y.powi(b);
            let gx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) / l } else { 0.0 };
            let gy = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) / l } else { 0.0 };
            sum += u[k][0] * gx + u[k][1] * gy + atom.values[k] * phi;
        }
        worst = worst.max((sum * vol).abs() / l1);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevOptions {
    pub p: f64,
    pub atomic: AtomicOptions,
}

/// Measured constants of the assembled solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevReport {
    pub p: f64,
    /// `‖Du d²/ω‖_p / ‖f‖_p`; `None` when `f` vanishes.
    pub c_s: Option<f64>,
    /// `2p / (2 - p)` for `p < 2`.
    pub p_star: Option<f64>,
    /// `‖u d²/ω‖_{p*} / ‖f‖_p`.
    pub c_star: Option<f64>,
    pub local: Vec<LocalSolve>,
    pub max_local_ratio: f64,
    pub max_local_residual: f64,
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    pub max_correction: f64,
    pub telescoping: f64,
    /// `Σ_j Σ |f_j|^p (d²/ω)^p / Σ |f|^p` over the weighted cells.
    pub weighted_sum_ratio: f64,
    /// `Σ_j ‖f_j‖_p^p / ‖f‖_p^p`.
    pub unweighted_sum_ratio: f64,
}

/// `u = Σ_j u_j` built from the kernel field and the atomic decomposition.
pub fn solve_sobolev(
    kernel: &Kernel<'_>,
    pou: &PartitionOfUnity,
    f: &ScalarField,
    w: &WeightField,
    opts: SobolevOptions,
    battery: &[TestFunction],
) -> Result<(VectorField, SobolevReport)> {
    let p = opts.p;
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::BadExponent(p));
    }
    let dom = kernel.dom;
    let dec = kernel.dec;
    let vol = dom.cell_volume();
    let v = kernel.solve(f)?;
    let atomic = atomic_decompose(dom, dec, pou, f, &v, opts.atomic)?;

    let solved: Vec<(Vec<[f64; 2]>, LocalSolve)> = atomic
        .atoms
        .par_iter()
        .map(|a| {
            let cube = &dec.cubes[a.cube];
            let uj = local_bogovskii(dom, cube, a);
            let jac = local_jacobian(dom, &a.cells, &uj);
            let fnorm = lp_norm(a.values.iter().map(|x| x.abs()), vol, p);
            let dnorm = jacobian_norm(jac.iter().map(|&j| (j, 1.0)), vol, p);
            let gradient_ratio = if fnorm > 0.0 { dnorm / fnorm } else { 0.0 };
            let residual = local_residual(dom, cube, a, &uj);
            (uj, LocalSolve { cube: a.cube, gradient_ratio, residual })
        })
        .collect();

    let mut u = VectorField::zeros(dom);
    let mut local = Vec::with_capacity(solved.len());
    for (a, (uj, ls)) in atomic.atoms.iter().zip(solved) {
        for (&c, val) in a.cells.iter().zip(uj) {
            u.values[c][0] += val[0];
            u.values[c][1] += val[1];
        }
        local.push(ls);
    }

    let comps: [Vec<f64>; 2] = [0, 1].map(|k| u.values.iter().map(|x| x[k]).collect());
    let grads = comps.each_ref().map(|c| fd_gradient(dom, c));
    let weighted: Vec<(usize, f64)> =
        w.iter().filter(|&(_, o)| o > 0.0).map(|(c, o)| (c, dom.d[c] * dom.d[c] / o)).collect();
    let jac_at = |c: usize| [grads[0][c], grads[1][c]];
    let fnorm = f.norm(dom, p);
    let defined = |x: f64| (fnorm > 0.0).then(|| x / fnorm);
    let c_s = defined(jacobian_norm(weighted.iter().map(|&(c, s)| (jac_at(c), s)), w.x_area, p));
    let p_star = (p < 2.0).then(|| 2.0 * p / (2.0 - p));
    let c_star = p_star.and_then(|ps| {
        defined(lp_norm(weighted.iter().map(|&(c, s)| u.values[c][0].hypot(u.values[c][1]) * s), w.x_area, ps))
    });

    let residuals = weak_residual(dom, &u, f, battery)?;
    let max_residual = residuals.iter().map(|r| r.value).fold(0.0, f64::max);
    let report = SobolevReport {
        p,
        c_s,
        p_star,
        c_star,
        max_local_ratio: local.iter().map(|l| l.gradient_ratio).fold(0.0, f64::max),
        max_local_residual: local.iter().map(|l| l.residual).fold(0.0, f64::max),
        local,
        residuals,
        max_residual,
        max_correction: atomic.max_correction,
        telescoping: atomic.telescoping,
        weighted_sum_ratio: atomic.weighted_sum_ratio(dom, f, w, p),
        unweighted_sum_ratio: atomic.unweighted_sum_ratio(dom, f, p),
    };
    Ok((u, report))
}

/// Weight statistics on one cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeWeight {
    pub cube: usize,
    /// Median of `ω` over the evaluated cells of the cube.
    pub omega: f64,
    /// `min ω / omega`.
    pub low: f64,
    /// `max ω / omega`.
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparability {
    /// Cubes holding at least one evaluated cell.
    pub cubes: Vec<CubeWeight>,
    /// `max high / low` over cubes.
    pub max_spread: f64,
    /// `sup ω / d²` over evaluated cells.
    pub sup_ratio: f64,
}

pub fn weight_comparability(dom: &GridDomain, dec: &WhitneyDecomposition, w: &WeightField) -> Comparability {
    let mut per_cube: Vec<Vec<f64>> = vec![Vec::new(); dec.cubes.len()];
    let mut sup_ratio: f64 = 0.0;
    for (c, om) in w.iter() {
        if dom.d[c] > 0.0 {
            sup_ratio = sup_ratio.max(om / (dom.d[c] * dom.d[c]));
        }
        let owner = dec.locator[c];
        if dec.covered[c] && (owner as usize) < dec.cubes.len() && om > 0.0 {
            per_cube[owner as usize].push(om);
        }
    }
    let cubes: Vec<CubeWeight> = per_cube
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(j, mut v)| {
            v.sort_by(f64::total_cmp);
            let omega = v[(v.len() - 1) / 2];
            CubeWeight { cube: j, omega, low: v[0] / omega, high: v[v.len() - 1] / omega }
        })
        .collect();
    let max_spread = cubes.iter().map(|c| c.high / c.low).fold(0.0, f64::max);
    Comparability { cubes, max_spread, sup_ratio }
}

/// Whether `sup ω/d²` stays bounded along a refinement sequence: each
/// consecutive ratio at most `1 + tol`.
pub fn bounded_under_refinement(sups: &[f64], tol: f64) -> bool {
    sups.iter().all(|s| s.is_finite()) && sups.windows(2).all(|p| p[1] <= p[0] * (1.0 + tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rasterize, DomainSpec};
    use crate::paths::build_family;
    use crate::whitney::{decompose, partition_of_unity};

    #[test]
    fn zero_data_gives_zero_solution() {
        let cube = WhitneyCube { k: 0, cell_lo: [0, 0], side_cells: 4, center: [0.5, 0.5], side: 1.0 };
        let op = BallBogovskii::for_cube(&cube);
        let pts: Vec<Point> = (0..16).map(|k| [0.125 + 0.25 * (k % 4) as f64, 0.125 + 0.25 * (k / 4) as f64]).collect();
        let src: Vec<(Point, f64)> = pts.iter().map(|&p| (p, 0.0)).collect();
        assert!(op.apply(&src, 1.0, &pts).iter().all(|v| v == &[0.0, 0.0]));
    }

    #[test]
    fn tail_quadrature_matches_fine_midpoint_sum() {
        let op = BallBogovskii { center: [0.0, 0.0], radius: 1.0, bump: Bump::default() };
        let (x, y) = ([-0.7, 0.3], [-1.6, 0.5]);
        let e = [x[0] - y[0], x[1] - y[1]];
        let n = 200_000;
        let ds = 10.0 / n as f64;
        let fine: f64 = (0..n)
            .map(|i| {
                let s = 1.0 + (i as f64 + 0.5) * ds;
                op.weight([y[0] + s * e[0], y[1] + s * e[1]]) * s * ds
            })
            .sum();
        let k = op.kernel(x, y);
        assert!((k[0] - e[0] * fine).abs() < 1e-3 * fine.abs());
        assert!((k[1] - e[1] * fine).abs() < 1e-3 * fine.abs());
    }

    #[test]
    fn similarity_law_is_exact() {
        let mk = |scale: f64| {
            let cube = WhitneyCube { k: 0, cell_lo: [0, 0], side_cells: 8, center: [0.0, 0.0], side: scale };
            let h = scale / 8.0;
            let pts: Vec<Point> = (0..256)
                .map(|k| [(-7.5 + (k % 16) as f64) * h, (-7.5 + (k / 16) as f64) * h])
                .collect();
            let vals: Vec<f64> = pts.iter().map(|p| (p[0] / scale) * (1.0 + p[1] / scale)).collect();
            let src: Vec<(Point, f64)> = pts.iter().copied().zip(vals.iter().copied()).collect();
            let u = BallBogovskii::for_cube(&cube).apply(&src, h * h, &pts);
            (u, vals, h)
        };
        let (u1, f1, h1) = mk(1.0);
        let (u2, _, h2) = mk(2.0);
        for (a, b) in u1.iter().zip(&u2) {
            assert!((2.0 * a[0] - b[0]).abs() < 1e-12 && (2.0 * a[1] - b[1]).abs() < 1e-12);
        }
        let norm = |u: &[[f64; 2]], h: f64| lp_norm(u.iter().map(|v| v[0].hypot(v[1])), h * h, 2.0);
        let fnorm = |h: f64| lp_norm(f1.iter().map(|v| v.abs()), h * h, 2.0);
        let r1 = norm(&u1, h1) / (h1 * fnorm(h1));
        let r2 = norm(&u2, h2) / (h2 * fnorm(h2));
        assert!((r1 - r2).abs() < 1e-8 * r1);
    }

    #[test]
    fn pieces_telescope_and_have_support_in_double_cubes() {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), 16).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        let pou = partition_of_unity(&dom, &dec);
        let f = ScalarField::from_fn(&dom, |p| p[0]).mean_zero(&dom).unwrap();
        let u = Kernel::new(&dom, &dec, &fam).solve(&f).unwrap();
        let opts = AtomicOptions { mean_tolerance: f64::INFINITY };
        let at = atomic_decompose(&dom, &dec, &pou, &f, &u, opts).unwrap();
        assert!(at.telescoping < 1e-12);
        let vol = dom.cell_volume();
        for a in &at.atoms {
            let l1: f64 = a.values.iter().map(|v| v.abs()).sum::<f64>() * vol;
            assert!((a.values.iter().sum::<f64>() * vol).abs() <= 1e-8 * l1.max(1e-300));
            let cube = &dec.cubes[a.cube];
            let r = cube.side;
            for &c in &a.cells {
                let p = dom.grid.center(c);
                assert!((p[0] - cube.center[0]).abs() < r && (p[1] - cube.center[1]).abs() < r);
            }
        }
    }

    #[test]
    fn local_solve_inverts_divergence() {
        // Zero-mean data on a fine patch: the weak residual is small.
        let n = 32;
        let h = 1.0 / n as f64;
        let cube = WhitneyCube { k: 0, cell_lo: [0, 0], side_cells: n / 2, center: [0.0, 0.0], side: 0.5 };
        let pts: Vec<Point> = (0..n * n)
            .map(|k| [(-(n as f64) / 2.0 + 0.5 + (k % n) as f64) * h, (-(n as f64) / 2.0 + 0.5 + (k / n) as f64) * h])
            .collect();
        let bump = |p: Point| {
            let r2 = (p[0] * p[0] + p[1] * p[1]) / 0.16;
            if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 }
        };
        let vals: Vec<f64> = pts.iter().map(|&p| p[0] * 4.0 * bump(p)).collect();
        let src: Vec<(Point, f64)> = pts.iter().copied().zip(vals.iter().copied()).collect();
        let u = BallBogovskii::for_cube(&cube).apply(&src, h * h, &pts);
        let phi = |p: Point| (p[0] + 0.3 * p[1] * p[1], [1.0, 0.6 * p[1]]);
        let mut sum = 0.0;
        for (k, &p) in pts.iter().enumerate() {
            let (v, g) = phi(p);
            sum += (u[k][0] * g[0] + u[k][1] * g[1] + vals[k] * v) * h * h;
        }
        let l1: f64 = vals.iter().map(|v| v.abs()).sum::<f64>() * h * h;
        assert!(sum.abs() < 0.05 * l1, "residual {sum} vs {l1}");
    }

    #[test]
    fn refinement_bound_check() {
        assert!(bounded_under_refinement(&[3.0, 3.2, 3.1], 0.25));
        assert!(!bounded_under_refinement(&[3.0, 6.0], 0.25));
    }
}
