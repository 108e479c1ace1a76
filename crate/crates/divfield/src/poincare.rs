//! Weighted Poincaré ratios, the median split, the duality chain with the
//! divergence solve, and the `q = 1` to `q` bootstrap.

use rayon::prelude::*;

use crate::battery::{default_battery, Sampled, TestFunction};
use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::weight::WeightField;

/// Smallest cell value `λ` with `#{g ≤ λ} ≥ N/2`; then also `#{g ≥ λ} ≥ N/2`.
pub fn median_level(dom: &GridDomain, values: &[f64]) -> f64 {
    let mut v: Vec<f64> = dom.true_cells().map(|c| values[c]).collect();
    if v.is_empty() {
        return 0.0;
    }
    let k = v.len().div_ceil(2) - 1;
    let (_, m, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

/// `(g - λ)_+` and `(g - λ)_-` at the median level of `g`.
pub fn median_splits(dom: &GridDomain, g: &TestFunction) -> [TestFunction; 2] {
    let s = g.sample(dom);
    let lam = median_level(dom, &s.values);
    let part = |sign: f64, tag: &str| {
        let values = (0..dom.len())
            .map(|c| if dom.mask[c] { (sign * (s.values[c] - lam)).max(0.0) } else { 0.0 })
            .collect();
        TestFunction::Samples { name: format!("{}_{tag}", s.name), values }
    };
    [part(1.0, "plus"), part(-1.0, "minus")]
}

/// Default battery plus `(d - d(x0)/2)_+` and the median splits of the
/// linear and bilinear monomials.
pub fn poincare_battery(dom: &GridDomain) -> Vec<TestFunction> {
    let mut out = default_battery(dom);
    let r0 = 0.5 * dom.d[dom.x0];
    let ramp = (0..dom.len()).map(|c| if dom.mask[c] { (dom.d[c] - r0).max(0.0) } else { 0.0 }).collect();
    out.push(TestFunction::Samples { name: format!("dist_ramp_{r0:.4}"), values: ramp });
    for (a, b) in [(1, 0), (0, 1), (1, 1)] {
        out.extend(median_splits(dom, &TestFunction::Monomial { a, b }));
    }
    out
}

/// Weighted cells `(cell, ω/d)` with positive weight and distance.
fn gradient_weights(dom: &GridDomain, w: &WeightField) -> Vec<(usize, f64)> {
    w.iter().filter(|&(c, o)| o > 0.0 && dom.d[c] > 0.0).map(|(c, o)| (c, o / dom.d[c])).collect()
}

fn norm_q(values: impl Iterator<Item = f64>, vol: f64, q: f64) -> f64 {
    crate::field::lp_norm(values, vol, q)
}

/// `‖(ω/d)|∇g|‖_q` over the weighted cells.
pub fn weighted_gradient_norm(dom: &GridDomain, w: &WeightField, grads: &[[f64; 2]], q: f64) -> f64 {
    norm_q(gradient_weights(dom, w).into_iter().map(|(c, s)| grads[c][0].hypot(grads[c][1]) * s), w.x_area, q)
}

fn mean_deviation_norm(dom: &GridDomain, values: &[f64], q: f64) -> (f64, f64) {
    let n = dom.true_count() as f64;
    let mean = dom.true_cells().map(|c| values[c]).sum::<f64>() / n;
    let dev = norm_q(dom.true_cells().map(|c| (values[c] - mean).abs()), dom.cell_volume(), q);
    let scale = norm_q(dom.true_cells().map(|c| values[c].abs()), dom.cell_volume(), q);
    (dev, scale)
}

/// Check of the bound for functions vanishing on half of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingCheck {
    /// `‖g‖_q / ‖(ω/d)|∇g|‖_q`.
    pub ratio: f64,
    /// `(1 + 2^{1/q}) Ĉ_q`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareEntry {
    pub name: String,
    /// `‖g - g_Ω‖_q / ‖(ω/d)|∇g|‖_q`, `None` when excluded.
    pub ratio: Option<f64>,
    pub excluded: Option<String>,
    pub approximate: bool,
    /// Present when `g` vanishes on at least half of the cells.
    pub vanishing: Option<VanishingCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareReport {
    pub q: f64,
    pub entries: Vec<PoincareEntry>,
    /// Largest ratio over the included members.
    pub c_hat: f64,
}

/// Relative size below which `g - g_Ω` counts as zero.
const FLAT: f64 = 1e-12;

pub fn poincare_constant(dom: &GridDomain, w: &WeightField, q: f64, battery: &[TestFunction]) -> Result<PoincareReport> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::BadExponent(q));
    }
    let rows: Vec<(PoincareEntry, Option<f64>)> = battery
        .par_iter()
        .map(|tf| {
            let s = tf.sample(dom);
            let (dev, scale) = mean_deviation_norm(dom, &s.values, q);
            let grad = weighted_gradient_norm(dom, w, &s.grads, q);
            let zero = dom.true_cells().filter(|&c| s.values[c] == 0.0).count();
            let vanishing = (2 * zero >= dom.true_count()).then(|| if grad > 0.0 { scale / grad } else { 0.0 });
            let mut entry = PoincareEntry {
                name: s.name.clone(),
                ratio: None,
                excluded: None,
                approximate: s.approximate,
                vanishing: None,
            };
            if !s.is_finite() || !grad.is_finite() {
                entry.excluded = Some("weighted gradient norm not finite".into());
            } else if dev <= FLAT * scale.max(f64::MIN_POSITIVE) || grad == 0.0 {
                entry.excluded = Some("constant".into());
            } else {
                entry.ratio = Some(dev / grad);
            }
            (entry, vanishing)
        })
        .collect();
    let c_hat = rows.iter().filter_map(|(e, _)| e.ratio).fold(0.0, f64::max);
    let bound = (1.0 + 2f64.powf(1.0 / q)) * c_hat;
    let entries = rows
        .into_iter()
        .map(|(mut e, v)| {
            if e.excluded.is_none() {
                e.vanishing = v.map(|ratio| VanishingCheck { ratio, bound, holds: ratio <= bound });
            }
            e
        })
        .collect();
    Ok(PoincareReport { q, entries, c_hat })
}

/// Links of `|∫ f g| = |∫ u·∇g| ≤ ‖(ω/d)∇g‖_q ‖(d/ω)u‖_p = ‖(ω/d)∇g‖_q C_p ‖f‖_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub p: f64,
    pub q: f64,
    /// `Σ f g h²`.
    pub pairing: f64,
    /// `-Σ u·∇g h²`.
    pub by_parts: f64,
    /// `|pairing - by_parts|`, the quadrature residual.
    pub residual: f64,
    /// `|Σ u·∇g|` over the weighted cells.
    pub holder_lhs: f64,
    /// `‖(ω/d)∇g‖_q ‖(d/ω)u‖_p` over the same cells.
    pub holder_rhs: f64,
    pub holder_holds: bool,
    /// `‖(ω/d)∇g‖_q C_p ‖f‖_p`.
    pub bound: f64,
    /// `bound - |pairing|`.
    pub slack: f64,
    /// `|pairing| <= bound + residual`.
    pub closes: bool,
}

/// Checks the duality chain for one test function. `c_p` is the measured
/// `‖(d/ω)u‖_p / ‖f‖_p` of the solve that produced `u`.
pub fn duality_check(
    dom: &GridDomain,
    w: &WeightField,
    f: &ScalarField,
    u: &VectorField,
    c_p: f64,
    g: &TestFunction,
    p: f64,
) -> Result<DualityReport> {
    if !(p > 1.0) {
        return Err(Error::BadExponent(p));
    }
    if f.grid != dom.grid || u.grid != dom.grid {
        return Err(Error::GridMismatch);
    }
    let q = if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let s = g.sample(dom);
    let vol = dom.cell_volume();
    let pairing = dom.true_cells().map(|c| f.values[c] * s.values[c]).sum::<f64>() * vol;
    let dot = |c: usize| u.values[c][0] * s.grads[c][0] + u.values[c][1] * s.grads[c][1];
    let by_parts = -dom.true_cells().map(dot).sum::<f64>() * vol;
    let cells = gradient_weights(dom, w);
    let holder_lhs = cells.iter().map(|&(c, _)| dot(c)).sum::<f64>().abs() * w.x_area;
    let gnorm = norm_q(cells.iter().map(|&(c, k)| s.grads[c][0].hypot(s.grads[c][1]) * k), w.x_area, q);
    let unorm = norm_q(cells.iter().map(|&(c, k)| u.values[c][0].hypot(u.values[c][1]) / k), w.x_area, p);
    let holder_rhs = gnorm * unorm;
    let bound = gnorm * c_p * f.norm(dom, p);
    Ok(DualityReport {
        p,
        q,
        pairing,
        by_parts,
        residual: (pairing - by_parts).abs(),
        holder_lhs,
        holder_rhs,
        holder_holds: holder_lhs <= holder_rhs,
        bound,
        slack: bound - pairing.abs(),
        closes: pairing.abs() <= bound + (pairing - by_parts).abs(),
    })
}

/// Chain `∫|g|^q ≤ r q ∫|g|^{q-1}(ω/d)|∇g| ≤ r q (∫|g|^q)^{1-1/q} ‖(ω/d)∇g‖_q`
/// where `r` is the measured `q = 1` ratio of `|g|^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub name: String,
    pub q: f64,
    /// `∫|g|^q / ‖(ω/d)∇(|g|^q)‖_1`.
    pub c1: f64,
    pub lhs: f64,
    pub middle: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    /// `rhs >= lhs` up to a relative rounding allowance of `1e-12`; at
    /// `q = 1` both sides are the same number computed two ways.
    pub holds: bool,
    /// `q c1`.
    pub implied: f64,
    /// `‖g‖_q / ‖(ω/d)∇g‖_q`.
    pub direct: f64,
}

pub fn bootstrap_check(dom: &GridDomain, w: &WeightField, g: &Sampled, q: f64) -> Result<BootstrapReport> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::BadExponent(q));
    }
    let total = dom.true_count();
    let zero = dom.true_cells().filter(|&c| g.values[c] == 0.0).count();
    if 2 * zero < total {
        return Err(Error::VanishingSet { got: zero, total });
    }
    let cells = gradient_weights(dom, w);
    let a = w.x_area;
    let mag = |c: usize| g.grads[c][0].hypot(g.grads[c][1]);
    let lhs = cells.iter().map(|&(c, _)| g.values[c].abs().powf(q)).sum::<f64>() * a;
    let pow_grad = cells.iter().map(|&(c, k)| q * g.values[c].abs().powf(q - 1.0) * mag(c) * k).sum::<f64>() * a;
    let c1 = if pow_grad > 0.0 { lhs / pow_grad } else { 0.0 };
    let middle = c1 * pow_grad;
    let gnorm = norm_q(cells.iter().map(|&(c, k)| mag(c) * k), a, q);
    let rhs = c1 * q * lhs.powf(1.0 - 1.0 / q) * gnorm;
    let direct = if gnorm > 0.0 { lhs.powf(1.0 / q) / gnorm } else { 0.0 };
    Ok(BootstrapReport {
        name: g.name.clone(),
        q,
        c1,
        lhs,
        middle,
        rhs,
        slack: rhs - lhs,
        holds: rhs >= lhs * (1.0 - 1e-12),
        implied: q * c1,
        direct,
    })
}

/// Unweighted and weighted `q = 1` ratios on the cusp battery.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspRatios {
    /// `sup ‖g - g_Ω‖_1 / ‖∇g‖_1`.
    pub unweighted: f64,
    /// `sup ‖g - g_Ω‖_1 / ‖(ω/d)∇g‖_1`.
    pub weighted: f64,
}

/// `g = clamp(x, cut, 1)^{-β}` with `cut = 2h`, one member per exponent.
pub fn cusp_battery(dom: &GridDomain, exponents: &[f64]) -> Vec<Sampled> {
    let cut = 2.0 * dom.h();
    exponents
        .iter()
        .map(|&beta| {
            let mut values = vec![0.0; dom.len()];
            let mut grads = vec![[0.0; 2]; dom.len()];
            for c in dom.true_cells() {
                let x = dom.grid.center(c)[0];
                let t = x.clamp(cut, 1.0);
                values[c] = t.powf(-beta);
                if x > cut && x < 1.0 {
                    grads[c][0] = -beta * t.powf(-beta - 1.0);
                }
            }
            Sampled { name: format!("cusp_pow_{beta}"), values, grads, approximate: false }
        })
        .collect()
}

pub fn cusp_ratios(dom: &GridDomain, w: &WeightField, battery: &[Sampled]) -> CuspRatios {
    let vol = dom.cell_volume();
    let mut out = CuspRatios { unweighted: 0.0, weighted: 0.0 };
    for s in battery {
        let (dev, _) = mean_deviation_norm(dom, &s.values, 1.0);
        let plain: f64 = dom.true_cells().map(|c| s.grads[c][0].hypot(s.grads[c][1])).sum::<f64>() * vol;
        let weighted = weighted_gradient_norm(dom, w, &s.grads, 1.0);
        if plain > 0.0 {
            out.unweighted = out.unweighted.max(dev / plain);
        }
        if weighted > 0.0 {
            out.weighted = out.weighted.max(dev / weighted);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{rasterize, DomainSpec};
    use crate::paths::build_family;
    use crate::weight::{compute_weight, WeightOptions};
    use crate::whitney::decompose;

    fn disk(res: usize) -> (GridDomain, WeightField) {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), res).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        let w = compute_weight(&dom, &dec, &fam, WeightOptions::default()).unwrap();
        (dom, w)
    }

    #[test]
    fn median_level_splits_cell_counts() {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), 32).unwrap();
        let vals: Vec<f64> = (0..dom.len()).map(|c| dom.grid.center(c)[0]).collect();
        let lam = median_level(&dom, &vals);
        let n = dom.true_count();
        let below = dom.true_cells().filter(|&c| vals[c] <= lam).count();
        let above = dom.true_cells().filter(|&c| vals[c] >= lam).count();
        assert!(2 * below >= n && 2 * above >= n);
        assert!(lam.abs() <= dom.h());
        let flat = vec![3.5; dom.len()];
        assert_eq!(median_level(&dom, &flat), 3.5);
    }

    #[test]
    fn median_of_distance_is_area_median_radius() {
        let dom = rasterize(&DomainSpec::disk(1.0).unwrap(), 64).unwrap();
        let lam = median_level(&dom, &dom.d);
        // Half of the area lies within radius 1/√2 of the center.
        let expected = 1.0 - 0.5f64.sqrt();
        assert!((lam - expected).abs() <= 2.0 * dom.h(), "{lam} vs {expected}");
    }

    #[test]
    fn constants_are_excluded() {
        let (dom, w) = disk(16);
        let bat = vec![TestFunction::Monomial { a: 0, b: 0 }, TestFunction::Monomial { a: 1, b: 0 }];
        let r = poincare_constant(&dom, &w, 1.0, &bat).unwrap();
        assert!(r.entries[0].ratio.is_none());
        assert!(r.entries[1].ratio.unwrap() > 0.0);
        assert_eq!(r.c_hat, r.entries[1].ratio.unwrap());
    }

    #[test]
    fn bootstrap_needs_a_vanishing_half() {
        let (dom, w) = disk(16);
        let g = TestFunction::Monomial { a: 1, b: 0 }.sample(&dom);
        assert!(matches!(bootstrap_check(&dom, &w, &g, 2.0), Err(Error::VanishingSet { .. })));
        let zero = Sampled { name: "zero".into(), values: vec![0.0; dom.len()], grads: vec![[0.0; 2]; dom.len()], approximate: false };
        let r = bootstrap_check(&dom, &w, &zero, 2.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.slack), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bootstrap_chain_has_nonnegative_slack() {
        let (dom, w) = disk(16);
        let [plus, minus] = median_splits(&dom, &TestFunction::Monomial { a: 1, b: 0 });
        for g in [plus, minus] {
            let r = bootstrap_check(&dom, &w, &g.sample(&dom), 2.0).unwrap();
            assert!(r.holds && r.lhs <= r.middle * (1.0 + 1e-12));
        }
    }
}
