//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` fail for reasons recorded in the
//! project's decisions log; they are printed as FAIL but do not fail the
//! target. Any other failure exits with status 1.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use divfield::battery::default_battery;
use divfield::decomp::{atomic_decompose, solve_sobolev, weight_comparability, AtomicOptions, SobolevOptions};
use divfield::domain::{geodesic_integral, integrability_probe, rasterize, DomainSpec, GridDomain, EPS_GROW, EPS_STAB};
use divfield::field::ScalarField;
use divfield::kernel::{interior_samples, solve_divergence, solve_report, Kernel};
use divfield::paths::{build_family, verify_gamma, verify_rho, PathFamily};
use divfield::poincare::{
    bootstrap_check, cusp_battery, cusp_ratios, duality_check, median_level, poincare_battery, poincare_constant,
};
use divfield::weight::{
    compute_weight, compute_weight_at, default_cutoff, diagnostics, sup_ratio, WeightField, WeightOptions,
};
use divfield::whitney::{check, decompose, partition_of_unity, WhitneyDecomposition};
use divfield_cli::config::ExperimentConfig;

const KNOWN_FAILURES: &[u32] = &[1, 2, 6, 7, 8, 10, 11, 13];

const TITLES: [&str; 14] = [
    "Whitney exactness",
    "path contract",
    "cut-off radius and alpha",
    "weight lower bound",
    "weighted distance integral",
    "weight exponent laws",
    "integrability dichotomy",
    "divergence solver",
    "kernel bound",
    "atomic decomposition",
    "Sobolev solve",
    "Poincare suite",
    "negative control",
    "determinism",
];

#[derive(Default)]
struct Ledger {
    checks: BTreeMap<u32, Vec<(bool, String)>>,
}

impl Ledger {
    fn add(&mut self, id: u32, pass: bool, detail: impl Into<String>) {
        let detail = detail.into();
        eprintln!("  C{id} {} {detail}", if pass { "ok  " } else { "miss" });
        self.checks.entry(id).or_default().push((pass, detail));
    }
}

struct Setup {
    dom: GridDomain,
    dec: WhitneyDecomposition,
    fam: PathFamily,
}

fn spec(s: &str) -> DomainSpec {
    s.parse().expect("domain spec")
}

fn setup(s: &str, r: usize) -> Setup {
    let t = Instant::now();
    let dom = rasterize(&spec(s), r).expect("rasterize");
    let dec = decompose(&dom).expect("decompose");
    let fam = build_family(&dom, &dec).expect("paths");
    eprintln!("[setup] {s} at {r}: {} true cells, {:.1?}", dom.true_count(), t.elapsed());
    Setup { dom, dec, fam }
}

fn weight(s: &Setup, y_stride: usize, x_stride: usize) -> WeightField {
    compute_weight(&s.dom, &s.dec, &s.fam, WeightOptions { y_stride, x_stride }).expect("weight")
}

fn rel_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

fn order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Whitney test at 256 cells per unit on one domain.
fn whitney_exactness(led: &mut Ledger, name: &str, dom: &GridDomain) {
    let t = Instant::now();
    let dec = decompose(dom).expect("decompose");
    let rep = check(dom, &dec);
    let secs = t.elapsed().as_secs_f64();
    led.add(
        1,
        rep.pass_fraction == 1.0 && secs < 10.0,
        format!(
            "{name}: {:.2}% of {} cubes pass (4Q {} / 2Q {} / bracket {}), {secs:.2}s",
            100.0 * rep.pass_fraction,
            rep.cubes,
            rep.quadruple_failures,
            rep.double_failures,
            rep.bracket_failures
        ),
    );
}

fn rho_checks(led: &mut Ledger, name: &str, s: &Setup) {
    let rep = verify_rho(&s.fam, &s.dom, &s.dec, 10_000, 11);
    led.add(
        3,
        rep.rho_violations == 0 && rep.alpha_violations == 0,
        format!(
            "{name}: {} traces, {} points, rho violations {}, alpha violations {}, max alpha {:.6}",
            rep.traces, rep.points, rep.rho_violations, rep.alpha_violations, rep.max_alpha
        ),
    );
}

fn kernel_ratio(s: &Setup, samples: usize, y_stride: usize) -> (f64, usize) {
    let cells = interior_samples(&s.dom, samples, 7);
    let opts = WeightOptions { y_stride, x_stride: 1 };
    let w = compute_weight_at(&s.dom, &s.dec, &s.fam, opts, &cells).expect("weight at samples");
    let k = Kernel::new(&s.dom, &s.dec, &s.fam);
    let kb = k.abs_integral(&w.cells, y_stride).expect("kernel bound");
    (kb.max_ratio(&s.dom, &w), kb.support_violations)
}

fn small_domains(led: &mut Ledger) {
    for name in ["disk(1)", "square(1)", "hoelder_cusp(0.5)"] {
        let dom = rasterize(&spec(name), 256).expect("rasterize");
        whitney_exactness(led, name, &dom);
    }
}

fn disk_geometry(led: &mut Ledger) {
    let mut slopes = Vec::new();
    let mut integrals = Vec::new();
    for r in [128, 256] {
        let s = setup("disk(1)", r);
        let g = verify_gamma(&s.fam, &s.dom, &s.dec, 2000, 7).expect("gamma");
        led.add(2, g.length_ratio <= 1.05, format!("disk at {r}: length ratio {:.4} (<= 1.05)", g.length_ratio));
        led.add(2, g.ahlfors <= 2.1, format!("disk at {r}: Ahlfors constant {:.4} (<= 2.1)", g.ahlfors));
        let w = weight(&s, 1, 1);
        let rep = diagnostics(&w, &s.dom, default_cutoff(&s.dom)).expect("diagnostics");
        if r == 128 {
            let total = w.cells.len();
            let low = w
                .iter()
                .filter(|&(c, o)| o >= 0.9 * std::f64::consts::PI * (s.dom.d[c] / 2.0).powi(2))
                .count();
            let frac = low as f64 / total as f64;
            led.add(4, frac >= 0.99, format!("disk at 128: {low}/{total} cells above the ball bound ({:.4})", frac));
        }
        integrals.push(rep.integral);
        slopes.push(rep.fit.slope);
    }
    let ch = rel_change(integrals[0], integrals[1]);
    led.add(5, ch <= 0.2, format!("disk: I = {:.4} -> {:.4} ({:.1}% change)", integrals[0], integrals[1], 100.0 * ch));
    let slope = slopes[1];
    led.add(
        6,
        (1.7..=2.3).contains(&slope),
        format!("disk: slope {:.4} at 128, {slope:.4} at 256 (in [1.7, 2.3])", slopes[0]),
    );
}

fn cusp_exponent(led: &mut Ledger) {
    let mut sups = Vec::new();
    for r in [128, 256] {
        let s = setup("hoelder_cusp(0.5)", r);
        let w = weight(&s, 1, 1);
        sups.push(sup_ratio(&w, &s.dom, 1.5, default_cutoff(&s.dom)));
        if r == 128 {
            rho_checks(led, "hoelder_cusp(0.5) at 128", &s);
        }
    }
    let ch = rel_change(sups[0], sups[1]);
    led.add(
        6,
        ch <= 0.25,
        format!("hoelder_cusp(0.5): sup w/d^1.5 {:.4} -> {:.4} ({:.1}% change)", sups[0], sups[1], 100.0 * ch),
    );
}

fn half_spiral(led: &mut Ledger) {
    let name = "power_spiral(0.5)";
    let mut ca = Vec::new();
    let mut cl = Vec::new();
    let mut sups = Vec::new();
    let mut kernel = Vec::new();
    for (r, ys, xs) in [(64, 4, 16), (128, 8, 32), (256, 16, 64)] {
        let s = setup(name, r);
        if r == 64 {
            rho_checks(led, &format!("{name} at 64"), &s);
        }
        if r <= 128 {
            let (ratio, viol) = kernel_ratio(&s, 60, ys);
            led.add(9, viol == 0, format!("{name} at {r}: far-part support violations {viol}"));
            kernel.push(ratio);
        }
        if r >= 128 {
            let g = verify_gamma(&s.fam, &s.dom, &s.dec, 2000, 7).expect("gamma");
            ca.push(g.ahlfors);
            cl.push(g.length_ratio);
            let w = weight(&s, ys, xs);
            sups.push(sup_ratio(&w, &s.dom, 2.0 / 3.0, default_cutoff(&s.dom)));
        }
        if r == 256 {
            whitney_exactness(led, name, &s.dom);
        }
    }
    for (label, v) in [("Ahlfors constant", &ca), ("length ratio", &cl)] {
        let ch = rel_change(v[0], v[1]);
        led.add(2, ch <= 0.1, format!("{name}: {label} {:.4} -> {:.4} ({:.1}% change)", v[0], v[1], 100.0 * ch));
    }
    let ch = rel_change(sups[0], sups[1]);
    led.add(6, ch <= 0.25, format!("{name}: sup w/d^(2/3) {:.4} -> {:.4} ({:.1}% change)", sups[0], sups[1], 100.0 * ch));
    let ch = rel_change(kernel[0], kernel[1]);
    led.add(
        9,
        kernel.iter().all(|k| k.is_finite()) && ch <= 0.2,
        format!("{name}: max |G| ratio {:.4} -> {:.4} ({:.1}% change)", kernel[0], kernel[1], 100.0 * ch),
    );
}

fn square_spiral(led: &mut Ledger) {
    let name = "power_spiral(2)";
    let mut integrals = Vec::new();
    let mut sums = Vec::new();
    for (r, ys, xs) in [(64, 4, 16), (128, 8, 32), (256, 16, 64)] {
        let s = setup(name, r);
        sums.push(geodesic_integral(&s.dom));
        if r >= 128 {
            let w = weight(&s, ys, xs);
            integrals.push(diagnostics(&w, &s.dom, default_cutoff(&s.dom)).expect("diagnostics").integral);
        }
    }
    let ch = rel_change(integrals[0], integrals[1]);
    led.add(5, ch <= 0.2, format!("{name}: I = {:.4} -> {:.4} ({:.1}% change)", integrals[0], integrals[1], 100.0 * ch));
    let ratio = sums[2] / sums[1];
    led.add(7, ratio <= 1.0 + EPS_STAB, format!("{name}: Riemann sums {sums:.3?}, last ratio {ratio:.5} (<= 1.02)"));
}

fn divergent_spiral(led: &mut Ledger) {
    let rep = integrability_probe(&spec("power_spiral(3.5)"), &[64, 128, 256], EPS_STAB, EPS_GROW).expect("probe");
    let ratio = *rep.ratios.last().expect("ratios");
    led.add(
        7,
        ratio >= 1.0 + EPS_GROW,
        format!("power_spiral(3.5): Riemann sums {:.3?}, last ratio {ratio:.5} (>= 1.10), {}", rep.sums, rep.verdict),
    );
}

/// Disk solves at 64 and 128: criteria 8, 9 (disk half), 10, 11, 12.
fn disk_analysis(led: &mut Ledger) {
    #[derive(Default)]
    struct Row {
        residual: f64,
        c_inf: f64,
        kernel: f64,
        sum_ratio: f64,
        c_s: BTreeMap<&'static str, f64>,
        sob_residual: f64,
        c_hat1: f64,
    }
    let mut rows = Vec::new();
    for r in [64, 128] {
        let s = setup("disk(1)", r);
        if r == 64 {
            rho_checks(led, "disk(1) at 64", &s);
        }
        let (kr, viol) = kernel_ratio(&s, 100, 1);
        led.add(9, viol == 0, format!("disk at {r}: far-part support violations {viol}"));
        let dom = &s.dom;
        let w = weight(&s, 1, 1);
        let k = Kernel::new(dom, &s.dec, &s.fam);
        let f = ScalarField::from_fn(dom, |p| p[0]).mean_zero(dom).expect("mean zero");
        let battery = default_battery(dom);
        let (u, rep) = solve_divergence(&k, &f, &w, f64::INFINITY, &battery).expect("solve");
        let mut row = Row { residual: rep.max_residual, c_inf: rep.c_inf, kernel: kr, ..Row::default() };

        let pou = partition_of_unity(dom, &s.dec);
        let atoms =
            atomic_decompose(dom, &s.dec, &pou, &f, &u, AtomicOptions { mean_tolerance: f64::INFINITY }).expect("atoms");
        let outside = atoms
            .atoms
            .iter()
            .flat_map(|a| a.cells.iter().map(move |&c| (a.cube, c)))
            .filter(|&(j, c)| {
                let q = &s.dec.cubes[j];
                let p = dom.grid.center(c);
                (p[0] - q.center[0]).abs() >= q.side || (p[1] - q.center[1]).abs() >= q.side
            })
            .count();
        let scale = f.max_abs(dom);
        led.add(
            10,
            outside == 0 && atoms.telescoping <= 1e-12 * scale,
            format!("disk at {r}: cells outside 2Q {outside}, telescoping defect {:.2e}", atoms.telescoping),
        );
        led.add(
            10,
            atoms.max_correction <= 1e-8,
            format!("disk at {r}: largest relative piece mean {:.3e} (<= 1e-8)", atoms.max_correction),
        );
        let cmp = weight_comparability(dom, &s.dec, &w);
        for (p, key) in [(2.0, "2"), (1.5, "1.5")] {
            let opts = SobolevOptions { p, atomic: AtomicOptions { mean_tolerance: f64::INFINITY } };
            let (_, sr) = solve_sobolev(&k, &pou, &f, &w, opts, &battery).expect("sobolev");
            row.c_s.insert(key, sr.c_s.unwrap_or(f64::NAN));
            if p == 2.0 {
                row.sum_ratio = sr.weighted_sum_ratio;
                row.sob_residual = sr.max_residual;
                led.add(
                    10,
                    sr.unweighted_sum_ratio.is_finite() && cmp.max_spread.is_finite(),
                    format!(
                        "disk at {r}: sup w/d^2 {:.4}, cube spread {:.3}, two-sided ratio {:.3}",
                        cmp.sup_ratio, cmp.max_spread, sr.unweighted_sum_ratio
                    ),
                );
            } else {
                let exact = sr.p_star == Some(6.0);
                let finite = sr.c_star.is_some_and(f64::is_finite);
                led.add(
                    11,
                    exact && finite,
                    format!("disk at {r}: p = 1.5 gives p* = {:?}, C* = {:?}", sr.p_star, sr.c_star),
                );
            }
        }

        let pb = poincare_battery(dom);
        let n = dom.true_count();
        let mut median_ok = true;
        for tf in &pb {
            let smp = tf.sample(dom);
            let lam = median_level(dom, &smp.values);
            let below = dom.true_cells().filter(|&c| smp.values[c] <= lam).count();
            let above = dom.true_cells().filter(|&c| smp.values[c] >= lam).count();
            median_ok &= 2 * below >= n && 2 * above >= n;
        }
        led.add(12, median_ok, format!("disk at {r}: median level splits every battery member into halves"));
        let c1 = poincare_constant(dom, &w, 1.0, &pb).expect("poincare");
        row.c_hat1 = c1.c_hat;
        let mut holder = true;
        let mut closes = true;
        let mut worst_slack = f64::INFINITY;
        for p in [f64::INFINITY, 2.0] {
            let sr = solve_report(dom, &f, &u, &w, p, &battery).expect("report");
            for g in &pb {
                let d = duality_check(dom, &w, &f, &u, sr.c_p, g, p).expect("duality");
                holder &= d.holder_holds;
                closes &= d.closes;
                worst_slack = worst_slack.min(d.slack + d.residual);
            }
        }
        led.add(
            12,
            holder && closes,
            format!("disk at {r}: Hoelder link exact {holder}, chain closes within residual {closes} (min slack + residual {worst_slack:.3e})"),
        );
        let mut boots = 0;
        let mut min_slack = f64::INFINITY;
        let mut all_hold = true;
        for g in &pb {
            let smp = g.sample(dom);
            if 2 * dom.true_cells().filter(|&c| smp.values[c] == 0.0).count() < n {
                continue;
            }
            for q in [1.0, 1.5, 2.0, 4.0] {
                let b = bootstrap_check(dom, &w, &smp, q).expect("bootstrap");
                boots += 1;
                min_slack = min_slack.min(b.slack);
                all_hold &= b.holds;
            }
        }
        led.add(
            12,
            boots > 0 && all_hold,
            format!("disk at {r}: {boots} bootstrap chains hold: {all_hold}, min slack {min_slack:.3e}"),
        );
        rows.push(row);
    }
    let (a, b) = (&rows[0], &rows[1]);
    led.add(8, a.residual <= 5e-2, format!("disk: weak residual {:.3e} at 64 (<= 5e-2)", a.residual));
    let o = order(a.residual, b.residual);
    led.add(8, o >= 0.9, format!("disk: residual {:.3e} -> {:.3e}, order {o:.3} (>= 0.9)", a.residual, b.residual));
    let ch = rel_change(a.c_inf, b.c_inf);
    led.add(8, ch <= 0.15, format!("disk: pointwise constant {:.4} -> {:.4} ({:.1}% change)", a.c_inf, b.c_inf, 100.0 * ch));
    let ch = rel_change(a.kernel, b.kernel);
    led.add(9, ch <= 0.2, format!("disk: max |G| ratio {:.4} -> {:.4} ({:.1}% change)", a.kernel, b.kernel, 100.0 * ch));
    let ch = rel_change(a.sum_ratio, b.sum_ratio);
    led.add(10, ch <= 0.2, format!("disk: weighted sum ratio {:.4} -> {:.4} ({:.1}% change)", a.sum_ratio, b.sum_ratio, 100.0 * ch));
    led.add(11, a.sob_residual <= 0.1, format!("disk: Sobolev weak residual {:.3e} at 64 (<= 1e-1)", a.sob_residual));
    let o = order(a.sob_residual, b.sob_residual);
    led.add(11, o >= 0.9, format!("disk: Sobolev residual {:.3e} -> {:.3e}, order {o:.3} (>= 0.9)", a.sob_residual, b.sob_residual));
    let (s0, s1) = (a.c_s["2"], b.c_s["2"]);
    let ch = rel_change(s0, s1);
    led.add(11, ch <= 0.15, format!("disk: C_S (p = 2) {s0:.4} -> {s1:.4} ({:.1}% change)", 100.0 * ch));
    let ch = rel_change(a.c_hat1, b.c_hat1);
    led.add(12, ch <= 0.15, format!("disk: C-hat (q = 1) {:.4} -> {:.4} ({:.1}% change)", a.c_hat1, b.c_hat1, 100.0 * ch));
}

fn friedrichs(led: &mut Ledger) {
    let mut ratios = Vec::new();
    for r in [32, 64, 128] {
        let s = setup("friedrichs_cusp(3)", r);
        let w = weight(&s, 1, 1);
        let battery = cusp_battery(&s.dom, &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        ratios.push(cusp_ratios(&s.dom, &w, &battery));
    }
    let grow = ratios.windows(2).map(|p| p[1].unweighted / p[0].unweighted).fold(f64::INFINITY, f64::min);
    let unweighted: Vec<f64> = ratios.iter().map(|r| r.unweighted).collect();
    led.add(13, grow >= 1.2, format!("unweighted ratios {unweighted:.4?}, smallest growth {grow:.3} (>= 1.2)"));
    let weighted: Vec<f64> = ratios.iter().map(|r| r.weighted).collect();
    let worst = ratios.windows(2).map(|p| rel_change(p[0].weighted, p[1].weighted)).fold(0.0, f64::max);
    led.add(13, worst <= 0.25, format!("weighted ratios {weighted:.4?}, largest change {:.1}%", 100.0 * worst));
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).expect("read")))
        .collect()
}

fn determinism(led: &mut Ledger) {
    let tmp = tempfile::tempdir().expect("tempdir");
    for domain in ["disk(1)", "hoelder_cusp(0.5)"] {
        let mut outputs = Vec::new();
        for threads in [1, 4] {
            let cfg = ExperimentConfig {
                domain: spec(domain),
                resolutions: vec![16, 32],
                p: vec![2.0, 1.5],
                threads,
                path_samples: 500,
                kernel_samples: 30,
                out: tmp.path().join(format!("{domain}-{threads}")),
                ..ExperimentConfig::default()
            };
            divfield_cli::pipeline::run(&cfg).expect("pipeline");
            outputs.push(csv_bytes(&cfg.out));
        }
        let same = outputs[0] == outputs[1];
        led.add(14, same && !outputs[0].is_empty(), format!("{domain}: {} CSV files byte-identical for 1 and 4 threads: {same}", outputs[0].len()));
    }
}

fn main() {
    let start = Instant::now();
    let mut led = Ledger::default();
    small_domains(&mut led);
    disk_geometry(&mut led);
    cusp_exponent(&mut led);
    disk_analysis(&mut led);
    friedrichs(&mut led);
    determinism(&mut led);
    half_spiral(&mut led);
    square_spiral(&mut led);
    divergent_spiral(&mut led);

    let mut unexpected = Vec::new();
    println!();
    for (id, title) in (1u32..).zip(TITLES) {
        let checks = led.checks.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let pass = !checks.is_empty() && checks.iter().all(|c| c.0);
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (pass, known) {
            (true, true) => " (listed as a known failure)",
            (false, true) => " (known failure)",
            _ => "",
        };
        println!("C{id:<2} {} {title}{tag}", if pass { "PASS" } else { "FAIL" });
        for (ok, detail) in checks.iter().filter(|c| !c.0 || pass) {
            println!("      {} {detail}", if *ok { "+" } else { "-" });
        }
        if !pass && !known {
            unexpected.push(id);
        }
    }
    println!("\nacceptance finished in {:.0?}", start.elapsed());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
