//! The experiment pipeline: every stage up to the configured one, per
//! resolution, with CSV, PGM and SVG artifacts and a plain-text manifest.

use std::path::{Path, PathBuf};

use divfield::battery::{default_battery, TestFunction};
use divfield::decomp::{solve_sobolev, weight_comparability, AtomicOptions, SobolevOptions};
use divfield::domain::{integrability_probe, rasterize, GridDomain, EPS_GROW, EPS_STAB};
use divfield::field::ScalarField;
use divfield::kernel::{interior_samples, solve_divergence, solve_report, Kernel};
use divfield::paths::{build_family, verify_gamma, verify_rho, PathFamily};
use divfield::poincare::{bootstrap_check, duality_check, median_level, poincare_battery, poincare_constant};
use divfield::weight::{
    compute_weight, compute_weight_at, default_cutoff, diagnostics, sup_ratio, WeightField, WeightOptions,
};
use divfield::whitney::{check, decompose, partition_of_unity, PartitionOfUnity, WhitneyDecomposition};
use divfield::Error;

use crate::config::{ExperimentConfig, Stage};
use crate::error::{CliError, CliResult};
use crate::io::{field_table, num, opt, vector_table, write_log_heat_pgm, write_mask_pgm, Svg, Table};

/// Result of a run: where the artifacts went and which hard checks failed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Cross-resolution tables, one file each.
struct Tables {
    domain: Table,
    whitney: Table,
    paths: Table,
    weight: Table,
    solve: Table,
    residuals: Table,
    kernel: Table,
    sobolev: Table,
    poincare: Table,
    constants: Table,
    duality: Table,
    bootstrap: Table,
}

impl Tables {
    fn new() -> Self {
        Self {
            domain: Table::new(&["resolution", "h", "nx", "ny", "true_cells", "area", "max_d", "d_x0"]),
            whitney: Table::new(&[
                "resolution",
                "cubes",
                "pass_fraction",
                "double_failures",
                "quadruple_failures",
                "bracket_failures",
                "layer_cells",
                "max_layer_distance",
                "gradient_bound",
            ]),
            paths: Table::new(&[
                "resolution",
                "samples",
                "ahlfors",
                "length_ratio",
                "detours",
                "rho_points",
                "rho_violations",
                "alpha_violations",
                "max_alpha",
            ]),
            weight: Table::new(&[
                "resolution",
                "y_stride",
                "x_stride",
                "integral",
                "c_low",
                "w_max",
                "lower_fraction",
                "fit_cutoff",
                "slope",
                "intercept",
                "r2",
                "fit_cells",
                "sup_d2",
                "sup_d1_5",
                "sup_d2_3",
            ]),
            solve: Table::new(&["resolution", "p", "max_residual", "c_inf", "c_p"]),
            residuals: Table::new(&["resolution", "name", "value", "approximate"]),
            kernel: Table::new(&["resolution", "samples", "max_ratio", "near_bound", "support_violations", "pairs"]),
            sobolev: Table::new(&[
                "resolution",
                "p",
                "c_s",
                "p_star",
                "c_star",
                "max_local_ratio",
                "max_local_residual",
                "max_residual",
                "max_correction",
                "telescoping",
                "weighted_sum_ratio",
                "unweighted_sum_ratio",
                "max_spread",
                "sup_d2",
            ]),
            poincare: Table::new(&[
                "resolution",
                "q",
                "g",
                "ratio",
                "excluded",
                "approximate",
                "vanishing_ratio",
                "vanishing_holds",
            ]),
            constants: Table::new(&["resolution", "q", "c_hat"]),
            duality: Table::new(&[
                "resolution",
                "g",
                "p",
                "q",
                "pairing",
                "by_parts",
                "residual",
                "holder_lhs",
                "holder_rhs",
                "holder_holds",
                "bound",
                "slack",
                "closes",
            ]),
            bootstrap: Table::new(&[
                "resolution",
                "g",
                "q",
                "c1",
                "lhs",
                "middle",
                "rhs",
                "slack",
                "holds",
                "implied",
                "direct",
            ]),
        }
    }

    fn files(&self, last: Stage) -> Vec<(&'static str, &Table, Stage)> {
        let all = [
            ("domain.csv", &self.domain, Stage::Rasterize),
            ("whitney.csv", &self.whitney, Stage::Whitney),
            ("paths.csv", &self.paths, Stage::Paths),
            ("weight_report.csv", &self.weight, Stage::Weight),
            ("solve_report.csv", &self.solve, Stage::Solve),
            ("solve_residuals.csv", &self.residuals, Stage::Solve),
            ("kernel_bound.csv", &self.kernel, Stage::Solve),
            ("sobolev_report.csv", &self.sobolev, Stage::Sobolev),
            ("poincare.csv", &self.poincare, Stage::Poincare),
            ("poincare_constants.csv", &self.constants, Stage::Poincare),
            ("duality.csv", &self.duality, Stage::Poincare),
            ("bootstrap.csv", &self.bootstrap, Stage::Poincare),
        ];
        all.into_iter().filter(|(_, _, s)| *s <= last).collect()
    }
}

struct Run<'c> {
    cfg: &'c ExperimentConfig,
    out: PathBuf,
    tables: Tables,
    files: Vec<PathBuf>,
    failures: Vec<String>,
    constants: Vec<(String, String)>,
}

/// Runs the configured experiment on a pool of `cfg.threads` workers.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        std::fs::create_dir_all(&cfg.out)?;
        let mut run = Run {
            cfg,
            out: cfg.out.clone(),
            tables: Tables::new(),
            files: Vec::new(),
            failures: Vec::new(),
            constants: Vec::new(),
        };
        for &r in &cfg.resolutions {
            run.resolution(r)?;
        }
        if cfg.integrability {
            run.integrability()?;
        }
        let tables = std::mem::replace(&mut run.tables, Tables::new());
        for (name, table, _) in tables.files(cfg.stage) {
            let path = run.out.join(name);
            table.write(&path)?;
            run.files.push(path);
        }
        run.manifest()?;
        Ok(RunOutcome { out: run.out, files: run.files, failures: run.failures })
    })
}

fn note(msg: &str) {
    eprintln!("[divfield] {msg}");
}

impl Run<'_> {
    fn path(&mut self, name: String) -> PathBuf {
        let p = self.out.join(name);
        self.files.push(p.clone());
        p
    }

    fn record(&mut self, key: String, value: impl ToString) {
        self.constants.push((key, value.to_string()));
    }

    fn fail(&mut self, what: String) {
        note(&format!("FAILED {what}"));
        self.failures.push(what);
    }

    fn battery(&self, dom: &GridDomain) -> Vec<TestFunction> {
        if self.cfg.battery == "default" {
            default_battery(dom)
        } else {
            poincare_battery(dom)
        }
    }

    fn resolution(&mut self, r: usize) -> CliResult<()> {
        let cfg = self.cfg;
        note(&format!("{} at {r} cells/unit", cfg.domain));
        let dom = rasterize(&cfg.domain, r)?;
        self.rasterize_stage(r, &dom)?;
        if cfg.stage < Stage::Whitney {
            return Ok(());
        }
        let dec = decompose(&dom)?;
        let pou = partition_of_unity(&dom, &dec);
        self.whitney_stage(r, &dom, &dec, &pou)?;
        if cfg.stage < Stage::Paths {
            return Ok(());
        }
        let fam = build_family(&dom, &dec)?;
        self.paths_stage(r, &dom, &dec, &fam)?;
        if cfg.stage < Stage::Weight {
            return Ok(());
        }
        let opts = WeightOptions { y_stride: cfg.y_stride, x_stride: cfg.x_stride };
        let w = compute_weight(&dom, &dec, &fam, opts)?;
        self.weight_stage(r, &dom, &w)?;
        if cfg.stage < Stage::Solve {
            return Ok(());
        }
        let kernel = Kernel::new(&dom, &dec, &fam);
        let f = ScalarField::from_fn(&dom, |p| p[0]).mean_zero(&dom)?;
        let u = self.solve_stage(r, &kernel, &f, &w)?;
        if cfg.stage >= Stage::Sobolev {
            self.sobolev_stage(r, &kernel, &pou, &f, &w)?;
        }
        if cfg.stage >= Stage::Poincare {
            self.poincare_stage(r, &dom, &w, &f, &u)?;
        }
        Ok(())
    }

    fn rasterize_stage(&mut self, r: usize, dom: &GridDomain) -> CliResult<()> {
        self.tables.domain.push(vec![
            r.to_string(),
            num(dom.h()),
            dom.grid.nx.to_string(),
            dom.grid.ny.to_string(),
            dom.true_count().to_string(),
            num(dom.area()),
            num(dom.max_d()),
            num(dom.d[dom.x0]),
        ]);
        self.record(format!("r{r}.true_cells"), dom.true_count());
        let p = self.path(format!("r{r}_mask.pgm"));
        write_mask_pgm(&p, dom)?;
        let p = self.path(format!("r{r}_distance.csv"));
        field_table(dom, dom.true_cells().map(|c| (c, dom.d[c]))).write(&p)?;
        Ok(())
    }

    fn whitney_stage(
        &mut self,
        r: usize,
        dom: &GridDomain,
        dec: &WhitneyDecomposition,
        pou: &PartitionOfUnity,
    ) -> CliResult<()> {
        let rep = check(dom, dec);
        let grad = pou.gradient_bound(dom, dec);
        self.tables.whitney.push(vec![
            r.to_string(),
            rep.cubes.to_string(),
            num(rep.pass_fraction),
            rep.double_failures.to_string(),
            rep.quadruple_failures.to_string(),
            rep.bracket_failures.to_string(),
            rep.layer_cells.to_string(),
            num(rep.max_layer_distance),
            num(grad),
        ]);
        self.record(format!("r{r}.whitney.pass_fraction"), num(rep.pass_fraction));
        self.record(format!("r{r}.whitney.gradient_bound"), num(grad));
        let mut t = Table::new(&["j", "k", "cx", "cy", "l"]);
        for (j, c) in dec.cubes.iter().enumerate() {
            t.push(vec![j.to_string(), c.k.to_string(), num(c.center[0]), num(c.center[1]), num(c.side)]);
        }
        let p = self.path(format!("r{r}_cubes.csv"));
        t.write(&p)?;
        let mut svg = Svg::for_domain(dom, 800.0);
        svg.mask(dom, "#dddddd");
        for (c, chk) in dec.cubes.iter().zip(&rep.per_cube) {
            let half = 0.5 * c.side;
            let stroke = if chk.passes() { "#1f4e9c" } else { "#c0392b" };
            svg.rect([c.center[0] - half, c.center[1] + half], c.side, c.side, "none", stroke);
        }
        let p = self.path(format!("r{r}_cubes.svg"));
        svg.save(&p)
    }

    fn paths_stage(&mut self, r: usize, dom: &GridDomain, dec: &WhitneyDecomposition, fam: &PathFamily) -> CliResult<()> {
        let cfg = self.cfg;
        let g = verify_gamma(fam, dom, dec, cfg.path_samples, cfg.seed);
        let rho = verify_rho(fam, dom, dec, cfg.path_samples, cfg.seed);
        let (ahlfors, length, detours) = match &g {
            Ok(g) => (num(g.ahlfors), num(g.length_ratio), g.detours.to_string()),
            Err(e) => {
                self.fail(format!("r{r} paths: {e}"));
                ("n/a".into(), "n/a".into(), "n/a".into())
            }
        };
        self.tables.paths.push(vec![
            r.to_string(),
            cfg.path_samples.to_string(),
            ahlfors.clone(),
            length.clone(),
            detours,
            rho.points.to_string(),
            rho.rho_violations.to_string(),
            rho.alpha_violations.to_string(),
            num(rho.max_alpha),
        ]);
        self.record(format!("r{r}.paths.ahlfors"), ahlfors);
        self.record(format!("r{r}.paths.length_ratio"), length);
        if rho.rho_violations > 0 {
            self.fail(format!("r{r} paths: rho <= d/5 violated at {} points", rho.rho_violations));
        }
        if rho.alpha_violations > 0 {
            self.fail(format!("r{r} paths: alpha <= 1/5 violated on {} traces", rho.alpha_violations));
        }
        let mut t = Table::new(&["j", "l_path", "dgeo"]);
        for (j, c) in dec.cubes.iter().enumerate() {
            let dgeo = dom.cell_index(c.center).map_or(f64::NAN, |k| dom.dgeo[k]);
            t.push(vec![j.to_string(), num(fam.length[j]), num(dgeo)]);
        }
        let p = self.path(format!("r{r}_paths.csv"));
        t.write(&p)?;
        let mut svg = Svg::for_domain(dom, 800.0);
        svg.mask(dom, "#dddddd");
        let n = dec.cubes.len();
        let picks = 16.min(n);
        for k in 0..picks {
            let j = k * n / picks.max(1);
            svg.polyline(&fam.cube_path(j, dec.cubes[j].center), "#1f4e9c", 1.5);
        }
        svg.circle(dom.x0_point(), 4.0, "#c0392b");
        let p = self.path(format!("r{r}_paths.svg"));
        svg.save(&p)
    }

    fn weight_stage(&mut self, r: usize, dom: &GridDomain, w: &WeightField) -> CliResult<()> {
        let cutoff = default_cutoff(dom);
        let total = w.cells.len().max(1);
        let lower = w
            .iter()
            .filter(|&(c, o)| o >= 0.9 * std::f64::consts::PI * 0.25 * dom.d[c] * dom.d[c])
            .count() as f64
            / total as f64;
        let mut row = vec![r.to_string(), w.options.y_stride.to_string(), w.options.x_stride.to_string()];
        match diagnostics(w, dom, cutoff) {
            Ok(rep) => {
                row.extend([
                    num(rep.integral),
                    num(rep.c_low),
                    num(rep.w_max),
                    num(lower),
                    num(rep.fit_cutoff),
                    num(rep.fit.slope),
                    num(rep.fit.intercept),
                    num(rep.fit.r2),
                    rep.fit.cells.to_string(),
                ]);
                self.record(format!("r{r}.weight.integral"), num(rep.integral));
                self.record(format!("r{r}.weight.slope"), num(rep.fit.slope));
            }
            Err(Error::FitRefused(n)) => {
                note(&format!("power fit refused ({n} cells under the cutoff)"));
                let integral: f64 = w.iter().map(|(c, o)| o / dom.d[c] * w.x_area).sum();
                row.extend([num(integral), "n/a".into(), "n/a".into(), num(lower), num(cutoff)]);
                row.extend(["n/a".to_string(), "n/a".into(), "n/a".into(), n.to_string()]);
            }
            Err(e) => return Err(e.into()),
        }
        row.extend([num(sup_ratio(w, dom, 2.0, cutoff)), num(sup_ratio(w, dom, 1.5, cutoff)), num(sup_ratio(w, dom, 2.0 / 3.0, cutoff))]);
        self.tables.weight.push(row);
        self.record(format!("r{r}.weight.lower_fraction"), num(lower));
        let dense = w.dense(dom.len());
        let p = self.path(format!("r{r}_weight.csv"));
        field_table(dom, w.iter()).write(&p)?;
        let p = self.path(format!("r{r}_weight.pgm"));
        write_log_heat_pgm(&p, dom, &dense)
    }

    fn solve_stage(
        &mut self,
        r: usize,
        kernel: &Kernel<'_>,
        f: &ScalarField,
        w: &WeightField,
    ) -> CliResult<divfield::field::VectorField> {
        let cfg = self.cfg;
        let dom = kernel.dom;
        let battery = default_battery(dom);
        let (u, rep) = solve_divergence(kernel, f, w, f64::INFINITY, &battery)?;
        for res in &rep.residuals {
            self.tables.residuals.push(vec![r.to_string(), res.name.clone(), num(res.value), res.approximate.to_string()]);
        }
        self.tables.solve.push(vec![r.to_string(), "inf".into(), num(rep.max_residual), num(rep.c_inf), num(rep.c_p)]);
        self.record(format!("r{r}.solve.max_residual"), num(rep.max_residual));
        self.record(format!("r{r}.solve.c_inf"), num(rep.c_inf));
        for &p in &cfg.p {
            let rp = solve_report(dom, f, &u, w, p, &battery)?;
            self.tables.solve.push(vec![r.to_string(), num(p), num(rp.max_residual), num(rp.c_inf), num(rp.c_p)]);
        }
        if cfg.kernel_samples > 0 {
            let samples = interior_samples(dom, cfg.kernel_samples, cfg.seed);
            let opts = WeightOptions { y_stride: cfg.y_stride, x_stride: 1 };
            let ws = compute_weight_at(dom, kernel.dec, kernel.fam, opts, &samples)?;
            let kb = kernel.abs_integral(&ws.cells, cfg.y_stride)?;
            let max_ratio = kb.max_ratio(dom, &ws);
            self.tables.kernel.push(vec![
                r.to_string(),
                ws.cells.len().to_string(),
                num(max_ratio),
                num(kb.near_bound),
                kb.support_violations.to_string(),
                kb.pairs.to_string(),
            ]);
            self.record(format!("r{r}.kernel.max_ratio"), num(max_ratio));
            if kb.support_violations > 0 {
                self.fail(format!("r{r} kernel: far part nonzero off its support at {} pairs", kb.support_violations));
            }
        }
        let p = self.path(format!("r{r}_u.csv"));
        vector_table(dom, &u.values).write(&p)?;
        let p = self.path(format!("r{r}_u.svg"));
        quiver(dom, &u.values).save(&p)?;
        Ok(u)
    }

    fn sobolev_stage(
        &mut self,
        r: usize,
        kernel: &Kernel<'_>,
        pou: &PartitionOfUnity,
        f: &ScalarField,
        w: &WeightField,
    ) -> CliResult<()> {
        let cfg = self.cfg;
        let dom = kernel.dom;
        let dec = kernel.dec;
        let cmp = weight_comparability(dom, dec, w);
        let battery = default_battery(dom);
        let mut t = Table::new(&["j", "l", "p", "gradient_ratio", "residual", "omega_j", "low", "high"]);
        let by_cube: std::collections::HashMap<usize, _> = cmp.cubes.iter().map(|c| (c.cube, *c)).collect();
        for &p in &cfg.p {
            let opts = SobolevOptions { p, atomic: AtomicOptions { mean_tolerance: cfg.atomic_mean_tolerance } };
            match solve_sobolev(kernel, pou, f, w, opts, &battery) {
                Ok((_, rep)) => {
                    self.tables.sobolev.push(vec![
                        r.to_string(),
                        num(p),
                        opt(rep.c_s),
                        opt(rep.p_star),
                        opt(rep.c_star),
                        num(rep.max_local_ratio),
                        num(rep.max_local_residual),
                        num(rep.max_residual),
                        num(rep.max_correction),
                        num(rep.telescoping),
                        num(rep.weighted_sum_ratio),
                        num(rep.unweighted_sum_ratio),
                        num(cmp.max_spread),
                        num(cmp.sup_ratio),
                    ]);
                    self.record(format!("r{r}.sobolev.p{p}.c_s"), opt(rep.c_s));
                    self.record(format!("r{r}.sobolev.p{p}.max_residual"), num(rep.max_residual));
                    let scale = f.max_abs(dom).max(f64::MIN_POSITIVE);
                    if rep.telescoping > 1e-9 * scale {
                        self.fail(format!("r{r} sobolev: pieces do not telescope ({:e})", rep.telescoping));
                    }
                    for l in &rep.local {
                        let cw = by_cube.get(&l.cube);
                        t.push(vec![
                            l.cube.to_string(),
                            num(dec.cubes[l.cube].side),
                            num(p),
                            num(l.gradient_ratio),
                            num(l.residual),
                            opt(cw.map(|c| c.omega)),
                            opt(cw.map(|c| c.low)),
                            opt(cw.map(|c| c.high)),
                        ]);
                    }
                }
                Err(e) => self.fail(format!("r{r} sobolev p={p}: {e}")),
            }
        }
        let path = self.path(format!("r{r}_sobolev_cubes.csv"));
        t.write(&path)
    }

    fn poincare_stage(
        &mut self,
        r: usize,
        dom: &GridDomain,
        w: &WeightField,
        f: &ScalarField,
        u: &divfield::field::VectorField,
    ) -> CliResult<()> {
        let cfg = self.cfg;
        let battery = self.battery(dom);
        let n = dom.true_count();
        for tf in &battery {
            let s = tf.sample(dom);
            let lam = median_level(dom, &s.values);
            let below = dom.true_cells().filter(|&c| s.values[c] <= lam).count();
            let above = dom.true_cells().filter(|&c| s.values[c] >= lam).count();
            if 2 * below < n || 2 * above < n {
                self.fail(format!("r{r} poincare: median level of {} splits {below}/{above} of {n}", s.name));
            }
        }
        for &q in &cfg.q {
            let rep = poincare_constant(dom, w, q, &battery)?;
            for e in &rep.entries {
                self.tables.poincare.push(vec![
                    r.to_string(),
                    num(q),
                    e.name.clone(),
                    opt(e.ratio),
                    e.excluded.clone().unwrap_or_default(),
                    e.approximate.to_string(),
                    opt(e.vanishing.map(|v| v.ratio)),
                    e.vanishing.map_or_else(|| "n/a".into(), |v| v.holds.to_string()),
                ]);
            }
            self.tables.constants.push(vec![r.to_string(), num(q), num(rep.c_hat)]);
            self.record(format!("r{r}.poincare.q{q}.c_hat"), num(rep.c_hat));
        }
        let check_battery = default_battery(dom);
        let mut exps = vec![f64::INFINITY];
        exps.extend(cfg.p.iter().copied());
        for p in exps {
            let rep = solve_report(dom, f, u, w, p, &check_battery)?;
            for g in &battery {
                let d = duality_check(dom, w, f, u, rep.c_p, g, p)?;
                self.tables.duality.push(vec![
                    r.to_string(),
                    g.name(),
                    num(p),
                    num(d.q),
                    num(d.pairing),
                    num(d.by_parts),
                    num(d.residual),
                    num(d.holder_lhs),
                    num(d.holder_rhs),
                    d.holder_holds.to_string(),
                    num(d.bound),
                    num(d.slack),
                    d.closes.to_string(),
                ]);
                if !d.holder_holds {
                    self.fail(format!("r{r} duality: discrete Hoelder fails for {} at p={p}", g.name()));
                }
                if !d.closes {
                    self.fail(format!("r{r} duality: chain does not close for {} at p={p}", g.name()));
                }
            }
        }
        for g in &battery {
            let s = g.sample(dom);
            if 2 * dom.true_cells().filter(|&c| s.values[c] == 0.0).count() < n {
                continue;
            }
            for &q in &cfg.q {
                let b = bootstrap_check(dom, w, &s, q)?;
                self.tables.bootstrap.push(vec![
                    r.to_string(),
                    b.name.clone(),
                    num(q),
                    num(b.c1),
                    num(b.lhs),
                    num(b.middle),
                    num(b.rhs),
                    num(b.slack),
                    b.holds.to_string(),
                    num(b.implied),
                    num(b.direct),
                ]);
                if !b.holds {
                    self.fail(format!("r{r} bootstrap: negative slack for {} at q={q}", b.name));
                }
            }
        }
        Ok(())
    }

    fn integrability(&mut self) -> CliResult<()> {
        let cfg = self.cfg;
        let rep = integrability_probe(&cfg.domain, &cfg.resolutions, EPS_STAB, EPS_GROW)?;
        let mut t = Table::new(&["resolution", "sum", "ratio", "verdict"]);
        for (k, (&r, &s)) in rep.resolutions.iter().zip(&rep.sums).enumerate() {
            let ratio = if k == 0 { "n/a".to_string() } else { num(rep.ratios[k - 1]) };
            t.push(vec![r.to_string(), num(s), ratio, rep.verdict.to_string()]);
        }
        self.record("integrability.verdict".into(), rep.verdict);
        let p = self.path("integrability.csv".into());
        t.write(&p)
    }

    fn manifest(&mut self) -> CliResult<()> {
        let cfg = self.cfg;
        let mut s = String::new();
        s.push_str(&format!("config_hash = {}\n", cfg.hash()));
        s.push_str(&format!("divfield_version = {}\n", divfield_version()));
        s.push_str(&format!("divfield_cli_version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("status = {}\n", if self.failures.is_empty() { "pass" } else { "fail" }));
        for f in &self.failures {
            s.push_str(&format!("failure = {f}\n"));
        }
        s.push_str("\n[config]\n");
        s.push_str(&cfg.canonical());
        s.push_str("\n[constants]\n");
        for (k, v) in &self.constants {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str("\n[files]\n");
        let mut names: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        names.sort();
        for n in names {
            s.push_str(&format!("{n}\n"));
        }
        let p = self.out.join("manifest.txt");
        std::fs::write(&p, s)?;
        self.files.push(p);
        Ok(())
    }
}

fn divfield_version() -> &'static str {
    // Both crates share the workspace version.
    env!("CARGO_PKG_VERSION")
}

/// Arrows of `u` on a coarse lattice, scaled to the lattice spacing.
fn quiver(dom: &GridDomain, u: &[[f64; 2]]) -> Svg {
    let g = dom.grid;
    let stride = (g.nx.max(g.ny) / 32).max(1);
    let umax = dom.true_cells().map(|c| u[c][0].hypot(u[c][1])).fold(0.0, f64::max);
    let scale = if umax > 0.0 { 0.9 * stride as f64 * g.h / umax } else { 0.0 };
    let mut svg = Svg::for_domain(dom, 800.0);
    svg.mask(dom, "#eeeeee");
    for j in (stride / 2..g.ny).step_by(stride) {
        for i in (stride / 2..g.nx).step_by(stride) {
            let c = g.index(i, j);
            if !dom.mask[c] {
                continue;
            }
            let p = g.center(c);
            let q = [p[0] + scale * u[c][0], p[1] + scale * u[c][1]];
            svg.polyline(&[p, q], "#1f4e9c", 1.0);
            svg.circle(q, 1.2, "#1f4e9c");
        }
    }
    svg
}

/// Paths of the per-resolution artifacts, for tests and the report.
pub fn artifact(dir: &Path, resolution: usize, name: &str) -> PathBuf {
    dir.join(format!("r{resolution}_{name}"))
}
