//! Test functions with gradients, shared by the residual, Poincaré and
//! duality checks.

use std::f64::consts::PI;

use crate::domain::GridDomain;
use crate::field::fd_gradient;
use crate::grid::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `X^a Y^b` in coordinates centred on the box and scaled by its half
    /// extent.
    Monomial { a: u32, b: u32 },
    /// `exp(-|x - center|^2 / width^2)`.
    Gaussian { center: Point, width: f64 },
    /// `(dgeo - r0)_+`, gradient by finite differences.
    GeodesicRamp { r0: f64 },
    /// `sin(pi X) sin(pi Y)` in the box coordinates.
    SineProduct,
    /// Arbitrary per-cell values with a finite-difference gradient.
    Samples { name: String, values: Vec<f64> },
}

/// A test function sampled on the true cells (zero elsewhere).
#[derive(Debug, Clone)]
pub struct Sampled {
    pub name: String,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    /// Gradient obtained by finite differences.
    pub approximate: bool,
}

impl Sampled {
    pub fn max_abs(&self, dom: &GridDomain) -> f64 {
        dom.true_cells().map(|c| self.values[c].abs()).fold(0.0, f64::max)
    }

    pub fn max_grad(&self, dom: &GridDomain) -> f64 {
        dom.true_cells().map(|c| self.grads[c][0].hypot(self.grads[c][1])).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite()) && self.grads.iter().all(|g| g[0].is_finite() && g[1].is_finite())
    }
}

/// Box center and half extent used by the polynomial coordinates.
fn box_frame(dom: &GridDomain) -> (Point, f64) {
    let b = dom.grid.bbox();
    let c = [(b.min[0] + b.max[0]) / 2.0, (b.min[1] + b.max[1]) / 2.0];
    (c, 0.5 * b.width().max(b.height()))
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            TestFunction::Monomial { a, b } => format!("mono_{a}_{b}"),
            TestFunction::Gaussian { center, width } => {
                format!("gauss_{:.3}_{:.3}_{:.3}", center[0], center[1], width)
            }
            TestFunction::GeodesicRamp { r0 } => format!("geo_ramp_{r0:.4}"),
            TestFunction::SineProduct => "sine_product".into(),
            TestFunction::Samples { name, .. } => name.clone(),
        }
    }

    pub fn sample(&self, dom: &GridDomain) -> Sampled {
        let n = dom.len();
        let (c, s) = box_frame(dom);
        let analytic = |f: &dyn Fn(Point) -> (f64, [f64; 2])| {
            let mut values = vec![0.0; n];
            let mut grads = vec![[0.0; 2]; n];
            for k in dom.true_cells() {
                let (v, g) = f(dom.grid.center(k));
                values[k] = v;
                grads[k] = g;
            }
            (values, grads)
        };
        let (values, grads, approximate) = match self {
            TestFunction::Monomial { a, b } => {
                let (a, b) = (*a as i32, *b as i32);
                let (v, g) = analytic(&|p| {
                    let x = (p[0] - c[0]) / s;
                    let y = (p[1] - c[1]) / s;
                    let v = x.powi(a) * y.powi(b);
                    let gx = if a > 0 { a as f64 * x.powi(a - 1) * y.powi(b) / s } else { 0.0 };
                    let gy = if b > 0 { b as f64 * x.powi(a) * y.powi(b - 1) / s } else { 0.0 };
                    (v, [gx, gy])
                });
                (v, g, false)
            }
            TestFunction::Gaussian { center, width } => {
                let (v, g) = analytic(&|p| {
                    let dx = p[0] - center[0];
                    let dy = p[1] - center[1];
                    let e = (-(dx * dx + dy * dy) / (width * width)).exp();
                    let k = -2.0 / (width * width) * e;
                    (e, [k * dx, k * dy])
                });
                (v, g, false)
            }
            TestFunction::SineProduct => {
                let (v, g) = analytic(&|p| {
                    let x = PI * (p[0] - c[0]) / s;
                    let y = PI * (p[1] - c[1]) / s;
                    (x.sin() * y.sin(), [PI / s * x.cos() * y.sin(), PI / s * x.sin() * y.cos()])
                });
                (v, g, false)
            }
            TestFunction::GeodesicRamp { r0 } => {
                let mut values = vec![0.0; n];
                for k in dom.true_cells() {
                    values[k] = (dom.dgeo[k] - r0).max(0.0);
                }
                let grads = fd_gradient(dom, &values);
                (values, grads, true)
            }
            TestFunction::Samples { values, .. } => {
                let mut values = values.clone();
                for (v, &m) in values.iter_mut().zip(&dom.mask) {
                    if !m {
                        *v = 0.0;
                    }
                }
                let grads = fd_gradient(dom, &values);
                (values, grads, true)
            }
        };
        Sampled { name: self.name(), values, grads, approximate }
    }
}

/// Monomials of total degree at most 3, two Gaussian bumps and the
/// geodesic ramp `(dgeo - d(x0)/2)_+`.
pub fn default_battery(dom: &GridDomain) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for deg in 0..=3u32 {
        for a in (0..=deg).rev() {
            out.push(TestFunction::Monomial { a, b: deg - a });
        }
    }
    let x0 = dom.x0_point();
    let dx0 = dom.d[dom.x0];
    out.push(TestFunction::Gaussian { center: x0, width: 0.5 * dx0 });
    let far = dom
        .true_cells()
        .filter(|&c| dom.d[c] >= 0.5 * dx0)
        .max_by(|&a, &b| dom.dgeo[a].total_cmp(&dom.dgeo[b]).then(b.cmp(&a)))
        .unwrap_or(dom.x0);
    out.push(TestFunction::Gaussian { center: dom.grid.center(far), width: 0.5 * dom.d[far] });
    out.push(TestFunction::GeodesicRamp { r0: 0.5 * dx0 });
    out
}
