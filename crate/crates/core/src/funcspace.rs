//! Discretized histories on `[-h, 0]`.
//!
//! Every function is stored by its values at the Chebyshev–Lobatto points
//! mapped to `[-h, 0]` (one polynomial of degree `N` per component).
//! Evaluation is barycentric, differentiation uses the collocation matrix and
//! integration the Clenshaw–Curtis rule on the same nodes.
//!
//! The norm on `R^n` is the componentwise maximum, so `|chi|` is the largest
//! sup norm over the components.

use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default inflation applied to oversampled sup norms when an upper bound is needed.
pub const DEFAULT_SAFETY: f64 = 1.0 + 1e-6;

/// Relative slack accepted at the ends of `[-h, 0]` before `eval` reports a domain error.
const ENDPOINT_SLACK: f64 = 1e-12;

fn default_safety() -> f64 {
    DEFAULT_SAFETY
}

/// Parameters of a collocation grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// History length.
    pub h: f64,
    /// State dimension.
    pub n: usize,
    /// Polynomial degree per component.
    pub degree: usize,
    /// Number of uniform points used to estimate sup norms.
    pub oversample: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

impl GridSpec {
    pub fn new(h: f64, n: usize, degree: usize) -> Self {
        Self {
            h,
            n,
            degree,
            oversample: 8 * degree,
            safety: DEFAULT_SAFETY,
        }
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "h must be positive, got {}",
                self.h
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidGrid("n must be at least 1".into()));
        }
        if self.degree < 4 {
            return Err(Error::InvalidGrid(format!(
                "degree must be at least 4, got {}",
                self.degree
            )));
        }
        if self.oversample < 8 * self.degree {
            return Err(Error::InvalidGrid(format!(
                "oversample {} below 8 * degree = {}",
                self.oversample,
                8 * self.degree
            )));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "safety factor must be >= 1, got {}",
                self.safety
            )));
        }
        Ok(())
    }

    pub fn build(self) -> Result<Grid> {
        Grid::new(self)
    }
}

/// A built grid: nodes, barycentric weights, differentiation matrix,
/// quadrature weights and the oversampling matrix. Cheap to clone.
#[derive(Clone)]
pub struct Grid(Arc<GridData>);

struct GridData {
    spec: GridSpec,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    diff: Vec<f64>,
    quad: Vec<f64>,
    fine: Vec<f64>,
    fine_interp: Vec<f64>,
    scalar: OnceLock<Grid>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.0.spec;
        write!(
            f,
            "Grid(h={}, n={}, N={}, M={})",
            s.h, s.n, s.degree, s.oversample
        )
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let deg = spec.degree;
        let len = deg + 1;
        let h = spec.h;
        let nf = deg as f64;
        let pi = std::f64::consts::PI;

        // x_j = -cos(j pi / N) written in the symmetric sine form.
        let xs: Vec<f64> = (0..len)
            .map(|j| (pi * (2.0 * j as f64 - nf) / (2.0 * nf)).sin())
            .collect();
        let nodes: Vec<f64> = xs.iter().map(|x| 0.5 * h * (x - 1.0)).collect();

        let mut bary: Vec<f64> = (0..len)
            .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        bary[0] *= 0.5;
        bary[deg] *= 0.5;

        // t_i - t_j from the product formula, avoids cancellation.
        let gap = |i: usize, j: usize| -> f64 {
            let a = (i + j) as f64 * pi / (2.0 * nf);
            let b = (i as f64 - j as f64) * pi / (2.0 * nf);
            h * a.sin() * b.sin()
        };
        let mut diff = vec![0.0; len * len];
        for i in 0..len {
            let mut row_sum = 0.0;
            for j in 0..len {
                if i != j {
                    let v = (bary[j] / bary[i]) / gap(i, j);
                    diff[i * len + j] = v;
                    row_sum += v;
                }
            }
            diff[i * len + i] = -row_sum;
        }

        let quad = clenshaw_curtis(deg)
            .into_iter()
            .map(|w| 0.5 * h * w)
            .collect::<Vec<_>>();

        let m = spec.oversample;
        let fine: Vec<f64> = (0..m)
            .map(|i| -h + h * i as f64 / (m - 1) as f64)
            .map(|t| t.min(0.0))
            .collect();
        let mut fine_interp = Vec::with_capacity(m * len);
        for &t in &fine {
            fine_interp.extend(lagrange_row(&nodes, &bary, t));
        }

        Ok(Grid(Arc::new(GridData {
            spec,
            nodes,
            bary,
            diff,
            quad,
            fine,
            fine_interp,
            scalar: OnceLock::new(),
        })))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.0.spec
    }

    pub fn h(&self) -> f64 {
        self.0.spec.h
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.0.spec.n
    }

    pub fn degree(&self) -> usize {
        self.0.spec.degree
    }

    /// Number of nodes per component, `N + 1`.
    pub fn len(&self) -> usize {
        self.0.spec.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn safety(&self) -> f64 {
        self.0.spec.safety
    }

    /// Nodes in increasing order; the first is `-h`, the last is `0`.
    pub fn nodes(&self) -> &[f64] {
        &self.0.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.0.quad
    }

    pub fn fine_points(&self) -> &[f64] {
        &self.0.fine
    }

    /// Row `i` of the differentiation matrix.
    pub fn diff_row(&self, i: usize) -> &[f64] {
        let len = self.len();
        &self.0.diff[i * len..(i + 1) * len]
    }

    /// True if both handles describe the same discretization.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }

    /// The grid with the same `h`, `N`, `M` and a single component.
    pub fn scalar(&self) -> Grid {
        if self.n() == 1 {
            return self.clone();
        }
        self.0
            .scalar
            .get_or_init(|| {
                let mut spec = self.0.spec;
                spec.n = 1;
                Grid::new(spec).expect("scalar companion of a valid grid")
            })
            .clone()
    }

    /// The same grid with `n` components.
    pub fn with_dim(&self, n: usize) -> Result<Grid> {
        if n == self.n() {
            return Ok(self.clone());
        }
        if n == 1 {
            return Ok(self.scalar());
        }
        let mut spec = self.0.spec;
        spec.n = n;
        Grid::new(spec)
    }

    fn check_t(&self, t: f64) -> Result<f64> {
        let h = self.h();
        let slack = ENDPOINT_SLACK * h;
        if !t.is_finite() || t < -h - slack || t > slack {
            return Err(Error::Domain(format!("t = {t} outside [-{h}, 0]")));
        }
        Ok(t.clamp(-h, 0.0))
    }

    /// Values of the Lagrange basis at `t` (a unit vector at nodes).
    pub fn lagrange_weights(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.check_t(t)?;
        Ok(lagrange_row(&self.0.nodes, &self.0.bary, t))
    }

    fn eval_slice(&self, values: &[f64], t: f64) -> f64 {
        let nodes = &self.0.nodes;
        let bary = &self.0.bary;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..nodes.len() {
            let d = t - nodes[j];
            if d == 0.0 {
                return values[j];
            }
            let c = bary[j] / d;
            num += c * values[j];
            den += c;
        }
        num / den
    }

    fn fine_values(&self, values: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let len = self.len();
        let values = values.to_vec();
        self.0
            .fine_interp
            .chunks(len)
            .map(move |row| row.iter().zip(&values).map(|(a, b)| a * b).sum())
    }

    /// Maximum of `sign * p` over `[-h, 0]` for the polynomial with nodal values `values`.
    ///
    /// Scans the nodes and the oversampling grid, then polishes every discrete
    /// local maximum close to the best one by golden-section search.
    fn extremum(&self, values: &[f64], sign: f64) -> f64 {
        let mut best = values
            .iter()
            .map(|v| sign * v)
            .fold(f64::NEG_INFINITY, f64::max);
        let fine: Vec<f64> = self.fine_values(values).map(|v| sign * v).collect();
        for &v in &fine {
            best = best.max(v);
        }
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let lowest = fine.iter().cloned().fold(f64::INFINITY, f64::min);
        if best - lowest <= 1e-14 * scale {
            // Constant up to roundoff.
            return best;
        }
        let threshold = best - 1e-3 * (best - lowest);
        let pts = &self.0.fine;
        for i in 1..fine.len() - 1 {
            let peak = fine[i] >= fine[i - 1]
                && fine[i] >= fine[i + 1]
                && (fine[i] > fine[i - 1] || fine[i] > fine[i + 1]);
            if peak && fine[i] >= threshold {
                let peak = golden_max(
                    |t| sign * self.eval_slice(values, t),
                    pts[i - 1],
                    pts[i + 1],
                );
                best = best.max(peak);
            }
        }
        best
    }
}

fn lagrange_row(nodes: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    if let Some(j) = nodes.iter().position(|&x| x == t) {
        row[j] = 1.0;
        return row;
    }
    let mut den = 0.0;
    for j in 0..nodes.len() {
        let c = bary[j] / (t - nodes[j]);
        row[j] = c;
        den += c;
    }
    for c in &mut row {
        *c /= den;
    }
    row
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = f(a).max(f(b));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    best = best.max(fc).max(fd);
    best
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the nodes `cos(k pi / N)`.
fn clenshaw_curtis(deg: usize) -> Vec<f64> {
    let nf = deg as f64;
    let pi = std::f64::consts::PI;
    (0..=deg)
        .map(|k| {
            let theta = k as f64 * pi / nf;
            let mut s = 0.0;
            for j in 1..=deg / 2 {
                let b = if 2 * j == deg { 1.0 } else { 2.0 };
                let jf = j as f64;
                s += b / (4.0 * jf * jf - 1.0) * (2.0 * jf * theta).cos();
            }
            let c = if k == 0 || k == deg { 1.0 } else { 2.0 };
            c / nf * (1.0 - s)
        })
        .collect()
}

/// An element of `C([-h,0], R^n)` given by nodal values.
#[derive(Clone)]
pub struct C0Fn {
    grid: Grid,
    values: Vec<f64>,
}

impl fmt::Debug for C0Fn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("C0Fn")
            .field("grid", &self.grid)
            .field("values", &self.values)
            .finish()
    }
}

impl C0Fn {
    /// Component-major nodal values: `values[nu * (N+1) + j]`.
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.n() * grid.len();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} nodal values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite nodal value {v}"
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n() * grid.len()],
        }
    }

    /// Samples `f` at the nodes, the same map for every component.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_components(grid, |_, t| f(t))
    }

    /// Samples `f(nu, t)` at the nodes.
    pub fn from_components(grid: &Grid, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n() * grid.len());
        for nu in 0..grid.n() {
            values.extend(grid.nodes().iter().map(|&t| f(nu, t)));
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Truncated Chebyshev series in `x = 1 + 2t/h`, one coefficient list per component.
    pub fn from_chebyshev(grid: &Grid, coeffs: &[Vec<f64>]) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::Shape(format!(
                "{} coefficient lists for {} components",
                coeffs.len(),
                grid.n()
            )));
        }
        let h = grid.h();
        Ok(Self::from_components(grid, |nu, t| {
            let x = (1.0 + 2.0 * t / h).clamp(-1.0, 1.0);
            let theta = x.acos();
            coeffs[nu]
                .iter()
                .enumerate()
                .map(|(k, a)| a * (k as f64 * theta).cos())
                .sum()
        }))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, nu: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[nu * len..(nu + 1) * len]
    }

    pub fn check_same_grid(&self, other: &C0Fn) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.grid.check_t(t)?;
        Ok((0..self.n())
            .map(|nu| self.grid.eval_slice(self.component(nu), t))
            .collect())
    }

    pub fn eval_component(&self, nu: usize, t: f64) -> Result<f64> {
        let t = self.grid.check_t(t)?;
        Ok(self.grid.eval_slice(self.component(nu), t))
    }

    /// Value at `t = 0`.
    pub fn at_zero(&self) -> Vec<f64> {
        let last = self.grid.degree();
        (0..self.n()).map(|nu| self.component(nu)[last]).collect()
    }

    /// Sup norm of one component.
    pub fn component_sup(&self, nu: usize) -> f64 {
        let c = self.component(nu);
        self.grid
            .extremum(c, 1.0)
            .max(self.grid.extremum(c, -1.0))
            .abs()
    }

    /// `max_t chi_nu(t)`.
    pub fn max_value(&self, nu: usize) -> f64 {
        self.grid.extremum(self.component(nu), 1.0)
    }

    /// `min_t chi_nu(t)`.
    pub fn min_value(&self, nu: usize) -> f64 {
        -self.grid.extremum(self.component(nu), -1.0)
    }

    /// `|chi| = max_t max_nu |chi_nu(t)|`.
    pub fn sup_norm(&self) -> f64 {
        (0..self.n())
            .map(|nu| self.component_sup(nu))
            .fold(0.0, f64::max)
    }

    /// Sup norm inflated by the grid's safety factor.
    pub fn sup_norm_upper(&self) -> f64 {
        self.sup_norm() * self.grid.safety()
    }

    /// Componentwise Clenshaw–Curtis integral over `[-h, 0]`.
    pub fn integrate(&self) -> Vec<f64> {
        let w = self.grid.quad_weights();
        (0..self.n())
            .map(|nu| self.component(nu).iter().zip(w).map(|(v, w)| v * w).sum())
            .collect()
    }

    /// `a * x + b * y`.
    pub fn lincomb(a: f64, x: &C0Fn, b: f64, y: &C0Fn) -> Result<C0Fn> {
        x.check_same_grid(y)?;
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Ok(C0Fn {
            grid: x.grid.clone(),
            values,
        })
    }

    pub fn scale(&self, a: f64) -> C0Fn {
        C0Fn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sub(&self, other: &C0Fn) -> Result<C0Fn> {
        C0Fn::lincomb(1.0, self, -1.0, other)
    }

    pub fn add(&self, other: &C0Fn) -> Result<C0Fn> {
        C0Fn::lincomb(1.0, self, 1.0, other)
    }

    /// Nodal-value map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> C0Fn {
        C0Fn {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_data(&self) -> FnData {
        FnData {
            grid: *self.grid.spec(),
            values: (0..self.n())
                .map(|nu| self.component(nu).to_vec())
                .collect(),
        }
    }
}

/// An element of `C^1([-h,0], R^n)`.
///
/// Same storage as [`C0Fn`]; the polynomial interpolant of nodal data is
/// smooth, so every `C0Fn` can be read as a `C1Fn` via [`C1Fn::from_c0`].
/// Dereferences to the inclusion `I_n phi`.
#[derive(Clone)]
pub struct C1Fn(C0Fn);

impl fmt::Debug for C1Fn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("C1Fn")
            .field("grid", &self.0.grid)
            .field("values", &self.0.values)
            .finish()
    }
}

impl Deref for C1Fn {
    type Target = C0Fn;

    fn deref(&self) -> &C0Fn {
        &self.0
    }
}

impl C1Fn {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        C0Fn::new(grid, values).map(C1Fn)
    }

    pub fn zeros(grid: &Grid) -> Self {
        C1Fn(C0Fn::zeros(grid))
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        C1Fn(C0Fn::from_fn(grid, f))
    }

    pub fn from_components(grid: &Grid, f: impl Fn(usize, f64) -> f64) -> Self {
        C1Fn(C0Fn::from_components(grid, f))
    }

    /// Alias of [`C1Fn::from_fn`].
    pub fn from_samples(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, f)
    }

    pub fn from_chebyshev(grid: &Grid, coeffs: &[Vec<f64>]) -> Result<Self> {
        C0Fn::from_chebyshev(grid, coeffs).map(C1Fn)
    }

    pub fn from_c0(f: C0Fn) -> Self {
        C1Fn(f)
    }

    /// The inclusion `I_n`.
    pub fn as_c0(&self) -> &C0Fn {
        &self.0
    }

    pub fn into_c0(self) -> C0Fn {
        self.0
    }

    /// `∂phi`, applied componentwise.
    pub fn deriv(&self) -> C0Fn {
        let grid = &self.0.grid;
        let len = grid.len();
        let mut values = Vec::with_capacity(self.0.values.len());
        for nu in 0..grid.n() {
            let c = self.0.component(nu);
            for i in 0..len {
                values.push(grid.diff_row(i).iter().zip(c).map(|(a, b)| a * b).sum());
            }
        }
        C0Fn {
            grid: grid.clone(),
            values,
        }
    }

    /// `phi'(0)`, one entry per component.
    pub fn deriv_at_zero(&self) -> Vec<f64> {
        let grid = &self.0.grid;
        let row = grid.diff_row(grid.degree());
        (0..grid.n())
            .map(|nu| {
                row.iter()
                    .zip(self.0.component(nu))
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `|phi|_1 = |phi| + |∂phi|`.
    pub fn c1_norm(&self) -> f64 {
        self.sup_norm() + self.deriv().sup_norm()
    }

    pub fn lincomb(a: f64, x: &C1Fn, b: f64, y: &C1Fn) -> Result<C1Fn> {
        C0Fn::lincomb(a, &x.0, b, &y.0).map(C1Fn)
    }

    pub fn scale(&self, a: f64) -> C1Fn {
        C1Fn(self.0.scale(a))
    }

    pub fn sub(&self, other: &C1Fn) -> Result<C1Fn> {
        C1Fn::lincomb(1.0, self, -1.0, other)
    }

    pub fn add(&self, other: &C1Fn) -> Result<C1Fn> {
        C1Fn::lincomb(1.0, self, 1.0, other)
    }

    pub fn from_data(data: &FnData) -> Result<C1Fn> {
        let grid = data.grid.build()?;
        Self::from_data_on(&grid, data)
    }

    /// Rebuilds the function on an existing grid with a matching spec.
    pub fn from_data_on(grid: &Grid, data: &FnData) -> Result<C1Fn> {
        if *grid.spec() != data.grid {
            return Err(Error::Shape("serialized grid spec differs".into()));
        }
        if data.values.len() != grid.n() {
            return Err(Error::Shape(format!(
                "{} components for n = {}",
                data.values.len(),
                grid.n()
            )));
        }
        C1Fn::new(grid, data.values.concat())
    }
}

/// Serialized form: the grid spec and one nodal array per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnData {
    pub grid: GridSpec,
    pub values: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(h: f64, n: usize, deg: usize) -> Grid {
        GridSpec::new(h, n, deg).build().unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(0.0, 1, 8).build().is_err());
        assert!(GridSpec::new(1.0, 0, 8).build().is_err());
        assert!(GridSpec::new(1.0, 1, 3).build().is_err());
        assert!(GridSpec::new(1.0, 1, 8)
            .with_oversample(63)
            .build()
            .is_err());
    }

    #[test]
    fn nodes_span_the_interval() {
        let g = grid(2.0, 1, 10);
        assert_eq!(g.nodes()[0], -2.0);
        assert_eq!(g.nodes()[10], 0.0);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eval_examples() {
        let g = grid(1.0, 1, 16);
        let zero = C1Fn::zeros(&g);
        assert_eq!(zero.eval(-0.3).unwrap(), vec![0.0]);

        let id = C1Fn::from_fn(&g, |t| t);
        assert_abs_diff_eq!(id.eval(-0.5).unwrap()[0], -0.5, epsilon = 1e-15);

        let cos = C1Fn::from_fn(&g, f64::cos);
        assert_abs_diff_eq!(cos.eval(-0.3).unwrap()[0], (-0.3f64).cos(), epsilon = 1e-12);
    }

    #[test]
    fn eval_reproduces_nodes_exactly() {
        let g = grid(1.5, 2, 12);
        let f = C1Fn::from_components(&g, |nu, t| (t * (nu as f64 + 1.0)).sin() + 0.3);
        for nu in 0..2 {
            for (j, &t) in g.nodes().iter().enumerate() {
                assert_eq!(f.eval_component(nu, t).unwrap(), f.component(nu)[j]);
            }
        }
    }

    #[test]
    fn eval_outside_interval_is_domain_error() {
        let g = grid(1.0, 1, 8);
        let f = C1Fn::from_fn(&g, |t| t);
        assert!(matches!(f.eval(0.1), Err(Error::Domain(_))));
        assert!(matches!(f.eval(-1.1), Err(Error::Domain(_))));
        assert!(f.eval(f64::NAN).is_err());
    }

    #[test]
    fn deriv_examples() {
        let g = grid(1.0, 1, 16);
        let c = C1Fn::from_fn(&g, |_| 3.7);
        assert!(c.deriv().values().iter().all(|v| v.abs() < 1e-12));

        let id = C1Fn::from_fn(&g, |t| t);
        assert!(id.deriv().values().iter().all(|v| (v - 1.0).abs() < 1e-13));

        let sin = C1Fn::from_fn(&g, f64::sin);
        let d = sin.deriv();
        for (j, &t) in g.nodes().iter().enumerate() {
            assert_abs_diff_eq!(d.values()[j], t.cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn exponential_derivative_is_spectrally_accurate() {
        let g = grid(1.0, 1, 20);
        let e = C1Fn::from_fn(&g, f64::exp);
        let exact = C0Fn::from_fn(&g, f64::exp);
        let err = e.deriv().sub(&exact).unwrap().sup_norm();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn sup_norm_examples() {
        let g = grid(1.0, 1, 24);
        assert_eq!(C0Fn::zeros(&g).sup_norm(), 0.0);
        assert_abs_diff_eq!(C0Fn::from_fn(&g, |t| t).sup_norm(), 1.0, epsilon = 1e-15);

        // sin(4t) on [-1, 0] peaks at t = -pi/8 with value 1; dense oracle.
        let f = C0Fn::from_fn(&g, |t| (4.0 * t).sin());
        let brute = (0..=1_000_000)
            .map(|i| -(i as f64) / 1e6)
            .map(|t| (4.0 * t).sin().abs())
            .fold(0.0, f64::max);
        assert!((f.sup_norm() - brute).abs() < 1e-6);
    }

    #[test]
    fn c1_norm_examples() {
        let g = grid(1.0, 1, 24);
        assert_eq!(C1Fn::zeros(&g).c1_norm(), 0.0);
        assert_abs_diff_eq!(C1Fn::from_fn(&g, |t| t).c1_norm(), 2.0, epsilon = 1e-12);
        let s = C1Fn::from_fn(&g, f64::sin);
        assert_abs_diff_eq!(s.c1_norm(), 1f64.sin() + 1.0, epsilon = 1e-8);
    }

    #[test]
    fn integrate_examples() {
        let g = grid(1.0, 1, 16);
        assert_abs_diff_eq!(
            C0Fn::from_fn(&g, |_| 1.0).integrate()[0],
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            C0Fn::from_fn(&g, |t| t).integrate()[0],
            -0.5,
            epsilon = 1e-14
        );
        let e = C0Fn::from_fn(&g, f64::exp).integrate()[0];
        assert_abs_diff_eq!(e, 1.0 - (-1f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn quadrature_weights_sum_to_h() {
        for deg in [4, 5, 16, 25] {
            let g = grid(2.5, 1, deg);
            let s: f64 = g.quad_weights().iter().sum();
            assert_abs_diff_eq!(s, 2.5, epsilon = 1e-13);
            assert!(g.quad_weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn lincomb_examples() {
        let g = grid(1.0, 1, 8);
        let phi = C1Fn::from_fn(&g, |t| t.exp());
        let zero = C1Fn::lincomb(1.0, &phi, -1.0, &phi).unwrap();
        assert_eq!(zero.sup_norm(), 0.0);
        let z = C1Fn::zeros(&g);
        assert_eq!(C1Fn::lincomb(2.0, &z, 3.0, &z).unwrap().sup_norm(), 0.0);

        let sq = C1Fn::from_fn(&g, |t| t * t);
        assert_abs_diff_eq!(sq.eval(-0.25).unwrap()[0], 0.0625, epsilon = 1e-15);

        let other = C1Fn::zeros(&grid(1.0, 1, 10));
        assert!(matches!(
            C1Fn::lincomb(1.0, &phi, 1.0, &other),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn min_max_values() {
        let g = grid(1.0, 2, 24);
        let f = C0Fn::from_components(&g, |nu, t| if nu == 0 { (3.0 * t).sin() } else { t * t });
        assert_abs_diff_eq!(f.max_value(0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.min_value(0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.max_value(1), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.min_value(1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn serialization_round_trip() {
        let g = grid(1.0, 2, 8);
        let f = C1Fn::from_components(&g, |nu, t| nu as f64 + t);
        let json = serde_json::to_string(&f.to_data()).unwrap();
        let back = C1Fn::from_data(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.values(), f.values());
    }
}
