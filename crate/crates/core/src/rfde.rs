//! The right-hand side `f = g ∘ v` of `x'(t) = f(x_t)`, its extended
//! derivatives, the bound functions and the regions where the chart estimates hold.
//!
//! Indices are zero-based; the delayed value `phi_nu(d_kappa(phi))` sits at
//! position `mu = kappa * n + nu` of `v(phi)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::delays::DelayFunctional;
use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, C1Fn, Grid};
use crate::functionals::ExtLinFunctional;
use crate::roots;

/// The open set `V ⊂ R^{kn}` on which `g` is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VDomain {
    Whole,
    /// `{ y : y_mu < gamma_mu }`.
    HalfSpace {
        gamma: Vec<f64>,
    },
    /// `{ y : lo_mu < y_mu < hi_mu }`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl VDomain {
    pub fn check(&self, y: &[f64]) -> Result<()> {
        match self {
            VDomain::Whole => {}
            VDomain::HalfSpace { gamma } => {
                for (mu, (v, g)) in y.iter().zip(gamma).enumerate() {
                    if !(v < g) {
                        return Err(Error::OutsideV {
                            component: mu,
                            value: *v,
                            bound: format!("y[{mu}] < {g}"),
                        });
                    }
                }
            }
            VDomain::Box { lo, hi } => {
                for (mu, v) in y.iter().enumerate() {
                    if !(lo[mu] < *v && *v < hi[mu]) {
                        return Err(Error::OutsideV {
                            component: mu,
                            value: *v,
                            bound: format!("{} < y[{mu}] < {}", lo[mu], hi[mu]),
                        });
                    }
                }
            }
        }
        if let Some((mu, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::OutsideV {
                component: mu,
                value: *v,
                bound: "finite".into(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.check(y).is_ok()
    }

    fn dim_ok(&self, kn: usize) -> bool {
        match self {
            VDomain::Whole => true,
            VDomain::HalfSpace { gamma } => gamma.len() == kn,
            VDomain::Box { lo, hi } => lo.len() == kn && hi.len() == kn,
        }
    }
}

type GFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], usize, usize) -> f64 + Send + Sync>;

/// `g: V -> R^n` with partial derivatives `grad(y, nu, mu) = ∂_mu g_nu(y)`.
#[derive(Clone)]
pub struct FeedbackMap {
    k: usize,
    n: usize,
    g: GFn,
    grad: GradFn,
    domain: VDomain,
    name: String,
}

impl fmt::Debug for FeedbackMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackMap")
            .field("name", &self.name)
            .field("k", &self.k)
            .field("n", &self.n)
            .field("domain", &self.domain)
            .finish()
    }
}

impl FeedbackMap {
    pub fn new(
        k: usize,
        n: usize,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        grad: impl Fn(&[f64], usize, usize) -> f64 + Send + Sync + 'static,
        domain: VDomain,
        name: impl Into<String>,
    ) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter("k and n must be positive".into()));
        }
        if !domain.dim_ok(k * n) {
            return Err(Error::Shape(format!(
                "domain bounds do not have length k*n = {}",
                k * n
            )));
        }
        Ok(Self {
            k,
            n,
            g: Arc::new(g),
            grad: Arc::new(grad),
            domain,
            name: name.into(),
        })
    }

    /// `g(x) = -(1 - x)^2` on `x < 1`.
    pub fn s5() -> Self {
        Self::new(
            1,
            1,
            |y| vec![-(1.0 - y[0]).powi(2)],
            |y, _, _| 2.0 * (1.0 - y[0]),
            VDomain::HalfSpace { gamma: vec![1.0] },
            "S5",
        )
        .expect("valid feedback")
    }

    /// `g_nu(y) = y_nu` (first delay only), `V = R^{kn}`.
    pub fn identity(k: usize, n: usize) -> Result<Self> {
        Self::new(
            k,
            n,
            move |y| y[..n].to_vec(),
            |_, nu, mu| if nu == mu { 1.0 } else { 0.0 },
            VDomain::Whole,
            "LIN",
        )
    }

    /// `g ≡ 0` on the given domain.
    pub fn zero(k: usize, n: usize, domain: VDomain) -> Result<Self> {
        Self::new(k, n, move |_| vec![0.0; n], |_, _, _| 0.0, domain, "zero")
    }

    /// The same map with `g` replaced by 0.
    pub fn zeroed(&self) -> Self {
        let n = self.n;
        Self {
            g: Arc::new(move |_| vec![0.0; n]),
            grad: Arc::new(|_, _, _| 0.0),
            name: format!("{} (g = 0)", self.name),
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &VDomain {
        &self.domain
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        self.domain.check(y)?;
        Ok((self.g)(y))
    }

    pub fn grad(&self, y: &[f64], nu: usize, mu: usize) -> Result<f64> {
        self.check_len(y)?;
        self.domain.check(y)?;
        Ok((self.grad)(y, nu, mu))
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.k * self.n {
            return Err(Error::Shape(format!(
                "argument of length {} for k*n = {}",
                y.len(),
                self.k * self.n
            )));
        }
        Ok(())
    }

    /// `max_nu |g_nu(y)|`.
    pub fn m_g(&self, y: &[f64]) -> Result<f64> {
        Ok(self.eval(y)?.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// `max_{nu, mu} |∂_mu g_nu(y)|`.
    pub fn m_dg(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        self.domain.check(y)?;
        let mut m = 0.0_f64;
        for nu in 0..self.n {
            for mu in 0..self.k * self.n {
                m = m.max((self.grad)(y, nu, mu).abs());
            }
        }
        Ok(m)
    }

    /// Largest relative mismatch between `grad` and central differences of `g` at `y`.
    pub fn fd_check(&self, y: &[f64], step: f64) -> Result<f64> {
        let mut worst = 0.0_f64;
        for mu in 0..self.k * self.n {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[mu] += step;
            ym[mu] -= step;
            let gp = self.eval(&yp)?;
            let gm = self.eval(&ym)?;
            for nu in 0..self.n {
                let fd = (gp[nu] - gm[nu]) / (2.0 * step);
                let an = self.grad(y, nu, mu)?;
                worst = worst.max(crate::delays::relative_error(fd, an));
            }
        }
        Ok(worst)
    }
}

/// Region parameters for `U_c` or `U_{q,b,delta}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionParams {
    Uc { c: f64 },
    Uqbd { q: f64, b: f64, delta: f64 },
}

impl RegionParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionParams::Uc { c } if c > 0.0 => Ok(()),
            RegionParams::Uqbd { q, b, delta }
                if q > 0.0 && b > 0.0 && delta > 0.0 && delta < 1.0 =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!("invalid region {other:?}"))),
        }
    }

    /// The constant `c` in `H_c`, or `b q` for the delta-region.
    pub fn c_equivalent(&self) -> f64 {
        match *self {
            RegionParams::Uc { c } => c,
            RegionParams::Uqbd { q, b, .. } => b * q,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegionStatus {
    Inside,
    Outside(String),
}

impl RegionStatus {
    pub fn is_inside(&self) -> bool {
        matches!(self, RegionStatus::Inside)
    }
}

/// Default perturbation for manifold projection: `t e^t`.
pub fn projection_direction(t: f64) -> f64 {
    t * t.exp()
}

#[derive(Clone, Debug)]
pub struct Rfde {
    feedback: FeedbackMap,
    delay: Arc<dyn DelayFunctional>,
    grid: Grid,
}

impl Rfde {
    pub fn new(feedback: FeedbackMap, delay: Arc<dyn DelayFunctional>, grid: Grid) -> Result<Self> {
        if feedback.k() != delay.k() {
            return Err(Error::Shape(format!(
                "feedback expects k = {}, delay has k = {}",
                feedback.k(),
                delay.k()
            )));
        }
        if feedback.n() != grid.n() {
            return Err(Error::Shape(format!(
                "feedback expects n = {}, grid has n = {}",
                feedback.n(),
                grid.n()
            )));
        }
        Ok(Self {
            feedback,
            delay,
            grid,
        })
    }

    pub fn feedback(&self) -> &FeedbackMap {
        &self.feedback
    }

    pub fn delay(&self) -> &Arc<dyn DelayFunctional> {
        &self.delay
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.feedback.k()
    }

    pub fn n(&self) -> usize {
        self.feedback.n()
    }

    /// The same system with `g` replaced by 0.
    pub fn with_zero_feedback(&self) -> Self {
        Self {
            feedback: self.feedback.zeroed(),
            ..self.clone()
        }
    }

    fn check_grid(&self, phi: &C0Fn) -> Result<()> {
        if self.grid.same_as(phi.grid()) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{:?} vs {:?}", self.grid, phi.grid())))
        }
    }

    /// `d(phi)`, with the `U_d` membership test.
    pub fn delays(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        self.check_grid(phi)?;
        if !self.delay.in_domain(phi) {
            return Err(Error::Domain(format!(
                "{} not defined here",
                self.delay.describe()
            )));
        }
        self.delay.value(phi)
    }

    /// `v(phi)`.
    pub fn v(&self, phi: &C1Fn) -> Result<Vec<f64>> {
        let d = self.delays(phi)?;
        self.v_at(phi, &d)
    }

    fn v_at(&self, phi: &C0Fn, d: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut y = Vec::with_capacity(self.k() * n);
        for &dk in d {
            for nu in 0..n {
                y.push(phi.eval_component(nu, dk)?);
            }
        }
        Ok(y)
    }

    /// Extension of `D v_mu(phi)`: point evaluation at `d_kappa(phi)` plus
    /// `phi_nu'(d_kappa(phi))` times the extended delay derivative.
    pub fn dv_ext(&self, phi: &C1Fn, mu: usize) -> Result<ExtLinFunctional> {
        let d = self.delays(phi)?;
        self.dv_ext_with(phi, &phi.deriv(), &d, mu)
    }

    fn dv_ext_with(
        &self,
        phi: &C1Fn,
        dphi: &C0Fn,
        d: &[f64],
        mu: usize,
    ) -> Result<ExtLinFunctional> {
        let n = self.n();
        if mu >= self.k() * n {
            return Err(Error::Shape(format!(
                "index {mu} for k*n = {}",
                self.k() * n
            )));
        }
        let (kappa, nu) = (mu / n, mu % n);
        let atom = ExtLinFunctional::point(&self.grid, d[kappa], nu, 1.0)?;
        let slope = dphi.eval_component(nu, d[kappa])?;
        if slope == 0.0 {
            return Ok(atom);
        }
        let dd = self.delay.ext_derivative(phi, kappa)?;
        atom.add(&dd.scale(slope))
    }

    /// All `D_e v_mu(phi)`, `mu = 0 .. kn`.
    pub fn dv_ext_all(&self, phi: &C1Fn) -> Result<Vec<ExtLinFunctional>> {
        let d = self.delays(phi)?;
        let dphi = phi.deriv();
        (0..self.k() * self.n())
            .map(|mu| self.dv_ext_with(phi, &dphi, &d, mu))
            .collect()
    }

    /// `f(phi) = g(v(phi))`.
    pub fn f(&self, phi: &C1Fn) -> Result<Vec<f64>> {
        let y = self.v(phi)?;
        self.feedback.eval(&y)
    }

    /// Extensions of `D f_nu(phi)`, one per component.
    pub fn df_ext(&self, phi: &C1Fn) -> Result<Vec<ExtLinFunctional>> {
        let y = self.v(phi)?;
        self.feedback.domain.check(&y)?;
        let dv = self.dv_ext_all(phi)?;
        (0..self.n())
            .map(|nu| {
                let coeffs: Vec<f64> = (0..dv.len())
                    .map(|mu| self.feedback.grad(&y, nu, mu))
                    .collect::<Result<_>>()?;
                ExtLinFunctional::combine(&self.grid, &coeffs, &dv)
            })
            .collect()
    }

    pub fn m_g(&self, y: &[f64]) -> Result<f64> {
        self.feedback.m_g(y)
    }

    pub fn m_dg(&self, y: &[f64]) -> Result<f64> {
        self.feedback.m_dg(y)
    }

    /// `max_{kappa, nu} |phi_nu'(d_kappa(phi)) D_e d_kappa(phi)|`.
    pub fn m_v(&self, phi: &C1Fn) -> Result<f64> {
        let d = self.delays(phi)?;
        let dphi = phi.deriv();
        let mut m = 0.0_f64;
        for (kappa, &dk) in d.iter().enumerate() {
            let slopes: Vec<f64> = (0..self.n())
                .map(|nu| dphi.eval_component(nu, dk))
                .collect::<Result<_>>()?;
            let smax = slopes.iter().fold(0.0_f64, |a, s| a.max(s.abs()));
            if smax > 0.0 {
                m = m.max(smax * self.delay.ext_derivative(phi, kappa)?.op_norm());
            }
        }
        Ok(m)
    }

    /// `phi'(0) - f(phi)`.
    pub fn membership_residual(&self, phi: &C1Fn) -> Result<Vec<f64>> {
        let f = self.f(phi)?;
        Ok(phi
            .deriv_at_zero()
            .iter()
            .zip(&f)
            .map(|(a, b)| a - b)
            .collect())
    }

    /// Max-norm of [`Rfde::membership_residual`].
    pub fn membership_error(&self, phi: &C1Fn) -> Result<f64> {
        Ok(self
            .membership_residual(phi)?
            .iter()
            .fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Moves `phi0` along `t e^t` in each component until `phi'(0) = f(phi)`.
    pub fn project_to_manifold(&self, phi0: &C1Fn) -> Result<C1Fn> {
        self.project_to_manifold_tol(phi0, 1e-10)
    }

    pub fn project_to_manifold_tol(&self, phi0: &C1Fn, tol: f64) -> Result<C1Fn> {
        let f0 = self.f(phi0)?;
        let s_max = 10.0 * (1.0 + f0.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let n = self.n();
        let rho = C1Fn::from_fn(&self.grid.scalar(), projection_direction);
        let rho_vals = rho.values().to_vec();
        let len = self.grid.len();
        let mut phi = phi0.clone();
        for _sweep in 0..50 {
            if self.membership_error(&phi)? <= tol {
                return Ok(phi);
            }
            for nu in 0..n {
                let base = phi.clone();
                let shifted = |s: f64| -> Result<C1Fn> {
                    let mut v = base.values().to_vec();
                    for j in 0..len {
                        v[nu * len + j] += s * rho_vals[j];
                    }
                    C1Fn::new(&self.grid, v)
                };
                let resid =
                    |s: f64| -> Result<f64> { Ok(self.membership_residual(&shifted(s)?)?[nu]) };
                let r0 = resid(0.0)?;
                if r0.abs() <= 0.1 * tol {
                    continue;
                }
                let (a, b, fa, fb) =
                    roots::bracket_near_zero(resid, r0, s_max, 64).ok_or_else(|| {
                        Error::Projection(format!(
                            "no sign change of the residual for |s| <= {s_max}"
                        ))
                    })?;
                let s = roots::brent(resid, a, b, fa, fb, 1e-15, 0.1 * tol, 200)
                    .map_err(|e| Error::Projection(e.to_string()))?;
                phi = shifted(s)?;
            }
        }
        let err = self.membership_error(&phi)?;
        if err <= tol {
            Ok(phi)
        } else {
            Err(Error::Projection(format!(
                "residual {err:e} after 50 sweeps"
            )))
        }
    }

    /// Conservative lower bound on `dist(I phi, C \ W_q)`.
    ///
    /// Nonzero only when the delay's certified derivative bound is below `q`,
    /// so that `W_q` reduces to `{chi : v(chi) in V}`; then every `chi` closer
    /// than the gap between `phi` and the faces of `V` keeps its delayed values in `V`.
    pub fn dist_lb(&self, phi: &C0Fn, q: f64) -> f64 {
        match self.delay.q_bound().certified() {
            Some(qd) if qd < q => {}
            _ => return 0.0,
        }
        let n = self.n();
        match &self.feedback.domain {
            VDomain::Whole => f64::INFINITY,
            VDomain::HalfSpace { gamma } => {
                let mut r = f64::INFINITY;
                for (mu, g) in gamma.iter().enumerate() {
                    r = r.min(g - phi.max_value(mu % n));
                }
                r.max(0.0)
            }
            VDomain::Box { lo, hi } => {
                let mut r = f64::INFINITY;
                for mu in 0..lo.len() {
                    let nu = mu % n;
                    r = r.min(hi[mu] - phi.max_value(nu));
                    r = r.min(phi.min_value(nu) - lo[mu]);
                }
                r.max(0.0)
            }
        }
    }

    /// Membership in `U_c` or `U_{q,b,delta}`, with the first violated condition.
    pub fn region_test(&self, params: &RegionParams, phi: &C1Fn) -> RegionStatus {
        let y = match self.v(phi) {
            Ok(y) => y,
            Err(e) => return RegionStatus::Outside(e.to_string()),
        };
        if let Err(e) = self.feedback.domain.check(&y) {
            return RegionStatus::Outside(e.to_string());
        }
        match *params {
            RegionParams::Uc { c } => match self.m_v(phi) {
                Ok(m) if m < c => RegionStatus::Inside,
                Ok(m) => RegionStatus::Outside(format!("m_v = {m} >= c = {c}")),
                Err(e) => RegionStatus::Outside(e.to_string()),
            },
            RegionParams::Uqbd { q, b, delta } => {
                for kappa in 0..self.k() {
                    match self.delay.ext_derivative(phi, kappa) {
                        Ok(l) => {
                            let norm = l.op_norm();
                            if !(norm < q) {
                                return RegionStatus::Outside(format!(
                                    "|D_e d_{kappa}| = {norm} >= q = {q}"
                                ));
                            }
                        }
                        Err(e) => return RegionStatus::Outside(e.to_string()),
                    }
                }
                let slope = phi.deriv().sup_norm_upper();
                if !(slope < b) {
                    return RegionStatus::Outside(format!("|phi'| = {slope} >= b = {b}"));
                }
                let dist = self.dist_lb(phi, q);
                if !(dist > 2.0 * delta) {
                    return RegionStatus::Outside(format!(
                        "distance bound {dist} <= 2 delta = {}",
                        2.0 * delta
                    ));
                }
                RegionStatus::Inside
            }
        }
    }

    /// `|psi'(0) - D_e f(phi) psi|` for `phi` on the manifold.
    pub fn tangent_residual(&self, phi: &C1Fn, psi: &C1Fn) -> Result<f64> {
        let m = self.membership_error(phi)?;
        if m > 1e-8 {
            return Err(Error::NotOnManifold(m));
        }
        let df = self.df_ext(phi)?;
        let dpsi = psi.deriv_at_zero();
        let mut worst = 0.0_f64;
        for (nu, l) in df.iter().enumerate() {
            worst = worst.max((dpsi[nu] - l.apply(psi)?).abs());
        }
        Ok(worst)
    }

    /// Adds to `chi` the combination of `t e^t` in each component that makes
    /// it tangent at `phi`.
    pub fn tangent_projection(&self, phi: &C1Fn, chi: &C1Fn) -> Result<C1Fn> {
        let n = self.n();
        let df = self.df_ext(phi)?;
        let dirs: Vec<C1Fn> = (0..n)
            .map(|c| {
                C1Fn::from_components(&self.grid, |nu, t| {
                    if nu == c {
                        projection_direction(t)
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let defect = |x: &C1Fn| -> Result<Vec<f64>> {
            let d = x.deriv_at_zero();
            (0..n).map(|nu| Ok(d[nu] - df[nu].apply(x)?)).collect()
        };
        let rhs: Vec<f64> = defect(chi)?.iter().map(|v| -v).collect();
        let mut mat = vec![vec![0.0; n]; n];
        for (c, dir) in dirs.iter().enumerate() {
            let col = defect(dir)?;
            for nu in 0..n {
                mat[nu][c] = col[nu];
            }
        }
        let s = solve_dense(mat, rhs)?;
        let mut out = chi.clone();
        for (c, dir) in dirs.iter().enumerate() {
            out = C1Fn::lincomb(1.0, &out, s[c], dir)?;
        }
        Ok(out)
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidParameter("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::{ConstantDelay, IntegralDelay};
    use crate::funcspace::GridSpec;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        GridSpec::new(1.0, 1, 24).build().unwrap()
    }

    fn s5() -> Rfde {
        Rfde::new(
            FeedbackMap::s5(),
            Arc::new(IntegralDelay::standard(1.0)),
            grid(),
        )
        .unwrap()
    }

    fn lin() -> Rfde {
        Rfde::new(
            FeedbackMap::identity(1, 1).unwrap(),
            Arc::new(IntegralDelay::standard(1.0)),
            grid(),
        )
        .unwrap()
    }

    #[test]
    fn v_examples() {
        let r = s5();
        let g = r.grid().clone();
        assert_eq!(r.v(&C1Fn::zeros(&g)).unwrap(), vec![0.0]);
        assert_abs_diff_eq!(
            r.v(&C1Fn::from_fn(&g, |t| t)).unwrap()[0],
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn f_examples() {
        let r = s5();
        let g = r.grid().clone();
        assert_eq!(r.f(&C1Fn::zeros(&g)).unwrap(), vec![-1.0]);
        for n in 1..5 {
            let c = C1Fn::from_fn(&g, |_| -(n as f64));
            assert_abs_diff_eq!(
                r.f(&c).unwrap()[0],
                -((1 + n) as f64).powi(2),
                epsilon = 1e-12
            );
        }
        assert_eq!(lin().f(&C1Fn::zeros(&g)).unwrap(), vec![0.0]);
        let one = C1Fn::from_fn(&g, |_| 1.0);
        assert!(matches!(r.f(&one), Err(Error::OutsideV { .. })));
    }

    #[test]
    fn bound_function_examples() {
        let r = s5();
        let g = r.grid().clone();
        assert_eq!(r.m_g(&[0.0]).unwrap(), 1.0);
        assert_eq!(r.m_dg(&[0.0]).unwrap(), 2.0);
        assert!(r.m_v(&C1Fn::from_fn(&g, |_| 0.3)).unwrap() < 1e-14);
        assert_eq!(r.m_v(&C1Fn::from_fn(&g, |t| t)).unwrap(), 0.0);
    }

    #[test]
    fn membership_and_projection() {
        let r = s5();
        let g = r.grid().clone();
        assert_eq!(r.membership_residual(&C1Fn::zeros(&g)).unwrap(), vec![1.0]);
        let p = r.project_to_manifold(&C1Fn::zeros(&g)).unwrap();
        assert!(r.membership_error(&p).unwrap() <= 1e-10);
        let again = r.project_to_manifold(&p).unwrap();
        assert_eq!(again.values(), p.values());

        let l = lin();
        let z = C1Fn::zeros(&g);
        assert_eq!(l.project_to_manifold(&z).unwrap().values(), z.values());
    }

    #[test]
    fn region_examples() {
        let r = s5();
        let g = r.grid().clone();
        let qbd = RegionParams::Uqbd {
            q: 1.0,
            b: 1.0,
            delta: 0.25,
        };
        for n in 1..=10 {
            let c = C1Fn::from_fn(&g, |_| -(n as f64));
            assert_eq!(r.region_test(&qbd, &c), RegionStatus::Inside);
            assert!(r.region_test(&RegionParams::Uc { c: 1e-3 }, &c).is_inside());
        }
        let one = C1Fn::from_fn(&g, |_| 1.0);
        assert!(!r
            .region_test(&RegionParams::Uc { c: 1.0 }, &one)
            .is_inside());
    }

    #[test]
    fn tangent_examples() {
        let g = grid();
        let r = Rfde::new(
            FeedbackMap::identity(1, 1).unwrap(),
            Arc::new(ConstantDelay::new(-0.4, 1.0).unwrap()),
            g.clone(),
        )
        .unwrap();
        let z = C1Fn::zeros(&g);
        assert_eq!(r.tangent_residual(&z, &z).unwrap(), 0.0);
        let omega = 3.0;
        let psi = C1Fn::from_fn(&g, |t| (omega * t).cos());
        assert_abs_diff_eq!(
            r.tangent_residual(&z, &psi).unwrap(),
            (omega * 0.4f64).cos().abs(),
            epsilon = 1e-10
        );
        let fixed = r.tangent_projection(&z, &psi).unwrap();
        assert!(r.tangent_residual(&z, &fixed).unwrap() <= 1e-10);

        let s = s5();
        assert!(matches!(
            s.tangent_residual(&z, &z),
            Err(Error::NotOnManifold(_))
        ));
    }
}
