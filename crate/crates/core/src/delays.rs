//! Delay functionals `d: U_d -> [-h, 0]^k` with extended derivatives.
//!
//! All built-in delays factor through the inclusion `C^1 -> C`, so they take
//! a [`C0Fn`]; a `C1Fn` argument is passed through `Deref`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, C1Fn};
use crate::functionals::ExtLinFunctional;

/// Global bound on `|D_e d_kappa(phi)|` over the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QBound {
    /// Closed-form bound.
    Certified(f64),
    /// Obtained by probing; not a proof.
    Estimated(f64),
    Unknown,
}

impl QBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            QBound::Certified(q) | QBound::Estimated(q) => Some(q),
            QBound::Unknown => None,
        }
    }

    pub fn certified(&self) -> Option<f64> {
        match *self {
            QBound::Certified(q) => Some(q),
            _ => None,
        }
    }
}

pub trait DelayFunctional: Send + Sync + fmt::Debug {
    /// Number of delays.
    fn k(&self) -> usize;

    /// `(d_1(phi), ..., d_k(phi))`, each in `[-h, 0]`.
    fn value(&self, phi: &C0Fn) -> Result<Vec<f64>>;

    /// The extension of `D d_kappa(phi)` to `C_n`.
    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional>;

    fn q_bound(&self) -> QBound;

    /// Membership in `U_d`.
    fn in_domain(&self, _phi: &C0Fn) -> bool {
        true
    }

    fn describe(&self) -> String;
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The scalar maps `p` and `eta` of the integral delay, with derivatives.
#[derive(Clone)]
pub struct ScalarShapeFns {
    pub p: ScalarFn,
    pub dp: ScalarFn,
    pub eta: ScalarFn,
    pub deta: ScalarFn,
    /// `sup |p'|`, when known in closed form.
    pub sup_dp: Option<f64>,
    /// `sup |eta'|`, when known in closed form.
    pub sup_deta: Option<f64>,
}

impl fmt::Debug for ScalarShapeFns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarShapeFns")
            .field("sup_dp", &self.sup_dp)
            .field("sup_deta", &self.sup_deta)
            .finish_non_exhaustive()
    }
}

impl ScalarShapeFns {
    /// `p(x) = log(1 + x^2)` for `x > 0`, else 0; `eta(u) = -(h/2)(1 - tanh u)`.
    pub fn standard(h: f64) -> Self {
        Self {
            p: Arc::new(|x: f64| if x > 0.0 { x.mul_add(x, 1.0).ln() } else { 0.0 }),
            dp: Arc::new(|x: f64| {
                if x > 0.0 {
                    2.0 * x / x.mul_add(x, 1.0)
                } else {
                    0.0
                }
            }),
            eta: Arc::new(move |u: f64| -0.5 * h * (1.0 - u.tanh())),
            deta: Arc::new(move |u: f64| {
                let s = 1.0 / u.cosh();
                0.5 * h * s * s
            }),
            sup_dp: Some(1.0),
            sup_deta: Some(0.5 * h),
        }
    }

    /// Checks the sign and range requirements on `samples` and returns the first violation.
    pub fn validate(&self, h: f64, samples: &[f64]) -> Result<()> {
        for &x in samples {
            if x <= 0.0 && (self.p)(x) != 0.0 {
                return Err(Error::InvalidParameter(format!("p({x}) != 0 for x <= 0")));
            }
            if x > 0.0 && !((self.dp)(x) > 0.0) {
                return Err(Error::InvalidParameter(format!("p'({x}) not positive")));
            }
            if !((self.deta)(x) > 0.0) {
                return Err(Error::InvalidParameter(format!("eta'({x}) not positive")));
            }
            let e = (self.eta)(x);
            if !(-h..=0.0).contains(&e) {
                return Err(Error::InvalidParameter(format!(
                    "eta({x}) = {e} outside [-h, 0]"
                )));
            }
            if let Some(s) = self.sup_dp {
                if (self.dp)(x).abs() > s {
                    return Err(Error::InvalidParameter(format!("|p'({x})| exceeds {s}")));
                }
            }
            if let Some(s) = self.sup_deta {
                if (self.deta)(x).abs() > s {
                    return Err(Error::InvalidParameter(format!("|eta'({x})| exceeds {s}")));
                }
            }
        }
        Ok(())
    }
}

/// `d(phi) = eta(∫ p(phi_nu(t)) dt)` for one chosen component `nu`.
#[derive(Clone, Debug)]
pub struct IntegralDelay {
    shapes: ScalarShapeFns,
    component: usize,
    h: f64,
}

impl IntegralDelay {
    pub fn new(shapes: ScalarShapeFns, component: usize, h: f64) -> Self {
        Self {
            shapes,
            component,
            h,
        }
    }

    pub fn standard(h: f64) -> Self {
        Self::new(ScalarShapeFns::standard(h), 0, h)
    }

    fn integral(&self, phi: &C0Fn) -> Result<f64> {
        self.check(phi)?;
        let q = phi.grid().quad_weights();
        Ok(phi
            .component(self.component)
            .iter()
            .zip(q)
            .map(|(x, w)| w * (self.shapes.p)(*x))
            .sum())
    }

    fn check(&self, phi: &C0Fn) -> Result<()> {
        if self.component >= phi.n() {
            return Err(Error::Shape(format!(
                "delay reads component {} of an n = {} function",
                self.component,
                phi.n()
            )));
        }
        if (phi.grid().h() - self.h).abs() > 1e-14 * self.h {
            return Err(Error::Shape(format!(
                "delay built for h = {}, function has h = {}",
                self.h,
                phi.grid().h()
            )));
        }
        Ok(())
    }
}

impl DelayFunctional for IntegralDelay {
    fn k(&self) -> usize {
        1
    }

    fn value(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        let u = self.integral(phi)?;
        Ok(vec![(self.shapes.eta)(u).clamp(-self.h, 0.0)])
    }

    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional> {
        check_kappa(kappa, 1)?;
        let u = self.integral(phi)?;
        let outer = (self.shapes.deta)(u);
        let nu = self.component;
        let dp = &self.shapes.dp;
        let w = C0Fn::new(phi.grid(), {
            let mut v = vec![0.0; phi.values().len()];
            let len = phi.grid().len();
            for (j, x) in phi.component(nu).iter().enumerate() {
                v[nu * len + j] = outer * dp(*x);
            }
            v
        })?;
        Ok(ExtLinFunctional::from_density(w))
    }

    fn q_bound(&self) -> QBound {
        match (self.shapes.sup_deta, self.shapes.sup_dp) {
            (Some(a), Some(b)) => QBound::Certified(a * self.h * b),
            _ => QBound::Unknown,
        }
    }

    fn describe(&self) -> String {
        format!("integral delay on component {}", self.component)
    }
}

/// State-independent delays `d_kappa(phi) = r_kappa`.
#[derive(Clone, Debug)]
pub struct ConstantDelay {
    r: Vec<f64>,
}

impl ConstantDelay {
    pub fn new(r: f64, h: f64) -> Result<Self> {
        Self::vector(vec![r], h)
    }

    pub fn vector(r: Vec<f64>, h: f64) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one delay is required".into(),
            ));
        }
        if let Some(x) = r.iter().find(|x| !(-h..=0.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!(
                "delay {x} outside [-{h}, 0]"
            )));
        }
        Ok(Self { r })
    }
}

impl DelayFunctional for ConstantDelay {
    fn k(&self) -> usize {
        self.r.len()
    }

    fn value(&self, _phi: &C0Fn) -> Result<Vec<f64>> {
        Ok(self.r.clone())
    }

    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional> {
        check_kappa(kappa, self.k())?;
        Ok(ExtLinFunctional::zero(phi.grid()))
    }

    fn q_bound(&self) -> QBound {
        QBound::Certified(0.0)
    }

    fn describe(&self) -> String {
        format!("constant delay {:?}", self.r)
    }
}

type VecFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `d(phi) = delta(L phi)` with `L chi = (∫ w_j · chi)_j`.
#[derive(Clone)]
pub struct FactorizedDelay {
    weights: Vec<C0Fn>,
    delta: VecFn,
    grad: GradFn,
    grad_bound: Option<f64>,
    h: f64,
}

impl fmt::Debug for FactorizedDelay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FactorizedDelay")
            .field("m", &self.weights.len())
            .field("grad_bound", &self.grad_bound)
            .finish_non_exhaustive()
    }
}

impl FactorizedDelay {
    /// `grad_bound`, if given, must bound `max_j |∂_j delta|` everywhere.
    pub fn new(
        weights: Vec<C0Fn>,
        delta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        grad_bound: Option<f64>,
    ) -> Result<Self> {
        let first = weights
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one weight is required".into()))?;
        for w in &weights[1..] {
            first.check_same_grid(w)?;
        }
        let h = first.grid().h();
        Ok(Self {
            weights,
            delta: Arc::new(delta),
            grad: Arc::new(grad),
            grad_bound,
            h,
        })
    }

    /// Weight `w ≡ 1` on every component and `delta(u) = -(h/2)(1 - tanh u)`.
    pub fn mean_tanh(grid: &crate::funcspace::Grid) -> Result<Self> {
        let h = grid.h();
        Self::new(
            vec![C0Fn::from_fn(grid, |_| 1.0)],
            move |u| -0.5 * h * (1.0 - u[0].tanh()),
            move |u| {
                let s = 1.0 / u[0].cosh();
                vec![0.5 * h * s * s]
            },
            Some(0.5 * h),
        )
    }

    fn project(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        self.weights
            .iter()
            .map(|w| ExtLinFunctional::from_density(w.clone()).apply(phi))
            .collect()
    }
}

impl DelayFunctional for FactorizedDelay {
    fn k(&self) -> usize {
        1
    }

    fn value(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        let u = self.project(phi)?;
        let d = (self.delta)(&u);
        if !(-self.h..=0.0).contains(&d) {
            return Err(Error::Domain(format!(
                "delay value {d} outside [-{}, 0]",
                self.h
            )));
        }
        Ok(vec![d])
    }

    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional> {
        check_kappa(kappa, 1)?;
        let u = self.project(phi)?;
        let g = (self.grad)(&u);
        if g.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "gradient of length {} for {} weights",
                g.len(),
                self.weights.len()
            )));
        }
        let mut acc = C0Fn::zeros(phi.grid());
        for (c, w) in g.iter().zip(&self.weights) {
            acc = C0Fn::lincomb(1.0, &acc, *c, w)?;
        }
        Ok(ExtLinFunctional::from_density(acc))
    }

    fn q_bound(&self) -> QBound {
        match self.grad_bound {
            Some(b) => {
                let l1: f64 = self
                    .weights
                    .iter()
                    .map(|w| ExtLinFunctional::from_density(w.clone()).op_norm())
                    .sum();
                QBound::Certified(b * l1)
            }
            None => QBound::Unknown,
        }
    }

    fn describe(&self) -> String {
        format!("factorized delay with {} weights", self.weights.len())
    }
}

/// Concatenation of several delay functionals into one vector.
#[derive(Clone, Debug)]
pub struct DelayVector {
    parts: Vec<Arc<dyn DelayFunctional>>,
}

impl DelayVector {
    pub fn new(parts: Vec<Arc<dyn DelayFunctional>>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("empty delay vector".into()));
        }
        Ok(Self { parts })
    }

    fn locate(&self, kappa: usize) -> Result<(&dyn DelayFunctional, usize)> {
        let mut rest = kappa;
        for p in &self.parts {
            if rest < p.k() {
                return Ok((p.as_ref(), rest));
            }
            rest -= p.k();
        }
        Err(Error::Shape(format!(
            "delay index {kappa} for k = {}",
            self.k()
        )))
    }
}

impl DelayFunctional for DelayVector {
    fn k(&self) -> usize {
        self.parts.iter().map(|p| p.k()).sum()
    }

    fn value(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.k());
        for p in &self.parts {
            out.extend(p.value(phi)?);
        }
        Ok(out)
    }

    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional> {
        let (p, i) = self.locate(kappa)?;
        p.ext_derivative(phi, i)
    }

    fn q_bound(&self) -> QBound {
        let mut worst = 0.0_f64;
        let mut certified = true;
        for p in &self.parts {
            match p.q_bound() {
                QBound::Certified(q) => worst = worst.max(q),
                QBound::Estimated(q) => {
                    certified = false;
                    worst = worst.max(q)
                }
                QBound::Unknown => return QBound::Unknown,
            }
        }
        if certified {
            QBound::Certified(worst)
        } else {
            QBound::Estimated(worst)
        }
    }

    fn in_domain(&self, phi: &C0Fn) -> bool {
        self.parts.iter().all(|p| p.in_domain(phi))
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.parts.iter().map(|p| p.describe()).collect();
        format!("[{}]", parts.join(", "))
    }
}

fn check_kappa(kappa: usize, k: usize) -> Result<()> {
    if kappa < k {
        Ok(())
    } else {
        Err(Error::Shape(format!("delay index {kappa} for k = {k}")))
    }
}

/// Floor for the denominator of relative finite-difference errors.
pub const FD_SCALE_FLOOR: f64 = 1e-4;

/// Largest relative mismatch, over all delays, between the central difference
/// of `d` along `chi` and the extended derivative applied to `chi`.
pub fn fd_check_delay(d: &dyn DelayFunctional, phi: &C1Fn, chi: &C1Fn, step: f64) -> Result<f64> {
    let plus = C1Fn::lincomb(1.0, phi, step, chi)?;
    let minus = C1Fn::lincomb(1.0, phi, -step, chi)?;
    for x in [phi, &plus, &minus] {
        if !d.in_domain(x) {
            return Err(Error::Domain("finite-difference probe leaves U_d".into()));
        }
    }
    let vp = d.value(&plus)?;
    let vm = d.value(&minus)?;
    let mut worst = 0.0_f64;
    for kappa in 0..d.k() {
        let fd = (vp[kappa] - vm[kappa]) / (2.0 * step);
        let an = d.ext_derivative(phi, kappa)?.apply(chi)?;
        worst = worst.max(relative_error(fd, an));
    }
    Ok(worst)
}

/// `|a - b| / max(|a|, |b|, FD_SCALE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_SCALE_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::GridSpec;
    use approx::assert_abs_diff_eq;

    fn grid() -> crate::funcspace::Grid {
        GridSpec::new(1.0, 1, 24).build().unwrap()
    }

    #[test]
    fn integral_delay_examples() {
        let g = grid();
        let d = IntegralDelay::standard(1.0);
        assert_eq!(d.value(&C0Fn::zeros(&g)).unwrap(), vec![-0.5]);
        let neg = C0Fn::from_fn(&g, |_| -5.0);
        assert_eq!(d.value(&neg).unwrap(), vec![-0.5]);
        assert_eq!(d.ext_derivative(&neg, 0).unwrap().op_norm(), 0.0);
        let one = C0Fn::from_fn(&g, |_| 1.0);
        assert_abs_diff_eq!(d.value(&one).unwrap()[0], -0.2, epsilon = 1e-14);
        assert_eq!(d.q_bound(), QBound::Certified(0.5));
    }

    #[test]
    fn standard_shapes_are_admissible() {
        let s = ScalarShapeFns::standard(1.0);
        let samples: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
        s.validate(1.0, &samples).unwrap();
    }

    #[test]
    fn constant_delay_examples() {
        let g = grid();
        let d = ConstantDelay::new(-0.5, 1.0).unwrap();
        let phi = C1Fn::from_fn(&g, f64::sin);
        assert_eq!(d.value(&phi).unwrap(), vec![-0.5]);
        assert_eq!(d.ext_derivative(&phi, 0).unwrap().op_norm(), 0.0);
        assert_eq!(fd_check_delay(&d, &phi, &phi, 1e-5).unwrap(), 0.0);
        assert!(ConstantDelay::new(0.5, 1.0).is_err());
        assert!(ConstantDelay::new(-1.5, 1.0).is_err());
    }

    #[test]
    fn factorized_delay_examples() {
        let g = grid();
        let d = FactorizedDelay::mean_tanh(&g).unwrap();
        assert_abs_diff_eq!(d.value(&C0Fn::zeros(&g)).unwrap()[0], -0.5, epsilon = 1e-15);
        // zero mean: same value as at 0
        let z = C0Fn::from_fn(&g, |t| t + 0.5);
        assert_abs_diff_eq!(d.value(&z).unwrap()[0], -0.5, epsilon = 1e-14);

        let flat = FactorizedDelay::new(
            vec![C0Fn::from_fn(&g, |_| 1.0)],
            |_| -0.25,
            |_| vec![0.0],
            Some(0.0),
        )
        .unwrap();
        assert_eq!(flat.ext_derivative(&z, 0).unwrap().op_norm(), 0.0);
    }

    #[test]
    fn integral_delay_fd() {
        let g = grid();
        let d = IntegralDelay::standard(1.0);
        let phi = C1Fn::from_fn(&g, |t| 1.0 + 0.5 * t * t);
        let chi = C1Fn::from_fn(&g, |t| (3.0 * t).cos() - 0.2 * t);
        assert!(fd_check_delay(&d, &phi, &chi, 1e-5).unwrap() <= 1e-6);
        let flat = C1Fn::from_fn(&g, |_| -1.0);
        assert_eq!(fd_check_delay(&d, &flat, &chi, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn delay_vector_concatenates() {
        let g = grid();
        let v = DelayVector::new(vec![
            Arc::new(IntegralDelay::standard(1.0)),
            Arc::new(ConstantDelay::new(-0.75, 1.0).unwrap()),
        ])
        .unwrap();
        assert_eq!(v.k(), 2);
        assert_eq!(v.value(&C0Fn::zeros(&g)).unwrap(), vec![-0.5, -0.75]);
        assert_eq!(v.q_bound(), QBound::Certified(0.5));
        assert!(v.ext_derivative(&C0Fn::zeros(&g), 2).is_err());
    }
}
