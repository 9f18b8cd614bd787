//! The remainder `R_nu(phi) = g_nu(v(phi)) tau(v(phi))`, the chart
//! `A = id - R`, and fixed-point inversion of `A` and of its derivative.

use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, C1Fn};
use crate::functionals::ExtLinFunctional;
use crate::rfde::{RegionParams, RegionStatus, Rfde};
use crate::transversal::{Scaling, TransversalFamily};

/// Iteration controls for [`Chart::invert`] and [`Chart::solve_da`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Increments below this are ignored when estimating the contraction factor.
    pub ratio_floor: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            ratio_floor: 1e-11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    rfde: Rfde,
    transversal: TransversalFamily,
    params: RegionParams,
    budget: f64,
}

/// `chi ↦ D_e R(phi) chi` at a fixed `phi`.
#[derive(Clone, Debug)]
pub struct Linearization {
    dv: Vec<ExtLinFunctional>,
    /// `coeff[nu][mu] = ∂_mu g_nu(y) tau(y) + g_nu(y) ∂_mu tau(y)`, scalar functions.
    coeff: Vec<Vec<C1Fn>>,
    y: Vec<f64>,
}

impl Linearization {
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn apply(&self, chi: &C0Fn) -> Result<C1Fn> {
        let weights: Vec<f64> = self
            .dv
            .iter()
            .map(|l| l.apply(chi))
            .collect::<Result<_>>()?;
        let grid = chi.grid();
        let len = grid.len();
        let mut values = vec![0.0; grid.n() * len];
        for (nu, row) in self.coeff.iter().enumerate() {
            for (w, c) in weights.iter().zip(row) {
                if *w != 0.0 {
                    for (j, v) in c.values().iter().enumerate() {
                        values[nu * len + j] += w * v;
                    }
                }
            }
        }
        C1Fn::new(grid, values)
    }

    /// `max_nu Σ_mu |D_e v_mu| · |coeff_{nu mu}|`, an upper bound on the operator norm.
    pub fn structural_bound(&self) -> f64 {
        self.coeff
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.dv)
                    .map(|(c, l)| l.op_norm() * c.sup_norm_upper())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|D_e R(phi) chi| / |chi|` over `probes`.
    pub fn probe_estimate(&self, probes: &[C0Fn]) -> Result<f64> {
        let mut best = 0.0_f64;
        for p in probes {
            let s = p.sup_norm();
            if s > 0.0 {
                best = best.max(self.apply(p)?.sup_norm() / s);
            }
        }
        Ok(best)
    }
}

#[derive(Clone, Debug)]
pub struct SmallnessReport {
    pub remainder_sup: f64,
    /// Probe maximum of `|D_e R(phi) chi|` over unit `chi`.
    pub op_lower: f64,
    /// Upper bound from the structure of `D_e R`.
    pub op_upper: f64,
    /// `k n^2 (1 + m_v)(m_Dg |tau| + m_g max_mu |D_mu tau|)`.
    pub analytic_bound: f64,
    pub budget: f64,
    pub region: RegionStatus,
}

impl SmallnessReport {
    pub fn remainder_ok(&self) -> bool {
        self.remainder_sup < self.budget
    }

    pub fn operator_ok(&self) -> bool {
        self.op_lower <= self.budget && self.analytic_bound <= self.budget
    }

    pub fn pass(&self) -> bool {
        self.remainder_ok() && self.operator_ok()
    }
}

#[derive(Clone, Debug)]
pub struct Inversion {
    pub phi: C1Fn,
    pub iterations: usize,
    /// Largest ratio of successive increments.
    pub contraction: f64,
    /// `|A(phi) - zeta|`.
    pub residual: f64,
    /// `|A(phi) - zeta|_1`.
    pub residual_c1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BilipStatus {
    Pass,
    Fail,
    Inapplicable(String),
}

#[derive(Clone, Debug)]
pub struct BilipReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - (1 - budget) rhs`.
    pub margin: f64,
    pub status: BilipStatus,
}

/// `{phi : lower_nu < phi_nu < upper_nu, |phi'| < slope}`, a convex set.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSubset {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub slope: f64,
}

impl ConvexSubset {
    pub fn contains(&self, phi: &C1Fn) -> bool {
        (0..phi.n())
            .all(|nu| phi.max_value(nu) < self.upper[nu] && phi.min_value(nu) > self.lower[nu])
            && phi.deriv().sup_norm_upper() < self.slope
    }
}

/// Number of points sampled on a segment for membership.
pub const SEGMENT_SAMPLES: usize = 33;

impl Chart {
    /// A chart whose transversal scaling matches the region parameters.
    pub fn new(rfde: Rfde, transversal: TransversalFamily, params: RegionParams) -> Result<Self> {
        params.validate()?;
        let scaling = transversal.scaling().scaling;
        let matches = match (scaling, params) {
            (Scaling::Hc { c, .. }, RegionParams::Uc { c: c2 }) => c == c2,
            (
                Scaling::Hqbd { q, b, delta },
                RegionParams::Uqbd {
                    q: q2,
                    b: b2,
                    delta: d2,
                },
            ) => q == q2 && b == b2 && delta == d2,
            _ => false,
        };
        if !matches {
            return Err(Error::InvalidParameter(format!(
                "transversal scaling {scaling:?} does not match region {params:?}"
            )));
        }
        let budget = scaling.budget();
        Self::with_budget(rfde, transversal, params, budget)
    }

    /// A chart checked against `budget`, whatever the transversal was sized for.
    pub fn with_budget(
        rfde: Rfde,
        transversal: TransversalFamily,
        params: RegionParams,
        budget: f64,
    ) -> Result<Self> {
        if !(budget > 0.0 && budget < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "budget {budget} outside (0, 1)"
            )));
        }
        if transversal.scaling().feedback.k() != rfde.k()
            || transversal.scaling().feedback.n() != rfde.n()
        {
            return Err(Error::Shape(
                "transversal built for a different system".into(),
            ));
        }
        Ok(Self {
            rfde,
            transversal,
            params,
            budget,
        })
    }

    pub fn rfde(&self) -> &Rfde {
        &self.rfde
    }

    pub fn transversal(&self) -> &TransversalFamily {
        &self.transversal
    }

    pub fn params(&self) -> &RegionParams {
        &self.params
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn region_test(&self, phi: &C1Fn) -> RegionStatus {
        self.rfde.region_test(&self.params, phi)
    }

    /// `R(phi)`.
    pub fn remainder(&self, phi: &C1Fn) -> Result<C1Fn> {
        let y = self.rfde.v(phi)?;
        let g = self.rfde.feedback().eval(&y)?;
        let tau = self.transversal.tau(&y)?;
        let mut values = Vec::with_capacity(phi.values().len());
        for gn in &g {
            values.extend(tau.values().iter().map(|t| gn * t));
        }
        C1Fn::new(phi.grid(), values)
    }

    /// `A(phi) = phi - R(phi)`.
    pub fn apply_chart(&self, phi: &C1Fn) -> Result<C1Fn> {
        phi.sub(&self.remainder(phi)?)
    }

    /// `|A(phi)'(0)|`.
    pub fn flatten_residual(&self, phi: &C1Fn) -> Result<f64> {
        Ok(self
            .apply_chart(phi)?
            .deriv_at_zero()
            .iter()
            .fold(0.0, |m, v| m.max(v.abs())))
    }

    pub fn linearize(&self, phi: &C1Fn) -> Result<Linearization> {
        let y = self.rfde.v(phi)?;
        let fb = self.rfde.feedback();
        let g = fb.eval(&y)?;
        let tau = self.transversal.tau(&y)?;
        let kn = y.len();
        let dtau: Vec<Option<C1Fn>> = if self.transversal.is_constant() {
            vec![None; kn]
        } else {
            (0..kn)
                .map(|mu| self.transversal.dtau(&y, mu).map(Some))
                .collect::<Result<_>>()?
        };
        let mut coeff = Vec::with_capacity(self.rfde.n());
        for (nu, gn) in g.iter().enumerate() {
            let mut row = Vec::with_capacity(kn);
            for mu in 0..kn {
                let a = fb.grad(&y, nu, mu)?;
                let c = match &dtau[mu] {
                    Some(d) => C1Fn::lincomb(a, &tau, *gn, d)?,
                    None => tau.scale(a),
                };
                row.push(c);
            }
            coeff.push(row);
        }
        Ok(Linearization {
            dv: self.rfde.dv_ext_all(phi)?,
            coeff,
            y,
        })
    }

    /// `D_e R(phi) chi`.
    pub fn dr_ext(&self, phi: &C1Fn, chi: &C0Fn) -> Result<C1Fn> {
        self.linearize(phi)?.apply(chi)
    }

    /// `DA(phi) chi = chi - D_e R(phi) chi`.
    pub fn da_apply(&self, phi: &C1Fn, chi: &C1Fn) -> Result<C1Fn> {
        chi.sub(&self.dr_ext(phi, chi)?)
    }

    /// `k n^2 (1 + m_v(phi)) (m_Dg(y) |tau(y)| + m_g(y) max_mu |D_mu tau(y)|)`.
    pub fn analytic_bound(&self, phi: &C1Fn) -> Result<f64> {
        let y = self.rfde.v(phi)?;
        let k = self.rfde.k() as f64;
        let n = self.rfde.n() as f64;
        let mv = self.rfde.m_v(phi)?;
        let tau = self.transversal.tau(&y)?.sup_norm_upper();
        let mut dtau = 0.0_f64;
        if !self.transversal.is_constant() {
            for mu in 0..y.len() {
                dtau = dtau.max(self.transversal.dtau(&y, mu)?.sup_norm_upper());
            }
        }
        Ok(k * n * n * (1.0 + mv) * (self.rfde.m_dg(&y)? * tau + self.rfde.m_g(&y)? * dtau))
    }

    /// Remainder size and operator-norm estimates of `D_e R(phi)` against the budget.
    pub fn smallness_check(&self, phi: &C1Fn, probes: &[C0Fn]) -> Result<SmallnessReport> {
        let lin = self.linearize(phi)?;
        Ok(SmallnessReport {
            remainder_sup: self.remainder(phi)?.sup_norm_upper(),
            op_lower: lin.probe_estimate(probes)?,
            op_upper: lin.structural_bound(),
            analytic_bound: self.analytic_bound(phi)?,
            budget: self.budget,
            region: self.region_test(phi),
        })
    }

    /// Solves `A(phi) = zeta` by `phi <- zeta + R(phi)`, checking the region at every iterate.
    pub fn invert(&self, zeta: &C1Fn, guess: &C1Fn, opts: IterationOptions) -> Result<Inversion> {
        let mut phi = guess.clone();
        let mut prev_inc: Option<f64> = None;
        let mut contraction = 0.0_f64;
        for it in 1..=opts.max_iter {
            if let RegionStatus::Outside(reason) = self.region_test(&phi) {
                return Err(Error::Inversion {
                    iterations: it - 1,
                    reason: format!("iterate left the region: {reason}"),
                    last: Box::new(phi),
                });
            }
            let next = zeta.add(&self.remainder(&phi)?)?;
            let inc = next.sub(&phi)?.sup_norm();
            if let Some(p) = prev_inc {
                if p >= opts.ratio_floor {
                    contraction = contraction.max(inc / p);
                }
            }
            prev_inc = Some(inc);
            phi = next;
            if inc <= opts.tol {
                let diff = self.apply_chart(&phi)?.sub(zeta)?;
                return Ok(Inversion {
                    residual: diff.sup_norm(),
                    residual_c1: diff.c1_norm(),
                    phi,
                    iterations: it,
                    contraction,
                });
            }
        }
        Err(Error::Inversion {
            iterations: opts.max_iter,
            reason: format!(
                "no convergence, last increment {:e}",
                prev_inc.unwrap_or(f64::NAN)
            ),
            last: Box::new(phi),
        })
    }

    /// [`Chart::invert`] with default options.
    pub fn invert_chart(&self, zeta: &C1Fn, guess: &C1Fn) -> Result<Inversion> {
        self.invert(zeta, guess, IterationOptions::default())
    }

    /// Solves `DA(phi) chi = psi` by `chi <- psi + D_e R(phi) chi`.
    pub fn solve_da(
        &self,
        phi: &C1Fn,
        psi: &C1Fn,
        opts: IterationOptions,
    ) -> Result<(C1Fn, usize)> {
        if let RegionStatus::Outside(reason) = self.region_test(phi) {
            return Err(Error::Domain(format!(
                "linearization point outside the region: {reason}"
            )));
        }
        let lin = self.linearize(phi)?;
        let mut chi = psi.clone();
        let mut inc = f64::INFINITY;
        for it in 1..=opts.max_iter {
            let next = psi.add(&lin.apply(&chi)?)?;
            inc = next.sub(&chi)?.sup_norm();
            chi = next;
            if inc <= opts.tol {
                return Ok((chi, it));
            }
        }
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            increment: inc,
        })
    }

    /// Checks `|A(phi) - A(psi)| >= (1 - budget) |phi - psi|`.
    ///
    /// The segment from `phi` to `psi` must stay in the region and, if given,
    /// in `subset`; otherwise the bound does not apply and is not evaluated.
    pub fn bilipschitz_lower(
        &self,
        phi: &C1Fn,
        psi: &C1Fn,
        subset: Option<&ConvexSubset>,
    ) -> Result<BilipReport> {
        for i in 0..SEGMENT_SAMPLES {
            let s = i as f64 / (SEGMENT_SAMPLES - 1) as f64;
            let x = C1Fn::lincomb(1.0 - s, phi, s, psi)?;
            let reason = match self.region_test(&x) {
                RegionStatus::Outside(r) => Some(r),
                RegionStatus::Inside => match subset {
                    Some(c) if !c.contains(&x) => Some("outside the convex subset".to_string()),
                    _ => None,
                },
            };
            if let Some(r) = reason {
                return Ok(BilipReport {
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                    margin: f64::NAN,
                    status: BilipStatus::Inapplicable(format!("segment point s = {s}: {r}")),
                });
            }
        }
        let lhs = self
            .apply_chart(phi)?
            .sub(&self.apply_chart(psi)?)?
            .sup_norm();
        let rhs = phi.sub(psi)?.sup_norm();
        let margin = lhs - (1.0 - self.budget) * rhs;
        Ok(BilipReport {
            lhs,
            rhs,
            margin,
            status: if margin >= -1e-12 {
                BilipStatus::Pass
            } else {
                BilipStatus::Fail
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::{ConstantDelay, IntegralDelay};
    use crate::funcspace::{Grid, GridSpec};
    use crate::rfde::FeedbackMap;
    use crate::transversal::{BoxOptions, ScalingFn, TransversalShape};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn grid() -> Grid {
        GridSpec::new(1.0, 1, 24).build().unwrap()
    }

    fn chart_for(feedback: FeedbackMap, delay: Arc<dyn crate::delays::DelayFunctional>) -> Chart {
        let g = grid();
        let rfde = Rfde::new(feedback.clone(), delay, g.clone()).unwrap();
        let scaling = ScalingFn::new(Scaling::Hc { eps: 0.5, c: 1.0 }, feedback).unwrap();
        let tr = TransversalFamily::constant_on_box(
            scaling,
            &g,
            TransversalShape::Chebyshev,
            vec![-2.0],
            vec![0.9],
            BoxOptions::default(),
        )
        .unwrap();
        Chart::new(rfde, tr, RegionParams::Uc { c: 1.0 }).unwrap()
    }

    fn s5() -> Chart {
        chart_for(FeedbackMap::s5(), Arc::new(IntegralDelay::standard(1.0)))
    }

    fn lin(delay: Arc<dyn crate::delays::DelayFunctional>) -> Chart {
        chart_for(FeedbackMap::identity(1, 1).unwrap(), delay)
    }

    #[test]
    fn remainder_examples() {
        let c = lin(Arc::new(IntegralDelay::standard(1.0)));
        let g = grid();
        assert_eq!(c.remainder(&C1Fn::zeros(&g)).unwrap().sup_norm(), 0.0);
        let phi = C1Fn::from_fn(&g, |t| 0.4 + 0.3 * t);
        let r = c.remainder(&phi).unwrap();
        assert_abs_diff_eq!(
            r.deriv_at_zero()[0],
            c.rfde().f(&phi).unwrap()[0],
            epsilon = 1e-10
        );

        let s = s5();
        let r = s.remainder(&C1Fn::zeros(&g)).unwrap();
        let h0 = s.transversal().h_value(&[0.0]).unwrap();
        assert!(r.sup_norm() <= h0);
    }

    #[test]
    fn constant_delay_linearization() {
        let c = lin(Arc::new(ConstantDelay::new(-0.3, 1.0).unwrap()));
        let g = grid();
        let phi = C1Fn::from_fn(&g, |t| 0.2 * t.sin());
        let chi = C0Fn::from_fn(&g, |t| (2.0 * t).cos());
        let y = c.rfde().v(&phi).unwrap();
        let tau = c.transversal().tau(&y).unwrap();
        let expected = tau.scale((2.0 * -0.3f64).cos());
        let got = c.dr_ext(&phi, &chi).unwrap();
        assert!(got.sub(&expected).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn zero_feedback_chart_is_identity() {
        let g = grid();
        let base = s5();
        let rfde = base.rfde().with_zero_feedback();
        let c = Chart::new(rfde, base.transversal().clone(), *base.params()).unwrap();
        let phi = C1Fn::from_fn(&g, |t| 0.1 * (3.0 * t).sin() - 0.2);
        assert_eq!(c.apply_chart(&phi).unwrap().values(), phi.values());
        let inv = c.invert_chart(&phi, &phi).unwrap();
        assert_eq!(inv.iterations, 1);
        let (x, _) = c.solve_da(&phi, &phi, IterationOptions::default()).unwrap();
        assert_eq!(x.values(), phi.values());
        let rep = c
            .smallness_check(&phi, &[C0Fn::from_fn(&g, |_| 1.0)])
            .unwrap();
        assert!(rep.pass());
        assert_eq!(rep.remainder_sup, 0.0);
    }

    #[test]
    fn s5_round_trips() {
        let c = s5();
        let g = grid();
        let phi = C1Fn::from_fn(&g, |t| 0.3 * (2.0 * t).sin() - 0.5);
        let zeta = c.apply_chart(&phi).unwrap();
        let inv = c.invert_chart(&zeta, &zeta).unwrap();
        assert!(inv.phi.sub(&phi).unwrap().sup_norm() <= 1e-9);
        assert!(inv.contraction <= 0.55);

        let chi = C1Fn::from_fn(&g, |t| (5.0 * t).cos());
        let psi = c.da_apply(&phi, &chi).unwrap();
        let (back, _) = c.solve_da(&phi, &psi, IterationOptions::default()).unwrap();
        assert!(back.sub(&chi).unwrap().sup_norm() <= 1e-9);
    }

    #[test]
    fn s5_smallness_at_zero() {
        let c = s5();
        let g = grid();
        let rep = c
            .smallness_check(&C1Fn::zeros(&g), &[C0Fn::from_fn(&g, |_| 1.0)])
            .unwrap();
        assert!(rep.remainder_sup < 0.5);
        assert!(rep.pass());
        assert!(rep.op_lower <= rep.op_upper * (1.0 + 1e-9));
    }

    #[test]
    fn dr_matches_difference_quotient() {
        let c = s5();
        let g = grid();
        let phi = C1Fn::from_fn(&g, |t| 0.2 + 0.3 * (2.0 * t).cos());
        let dir = C1Fn::from_fn(&g, |t| (1.0 + t).powi(3) - 0.5);
        let s = 1e-5;
        let rp = c
            .remainder(&C1Fn::lincomb(1.0, &phi, s, &dir).unwrap())
            .unwrap();
        let rm = c
            .remainder(&C1Fn::lincomb(1.0, &phi, -s, &dir).unwrap())
            .unwrap();
        let fd = C1Fn::lincomb(0.5 / s, &rp, -0.5 / s, &rm).unwrap();
        let an = c.dr_ext(&phi, &dir).unwrap();
        assert!(fd.sub(&an).unwrap().sup_norm() <= 1e-5 * an.sup_norm());
    }

    #[test]
    fn bilipschitz_trivial_cases() {
        let c = s5();
        let g = grid();
        let phi = C1Fn::from_fn(&g, |t| 0.1 * t - 0.3);
        let rep = c.bilipschitz_lower(&phi, &phi, None).unwrap();
        assert_eq!(rep.status, BilipStatus::Pass);
        let far = C1Fn::from_fn(&g, |_| 5.0);
        let rep = c.bilipschitz_lower(&phi, &far, None).unwrap();
        assert!(matches!(rep.status, BilipStatus::Inapplicable(_)));
    }

    #[test]
    fn mismatched_scaling_is_rejected() {
        let base = s5();
        let r = Chart::new(
            base.rfde().clone(),
            base.transversal().clone(),
            RegionParams::Uc { c: 2.0 },
        );
        assert!(r.is_err());
    }
}
