//! Every numeric tolerance used by the suites, with one override point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Step of central finite differences.
    pub fd_step: f64,
    /// Relative error allowed between finite differences and extended derivatives.
    pub fd_relative: f64,
    /// Relative error allowed for the finite difference of the remainder.
    pub fd_remainder: f64,
    /// `|tau(y)'(0) - 1|`.
    pub slope: f64,
    /// Slack on `sup tau <= H` and `sup D tau <= H` outside box mode.
    pub envelope_slack: f64,
    /// Projection target for `phi'(0) = f(phi)`.
    pub membership: f64,
    /// `|A(phi)'(0)|` on manifold points.
    pub flatten: f64,
    /// `|A(phi) - phi|` when `f(phi) = 0`.
    pub fixed_point: f64,
    /// Sup-norm error of chart and derivative round trips.
    pub round_trip: f64,
    /// Allowed excess of the empirical contraction factor over the budget.
    pub contraction_slack: f64,
    /// Absolute slack of the bi-Lipschitz lower bound.
    pub bilipschitz_slack: f64,
    /// Absolute slack of norm and functional inequalities.
    pub inequality: f64,
    /// Flow residual along trajectories.
    pub flow_residual: f64,
    /// Chart flattening along trajectory segments.
    pub flow_flatten: f64,
    /// Required reduction of the flow residual when `dt` halves.
    pub halving_factor: f64,
    /// Sup error of the exponential benchmark.
    pub benchmark: f64,
    /// Minimal gap for the non-constancy demonstration.
    pub demo_ray_gap: f64,
    /// Minimal gap for the pair demonstration.
    pub demo_pair_gap: f64,
    /// Relative slack when comparing operator norms with closed-form lower bounds.
    pub demo_norm_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fd_step: 1e-5,
            fd_relative: 1e-6,
            fd_remainder: 1e-5,
            slope: 1e-10,
            envelope_slack: 1e-12,
            membership: 1e-10,
            flatten: 1e-8,
            fixed_point: 1e-12,
            round_trip: 1e-9,
            contraction_slack: 0.05,
            bilipschitz_slack: 1e-12,
            inequality: 1e-12,
            flow_residual: 1e-5,
            flow_flatten: 1e-5,
            halving_factor: 4.0,
            benchmark: 1e-6,
            demo_ray_gap: 1e-12,
            demo_pair_gap: 1e-10,
            demo_norm_relative: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("fd_step", self.fd_step),
            ("fd_relative", self.fd_relative),
            ("fd_remainder", self.fd_remainder),
            ("slope", self.slope),
            ("envelope_slack", self.envelope_slack),
            ("membership", self.membership),
            ("flatten", self.flatten),
            ("fixed_point", self.fixed_point),
            ("round_trip", self.round_trip),
            ("contraction_slack", self.contraction_slack),
            ("bilipschitz_slack", self.bilipschitz_slack),
            ("inequality", self.inequality),
            ("flow_residual", self.flow_residual),
            ("flow_flatten", self.flow_flatten),
            ("halving_factor", self.halving_factor),
            ("benchmark", self.benchmark),
            ("demo_ray_gap", self.demo_ray_gap),
            ("demo_pair_gap", self.demo_pair_gap),
            ("demo_norm_relative", self.demo_norm_relative),
        ];
        for (name, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Scenario(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}
