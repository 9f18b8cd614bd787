//! Method-of-steps integration of `x'(t) = f(x_t)` with a dense history.
//!
//! Each step is classical RK4. A stage at time `t` builds the segment `x_t`
//! from the stored history on `[t - h, t_n]` and, on `(t_n, t]`, from the
//! quadratic through `x(t_n)` with slope `x'(t_n)` that ends at the stage
//! value. The segment is resampled on the collocation grid and `f` is
//! evaluated on that polynomial. After a step the derivative at the new knot
//! is recomputed from the completed history.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{C1Fn, Grid};
use crate::rfde::Rfde;

/// How delayed values enter the right-hand side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayedEval {
    /// `f` of the resampled segment; consistent with [`Trajectory::flow_residual`].
    #[default]
    Segment,
    /// `g` of the dense history at `t + d(x_t)`.
    Hermite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub delayed_eval: DelayedEval,
    /// Fixed-point passes for the derivative at each new knot.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    /// Largest accepted initial membership residual.
    #[serde(default = "default_membership_tol")]
    pub membership_tol: f64,
}

fn default_refinements() -> usize {
    2
}

fn default_membership_tol() -> f64 {
    1e-8
}

impl IntegrateOptions {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self {
            t_final,
            dt,
            delayed_eval: DelayedEval::Segment,
            refinements: default_refinements(),
            membership_tol: default_membership_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    /// Stopped before `t_final` because `f` could not be evaluated.
    LeftDomain {
        t: f64,
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Grid,
    phi0: C1Fn,
    dt: f64,
    xs: Vec<Vec<f64>>,
    dxs: Vec<Vec<f64>>,
    delays: Vec<Vec<f64>>,
    status: TrajectoryStatus,
    predictor_stages: usize,
}

impl Trajectory {
    fn new(phi0: &C1Fn, dt: f64) -> Self {
        Self {
            grid: phi0.grid().clone(),
            phi0: phi0.clone(),
            dt,
            xs: vec![phi0.at_zero()],
            dxs: vec![phi0.deriv_at_zero()],
            delays: Vec::new(),
            status: TrajectoryStatus::Completed,
            predictor_stages: 0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn status(&self) -> &TrajectoryStatus {
        &self.status
    }

    /// Last time covered by the history.
    pub fn t_end(&self) -> f64 {
        self.knot_time(self.xs.len() - 1)
    }

    pub fn knot_time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn knots(&self) -> usize {
        self.xs.len()
    }

    pub fn x_at_knot(&self, i: usize) -> &[f64] {
        &self.xs[i]
    }

    pub fn dx_at_knot(&self, i: usize) -> &[f64] {
        &self.dxs[i]
    }

    /// `d(x_t)` at knot `i`.
    pub fn delays_at_knot(&self, i: usize) -> Option<&[f64]> {
        self.delays.get(i).map(|v| v.as_slice())
    }

    /// Number of stages whose delayed argument fell inside the current step.
    pub fn predictor_stages(&self) -> usize {
        self.predictor_stages
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.t_end();
        if t > end + 1e-12 * self.dt {
            return Err(Error::Integration(format!(
                "history requested at {t} beyond {end}"
            )));
        }
        let i = ((t / self.dt).floor() as usize).min(self.xs.len().saturating_sub(2));
        let s = ((t - self.knot_time(i)) / self.dt).clamp(0.0, 1.0);
        Ok((i, s))
    }

    /// `x(t)` for `-h <= t <= t_end`.
    pub fn x(&self, t: f64) -> Result<Vec<f64>> {
        if t <= 0.0 {
            return self.phi0.eval(t);
        }
        if self.xs.len() < 2 {
            return Err(Error::Integration(format!("no history at {t}")));
        }
        let (i, s) = self.locate(t)?;
        let (h00, h10, h01, h11) = (
            (2.0 * s - 3.0) * s * s + 1.0,
            ((s - 2.0) * s + 1.0) * s,
            (3.0 - 2.0 * s) * s * s,
            (s - 1.0) * s * s,
        );
        let dt = self.dt;
        Ok((0..self.grid.n())
            .map(|nu| {
                h00 * self.xs[i][nu]
                    + h10 * dt * self.dxs[i][nu]
                    + h01 * self.xs[i + 1][nu]
                    + h11 * dt * self.dxs[i + 1][nu]
            })
            .collect())
    }

    /// `x'(t)` from the dense history.
    pub fn dx(&self, t: f64) -> Result<Vec<f64>> {
        if t <= 0.0 {
            let d = self.phi0.deriv();
            return d.eval(t);
        }
        if self.xs.len() < 2 {
            return Err(Error::Integration(format!("no history at {t}")));
        }
        let (i, s) = self.locate(t)?;
        let dt = self.dt;
        let (a00, a10, a01, a11) = (
            6.0 * s * s - 6.0 * s,
            3.0 * s * s - 4.0 * s + 1.0,
            -6.0 * s * s + 6.0 * s,
            3.0 * s * s - 2.0 * s,
        );
        Ok((0..self.grid.n())
            .map(|nu| {
                (a00 * self.xs[i][nu] + a01 * self.xs[i + 1][nu]) / dt
                    + a10 * self.dxs[i][nu]
                    + a11 * self.dxs[i + 1][nu]
            })
            .collect())
    }

    /// `x_t` resampled on the collocation grid, `0 <= t <= t_end`.
    pub fn segment(&self, t: f64) -> Result<C1Fn> {
        if !(t >= 0.0 && t <= self.t_end() + 1e-12 * self.dt) {
            return Err(Error::Domain(format!(
                "segment time {t} outside [0, {}]",
                self.t_end()
            )));
        }
        if t == 0.0 {
            return Ok(self.phi0.clone());
        }
        self.segment_with(t, None)
    }

    /// Segment at `t`, with `ext(s)` supplying values at `t_n + s` beyond knot `n`.
    fn segment_with(&self, t: f64, ext: Option<(&Extension, f64)>) -> Result<C1Fn> {
        let n = self.grid.n();
        let len = self.grid.len();
        let mut values = vec![0.0; n * len];
        for (j, &s) in self.grid.nodes().iter().enumerate() {
            let tau = t + s;
            let x = match ext {
                Some((e, tn)) if tau > tn => e.eval(tau - tn),
                _ => self.x(tau)?,
            };
            for nu in 0..n {
                values[nu * len + j] = x[nu];
            }
        }
        C1Fn::new(&self.grid, values)
    }

    /// `max |x'(t) - f(x_t)|` over `times`.
    pub fn flow_residual(&self, rfde: &Rfde, times: &[f64]) -> Result<f64> {
        let mut worst = 0.0_f64;
        for &t in times {
            worst = worst.max(self.residual_at(rfde, t)?);
        }
        Ok(worst)
    }

    /// `|x'(t) - f(x_t)|`.
    pub fn residual_at(&self, rfde: &Rfde, t: f64) -> Result<f64> {
        let seg = self.segment(t)?;
        let f = rfde.f(&seg)?;
        let dx = if t == 0.0 {
            seg.deriv_at_zero()
        } else {
            self.dx(t)?
        };
        Ok(dx
            .iter()
            .zip(&f)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Quarter-step times `t_i + dt/4` inside the covered interval.
    pub fn quarter_times(&self) -> Vec<f64> {
        (0..self.xs.len().saturating_sub(1))
            .map(|i| self.knot_time(i) + 0.25 * self.dt)
            .collect()
    }

    /// CSV with one row per knot: `t, x, x', d, residual` where the residual
    /// is sampled a quarter step after the knot (empty on the last row).
    pub fn to_csv(&self, rfde: &Rfde) -> Result<String> {
        let n = self.grid.n();
        let k = rfde.k();
        let mut out = String::from("# schema=1\nt");
        for nu in 1..=n {
            let _ = write!(out, ",x_{nu}");
        }
        for nu in 1..=n {
            let _ = write!(out, ",dx_{nu}");
        }
        for kappa in 1..=k {
            let _ = write!(out, ",d_{kappa}");
        }
        out.push_str(",residual\n");
        for i in 0..self.xs.len() {
            let t = self.knot_time(i);
            let _ = write!(out, "{t:.6}");
            for v in self.xs[i].iter().chain(&self.dxs[i]) {
                let _ = write!(out, ",{v:.12e}");
            }
            match self.delays.get(i) {
                Some(d) => {
                    for v in d {
                        let _ = write!(out, ",{v:.12e}");
                    }
                }
                None => out.push_str(&",".repeat(k)),
            }
            if i + 1 < self.xs.len() {
                let r = self.residual_at(rfde, t + 0.25 * self.dt)?;
                let _ = write!(out, ",{r:.6e}");
            } else {
                out.push(',');
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Quadratic continuation `x_n + s x'_n + a s^2` over the current step.
struct Extension {
    x: Vec<f64>,
    dx: Vec<f64>,
    a: Vec<f64>,
}

impl Extension {
    fn through(x: &[f64], dx: &[f64], end: &[f64], s_end: f64) -> Self {
        let a = (0..x.len())
            .map(|nu| (end[nu] - x[nu] - dx[nu] * s_end) / (s_end * s_end))
            .collect();
        Self {
            x: x.to_vec(),
            dx: dx.to_vec(),
            a,
        }
    }

    fn eval(&self, s: f64) -> Vec<f64> {
        (0..self.x.len())
            .map(|nu| self.x[nu] + s * self.dx[nu] + s * s * self.a[nu])
            .collect()
    }
}

struct Rhs<'a> {
    rfde: &'a Rfde,
    mode: DelayedEval,
}

impl Rhs<'_> {
    /// Right-hand side at `t` and the delays, plus whether a delayed argument fell after `tn`.
    fn eval(
        &self,
        traj: &Trajectory,
        t: f64,
        ext: Option<(&Extension, f64)>,
    ) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let seg = traj.segment_with(t, ext)?;
        let d = self.rfde.delays(&seg)?;
        if let Some(dk) = d.iter().find(|d| **d > 0.0) {
            return Err(Error::Integration(format!("positive delay {dk}")));
        }
        let tn = ext.map(|(_, tn)| tn).unwrap_or(t);
        let in_step = ext.is_some() && d.iter().any(|dk| t + dk > tn);
        let f = match self.mode {
            DelayedEval::Segment => self.rfde.f(&seg)?,
            DelayedEval::Hermite => {
                let mut y = Vec::with_capacity(d.len() * self.rfde.n());
                for dk in &d {
                    let tau = t + dk;
                    let x = match ext {
                        Some((e, tn)) if tau > tn => e.eval(tau - tn),
                        _ => traj.x(tau)?,
                    };
                    y.extend(x);
                }
                self.rfde.feedback().eval(&y)?
            }
        };
        Ok((f, d, in_step))
    }
}

/// Integrates from `phi0` on the solution manifold up to `opts.t_final`.
///
/// Leaving the domain of `f` ends the run early with
/// [`TrajectoryStatus::LeftDomain`]; other failures are errors.
pub fn integrate(rfde: &Rfde, phi0: &C1Fn, opts: IntegrateOptions) -> Result<Trajectory> {
    let h = rfde.grid().h();
    if !(opts.t_final > 0.0 && opts.t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "final time {} must be positive",
            opts.t_final
        )));
    }
    if !(opts.dt > 0.0 && opts.dt <= h / 10.0) {
        return Err(Error::InvalidParameter(format!(
            "step {} must lie in (0, h/10]",
            opts.dt
        )));
    }
    let m = rfde.membership_error(phi0)?;
    if m > opts.membership_tol {
        return Err(Error::NotOnManifold(m));
    }
    let rhs = Rhs {
        rfde,
        mode: opts.delayed_eval,
    };
    let dt = opts.dt;
    let steps = (opts.t_final / dt - 1e-9).ceil() as usize;
    let mut traj = Trajectory::new(phi0, dt);
    traj.delays.push(rfde.delays(phi0)?);
    let n = rfde.n();
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(x, k)| x + a * k).collect()
    };

    for step in 0..steps {
        let tn = traj.knot_time(step);
        let xn = traj.xs[step].clone();
        let dxn = traj.dxs[step].clone();
        let outcome = (|| -> Result<(Vec<f64>, Vec<f64>, usize)> {
            let mut flagged = 0;
            let k1 = dxn.clone();
            let x2 = axpy(&xn, 0.5 * dt, &k1);
            let e2 = Extension::through(&xn, &dxn, &x2, 0.5 * dt);
            let (k2, _, f2) = rhs.eval(&traj, tn + 0.5 * dt, Some((&e2, tn)))?;
            let x3 = axpy(&xn, 0.5 * dt, &k2);
            let e3 = Extension::through(&xn, &dxn, &x3, 0.5 * dt);
            let (k3, _, f3) = rhs.eval(&traj, tn + 0.5 * dt, Some((&e3, tn)))?;
            let x4 = axpy(&xn, dt, &k3);
            let e4 = Extension::through(&xn, &dxn, &x4, dt);
            let (k4, _, f4) = rhs.eval(&traj, tn + dt, Some((&e4, tn)))?;
            flagged += [f2, f3, f4].iter().filter(|f| **f).count();
            let x_next: Vec<f64> = (0..n)
                .map(|nu| xn[nu] + dt / 6.0 * (k1[nu] + 2.0 * k2[nu] + 2.0 * k3[nu] + k4[nu]))
                .collect();
            Ok((x_next, k4, flagged))
        })();
        let (x_next, guess, flagged) = match outcome {
            Ok(v) => v,
            Err(e @ (Error::OutsideV { .. } | Error::Domain(_))) => {
                traj.status = TrajectoryStatus::LeftDomain {
                    t: tn,
                    reason: e.to_string(),
                };
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        traj.predictor_stages += flagged;
        traj.xs.push(x_next);
        traj.dxs.push(guess);
        let t_next = traj.knot_time(step + 1);
        let mut last_delays = None;
        for _ in 0..opts.refinements.max(1) {
            match rhs.eval(&traj, t_next, None) {
                Ok((f, d, _)) => {
                    *traj.dxs.last_mut().expect("knot") = f;
                    last_delays = Some(d);
                }
                Err(e @ (Error::OutsideV { .. } | Error::Domain(_))) => {
                    traj.xs.pop();
                    traj.dxs.pop();
                    traj.status = TrajectoryStatus::LeftDomain {
                        t: tn,
                        reason: e.to_string(),
                    };
                    return Ok(traj);
                }
                Err(e) => return Err(e),
            }
        }
        traj.delays
            .push(last_delays.expect("at least one refinement"));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::ConstantDelay;
    use crate::funcspace::GridSpec;
    use crate::rfde::{FeedbackMap, VDomain};
    use std::sync::Arc;

    fn grid() -> Grid {
        GridSpec::new(1.0, 1, 24).build().unwrap()
    }

    #[test]
    fn zero_feedback_keeps_state_constant() {
        let g = grid();
        let rfde = Rfde::new(
            FeedbackMap::zero(1, 1, VDomain::Whole).unwrap(),
            Arc::new(ConstantDelay::new(-0.5, 1.0).unwrap()),
            g.clone(),
        )
        .unwrap();
        let phi0 = C1Fn::from_fn(&g, |t| 0.3 + t * t * t);
        let traj = integrate(&rfde, &phi0, IntegrateOptions::new(1.5, 0.01)).unwrap();
        assert_eq!(traj.status(), &TrajectoryStatus::Completed);
        for i in 0..traj.knots() {
            assert!((traj.x_at_knot(i)[0] - 0.3).abs() < 1e-15);
        }
        let seg = traj.segment(1.2).unwrap();
        assert!(seg.values().iter().all(|v| (v - 0.3).abs() < 1e-14));
        assert!(traj.flow_residual(&rfde, &traj.quarter_times()).unwrap() < 1e-13);
    }

    #[test]
    fn preconditions() {
        let g = grid();
        let rfde = Rfde::new(
            FeedbackMap::identity(1, 1).unwrap(),
            Arc::new(ConstantDelay::new(-0.5, 1.0).unwrap()),
            g.clone(),
        )
        .unwrap();
        let off = C1Fn::from_fn(&g, |_| 1.0);
        assert!(matches!(
            integrate(&rfde, &off, IntegrateOptions::new(1.0, 0.01)),
            Err(Error::NotOnManifold(_))
        ));
        let z = C1Fn::zeros(&g);
        assert!(integrate(&rfde, &z, IntegrateOptions::new(1.0, 0.2)).is_err());
        let traj = integrate(&rfde, &z, IntegrateOptions::new(0.1, 0.01)).unwrap();
        assert!(traj.segment(0.2).is_err());
        assert_eq!(traj.segment(0.0).unwrap().values(), z.values());
    }

    #[test]
    fn csv_has_schema_line() {
        let g = grid();
        let rfde = Rfde::new(
            FeedbackMap::identity(1, 1).unwrap(),
            Arc::new(ConstantDelay::new(-0.5, 1.0).unwrap()),
            g.clone(),
        )
        .unwrap();
        let traj = integrate(&rfde, &C1Fn::zeros(&g), IntegrateOptions::new(0.05, 0.01)).unwrap();
        let csv = traj.to_csv(&rfde).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# schema=1"));
        assert_eq!(lines.next(), Some("t,x_1,dx_1,d_1,residual"));
        assert_eq!(csv.lines().count(), 2 + traj.knots());
    }
}
