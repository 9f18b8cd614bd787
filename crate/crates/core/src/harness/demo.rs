//! Demonstrations that the example system violates the factorization,
//! delay-bounded-away-from-zero and bounded-derivative conditions.

use serde::Serialize;

use super::probes::digest;
use super::report::{CheckRecord, Report};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::funcspace::C1Fn;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    /// `|D_e f(-n)|`.
    pub op_norm: f64,
    /// `|g'(-n)| = 2 (1 + n)`.
    pub lower_bound: f64,
}

#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub report: Report,
    pub growth: Vec<GrowthRow>,
}

impl DemoOutcome {
    pub fn growth_csv(&self) -> String {
        let mut s = String::from("# schema=1\nn,op_norm,lower_bound,increasing\n");
        for (i, r) in self.growth.iter().enumerate() {
            let inc = i == 0 || r.op_norm > self.growth[i - 1].op_norm;
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{}\n",
                r.n, r.op_norm, r.lower_bound, inc
            ));
        }
        s
    }
}

fn record(
    name: &str,
    digest: String,
    measured: f64,
    bound: f64,
    pass: bool,
    detail: String,
) -> CheckRecord {
    CheckRecord {
        name: name.into(),
        family: "demo".into(),
        inputs_digest: digest,
        measured,
        bound,
        pass,
        negative_control: false,
        detail,
    }
}

/// Runs the three demonstrations; the system must be the `s5` example.
pub fn demo_conditions(sc: &Scenario) -> Result<DemoOutcome> {
    if !sc.is_s5() || sc.system.zero_feedback {
        return Err(Error::Scenario(
            "the demonstrations need the s5 system".into(),
        ));
    }
    let rfde = sc.rfde()?;
    let grid = rfde.grid().clone();
    let h = grid.h();
    let tol = &sc.tolerances;
    let mut report = Report::new("demo5", &sc.name, sc.seed);

    // Non-constancy of the delay along a ray through a positive bump.
    let eps = 0.1;
    let bump = C1Fn::from_fn(&grid, |t| (-((t + 0.5 * h) / (0.15 * h)).powi(2)).exp());
    let d1 = rfde.delays(&bump.scale(eps))?[0];
    let d2 = rfde.delays(&bump.scale(2.0 * eps))?[0];
    let gap = (d1 - d2).abs();
    report.push(record(
        "ray_non_constancy",
        digest(&[bump.as_c0()], &[eps]),
        gap,
        tol.demo_ray_gap,
        gap > tol.demo_ray_gap,
        format!("d(eps phi) = {d1:.15}, d(2 eps phi) = {d2:.15}, eps = {eps}"),
    ));

    // Two increasing states that agree on [-h, s] and at 0 but give different f.
    let s = -0.5 * h;
    let base = |t: f64| 0.3 * (t + h) / h;
    let lift = |t: f64| {
        if t > s {
            40.0 * (t - s).powi(4) * t * t / h.powi(6)
        } else {
            0.0
        }
    };
    let phi = C1Fn::from_fn(&grid, base);
    let psi = C1Fn::from_fn(&grid, |t| base(t) + lift(t));
    let dpsi = psi.deriv();
    let mut increasing = true;
    let mut defect = 0.0_f64;
    for &t in grid.fine_points() {
        increasing &= dpsi.eval(t)?[0] > 0.0;
        defect = defect.max((psi.eval(t)?[0] - base(t) - lift(t)).abs());
    }
    let (fphi, fpsi) = (rfde.f(&phi)?[0], rfde.f(&psi)?[0]);
    let gap = (fphi - fpsi).abs();
    // The spectral representation of psi is not exactly flat on [-h, s];
    // the gap must exceed what that representation error alone could cause.
    let explained = rfde.df_ext(&phi)?[0].op_norm() * defect;
    report.push(record(
        "pair_same_values_near_delay",
        digest(&[phi.as_c0(), psi.as_c0()], &[s]),
        gap,
        tol.demo_pair_gap,
        gap > tol.demo_pair_gap && gap > explained && increasing,
        format!(
            "s = {s}: f(phi) = {fphi:.15}, f(psi) = {fpsi:.15}; psi increasing {increasing}; \
             psi - phi = 40 (t - s)^4 t^2 on (s, 0), 0 on [-h, s]; representation error {defect:.1e} \
             accounts for at most {explained:.1e}"
        ),
    ));

    // Unbounded extended derivatives along the constants -n.
    let mut growth = Vec::new();
    for n in 1..=10 {
        let phi = C1Fn::from_fn(&grid, |_| -(n as f64));
        let op_norm = rfde.df_ext(&phi)?[0].op_norm();
        growth.push(GrowthRow {
            n,
            op_norm,
            lower_bound: 2.0 * (1.0 + n as f64),
        });
    }
    let worst = growth
        .iter()
        .map(|r| r.op_norm / r.lower_bound)
        .fold(f64::INFINITY, f64::min);
    let increasing = growth.windows(2).all(|w| w[1].op_norm > w[0].op_norm);
    report.push(record(
        "derivative_growth",
        digest(&[], &growth.iter().map(|r| r.op_norm).collect::<Vec<_>>()),
        worst,
        1.0 - tol.demo_norm_relative,
        worst >= 1.0 - tol.demo_norm_relative && increasing,
        format!(
            "min over n = 1..10 of |D_e f(-n)| / 2(1 + n); strictly increasing {increasing}; last {:.6}",
            growth.last().map(|r| r.op_norm).unwrap_or(f64::NAN)
        ),
    ));
    Ok(DemoOutcome { report, growth })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_demo_passes() {
        let d = demo_conditions(&Scenario::s5()).unwrap();
        for l in d.report.lines() {
            println!("{l}");
        }
        assert!(d.report.ok());
        assert_eq!(d.growth.len(), 10);
        assert!(d.growth_csv().starts_with("# schema=1\n"));
    }

    #[test]
    fn rejects_other_systems() {
        assert!(demo_conditions(&Scenario::lin()).is_err());
    }
}
