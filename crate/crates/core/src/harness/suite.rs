//! The verification suite.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::probes::{
    digest, operator_probes, rejection_sample, rng_for, unit_direction, SeriesShape,
};
use super::report::{CheckRecord, Report};
use super::scenario::{Built, DelayKind, Scenario, TransversalMode};
use crate::chart::{BilipStatus, Chart};
use crate::ddesolver::{integrate, IntegrateOptions, Trajectory, TrajectoryStatus};
use crate::delays::{
    fd_check_delay, relative_error, ConstantDelay, DelayFunctional, IntegralDelay, QBound,
};
use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, C1Fn, Grid};
use crate::functionals::ExtLinFunctional;
use crate::rfde::{projection_direction, FeedbackMap, RegionParams, Rfde};
use crate::roots;
use crate::transversal::{BoxOptions, Profile, Scaling, ScalingFn, TransversalFamily};

/// What a single check measured.
struct Outcome {
    measured: f64,
    bound: f64,
    pass: bool,
    digest: String,
    detail: String,
}

impl Outcome {
    fn at_most(measured: f64, bound: f64, digest: String, detail: impl Into<String>) -> Self {
        Self {
            measured,
            bound,
            pass: measured <= bound,
            digest,
            detail: detail.into(),
        }
    }

    fn below(measured: f64, bound: f64, digest: String, detail: impl Into<String>) -> Self {
        Self {
            pass: measured < bound,
            ..Self::at_most(measured, bound, digest, detail)
        }
    }

    fn at_least(measured: f64, bound: f64, digest: String, detail: impl Into<String>) -> Self {
        Self {
            pass: measured >= bound,
            ..Self::at_most(measured, bound, digest, detail)
        }
    }
}

struct Suite<'a> {
    sc: &'a Scenario,
    report: Report,
}

impl<'a> Suite<'a> {
    fn new(sc: &'a Scenario, name: &str) -> Self {
        Self {
            sc,
            report: Report::new(name, &sc.name, sc.seed),
        }
    }

    fn rng(&self, name: &str) -> ChaCha8Rng {
        rng_for(self.sc.seed, name)
    }

    fn run(
        &mut self,
        family: &str,
        name: &str,
        negative_control: bool,
        check: impl FnOnce() -> Result<Outcome>,
    ) {
        let record = match check() {
            Ok(o) => CheckRecord {
                name: name.into(),
                family: family.into(),
                inputs_digest: o.digest,
                measured: o.measured,
                bound: o.bound,
                pass: o.pass,
                negative_control,
                detail: o.detail,
            },
            Err(e) => CheckRecord {
                name: name.into(),
                family: family.into(),
                inputs_digest: String::new(),
                measured: f64::NAN,
                bound: f64::NAN,
                pass: false,
                negative_control,
                detail: format!("error: {e}"),
            },
        };
        self.report.push(record);
    }
}

fn c0s(fns: &[C1Fn]) -> Vec<&C0Fn> {
    fns.iter().map(|f| f.as_c0()).collect()
}

fn y_in_box(b: &Built, phi: &C1Fn) -> bool {
    match b.rfde.v(phi) {
        Ok(y) => y
            .iter()
            .enumerate()
            .all(|(i, v)| b.lo[i % b.lo.len()] <= *v && *v <= b.hi[i % b.hi.len()]),
        Err(_) => false,
    }
}

/// Probes in the chart's region whose delayed values lie in the working box.
fn region_probes(
    sc: &Scenario,
    b: &Built,
    shape: &SeriesShape,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Result<Vec<C1Fn>> {
    rejection_sample(rng, &b.grid, shape, count, |p| {
        !sc.probes.reject_outside || (y_in_box(b, p) && b.chart.region_test(p).is_inside())
    })
}

fn directions(rng: &mut ChaCha8Rng, grid: &Grid, count: usize, terms: usize) -> Result<Vec<C1Fn>> {
    (0..count)
        .map(|_| unit_direction(rng, grid, terms))
        .collect()
}

fn uniform_in_box(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| if a < b { rng.gen_range(*a..*b) } else { *a })
        .collect()
}

/// Runs every check of the scenario.
pub fn run_suite(sc: &Scenario) -> Result<Report> {
    sc.validate()?;
    let b = sc.build()?;
    let shape = sc.probe_shape()?;
    let mut s = Suite::new(sc, "check");
    let tol = sc.tolerances.clone();
    let probes = region_probes(sc, &b, &shape, &mut s.rng("probes"), sc.probes.count)?;
    let op_probes = operator_probes(
        &mut s.rng("operator-probes"),
        &b.grid,
        sc.probes.operator_probes,
        sc.probes.terms,
    )?;
    s.report.note(format!(
        "{} probes: offsets in [{}, {}], amplitude {}, {} terms, decay {}; transversal {}",
        probes.len(),
        shape.offset_lo,
        shape.offset_hi,
        shape.amplitude,
        shape.terms,
        super::probes::COEFF_DECAY,
        b.chart.transversal().describe()
    ));

    funcspace_checks(&mut s, &b, &probes, &tol);
    delay_checks(&mut s, &b, &probes, &tol);
    derivative_checks(&mut s, &b, &probes, &tol);
    transversal_checks(&mut s, &b, &tol);
    smallness_checks(&mut s, &b, &probes, &op_probes);
    chart_checks(&mut s, &b, &shape, &tol);
    inversion_checks(&mut s, &b, &probes, &tol);
    bilipschitz_checks(&mut s, &b, &shape);
    flow_checks(&mut s, &b, &tol);
    if sc.negative_controls {
        control_checks(&mut s, &b, &op_probes, &tol);
    }
    Ok(s.report)
}

fn funcspace_checks(s: &mut Suite, b: &Built, probes: &[C1Fn], tol: &super::Tolerances) {
    let mut rng = s.rng("norms");
    s.run("funcspace", "norm_sandwich", false, || {
        let mut worst = 0.0_f64;
        for p in probes {
            let sup = p.sup_norm();
            let scale = 1.0 + sup;
            worst = worst.max((sup - p.c1_norm()) / scale);
            worst = worst.max((sup - p.sup_norm_upper()) / scale);
            for _ in 0..5 {
                let t = rng.gen_range(-b.grid.h()..=0.0);
                for v in p.eval(t)? {
                    worst = worst.max((v.abs() - sup) / scale);
                }
            }
        }
        Ok(Outcome::at_most(
            worst,
            tol.inequality,
            digest(&c0s(probes), &[]),
            "max of |phi(t)| - |phi|, |phi| - |phi|_1, |phi| - upper bound, relative",
        ))
    });
    s.run("funcspace", "quadrature_exactness", false, || {
        let g = b.grid.scalar();
        let h = g.h();
        let mut worst = 0.0_f64;
        for k in 0..=g.degree() {
            let f = C0Fn::from_fn(&g, |t| t.powi(k as i32));
            let exact = -(-h).powi(k as i32 + 1) / (k as f64 + 1.0);
            worst = worst.max((f.integrate()[0] - exact).abs() / exact.abs().max(1.0));
        }
        Ok(Outcome::at_most(
            worst,
            tol.inequality,
            digest(&[], &[h]),
            "monomials up to degree N",
        ))
    });
    s.run("functionals", "apply_bounded_by_norm", false, || {
        let mut worst = 0.0_f64;
        let mut dirs = s_rng_dirs(&mut rng, b, probes.len())?.into_iter();
        for p in probes {
            let chi = dirs.next().expect("one direction per probe").into_c0();
            let mut ls = b.rfde.df_ext(p)?;
            ls.extend(b.rfde.dv_ext_all(p)?);
            for l in &ls {
                let norm = l.op_norm();
                worst = worst.max((l.apply(&chi)?.abs() - norm * chi.sup_norm()) / (1.0 + norm));
            }
        }
        Ok(Outcome::at_most(
            worst,
            tol.inequality,
            digest(&c0s(probes), &[]),
            "max of |L chi| - |L| |chi| over D_e f and D_e v at every probe",
        ))
    });
    s.run("functionals", "linearity", false, || {
        let mut worst = 0.0_f64;
        for p in probes.iter().take(20) {
            let dirs = s_rng_dirs(&mut rng, b, 2)?;
            let (a, c) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = C0Fn::lincomb(a, dirs[0].as_c0(), c, dirs[1].as_c0())?;
            for l in b.rfde.df_ext(p)? {
                let lhs = l.apply(&mix)?;
                let rhs = a * l.apply(dirs[0].as_c0())? + c * l.apply(dirs[1].as_c0())?;
                worst = worst
                    .max((lhs - rhs).abs() / ((1.0 + a.abs() + c.abs()) * (1.0 + l.op_norm())));
            }
        }
        Ok(Outcome::at_most(
            worst,
            tol.inequality,
            digest(&c0s(probes), &[]),
            "D_e f on combinations of two directions",
        ))
    });
}

fn s_rng_dirs(rng: &mut ChaCha8Rng, b: &Built, count: usize) -> Result<Vec<C1Fn>> {
    directions(rng, &b.grid, count, 8)
}

fn delay_checks(s: &mut Suite, b: &Built, probes: &[C1Fn], tol: &super::Tolerances) {
    let sc = s.sc;
    for kind in [
        DelayKind::Integral,
        DelayKind::Constant,
        DelayKind::Factorized,
    ] {
        let name = kind_name(kind);
        let mut rng = s.rng(&format!("fd-delay-{name}"));
        let delay = sc.delay_of(kind, &b.grid);
        let count = sc.probes.fd_directions;
        s.run("delays", &format!("fd_delay_{name}"), false, || {
            let d = delay.as_ref().map_err(clone_err)?;
            let mut worst = 0.0_f64;
            let dirs = directions(&mut rng, &b.grid, count, sc.probes.terms)?;
            for (i, chi) in dirs.iter().enumerate() {
                worst = worst.max(fd_check_delay(
                    d.as_ref(),
                    &probes[i % probes.len()],
                    chi,
                    tol.fd_step,
                )?);
            }
            Ok(Outcome::at_most(
                worst,
                tol.fd_relative,
                digest(&c0s(&dirs), &[tol.fd_step]),
                format!(
                    "{count} directions, step {:e}, {}",
                    tol.fd_step,
                    d.describe()
                ),
            ))
        });
        s.run("delays", &format!("q_bound_{name}"), false, || {
            let d = delay.as_ref().map_err(clone_err)?;
            let mut worst = 0.0_f64;
            for p in probes {
                for kappa in 0..d.k() {
                    worst = worst.max(d.ext_derivative(p, kappa)?.op_norm());
                }
            }
            Ok(match d.q_bound() {
                QBound::Certified(q) => {
                    Outcome::at_most(worst, q, digest(&c0s(probes), &[]), "certified bound")
                }
                QBound::Estimated(q) => {
                    Outcome::at_most(worst, q, digest(&c0s(probes), &[]), "estimated bound")
                }
                QBound::Unknown => Outcome::at_most(
                    worst,
                    f64::INFINITY,
                    digest(&c0s(probes), &[]),
                    "no bound declared",
                ),
            })
        });
    }
}

fn clone_err(e: &Error) -> Error {
    Error::Scenario(e.to_string())
}

fn kind_name(kind: DelayKind) -> &'static str {
    match kind {
        DelayKind::Integral => "integral",
        DelayKind::Constant => "constant",
        DelayKind::Factorized => "factorized",
    }
}

fn derivative_checks(s: &mut Suite, b: &Built, probes: &[C1Fn], tol: &super::Tolerances) {
    let sc = s.sc;
    let step = tol.fd_step;
    for kind in [
        DelayKind::Integral,
        DelayKind::Constant,
        DelayKind::Factorized,
    ] {
        let name = kind_name(kind);
        let rfde =
            s.sc.delay_of(kind, &b.grid)
                .and_then(|d| Rfde::new(b.rfde.feedback().clone(), d, b.grid.clone()));
        let mut rng = s.rng(&format!("fd-rfde-{name}"));
        let dirs = directions(&mut rng, &b.grid, sc.probes.fd_directions, sc.probes.terms);
        s.run("derivatives", &format!("fd_dv_{name}"), false, || {
            let rfde = rfde.as_ref().map_err(clone_err)?;
            let dirs = dirs.as_ref().map_err(clone_err)?;
            let mut worst = 0.0_f64;
            for (i, chi) in dirs.iter().enumerate() {
                let phi = &probes[i % probes.len()];
                let vp = rfde.v(&C1Fn::lincomb(1.0, phi, step, chi)?)?;
                let vm = rfde.v(&C1Fn::lincomb(1.0, phi, -step, chi)?)?;
                for (mu, l) in rfde.dv_ext_all(phi)?.iter().enumerate() {
                    worst = worst.max(relative_error(
                        (vp[mu] - vm[mu]) / (2.0 * step),
                        l.apply(chi)?,
                    ));
                }
            }
            Ok(Outcome::at_most(
                worst,
                tol.fd_relative,
                digest(&c0s(dirs), &[step]),
                "D_e v against central differences",
            ))
        });
        s.run("derivatives", &format!("fd_df_{name}"), false, || {
            let rfde = rfde.as_ref().map_err(clone_err)?;
            let dirs = dirs.as_ref().map_err(clone_err)?;
            let mut worst = 0.0_f64;
            for (i, chi) in dirs.iter().enumerate() {
                let phi = &probes[i % probes.len()];
                let fp = rfde.f(&C1Fn::lincomb(1.0, phi, step, chi)?)?;
                let fm = rfde.f(&C1Fn::lincomb(1.0, phi, -step, chi)?)?;
                for (nu, l) in rfde.df_ext(phi)?.iter().enumerate() {
                    worst = worst.max(relative_error(
                        (fp[nu] - fm[nu]) / (2.0 * step),
                        l.apply(chi)?,
                    ));
                }
            }
            Ok(Outcome::at_most(
                worst,
                tol.fd_relative,
                digest(&c0s(dirs), &[step]),
                "D_e f against central differences",
            ))
        });
    }
    let mut rng = s.rng("fd-remainder");
    s.run("derivatives", "fd_remainder", false, || {
        let mut worst = 0.0_f64;
        let dirs = directions(&mut rng, &b.grid, probes.len().min(30), sc.probes.terms)?;
        for (phi, chi) in probes.iter().zip(&dirs) {
            let rp = b.chart.remainder(&C1Fn::lincomb(1.0, phi, step, chi)?)?;
            let rm = b.chart.remainder(&C1Fn::lincomb(1.0, phi, -step, chi)?)?;
            let fd = C1Fn::lincomb(0.5 / step, &rp, -0.5 / step, &rm)?;
            let an = b.chart.dr_ext(phi, chi)?;
            let scale = fd
                .sup_norm()
                .max(an.sup_norm())
                .max(crate::delays::FD_SCALE_FLOOR);
            worst = worst.max(fd.sub(&an)?.sup_norm() / scale);
        }
        Ok(Outcome::at_most(
            worst,
            tol.fd_remainder,
            digest(&c0s(&dirs), &[step]),
            "D_e R against central differences",
        ))
    });
}

/// Largest `|tau(y)'(0) - 1|`, `|tau(y)| / H(y)` and `|D tau(y)| / H(y)` over `ys`.
pub fn transversal_ratios(tr: &TransversalFamily, ys: &[Vec<f64>]) -> Result<(f64, f64, f64)> {
    let (mut slope, mut sup, mut dsup) = (0.0_f64, 0.0_f64, 0.0_f64);
    for y in ys {
        let h = tr.h_value(y)?;
        let tau = tr.tau(y)?;
        slope = slope.max((tau.deriv_at_zero()[0] - 1.0).abs());
        sup = sup.max(tau.sup_norm_upper() / h);
        for mu in 0..y.len() {
            dsup = dsup.max(tr.dtau(y, mu)?.sup_norm_upper() / h);
        }
    }
    Ok((slope, sup, dsup))
}

fn transversal_checks(s: &mut Suite, b: &Built, tol: &super::Tolerances) {
    let sc = s.sc;
    let mut rng = s.rng("transversal");
    let ys: Vec<Vec<f64>> = (0..sc.probes.count)
        .map(|_| uniform_in_box(&mut rng, &b.lo, &b.hi))
        .collect();
    let flat: Vec<f64> = ys.iter().flatten().cloned().collect();
    let slack = match sc.transversal.mode {
        TransversalMode::Box => 0.0,
        TransversalMode::Envelope => tol.envelope_slack,
    };
    let ratios = transversal_ratios(b.chart.transversal(), &ys);
    let detail = format!(
        "{} points of the working box, {}",
        ys.len(),
        b.chart.transversal().describe()
    );
    s.run("transversal", "tau_slope", false, || {
        let (slope, _, _) = ratios.as_ref().map_err(clone_err)?;
        Ok(Outcome::at_most(
            *slope,
            tol.slope,
            digest(&[], &flat),
            detail.clone(),
        ))
    });
    s.run("transversal", "tau_sup_below_h", false, || {
        let (_, sup, _) = ratios.as_ref().map_err(clone_err)?;
        Ok(Outcome::at_most(
            *sup,
            1.0 + slack,
            digest(&[], &flat),
            "max |tau(y)| / H(y)",
        ))
    });
    s.run("transversal", "dtau_sup_below_h", false, || {
        let (_, _, dsup) = ratios.as_ref().map_err(clone_err)?;
        Ok(Outcome::at_most(
            *dsup,
            1.0 + slack,
            digest(&[], &flat),
            "max |D tau(y)| / H(y)",
        ))
    });
}

fn smallness_checks(s: &mut Suite, b: &Built, probes: &[C1Fn], op_probes: &[C0Fn]) {
    let budget = b.chart.budget();
    let reports: Result<Vec<_>> = probes
        .iter()
        .map(|p| b.chart.smallness_check(p, op_probes))
        .collect();
    let outside: Vec<String> = match &reports {
        Ok(r) => r
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match &r.region {
                crate::rfde::RegionStatus::Outside(why) => Some(format!("probe {i}: {why}")),
                _ => None,
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    let region_note = if outside.is_empty() {
        "all probes inside the region".to_string()
    } else {
        format!(
            "{} probes outside the region, first {}",
            outside.len(),
            outside[0]
        )
    };
    let dg = digest(&c0s(probes), &[budget]);
    let pick = |f: fn(&crate::chart::SmallnessReport) -> f64| -> Result<f64> {
        let r = reports.as_ref().map_err(clone_err)?;
        Ok(r.iter().map(f).fold(0.0, f64::max))
    };
    s.run("smallness", "remainder_below_budget", false, || {
        let o = Outcome::below(
            pick(|r| r.remainder_sup)?,
            budget,
            dg.clone(),
            region_note.clone(),
        );
        Ok(Outcome {
            pass: o.pass && outside.is_empty(),
            ..o
        })
    });
    s.run("smallness", "operator_probe_below_budget", false, || {
        let m = pick(|r| r.op_lower)?;
        let o = Outcome::at_most(
            m,
            budget,
            dg.clone(),
            format!("{} unit probes; {region_note}", op_probes.len()),
        );
        Ok(Outcome {
            pass: o.pass && outside.is_empty(),
            ..o
        })
    });
    s.run("smallness", "analytic_bound_below_budget", false, || {
        let m = pick(|r| r.analytic_bound)?;
        let o = Outcome::at_most(m, budget, dg.clone(), region_note.clone());
        Ok(Outcome {
            pass: o.pass && outside.is_empty(),
            ..o
        })
    });
}

/// Points on the manifold whose delayed values lie in the working box.
pub fn manifold_points(
    b: &Built,
    shape: &SeriesShape,
    rng: &mut ChaCha8Rng,
    count: usize,
    tol: f64,
) -> Result<Vec<C1Fn>> {
    let mut out = Vec::with_capacity(count);
    let budget = 100 * count.max(1);
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let start = shape.sample(rng, &b.grid)?;
        if let Ok(phi) = b.rfde.project_to_manifold_tol(&start, tol) {
            if y_in_box(b, &phi) {
                out.push(phi);
            }
        }
    }
    if out.len() < count {
        return Err(Error::Scenario(format!(
            "only {} of {count} manifold points found",
            out.len()
        )));
    }
    Ok(out)
}

/// Points with `phi'(0) = 0` and `v(phi) = 0`, so `f(phi) = 0` for the identity feedback.
pub fn flat_zero_points(
    lin: &Built,
    shape: &SeriesShape,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Result<Vec<C1Fn>> {
    let grid = &lin.grid;
    let n = grid.n();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(Error::Scenario("no points with f = 0 found".into()));
        }
        let start = shape.sample(rng, grid)?;
        let slope = start.deriv_at_zero();
        let corr = C1Fn::from_components(grid, |nu, t| slope[nu] * projection_direction(t));
        let mut phi = start.sub(&corr)?;
        let mut ok = true;
        for _sweep in 0..20 {
            let y = lin.rfde.v(&phi)?;
            if y.iter().take(n).all(|v| v.abs() <= 1e-15) {
                break;
            }
            for nu in 0..n {
                let base = phi.clone();
                let shift = |s: f64| -> Result<C1Fn> {
                    let e = C1Fn::from_components(grid, |c, _| if c == nu { s } else { 0.0 });
                    base.add(&e)
                };
                let resid = |s: f64| -> Result<f64> { Ok(lin.rfde.v(&shift(s)?)?[nu]) };
                let r0 = resid(0.0)?;
                match roots::bracket_near_zero(resid, r0, 10.0, 64) {
                    Some((a, bb, fa, fb)) => {
                        let s0 = roots::brent(resid, a, bb, fa, fb, 1e-16, 1e-16, 200)?;
                        phi = shift(s0)?;
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
        }
        if ok && y_in_box(lin, &phi) {
            out.push(phi);
        }
    }
    Ok(out)
}

fn chart_checks(s: &mut Suite, b: &Built, shape: &SeriesShape, tol: &super::Tolerances) {
    let sc = s.sc;
    let mut rng = s.rng("manifold-points");
    let count = sc.probes.manifold_points;
    s.run("chart", "flatten_on_manifold", false, || {
        let pts = manifold_points(b, shape, &mut rng, count, tol.membership)?;
        let mut worst = 0.0_f64;
        let mut member = 0.0_f64;
        for p in &pts {
            worst = worst.max(b.chart.flatten_residual(p)?);
            member = member.max(b.rfde.membership_error(p)?);
        }
        Ok(Outcome::at_most(
            worst,
            tol.flatten,
            digest(&c0s(&pts), &[]),
            format!(
                "{} projected points, membership residual <= {member:.1e}",
                pts.len()
            ),
        ))
    });
    let mut rng = s.rng("fixed-points");
    s.run("chart", "fixed_points_identity_feedback", false, || {
        let lin = sc.build_lin_companion()?;
        let small = SeriesShape {
            offset_lo: -0.5,
            offset_hi: 0.5,
            amplitude: shape.amplitude.min(0.5),
            terms: shape.terms,
        };
        let pts = flat_zero_points(&lin, &small, &mut rng, count)?;
        let mut worst = 0.0_f64;
        for p in &pts {
            worst = worst.max(lin.chart.apply_chart(p)?.sub(p)?.sup_norm());
        }
        Ok(Outcome::at_most(
            worst,
            tol.fixed_point,
            digest(&c0s(&pts), &[]),
            format!(
                "{} points with phi'(0) = 0 = f(phi), identity feedback",
                pts.len()
            ),
        ))
    });
}

fn inversion_checks(s: &mut Suite, b: &Built, probes: &[C1Fn], tol: &super::Tolerances) {
    let sc = s.sc;
    let mut inversions = Vec::new();
    let mut first_err = None;
    for p in probes {
        match b
            .chart
            .apply_chart(p)
            .and_then(|z| b.chart.invert_chart(&z, &z))
        {
            Ok(inv) => inversions.push((p, inv)),
            Err(e) => {
                first_err.get_or_insert(e.to_string());
            }
        }
    }
    let failures = probes.len() - inversions.len();
    let dg = digest(&c0s(probes), &[]);
    let note = match &first_err {
        None => format!("{} inversions", probes.len()),
        Some(e) => format!(
            "{failures} of {} inversions failed, first: {e}",
            probes.len()
        ),
    };
    s.run("inversion", "chart_round_trip", false, || {
        let mut worst = 0.0_f64;
        for (p, inv) in &inversions {
            worst = worst.max(inv.phi.sub(p)?.sup_norm());
        }
        let o = Outcome::at_most(worst, tol.round_trip, dg.clone(), note.clone());
        Ok(Outcome {
            pass: o.pass && failures == 0,
            ..o
        })
    });
    s.run("inversion", "contraction_factor", false, || {
        let worst = inversions
            .iter()
            .map(|(_, i)| i.contraction)
            .fold(0.0, f64::max);
        let its = inversions
            .iter()
            .map(|(_, i)| i.iterations)
            .max()
            .unwrap_or(0);
        let o = Outcome::at_most(
            worst,
            b.chart.budget() + tol.contraction_slack,
            dg.clone(),
            format!("at most {its} iterations"),
        );
        Ok(Outcome {
            pass: o.pass && failures == 0,
            ..o
        })
    });
    let mut rng = s.rng("solve-da");
    let dirs = directions(&mut rng, &b.grid, probes.len(), sc.probes.terms);
    let solved: Result<Vec<(C1Fn, C1Fn, C1Fn)>> =
        dirs.as_ref().map_err(clone_err).and_then(|dirs| {
            probes
                .iter()
                .zip(dirs)
                .map(|(p, chi)| {
                    let psi = b.chart.da_apply(p, chi)?;
                    let (x, _) = b.chart.solve_da(p, &psi, Default::default())?;
                    let back = b.chart.da_apply(p, &x)?;
                    Ok((x.sub(chi)?, back.sub(&psi)?, psi))
                })
                .collect()
        });
    let ddg = dirs
        .as_ref()
        .map(|d| digest(&c0s(d), &[]))
        .unwrap_or_default();
    s.run("inversion", "derivative_round_trip", false, || {
        let r = solved.as_ref().map_err(clone_err)?;
        let worst = r.iter().map(|(e, _, _)| e.sup_norm()).fold(0.0, f64::max);
        Ok(Outcome::at_most(
            worst,
            tol.round_trip,
            ddg.clone(),
            "chi from DA(phi) chi",
        ))
    });
    s.run("inversion", "derivative_consistency", false, || {
        let r = solved.as_ref().map_err(clone_err)?;
        let worst = r.iter().map(|(_, e, _)| e.sup_norm()).fold(0.0, f64::max);
        Ok(Outcome::at_most(
            worst,
            tol.round_trip,
            ddg.clone(),
            "DA(phi) applied to the solution",
        ))
    });
}

fn bilipschitz_checks(s: &mut Suite, b: &Built, shape: &SeriesShape) {
    let sc = s.sc;
    let eps = b.chart.budget();
    let pairs = sc.probes.pairs;
    match sc.convex_subset(b) {
        Some(subset) => {
            let mut rng = s.rng("bilipschitz-convex");
            s.run("bilipschitz", "convex_subset_pairs", false, || {
                let pts =
                    rejection_sample(&mut rng, &b.grid, shape, 2 * pairs, |p| subset.contains(p))?;
                let mut min_ratio = f64::INFINITY;
                let mut bad = Vec::new();
                for (i, pair) in pts.chunks(2).enumerate() {
                    let r = b
                        .chart
                        .bilipschitz_lower(&pair[0], &pair[1], Some(&subset))?;
                    match r.status {
                        BilipStatus::Pass => min_ratio = min_ratio.min(r.lhs / r.rhs),
                        BilipStatus::Fail => bad.push(format!("pair {i} margin {:e}", r.margin)),
                        BilipStatus::Inapplicable(why) => bad.push(format!("pair {i}: {why}")),
                    }
                }
                let o = Outcome::at_least(
                    min_ratio,
                    1.0 - eps,
                    digest(&c0s(&pts), &[eps]),
                    format!(
                        "{pairs} pairs in values ({:?}, {:?}), slope < {:.3}; {}",
                        subset.lower,
                        subset.upper,
                        subset.slope,
                        if bad.is_empty() {
                            "all pass".to_string()
                        } else {
                            format!("{} bad, first {}", bad.len(), bad[0])
                        }
                    ),
                );
                Ok(Outcome {
                    pass: o.pass && bad.is_empty(),
                    ..o
                })
            });
        }
        None => s
            .report
            .note("no certified delay bound: convex-subset bi-Lipschitz check not applicable"),
    }
    let qbd = sc.build_qbd();
    let mut rng = s.rng("bilipschitz-qbd");
    let delta = sc.region.delta;
    let qshape = SeriesShape {
        amplitude: shape.amplitude * 0.5,
        ..shape.clone()
    };
    let qprobes = qbd.as_ref().map_err(clone_err).and_then(|q| {
        rejection_sample(&mut rng, &q.grid, &qshape, pairs, |p| {
            y_in_box(q, p) && q.chart.region_test(p).is_inside()
        })
    });
    s.run("bilipschitz", "qbd_ball_pairs", false, || {
        let q = qbd.as_ref().map_err(clone_err)?;
        let pts = qprobes.as_ref().map_err(clone_err)?;
        let mut min_ratio = f64::INFINITY;
        let mut fails = Vec::new();
        let mut skipped = 0;
        let mut tested = 0;
        for (i, phi) in pts.iter().enumerate() {
            for _attempt in 0..20 {
                let dir = unit_direction(&mut rng, &q.grid, sc.probes.terms)?;
                let psi = C1Fn::lincomb(1.0, phi, rng.gen_range(0.05..0.9) * delta, &dir)?;
                if !y_in_box(q, &psi) {
                    skipped += 1;
                    continue;
                }
                let r = q.chart.bilipschitz_lower(phi, &psi, None)?;
                match r.status {
                    BilipStatus::Pass => min_ratio = min_ratio.min(r.lhs / r.rhs),
                    BilipStatus::Fail => fails.push(format!("pair {i} margin {:e}", r.margin)),
                    BilipStatus::Inapplicable(_) => {
                        skipped += 1;
                        continue;
                    }
                }
                tested += 1;
                break;
            }
        }
        let o = Outcome::at_least(
            min_ratio,
            1.0 - q.chart.budget(),
            digest(&c0s(pts), &[delta]),
            format!(
                "{tested} pairs with |phi - psi| < delta, {skipped} redrawn partners; {}",
                if fails.is_empty() {
                    "all pass".to_string()
                } else {
                    format!("{} fail, first {}", fails.len(), fails[0])
                }
            ),
        );
        Ok(Outcome {
            pass: o.pass && fails.is_empty() && tested == pts.len(),
            ..o
        })
    });
    s.run("region", "qbd_inside_uc", false, || {
        let pts = qprobes.as_ref().map_err(clone_err)?;
        let r = &sc.region;
        let c = RegionParams::Uc { c: r.b * r.q };
        let outside = pts
            .iter()
            .filter(|p| !b.rfde.region_test(&c, p).is_inside())
            .count();
        Ok(Outcome::at_most(
            outside as f64,
            0.0,
            digest(&c0s(pts), &[r.q, r.b, r.delta]),
            format!(
                "points of U_(q,b,delta) outside U_c with c = b q, out of {}",
                pts.len()
            ),
        ))
    });
}

/// Initial state for flow runs: the projection of a constant, integrated for
/// `burn_in` and projected again, so that its history has no kink at 0.
pub fn smooth_start(sc: &Scenario, rfde: &Rfde) -> Result<C1Fn> {
    let level = C1Fn::from_components(rfde.grid(), |_, _| sc.flow.start_level);
    let phi = rfde.project_to_manifold(&level)?;
    if sc.flow.burn_in == 0.0 {
        return Ok(phi);
    }
    let burn = integrate(
        rfde,
        &phi,
        IntegrateOptions::new(sc.flow.burn_in, sc.flow.dt),
    )?;
    if let TrajectoryStatus::LeftDomain { t, reason } = burn.status() {
        return Err(Error::Integration(format!(
            "burn-in left the domain at t = {t}: {reason}"
        )));
    }
    rfde.project_to_manifold(&burn.segment(burn.t_end())?)
}

fn completed(tr: &Trajectory) -> Result<()> {
    match tr.status() {
        TrajectoryStatus::Completed => Ok(()),
        TrajectoryStatus::LeftDomain { t, reason } => Err(Error::Integration(format!(
            "left the domain at t = {t}: {reason}"
        ))),
    }
}

/// A box-mode chart whose box also covers the delayed values of the sampled
/// segments of `tr`, so that flattening can be measured on all of them.
pub fn covering_chart(b: &Built, tr: &Trajectory, stride: usize) -> Result<Chart> {
    let mut lo = b.lo.clone();
    let mut hi = b.hi.clone();
    for i in (0..tr.knots()).step_by(stride.max(1)) {
        let y = b.rfde.v(&tr.segment(tr.knot_time(i))?)?;
        for (mu, v) in y.iter().enumerate() {
            lo[mu] = lo[mu].min(*v);
            hi[mu] = hi[mu].max(*v);
        }
    }
    let tr = TransversalFamily::constant_on_box(
        b.chart.transversal().scaling().clone(),
        &b.grid,
        b.chart.transversal().shape(),
        lo,
        hi,
        BoxOptions::default(),
    )?;
    Chart::new(b.rfde.clone(), tr, *b.chart.params())
}

/// Largest flattening residual over segments at every `stride`-th knot where
/// the chart is defined, with the number of such segments and of skipped ones.
pub fn flatten_along(chart: &Chart, tr: &Trajectory, stride: usize) -> Result<(f64, usize, usize)> {
    let mut worst = 0.0_f64;
    let (mut used, mut skipped) = (0, 0);
    for i in (0..tr.knots()).step_by(stride.max(1)) {
        let seg = tr.segment(tr.knot_time(i))?;
        match chart.flatten_residual(&seg) {
            Ok(r) => {
                worst = worst.max(r);
                used += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    Ok((worst, used, skipped))
}

/// Root of `lambda = exp(lambda r)` for `r < 0`.
pub fn characteristic_root(r: f64) -> Result<f64> {
    let f = |l: f64| Ok(l - (l * r).exp());
    roots::brent(f, 0.0, 1.0, -1.0, 1.0 - r.exp(), 1e-16, 1e-16, 200)
}

fn flow_checks(s: &mut Suite, b: &Built, tol: &super::Tolerances) {
    let sc = s.sc;
    let f = sc.flow.clone();
    let start = smooth_start(s.sc, &b.rfde);
    let runs: Result<(Trajectory, Trajectory)> =
        start.as_ref().map_err(clone_err).and_then(|phi| {
            let a = integrate(&b.rfde, phi, IntegrateOptions::new(f.t_final, f.dt))?;
            completed(&a)?;
            let c = integrate(&b.rfde, phi, IntegrateOptions::new(f.t_final, f.dt / 2.0))?;
            completed(&c)?;
            Ok((a, c))
        });
    let dg = start
        .as_ref()
        .map(|p| digest(&[p.as_c0()], &[f.t_final, f.dt]))
        .unwrap_or_default();
    let residuals = runs.as_ref().map_err(clone_err).and_then(|(a, c)| {
        Ok((
            a.flow_residual(&b.rfde, &a.quarter_times())?,
            c.flow_residual(&b.rfde, &c.quarter_times())?,
        ))
    });
    s.run("flow", "flow_residual", false, || {
        let (r1, _) = residuals.as_ref().map_err(clone_err)?;
        Ok(Outcome::at_most(
            *r1,
            tol.flow_residual,
            dg.clone(),
            format!(
                "dt = {:e} on [0, {}], start level {} after burn-in {}",
                f.dt, f.t_final, f.start_level, f.burn_in
            ),
        ))
    });
    s.run("flow", "flow_halving", false, || {
        let (r1, r2) = residuals.as_ref().map_err(clone_err)?;
        if *r1 <= f.roundoff_floor {
            return Ok(Outcome {
                measured: f64::NAN,
                bound: tol.halving_factor,
                pass: true,
                digest: dg.clone(),
                detail: format!("residual {r1:e} at roundoff level, no order to measure"),
            });
        }
        Ok(Outcome::at_least(
            r1 / r2.max(f64::MIN_POSITIVE),
            tol.halving_factor,
            dg.clone(),
            format!("{r1:e} -> {r2:e}"),
        ))
    });
    s.run("flow", "flow_flatten", false, || {
        let (a, _) = runs.as_ref().map_err(clone_err)?;
        let chart = covering_chart(b, a, 10)?;
        let (worst, used, skipped) = flatten_along(&chart, a, 10)?;
        let o = Outcome::at_most(
            worst,
            tol.flow_flatten,
            dg.clone(),
            format!(
                "{used} segments, {skipped} skipped; {}",
                chart.transversal().describe()
            ),
        );
        Ok(Outcome {
            pass: o.pass && used > 0,
            ..o
        })
    });
    s.run("flow", "constant_start", false, || {
        let level = C1Fn::from_components(&b.grid, |_, _| f.constant_start);
        let phi = b.rfde.project_to_manifold(&level)?;
        let tr = integrate(&b.rfde, &phi, IntegrateOptions::new(f.t_final, f.dt))?;
        completed(&tr)?;
        let r = tr.flow_residual(&b.rfde, &tr.quarter_times())?;
        Ok(Outcome::at_most(
            r,
            tol.flow_residual,
            digest(&[phi.as_c0()], &[f.dt]),
            format!(
                "projection of the constant {} integrated on [0, {}]",
                f.constant_start, f.t_final
            ),
        ))
    });
    s.run("flow", "exponential_benchmark", false, || {
        let grid = b.grid.scalar();
        let r = f.benchmark_delay;
        let rfde = Rfde::new(
            FeedbackMap::identity(1, 1)?,
            Arc::new(ConstantDelay::new(r, grid.h())?),
            grid.clone(),
        )?;
        let lambda = characteristic_root(r)?;
        let phi = C1Fn::from_fn(&grid, |t| (lambda * t).exp());
        let tr = integrate(&rfde, &phi, IntegrateOptions::new(f.t_final, f.dt))?;
        completed(&tr)?;
        let mut worst = 0.0_f64;
        for i in 0..tr.knots() {
            worst = worst.max((tr.x_at_knot(i)[0] - (lambda * tr.knot_time(i)).exp()).abs());
        }
        Ok(Outcome::at_most(
            worst,
            tol.benchmark,
            digest(&[phi.as_c0()], &[r, f.dt]),
            format!("x' = x(t + {r}), lambda = {lambda:.12}"),
        ))
    });
}

/// A delay whose extended derivative is scaled by a wrong factor.
#[derive(Debug)]
struct MisscaledDerivative {
    inner: IntegralDelay,
    factor: f64,
}

impl DelayFunctional for MisscaledDerivative {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn value(&self, phi: &C0Fn) -> Result<Vec<f64>> {
        self.inner.value(phi)
    }

    fn ext_derivative(&self, phi: &C0Fn, kappa: usize) -> Result<ExtLinFunctional> {
        Ok(self.inner.ext_derivative(phi, kappa)?.scale(self.factor))
    }

    fn q_bound(&self) -> QBound {
        self.inner.q_bound()
    }

    fn describe(&self) -> String {
        format!(
            "{} with derivative scaled by {}",
            self.inner.describe(),
            self.factor
        )
    }
}

/// A steep probe outside `U_c` whose delayed values stay in the working box.
pub fn steep_probe(b: &Built) -> Option<C1Fn> {
    let c = b.chart.params().c_equivalent();
    let (lo, hi) = (b.lo[0], b.hi[0]);
    let mid = 0.5 * (lo + hi);
    let amp = 0.45 * (hi - lo);
    for w in 1..=40 {
        let omega = w as f64;
        let phi = C1Fn::from_components(&b.grid, |_, t| mid + amp * (omega * t).sin());
        if y_in_box(b, &phi) && b.rfde.m_v(&phi).is_ok_and(|m| m >= 1.5 * c) {
            return Some(phi);
        }
    }
    None
}

fn control_checks(s: &mut Suite, b: &Built, op_probes: &[C0Fn], tol: &super::Tolerances) {
    let sc = s.sc;
    let eps = b.chart.budget();
    if sc.feedback_is_zero() {
        s.report
            .note("g = 0: the oversized-budget control cannot fail and is omitted");
    } else {
        s.run("controls", "control_budget_too_large", true, || {
            let big = Scaling::Hc { eps: 16.0 * eps, c: sc.region.c };
            let scaling = ScalingFn::unchecked(big, b.rfde.feedback().clone());
            let tr = TransversalFamily::constant_on_box(scaling, &b.grid, sc.transversal.shape, b.lo.clone(), b.hi.clone(), BoxOptions::default())?;
            let chart = Chart::with_budget(b.rfde.clone(), tr, *b.chart.params(), eps)?;
            let phi = C1Fn::from_components(&b.grid, |nu, _| b.lo[nu]);
            let r = chart.smallness_check(&phi, op_probes)?;
            let worst = r.remainder_sup.max(r.op_lower).max(r.analytic_bound);
            Ok(Outcome {
                pass: r.pass() && r.region.is_inside(),
                ..Outcome::below(worst, eps, digest(&[phi.as_c0()], &[16.0 * eps]), format!(
                    "transversal sized for eps = {}, checked against {eps}: remainder {:.3e}, probe {:.3e}, analytic {:.3e}",
                    16.0 * eps, r.remainder_sup, r.op_lower, r.analytic_bound
                ))
            })
        });
    }
    match steep_probe(b) {
        Some(phi) => s.run("controls", "control_probe_outside_region", true, || {
            let r = b.chart.smallness_check(&phi, op_probes)?;
            let region = match &r.region {
                crate::rfde::RegionStatus::Inside => "inside".to_string(),
                crate::rfde::RegionStatus::Outside(why) => format!("outside: {why}"),
            };
            Ok(Outcome {
                pass: r.pass() && r.region.is_inside(),
                ..Outcome::at_most(b.rfde.m_v(&phi)?, sc.region.c, digest(&[phi.as_c0()], &[]), format!(
                    "m_v against c; region {region}; probe {:.3e}, analytic {:.3e}",
                    r.op_lower, r.analytic_bound
                ))
            })
        }),
        None => s.report.note("the delay has no state dependence here: every probe lies in U_c, so the outside-probe control is omitted"),
    }
    let mut rng = s.rng("control-transversal");
    s.run("controls", "control_transversal_too_small", true, || {
        let scaling = b.chart.transversal().scaling().clone();
        let tr = TransversalFamily::with_profile(
            scaling,
            &b.grid,
            Profile::Sine {
                lambda: 1.0 / b.grid.h(),
            },
            b.lo.clone(),
            b.hi.clone(),
        )?;
        let ys: Vec<Vec<f64>> = (0..20)
            .map(|_| uniform_in_box(&mut rng, &b.lo, &b.hi))
            .collect();
        let (_, sup, _) = transversal_ratios(&tr, &ys)?;
        Ok(Outcome::at_most(
            sup,
            1.0,
            digest(&[], &ys.concat()),
            "sine profile with lambda h = 1: max |tau(y)| / H(y)",
        ))
    });
    let mut rng = s.rng("control-slope");
    s.run("controls", "control_transversal_slope", true, || {
        let tr = b.chart.transversal().clone().with_gain(1.5);
        let ys: Vec<Vec<f64>> = (0..20)
            .map(|_| uniform_in_box(&mut rng, &b.lo, &b.hi))
            .collect();
        let (slope, _, _) = transversal_ratios(&tr, &ys)?;
        Ok(Outcome::at_most(
            slope,
            tol.slope,
            digest(&[], &ys.concat()),
            "transversal scaled by 1.5, so tau'(0) = 1.5",
        ))
    });
    let h = b.grid.h();
    let slope_probe = C1Fn::from_components(&b.grid, |_, t| 0.5 + 0.4 * t / h);
    s.run("controls", "control_wrong_delay_derivative", true, || {
        let d = MisscaledDerivative {
            inner: IntegralDelay::standard(h),
            factor: 1.01,
        };
        let chi = C1Fn::from_components(&b.grid, |_, t| (2.0 * t / h).cos());
        let err = fd_check_delay(&d, &slope_probe, &chi, tol.fd_step)?;
        Ok(Outcome::at_most(
            err,
            tol.fd_relative,
            digest(&[slope_probe.as_c0(), chi.as_c0()], &[]),
            d.describe(),
        ))
    });
    s.run("controls", "control_dropped_dv_term", true, || {
        let rfde = Rfde::new(
            b.rfde.feedback().clone(),
            Arc::new(IntegralDelay::standard(h)),
            b.grid.clone(),
        )?;
        let chi = C1Fn::from_components(&b.grid, |_, _| 1.0);
        let step = tol.fd_step;
        let vp = rfde.v(&C1Fn::lincomb(1.0, &slope_probe, step, &chi)?)?;
        let vm = rfde.v(&C1Fn::lincomb(1.0, &slope_probe, -step, &chi)?)?;
        let d = rfde.delays(&slope_probe)?[0];
        let mut worst = 0.0_f64;
        for mu in 0..vp.len() {
            let atom_only =
                ExtLinFunctional::point(&b.grid, d, mu % b.grid.n(), 1.0)?.apply(&chi)?;
            worst = worst.max(relative_error((vp[mu] - vm[mu]) / (2.0 * step), atom_only));
        }
        Ok(Outcome::at_most(
            worst,
            tol.fd_relative,
            digest(&[slope_probe.as_c0()], &[]),
            "D_e v without the term through the delay",
        ))
    });
}

/// One probe of the chart experiment.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ChartRow {
    pub probe: usize,
    /// `|A(phi) - phi|`, only where `f(phi) = 0`.
    pub fixed_point_defect: Option<f64>,
    /// `|A(p)'(0)|` at the projection `p` of the probe onto the manifold.
    pub flatten_residual: Option<f64>,
    pub round_trip_error: Option<f64>,
    pub contraction: Option<f64>,
}

impl ChartRow {
    pub fn csv(rows: &[ChartRow]) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = String::from(
            "# schema=1\nprobe,fixed_point_defect,flatten_residual,round_trip_error,contraction\n",
        );
        for r in rows {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.probe,
                cell(r.fixed_point_defect),
                cell(r.flatten_residual),
                cell(r.round_trip_error),
                cell(r.contraction)
            ));
        }
        s
    }
}

/// Round trips, flattening and fixed points of the chart on the scenario's probes.
pub fn chart_experiment(sc: &Scenario) -> Result<(Vec<ChartRow>, Report)> {
    sc.validate()?;
    let b = sc.build()?;
    let shape = sc.probe_shape()?;
    let mut s = Suite::new(sc, "chart");
    let tol = sc.tolerances.clone();
    let probes = region_probes(sc, &b, &shape, &mut s.rng("probes"), sc.probes.count)?;
    let mut rows = Vec::with_capacity(probes.len());
    for (i, p) in probes.iter().enumerate() {
        let fixed = match b.rfde.f(p) {
            Ok(f) if f.iter().all(|v| *v == 0.0) => b
                .chart
                .apply_chart(p)
                .and_then(|a| a.sub(p))
                .ok()
                .map(|d| d.sup_norm()),
            _ => None,
        };
        let flatten = b
            .rfde
            .project_to_manifold_tol(p, tol.membership)
            .and_then(|m| b.chart.flatten_residual(&m))
            .ok();
        let inv = b
            .chart
            .apply_chart(p)
            .and_then(|z| b.chart.invert_chart(&z, &z))
            .ok();
        rows.push(ChartRow {
            probe: i,
            fixed_point_defect: fixed,
            flatten_residual: flatten,
            round_trip_error: inv
                .as_ref()
                .and_then(|v| v.phi.sub(p).ok())
                .map(|d| d.sup_norm()),
            contraction: inv.map(|v| v.contraction),
        });
    }
    let dg = digest(&c0s(&probes), &[]);
    let col = |f: fn(&ChartRow) -> Option<f64>| -> (f64, usize) {
        let vals: Vec<f64> = rows.iter().filter_map(f).collect();
        (
            vals.iter().cloned().fold(0.0, f64::max),
            rows.len() - vals.len(),
        )
    };
    let (flat, flat_missing) = col(|r| r.flatten_residual);
    s.run("chart", "flatten_on_manifold", false, || {
        let o = Outcome::at_most(
            flat,
            tol.flatten,
            dg.clone(),
            format!("{flat_missing} probes could not be projected into the box"),
        );
        Ok(o)
    });
    let (rt, rt_missing) = col(|r| r.round_trip_error);
    s.run("inversion", "chart_round_trip", false, || {
        let o = Outcome::at_most(
            rt,
            tol.round_trip,
            dg.clone(),
            format!("{rt_missing} inversions failed"),
        );
        Ok(Outcome {
            pass: o.pass && rt_missing == 0,
            ..o
        })
    });
    let (k, _) = col(|r| r.contraction);
    s.run("inversion", "contraction_factor", false, || {
        Ok(Outcome::at_most(
            k,
            b.chart.budget() + tol.contraction_slack,
            dg.clone(),
            "largest ratio of successive increments",
        ))
    });
    let (fx, fx_missing) = col(|r| r.fixed_point_defect);
    if fx_missing < rows.len() {
        s.run("chart", "fixed_points", false, || {
            Ok(Outcome::at_most(
                fx,
                tol.fixed_point,
                dg.clone(),
                format!("{} probes with f = 0", rows.len() - fx_missing),
            ))
        });
    } else {
        s.report
            .note("no probe has f = 0; fixed-point column left empty");
    }
    Ok((rows, s.report))
}

/// The flow run of the scenario with its residual and flattening checks.
pub fn flow_run(sc: &Scenario) -> Result<(Trajectory, Rfde, Report)> {
    sc.validate()?;
    let b = sc.build()?;
    let f = &sc.flow;
    let phi = smooth_start(sc, &b.rfde)?;
    let tr = integrate(&b.rfde, &phi, IntegrateOptions::new(f.t_final, f.dt))?;
    let mut s = Suite::new(sc, "flow");
    let tol = sc.tolerances.clone();
    let dg = digest(&[phi.as_c0()], &[f.t_final, f.dt]);
    s.run("flow", "completed", false, || {
        completed(&tr)?;
        Ok(Outcome::at_least(
            tr.t_end(),
            f.t_final - 1e-12,
            dg.clone(),
            "final time reached",
        ))
    });
    s.run("flow", "flow_residual", false, || {
        let r = tr.flow_residual(&b.rfde, &tr.quarter_times())?;
        Ok(Outcome::at_most(
            r,
            tol.flow_residual,
            dg.clone(),
            format!("dt = {:e}", f.dt),
        ))
    });
    s.run("flow", "flow_flatten", false, || {
        let chart = covering_chart(&b, &tr, 10)?;
        let (worst, used, skipped) = flatten_along(&chart, &tr, 10)?;
        let o = Outcome::at_most(
            worst,
            tol.flow_flatten,
            dg.clone(),
            format!("{used} segments, {skipped} skipped"),
        );
        Ok(Outcome {
            pass: o.pass && used > 0,
            ..o
        })
    });
    if tr.predictor_stages() > 0 {
        s.report.note(format!(
            "{} stages evaluated delayed values inside the current step",
            tr.predictor_stages()
        ));
    }
    Ok((tr, b.rfde, s.report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(mut sc: Scenario) -> Scenario {
        sc.probes.count = 12;
        sc.probes.manifold_points = 6;
        sc.probes.pairs = 12;
        sc.probes.fd_directions = 12;
        sc.probes.operator_probes = 16;
        sc
    }

    #[test]
    fn zero_feedback_suite_passes() {
        let mut sc = quick(Scenario::lin());
        sc.system.zero_feedback = true;
        let r = run_suite(&sc).unwrap();
        for l in r.lines() {
            println!("{l}");
        }
        assert!(r.ok());
    }

    #[test]
    fn suite_is_deterministic() {
        let mut sc = quick(Scenario::s5());
        sc.flow.t_final = 0.2;
        sc.flow.burn_in = 0.0;
        let a = run_suite(&sc).unwrap().to_json();
        let b = run_suite(&sc).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn characteristic_root_solves_equation() {
        let l = characteristic_root(-0.5).unwrap();
        assert!((l - (-0.5 * l).exp()).abs() < 1e-15);
    }
}
