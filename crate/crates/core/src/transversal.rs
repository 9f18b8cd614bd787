//! Transversal families `tau: V -> C^1([-h,0], R)` with `tau(y)'(0) = 1` and
//! `|tau(y)|`, `|D_mu tau(y)|` bounded by a scaling function `H(y)`.
//!
//! Two profiles are available:
//!
//! * Chebyshev: `P_m(t) = h/(2 m^2) · T_m(1 + 2t/h)`. Since `T_m'(1) = m^2`
//!   the slope at 0 is 1 and the sup norm is `h/(2 m^2)`, the smallest
//!   possible for a degree-`m` polynomial with unit slope at the endpoint.
//!   This keeps `tau` exactly representable on the collocation grid.
//! * Sine: `sin(lambda t)/lambda`, sup norm `1/lambda`. It needs
//!   `lambda` well below the grid resolution; [`TransversalFamily::tau`]
//!   reports an error when the discrete slope at 0 drifts from 1.
//!
//! In box mode one profile serves every `y` in a bounded box, so `D tau = 0`.
//! In envelope mode the profile follows a smooth lower envelope of `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{C1Fn, Grid};
use crate::rfde::FeedbackMap;

/// Tolerance on the discrete slope `tau(y)'(0) - 1`.
pub const SLOPE_TOL: f64 = 1e-10;

/// Which contraction budget enters `H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    /// `H = eps / (k n^2 (1 + c)(1 + m_g + m_Dg))`.
    Hc { eps: f64, c: f64 },
    /// `H = delta / (k n^2 (1 + b q)(1 + m_g + m_Dg))`.
    Hqbd { delta: f64, q: f64, b: f64 },
}

impl Scaling {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Scaling::Hc { eps, c } => eps > 0.0 && eps < 1.0 && c > 0.0,
            Scaling::Hqbd { delta, q, b } => delta > 0.0 && delta < 1.0 && q > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid scaling {self:?}")))
        }
    }

    /// Budget `eps` or `delta`.
    pub fn budget(&self) -> f64 {
        match *self {
            Scaling::Hc { eps, .. } => eps,
            Scaling::Hqbd { delta, .. } => delta,
        }
    }

    fn c_term(&self) -> f64 {
        match *self {
            Scaling::Hc { c, .. } => 1.0 + c,
            Scaling::Hqbd { q, b, .. } => 1.0 + b * q,
        }
    }
}

/// A scaling rule bound to a feedback map.
#[derive(Clone, Debug)]
pub struct ScalingFn {
    pub scaling: Scaling,
    pub feedback: FeedbackMap,
}

impl ScalingFn {
    pub fn new(scaling: Scaling, feedback: FeedbackMap) -> Result<Self> {
        scaling.validate()?;
        Ok(Self { scaling, feedback })
    }

    /// Skips validation, so the budget may exceed 1. Used to size deliberately
    /// oversized transversals.
    pub fn unchecked(scaling: Scaling, feedback: FeedbackMap) -> Self {
        Self { scaling, feedback }
    }

    pub fn h(&self, y: &[f64]) -> Result<f64> {
        let k = self.feedback.k() as f64;
        let n = self.feedback.n() as f64;
        let mg = self.feedback.m_g(y)?;
        let mdg = self.feedback.m_dg(y)?;
        Ok(self.scaling.budget() / (k * n * n * self.scaling.c_term() * (1.0 + mg + mdg)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransversalShape {
    #[default]
    Chebyshev,
    Sine,
}

/// A fixed profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Chebyshev { m: usize },
    Sine { lambda: f64 },
}

impl Profile {
    fn eval(&self, h: f64, t: f64) -> f64 {
        match *self {
            Profile::Chebyshev { m } => chebyshev_profile(m, h, t),
            Profile::Sine { lambda } => (lambda * t).sin() / lambda,
        }
    }

    /// Exact sup norm on `[-h, 0]`.
    pub fn sup(&self, h: f64) -> f64 {
        match *self {
            Profile::Chebyshev { m } => h / (2.0 * (m * m) as f64),
            Profile::Sine { lambda } => {
                if lambda * h >= std::f64::consts::FRAC_PI_2 {
                    1.0 / lambda
                } else {
                    (lambda * h).sin() / lambda
                }
            }
        }
    }
}

fn chebyshev_profile(m: usize, h: f64, t: f64) -> f64 {
    let x = (1.0 + 2.0 * t / h).clamp(-1.0, 1.0);
    let mf = m as f64;
    h / (2.0 * mf * mf) * (mf * x.acos()).cos()
}

fn smoothstep(x: f64) -> (f64, f64) {
    (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x))
}

/// Soft absolute value `sqrt(x^2 + s^2) - s` and its derivative.
fn soft_abs(x: f64, s: f64) -> (f64, f64) {
    let r = x.hypot(s);
    (r - s, x / r)
}

/// Smooth lower envelope `H̄(y) = softmin_z 0.9 H(z) exp(L Σ_mu |y_mu - z_mu|_s)`.
#[derive(Clone, Debug)]
pub struct Envelope {
    centers: Vec<Vec<f64>>,
    heights: Vec<f64>,
    lipschitz: f64,
    sigma: f64,
    temperature: f64,
}

/// Fraction of `H` used at the envelope centers.
const ENVELOPE_HEIGHT: f64 = 0.9;
/// Smoothing radius of the soft absolute value.
const ENVELOPE_SIGMA: f64 = 1e-3;

impl Envelope {
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Value and gradient.
    pub fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let dim = y.len();
        let mut vals = Vec::with_capacity(self.centers.len());
        let mut grads = Vec::with_capacity(self.centers.len());
        for (z, hz) in self.centers.iter().zip(&self.heights) {
            let mut s = 0.0;
            let mut ds = vec![0.0; dim];
            for mu in 0..dim {
                let (a, da) = soft_abs(y[mu] - z[mu], self.sigma);
                s += a;
                ds[mu] = da;
            }
            let e = hz * (self.lipschitz * s).exp();
            vals.push(e);
            grads.push(
                ds.into_iter()
                    .map(|d| e * self.lipschitz * d)
                    .collect::<Vec<_>>(),
            );
        }
        let t = self.temperature;
        let emin = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = vals.iter().map(|e| (-(e - emin) / t).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = emin - t * total.ln();
        let mut grad = vec![0.0; dim];
        for (w, g) in weights.iter().zip(&grads) {
            for mu in 0..dim {
                grad[mu] += w / total * g[mu];
            }
        }
        (value, grad)
    }
}

#[derive(Clone, Debug)]
enum Mode {
    Fixed {
        lo: Vec<f64>,
        hi: Vec<f64>,
        profile: Profile,
        min_h: f64,
        tau: C1Fn,
    },
    Envelope(Option<Envelope>),
}

/// Options for box mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxOptions {
    /// Relative margin below the sampled minimum of `H`.
    pub margin: f64,
    /// Cap on the number of sampled points in the box.
    pub max_samples: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            margin: 0.1,
            max_samples: 20_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransversalFamily {
    scaling: ScalingFn,
    grid: Grid,
    shape: TransversalShape,
    mode: Mode,
    gain: f64,
}

impl TransversalFamily {
    /// One profile for the whole box `lo <= y <= hi`, chosen from the sampled minimum of `H`.
    pub fn constant_on_box(
        scaling: ScalingFn,
        grid: &Grid,
        shape: TransversalShape,
        lo: Vec<f64>,
        hi: Vec<f64>,
        opts: BoxOptions,
    ) -> Result<Self> {
        let min_h = min_on_box(&scaling, &lo, &hi, opts.max_samples)?;
        let target = (1.0 - opts.margin) * min_h;
        let h = grid.h();
        let profile = match shape {
            TransversalShape::Chebyshev => {
                let m = ((h / (2.0 * target)).sqrt().ceil() as usize).max(1);
                Profile::Chebyshev { m }
            }
            TransversalShape::Sine => Profile::Sine {
                lambda: (1.0 / target).max(1.0),
            },
        };
        Self::fixed(scaling, grid, profile, lo, hi, min_h)
    }

    /// A given profile on the box, without checking it against `H`.
    pub fn with_profile(
        scaling: ScalingFn,
        grid: &Grid,
        profile: Profile,
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) -> Result<Self> {
        let min_h = min_on_box(&scaling, &lo, &hi, BoxOptions::default().max_samples)?;
        Self::fixed(scaling, grid, profile, lo, hi, min_h)
    }

    fn fixed(
        scaling: ScalingFn,
        grid: &Grid,
        profile: Profile,
        lo: Vec<f64>,
        hi: Vec<f64>,
        min_h: f64,
    ) -> Result<Self> {
        let grid = grid.scalar();
        let shape = match profile {
            Profile::Chebyshev { m } => {
                if m == 0 || m > grid.degree() {
                    return Err(Error::Transversal(format!(
                        "Chebyshev degree {m} not representable with N = {}",
                        grid.degree()
                    )));
                }
                TransversalShape::Chebyshev
            }
            Profile::Sine { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::Transversal(format!("invalid frequency {lambda}")));
                }
                TransversalShape::Sine
            }
        };
        let h = grid.h();
        let tau = C1Fn::from_fn(&grid, |t| profile.eval(h, t));
        check_slope(&tau, 1.0)?;
        Ok(Self {
            scaling,
            grid,
            shape,
            mode: Mode::Fixed {
                lo,
                hi,
                profile,
                min_h,
                tau,
            },
            gain: 1.0,
        })
    }

    /// Envelope mode fitted to `samples`; an empty set gives an unfitted family.
    ///
    /// `lipschitz` defaults to a value for which the derivative bound holds
    /// wherever the envelope is exact: `0.5 / (1.5 sqrt(h / (2 H_min)))` for
    /// the Chebyshev profile, `0.5 H_min / (h + H_min)` for the sine profile.
    pub fn smooth_envelope(
        scaling: ScalingFn,
        grid: &Grid,
        shape: TransversalShape,
        samples: &[Vec<f64>],
        lipschitz: Option<f64>,
    ) -> Result<Self> {
        let grid = grid.scalar();
        let mut fam = Self {
            scaling,
            grid,
            shape,
            mode: Mode::Envelope(None),
            gain: 1.0,
        };
        if !samples.is_empty() {
            fam = fam.fitted(samples, lipschitz)?;
        }
        Ok(fam)
    }

    /// Fits the envelope to `samples`.
    pub fn fitted(mut self, samples: &[Vec<f64>], lipschitz: Option<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Transversal("empty sample set".into()));
        }
        let heights: Vec<f64> = samples
            .iter()
            .map(|z| self.scaling.h(z).map(|v| ENVELOPE_HEIGHT * v))
            .collect::<Result<_>>()?;
        let h_min = heights.iter().cloned().fold(f64::INFINITY, f64::min) / ENVELOPE_HEIGHT;
        let h = self.grid.h();
        let lipschitz = lipschitz.unwrap_or(match self.shape {
            TransversalShape::Chebyshev => 0.5 / (1.5 * (h / (2.0 * h_min)).sqrt()),
            TransversalShape::Sine => 0.5 * h_min / (h + h_min),
        });
        if !(lipschitz > 0.0) {
            return Err(Error::Transversal(format!(
                "invalid Lipschitz constant {lipschitz}"
            )));
        }
        self.mode = Mode::Envelope(Some(Envelope {
            centers: samples.to_vec(),
            heights,
            lipschitz,
            sigma: ENVELOPE_SIGMA,
            temperature: 1e-3 * ENVELOPE_HEIGHT * h_min,
        }));
        Ok(self)
    }

    /// Multiplies every profile by `gain`; only useful to build broken families
    /// that the checks must reject.
    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        if let Mode::Fixed { tau, .. } = &mut self.mode {
            *tau = tau.scale(gain);
        }
        self
    }

    pub fn scaling(&self) -> &ScalingFn {
        &self.scaling
    }

    pub fn shape(&self) -> TransversalShape {
        self.shape
    }

    /// True in box mode, where `D tau ≡ 0`.
    pub fn is_constant(&self) -> bool {
        matches!(self.mode, Mode::Fixed { .. })
    }

    /// The box profile, if in box mode.
    pub fn profile(&self) -> Option<Profile> {
        match &self.mode {
            Mode::Fixed { profile, .. } => Some(*profile),
            Mode::Envelope(_) => None,
        }
    }

    /// Sampled minimum of `H` over the box, if in box mode.
    pub fn box_min_h(&self) -> Option<f64> {
        match &self.mode {
            Mode::Fixed { min_h, .. } => Some(*min_h),
            Mode::Envelope(_) => None,
        }
    }

    pub fn envelope(&self) -> Option<&Envelope> {
        match &self.mode {
            Mode::Envelope(e) => e.as_ref(),
            Mode::Fixed { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.mode {
            Mode::Fixed {
                profile, lo, hi, ..
            } => format!("box mode on {lo:?} to {hi:?}, {profile:?}"),
            Mode::Envelope(Some(e)) => format!(
                "envelope mode, {:?}, L = {:.3e}, {} centers",
                self.shape,
                e.lipschitz,
                e.centers.len()
            ),
            Mode::Envelope(None) => "envelope mode (not fitted)".into(),
        }
    }

    /// `H(y)`.
    pub fn h_value(&self, y: &[f64]) -> Result<f64> {
        self.scaling.h(y)
    }

    fn fitted_envelope(&self) -> Result<&Envelope> {
        self.envelope()
            .ok_or_else(|| Error::Transversal("envelope not fitted".into()))
    }

    fn check_box(&self, y: &[f64], lo: &[f64], hi: &[f64]) -> Result<()> {
        if y.len() != lo.len() {
            return Err(Error::Shape(format!(
                "argument of length {} for a {}-dim box",
                y.len(),
                lo.len()
            )));
        }
        for mu in 0..y.len() {
            if !(lo[mu] <= y[mu] && y[mu] <= hi[mu]) {
                return Err(Error::Transversal(format!(
                    "y[{mu}] = {} outside the box [{}, {}]",
                    y[mu], lo[mu], hi[mu]
                )));
            }
        }
        self.scaling.feedback.domain().check(y)
    }

    /// `tau(y)` on the scalar grid.
    pub fn tau(&self, y: &[f64]) -> Result<C1Fn> {
        match &self.mode {
            Mode::Fixed { lo, hi, tau, .. } => {
                self.check_box(y, lo, hi)?;
                Ok(tau.clone())
            }
            Mode::Envelope(_) => {
                let env = self.fitted_envelope()?;
                self.scaling.feedback.domain().check(y)?;
                let (hb, _) = env.eval(y);
                let h = self.grid.h();
                let tau = match self.shape {
                    TransversalShape::Chebyshev => {
                        let (m, w) = self.blend(hb)?;
                        C1Fn::from_fn(&self.grid, |t| {
                            (1.0 - w) * chebyshev_profile(m, h, t)
                                + w * chebyshev_profile(m + 1, h, t)
                        })
                    }
                    TransversalShape::Sine => {
                        let lambda = 1.0 / hb;
                        C1Fn::from_fn(&self.grid, |t| (lambda * t).sin() / lambda)
                    }
                };
                check_slope(&tau, 1.0)?;
                Ok(tau.scale(self.gain))
            }
        }
    }

    /// `∂_mu tau(y)` on the scalar grid.
    pub fn dtau(&self, y: &[f64], mu: usize) -> Result<C1Fn> {
        if mu >= y.len() {
            return Err(Error::Shape(format!(
                "index {mu} for argument of length {}",
                y.len()
            )));
        }
        match &self.mode {
            Mode::Fixed { lo, hi, .. } => {
                self.check_box(y, lo, hi)?;
                Ok(C1Fn::zeros(&self.grid))
            }
            Mode::Envelope(_) => {
                let env = self.fitted_envelope()?;
                self.scaling.feedback.domain().check(y)?;
                let (hb, grad) = env.eval(y);
                let dh = grad[mu];
                let h = self.grid.h();
                let d = match self.shape {
                    TransversalShape::Chebyshev => {
                        let s = self.blend_position(hb);
                        let (m, _) = self.blend(hb)?;
                        let (_, dw) = smoothstep(s - m as f64);
                        let ds = -(s - 1.0) / (2.0 * hb) * dh;
                        let c = dw * ds;
                        C1Fn::from_fn(&self.grid, |t| {
                            c * (chebyshev_profile(m + 1, h, t) - chebyshev_profile(m, h, t))
                        })
                    }
                    TransversalShape::Sine => {
                        let lambda = 1.0 / hb;
                        let dl = -dh / (hb * hb);
                        C1Fn::from_fn(&self.grid, |t| {
                            dl * (t * (lambda * t).cos() / lambda
                                - (lambda * t).sin() / (lambda * lambda))
                        })
                    }
                };
                Ok(d.scale(self.gain))
            }
        }
    }

    fn blend_position(&self, hb: f64) -> f64 {
        1.0 + (self.grid.h() / (2.0 * hb)).sqrt()
    }

    /// Lower degree and blending weight for envelope value `hb`.
    fn blend(&self, hb: f64) -> Result<(usize, f64)> {
        let s = self.blend_position(hb);
        let m = s.floor() as usize;
        if m + 1 > self.grid.degree() {
            return Err(Error::Transversal(format!(
                "envelope {hb:e} needs Chebyshev degree {} > N = {}",
                m + 1,
                self.grid.degree()
            )));
        }
        Ok((m, smoothstep(s - m as f64).0))
    }
}

fn check_slope(tau: &C1Fn, expected: f64) -> Result<()> {
    let slope = tau.deriv_at_zero()[0];
    if (slope - expected).abs() > SLOPE_TOL {
        return Err(Error::Transversal(format!(
            "slope at 0 is {slope}, grid cannot resolve this profile"
        )));
    }
    Ok(())
}

/// Points of a regular lattice in the box, at most about `max_samples`.
pub fn box_lattice(lo: &[f64], hi: &[f64], max_samples: usize) -> Vec<Vec<f64>> {
    let dim = lo.len();
    let per = ((max_samples as f64).powf(1.0 / dim as f64).floor() as usize).max(2);
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(
            (0..dim)
                .map(|mu| lo[mu] + (hi[mu] - lo[mu]) * idx[mu] as f64 / (per - 1) as f64)
                .collect(),
        );
        let mut d = 0;
        loop {
            if d == dim {
                return out;
            }
            idx[d] += 1;
            if idx[d] < per {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn min_on_box(scaling: &ScalingFn, lo: &[f64], hi: &[f64], max_samples: usize) -> Result<f64> {
    let kn = scaling.feedback.k() * scaling.feedback.n();
    if lo.len() != kn || hi.len() != kn {
        return Err(Error::Shape(format!(
            "box bounds must have length k*n = {kn}"
        )));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::InvalidParameter("box with lo > hi".into()));
    }
    let mut min = f64::INFINITY;
    for y in box_lattice(lo, hi, max_samples) {
        min = min.min(
            scaling
                .h(&y)
                .map_err(|e| Error::Transversal(format!("box point {y:?} not in V: {e}")))?,
        );
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::GridSpec;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        GridSpec::new(1.0, 1, 24).build().unwrap()
    }

    fn hc() -> ScalingFn {
        ScalingFn::new(Scaling::Hc { eps: 0.5, c: 1.0 }, FeedbackMap::s5()).unwrap()
    }

    #[test]
    fn scaling_examples() {
        assert_abs_diff_eq!(hc().h(&[0.0]).unwrap(), 0.0625, epsilon = 1e-15);
        let q = ScalingFn::new(
            Scaling::Hqbd {
                delta: 0.5,
                q: 0.5,
                b: 1.0,
            },
            FeedbackMap::s5(),
        )
        .unwrap();
        assert_abs_diff_eq!(q.h(&[0.0]).unwrap(), 1.0 / 12.0, epsilon = 1e-15);
        let s = hc();
        let vals: Vec<f64> = (1..=10).map(|n| s.h(&[-(n as f64)]).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(s.h(&[1.0]).is_err());
    }

    #[test]
    fn box_mode_bounds() {
        let g = grid();
        let fam = TransversalFamily::constant_on_box(
            hc(),
            &g,
            TransversalShape::Chebyshev,
            vec![-2.0],
            vec![0.9],
            BoxOptions::default(),
        )
        .unwrap();
        assert_eq!(fam.profile(), Some(Profile::Chebyshev { m: 6 }));
        for i in 0..=20 {
            let y = [-2.0 + 2.9 * i as f64 / 20.0];
            let tau = fam.tau(&y).unwrap();
            assert!((tau.deriv_at_zero()[0] - 1.0).abs() <= SLOPE_TOL);
            assert!(tau.sup_norm_upper() <= fam.h_value(&y).unwrap());
            assert_eq!(fam.dtau(&y, 0).unwrap().sup_norm(), 0.0);
        }
        assert!(fam.tau(&[-2.5]).is_err());
    }

    #[test]
    fn sine_profile_with_lambda_ten() {
        let g = GridSpec::new(1.0, 1, 32).build().unwrap();
        let fam = TransversalFamily::with_profile(
            hc(),
            &g,
            Profile::Sine { lambda: 10.0 },
            vec![-1.0],
            vec![0.0],
        )
        .unwrap();
        let tau = fam.tau(&[0.0]).unwrap();
        assert!(tau.sup_norm() <= 0.1 + 1e-12);
        assert!((tau.deriv_at_zero()[0] - 1.0).abs() <= SLOPE_TOL);
    }

    #[test]
    fn unresolved_sine_is_rejected() {
        let g = grid();
        let r = TransversalFamily::with_profile(
            hc(),
            &g,
            Profile::Sine { lambda: 60.0 },
            vec![-1.0],
            vec![0.0],
        );
        assert!(matches!(r, Err(Error::Transversal(_))));
    }

    #[test]
    fn envelope_requires_fit() {
        let g = grid();
        let fam =
            TransversalFamily::smooth_envelope(hc(), &g, TransversalShape::Chebyshev, &[], None)
                .unwrap();
        assert!(matches!(fam.tau(&[0.0]), Err(Error::Transversal(_))));
    }

    #[test]
    fn envelope_derivative_matches_differences() {
        let samples = box_lattice(&[-2.0], &[0.9], 41);
        for shape in [TransversalShape::Chebyshev, TransversalShape::Sine] {
            let g = match shape {
                TransversalShape::Chebyshev => grid(),
                TransversalShape::Sine => GridSpec::new(1.0, 1, 96).build().unwrap(),
            };
            let fam =
                TransversalFamily::smooth_envelope(hc(), &g, shape, &samples, Some(0.3)).unwrap();
            for y0 in [-1.73, -0.4, 0.35] {
                let s = 1e-6;
                let tp = fam.tau(&[y0 + s]).unwrap();
                let tm = fam.tau(&[y0 - s]).unwrap();
                let fd = C1Fn::lincomb(0.5 / s, &tp, -0.5 / s, &tm).unwrap();
                let an = fam.dtau(&[y0], 0).unwrap();
                let err = fd.sub(&an).unwrap().sup_norm();
                assert!(
                    err <= 1e-5 * an.sup_norm().max(1e-6),
                    "{shape:?} {y0} {err}"
                );
            }
        }
    }

    #[test]
    fn lattice_covers_corners() {
        let pts = box_lattice(&[0.0, -1.0], &[1.0, 1.0], 25);
        assert_eq!(pts.len(), 25);
        assert!(pts.contains(&vec![0.0, -1.0]));
        assert!(pts.contains(&vec![1.0, 1.0]));
    }
}
