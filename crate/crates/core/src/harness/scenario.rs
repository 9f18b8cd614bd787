//! Scenario files: TOML (or the equivalent JSON) with dotted-key overrides.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::probes::SeriesShape;
use super::tolerances::Tolerances;
use crate::chart::{Chart, ConvexSubset};
use crate::delays::{ConstantDelay, DelayFunctional, FactorizedDelay, IntegralDelay};
use crate::error::{Error, Result};
use crate::funcspace::{Grid, GridSpec};
use crate::rfde::{FeedbackMap, RegionParams, Rfde, VDomain};
use crate::transversal::{
    box_lattice, BoxOptions, Scaling, ScalingFn, TransversalFamily, TransversalShape,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemTag {
    S5,
    Lin,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    S5,
    Identity,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Integral,
    Constant,
    Factorized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub tag: SystemTag,
    /// Feedback for `custom`; `s5` and `lin` fix their own.
    pub feedback: FeedbackKind,
    /// Delay functional; `s5` requires `integral`.
    pub delay: DelayKind,
    /// Value of the constant delay.
    pub constant_delay: f64,
    /// Number of components for `lin` and `custom`.
    pub n: usize,
    /// Replaces the feedback by `g = 0` on the same domain.
    pub zero_feedback: bool,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            tag: SystemTag::S5,
            feedback: FeedbackKind::S5,
            delay: DelayKind::Integral,
            constant_delay: -0.5,
            n: 1,
            zero_feedback: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    pub degree: usize,
    /// Fine-grid points per node interval count; 0 keeps the default `8 N`.
    pub oversample: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            h: 1.0,
            degree: 24,
            oversample: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSection {
    /// Contraction budget of the `U_c` chart.
    pub eps: f64,
    pub c: f64,
    /// Parameters of the `U_{q,b,delta}` chart.
    pub q: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for RegionSection {
    fn default() -> Self {
        Self {
            eps: 0.5,
            c: 1.0,
            q: 1.0,
            b: 1.0,
            delta: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransversalMode {
    Box,
    Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransversalSection {
    pub mode: TransversalMode,
    pub shape: TransversalShape,
    /// Working box for `y = v(phi)`; empty picks the system default.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub margin: f64,
    /// Envelope Lipschitz constant; 0 picks the default.
    pub lipschitz: f64,
}

impl Default for TransversalSection {
    fn default() -> Self {
        Self {
            mode: TransversalMode::Box,
            shape: TransversalShape::Chebyshev,
            lo: Vec::new(),
            hi: Vec::new(),
            margin: BoxOptions::default().margin,
            lipschitz: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Probes for smallness, inversion and the transversal checks.
    pub count: usize,
    pub manifold_points: usize,
    pub pairs: usize,
    pub fd_directions: usize,
    pub operator_probes: usize,
    /// Chebyshev terms of every random function.
    pub terms: usize,
    /// Probe offsets are uniform in this range; empty picks the system default.
    pub offset: Vec<f64>,
    pub amplitude: f64,
    /// Keep only probes inside the region; turning this off lets the
    /// smallness checks see, and diagnose, probes outside it.
    pub reject_outside: bool,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            count: 100,
            manifold_points: 50,
            pairs: 200,
            fd_directions: 100,
            operator_probes: 64,
            terms: 8,
            offset: Vec::new(),
            amplitude: 0.6,
            reject_outside: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub t_final: f64,
    pub dt: f64,
    /// The run starts from the projection of this constant, integrated for
    /// `burn_in` and projected again, so that its history is smooth.
    pub start_level: f64,
    pub burn_in: f64,
    /// Constant start for the existence run.
    pub constant_start: f64,
    /// Delay of the exponential benchmark.
    pub benchmark_delay: f64,
    /// Residuals below this are roundoff and exempt from the halving test.
    pub roundoff_floor: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: 1e-3,
            start_level: 0.5,
            burn_in: 2.5,
            constant_start: -1.0,
            benchmark_delay: -0.5,
            roundoff_floor: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for reports when the command line gives none.
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Engineered violations run with the suite.
    pub negative_controls: bool,
    pub system: SystemSection,
    pub grid: GridSection,
    pub region: RegionSection,
    pub transversal: TransversalSection,
    pub probes: ProbeSection,
    pub flow: FlowSection,
    pub tolerances: Tolerances,
    pub output: OutputSection,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "s5".into(),
            seed: 1,
            negative_controls: true,
            system: SystemSection::default(),
            grid: GridSection::default(),
            region: RegionSection::default(),
            transversal: TransversalSection::default(),
            probes: ProbeSection::default(),
            flow: FlowSection::default(),
            tolerances: Tolerances::default(),
            output: OutputSection::default(),
        }
    }
}

/// Largest seed a scenario file can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Everything a suite needs, built once from a scenario.
#[derive(Clone, Debug)]
pub struct Built {
    pub grid: Grid,
    pub rfde: Rfde,
    pub chart: Chart,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Scenario {
    pub fn s5() -> Self {
        Self::default()
    }

    pub fn lin() -> Self {
        let mut s = Self::default();
        s.name = "lin".into();
        s.system.tag = SystemTag::Lin;
        s
    }

    /// Reads a `.toml` or `.json` file and applies `KEY=VALUE` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, is_json, overrides)
    }

    pub fn parse(text: &str, is_json: bool, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = if is_json {
            let json: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Scenario(format!("JSON: {e}")))?;
            toml::Value::try_from(json).map_err(|e| Error::Scenario(format!("JSON: {e}")))?
        } else {
            toml::Value::Table(
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Scenario(format!("TOML: {e}")))?,
            )
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let s: Scenario = value
            .try_into()
            .map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let bad = |m: &str| Err(Error::Scenario(m.to_string()));
        if self.seed > MAX_SEED {
            return bad("seed must be at most 2^63 - 1, the largest TOML integer");
        }
        if self.system.n == 0 {
            return bad("system.n must be positive");
        }
        if self.system.tag == SystemTag::S5 && self.system.n != 1 {
            return bad("the s5 system is scalar; system.n must be 1");
        }
        if self.system.tag == SystemTag::S5 && self.system.delay != DelayKind::Integral {
            return bad("the s5 system uses the integral delay; use tag = \"custom\" with feedback = \"s5\" for others");
        }
        let r = &self.region;
        if !(r.eps > 0.0 && r.eps < 1.0) {
            return bad("region.eps must lie in (0, 1)");
        }
        RegionParams::Uc { c: r.c }.validate()?;
        RegionParams::Uqbd {
            q: r.q,
            b: r.b,
            delta: r.delta,
        }
        .validate()?;
        let p = &self.probes;
        if p.count == 0
            || p.manifold_points == 0
            || p.pairs == 0
            || p.fd_directions == 0
            || p.operator_probes == 0
        {
            return bad("probe counts must be positive");
        }
        if !(p.amplitude >= 0.0) {
            return bad("probes.amplitude must be non-negative");
        }
        if !(p.offset.is_empty() || p.offset.len() == 2 && p.offset[0] <= p.offset[1]) {
            return bad("probes.offset must be [lo, hi] with lo <= hi");
        }
        let f = &self.flow;
        if !(f.t_final > 0.0 && f.dt > 0.0 && f.burn_in >= 0.0 && f.roundoff_floor > 0.0) {
            return bad("flow.t_final, flow.dt, flow.roundoff_floor must be positive and flow.burn_in non-negative");
        }
        if !(f.benchmark_delay < 0.0 && -f.benchmark_delay <= self.grid.h) {
            return bad("flow.benchmark_delay must lie in [-h, 0)");
        }
        if !(self.transversal.margin >= 0.0 && self.transversal.margin < 1.0) {
            return bad("transversal.margin must lie in [0, 1)");
        }
        self.grid_spec().validate()?;
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        let mut spec = GridSpec::new(self.grid.h, self.system.n, self.grid.degree);
        if self.grid.oversample > 0 {
            spec = spec.with_oversample(self.grid.oversample);
        }
        spec
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid_spec().build()
    }

    pub fn is_s5(&self) -> bool {
        self.system.tag == SystemTag::S5
            || self.system.tag == SystemTag::Custom && self.system.feedback == FeedbackKind::S5
    }

    pub fn feedback_is_zero(&self) -> bool {
        self.system.zero_feedback
            || self.system.tag == SystemTag::Custom && self.system.feedback == FeedbackKind::Zero
    }

    pub fn feedback(&self) -> Result<FeedbackMap> {
        let n = self.system.n;
        let kind = match self.system.tag {
            SystemTag::S5 => FeedbackKind::S5,
            SystemTag::Lin => FeedbackKind::Identity,
            SystemTag::Custom => self.system.feedback,
        };
        let fb = match kind {
            FeedbackKind::S5 => {
                if n != 1 {
                    return Err(Error::Scenario("the s5 feedback is scalar".into()));
                }
                FeedbackMap::s5()
            }
            FeedbackKind::Identity => FeedbackMap::identity(1, n)?,
            FeedbackKind::Zero => FeedbackMap::zero(1, n, VDomain::Whole)?,
        };
        Ok(if self.system.zero_feedback {
            fb.zeroed()
        } else {
            fb
        })
    }

    pub fn delay_of(&self, kind: DelayKind, grid: &Grid) -> Result<Arc<dyn DelayFunctional>> {
        let h = grid.h();
        Ok(match kind {
            DelayKind::Integral => Arc::new(IntegralDelay::standard(h)),
            DelayKind::Constant => Arc::new(ConstantDelay::new(self.system.constant_delay, h)?),
            DelayKind::Factorized => Arc::new(FactorizedDelay::mean_tanh(grid)?),
        })
    }

    pub fn delay(&self, grid: &Grid) -> Result<Arc<dyn DelayFunctional>> {
        self.delay_of(self.system.delay, grid)
    }

    pub fn rfde(&self) -> Result<Rfde> {
        let grid = self.grid()?;
        Rfde::new(self.feedback()?, self.delay(&grid)?, grid)
    }

    /// The working box of `y`, from the scenario or the system default.
    pub fn working_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.system.n;
        let t = &self.transversal;
        if !t.lo.is_empty() || !t.hi.is_empty() {
            if t.lo.len() != n || t.hi.len() != n {
                return Err(Error::Scenario(format!(
                    "transversal.lo and transversal.hi need {n} entries"
                )));
            }
            return Ok((t.lo.clone(), t.hi.clone()));
        }
        Ok(if self.is_s5() {
            (vec![-2.0], vec![0.9])
        } else {
            (vec![-1.5; n], vec![1.5; n])
        })
    }

    /// Range of probe offsets, from the scenario or inside the working box.
    pub fn probe_shape(&self) -> Result<SeriesShape> {
        let (lo, hi) = if self.probes.offset.len() == 2 {
            (self.probes.offset[0], self.probes.offset[1])
        } else {
            let (blo, bhi) = self.working_box()?;
            let lo = blo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let hi = bhi.iter().cloned().fold(f64::INFINITY, f64::min);
            let pad = 0.15 * (hi - lo);
            (lo + pad, hi - pad)
        };
        Ok(SeriesShape {
            offset_lo: lo,
            offset_hi: hi,
            amplitude: self.probes.amplitude,
            terms: self.probes.terms,
        })
    }

    fn transversal_for(
        &self,
        scaling: Scaling,
        feedback: FeedbackMap,
        grid: &Grid,
    ) -> Result<TransversalFamily> {
        let (lo, hi) = self.working_box()?;
        let scaling = ScalingFn::new(scaling, feedback)?;
        let t = &self.transversal;
        match t.mode {
            TransversalMode::Box => TransversalFamily::constant_on_box(
                scaling,
                grid,
                t.shape,
                lo,
                hi,
                BoxOptions {
                    margin: t.margin,
                    ..BoxOptions::default()
                },
            ),
            TransversalMode::Envelope => {
                let samples = box_lattice(&lo, &hi, 2000);
                let l = (t.lipschitz > 0.0).then_some(t.lipschitz);
                TransversalFamily::smooth_envelope(scaling, grid, t.shape, &samples, l)
            }
        }
    }

    fn build_with(&self, rfde: Rfde, scaling: Scaling, params: RegionParams) -> Result<Built> {
        let grid = rfde.grid().clone();
        let tr = self.transversal_for(scaling, rfde.feedback().clone(), &grid)?;
        let (lo, hi) = self.working_box()?;
        Ok(Built {
            grid,
            chart: Chart::new(rfde.clone(), tr, params)?,
            rfde,
            lo,
            hi,
        })
    }

    /// The `U_c` chart.
    pub fn build(&self) -> Result<Built> {
        let r = &self.region;
        self.build_with(
            self.rfde()?,
            Scaling::Hc { eps: r.eps, c: r.c },
            RegionParams::Uc { c: r.c },
        )
    }

    /// The `U_{q,b,delta}` chart.
    pub fn build_qbd(&self) -> Result<Built> {
        let r = &self.region;
        self.build_with(
            self.rfde()?,
            Scaling::Hqbd {
                delta: r.delta,
                q: r.q,
                b: r.b,
            },
            RegionParams::Uqbd {
                q: r.q,
                b: r.b,
                delta: r.delta,
            },
        )
    }

    /// The identity-feedback system on the same grid and delay, for fixed-point checks.
    pub fn build_lin_companion(&self) -> Result<Built> {
        let mut s = self.clone();
        s.system.tag = SystemTag::Lin;
        s.system.zero_feedback = false;
        s.transversal.lo.clear();
        s.transversal.hi.clear();
        let grid = self.grid()?;
        let rfde = Rfde::new(s.feedback()?, self.delay(&grid)?, grid)?;
        let r = &self.region;
        s.build_with(
            rfde,
            Scaling::Hc { eps: r.eps, c: r.c },
            RegionParams::Uc { c: r.c },
        )
    }

    /// A convex subset of `U_c` inside the working box: values strictly in
    /// the box and slopes below `c / q` for a certified delay bound `q`.
    pub fn convex_subset(&self, built: &Built) -> Option<ConvexSubset> {
        let q = built.rfde.delay().q_bound().certified()?;
        let slope = if q > 0.0 {
            self.region.c / q
        } else {
            f64::INFINITY
        };
        Some(ConvexSubset {
            lower: built.lo.clone(),
            upper: built.hi.clone(),
            slope,
        })
    }
}

/// Sets `a.b.c = value`; the value is parsed as a TOML literal, else kept as a string.
fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Scenario(format!("override `{assignment}` is not KEY=VALUE")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Scenario(format!("malformed override key `{key}`")));
    }
    let mut node = root;
    for p in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("override `{key}`: `{p}` is not a section")))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::Scenario(format!("override `{key}` does not name a section key")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            Scenario::parse("", false, &[]).unwrap(),
            Scenario::default()
        );
    }

    #[test]
    fn overrides_are_typed() {
        let s = Scenario::parse(
            "[system]\ntag = \"lin\"\n",
            false,
            &[
                "region.eps=0.25".into(),
                "system.zero_feedback=true".into(),
                "name=x y".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.region.eps, 0.25);
        assert!(s.system.zero_feedback);
        assert_eq!(s.system.tag, SystemTag::Lin);
        assert_eq!(s.name, "x y");
    }

    #[test]
    fn json_matches_toml() {
        let t = Scenario::parse("seed = 9\n[grid]\ndegree = 16\n", false, &[]).unwrap();
        let j = Scenario::parse(r#"{"seed": 9, "grid": {"degree": 16}}"#, true, &[]).unwrap();
        assert_eq!(t, j);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Scenario::parse("[grid]\ndegre = 3\n", false, &[]).is_err());
        assert!(Scenario::parse("", false, &["region.eps=1.5".into()]).is_err());
        assert!(Scenario::parse("", false, &["tolerances.flatten=0".into()]).is_err());
        assert!(Scenario::parse("", false, &["noequals".into()]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::lin();
        assert_eq!(Scenario::parse(&s.to_toml(), false, &[]).unwrap(), s);
    }

    #[test]
    fn builds_default_charts() {
        let s = Scenario::s5();
        let b = s.build().unwrap();
        assert_eq!(b.lo, vec![-2.0]);
        s.build_qbd().unwrap();
        s.build_lin_companion().unwrap();
        assert!(s.convex_subset(&b).is_some());
    }
}
