//! Random smooth probe functions and deterministic seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, C1Fn, Grid};

/// Ratio between successive Chebyshev coefficients of a probe.
pub const COEFF_DECAY: f64 = 0.5;

/// A generator seeded by `seed` and the check name, so adding a check does
/// not shift the probes of any other.
pub fn rng_for(seed: u64, name: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(name.as_bytes());
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(head))
}

/// Shape of a random probe: `offset + amplitude Σ_j u_j decay^j T_j`,
/// `offset` uniform in `[offset_lo, offset_hi]`, `u_j` uniform in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesShape {
    pub offset_lo: f64,
    pub offset_hi: f64,
    pub amplitude: f64,
    pub terms: usize,
}

impl SeriesShape {
    pub fn sample(&self, rng: &mut ChaCha8Rng, grid: &Grid) -> Result<C1Fn> {
        if !(self.offset_lo <= self.offset_hi) {
            return Err(Error::Scenario(format!(
                "probe offset range [{}, {}] is empty",
                self.offset_lo, self.offset_hi
            )));
        }
        let coeffs: Vec<Vec<f64>> = (0..grid.n())
            .map(|_| {
                let mut c = vec![rng.gen_range(self.offset_lo..=self.offset_hi)];
                let mut scale = self.amplitude;
                for _ in 0..self.terms {
                    scale *= COEFF_DECAY;
                    c.push(scale * rng.gen_range(-1.0..=1.0));
                }
                c
            })
            .collect();
        C1Fn::from_chebyshev(grid, &coeffs)
    }
}

/// A random smooth function scaled to sup norm 1.
pub fn unit_direction(rng: &mut ChaCha8Rng, grid: &Grid, terms: usize) -> Result<C1Fn> {
    let shape = SeriesShape {
        offset_lo: -1.0,
        offset_hi: 1.0,
        amplitude: 2.0,
        terms,
    };
    loop {
        let f = shape.sample(rng, grid)?;
        let s = f.sup_norm();
        if s > 1e-3 {
            return Ok(f.scale(1.0 / s));
        }
    }
}

/// `count` unit probes for operator-norm estimates; the first is the constant 1.
pub fn operator_probes(
    rng: &mut ChaCha8Rng,
    grid: &Grid,
    count: usize,
    terms: usize,
) -> Result<Vec<C0Fn>> {
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(C0Fn::from_fn(grid, |_| 1.0));
    }
    while out.len() < count {
        out.push(unit_direction(rng, grid, terms)?.into_c0());
    }
    Ok(out)
}

/// Draws from `shape` until `accept` holds `count` times, giving up after
/// `100 count` draws.
pub fn rejection_sample(
    rng: &mut ChaCha8Rng,
    grid: &Grid,
    shape: &SeriesShape,
    count: usize,
    mut accept: impl FnMut(&C1Fn) -> bool,
) -> Result<Vec<C1Fn>> {
    let mut out = Vec::with_capacity(count);
    let budget = 100 * count.max(1);
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let f = shape.sample(rng, grid)?;
        if accept(&f) {
            out.push(f);
        }
    }
    if out.len() < count {
        return Err(Error::Scenario(format!(
            "only {} of {count} probes accepted after {budget} draws; widen or shift the probe shape",
            out.len()
        )));
    }
    Ok(out)
}

/// Short hex digest of the nodal values of the given functions and numbers.
pub fn digest(fns: &[&C0Fn], numbers: &[f64]) -> String {
    let mut h = Sha256::new();
    for f in fns {
        for v in f.values() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    for v in numbers {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::GridSpec;

    #[test]
    fn seeding_is_per_name() {
        let a: u64 = rng_for(7, "a").gen();
        let a2: u64 = rng_for(7, "a").gen();
        let b: u64 = rng_for(7, "b").gen();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn unit_directions_have_unit_norm() {
        let g = GridSpec::new(1.0, 2, 16).build().unwrap();
        let mut rng = rng_for(1, "u");
        for _ in 0..10 {
            let d = unit_direction(&mut rng, &g, 6).unwrap();
            assert!((d.sup_norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejection_reports_exhaustion() {
        let g = GridSpec::new(1.0, 1, 8).build().unwrap();
        let shape = SeriesShape {
            offset_lo: 0.0,
            offset_hi: 1.0,
            amplitude: 0.1,
            terms: 3,
        };
        let mut rng = rng_for(1, "r");
        assert!(rejection_sample(&mut rng, &g, &shape, 3, |_| false).is_err());
    }
}
