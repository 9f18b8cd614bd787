//! Continuous linear maps `C([-h,0], R^n) -> R` built from point masses and a density.
//!
//! `L(chi) = sum_i a_i · chi(t_i) + ∫ w(t) · chi(t) dt`.
//!
//! With the max norm on `R^n` the dual norm is `sum_i |a_i|_1 + ∫ |w(t)|_1 dt`.

use crate::error::{Error, Result};
use crate::funcspace::{C0Fn, Grid};

/// A point mass at `t` with one weight per component.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ExtLinFunctional {
    grid: Grid,
    atoms: Vec<Atom>,
    density: Option<C0Fn>,
}

impl ExtLinFunctional {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            atoms: Vec::new(),
            density: None,
        }
    }

    /// A single atom at `t` with weight row `weights`.
    pub fn atom(grid: &Grid, t: f64, weights: Vec<f64>) -> Result<Self> {
        let mut l = Self::zero(grid);
        l.push_atom(t, weights)?;
        Ok(l)
    }

    /// Point evaluation of component `nu` at `t`, times `weight`.
    pub fn point(grid: &Grid, t: f64, nu: usize, weight: f64) -> Result<Self> {
        if nu >= grid.n() {
            return Err(Error::Shape(format!("component {nu} for n = {}", grid.n())));
        }
        let mut w = vec![0.0; grid.n()];
        w[nu] = weight;
        Self::atom(grid, t, w)
    }

    /// Pure density functional `chi ↦ ∫ w · chi`.
    pub fn from_density(density: C0Fn) -> Self {
        Self {
            grid: density.grid().clone(),
            atoms: Vec::new(),
            density: Some(density),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&C0Fn> {
        self.density.as_ref()
    }

    fn push_atom(&mut self, t: f64, weights: Vec<f64>) -> Result<()> {
        let h = self.grid.h();
        if !(t.is_finite() && t >= -h && t <= 0.0) {
            return Err(Error::Domain(format!(
                "atom location {t} outside [-{h}, 0]"
            )));
        }
        if weights.len() != self.grid.n() {
            return Err(Error::Shape(format!(
                "atom weight row of length {} for n = {}",
                weights.len(),
                self.grid.n()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite atom weight".into()));
        }
        if let Some(a) = self.atoms.iter_mut().find(|a| a.t == t) {
            for (x, y) in a.weights.iter_mut().zip(&weights) {
                *x += y;
            }
        } else {
            self.atoms.push(Atom { t, weights });
        }
        Ok(())
    }

    /// Adds `weight · chi_nu(t)` to the functional.
    pub fn with_atom(mut self, t: f64, weights: Vec<f64>) -> Result<Self> {
        self.push_atom(t, weights)?;
        Ok(self)
    }

    pub fn with_density(self, density: C0Fn) -> Result<Self> {
        self.add(&Self::from_density(density))
    }

    pub fn apply(&self, chi: &C0Fn) -> Result<f64> {
        if !self.grid.same_as(chi.grid()) {
            return Err(Error::Shape(format!(
                "functional on {:?} applied to function on {:?}",
                self.grid,
                chi.grid()
            )));
        }
        let mut total = 0.0;
        for atom in &self.atoms {
            let row = self.grid.lagrange_weights(atom.t)?;
            for (nu, a) in atom.weights.iter().enumerate() {
                if *a != 0.0 {
                    let v: f64 = row.iter().zip(chi.component(nu)).map(|(l, x)| l * x).sum();
                    total += a * v;
                }
            }
        }
        if let Some(w) = &self.density {
            let q = self.grid.quad_weights();
            for nu in 0..self.grid.n() {
                total += w
                    .component(nu)
                    .iter()
                    .zip(chi.component(nu))
                    .zip(q)
                    .map(|((w, x), q)| q * w * x)
                    .sum::<f64>();
            }
        }
        Ok(total)
    }

    /// Dual norm for the max norm on `R^n`.
    ///
    /// The density part is the larger of the nodal-quadrature value (exact for
    /// how `apply` integrates) and the oversampled integral of `|w|` inflated by
    /// the grid's safety factor.
    pub fn op_norm(&self) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .map(|a| a.weights.iter().map(|w| w.abs()).sum::<f64>())
            .sum();
        atoms + self.density_norm()
    }

    fn density_norm(&self) -> f64 {
        let Some(w) = &self.density else {
            return 0.0;
        };
        let grid = &self.grid;
        let q = grid.quad_weights();
        let pts = grid.fine_points();
        let mut nodal = 0.0;
        let mut fine = 0.0;
        for nu in 0..grid.n() {
            let c = w.component(nu);
            nodal += c.iter().zip(q).map(|(w, q)| q * w.abs()).sum::<f64>();
            let vals: Vec<f64> = pts
                .iter()
                .map(|&t| w.eval_component(nu, t).map(f64::abs).unwrap_or(0.0))
                .collect();
            for i in 1..pts.len() {
                fine += 0.5 * (pts[i] - pts[i - 1]) * (vals[i] + vals[i - 1]);
            }
        }
        nodal.max(grid.safety() * fine)
    }

    pub fn scale(&self, a: f64) -> Self {
        if a == 0.0 {
            return Self::zero(&self.grid);
        }
        Self {
            grid: self.grid.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|at| Atom {
                    t: at.t,
                    weights: at.weights.iter().map(|w| a * w).collect(),
                })
                .collect(),
            density: self.density.as_ref().map(|d| d.scale(a)),
        }
    }

    /// Sum of two functionals; atoms at identical locations are merged.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        let mut out = self.clone();
        for a in &other.atoms {
            out.push_atom(a.t, a.weights.clone())?;
        }
        out.density = match (&self.density, &other.density) {
            (Some(x), Some(y)) => Some(x.add(y)?),
            (Some(x), None) => Some(x.clone()),
            (None, Some(y)) => Some(y.clone()),
            (None, None) => None,
        };
        out.atoms.retain(|a| a.weights.iter().any(|w| *w != 0.0));
        Ok(out)
    }

    /// Sum of `coeffs[i] · terms[i]`.
    pub fn combine(grid: &Grid, coeffs: &[f64], terms: &[Self]) -> Result<Self> {
        let mut acc = Self::zero(grid);
        for (c, l) in coeffs.iter().zip(terms) {
            if *c != 0.0 {
                acc = acc.add(&l.scale(*c))?;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::GridSpec;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Grid {
        GridSpec::new(1.0, n, 16).build().unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = grid(1);
        let one = C0Fn::from_fn(&g, |_| 1.0);
        let id = C0Fn::from_fn(&g, |t| t);
        let at = ExtLinFunctional::atom(&g, -0.5, vec![1.0]).unwrap();
        assert_abs_diff_eq!(at.apply(&one).unwrap(), 1.0, epsilon = 1e-15);
        let dens = ExtLinFunctional::from_density(one.clone());
        assert_abs_diff_eq!(dens.apply(&id).unwrap(), -0.5, epsilon = 1e-14);
        let both = at.add(&dens).unwrap();
        assert_abs_diff_eq!(both.apply(&id).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn op_norm_examples() {
        let g = grid(1);
        let at = ExtLinFunctional::atom(&g, -0.5, vec![1.0]).unwrap();
        assert_eq!(at.op_norm(), 1.0);
        let dens = ExtLinFunctional::from_density(C0Fn::from_fn(&g, |_| 1.0));
        assert_abs_diff_eq!(dens.op_norm(), 1.0, epsilon = 1e-5);
        let mixed = ExtLinFunctional::atom(&g, 0.0, vec![-2.0])
            .unwrap()
            .with_density(C0Fn::from_fn(&g, |_| 1.0))
            .unwrap();
        assert_abs_diff_eq!(mixed.op_norm(), 3.0, epsilon = 1e-5);
    }

    #[test]
    fn merging_and_cancellation() {
        let g = grid(2);
        let l = ExtLinFunctional::atom(&g, -0.25, vec![1.0, -2.0])
            .unwrap()
            .with_atom(-0.25, vec![0.5, 0.0])
            .unwrap();
        assert_eq!(l.atoms().len(), 1);
        assert_eq!(l.op_norm(), 3.5);
        let zero = l.add(&l.scale(-1.0)).unwrap();
        assert_eq!(zero.op_norm(), 0.0);
        assert_eq!(l.scale(0.0).op_norm(), 0.0);
    }

    #[test]
    fn rejects_bad_atoms() {
        let g = grid(1);
        assert!(ExtLinFunctional::atom(&g, 0.1, vec![1.0]).is_err());
        assert!(ExtLinFunctional::atom(&g, -0.1, vec![1.0, 2.0]).is_err());
        let other = GridSpec::new(1.0, 1, 8).build().unwrap();
        let l = ExtLinFunctional::zero(&g);
        assert!(l.apply(&C0Fn::zeros(&other)).is_err());
    }

    #[test]
    fn vector_atoms_pick_components() {
        let g = grid(2);
        let chi = C0Fn::from_components(&g, |nu, t| if nu == 0 { t } else { 3.0 });
        let l = ExtLinFunctional::point(&g, -0.3, 1, 2.0).unwrap();
        assert_abs_diff_eq!(l.apply(&chi).unwrap(), 6.0, epsilon = 1e-14);
        let l = ExtLinFunctional::point(&g, -0.3, 0, 1.0).unwrap();
        assert_abs_diff_eq!(l.apply(&chi).unwrap(), -0.3, epsilon = 1e-14);
    }
}
