use super::{symmetry_check, LatticePoint, SignedLatticeMeasure};
use crate::error::{Error, Result};

/// A symmetric probability distribution on `Z^d` with `0 < F{0} < 1`.
///
/// The stored measure may be a truncation of an infinite-support law; its `trunc_err`
/// then bounds the discarded mass. `tail_second_moment` bounds `Σ |x|² F{x}` over the
/// discarded atoms (`+∞` when the full law has infinite variance).
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricDistribution {
    measure: SignedLatticeMeasure,
    q: f64,
    tail_second_moment: f64,
}

impl SymmetricDistribution {
    /// Validates `measure`. An asymmetric input is replaced by the average with its
    /// reflection (the change is charged to `trunc_err`).
    pub fn new(measure: SignedLatticeMeasure) -> Result<Self> {
        if let Some((i, w)) = measure.weights().iter().enumerate().find(|(_, w)| **w < 0.0) {
            return Err(Error::NotSymmetricDistribution(format!(
                "negative weight {w} at {}",
                LatticePoint::from(measure.point(i))
            )));
        }
        let measure = if symmetry_check(&measure) {
            measure
        } else {
            measure.symmetrized()
        };
        let mass = measure.total_mass();
        if (mass - 1.0).abs() > measure.trunc_err() + 1e-12 {
            return Err(Error::NotSymmetricDistribution(format!(
                "total mass {mass} differs from 1 by more than trunc_err {}",
                measure.trunc_err()
            )));
        }
        let q = measure.weight_at(&vec![0; measure.dim()]);
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::NotSymmetricDistribution(format!(
                "mass at the origin q = {q} must lie in (0, 1)"
            )));
        }
        Ok(SymmetricDistribution {
            measure,
            q,
            tail_second_moment: 0.0,
        })
    }

    /// `q·I + Σ p_x (I_x + I_{−x})` from one representative per `±` pair.
    pub fn from_pairs(dim: usize, q: f64, pairs: &[(LatticePoint, f64)]) -> Result<Self> {
        let mut atoms = vec![(LatticePoint::origin(dim), q)];
        for (x, p) in pairs {
            if x.is_origin() {
                return Err(Error::InvalidArgument("pair representative at the origin".into()));
            }
            atoms.push((x.clone(), *p));
            atoms.push((x.neg(), *p));
        }
        Self::new(SignedLatticeMeasure::from_atoms(dim, atoms)?)
    }

    pub fn with_tail_second_moment(mut self, m2: f64) -> Self {
        assert!(m2 >= 0.0, "second moment must be nonnegative");
        self.tail_second_moment = m2;
        self
    }

    pub fn measure(&self) -> &SignedLatticeMeasure {
        &self.measure
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn trunc_err(&self) -> f64 {
        self.measure.trunc_err()
    }

    pub fn tail_second_moment(&self) -> f64 {
        self.tail_second_moment
    }

    /// Atoms off the origin as `(point, p_x)`.
    pub fn nonzero_atoms(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        self.measure.iter().filter(|(p, _)| p.iter().any(|c| *c != 0))
    }

    /// Number `N` of `±` pairs in the stored support.
    pub fn num_pairs(&self) -> usize {
        self.measure.len() / 2
    }
}
