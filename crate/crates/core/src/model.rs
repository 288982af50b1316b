//! Domain types shared by every policy, environment and evaluator.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arm identifier. Public ids are 1-based; `index()` gives the 0-based slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ArmId(u32);

impl ArmId {
    pub fn new(id: u32) -> Result<Self> {
        if id == 0 {
            return Err(Error::InvalidParameter("arm ids start at 1".into()));
        }
        Ok(ArmId(id))
    }

    /// Arm id for a 0-based slot.
    pub fn from_index(index: usize) -> Self {
        ArmId(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u32> for ArmId {
    type Error = Error;

    fn try_from(id: u32) -> Result<Self> {
        ArmId::new(id)
    }
}

impl From<ArmId> for u32 {
    fn from(id: ArmId) -> u32 {
        id.0
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn checked_vector(values: Vec<f64>, what: &'static str) -> Result<DVector<f64>> {
    if values.is_empty() {
        return Err(Error::Dimension(format!("{what} must have at least one entry")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(DVector::from_vec(values))
}

macro_rules! feature_newtype {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(DVector<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                checked_vector(values, $what).map($name)
            }

            pub fn from_vector(v: DVector<f64>) -> Result<Self> {
                if v.is_empty() {
                    return Err(Error::Dimension(format!("{} must have at least one entry", $what)));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite($what));
                }
                Ok($name(v))
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn norm(&self) -> f64 {
                self.0.norm()
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }
        }
    };
}

feature_newtype!(
    /// User context `x`, dimension `d`.
    UserFeature,
    "user feature"
);
feature_newtype!(
    /// Arm feature `y`, dimension `m`.
    ArmFeature,
    "arm feature"
);
feature_newtype!(
    /// Cross feature `z = vec(x yᵀ)`, dimension `d·m`.
    CrossFeature,
    "cross feature"
);

impl CrossFeature {
    /// Entry `(i, j)` of the `d×m` outer product this vector was built from.
    pub fn entry(&self, d: usize, i: usize, j: usize) -> f64 {
        self.0[j * d + i]
    }
}

/// Column-major vectorization of `x yᵀ`: entry `(i, j)` lands at `j·d + i`.
pub fn cross_feature(x: &UserFeature, y: &ArmFeature) -> CrossFeature {
    let d = x.dim();
    let m = y.dim();
    let mut z = DVector::zeros(d * m);
    for j in 0..m {
        let yj = y.0[j];
        for i in 0..d {
            z[j * d + i] = x.0[i] * yj;
        }
    }
    CrossFeature(z)
}

/// One selectable arm at a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub arm: ArmId,
    pub feature: ArmFeature,
}

/// Observation presented to a policy at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextEvent {
    pub t: u64,
    pub user: UserFeature,
    pub candidates: Vec<Candidate>,
}

impl ContextEvent {
    pub fn new(t: u64, user: UserFeature, candidates: Vec<Candidate>) -> Result<Self> {
        let event = ContextEvent { t, user, candidates };
        event.validate()?;
        Ok(event)
    }

    /// Candidates must be non-empty with distinct ids and a common feature dimension.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.candidates.first() else {
            return Err(Error::InvalidParameter("event has no candidate arms".into()));
        };
        let m = first.feature.dim();
        let mut ids: Vec<ArmId> = self.candidates.iter().map(|c| c.arm).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate candidate arm id".into()));
        }
        if self.candidates.iter().any(|c| c.feature.dim() != m) {
            return Err(Error::Dimension("candidate arm features differ in dimension".into()));
        }
        Ok(())
    }

    pub fn candidate(&self, arm: ArmId) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.arm == arm)
    }

    pub fn contains(&self, arm: ArmId) -> bool {
        self.candidate(arm).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn user(v: &[f64]) -> UserFeature {
        UserFeature::new(v.to_vec()).unwrap()
    }

    fn arm(v: &[f64]) -> ArmFeature {
        ArmFeature::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cross_feature_examples() {
        let z = cross_feature(&user(&[1.0, 0.0]), &arm(&[0.0, 1.0]));
        assert_eq!(z.as_slice(), &[0.0, 0.0, 1.0, 0.0]);

        let z = cross_feature(&user(&[1.0, 1.0]), &arm(&[1.0, 1.0]));
        assert_eq!(z.as_slice(), &[1.0, 1.0, 1.0, 1.0]);

        let z = cross_feature(&user(&[0.6, 0.8]), &arm(&[1.0, 0.0]));
        assert_eq!(z.as_slice(), &[0.6, 0.8, 0.0, 0.0]);
        assert!((z.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn arm_ids_are_one_based() {
        assert!(ArmId::new(0).is_err());
        let a = ArmId::new(3).unwrap();
        assert_eq!(a.index(), 2);
        assert_eq!(ArmId::from_index(2), a);
    }

    #[test]
    fn event_validation() {
        let c = |id| Candidate { arm: ArmId::new(id).unwrap(), feature: arm(&[1.0]) };
        assert!(ContextEvent::new(1, user(&[1.0]), vec![]).is_err());
        assert!(ContextEvent::new(1, user(&[1.0]), vec![c(1), c(1)]).is_err());
        assert!(ContextEvent::new(1, user(&[1.0]), vec![c(1), c(2)]).is_ok());
        assert!(UserFeature::new(vec![f64::NAN]).is_err());
        assert!(UserFeature::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn vec_round_trip_and_norm_product(
            x in prop::collection::vec(-1.0f64..1.0, 1..6),
            y in prop::collection::vec(-1.0f64..1.0, 1..6),
        ) {
            let (xu, ya) = (user(&x), arm(&y));
            let z = cross_feature(&xu, &ya);
            prop_assert_eq!(z.dim(), x.len() * y.len());
            for i in 0..x.len() {
                for j in 0..y.len() {
                    prop_assert_eq!(z.entry(x.len(), i, j), x[i] * y[j]);
                }
            }
            prop_assert!((z.norm() - xu.norm() * ya.norm()).abs() < 1e-12);
        }
    }
}
