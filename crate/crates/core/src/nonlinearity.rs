//! Hidden-neuron activations.
//!
//! RLSU (rectified linear saturated unit) clips to `[0, th]` and is then
//! requantized to `bits_activation` unsigned levels. Tristate is a dead-zone
//! sign function whose `{-1, 0, +1}` output lets the second stage run on
//! adders alone.
//!
//! The printed tristate rule reads `+1 for y <= th`, `0 for -th < y < th`,
//! `-1 for y >= th`, which overlaps and is not monotone. The implementation
//! uses the standard orientation: `-1` below `-th`, `+1` above `th`.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Rlsu,
    Tristate,
}

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Rlsu => "rlsu",
            ActivationKind::Tristate => "tristate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rlsu" => Some(ActivationKind::Rlsu),
            "tristate" => Some(ActivationKind::Tristate),
            _ => None,
        }
    }
}

/// `0` for `y <= 0`, `y` inside `(0, th)`, `th` for `y >= th`.
pub fn rlsu(y: f64, th: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= th {
        th
    } else {
        y
    }
}

/// `-1` for `y <= -th`, `0` inside `(-th, th)`, `+1` for `y >= th`.
pub fn tristate(y: f64, th: f64) -> i8 {
    if y >= th {
        1
    } else if y <= -th {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub th: f64,
    /// Output resolution `b_H`; only used by RLSU.
    pub bits_activation: u32,
}

impl ActivationSpec {
    pub fn new(kind: ActivationKind, th: f64, bits_activation: u32) -> Result<Self> {
        let spec = Self { kind, th, bits_activation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.th > 0.0 && self.th.is_finite()) {
            return Err(invalid(alloc::format!("threshold {} must be positive", self.th)));
        }
        if self.kind == ActivationKind::Rlsu && !(1..=30).contains(&self.bits_activation) {
            return Err(invalid(alloc::format!("bits_activation {} not in [1, 30]", self.bits_activation)));
        }
        Ok(())
    }

    /// Largest output code: `2^b_H - 1` for RLSU, `1` for tristate.
    pub fn max_level(&self) -> i32 {
        match self.kind {
            ActivationKind::Rlsu => (1i32 << self.bits_activation) - 1,
            ActivationKind::Tristate => 1,
        }
    }

    /// Output codes a neuron can get stuck on.
    pub fn saturation_levels(&self) -> Vec<i32> {
        match self.kind {
            ActivationKind::Rlsu => alloc::vec![0, self.max_level()],
            ActivationKind::Tristate => alloc::vec![-1, 0, 1],
        }
    }

    /// Integer output code for one pre-activation value.
    #[inline]
    pub fn activate(&self, y: f64) -> i32 {
        match self.kind {
            ActivationKind::Rlsu => {
                let max = self.max_level() as f64;
                libm::round(rlsu(y, self.th) / self.th * max) as i32
            }
            ActivationKind::Tristate => tristate(y, self.th) as i32,
        }
    }

    /// Elementwise activation of a centered feature vector.
    pub fn activate_features(&self, h: &[i32]) -> Vec<i32> {
        h.iter().map(|&v| self.activate(v as f64)).collect()
    }

    /// Real value of one output code used for training: RLSU codes map onto
    /// `[0, 1]`, tristate codes are used as is.
    pub fn code_scale(&self) -> f64 {
        1.0 / self.max_level() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rlsu_regions() {
        assert_eq!(rlsu(-3.0, 5.0), 0.0);
        assert_eq!(rlsu(0.0, 5.0), 0.0);
        assert_eq!(rlsu(3.0, 5.0), 3.0);
        assert_eq!(rlsu(7.0, 5.0), 5.0);
        assert_eq!(rlsu(5.0, 5.0), 5.0);
    }

    #[test]
    fn tristate_regions() {
        assert_eq!(tristate(-3.0, 2.0), -1);
        assert_eq!(tristate(1.0, 2.0), 0);
        assert_eq!(tristate(3.0, 2.0), 1);
        assert_eq!(tristate(2.0, 2.0), 1);
        assert_eq!(tristate(-2.0, 2.0), -1);
    }

    #[test]
    fn activation_codes() {
        let r = ActivationSpec::new(ActivationKind::Rlsu, 40.0, 8).unwrap();
        assert_eq!(r.activate_features(&[0, 0, 0]), vec![0, 0, 0]);
        assert_eq!(r.activate(40.0), 255);
        assert_eq!(r.activate(400.0), 255);
        assert_eq!(r.activate(20.0), 128);
        assert_eq!(r.activate(-7.0), 0);
        let t = ActivationSpec::new(ActivationKind::Tristate, 3.0, 8).unwrap();
        assert_eq!(t.activate_features(&[0, 0]), vec![0, 0]);
        assert_eq!(t.activate_features(&[-5, -3, -2, 2, 3, 9]), vec![-1, -1, 0, 0, 1, 1]);
    }

    #[test]
    fn spec_validation() {
        assert!(ActivationSpec::new(ActivationKind::Rlsu, 0.0, 8).is_err());
        assert!(ActivationSpec::new(ActivationKind::Tristate, -1.0, 8).is_err());
        assert!(ActivationSpec::new(ActivationKind::Rlsu, 1.0, 0).is_err());
        assert_eq!(ActivationKind::parse("tristate"), Some(ActivationKind::Tristate));
        assert_eq!(ActivationKind::parse("relu"), None);
    }
}
