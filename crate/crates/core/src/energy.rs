//! Energy per classification.
//!
//! The first stage pays one core conversion per `N` virtual neurons. The
//! second stage pays one 32-bit addition per (cognizant neuron, class) pair
//! plus one subtraction per cognizant neuron for zero-centering. For
//! M = 4749 and 10 classes that is 20.9 nJ; dropping the centering term
//! would give 19.0 nJ. Everything is kept in integer femtojoules so reports
//! are exact.

use core::fmt;

use crate::error::{invalid, Result};
use crate::expansion::ExpansionPlan;
use crate::hw_model::{CenteringMode, N_PHYS};

/// An energy in femtojoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Femtojoules(pub u128);

impl Femtojoules {
    pub const fn from_pj(pj: u128) -> Self {
        Self(pj * 1_000)
    }

    pub const fn from_nj(nj: u128) -> Self {
        Self(nj * 1_000_000)
    }

    pub fn as_nj(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_uj(self) -> f64 {
        self.0 as f64 / 1e9
    }

    fn times(self, count: u128) -> Self {
        Self(self.0 * count)
    }
}

impl core::ops::Add for Femtojoules {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl fmt::Display for Femtojoules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fJ", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyParams {
    /// One `N`-wide parallel projection of the core.
    pub e_conversion: Femtojoules,
    /// One 32-bit accumulate in the digital second stage.
    pub e_add: Femtojoules,
    /// Reference cost of a digital multiply-accumulate.
    pub e_mac: Femtojoules,
    pub n_phys: usize,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_conversion: Femtojoules::from_nj(119),
            e_add: Femtojoules(400),
            e_mac: Femtojoules::from_pj(7),
            n_phys: N_PHYS,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if self.e_conversion.0 == 0 || self.e_add.0 == 0 || self.e_mac.0 == 0 {
            return Err(invalid("energies must be positive"));
        }
        if self.n_phys == 0 {
            return Err(invalid("n_phys must be positive"));
        }
        Ok(())
    }
}

/// Energy breakdown for one classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyReport {
    /// Raw virtual neurons evaluated, `L`.
    pub l_total: usize,
    pub conversions: usize,
    pub m_cognizant: usize,
    pub classes: usize,
    pub accumulations: u64,
    pub centering_subtractions: u64,
    pub first_stage: Femtojoules,
    pub second_stage: Femtojoules,
    pub total: Femtojoules,
    /// Core energy per analog multiply: one conversion over `N * D` products.
    pub e_per_analog_mac: Femtojoules,
    /// What the first stage would cost as digital MACs at `e_mac` each.
    pub digital_mac_equivalent: Femtojoules,
}

/// Centering subtractions per classification for `m` cognizant neurons.
pub fn centering_subtractions(mode: CenteringMode, m: usize) -> u64 {
    match mode {
        CenteringMode::None => 0,
        CenteringMode::PairwiseDifference | CenteringMode::ReferenceColumn { .. } => m as u64,
    }
}

/// Energy of one classification under `plan` with `m_cognizant` surviving
/// neurons.
pub fn estimate(
    plan: &ExpansionPlan,
    m_cognizant: usize,
    classes: usize,
    params: &EnergyParams,
    centering: CenteringMode,
) -> EnergyReport {
    estimate_raw(plan.l_total(), plan.d_phys(), m_cognizant, classes, params, centering)
}

/// As [`estimate`] for an arbitrary raw neuron count `l_total` on a core
/// with `d_phys` inputs.
pub fn estimate_raw(
    l_total: usize,
    d_phys: usize,
    m_cognizant: usize,
    classes: usize,
    params: &EnergyParams,
    centering: CenteringMode,
) -> EnergyReport {
    let n = params.n_phys.max(1);
    let conversions = l_total.div_ceil(n);
    let accumulations = (m_cognizant as u64) * (classes as u64);
    let subtractions = centering_subtractions(centering, m_cognizant);
    let first_stage = params.e_conversion.times(conversions as u128);
    let second_stage = params.e_add.times((accumulations + subtractions) as u128);
    let macs_per_conversion = (n * d_phys.max(1)) as u128;
    EnergyReport {
        l_total,
        conversions,
        m_cognizant,
        classes,
        accumulations,
        centering_subtractions: subtractions,
        first_stage,
        second_stage,
        total: first_stage + second_stage,
        e_per_analog_mac: Femtojoules(params.e_conversion.0 / macs_per_conversion),
        digital_mac_equivalent: params.e_mac.times(conversions as u128 * macs_per_conversion),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_conversion_operating_point() {
        let p = EnergyParams::default();
        let plan = ExpansionPlan::new(128, 128, 50, CenteringMode::PairwiseDifference).unwrap();
        let r = estimate(&plan, 4749, 10, &p, CenteringMode::PairwiseDifference);
        assert_eq!(r.conversions, 50);
        assert_eq!(r.first_stage, Femtojoules(5_950_000_000));
        assert_eq!(r.second_stage, Femtojoules(20_895_600));
        assert_eq!(r.total, Femtojoules(5_970_895_600));
        // 119 nJ over 128 * 128 products
        assert_eq!(r.e_per_analog_mac, Femtojoules(7263));
    }

    #[test]
    fn no_centering_no_subtractions() {
        let r = estimate_raw(128, 128, 4749, 10, &EnergyParams::default(), CenteringMode::None);
        assert_eq!(r.second_stage, Femtojoules(18_996_000));
    }

    #[test]
    fn partial_conversion_costs_a_full_one() {
        let p = EnergyParams::default();
        let a = estimate_raw(129, 128, 1, 10, &p, CenteringMode::None);
        let b = estimate_raw(256, 128, 1, 10, &p, CenteringMode::None);
        assert_eq!(a.first_stage, b.first_stage);
        assert_eq!(a.conversions, 2);
    }

    #[test]
    fn defaults_validate() {
        assert!(EnergyParams::default().validate().is_ok());
        let bad = EnergyParams { e_add: Femtojoules(0), ..EnergyParams::default() };
        assert!(bad.validate().is_err());
    }
}
