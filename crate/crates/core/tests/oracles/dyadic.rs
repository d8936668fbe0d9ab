//! Exact rational arithmetic over f64 values. Every finite f64 is a dyadic
//! rational, so sums of exact products can be compared without rounding.

use num_bigint::BigInt;
use rfelm_core::hw_model::RfeCore;

/// `mantissa * 2^exponent`, normalized so the mantissa is odd (or zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self { mantissa: BigInt::from(0), exponent: 0 }
    }

    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite());
        if v == 0.0 {
            return Self::zero();
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if biased == 0 { (frac, -1074) } else { (frac | (1 << 52), biased - 1075) };
        Self { mantissa: BigInt::from(m) * sign, exponent: e }.normalized()
    }

    pub fn from_u32(v: u32) -> Self {
        Self { mantissa: BigInt::from(v), exponent: 0 }.normalized()
    }

    pub fn normalized(mut self) -> Self {
        if self.mantissa == BigInt::from(0) {
            return Self::zero();
        }
        while (&self.mantissa & BigInt::from(1)) == BigInt::from(0) {
            self.mantissa >>= 1;
            self.exponent += 1;
        }
        self
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self { mantissa: &self.mantissa * &o.mantissa, exponent: self.exponent + o.exponent }.normalized()
    }

    pub fn add(&self, o: &Self) -> Self {
        let e = self.exponent.min(o.exponent);
        let a = &self.mantissa << (self.exponent - e) as usize;
        let b = &o.mantissa << (o.exponent - e) as usize;
        Self { mantissa: a + b, exponent: e }.normalized()
    }
}

/// `g_j * (sum_i w_ij x_i + b_j)` exactly.
pub fn exact_project(core: &RfeCore, x: &[u32]) -> Vec<Dyadic> {
    (0..core.n_phys())
        .map(|j| {
            let mut s = Dyadic::from_f64(core.bias()[j]);
            for (i, &xi) in x.iter().enumerate() {
                s = s.add(&Dyadic::from_f64(core.weight(i, j)).mul(&Dyadic::from_u32(xi)));
            }
            Dyadic::from_f64(core.cco_gains()[j]).mul(&s)
        })
        .collect()
}
