//! Exact rational and factored-integer arithmetic.

mod factored;
mod primes;
mod rational;

pub use factored::FactoredInt;
pub use primes::{
    exact_multiplicity, factorize, integer_sqrt, is_k_free, is_prime, largest_prime_factor,
    least_prime_factor, next_prime, primes_in, LeastPrime, SpfTable,
};
pub use rational::ExactRational;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Sums many unit fractions `1/n` over one fixed modulus.
///
/// Every `n` must divide the modulus; each term contributes the integer
/// `modulus / n` to a single accumulator and the fraction is reduced once, at
/// the end.
#[derive(Clone, Debug)]
pub struct CommonDenominatorSum {
    modulus: BigUint,
    numer: BigInt,
}

impl CommonDenominatorSum {
    pub fn new(modulus: BigUint) -> Self {
        assert!(!modulus.is_zero(), "zero modulus");
        CommonDenominatorSum {
            modulus,
            numer: BigInt::zero(),
        }
    }

    /// Starts from an existing rational whose denominator divides the modulus.
    pub fn with_initial(modulus: BigUint, start: &ExactRational) -> Result<Self> {
        let d = start.denom_unsigned();
        let (scale, rem) = modulus.div_rem(&d);
        if !rem.is_zero() {
            return Err(Error::Divisibility {
                n: format!("denominator {d}"),
            });
        }
        Ok(CommonDenominatorSum {
            numer: start.numer() * BigInt::from_biguint(Sign::Plus, scale),
            modulus,
        })
    }

    /// The integer `modulus / n`, failing when `n` does not divide it.
    pub fn cofactor(&self, n: u64) -> Result<BigUint> {
        if n == 0 {
            return Err(Error::Divisibility { n: "0".into() });
        }
        let (q, r) = self.modulus.div_rem(&BigUint::from(n));
        if !r.is_zero() {
            return Err(Error::Divisibility { n: n.to_string() });
        }
        Ok(q)
    }

    pub fn add_unit(&mut self, n: u64) -> Result<()> {
        let c = self.cofactor(n)?;
        self.numer += BigInt::from_biguint(Sign::Plus, c);
        Ok(())
    }

    pub fn sub_unit(&mut self, n: u64) -> Result<()> {
        let c = self.cofactor(n)?;
        self.numer -= BigInt::from_biguint(Sign::Plus, c);
        Ok(())
    }

    pub fn add_units<I: IntoIterator<Item = u64>>(&mut self, ns: I) -> Result<()> {
        for n in ns {
            self.add_unit(n)?;
        }
        Ok(())
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// Unreduced numerator over the modulus.
    pub fn numerator(&self) -> &BigInt {
        &self.numer
    }

    pub fn value(&self) -> ExactRational {
        ExactRational::new(self.numer.clone(), BigInt::from(self.modulus.clone()))
            .expect("modulus is nonzero")
    }
}
