//! Adult-equivalence weights and the household DMP scale.
//!
//! Oxford and FAO-OMS weights are assigned per person and summed over the
//! household. DMP depends only on the household's adult and child counts,
//! `(adults + c * children)^s`, so it has no per-person form.

use crate::error::{Error, Result};
use crate::model::{Age, AgeEncoding, Gender};
use crate::num::Scalar;

/// Youngest age in years counted as an adult.
pub const ADULT_AGE_YEARS: f64 = 15.0;
/// First five-year class counted as an adult.
pub const ADULT_AGE_CLASS: f64 = 4.0;
/// Value written in place of a weight that cannot be computed, in sentinel mode.
pub const SENTINEL_WEIGHT: f64 = 0.99;

/// One of the per-person scale constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weight {
    /// 0.5, any non-adult.
    Child,
    /// 0.7, adult other than the chief (Oxford).
    OtherAdult,
    /// 0.8, adult woman (FAO-OMS).
    FemaleAdult,
    /// 1.0
    Full,
}

impl Weight {
    pub fn value<T: Scalar>(self) -> T {
        T::lit(match self {
            Weight::Child => 0.5,
            Weight::OtherAdult => 0.7,
            Weight::FemaleAdult => 0.8,
            Weight::Full => 1.0,
        })
    }
}

/// Unknown ages (flagged missing) count as adults.
pub fn classify_adult<T: Scalar>(age: &Age<T>, enc: AgeEncoding) -> bool {
    if age.missing {
        return true;
    }
    let threshold = match enc {
        AgeEncoding::Years => ADULT_AGE_YEARS,
        AgeEncoding::FiveYearClasses => ADULT_AGE_CLASS,
    };
    age.value >= T::lit(threshold)
}

pub fn oxford_weight<T: Scalar>(age: &Age<T>, enc: AgeEncoding, is_chief: bool) -> Weight {
    match (classify_adult(age, enc), is_chief) {
        (false, _) => Weight::Child,
        (true, true) => Weight::Full,
        (true, false) => Weight::OtherAdult,
    }
}

pub fn faofam_weight<T: Scalar>(age: &Age<T>, enc: AgeEncoding, gender: Gender) -> Weight {
    match (classify_adult(age, enc), gender) {
        (false, _) => Weight::Child,
        (true, Gender::Male) => Weight::Full,
        (true, Gender::Female) => Weight::FemaleAdult,
    }
}

pub fn dmp_scale<T: Scalar>(n_adults: usize, n_children: usize, c: T, s: T) -> Result<T> {
    if n_adults + n_children == 0 {
        return Err(Error::EmptyHousehold);
    }
    Ok((T::from_count(n_adults) + c * T::from_count(n_children)).powf(s))
}

/// Weighted household income: the dot product of member weights and incomes.
pub fn household_equivalent_income<T: Scalar>(weights: &[Weight], incomes: &[T]) -> Result<T> {
    if weights.is_empty() || weights.len() != incomes.len() {
        return Err(Error::WeightIncomeMismatch {
            weights: weights.len(),
            incomes: incomes.len(),
        });
    }
    Ok(weights
        .iter()
        .zip(incomes)
        .fold(T::zero(), |acc, (w, &x)| acc + w.value::<T>() * x))
}
