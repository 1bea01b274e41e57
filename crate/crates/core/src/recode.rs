//! Categorical income codes mapped to monetary amounts.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Letter code → amount, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeRangeMap<T> {
    entries: IndexMap<String, T>,
    /// Amount for codes not in the map. `None` makes unknown codes an error.
    pub default_amount: Option<T>,
}

impl<T: Scalar> IncomeRangeMap<T> {
    pub fn new<I, S>(entries: I, default_amount: Option<T>) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
    {
        let mut map = IndexMap::new();
        for (letter, amount) in entries {
            let letter: String = letter.into();
            let letter = letter.trim().to_string();
            if letter.is_empty() || !(amount >= T::zero()) || map.contains_key(&letter) {
                return Err(Error::BadIncomeMap {
                    letter,
                    amount: amount.as_f64(),
                });
            }
            map.insert(letter, amount);
        }
        if let Some(d) = default_amount {
            if !(d >= T::zero()) {
                return Err(Error::BadIncomeMap {
                    letter: "<default>".into(),
                    amount: d.as_f64(),
                });
            }
        }
        Ok(IncomeRangeMap {
            entries: map,
            default_amount,
        })
    }

    pub fn get(&self, letter: &str) -> Option<T> {
        self.entries.get(letter).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The ELIM1 (Mali) monthly-income classes, each mapped to the midpoint of its range.
///
/// `paper_literal` reproduces the original recode routine exactly: class F is
/// computed from a mistyped bound (115000), the ninth class is spelled "U", and
/// unknown codes become 0. Otherwise F is the 200000–300000 midpoint, "I" is an
/// alias of "U", and unknown codes are errors.
pub fn elim1_default_map<T: Scalar>(paper_literal: bool) -> IncomeRangeMap<T> {
    let f = if paper_literal {
        (200000.0 + 30000.0) / 2.0
    } else {
        (200000.0 + 300000.0) / 2.0
    };
    let mut entries: Vec<(&str, f64)> = vec![
        ("A", 29000.0 / 2.0),
        ("B", (29000.0 + 50000.0) / 2.0),
        ("C", (50000.0 + 100000.0) / 2.0),
        ("D", (100000.0 + 150000.0) / 2.0),
        ("E", (150000.0 + 200000.0) / 2.0),
        ("F", f),
        ("G", (300000.0 + 500000.0) / 2.0),
        ("H", (500000.0 + 750000.0) / 2.0),
    ];
    if !paper_literal {
        entries.push(("I", (750000.0 + 1000000.0) / 2.0));
    }
    entries.extend([
        ("U", (750000.0 + 1000000.0) / 2.0),
        ("J", (1000000.0 + 1500000.0) / 2.0),
        ("K", (1500000.0 + 2500000.0) / 2.0),
        ("L", (2500000.0 + 3500000.0) / 2.0),
    ]);
    IncomeRangeMap::new(
        entries.into_iter().map(|(k, v)| (k, T::lit(v))),
        paper_literal.then(T::zero),
    )
    .expect("preset map is valid")
}

pub fn income_from_letter<T: Scalar>(letter: &str, map: &IncomeRangeMap<T>) -> Result<T> {
    let letter = letter.trim();
    map.get(letter)
        .or(map.default_amount)
        .ok_or_else(|| Error::UnknownIncomeCode {
            token: letter.to_string(),
        })
}

/// Recodes a column of letters. The first unknown code aborts with its 1-based line.
pub fn recode_stream<T: Scalar, S: AsRef<str>>(tokens: &[S], map: &IncomeRangeMap<T>) -> Result<Vec<T>> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| income_from_letter(t.as_ref(), map).map_err(|e| e.at_line(i + 1)))
        .collect()
}
