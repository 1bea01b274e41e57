//! Canonical household identifiers built from the four strata tokens.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{HouseholdKey, PersonRecord};

/// Prefix letters for region, milieu, cluster and household.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixScheme {
    letters: [char; 4],
}

impl PrefixScheme {
    pub fn new(region: char, milieu: char, cluster: char, household: char) -> Result<Self> {
        let letters = [region, milieu, cluster, household];
        let distinct = (0..4).all(|i| (i + 1..4).all(|j| letters[i] != letters[j]));
        if !distinct || !letters.iter().all(char::is_ascii_uppercase) {
            return Err(Error::BadPrefixScheme {
                scheme: letters.iter().collect(),
            });
        }
        Ok(PrefixScheme { letters })
    }

    /// The letters emitted by the original identification routine ("D" for the first level).
    pub fn legacy() -> Self {
        PrefixScheme {
            letters: ['D', 'M', 'C', 'H'],
        }
    }

    pub fn letters(&self) -> [char; 4] {
        self.letters
    }

    fn collision(&self, token: &str) -> Option<char> {
        token.chars().find(|c| self.letters.contains(c))
    }
}

impl Default for PrefixScheme {
    /// R/M/C/H.
    fn default() -> Self {
        PrefixScheme {
            letters: ['R', 'M', 'C', 'H'],
        }
    }
}

impl FromStr for PrefixScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.trim().chars().collect();
        match chars[..] {
            [r, m, c, h] => PrefixScheme::new(r, m, c, h),
            _ => Err(Error::BadPrefixScheme {
                scheme: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for PrefixScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.letters.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

pub fn make_household_key(
    region: &str,
    milieu: &str,
    cluster: &str,
    household: &str,
    scheme: &PrefixScheme,
) -> Result<HouseholdKey> {
    let parts = [region, milieu, cluster, household];
    let mut canonical = String::with_capacity(parts.iter().map(|p| p.len() + 1).sum());
    for (letter, token) in scheme.letters.iter().zip(parts) {
        if token.is_empty() {
            return Err(Error::EmptyToken { field: "strata" });
        }
        if let Some(letter) = scheme.collision(token) {
            return Err(Error::PrefixCollision {
                token: token.to_string(),
                letter,
            });
        }
        canonical.push(*letter);
        canonical.push_str(token);
    }
    Ok(HouseholdKey::from_parts(
        canonical,
        parts.map(str::to_string),
    ))
}

/// Splits a canonical key back into (region, milieu, cluster, household).
pub fn parse_household_key(
    canonical: &str,
    scheme: &PrefixScheme,
) -> Result<(String, String, String, String)> {
    let malformed = || Error::MalformedKey {
        key: canonical.to_string(),
    };
    let [r, m, c, h] = scheme.letters;
    let rest = canonical.strip_prefix(r).ok_or_else(malformed)?;
    let (region, rest) = rest.split_once(m).ok_or_else(malformed)?;
    let (milieu, rest) = rest.split_once(c).ok_or_else(malformed)?;
    let (cluster, household) = rest.split_once(h).ok_or_else(malformed)?;
    let parts = [region, milieu, cluster, household];
    if parts
        .iter()
        .any(|p| p.is_empty() || scheme.collision(p).is_some())
    {
        return Err(malformed());
    }
    Ok((
        region.to_string(),
        milieu.to_string(),
        cluster.to_string(),
        household.to_string(),
    ))
}

/// Parses a canonical key into a [`HouseholdKey`].
pub fn household_key_from_canonical(canonical: &str, scheme: &PrefixScheme) -> Result<HouseholdKey> {
    let (r, m, c, h) = parse_household_key(canonical, scheme)?;
    make_household_key(&r, &m, &c, &h, scheme)
}

pub fn record_key(record: &PersonRecord, scheme: &PrefixScheme) -> Result<HouseholdKey> {
    make_household_key(
        record.region(),
        record.milieu(),
        record.cluster(),
        record.household(),
        scheme,
    )
}

/// One key per person, in input order. Errors carry the 1-based person line.
pub fn identify_stream(records: &[PersonRecord], scheme: &PrefixScheme) -> Result<Vec<HouseholdKey>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| record_key(r, scheme).map_err(|e| e.at_line(i + 1)))
        .collect()
}
