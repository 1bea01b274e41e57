//! Domain types shared by every stage.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{parse_age, parse_gender};
use crate::num::Scalar;

/// How the age column is coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgeEncoding {
    /// Real age in years, fractions allowed for infants.
    Years,
    /// Index of a five-year age class, starting at 1.
    FiveYearClasses,
}

impl AgeEncoding {
    /// Numeric code used by the original tooling: 1 = years, 2 = classes.
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(AgeEncoding::Years),
            2 => Ok(AgeEncoding::FiveYearClasses),
            _ => Err(Error::BadEncoding {
                what: "age encoding",
                code: code.to_string(),
            }),
        }
    }

    pub fn code(self) -> i64 {
        match self {
            AgeEncoding::Years => 1,
            AgeEncoding::FiveYearClasses => 2,
        }
    }
}

impl FromStr for AgeEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "years" => Ok(AgeEncoding::Years),
            "2" | "five-year-classes" | "classes" => Ok(AgeEncoding::FiveYearClasses),
            other => Err(Error::BadEncoding {
                what: "age encoding",
                code: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for AgeEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgeEncoding::Years => "years",
            AgeEncoding::FiveYearClasses => "five-year-classes",
        })
    }
}

/// How the gender column is coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenderEncoding {
    /// 0 = male, 1 = female.
    Male0Female1,
    /// 1 = male, 2 = female.
    Male1Female2,
}

impl GenderEncoding {
    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            1 => Ok(GenderEncoding::Male0Female1),
            2 => Ok(GenderEncoding::Male1Female2),
            _ => Err(Error::BadEncoding {
                what: "gender encoding",
                code: code.to_string(),
            }),
        }
    }

    pub fn code(self) -> i64 {
        match self {
            GenderEncoding::Male0Female1 => 1,
            GenderEncoding::Male1Female2 => 2,
        }
    }

    /// Raw tokens for (male, female).
    pub fn tokens(self) -> (&'static str, &'static str) {
        match self {
            GenderEncoding::Male0Female1 => ("0", "1"),
            GenderEncoding::Male1Female2 => ("1", "2"),
        }
    }
}

impl FromStr for GenderEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "male0-female1" => Ok(GenderEncoding::Male0Female1),
            "2" | "male1-female2" => Ok(GenderEncoding::Male1Female2),
            other => Err(Error::BadEncoding {
                what: "gender encoding",
                code: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for GenderEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenderEncoding::Male0Female1 => "male0-female1",
            GenderEncoding::Male1Female2 => "male1-female2",
        })
    }
}

/// Treatment of the unknown-age code 99 under [`AgeEncoding::Years`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingAgePolicy {
    /// 99 is an ordinary age (and therefore an adult).
    #[default]
    PaperCompat,
    /// 99 is flagged missing; the person still counts as an adult and a warning is recorded.
    Strict,
}

impl FromStr for MissingAgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "paper-compat" => Ok(MissingAgePolicy::PaperCompat),
            "strict" => Ok(MissingAgePolicy::Strict),
            other => Err(Error::Config(format!("unknown missing-age policy {other:?}"))),
        }
    }
}

/// Code reserved for an unknown age in years.
pub const UNKNOWN_AGE_CODE: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Age<T> {
    pub value: T,
    pub missing: bool,
}

impl<T: Scalar> Age<T> {
    pub fn new(value: T) -> Self {
        Age {
            value,
            missing: false,
        }
    }

    /// Flags the unknown-age code when the policy asks for it.
    pub fn with_policy(mut self, enc: AgeEncoding, policy: MissingAgePolicy) -> Self {
        if enc == AgeEncoding::Years
            && policy == MissingAgePolicy::Strict
            && self.value == T::lit(UNKNOWN_AGE_CODE)
        {
            self.missing = true;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gender {
    Male,
    Female,
}

/// One respondent as read from the export, all fields still raw tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonRecord {
    region: String,
    milieu: String,
    cluster: String,
    household: String,
    age_raw: String,
    gender_raw: String,
    poswrchief_raw: String,
    income_raw: Option<String>,
}

fn checked_token(field: &'static str, raw: &str, strata: bool) -> Result<String> {
    let t = raw.trim();
    if t.is_empty() {
        return Err(Error::EmptyToken { field });
    }
    if strata && t.contains(['\n', '\r']) {
        return Err(Error::LineBreakInToken {
            field,
            raw: t.to_string(),
        });
    }
    Ok(t.to_string())
}

impl PersonRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        region: &str,
        milieu: &str,
        cluster: &str,
        household: &str,
        age_raw: &str,
        gender_raw: &str,
        poswrchief_raw: &str,
        income_raw: Option<&str>,
    ) -> Result<Self> {
        Ok(PersonRecord {
            region: checked_token("region", region, true)?,
            milieu: checked_token("milieu", milieu, true)?,
            cluster: checked_token("cluster", cluster, true)?,
            household: checked_token("household", household, true)?,
            age_raw: checked_token("age", age_raw, false)?,
            gender_raw: checked_token("gender", gender_raw, false)?,
            poswrchief_raw: checked_token("poswrchief", poswrchief_raw, false)?,
            income_raw: income_raw
                .map(|t| checked_token("income", t, false))
                .transpose()?,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }
    pub fn milieu(&self) -> &str {
        &self.milieu
    }
    pub fn cluster(&self) -> &str {
        &self.cluster
    }
    pub fn household(&self) -> &str {
        &self.household
    }
    pub fn age_raw(&self) -> &str {
        &self.age_raw
    }
    pub fn gender_raw(&self) -> &str {
        &self.gender_raw
    }
    pub fn poswrchief_raw(&self) -> &str {
        &self.poswrchief_raw
    }
    pub fn income_raw(&self) -> Option<&str> {
        self.income_raw.as_deref()
    }

    /// Only the token "1" marks the chief; every other value is a non-chief.
    pub fn is_chief(&self) -> bool {
        self.poswrchief_raw == "1"
    }
}

/// Canonical household identifier. Built by [`crate::identity::make_household_key`].
#[derive(Debug, Clone)]
pub struct HouseholdKey {
    canonical: String,
    components: [String; 4],
}

impl HouseholdKey {
    pub(crate) fn from_parts(canonical: String, components: [String; 4]) -> Self {
        HouseholdKey {
            canonical,
            components,
        }
    }

    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// (region, milieu, cluster, household)
    pub fn components(&self) -> (&str, &str, &str, &str) {
        let [r, m, c, h] = &self.components;
        (r, m, c, h)
    }
}

impl PartialEq for HouseholdKey {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for HouseholdKey {}

impl Hash for HouseholdKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for HouseholdKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HouseholdKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl fmt::Display for HouseholdKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScaleKind {
    Oxford,
    FaoFam,
    Dmp,
}

impl FromStr for ScaleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oxford" => Ok(ScaleKind::Oxford),
            "faofam" | "fao-fam" | "fao-oms" => Ok(ScaleKind::FaoFam),
            "dmp" => Ok(ScaleKind::Dmp),
            other => Err(Error::Config(format!("unknown scale {other:?}"))),
        }
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleKind::Oxford => "oxford",
            ScaleKind::FaoFam => "faofam",
            ScaleKind::Dmp => "dmp",
        })
    }
}

/// An equivalence scale together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleSpec<T> {
    Oxford,
    FaoFam,
    Dmp { c: T, s: T },
}

impl<T: Scalar> ScaleSpec<T> {
    pub fn kind(&self) -> ScaleKind {
        match self {
            ScaleSpec::Oxford => ScaleKind::Oxford,
            ScaleSpec::FaoFam => ScaleKind::FaoFam,
            ScaleSpec::Dmp { .. } => ScaleKind::Dmp,
        }
    }
}

/// Checks the parameter domain of a scale: DMP needs `c` and `s` in [0, 1].
pub fn validate_weight_domain<T: Scalar>(spec: &ScaleSpec<T>) -> Result<()> {
    if let ScaleSpec::Dmp { c, s } = *spec {
        for (name, v) in [("c", c), ("s", s)] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::DmpParamOutOfRange {
                    name,
                    value: v.as_f64(),
                });
            }
        }
    }
    Ok(())
}

/// Parsing options applied when turning a [`PersonRecord`] into a [`Member`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub age_encoding: AgeEncoding,
    pub gender_encoding: GenderEncoding,
    pub missing_age: MissingAgePolicy,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            age_encoding: AgeEncoding::Years,
            gender_encoding: GenderEncoding::Male0Female1,
            missing_age: MissingAgePolicy::PaperCompat,
        }
    }
}

/// A person row ready for household reduction.
///
/// Age and gender are parsed eagerly but failures are kept as the raw token, so
/// a reducer that does not look at a field never trips over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Member<T> {
    /// 1-based person number (line in the column files).
    pub line: usize,
    pub age: std::result::Result<Age<T>, String>,
    pub gender: std::result::Result<Gender, String>,
    pub gender_raw: String,
    pub is_chief: bool,
    pub area: String,
    pub income: Option<T>,
}

impl<T: Scalar> Member<T> {
    pub fn from_record(
        line: usize,
        record: &PersonRecord,
        opts: &ParseOptions,
        income: Option<T>,
    ) -> Self {
        let age = parse_age::<T>(record.age_raw(), opts.age_encoding)
            .map(|a| a.with_policy(opts.age_encoding, opts.missing_age))
            .map_err(|_| record.age_raw().to_string());
        let gender = parse_gender(record.gender_raw(), opts.gender_encoding)
            .map_err(|_| record.gender_raw().to_string());
        Member {
            line,
            age,
            gender,
            gender_raw: record.gender_raw().to_string(),
            is_chief: record.is_chief(),
            area: record.region().to_string(),
            income,
        }
    }
}

/// Settings shared by the household reducers and the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceConfig<T> {
    pub parse: ParseOptions,
    /// Emit 0.99 for unparseable members instead of failing.
    pub paper_sentinel: bool,
    pub dmp_c: T,
    pub dmp_s: T,
    pub income_enabled: bool,
    /// Scale used for the scaled income.
    pub scaled_by: ScaleKind,
}

impl<T: Scalar> Default for ReduceConfig<T> {
    fn default() -> Self {
        ReduceConfig {
            parse: ParseOptions::default(),
            paper_sentinel: false,
            dmp_c: T::lit(0.5),
            dmp_s: T::lit(0.7),
            income_enabled: false,
            scaled_by: ScaleKind::Oxford,
        }
    }
}

/// Label used when a household has no chief.
pub const NO_CHIEF_LABEL: &str = "XXX";

/// Per-household outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdAggregate<T> {
    pub key: HouseholdKey,
    pub size: usize,
    pub n_adults: usize,
    pub n_children: usize,
    pub scale_oxford: T,
    pub scale_faofam: T,
    pub scale_dmp: T,
    /// `None` when the run has no income stage.
    pub total_income: Option<T>,
    pub scaled_income: Option<T>,
    pub label_area: String,
    pub label_chief_gender: String,
}

impl<T: Scalar> HouseholdAggregate<T> {
    pub fn scale(&self, kind: ScaleKind) -> T {
        match kind {
            ScaleKind::Oxford => self.scale_oxford,
            ScaleKind::FaoFam => self.scale_faofam,
            ScaleKind::Dmp => self.scale_dmp,
        }
    }
}

/// Non-fatal data anomaly, located by person line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub key: String,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    HeterogeneousArea { first: String, found: String },
    MultipleChiefs { count: usize },
    MissingAge,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: household {}: ", self.line, self.key)?;
        match &self.kind {
            WarningKind::HeterogeneousArea { first, found } => {
                write!(f, "area {found:?} differs from first member's {first:?}")
            }
            WarningKind::MultipleChiefs { count } => {
                write!(f, "{count} chiefs, last one kept")
            }
            WarningKind::MissingAge => write!(f, "unknown age code 99, counted as adult"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{make_household_key, PrefixScheme};
    use proptest::prelude::*;

    #[test]
    fn dmp_domain() {
        assert!(validate_weight_domain(&ScaleSpec::Dmp { c: 0.5, s: 0.7 }).is_ok());
        assert!(matches!(
            validate_weight_domain(&ScaleSpec::Dmp { c: 1.2, s: 0.5 }),
            Err(Error::DmpParamOutOfRange { name: "c", .. })
        ));
        assert!(matches!(
            validate_weight_domain(&ScaleSpec::Dmp { c: 0.5, s: -0.1 }),
            Err(Error::DmpParamOutOfRange { name: "s", .. })
        ));
        assert!(validate_weight_domain(&ScaleSpec::Dmp { c: f64::NAN, s: 0.5 }).is_err());
        assert!(validate_weight_domain::<f64>(&ScaleSpec::Oxford).is_ok());
        assert!(validate_weight_domain::<f32>(&ScaleSpec::FaoFam).is_ok());
    }

    #[test]
    fn encoding_codes() {
        assert_eq!(AgeEncoding::from_code(1).unwrap(), AgeEncoding::Years);
        assert_eq!(AgeEncoding::from_code(2).unwrap(), AgeEncoding::FiveYearClasses);
        assert!(AgeEncoding::from_code(3).is_err());
        assert!(GenderEncoding::from_code(0).is_err());
        assert_eq!("male1-female2".parse::<GenderEncoding>().unwrap().code(), 2);
        assert!("3".parse::<AgeEncoding>().is_err());
    }

    #[test]
    fn empty_strata_rejected() {
        let e = PersonRecord::new(" ", "1", "1", "1", "30", "0", "1", None).unwrap_err();
        assert!(matches!(e, Error::EmptyToken { field: "region" }));
        assert!(PersonRecord::new("1", "1", "", "1", "30", "0", "1", None).is_err());
        assert!(PersonRecord::new("1", "1", "1", "1", "30", "0", "1", Some("")).is_err());
        let r = PersonRecord::new(" 01 ", "1", "1", "1", "30", "0", "1", None).unwrap();
        assert_eq!(r.region(), "01");
        assert!(r.is_chief());
    }

    #[test]
    fn age_99_policy() {
        let a = Age::new(99.0_f64);
        assert!(!a.with_policy(AgeEncoding::Years, MissingAgePolicy::PaperCompat).missing);
        assert!(a.with_policy(AgeEncoding::Years, MissingAgePolicy::Strict).missing);
        assert!(!a.with_policy(AgeEncoding::FiveYearClasses, MissingAgePolicy::Strict).missing);
    }

    proptest! {
        #[test]
        fn key_equality_matches_tuple_equality(
            a in prop::array::uniform4("[0-9a-z]{1,3}"),
            b in prop::array::uniform4("[0-9a-z]{1,3}"),
        ) {
            let scheme = PrefixScheme::default();
            let ka = make_household_key(&a[0], &a[1], &a[2], &a[3], &scheme).unwrap();
            let kb = make_household_key(&b[0], &b[1], &b[2], &b[3], &scheme).unwrap();
            prop_assert_eq!(ka == kb, a == b);
            prop_assert_eq!(ka.components(), (a[0].as_str(), a[1].as_str(), a[2].as_str(), a[3].as_str()));
            prop_assert!(ka == ka.clone());
        }
    }
}
