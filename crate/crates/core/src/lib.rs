//! Preparation of household-survey microdata.
//!
//! Person-level column files (or one delimited table) are turned into
//! household-level variables: a composite household identifier, recoded
//! incomes, adult-equivalence scales (Oxford, FAO-OMS, DMP), household size,
//! total and scaled income, and area / chief-gender labels.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64` or `f32`.

pub mod aggregate;
pub mod error;
pub mod identity;
pub mod ingest;
pub mod model;
pub mod num;
pub mod pipeline;
pub mod recode;
pub mod scales;
pub mod synth;

pub use error::{Error, Result};
pub use identity::{make_household_key, parse_household_key, PrefixScheme};
pub use model::{
    AgeEncoding, Gender, GenderEncoding, HouseholdKey, MissingAgePolicy, ParseOptions, PersonRecord,
    ScaleKind, Warning, WarningKind,
};
pub use num::{format_number, Scalar};
pub use pipeline::{run_pipeline, ConfigFile, Overrides, RunReport};

pub type Aggregate = model::HouseholdAggregate<f64>;
pub type Member = model::Member<f64>;
pub type Config = pipeline::PipelineConfig<f64>;
pub type ReduceConfig = model::ReduceConfig<f64>;
pub type IncomeMap = recode::IncomeRangeMap<f64>;

pub type AggregateF32 = model::HouseholdAggregate<f32>;
pub type MemberF32 = model::Member<f32>;
pub type ConfigF32 = pipeline::PipelineConfig<f32>;
pub type ReduceConfigF32 = model::ReduceConfig<f32>;
pub type IncomeMapF32 = recode::IncomeRangeMap<f32>;
