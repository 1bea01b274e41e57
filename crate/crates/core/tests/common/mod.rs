#![allow(dead_code)]

use std::fs;
use std::path::Path;

use hdbprep::identity::identify_stream;
use hdbprep::model::{HouseholdKey, Member, ReduceConfig};
use hdbprep::recode::{elim1_default_map, recode_stream};
use hdbprep::synth::{SynthDb, SynthIncome};
use hdbprep::PrefixScheme;

/// Keyed member rows for a generated database, the way `run` builds them.
pub fn rows(db: &SynthDb, cfg: &ReduceConfig<f64>) -> Vec<(HouseholdKey, Member<f64>)> {
    let records = db.records().unwrap();
    let keys = identify_stream(&records, &PrefixScheme::default()).unwrap();
    let tokens: Vec<&str> = records.iter().filter_map(|r| r.income_raw()).collect();
    let incomes: Option<Vec<f64>> = match db.params.income {
        SynthIncome::None => None,
        SynthIncome::Letters => Some(recode_stream(&tokens, &elim1_default_map(false)).unwrap()),
        SynthIncome::Numeric => Some(tokens.iter().map(|t| t.parse().unwrap()).collect()),
    };
    keys.into_iter()
        .zip(&records)
        .enumerate()
        .map(|(i, (k, r))| {
            let income = incomes.as_ref().map(|x| x[i]);
            (k, Member::from_record(i + 1, r, &cfg.parse, income))
        })
        .collect()
}

pub fn reduce_config(db: &SynthDb) -> ReduceConfig<f64> {
    ReduceConfig {
        income_enabled: db.params.income != SynthIncome::None,
        dmp_c: db.params.dmp_c,
        dmp_s: db.params.dmp_s,
        scaled_by: db.params.scaled_by,
        ..Default::default()
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || ((a - b) / a.abs().max(b.abs())).abs() <= tol
}

/// Sorted (name, bytes) of every file directly inside `dir`.
pub fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}
