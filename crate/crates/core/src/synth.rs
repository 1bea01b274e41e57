//! Synthetic person-level databases with known per-household answers, and an
//! order-insensitive group-by used to cross-check the streaming aggregation.
//!
//! Neither the generator's ground truth nor [`oracle_aggregate`] goes through
//! the `aggregate` module. Ground truth is computed while households are built,
//! from the generator's own weight table.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::identity::{make_household_key, PrefixScheme};
use crate::ingest::Variable;
use crate::model::{
    AgeEncoding, GenderEncoding, HouseholdAggregate, HouseholdKey, Member, PersonRecord,
    ReduceConfig, ScaleKind, NO_CHIEF_LABEL,
};
use crate::num::Scalar;
use crate::recode::elim1_default_map;
use crate::scales::{classify_adult, faofam_weight, oxford_weight, SENTINEL_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthIncome {
    None,
    /// ELIM1 income-class letters.
    Letters,
    /// Integer amounts.
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub households: usize,
    pub n_regions: usize,
    pub max_milieux: usize,
    pub max_clusters: usize,
    pub max_households_per_cluster: usize,
    pub max_household_size: usize,
    pub age_encoding: AgeEncoding,
    pub gender_encoding: GenderEncoding,
    pub income: SynthIncome,
    /// Restart household numbering at 1 in every cluster.
    pub renumber_households: bool,
    /// Inject households without a chief and with two chiefs.
    pub anomalies: bool,
    pub dmp_c: f64,
    pub dmp_s: f64,
    pub scaled_by: ScaleKind,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            households: 50,
            n_regions: 8,
            max_milieux: 2,
            max_clusters: 5,
            max_households_per_cluster: 12,
            max_household_size: 9,
            age_encoding: AgeEncoding::Years,
            gender_encoding: GenderEncoding::Male0Female1,
            income: SynthIncome::Letters,
            renumber_households: false,
            anomalies: false,
            dmp_c: 0.5,
            dmp_s: 0.7,
            scaled_by: ScaleKind::Oxford,
            seed: 1,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let maxima = [
            self.n_regions,
            self.max_milieux,
            self.max_clusters,
            self.max_households_per_cluster,
            self.max_household_size,
        ];
        if maxima.contains(&0) {
            return Err(Error::Config("synthetic maxima must all be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dmp_c) || !(0.0..=1.0).contains(&self.dmp_s) {
            return Err(Error::Config("DMP parameters must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One generated respondent, as raw tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPerson {
    pub region: String,
    pub milieu: String,
    pub cluster: String,
    pub household: String,
    pub age: String,
    pub gender: String,
    pub poswrchief: String,
    pub income: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDb {
    pub params: SynthParams,
    pub persons: Vec<SynthPerson>,
    /// Expected aggregate of every household, in file order.
    pub truth: Vec<HouseholdAggregate<f64>>,
}

struct Person {
    age: f64,
    age_token: String,
    male: bool,
    chief: bool,
    poswrchief: String,
    income: Option<(String, f64)>,
}

fn draw_age(rng: &mut ChaCha8Rng, enc: AgeEncoding, adult: bool) -> (f64, String) {
    match enc {
        AgeEncoding::Years => {
            if !adult && rng.gen_bool(0.02) {
                return (99.0, "99".into());
            }
            let lo = if adult { 15 } else { 0 };
            let a = rng.gen_range(lo..=90);
            if a == 0 && rng.gen_bool(0.5) {
                let f = [0.25, 0.5, 0.75][rng.gen_range(0..3)];
                return (f, f.to_string());
            }
            (f64::from(a), a.to_string())
        }
        AgeEncoding::FiveYearClasses => {
            let lo = if adult { 4 } else { 1 };
            let c = rng.gen_range(lo..=18);
            (f64::from(c), c.to_string())
        }
    }
}

/// Ground-truth weight table, kept apart from the `scales` module on purpose.
fn truth_weights(p: &Person, enc: AgeEncoding) -> (f64, f64, bool) {
    let adult = match enc {
        AgeEncoding::Years => p.age >= 15.0,
        AgeEncoding::FiveYearClasses => p.age >= 4.0,
    };
    let oxford = match (adult, p.chief) {
        (false, _) => 0.5,
        (true, true) => 1.0,
        (true, false) => 0.7,
    };
    let fao = match (adult, p.male) {
        (false, _) => 0.5,
        (true, true) => 1.0,
        (true, false) => 0.8,
    };
    (oxford, fao, adult)
}

pub fn generate(params: &SynthParams) -> Result<SynthDb> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let letters: Vec<(String, f64)> = elim1_default_map::<f64>(false)
        .iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let (male_tok, female_tok) = params.gender_encoding.tokens();
    let scheme = PrefixScheme::default();

    let mut persons = Vec::new();
    let mut truth = Vec::new();
    let mut region_idx = 0usize;
    let mut cluster_no = 0usize;
    let mut household_no = 0usize;

    'outer: loop {
        let region = (region_idx % params.n_regions + 1).to_string();
        region_idx += 1;
        for milieu in 1..=rng.gen_range(1..=params.max_milieux) {
            for _ in 0..rng.gen_range(1..=params.max_clusters) {
                cluster_no += 1;
                if params.renumber_households {
                    household_no = 0;
                }
                for _ in 0..rng.gen_range(1..=params.max_households_per_cluster) {
                    if truth.len() == params.households {
                        break 'outer;
                    }
                    household_no += 1;
                    let strata = [
                        region.clone(),
                        milieu.to_string(),
                        format!("{cluster_no:03}"),
                        household_no.to_string(),
                    ];
                    let index = truth.len();
                    let (members, agg) =
                        build_household(&mut rng, params, &letters, index, &strata, &scheme)?;
                    truth.push(agg);
                    persons.extend(members.into_iter().map(|p| SynthPerson {
                        region: strata[0].clone(),
                        milieu: strata[1].clone(),
                        cluster: strata[2].clone(),
                        household: strata[3].clone(),
                        age: p.age_token,
                        gender: if p.male { male_tok } else { female_tok }.to_string(),
                        poswrchief: p.poswrchief,
                        income: p.income.map(|(t, _)| t),
                    }));
                }
            }
        }
    }

    Ok(SynthDb {
        params: params.clone(),
        persons,
        truth,
    })
}

fn build_household(
    rng: &mut ChaCha8Rng,
    params: &SynthParams,
    letters: &[(String, f64)],
    index: usize,
    strata: &[String; 4],
    scheme: &PrefixScheme,
) -> Result<(Vec<Person>, HouseholdAggregate<f64>)> {
    let mut size = rng.gen_range(1..=params.max_household_size);
    // anomaly slots: household 1 has no chief, household 2 has two
    let (no_chief, two_chiefs) = match (params.anomalies, index) {
        (false, _) => (false, false),
        (true, 1) => (true, false),
        (true, 2) => (false, true),
        _ => {
            let r: f64 = rng.gen();
            (r < 0.02, (0.02..0.04).contains(&r))
        }
    };
    if two_chiefs {
        size = size.max(2);
    }
    let chief_pos = rng.gen_range(0..size);
    let mut second_chief = None;
    if two_chiefs {
        let mut other = rng.gen_range(0..size - 1);
        if other >= chief_pos {
            other += 1;
        }
        second_chief = Some(other);
    }

    let mut members = Vec::with_capacity(size);
    for pos in 0..size {
        let chief = (pos == chief_pos && !no_chief) || second_chief == Some(pos);
        let (age, age_token) = draw_age(rng, params.age_encoding, pos == chief_pos);
        let male = rng.gen_bool(0.5);
        let poswrchief = if chief {
            "1".to_string()
        } else {
            rng.gen_range(2..=9).to_string()
        };
        let income = match params.income {
            SynthIncome::None => None,
            SynthIncome::Letters => {
                let (k, v) = &letters[rng.gen_range(0..letters.len())];
                Some((k.clone(), *v))
            }
            SynthIncome::Numeric => {
                let v = rng.gen_range(0..=500_000u32);
                Some((v.to_string(), f64::from(v)))
            }
        };
        members.push(Person {
            age,
            age_token,
            male,
            chief,
            poswrchief,
            income,
        });
    }

    let (male_tok, female_tok) = params.gender_encoding.tokens();
    let mut oxford = 0.0;
    let mut faofam = 0.0;
    let (mut adults, mut children) = (0usize, 0usize);
    let mut total = 0.0;
    let mut chief_label = NO_CHIEF_LABEL.to_string();
    for p in &members {
        let (ox, fao, adult) = truth_weights(p, params.age_encoding);
        oxford += ox;
        faofam += fao;
        if adult {
            adults += 1;
        } else {
            children += 1;
        }
        if let Some((_, v)) = &p.income {
            total += v;
        }
        if p.chief {
            chief_label = if p.male { male_tok } else { female_tok }.to_string();
        }
    }
    let dmp = (adults as f64 + params.dmp_c * children as f64).powf(params.dmp_s);
    let total_income = (params.income != SynthIncome::None).then_some(total);
    let chosen = match params.scaled_by {
        ScaleKind::Oxford => oxford,
        ScaleKind::FaoFam => faofam,
        ScaleKind::Dmp => dmp,
    };
    let key = make_household_key(&strata[0], &strata[1], &strata[2], &strata[3], scheme)?;
    let agg = HouseholdAggregate {
        key,
        size,
        n_adults: adults,
        n_children: children,
        scale_oxford: oxford,
        scale_faofam: faofam,
        scale_dmp: dmp,
        total_income,
        scaled_income: total_income.map(|t| t / chosen),
        label_area: strata[0].clone(),
        label_chief_gender: chief_label,
    };
    Ok((members, agg))
}

impl SynthDb {
    pub fn columns(&self) -> BTreeMap<Variable, Vec<String>> {
        let mut cols: BTreeMap<Variable, Vec<String>> = BTreeMap::new();
        for p in &self.persons {
            let mut push = |v: Variable, t: &str| cols.entry(v).or_default().push(t.to_string());
            push(Variable::Region, &p.region);
            push(Variable::Milieu, &p.milieu);
            push(Variable::Cluster, &p.cluster);
            push(Variable::Household, &p.household);
            push(Variable::Age, &p.age);
            push(Variable::Gender, &p.gender);
            push(Variable::PosWrChief, &p.poswrchief);
            if let Some(i) = &p.income {
                push(Variable::Income, i);
            }
        }
        cols
    }

    pub fn records(&self) -> Result<Vec<PersonRecord>> {
        self.persons
            .iter()
            .map(|p| {
                PersonRecord::new(
                    &p.region,
                    &p.milieu,
                    &p.cluster,
                    &p.household,
                    &p.age,
                    &p.gender,
                    &p.poswrchief,
                    p.income.as_deref(),
                )
            })
            .collect()
    }

    /// Writes one `<variable>.txt` per column into `dir`.
    pub fn write_columns(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (var, tokens) in self.columns() {
            let path = dir.join(var.default_file_name());
            let mut body = tokens.join("\n");
            body.push('\n');
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Writes all columns as one comma-separated table with a header row.
    pub fn write_table(&self, path: &Path) -> Result<()> {
        let cols = self.columns();
        let mut out = Vec::new();
        let names: Vec<&str> = cols.keys().map(|v| v.name()).collect();
        writeln!(out, "{}", names.join(",")).expect("write to vec");
        for i in 0..self.persons.len() {
            let row: Vec<&str> = cols.values().map(|c| c[i].as_str()).collect();
            writeln!(out, "{}", row.join(",")).expect("write to vec");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Default)]
struct Acc<T> {
    size: usize,
    adults: usize,
    children: usize,
    invalid_age: bool,
    oxford: T,
    faofam: T,
    income: Option<T>,
    area: Option<(usize, String)>,
    chief: Option<(usize, String)>,
}

fn person_weights<T: Scalar>(m: &Member<T>, cfg: &ReduceConfig<T>) -> Result<(T, T, bool)> {
    let enc = cfg.parse.age_encoding;
    let sentinel = T::lit(SENTINEL_WEIGHT);
    let age = match &m.age {
        Ok(a) => a,
        Err(_) if cfg.paper_sentinel => return Ok((sentinel, sentinel, true)),
        Err(raw) => return Err(Error::BadAgeToken { raw: raw.clone() }.at_line(m.line)),
    };
    let adult = classify_adult(age, enc);
    let oxford = oxford_weight(age, enc, m.is_chief).value();
    let faofam = match &m.gender {
        Ok(g) => faofam_weight(age, enc, *g).value(),
        Err(_) if cfg.paper_sentinel => {
            if adult {
                sentinel
            } else {
                T::lit(0.5)
            }
        }
        Err(raw) => {
            return Err(Error::BadGenderToken {
                raw: raw.clone(),
                encoding: cfg.parse.gender_encoding,
            }
            .at_line(m.line))
        }
    };
    Ok((oxford, faofam, adult))
}

/// Hash-map group-by over rows in any order.
///
/// First-area and last-chief are decided by person line, so shuffling the rows
/// leaves labels and counts unchanged; sums may differ by rounding only.
pub fn oracle_aggregate<T: Scalar>(
    rows: &[(HouseholdKey, Member<T>)],
    cfg: &ReduceConfig<T>,
) -> Result<BTreeMap<HouseholdKey, HouseholdAggregate<T>>> {
    let mut accs: HashMap<&HouseholdKey, Acc<T>> = HashMap::new();
    for (key, m) in rows {
        let acc = accs.entry(key).or_insert_with(|| Acc {
            oxford: T::zero(),
            faofam: T::zero(),
            ..Acc::default()
        });
        let (ox, fao, adult) = person_weights(m, cfg)?;
        acc.size += 1;
        if m.age.is_err() {
            acc.invalid_age = true;
        }
        if adult {
            acc.adults += 1;
        } else {
            acc.children += 1;
        }
        acc.oxford = acc.oxford + ox;
        acc.faofam = acc.faofam + fao;
        if cfg.income_enabled {
            let x = m.income.ok_or_else(|| Error::MissingIncome.at_line(m.line))?;
            acc.income = Some(acc.income.unwrap_or_else(T::zero) + x);
        }
        if acc.area.as_ref().is_none_or(|(l, _)| m.line < *l) {
            acc.area = Some((m.line, m.area.clone()));
        }
        if m.is_chief && acc.chief.as_ref().is_none_or(|(l, _)| m.line > *l) {
            acc.chief = Some((m.line, m.gender_raw.clone()));
        }
    }

    accs.into_iter()
        .map(|(key, a)| {
            let dmp = if a.invalid_age && cfg.paper_sentinel {
                T::lit(SENTINEL_WEIGHT)
            } else {
                (T::from_count(a.adults) + cfg.dmp_c * T::from_count(a.children)).powf(cfg.dmp_s)
            };
            let chosen = match cfg.scaled_by {
                ScaleKind::Oxford => a.oxford,
                ScaleKind::FaoFam => a.faofam,
                ScaleKind::Dmp => dmp,
            };
            let scaled_income = match a.income {
                Some(_) if !(chosen > T::zero()) => {
                    return Err(Error::ZeroScale {
                        scale: chosen.as_f64(),
                    }
                    .in_household(key.canonical()))
                }
                Some(total) => Some(total / chosen),
                None => None,
            };
            let agg = HouseholdAggregate {
                key: key.clone(),
                size: a.size,
                n_adults: a.adults,
                n_children: a.children,
                scale_oxford: a.oxford,
                scale_faofam: a.faofam,
                scale_dmp: dmp,
                total_income: a.income,
                scaled_income,
                label_area: a.area.map(|(_, s)| s).unwrap_or_default(),
                label_chief_gender: a
                    .chief
                    .map_or_else(|| NO_CHIEF_LABEL.to_string(), |(_, s)| s),
            };
            Ok((key.clone(), agg))
        })
        .collect()
}

/// Returns a copy of `rows` in random order (for order-insensitivity checks).
pub fn shuffled<T: Clone>(rows: &[T], seed: u64) -> Vec<T> {
    let mut out = rows.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_by_seed() {
        let p = SynthParams {
            households: 10,
            seed: 1,
            ..Default::default()
        };
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        let other = SynthParams { seed: 2, ..p.clone() };
        assert_ne!(generate(&p).unwrap().persons, generate(&other).unwrap().persons);
    }

    #[test]
    fn continuous_numbering_increases() {
        let p = SynthParams {
            households: 300,
            renumber_households: false,
            ..Default::default()
        };
        let db = generate(&p).unwrap();
        assert_eq!(db.truth.len(), 300);
        let hh: Vec<u64> = db
            .truth
            .iter()
            .map(|t| t.key.components().3.parse().unwrap())
            .collect();
        assert!(hh.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn renumbering_restarts() {
        let p = SynthParams {
            households: 300,
            renumber_households: true,
            ..Default::default()
        };
        let db = generate(&p).unwrap();
        let ones = db.truth.iter().filter(|t| t.key.components().3 == "1").count();
        assert!(ones > 1);
        let mut keys: Vec<_> = db.truth.iter().map(|t| t.key.canonical()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 300);
    }

    #[test]
    fn sizes_and_chiefs() {
        let p = SynthParams {
            households: 200,
            max_household_size: 9,
            ..Default::default()
        };
        let db = generate(&p).unwrap();
        assert!(db.truth.iter().all(|t| (1..=9).contains(&t.size)));
        assert_eq!(db.truth.iter().map(|t| t.size).sum::<usize>(), db.persons.len());
        assert!(db.truth.iter().all(|t| t.label_chief_gender != NO_CHIEF_LABEL));
        assert!(db.truth.iter().all(|t| t.n_adults + t.n_children == t.size));
    }

    #[test]
    fn anomalies_present() {
        let p = SynthParams {
            households: 20,
            anomalies: true,
            ..Default::default()
        };
        let db = generate(&p).unwrap();
        assert_eq!(db.truth[1].label_chief_gender, NO_CHIEF_LABEL);
        let key = db.truth[2].key.components();
        let chiefs = db
            .persons
            .iter()
            .filter(|x| (x.region.as_str(), x.milieu.as_str(), x.cluster.as_str(), x.household.as_str()) == key)
            .filter(|x| x.poswrchief == "1")
            .count();
        assert_eq!(chiefs, 2);
    }

    #[test]
    fn zero_maxima_rejected() {
        let p = SynthParams {
            max_clusters: 0,
            ..Default::default()
        };
        assert!(generate(&p).is_err());
    }

    #[test]
    fn empty_oracle() {
        let cfg = ReduceConfig::<f64>::default();
        assert!(oracle_aggregate(&[], &cfg).unwrap().is_empty());
    }
}
