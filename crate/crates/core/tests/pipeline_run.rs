mod common;

use std::fs;
use std::path::Path;

use proptest::prelude::*;

use hdbprep::aggregate::aggregate_all;
use hdbprep::error::Error;
use hdbprep::pipeline::{run_pipeline, ConfigFile, Overrides};
use hdbprep::synth::{generate, oracle_aggregate, shuffled, SynthDb, SynthIncome, SynthParams};

fn db(seed: u64, households: usize, income: SynthIncome) -> SynthDb {
    generate(&SynthParams {
        households,
        income,
        anomalies: true,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn config(dir: &Path, extra: &str) -> ConfigFile {
    let text = format!(
        "[input]\ndir = \"{}\"\n[income]\nmode = \"letters\"\n[output]\ndir = \"{}\"\n{extra}",
        dir.display(),
        dir.join("out").display()
    );
    ConfigFile::parse(&text).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn per_variable_files_align_with_table() {
    let tmp = tempfile::tempdir().unwrap();
    let db = db(2, 120, SynthIncome::Letters);
    db.write_columns(tmp.path()).unwrap();
    let cfg = config(tmp.path(), "").resolve::<f64>().unwrap();
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.households, 120);
    assert_eq!(report.persons, db.persons.len());

    let out = tmp.path().join("out");
    let table: Vec<Vec<String>> = lines(&out.join("households.csv"))
        .iter()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(table.len(), 120);
    for (file, col) in [
        ("sizehousehold.txt", 1),
        ("scaleoxford.txt", 4),
        ("scalefaofam.txt", 5),
        ("scaleDMP-0.5-0.7.txt", 6),
        ("totalincome.txt", 7),
        ("labelregion.txt", 9),
        ("labelgender.txt", 10),
    ] {
        let values = lines(&out.join(file));
        assert_eq!(values.len(), table.len(), "{file}");
        for (v, row) in values.iter().zip(&table) {
            assert_eq!(v, &row[col], "{file}");
        }
    }
    let ident = lines(&out.join("identhousehold.txt"));
    assert_eq!(ident.len(), db.persons.len());
    let mut distinct = ident.clone();
    distinct.dedup();
    assert_eq!(distinct, table.iter().map(|r| r[0].clone()).collect::<Vec<_>>());
    for row in &table {
        let total: f64 = row[7].parse().unwrap();
        let scaled: f64 = row[8].parse().unwrap();
        let oxford: f64 = row[4].parse().unwrap();
        assert!(common::rel_close(scaled, total / oxford, 1e-11), "{row:?}");
    }
}

#[test]
fn non_consecutive_input_fails_unless_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    let db = db(3, 30, SynthIncome::Letters);
    db.write_columns(tmp.path()).unwrap();
    // move the first person to the end
    for v in hdbprep::ingest::Variable::ALL {
        let path = tmp.path().join(v.default_file_name());
        let mut l = lines(&path);
        let first = l.remove(0);
        l.push(first);
        fs::write(&path, l.join("\n") + "\n").unwrap();
    }
    let err = run_pipeline(&config(tmp.path(), "").resolve::<f64>().unwrap()).unwrap_err();
    assert!(matches!(err.root(), Error::NonConsecutiveKey { .. }), "{err}");
    assert_eq!(err.line(), Some(db.persons.len()));
    assert_eq!(err.exit_code(), 1);

    let mut file = config(tmp.path(), "");
    file.apply(&Overrides {
        sort: true,
        ..Default::default()
    });
    let report = run_pipeline(&file.resolve::<f64>().unwrap()).unwrap();
    assert_eq!(report.households, 30);
    let sizes: usize = lines(&tmp.path().join("out/sizehousehold.txt"))
        .iter()
        .map(|s| s.parse::<usize>().unwrap())
        .sum();
    assert_eq!(sizes, db.persons.len());
}

#[test]
fn single_precision_run_close_to_double() {
    let tmp = tempfile::tempdir().unwrap();
    db(4, 80, SynthIncome::Numeric).write_columns(tmp.path()).unwrap();
    let text = "[income]\nmode = \"numeric\"";
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let mut f64_file = config(tmp.path(), "");
    f64_file.income.mode = "numeric".into();
    f64_file.output.dir = a.clone();
    let mut f32_file = ConfigFile::parse(text).unwrap();
    f32_file.input.dir = tmp.path().to_path_buf();
    f32_file.output.dir = b.clone();
    run_pipeline(&f64_file.resolve::<f64>().unwrap()).unwrap();
    run_pipeline(&f32_file.resolve::<f32>().unwrap()).unwrap();
    for file in ["scaleoxford.txt", "scalefaofam.txt", "scaleDMP-0.5-0.7.txt", "totalincome.txt"] {
        for (x, y) in lines(&a.join(file)).iter().zip(lines(&b.join(file))) {
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!(common::rel_close(x, y, 1e-5), "{file}: {x} vs {y}");
        }
    }
}

#[test]
fn extra_income_columns_are_summed() {
    let tmp = tempfile::tempdir().unwrap();
    let db = db(5, 10, SynthIncome::Letters);
    db.write_columns(tmp.path()).unwrap();
    fs::copy(tmp.path().join("income.txt"), tmp.path().join("income2.txt")).unwrap();
    let one = config(tmp.path(), "").resolve::<f64>().unwrap();
    run_pipeline(&one).unwrap();
    let single = lines(&tmp.path().join("out/totalincome.txt"));
    let mut two = config(tmp.path(), "").resolve::<f64>().unwrap();
    two.extra_income = vec!["income2.txt".into()];
    run_pipeline(&two).unwrap();
    let double = lines(&tmp.path().join("out/totalincome.txt"));
    for (s, d) in single.iter().zip(&double) {
        assert_eq!(2.0 * s.parse::<f64>().unwrap(), d.parse::<f64>().unwrap());
    }
}

#[test]
fn unknown_code_strict_and_literal() {
    let tmp = tempfile::tempdir().unwrap();
    db(6, 10, SynthIncome::Letters).write_columns(tmp.path()).unwrap();
    let path = tmp.path().join("income.txt");
    let mut l = lines(&path);
    l[4] = "Z".into();
    fs::write(&path, l.join("\n") + "\n").unwrap();
    let err = run_pipeline(&config(tmp.path(), "").resolve::<f64>().unwrap()).unwrap_err();
    assert!(matches!(err.root(), Error::UnknownIncomeCode { .. }));
    assert_eq!(err.line(), Some(5));
    let cfg = config(tmp.path(), "[options]\npaper_literal = true").resolve::<f64>().unwrap();
    run_pipeline(&cfg).unwrap();
    assert_eq!(lines(&tmp.path().join("out/monthlyincome.txt"))[4], "0");
}

#[test]
fn bad_gender_strict_vs_sentinel() {
    let tmp = tempfile::tempdir().unwrap();
    let db = db(7, 10, SynthIncome::None);
    db.write_columns(tmp.path()).unwrap();
    let adult = db.persons.iter().position(|p| p.age.parse::<f64>().is_ok_and(|a| a >= 15.0)).unwrap();
    let path = tmp.path().join("gender.txt");
    let mut l = lines(&path);
    l[adult] = "F".into();
    fs::write(&path, l.join("\n") + "\n").unwrap();

    let mut file = config(tmp.path(), "");
    file.income.mode = "none".into();
    let err = run_pipeline(&file.resolve::<f64>().unwrap()).unwrap_err();
    assert!(matches!(err.root(), Error::BadGenderToken { .. }), "{err}");
    assert_eq!(err.line(), Some(adult + 1));

    file.options.paper_sentinel = true;
    run_pipeline(&file.resolve::<f64>().unwrap()).unwrap();
    let fao = lines(&tmp.path().join("out/scalefaofam.txt"));
    let idx = db
        .truth
        .iter()
        .position(|t| t.key.components().3 == db.persons[adult].household && t.key.components().2 == db.persons[adult].cluster)
        .unwrap();
    let expected = db.truth[idx].scale_faofam
        - if db.persons[adult].gender == "0" { 1.0 } else { 0.8 }
        + 0.99;
    assert!(common::rel_close(fao[idx].parse().unwrap(), expected, 1e-9));
}

#[test]
fn table_input_matches_column_input() {
    let tmp = tempfile::tempdir().unwrap();
    let db = db(8, 40, SynthIncome::Letters);
    db.write_columns(tmp.path()).unwrap();
    db.write_table(&tmp.path().join("persons.csv")).unwrap();
    run_pipeline(&config(tmp.path(), "").resolve::<f64>().unwrap()).unwrap();
    let cols = common::dir_files(&tmp.path().join("out"));
    let text = format!(
        "[input]\nformat = \"table\"\npath = \"{}\"\n[income]\nmode = \"letters\"\n[output]\ndir = \"{}\"",
        tmp.path().join("persons.csv").display(),
        tmp.path().join("out2").display()
    );
    run_pipeline(&ConfigFile::parse(&text).unwrap().resolve::<f64>().unwrap()).unwrap();
    assert_eq!(cols, common::dir_files(&tmp.path().join("out2")));
}

#[test]
fn config_paths_relative_to_file() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    db(9, 5, SynthIncome::None).write_columns(&data).unwrap();
    let cfg_path = tmp.path().join("job.toml");
    fs::write(&cfg_path, "[input]\ndir = \"data\"\n[output]\ndir = \"results\"\n").unwrap();
    let cfg = ConfigFile::load(&cfg_path).unwrap().resolve::<f64>().unwrap();
    assert_eq!(cfg.out_dir, tmp.path().join("results"));
    run_pipeline(&cfg).unwrap();
    assert!(tmp.path().join("results/households.csv").is_file());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fused_equals_oracle_for_any_seed(seed in 0u64..1_000_000, households in 1usize..80, renumber: bool) {
        let db = generate(&SynthParams {
            households,
            renumber_households: renumber,
            anomalies: true,
            seed,
            ..Default::default()
        }).unwrap();
        let cfg = common::reduce_config(&db);
        let rows = common::rows(&db, &cfg);
        let fused = aggregate_all(rows.iter().cloned(), &cfg).unwrap();
        let oracle = oracle_aggregate(&shuffled(&rows, seed), &cfg).unwrap();
        prop_assert_eq!(fused.aggregates.len(), oracle.len());
        prop_assert_eq!(fused.persons, db.persons.len());
        for a in &fused.aggregates {
            let o = &oracle[&a.key];
            prop_assert_eq!((a.size, a.n_adults, a.n_children), (o.size, o.n_adults, o.n_children));
            prop_assert_eq!(&a.label_area, &o.label_area);
            prop_assert_eq!(&a.label_chief_gender, &o.label_chief_gender);
            prop_assert!(common::rel_close(a.scale_oxford, o.scale_oxford, 1e-9));
            prop_assert!(common::rel_close(a.scale_faofam, o.scale_faofam, 1e-9));
            prop_assert!(common::rel_close(a.scale_dmp, o.scale_dmp, 1e-9));
            prop_assert!(common::rel_close(a.total_income.unwrap(), o.total_income.unwrap(), 1e-9));
        }
    }

    #[test]
    fn scaled_by_each_scale(seed in 0u64..1000, which in 0usize..3) {
        let kind = [hdbprep::ScaleKind::Oxford, hdbprep::ScaleKind::FaoFam, hdbprep::ScaleKind::Dmp][which];
        let db = generate(&SynthParams { households: 20, scaled_by: kind, seed, ..Default::default() }).unwrap();
        let cfg = common::reduce_config(&db);
        let out = aggregate_all(common::rows(&db, &cfg), &cfg).unwrap();
        for (a, t) in out.aggregates.iter().zip(&db.truth) {
            prop_assert!(common::rel_close(a.scaled_income.unwrap(), t.scaled_income.unwrap(), 1e-9));
            prop_assert!(common::rel_close(a.scaled_income.unwrap() * a.scale(kind), a.total_income.unwrap(), 1e-12));
        }
    }
}
