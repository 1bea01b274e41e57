//! Configuration, stage orchestration and output files.
//!
//! A run goes ingest → identify → recode → aggregate → output. Each stage can
//! also be run on its own ([`identify`], [`recode_income`], [`aggregate_passes`]),
//! reading the previous stage's files from the output directory the same way
//! the original step-by-step routines did.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Deserialize;

use crate::aggregate::{aggregate_all, run_pass, AggregateOutput, Pass, PassValues};
use crate::error::{Error, Result};
use crate::identity::{household_key_from_canonical, make_household_key, PrefixScheme};
use crate::ingest::{column_tokens, read_column_file, read_table_columns, zip_columns, ColumnSource, Variable};
use crate::model::{
    HouseholdAggregate, HouseholdKey, Member, ParseOptions, PersonRecord, ReduceConfig, ScaleKind,
    ScaleSpec, Warning,
};
use crate::num::{format_number, Scalar};
use crate::recode::{elim1_default_map, recode_stream, IncomeRangeMap};

pub const IDENT_FILE: &str = "identhousehold.txt";
pub const MONTHLY_INCOME_FILE: &str = "monthlyincome.txt";
pub const OXFORD_FILE: &str = "scaleoxford.txt";
pub const FAOFAM_FILE: &str = "scalefaofam.txt";
pub const SIZE_FILE: &str = "sizehousehold.txt";
pub const TOTAL_INCOME_FILE: &str = "totalincome.txt";
pub const LABEL_AREA_FILE: &str = "labelregion.txt";
pub const LABEL_CHIEF_FILE: &str = "labelgender.txt";
pub const TABLE_FILE: &str = "households.csv";

/// `scaleDMP-<c>-<s>.txt`, with each parameter in its shortest form for `T`.
pub fn dmp_file_name<T: Scalar>(c: T, s: T) -> String {
    format!("scaleDMP-{c}-{s}.txt")
}

pub fn scaled_income<T: Scalar>(total_income: T, scale: T) -> Result<T> {
    if !(scale > T::zero()) {
        return Err(Error::ZeroScale {
            scale: scale.as_f64(),
        });
    }
    Ok(total_income / scale)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Columns {
        files: BTreeMap<Variable, PathBuf>,
        skip_header: usize,
    },
    Table {
        path: PathBuf,
        delimiter: u8,
        columns: BTreeMap<Variable, String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum IncomeMode<T> {
    None,
    Numeric,
    Letters(IncomeRangeMap<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub input: InputSource,
    /// Further income/expense sources summed into each person's income.
    /// File paths for column input, column names for table input.
    pub extra_income: Vec<String>,
    pub scheme: PrefixScheme,
    pub parse: ParseOptions,
    /// Scales whose per-household file is written.
    pub scales: Vec<ScaleKind>,
    pub dmp_c: T,
    pub dmp_s: T,
    pub income: IncomeMode<T>,
    pub paper_sentinel: bool,
    pub sort: bool,
    pub out_dir: PathBuf,
    pub scaled_by: ScaleKind,
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn income_enabled(&self) -> bool {
        !matches!(self.income, IncomeMode::None)
    }

    pub fn reduce_config(&self) -> ReduceConfig<T> {
        ReduceConfig {
            parse: self.parse,
            paper_sentinel: self.paper_sentinel,
            dmp_c: self.dmp_c,
            dmp_s: self.dmp_s,
            income_enabled: self.income_enabled(),
            scaled_by: self.scaled_by,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::model::validate_weight_domain(&ScaleSpec::Dmp {
            c: self.dmp_c,
            s: self.dmp_s,
        })?;
        if self.income_enabled() && !self.scales.contains(&self.scaled_by) {
            return Err(Error::Config(format!(
                "scaled income uses scale {} which is not enabled",
                self.scaled_by
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// config file

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub input: InputSection,
    pub identity: IdentitySection,
    pub encoding: EncodingSection,
    pub scales: ScalesSection,
    pub income: IncomeSection,
    pub output: OutputSection,
    pub options: OptionsSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    /// "columns" or "table"
    pub format: String,
    pub dir: PathBuf,
    pub skip_header: usize,
    /// variable name → file name, for column input
    pub files: BTreeMap<String, String>,
    pub path: Option<PathBuf>,
    pub delimiter: String,
    /// variable name → header name, for table input
    pub columns: BTreeMap<String, String>,
}

impl Default for InputSection {
    fn default() -> Self {
        InputSection {
            format: "columns".into(),
            dir: PathBuf::from("."),
            skip_header: 0,
            files: BTreeMap::new(),
            path: None,
            delimiter: ",".into(),
            columns: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub prefixes: String,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection {
            prefixes: "RMCH".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingSection {
    pub age: String,
    pub gender: String,
    pub missing_age: String,
}

impl Default for EncodingSection {
    fn default() -> Self {
        EncodingSection {
            age: "years".into(),
            gender: "male0-female1".into(),
            missing_age: "paper-compat".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalesSection {
    pub enabled: Vec<String>,
    pub dmp_c: f64,
    pub dmp_s: f64,
    pub scaled_income: String,
}

impl Default for ScalesSection {
    fn default() -> Self {
        ScalesSection {
            enabled: vec!["oxford".into(), "faofam".into(), "dmp".into()],
            dmp_c: 0.5,
            dmp_s: 0.7,
            scaled_income: "oxford".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncomeSection {
    /// "none", "numeric" or "letters"
    pub mode: String,
    pub extra: Vec<String>,
    /// Letter → amount; replaces the ELIM1 preset when present.
    pub map: Option<IndexMap<String, f64>>,
    pub default_amount: Option<f64>,
}

impl Default for IncomeSection {
    fn default() -> Self {
        IncomeSection {
            mode: "none".into(),
            extra: Vec::new(),
            map: None,
            default_amount: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionsSection {
    pub paper_literal: bool,
    pub paper_sentinel: bool,
    pub sort: bool,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub paper_literal: bool,
    pub paper_sentinel: bool,
    pub sort: bool,
    pub dmp_c: Option<f64>,
    pub dmp_s: Option<f64>,
    pub scale: Option<ScaleKind>,
    pub skip_header: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file. Relative paths inside it are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.input.dir);
        if let Some(p) = cfg.input.path.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        self.options.paper_literal |= o.paper_literal;
        self.options.paper_sentinel |= o.paper_sentinel;
        self.options.sort |= o.sort;
        if let Some(c) = o.dmp_c {
            self.scales.dmp_c = c;
        }
        if let Some(s) = o.dmp_s {
            self.scales.dmp_s = s;
        }
        if let Some(k) = o.scale {
            self.scales.scaled_income = k.to_string();
            let name = k.to_string();
            if !self.scales.enabled.iter().any(|e| e.parse::<ScaleKind>().ok() == Some(k)) {
                self.scales.enabled.push(name);
            }
        }
        if let Some(n) = o.skip_header {
            self.input.skip_header = n;
        }
    }

    pub fn resolve<T: Scalar>(&self) -> Result<PipelineConfig<T>> {
        let var_map = |m: &BTreeMap<String, String>| -> Result<BTreeMap<Variable, String>> {
            m.iter()
                .map(|(k, v)| Ok((k.parse::<Variable>()?, v.clone())))
                .collect()
        };
        let income_mode = self.income.mode.trim().to_ascii_lowercase();
        let input = match self.input.format.trim() {
            "columns" => {
                let named = var_map(&self.input.files)?;
                let files = Variable::ALL
                    .into_iter()
                    .filter(|v| *v != Variable::Income || income_mode != "none")
                    .map(|v| {
                        let name = named
                            .get(&v)
                            .cloned()
                            .unwrap_or_else(|| v.default_file_name().to_string());
                        (v, self.input.dir.join(name))
                    })
                    .collect();
                InputSource::Columns {
                    files,
                    skip_header: self.input.skip_header,
                }
            }
            "table" => {
                let path = self
                    .input
                    .path
                    .clone()
                    .ok_or_else(|| Error::Config("table input needs input.path".into()))?;
                let delim = self.input.delimiter.as_bytes();
                if delim.len() != 1 {
                    return Err(Error::Config(format!(
                        "delimiter must be one byte, got {:?}",
                        self.input.delimiter
                    )));
                }
                let mut columns = var_map(&self.input.columns)?;
                for v in Variable::ALL {
                    if v == Variable::Income && income_mode == "none" {
                        columns.remove(&v);
                        continue;
                    }
                    columns.entry(v).or_insert_with(|| v.name().to_string());
                }
                InputSource::Table {
                    path,
                    delimiter: delim[0],
                    columns,
                }
            }
            other => return Err(Error::Config(format!("unknown input format {other:?}"))),
        };

        let income = match income_mode.as_str() {
            "none" => IncomeMode::None,
            "numeric" => IncomeMode::Numeric,
            "letters" => IncomeMode::Letters(match &self.income.map {
                Some(m) => IncomeRangeMap::new(
                    m.iter().map(|(k, v)| (k.clone(), T::lit(*v))),
                    self.income
                        .default_amount
                        .map(T::lit)
                        .or(self.options.paper_literal.then(T::zero)),
                )?,
                None => {
                    let mut m = elim1_default_map(self.options.paper_literal);
                    if let Some(d) = self.income.default_amount {
                        m.default_amount = Some(T::lit(d));
                    }
                    m
                }
            }),
            other => return Err(Error::Config(format!("unknown income mode {other:?}"))),
        };

        let scales = self
            .scales
            .enabled
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ScaleKind>>>()?;

        let cfg = PipelineConfig {
            input,
            extra_income: self.income.extra.clone(),
            scheme: self.identity.prefixes.parse()?,
            parse: ParseOptions {
                age_encoding: self.encoding.age.parse()?,
                gender_encoding: self.encoding.gender.parse()?,
                missing_age: self.encoding.missing_age.parse()?,
            },
            scales,
            dmp_c: T::lit(self.scales.dmp_c),
            dmp_s: T::lit(self.scales.dmp_s),
            income,
            paper_sentinel: self.options.paper_sentinel,
            sort: self.options.sort,
            out_dir: self.output.dir.clone(),
            scaled_by: self.scales.scaled_income.parse()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub persons: usize,
    pub households: usize,
    pub warnings: Vec<Warning>,
    pub outputs: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "persons: {}", self.persons)?;
        writeln!(f, "households: {}", self.households)?;
        for p in &self.outputs {
            writeln!(f, "wrote: {}", p.display())?;
        }
        for s in &self.skipped {
            writeln!(f, "skipped: {s}")?;
        }
        writeln!(f, "warnings: {}", self.warnings.len())?;
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// loading

fn load_columns(source: &InputSource, vars: &[Variable]) -> Result<BTreeMap<Variable, Vec<String>>> {
    match source {
        InputSource::Columns { files, skip_header } => vars
            .iter()
            .filter_map(|v| files.get(v).map(|p| (*v, p)))
            .map(|(v, path)| {
                let src = ColumnSource {
                    path: path.clone(),
                    variable: v,
                };
                Ok((v, read_column_file(&src, *skip_header)?))
            })
            .collect(),
        InputSource::Table {
            path,
            delimiter,
            columns,
        } => {
            let wanted: Vec<(Variable, &str)> = vars
                .iter()
                .filter_map(|v| columns.get(v).map(|n| (*v, n.as_str())))
                .collect();
            let names: Vec<&str> = wanted.iter().map(|(_, n)| *n).collect();
            let mut by_name = read_table_columns(path, *delimiter, &names)?;
            Ok(wanted
                .into_iter()
                .map(|(v, n)| (v, by_name.remove(n).unwrap_or_default()))
                .collect())
        }
    }
}

fn load_extra_income(cfg: &PipelineConfig<impl Scalar>) -> Result<Vec<Vec<String>>> {
    match &cfg.input {
        InputSource::Columns { files, skip_header } => {
            let dir = files
                .get(&Variable::Region)
                .and_then(|p| p.parent())
                .unwrap_or(Path::new("."));
            cfg.extra_income
                .iter()
                .map(|name| {
                    let src = ColumnSource {
                        path: dir.join(name),
                        variable: Variable::Income,
                    };
                    read_column_file(&src, *skip_header)
                })
                .collect()
        }
        InputSource::Table {
            path, delimiter, ..
        } => {
            let names: Vec<&str> = cfg.extra_income.iter().map(String::as_str).collect();
            let mut by_name = read_table_columns(path, *delimiter, &names)?;
            Ok(names
                .iter()
                .map(|n| by_name.remove(*n).unwrap_or_default())
                .collect())
        }
    }
}

pub fn load_records<T: Scalar>(cfg: &PipelineConfig<T>) -> Result<Vec<PersonRecord>> {
    zip_columns(&load_columns(&cfg.input, &Variable::ALL)?)
}

fn parse_amounts<T: Scalar>(tokens: &[String]) -> Result<Vec<T>> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .and_then(T::from_f64)
                .ok_or_else(|| Error::BadIncomeToken { raw: t.clone() }.at_line(i + 1))
        })
        .collect()
}

/// Per-person income: the main income column (recoded when letter-coded) plus
/// every extra column. `None` for every person when income is disabled.
pub fn person_incomes<T: Scalar>(
    cfg: &PipelineConfig<T>,
    main: &[String],
    extra: &[Vec<String>],
) -> Result<Vec<T>> {
    let convert = |tokens: &[String]| -> Result<Vec<T>> {
        match &cfg.income {
            IncomeMode::None => Ok(Vec::new()),
            IncomeMode::Numeric => parse_amounts(tokens),
            IncomeMode::Letters(map) => recode_stream(tokens, map),
        }
    };
    let mut total = convert(main)?;
    for (i, col) in extra.iter().enumerate() {
        if col.len() != total.len() {
            return Err(Error::LengthMismatch {
                variable: cfg.extra_income[i].clone(),
                expected: total.len(),
                actual: col.len(),
            });
        }
        for (acc, x) in total.iter_mut().zip(convert(col)?) {
            *acc = *acc + x;
        }
    }
    Ok(total)
}

fn build_rows<T: Scalar>(
    records: &[PersonRecord],
    keys: Vec<HouseholdKey>,
    incomes: Option<&[T]>,
    cfg: &PipelineConfig<T>,
) -> Vec<(HouseholdKey, Member<T>)> {
    let mut rows: Vec<_> = keys
        .into_iter()
        .zip(records)
        .enumerate()
        .map(|(i, (k, r))| {
            let income = incomes.map(|x| x[i]);
            (k, Member::from_record(i + 1, r, &cfg.parse, income))
        })
        .collect();
    if cfg.sort {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
    }
    rows
}

// ---------------------------------------------------------------------------
// writing

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes one value per line, truncating any existing file.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut body = String::new();
    for l in lines {
        body.push_str(l.as_ref());
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Combined per-household table, one row per household in run order.
pub fn write_household_table<T: Scalar>(aggregates: &[HouseholdAggregate<T>], path: &Path) -> Result<()> {
    let io_err = |e: csv::Error| Error::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io_err)?;
    w.write_record([
        "key",
        "size",
        "n_adults",
        "n_children",
        "scale_oxford",
        "scale_faofam",
        "scale_dmp",
        "total_income",
        "scaled_income",
        "label_area",
        "label_chief_gender",
    ])
    .map_err(io_err)?;
    let opt = |x: Option<T>| x.map(format_number).unwrap_or_default();
    for a in aggregates {
        w.write_record([
            a.key.canonical().to_string(),
            a.size.to_string(),
            a.n_adults.to_string(),
            a.n_children.to_string(),
            format_number(a.scale_oxford),
            format_number(a.scale_faofam),
            format_number(a.scale_dmp),
            opt(a.total_income),
            opt(a.scaled_income),
            a.label_area.clone(),
            a.label_chief_gender.clone(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// stages

/// Full run: every configured output in one pass over the persons.
pub fn run_pipeline<T: Scalar>(cfg: &PipelineConfig<T>) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::default();

    let columns = load_columns(&cfg.input, &Variable::ALL).map_err(|e| e.in_stage("ingest"))?;
    let records = zip_columns(&columns).map_err(|e| e.in_stage("ingest"))?;
    let extra = if cfg.income_enabled() {
        load_extra_income(cfg).map_err(|e| e.in_stage("ingest"))?
    } else {
        Vec::new()
    };
    report.persons = records.len();

    ensure_dir(&cfg.out_dir).map_err(|e| e.in_stage("output"))?;
    let keys = crate::identity::identify_stream(&records, &cfg.scheme)
        .map_err(|e| e.in_stage("identify"))?;
    let ident_path = cfg.out_dir.join(IDENT_FILE);
    write_lines(&ident_path, keys.iter().map(HouseholdKey::canonical))
        .map_err(|e| e.in_stage("identify"))?;
    report.outputs.push(ident_path);

    let incomes = if cfg.income_enabled() {
        let main = columns.get(&Variable::Income).cloned().unwrap_or_default();
        let x = person_incomes(cfg, &main, &extra).map_err(|e| e.in_stage("recode"))?;
        let path = cfg.out_dir.join(MONTHLY_INCOME_FILE);
        write_lines(&path, x.iter().map(|v| format_number(*v))).map_err(|e| e.in_stage("recode"))?;
        report.outputs.push(path);
        Some(x)
    } else {
        report.skipped.push("income (no income configured)".into());
        None
    };

    let rows = build_rows(&records, keys, incomes.as_deref(), cfg);
    let AggregateOutput {
        aggregates,
        warnings,
        ..
    } = aggregate_all(rows, &cfg.reduce_config()).map_err(|e| e.in_stage("aggregate"))?;
    report.households = aggregates.len();
    report.warnings = warnings;

    let out = |name: &str| cfg.out_dir.join(name);
    let mut files: Vec<(PathBuf, Vec<String>)> = vec![(
        out(SIZE_FILE),
        aggregates.iter().map(|a| a.size.to_string()).collect(),
    )];
    for kind in [ScaleKind::Oxford, ScaleKind::FaoFam, ScaleKind::Dmp] {
        if cfg.scales.contains(&kind) {
            let name = match kind {
                ScaleKind::Oxford => OXFORD_FILE.to_string(),
                ScaleKind::FaoFam => FAOFAM_FILE.to_string(),
                ScaleKind::Dmp => dmp_file_name(cfg.dmp_c, cfg.dmp_s),
            };
            files.push((
                out(&name),
                aggregates.iter().map(|a| format_number(a.scale(kind))).collect(),
            ));
        }
    }
    if cfg.income_enabled() {
        files.push((
            out(TOTAL_INCOME_FILE),
            aggregates
                .iter()
                .map(|a| a.total_income.map(format_number).unwrap_or_default())
                .collect(),
        ));
    }
    files.push((
        out(LABEL_AREA_FILE),
        aggregates.iter().map(|a| a.label_area.clone()).collect(),
    ));
    files.push((
        out(LABEL_CHIEF_FILE),
        aggregates.iter().map(|a| a.label_chief_gender.clone()).collect(),
    ));
    for (path, lines) in files {
        write_lines(&path, &lines).map_err(|e| e.in_stage("output"))?;
        report.outputs.push(path);
    }
    let table = out(TABLE_FILE);
    write_household_table(&aggregates, &table).map_err(|e| e.in_stage("output"))?;
    report.outputs.push(table);
    Ok(report)
}

/// Writes `identhousehold.txt` from the four strata columns only.
pub fn identify<T: Scalar>(cfg: &PipelineConfig<T>) -> Result<RunReport> {
    let cols = load_columns(&cfg.input, &Variable::STRATA).map_err(|e| e.in_stage("ingest"))?;
    let get = |v: Variable| {
        cols.get(&v).ok_or_else(|| {
            Error::MissingColumn {
                name: v.name().into(),
            }
            .in_stage("ingest")
        })
    };
    let (r, m, c, h) = (
        get(Variable::Region)?,
        get(Variable::Milieu)?,
        get(Variable::Cluster)?,
        get(Variable::Household)?,
    );
    for (v, col) in [(Variable::Milieu, m), (Variable::Cluster, c), (Variable::Household, h)] {
        if col.len() != r.len() {
            return Err(Error::LengthMismatch {
                variable: v.name().into(),
                expected: r.len(),
                actual: col.len(),
            }
            .in_stage("ingest"));
        }
    }
    let keys = (0..r.len())
        .map(|i| {
            make_household_key(&r[i], &m[i], &c[i], &h[i], &cfg.scheme).map_err(|e| e.at_line(i + 1))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("identify"))?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(IDENT_FILE);
    write_lines(&path, keys.iter().map(HouseholdKey::canonical)).map_err(|e| e.in_stage("identify"))?;
    let mut distinct = keys.clone();
    distinct.dedup();
    Ok(RunReport {
        persons: keys.len(),
        households: distinct.len(),
        outputs: vec![path],
        ..Default::default()
    })
}

/// Writes `monthlyincome.txt`: one amount per person.
pub fn recode_income<T: Scalar>(cfg: &PipelineConfig<T>) -> Result<RunReport> {
    if !cfg.income_enabled() {
        return Err(Error::Config("income.mode is \"none\"; nothing to recode".into()));
    }
    let cols = load_columns(&cfg.input, &[Variable::Income]).map_err(|e| e.in_stage("ingest"))?;
    let main = cols.get(&Variable::Income).cloned().unwrap_or_default();
    let extra = load_extra_income(cfg).map_err(|e| e.in_stage("ingest"))?;
    let x = person_incomes(cfg, &main, &extra).map_err(|e| e.in_stage("recode"))?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(MONTHLY_INCOME_FILE);
    write_lines(&path, x.iter().map(|v| format_number(*v))).map_err(|e| e.in_stage("recode"))?;
    Ok(RunReport {
        persons: x.len(),
        outputs: vec![path],
        ..Default::default()
    })
}

fn pass_file<T: Scalar>(pass: Pass, cfg: &PipelineConfig<T>) -> String {
    match pass {
        Pass::Size => SIZE_FILE.into(),
        Pass::Oxford => OXFORD_FILE.into(),
        Pass::FaoFam => FAOFAM_FILE.into(),
        Pass::Dmp => dmp_file_name(cfg.dmp_c, cfg.dmp_s),
        Pass::TotalIncome => TOTAL_INCOME_FILE.into(),
        Pass::LabelArea => LABEL_AREA_FILE.into(),
        Pass::LabelChief => LABEL_CHIEF_FILE.into(),
    }
}

/// Runs each requested pass on its own, reading household keys from
/// `identhousehold.txt` and incomes from `monthlyincome.txt` in the output directory.
pub fn aggregate_passes<T: Scalar>(cfg: &PipelineConfig<T>, passes: &[Pass]) -> Result<RunReport> {
    cfg.validate()?;
    let records = load_records(cfg).map_err(|e| e.in_stage("ingest"))?;

    let ident_path = cfg.out_dir.join(IDENT_FILE);
    let ident_text = fs::read_to_string(&ident_path).map_err(|e| Error::io(&ident_path, e).in_stage("ingest"))?;
    let keys = column_tokens(&ident_text, &ident_path, 0)
        .and_then(|tokens| {
            tokens
                .iter()
                .enumerate()
                .map(|(i, t)| household_key_from_canonical(t, &cfg.scheme).map_err(|e| e.at_line(i + 1)))
                .collect::<Result<Vec<_>>>()
        })
        .map_err(|e| e.in_stage("ingest"))?;
    if keys.len() != records.len() {
        return Err(Error::LengthMismatch {
            variable: IDENT_FILE.into(),
            expected: records.len(),
            actual: keys.len(),
        }
        .in_stage("ingest"));
    }

    let wants_income = passes.contains(&Pass::TotalIncome);
    if wants_income && !cfg.income_enabled() {
        return Err(Error::Config("total-income pass needs an income mode".into()));
    }
    let incomes = if wants_income {
        let path = cfg.out_dir.join(MONTHLY_INCOME_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e).in_stage("ingest"))?;
        let x: Vec<T> = column_tokens(&text, &path, 0)
            .and_then(|t| parse_amounts(&t))
            .map_err(|e| e.in_stage("ingest"))?;
        if x.len() != records.len() {
            return Err(Error::LengthMismatch {
                variable: MONTHLY_INCOME_FILE.into(),
                expected: records.len(),
                actual: x.len(),
            }
            .in_stage("ingest"));
        }
        Some(x)
    } else {
        None
    };

    let rows = build_rows(&records, keys, incomes.as_deref(), cfg);
    let reduce_cfg = cfg.reduce_config();
    let mut report = RunReport {
        persons: records.len(),
        ..Default::default()
    };
    for &pass in passes {
        let mut warnings = Vec::new();
        let values = run_pass(rows.iter().cloned(), pass, &reduce_cfg, &mut warnings)
            .map_err(|e| e.in_stage("aggregate"))?;
        let lines: Vec<String> = match values {
            PassValues::Counts(v) => v.iter().map(usize::to_string).collect(),
            PassValues::Numbers(v) => v.into_iter().map(format_number).collect(),
            PassValues::Labels(v) => v,
        };
        report.households = lines.len();
        let path = cfg.out_dir.join(pass_file(pass, cfg));
        write_lines(&path, &lines).map_err(|e| e.in_stage("output"))?;
        report.outputs.push(path);
        for w in warnings {
            if !report.warnings.contains(&w) {
                report.warnings.push(w);
            }
        }
    }
    Ok(report)
}
