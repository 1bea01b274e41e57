//! Reading survey exports: one text file per variable, or a single delimited table.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Age, AgeEncoding, Gender, GenderEncoding, PersonRecord};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Region,
    Milieu,
    Cluster,
    Household,
    Age,
    Gender,
    PosWrChief,
    Income,
}

impl Variable {
    pub const ALL: [Variable; 8] = [
        Variable::Region,
        Variable::Milieu,
        Variable::Cluster,
        Variable::Household,
        Variable::Age,
        Variable::Gender,
        Variable::PosWrChief,
        Variable::Income,
    ];

    pub const STRATA: [Variable; 4] = [
        Variable::Region,
        Variable::Milieu,
        Variable::Cluster,
        Variable::Household,
    ];

    /// Every variable except income.
    pub const REQUIRED: [Variable; 7] = [
        Variable::Region,
        Variable::Milieu,
        Variable::Cluster,
        Variable::Household,
        Variable::Age,
        Variable::Gender,
        Variable::PosWrChief,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Region => "region",
            Variable::Milieu => "milieu",
            Variable::Cluster => "cluster",
            Variable::Household => "household",
            Variable::Age => "age",
            Variable::Gender => "gender",
            Variable::PosWrChief => "poswrchief",
            Variable::Income => "income",
        }
    }

    /// File name used when the config does not override it.
    pub fn default_file_name(self) -> &'static str {
        match self {
            Variable::Region => "region.txt",
            Variable::Milieu => "milieu.txt",
            Variable::Cluster => "cluster.txt",
            Variable::Household => "household.txt",
            Variable::Age => "age.txt",
            Variable::Gender => "gender.txt",
            Variable::PosWrChief => "poswrchief.txt",
            Variable::Income => "income.txt",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown variable {s:?}")))
    }
}

/// One per-variable column file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSource {
    pub path: PathBuf,
    pub variable: Variable,
}

/// A delimited table with a header row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSource {
    pub path: PathBuf,
    pub delimiter: u8,
    pub column_map: BTreeMap<Variable, String>,
}

fn read_text(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match text.strip_prefix('\u{feff}') {
        Some(rest) => rest.to_string(),
        None => text,
    })
}

/// Splits column-file text into trimmed tokens.
///
/// LF and CRLF both end a line. Trailing blank lines are dropped; a blank line
/// followed by more data is an error since it would shift every later row.
pub fn column_tokens(text: &str, path: &Path, skip_header: usize) -> Result<Vec<String>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines: Vec<&str> = text.split('\n').collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let tokens = lines
        .into_iter()
        .enumerate()
        .skip(skip_header)
        .map(|(i, line)| {
            let t = line.trim();
            if t.is_empty() {
                Err(Error::BlankLine {
                    path: path.to_path_buf(),
                    line: i + 1,
                })
            } else {
                Ok(t.to_string())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if tokens.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(tokens)
}

pub fn read_column_file(src: &ColumnSource, skip_header: usize) -> Result<Vec<String>> {
    let text = read_text(&src.path)?;
    column_tokens(&text, &src.path, skip_header)
}

/// Builds person records positionally: record `i` takes token `i` of every column.
pub fn zip_columns(columns: &BTreeMap<Variable, Vec<String>>) -> Result<Vec<PersonRecord>> {
    let col = |v: Variable| -> Result<&Vec<String>> {
        columns.get(&v).ok_or_else(|| Error::MissingColumn {
            name: v.name().to_string(),
        })
    };
    let required = Variable::REQUIRED
        .iter()
        .map(|&v| col(v))
        .collect::<Result<Vec<_>>>()?;
    let income = columns.get(&Variable::Income).filter(|c| !c.is_empty());

    let expected = required[0].len();
    for (v, c) in Variable::REQUIRED
        .iter()
        .zip(&required)
        .map(|(v, c)| (*v, c.len()))
        .chain(income.map(|c| (Variable::Income, c.len())))
    {
        if c != expected {
            return Err(Error::LengthMismatch {
                variable: v.name().to_string(),
                expected,
                actual: c,
            });
        }
    }

    (0..expected)
        .map(|i| {
            let t = |k: usize| required[k][i].as_str();
            PersonRecord::new(
                t(0),
                t(1),
                t(2),
                t(3),
                t(4),
                t(5),
                t(6),
                income.map(|c| c[i].as_str()),
            )
            .map_err(|e| e.at_line(i + 1))
        })
        .collect()
}

/// Reads the named columns of a delimited table, in row order.
///
/// Fields may be wrapped in double quotes, with `""` standing for a literal quote.
pub fn read_table_columns(
    path: &Path,
    delimiter: u8,
    names: &[&str],
) -> Result<BTreeMap<String, Vec<String>>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let table_err = |e: csv::Error| Error::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(table_err)?.clone();
    let indices = names
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::MissingColumn {
                    name: name.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out: BTreeMap<String, Vec<String>> =
        names.iter().map(|n| (n.to_string(), Vec::new())).collect();
    for row in reader.records() {
        let row = row.map_err(table_err)?;
        if row.len() != header.len() {
            let line = row.position().map_or(0, |p| p.line() as usize);
            return Err(Error::RowArityMismatch {
                line,
                expected: header.len(),
                actual: row.len(),
            });
        }
        for (name, &idx) in names.iter().zip(&indices) {
            out.get_mut(*name)
                .expect("column initialised")
                .push(row[idx].trim().to_string());
        }
    }
    Ok(out)
}

pub fn read_table(src: &TableSource) -> Result<Vec<PersonRecord>> {
    let names: Vec<&str> = src.column_map.values().map(String::as_str).collect();
    let mut by_name = read_table_columns(&src.path, src.delimiter, &names)?;
    let columns = src
        .column_map
        .iter()
        .map(|(v, name)| (*v, by_name.remove(name).unwrap_or_default()))
        .collect();
    zip_columns(&columns)
}

/// Parses an age token. Years may be fractional; class indices are positive integers.
pub fn parse_age<T: Scalar>(raw: &str, enc: AgeEncoding) -> Result<Age<T>> {
    let raw = raw.trim();
    let bad = || Error::BadAgeToken {
        raw: raw.to_string(),
    };
    let v: f64 = raw.parse().map_err(|_| bad())?;
    if !v.is_finite() || v < 0.0 {
        return Err(bad());
    }
    if enc == AgeEncoding::FiveYearClasses && (v < 1.0 || v.fract() != 0.0) {
        return Err(bad());
    }
    Ok(Age::new(T::from_f64(v).ok_or_else(bad)?))
}

pub fn parse_gender(raw: &str, enc: GenderEncoding) -> Result<Gender> {
    let raw = raw.trim();
    let (male, female) = enc.tokens();
    if raw == male {
        Ok(Gender::Male)
    } else if raw == female {
        Ok(Gender::Female)
    } else {
        Err(Error::BadGenderToken {
            raw: raw.to_string(),
            encoding: enc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn p() -> &'static Path {
        Path::new("x.txt")
    }

    #[test]
    fn lines_and_crlf() {
        assert_eq!(column_tokens("1\n1\n2\n", p(), 0).unwrap(), toks(&["1", "1", "2"]));
        assert_eq!(column_tokens("1\r\n2\r\n", p(), 0).unwrap(), toks(&["1", "2"]));
        assert_eq!(column_tokens("\u{feff} 7 \n8", p(), 0).unwrap(), toks(&["7", "8"]));
        assert_eq!(column_tokens("age\n3\n4\n\n\n", p(), 1).unwrap(), toks(&["3", "4"]));
    }

    #[test]
    fn empty_and_blank() {
        assert!(matches!(column_tokens("", p(), 0), Err(Error::EmptyFile { .. })));
        assert!(matches!(column_tokens("\r\n\n", p(), 0), Err(Error::EmptyFile { .. })));
        assert!(matches!(
            column_tokens("1\n\n2\n", p(), 0),
            Err(Error::BlankLine { line: 2, .. })
        ));
    }

    fn two_people() -> BTreeMap<Variable, Vec<String>> {
        let mut m = BTreeMap::new();
        for v in Variable::STRATA {
            m.insert(v, toks(&["1", "1"]));
        }
        m.insert(Variable::Age, toks(&["34", "10"]));
        m.insert(Variable::Gender, toks(&["1", "2"]));
        m.insert(Variable::PosWrChief, toks(&["1", "2"]));
        m
    }

    #[test]
    fn zip_basic() {
        let recs = zip_columns(&two_people()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].age_raw(), "10");
        assert_eq!(recs[0].income_raw(), None);
        assert!(recs[0].is_chief() && !recs[1].is_chief());
    }

    #[test]
    fn zip_length_mismatch() {
        let mut m = two_people();
        m.insert(Variable::Age, toks(&["34", "10", "5"]));
        match zip_columns(&m) {
            Err(Error::LengthMismatch {
                variable,
                expected,
                actual,
            }) => {
                assert_eq!((variable.as_str(), expected, actual), ("age", 2, 3));
            }
            other => panic!("{other:?}"),
        }
        let mut m = two_people();
        m.remove(&Variable::Gender);
        assert!(matches!(zip_columns(&m), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn zip_with_income() {
        let mut m = two_people();
        m.insert(Variable::Income, toks(&["A", "B"]));
        let recs = zip_columns(&m).unwrap();
        assert_eq!(recs[1].income_raw(), Some("B"));
        m.insert(Variable::Income, Vec::new());
        assert_eq!(zip_columns(&m).unwrap()[0].income_raw(), None);
    }

    #[test]
    fn ages() {
        assert_eq!(parse_age::<f64>("34", AgeEncoding::Years).unwrap().value, 34.0);
        assert_eq!(parse_age::<f64>("0.5", AgeEncoding::Years).unwrap().value, 0.5);
        assert_eq!(parse_age::<f32>(" 3 ", AgeEncoding::FiveYearClasses).unwrap().value, 3.0);
        for bad in ["-3", "abc", "", "NaN", "inf"] {
            assert!(matches!(
                parse_age::<f64>(bad, AgeEncoding::Years),
                Err(Error::BadAgeToken { .. })
            ));
        }
        assert!(parse_age::<f64>("0", AgeEncoding::FiveYearClasses).is_err());
        assert!(parse_age::<f64>("2.5", AgeEncoding::FiveYearClasses).is_err());
    }

    #[test]
    fn genders() {
        assert_eq!(parse_gender("0", GenderEncoding::Male0Female1).unwrap(), Gender::Male);
        assert_eq!(parse_gender("1", GenderEncoding::Male0Female1).unwrap(), Gender::Female);
        assert_eq!(parse_gender("1", GenderEncoding::Male1Female2).unwrap(), Gender::Male);
        assert_eq!(parse_gender("2", GenderEncoding::Male1Female2).unwrap(), Gender::Female);
        assert!(matches!(
            parse_gender("2", GenderEncoding::Male0Female1),
            Err(Error::BadGenderToken { .. })
        ));
        assert!(parse_gender("0", GenderEncoding::Male1Female2).is_err());
    }
}
