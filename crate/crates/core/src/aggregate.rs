//! Streaming group-by over consecutive household runs.
//!
//! Persons arrive ordered by household. A household ends at the first row whose
//! key differs from the current one; a key that shows up again after that is
//! rejected rather than silently producing a second household with the same key.
//!
//! Per-household values come from [`Reducer`]s. Reducers compose as tuples, so
//! every output can be computed in one sweep over the rows, and each reducer can
//! also be driven alone to reproduce the one-file-per-pass workflow.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{
    Gender, HouseholdAggregate, HouseholdKey, Member, ReduceConfig, ScaleKind, Warning,
    WarningKind, NO_CHIEF_LABEL,
};
use crate::num::Scalar;
use crate::scales::{classify_adult, dmp_scale, faofam_weight, oxford_weight, SENTINEL_WEIGHT};

/// A maximal block of consecutive rows sharing one key.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRun<T> {
    pub key: HouseholdKey,
    pub members: Vec<Member<T>>,
}

/// Detects household boundaries and keys that reappear after their run closed.
#[derive(Debug, Default)]
struct RunTracker {
    current: Option<HouseholdKey>,
    closed: HashSet<HouseholdKey>,
}

enum Boundary {
    Same,
    New,
}

impl RunTracker {
    fn observe(&mut self, key: &HouseholdKey, line: usize) -> Result<Boundary> {
        match &self.current {
            Some(cur) if cur == key => return Ok(Boundary::Same),
            _ => {}
        }
        if self.closed.contains(key) {
            return Err(Error::NonConsecutiveKey {
                key: key.to_string(),
                line,
            });
        }
        if let Some(prev) = self.current.replace(key.clone()) {
            self.closed.insert(prev);
        }
        Ok(Boundary::New)
    }
}

/// Iterator returned by [`group_consecutive`].
pub struct ConsecutiveRuns<I, T> {
    rows: I,
    tracker: RunTracker,
    open: Option<HouseholdRun<T>>,
    failed: bool,
}

impl<I, T> Iterator for ConsecutiveRuns<I, T>
where
    I: Iterator<Item = (HouseholdKey, Member<T>)>,
{
    type Item = Result<HouseholdRun<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        for (key, member) in self.rows.by_ref() {
            match self.tracker.observe(&key, member.line) {
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
                Ok(Boundary::Same) => {
                    self.open
                        .as_mut()
                        .expect("open run for current key")
                        .members
                        .push(member);
                }
                Ok(Boundary::New) => {
                    let fresh = HouseholdRun {
                        key,
                        members: vec![member],
                    };
                    if let Some(done) = self.open.replace(fresh) {
                        return Some(Ok(done));
                    }
                }
            }
        }
        self.open.take().map(Ok)
    }
}

/// Splits key-ordered rows into household runs, in input order.
pub fn group_consecutive<T, I>(rows: I) -> ConsecutiveRuns<I::IntoIter, T>
where
    I: IntoIterator<Item = (HouseholdKey, Member<T>)>,
{
    ConsecutiveRuns {
        rows: rows.into_iter(),
        tracker: RunTracker::default(),
        open: None,
        failed: false,
    }
}

/// A fold over the members of one household.
pub trait Reducer<T> {
    type State;
    type Output;

    fn init(&self, first: &Member<T>) -> Result<Self::State>;
    fn step(&self, state: Self::State, member: &Member<T>) -> Result<Self::State>;
    fn finish(
        &self,
        state: Self::State,
        key: &HouseholdKey,
        warnings: &mut Vec<Warning>,
    ) -> Result<Self::Output>;
}

impl<T, R: Reducer<T>> Reducer<T> for Option<R> {
    type State = Option<R::State>;
    type Output = Option<R::Output>;

    fn init(&self, first: &Member<T>) -> Result<Self::State> {
        self.as_ref().map(|r| r.init(first)).transpose()
    }

    fn step(&self, state: Self::State, member: &Member<T>) -> Result<Self::State> {
        match (self, state) {
            (Some(r), Some(s)) => r.step(s, member).map(Some),
            _ => Ok(None),
        }
    }

    fn finish(
        &self,
        state: Self::State,
        key: &HouseholdKey,
        warnings: &mut Vec<Warning>,
    ) -> Result<Self::Output> {
        match (self, state) {
            (Some(r), Some(s)) => r.finish(s, key, warnings).map(Some),
            _ => Ok(None),
        }
    }
}

macro_rules! tuple_reducer {
    ($($r:ident $i:tt),+) => {
        impl<T, $($r: Reducer<T>),+> Reducer<T> for ($($r,)+) {
            type State = ($($r::State,)+);
            type Output = ($($r::Output,)+);

            fn init(&self, first: &Member<T>) -> Result<Self::State> {
                Ok(($(self.$i.init(first)?,)+))
            }

            fn step(&self, state: Self::State, member: &Member<T>) -> Result<Self::State> {
                Ok(($(self.$i.step(state.$i, member)?,)+))
            }

            fn finish(
                &self,
                state: Self::State,
                key: &HouseholdKey,
                warnings: &mut Vec<Warning>,
            ) -> Result<Self::Output> {
                Ok(($(self.$i.finish(state.$i, key, warnings)?,)+))
            }
        }
    };
}

tuple_reducer!(A 0, B 1);
tuple_reducer!(A 0, B 1, C 2);
tuple_reducer!(A 0, B 1, C 2, D 3);
tuple_reducer!(A 0, B 1, C 2, D 3, E 4);
tuple_reducer!(A 0, B 1, C 2, D 3, E 4, F 5);
tuple_reducer!(A 0, B 1, C 2, D 3, E 4, F 5, G 6);

/// Applies a reducer to a materialised run.
pub fn reduce<T, R: Reducer<T>>(
    reducer: &R,
    run: &HouseholdRun<T>,
    warnings: &mut Vec<Warning>,
) -> Result<R::Output> {
    let annotate = |e: Error| e.in_household(run.key.canonical());
    let (first, rest) = run
        .members
        .split_first()
        .ok_or(Error::EmptyHousehold)
        .map_err(annotate)?;
    let state = rest
        .iter()
        .try_fold(reducer.init(first).map_err(annotate)?, |s, m| reducer.step(s, m))
        .map_err(annotate)?;
    reducer.finish(state, &run.key, warnings).map_err(annotate)
}

/// Streams key-ordered rows through a reducer without materialising runs.
/// Returns one output per household, in run order.
pub fn reduce_runs<T, R, I>(
    rows: I,
    reducer: &R,
    warnings: &mut Vec<Warning>,
) -> Result<Vec<(HouseholdKey, R::Output)>>
where
    R: Reducer<T>,
    I: IntoIterator<Item = (HouseholdKey, Member<T>)>,
{
    let mut tracker = RunTracker::default();
    let mut open: Option<(HouseholdKey, R::State)> = None;
    let mut out = Vec::new();
    for (key, member) in rows {
        let boundary = tracker.observe(&key, member.line)?;
        let annotate = |e: Error| e.in_household(key.canonical());
        open = Some(match (boundary, open.take()) {
            (Boundary::Same, Some((k, s))) => (k, reducer.step(s, &member).map_err(annotate)?),
            (_, prev) => {
                if let Some((k, s)) = prev {
                    let v = reducer
                        .finish(s, &k, warnings)
                        .map_err(|e| e.in_household(k.canonical()))?;
                    out.push((k, v));
                }
                let s = reducer.init(&member).map_err(annotate)?;
                (key, s)
            }
        });
    }
    if let Some((k, s)) = open {
        let v = reducer
            .finish(s, &k, warnings)
            .map_err(|e| e.in_household(k.canonical()))?;
        out.push((k, v));
    }
    Ok(out)
}

fn sentinel_or<T: Scalar>(sentinel: bool, err: Error, line: usize) -> Result<T> {
    if sentinel {
        Ok(T::lit(SENTINEL_WEIGHT))
    } else {
        Err(err.at_line(line))
    }
}

/// Number of members.
#[derive(Debug, Clone, Copy, Default)]
pub struct SizeReducer;

impl<T> Reducer<T> for SizeReducer {
    type State = usize;
    type Output = usize;

    fn init(&self, _: &Member<T>) -> Result<usize> {
        Ok(1)
    }
    fn step(&self, n: usize, _: &Member<T>) -> Result<usize> {
        Ok(n + 1)
    }
    fn finish(&self, n: usize, _: &HouseholdKey, _: &mut Vec<Warning>) -> Result<usize> {
        Ok(n)
    }
}

/// Sum of per-person Oxford or FAO-OMS weights.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSumReducer<T> {
    pub kind: ScaleKind,
    pub config: ReduceConfig<T>,
}

impl<T: Scalar> ScaleSumReducer<T> {
    /// `kind` must be a per-person scale; DMP has no member weights.
    pub fn new(kind: ScaleKind, config: ReduceConfig<T>) -> Self {
        assert!(kind != ScaleKind::Dmp, "DMP is a household-level scale");
        ScaleSumReducer { kind, config }
    }

    /// Weight of one member. In sentinel mode an unusable token yields 0.99,
    /// and a child's gender is never inspected.
    pub fn member_weight(&self, m: &Member<T>) -> Result<T> {
        let cfg = &self.config;
        let enc = cfg.parse.age_encoding;
        let age = match &m.age {
            Ok(a) => a,
            Err(raw) => {
                return sentinel_or(
                    cfg.paper_sentinel,
                    Error::BadAgeToken { raw: raw.clone() },
                    m.line,
                )
            }
        };
        let weight = match self.kind {
            ScaleKind::Oxford => oxford_weight(age, enc, m.is_chief),
            _ => match (&m.gender, classify_adult(age, enc)) {
                (Ok(g), _) => faofam_weight(age, enc, *g),
                (Err(_), false) if cfg.paper_sentinel => faofam_weight(age, enc, Gender::Male),
                (Err(raw), _) => {
                    return sentinel_or(
                        cfg.paper_sentinel,
                        Error::BadGenderToken {
                            raw: raw.clone(),
                            encoding: cfg.parse.gender_encoding,
                        },
                        m.line,
                    )
                }
            },
        };
        Ok(weight.value())
    }
}

impl<T: Scalar> Reducer<T> for ScaleSumReducer<T> {
    type State = T;
    type Output = T;

    fn init(&self, first: &Member<T>) -> Result<T> {
        self.member_weight(first)
    }
    fn step(&self, acc: T, m: &Member<T>) -> Result<T> {
        Ok(acc + self.member_weight(m)?)
    }
    fn finish(&self, acc: T, _: &HouseholdKey, _: &mut Vec<Warning>) -> Result<T> {
        Ok(acc)
    }
}

/// Adult and child counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub adults: usize,
    pub children: usize,
    /// Some member had an unusable age token (sentinel mode only; counted as adult).
    pub invalid_age: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CountReducer<T> {
    pub config: ReduceConfig<T>,
}

#[derive(Debug, Default)]
pub struct CountState {
    counts: Counts,
    missing_lines: Vec<usize>,
}

impl<T: Scalar> CountReducer<T> {
    fn add(&self, mut st: CountState, m: &Member<T>) -> Result<CountState> {
        match &m.age {
            Ok(age) => {
                if age.missing {
                    st.missing_lines.push(m.line);
                }
                if classify_adult(age, self.config.parse.age_encoding) {
                    st.counts.adults += 1;
                } else {
                    st.counts.children += 1;
                }
            }
            Err(raw) if !self.config.paper_sentinel => {
                return Err(Error::BadAgeToken { raw: raw.clone() }.at_line(m.line))
            }
            Err(_) => {
                st.counts.adults += 1;
                st.counts.invalid_age = true;
            }
        }
        Ok(st)
    }
}

impl<T: Scalar> Reducer<T> for CountReducer<T> {
    type State = CountState;
    type Output = Counts;

    fn init(&self, first: &Member<T>) -> Result<CountState> {
        self.add(CountState::default(), first)
    }
    fn step(&self, st: CountState, m: &Member<T>) -> Result<CountState> {
        self.add(st, m)
    }
    fn finish(
        &self,
        st: CountState,
        key: &HouseholdKey,
        warnings: &mut Vec<Warning>,
    ) -> Result<Counts> {
        warnings.extend(st.missing_lines.into_iter().map(|line| Warning {
            line,
            key: key.to_string(),
            kind: WarningKind::MissingAge,
        }));
        Ok(st.counts)
    }
}

/// DMP value from the household's counts.
pub fn dmp_from_counts<T: Scalar>(counts: &Counts, config: &ReduceConfig<T>) -> Result<T> {
    if counts.invalid_age && config.paper_sentinel {
        return Ok(T::lit(SENTINEL_WEIGHT));
    }
    dmp_scale(counts.adults, counts.children, config.dmp_c, config.dmp_s)
}

#[derive(Debug, Clone, Copy)]
pub struct DmpReducer<T> {
    pub counts: CountReducer<T>,
}

impl<T: Scalar> DmpReducer<T> {
    pub fn new(config: ReduceConfig<T>) -> Self {
        DmpReducer {
            counts: CountReducer { config },
        }
    }
}

impl<T: Scalar> Reducer<T> for DmpReducer<T> {
    type State = CountState;
    type Output = T;

    fn init(&self, first: &Member<T>) -> Result<CountState> {
        self.counts.init(first)
    }
    fn step(&self, st: CountState, m: &Member<T>) -> Result<CountState> {
        self.counts.step(st, m)
    }
    fn finish(&self, st: CountState, key: &HouseholdKey, w: &mut Vec<Warning>) -> Result<T> {
        let counts = self.counts.finish(st, key, w)?;
        dmp_from_counts(&counts, &self.counts.config)
    }
}

/// Sum of member incomes.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalIncomeReducer;

fn income_of<T: Scalar>(m: &Member<T>) -> Result<T> {
    m.income
        .ok_or_else(|| Error::MissingIncome.at_line(m.line))
}

impl<T: Scalar> Reducer<T> for TotalIncomeReducer {
    type State = T;
    type Output = T;

    fn init(&self, first: &Member<T>) -> Result<T> {
        income_of(first)
    }
    fn step(&self, acc: T, m: &Member<T>) -> Result<T> {
        Ok(acc + income_of(m)?)
    }
    fn finish(&self, acc: T, _: &HouseholdKey, _: &mut Vec<Warning>) -> Result<T> {
        Ok(acc)
    }
}

/// Area of the first member. Later members with a different area only raise a warning.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstLabelReducer;

impl<T> Reducer<T> for FirstLabelReducer {
    type State = (String, Vec<(usize, String)>);
    type Output = String;

    fn init(&self, first: &Member<T>) -> Result<Self::State> {
        Ok((first.area.clone(), Vec::new()))
    }
    fn step(&self, (label, mut odd): Self::State, m: &Member<T>) -> Result<Self::State> {
        if m.area != label {
            odd.push((m.line, m.area.clone()));
        }
        Ok((label, odd))
    }
    fn finish(
        &self,
        (label, odd): Self::State,
        key: &HouseholdKey,
        warnings: &mut Vec<Warning>,
    ) -> Result<String> {
        warnings.extend(odd.into_iter().map(|(line, found)| Warning {
            line,
            key: key.to_string(),
            kind: WarningKind::HeterogeneousArea {
                first: label.clone(),
                found,
            },
        }));
        Ok(label)
    }
}

/// Gender token of the chief, or `XXX` when nobody is marked chief.
/// With several chiefs the last one wins.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiefLabelReducer;

#[derive(Debug)]
pub struct ChiefState {
    label: String,
    chiefs: usize,
    last_line: usize,
}

impl ChiefLabelReducer {
    fn see<T>(mut st: ChiefState, m: &Member<T>) -> ChiefState {
        if m.is_chief {
            st.label = m.gender_raw.clone();
            st.chiefs += 1;
            st.last_line = m.line;
        }
        st
    }
}

impl<T> Reducer<T> for ChiefLabelReducer {
    type State = ChiefState;
    type Output = String;

    fn init(&self, first: &Member<T>) -> Result<ChiefState> {
        let st = ChiefState {
            label: NO_CHIEF_LABEL.to_string(),
            chiefs: 0,
            last_line: first.line,
        };
        Ok(Self::see(st, first))
    }
    fn step(&self, st: ChiefState, m: &Member<T>) -> Result<ChiefState> {
        Ok(Self::see(st, m))
    }
    fn finish(
        &self,
        st: ChiefState,
        key: &HouseholdKey,
        warnings: &mut Vec<Warning>,
    ) -> Result<String> {
        if st.chiefs > 1 {
            warnings.push(Warning {
                line: st.last_line,
                key: key.to_string(),
                kind: WarningKind::MultipleChiefs { count: st.chiefs },
            });
        }
        Ok(st.label)
    }
}

pub fn reduce_size<T>(run: &HouseholdRun<T>) -> usize {
    run.members.len()
}

pub fn reduce_scale_sum<T: Scalar>(
    run: &HouseholdRun<T>,
    kind: ScaleKind,
    config: &ReduceConfig<T>,
) -> Result<T> {
    reduce(&ScaleSumReducer::new(kind, *config), run, &mut Vec::new())
}

pub fn reduce_dmp<T: Scalar>(run: &HouseholdRun<T>, config: &ReduceConfig<T>) -> Result<T> {
    reduce(&DmpReducer::new(*config), run, &mut Vec::new())
}

pub fn reduce_total_income<T: Scalar>(run: &HouseholdRun<T>) -> Result<T> {
    reduce(&TotalIncomeReducer, run, &mut Vec::new())
}

pub fn reduce_first_label<T>(run: &HouseholdRun<T>, warnings: &mut Vec<Warning>) -> Result<String> {
    reduce(&FirstLabelReducer, run, warnings)
}

pub fn reduce_chief_label<T>(run: &HouseholdRun<T>, warnings: &mut Vec<Warning>) -> Result<String> {
    reduce(&ChiefLabelReducer, run, warnings)
}

/// Result of the fused aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutput<T> {
    pub aggregates: Vec<HouseholdAggregate<T>>,
    pub warnings: Vec<Warning>,
    pub persons: usize,
}

type FusedReducer<T> = (
    SizeReducer,
    CountReducer<T>,
    ScaleSumReducer<T>,
    ScaleSumReducer<T>,
    Option<TotalIncomeReducer>,
    FirstLabelReducer,
    ChiefLabelReducer,
);

fn fused_reducer<T: Scalar>(config: &ReduceConfig<T>) -> FusedReducer<T> {
    (
        SizeReducer,
        CountReducer { config: *config },
        ScaleSumReducer::new(ScaleKind::Oxford, *config),
        ScaleSumReducer::new(ScaleKind::FaoFam, *config),
        config.income_enabled.then_some(TotalIncomeReducer),
        FirstLabelReducer,
        ChiefLabelReducer,
    )
}

/// Every household output in one sweep over key-ordered rows.
pub fn aggregate_all<T, I>(rows: I, config: &ReduceConfig<T>) -> Result<AggregateOutput<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (HouseholdKey, Member<T>)>,
{
    let mut persons = 0usize;
    let counted = rows.into_iter().inspect(|_| persons += 1);
    let mut warnings = Vec::new();
    let reduced = reduce_runs(counted, &fused_reducer(config), &mut warnings)?;
    let aggregates = reduced
        .into_iter()
        .map(|(key, (size, counts, oxford, faofam, total, area, chief))| {
            let scale_dmp = dmp_from_counts(&counts, config)?;
            let mut agg = HouseholdAggregate {
                key,
                size,
                n_adults: counts.adults,
                n_children: counts.children,
                scale_oxford: oxford,
                scale_faofam: faofam,
                scale_dmp,
                total_income: total,
                scaled_income: None,
                label_area: area,
                label_chief_gender: chief,
            };
            if let Some(total) = total {
                agg.scaled_income = Some(
                    crate::pipeline::scaled_income(total, agg.scale(config.scaled_by))
                        .map_err(|e| e.in_household(agg.key.canonical()))?,
                );
            }
            Ok(agg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateOutput {
        aggregates,
        warnings,
        persons,
    })
}

/// One of the standalone per-file passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pass {
    Size,
    Oxford,
    FaoFam,
    Dmp,
    TotalIncome,
    LabelArea,
    LabelChief,
}

impl Pass {
    pub const ALL: [Pass; 7] = [
        Pass::Size,
        Pass::Oxford,
        Pass::FaoFam,
        Pass::Dmp,
        Pass::TotalIncome,
        Pass::LabelArea,
        Pass::LabelChief,
    ];
}

/// Per-household values produced by one standalone pass.
#[derive(Debug, Clone, PartialEq)]
pub enum PassValues<T> {
    Counts(Vec<usize>),
    Numbers(Vec<T>),
    Labels(Vec<String>),
}

fn values<O>(v: Vec<(HouseholdKey, O)>) -> Vec<O> {
    v.into_iter().map(|(_, o)| o).collect()
}

/// Runs a single reducer over the rows, as its own pass.
pub fn run_pass<T, I>(
    rows: I,
    pass: Pass,
    config: &ReduceConfig<T>,
    warnings: &mut Vec<Warning>,
) -> Result<PassValues<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (HouseholdKey, Member<T>)>,
{
    Ok(match pass {
        Pass::Size => PassValues::Counts(values(reduce_runs(rows, &SizeReducer, warnings)?)),
        Pass::Oxford | Pass::FaoFam => {
            let kind = if pass == Pass::Oxford {
                ScaleKind::Oxford
            } else {
                ScaleKind::FaoFam
            };
            let r = ScaleSumReducer::new(kind, *config);
            PassValues::Numbers(values(reduce_runs(rows, &r, warnings)?))
        }
        Pass::Dmp => {
            PassValues::Numbers(values(reduce_runs(rows, &DmpReducer::new(*config), warnings)?))
        }
        Pass::TotalIncome => {
            PassValues::Numbers(values(reduce_runs(rows, &TotalIncomeReducer, warnings)?))
        }
        Pass::LabelArea => {
            PassValues::Labels(values(reduce_runs(rows, &FirstLabelReducer, warnings)?))
        }
        Pass::LabelChief => {
            PassValues::Labels(values(reduce_runs(rows, &ChiefLabelReducer, warnings)?))
        }
    })
}
