use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdbprep::aggregate::Pass;
use hdbprep::pipeline::{self, write_household_table, ConfigFile, Overrides, PipelineConfig};
use hdbprep::synth::{generate, SynthIncome, SynthParams};
use hdbprep::{Error, Result, ScaleKind};

#[derive(Parser)]
#[command(name = "hdbprep", version, about = "Household-level variables from person-level survey files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write identhousehold.txt from the region, milieu, cluster and household columns.
    Identify(Common),
    /// Write monthlyincome.txt from the income column(s).
    RecodeIncome(Common),
    /// Run per-household passes on their own, reading identhousehold.txt from the output directory.
    Aggregate {
        #[command(flatten)]
        common: Common,
        /// Passes to run (repeatable); all of them when omitted.
        #[arg(long = "pass", value_enum)]
        passes: Vec<PassArg>,
    },
    /// Full pipeline: identify, recode, aggregate and write every output.
    Run(Common),
    /// Generate a synthetic database with ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Config file; relative paths in it are resolved against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Reproduce the original ELIM1 recode table, unknown codes included.
    #[arg(long)]
    paper_literal: bool,
    /// Write 0.99 in place of weights that cannot be computed.
    #[arg(long)]
    paper_sentinel: bool,
    /// Stable-sort persons by household key before grouping.
    #[arg(long)]
    sort: bool,
    #[arg(long)]
    dmp_c: Option<f64>,
    #[arg(long)]
    dmp_s: Option<f64>,
    /// Scale used for scaled income.
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Header lines to skip at the top of each column file.
    #[arg(long)]
    skip_header: Option<usize>,
    /// Compute in single precision.
    #[arg(long)]
    f32: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    households: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Inject households without a chief and with two chiefs.
    #[arg(long)]
    anomalies: bool,
    /// Restart household numbering in every cluster.
    #[arg(long)]
    renumber: bool,
    #[arg(long, value_enum, default_value_t = IncomeArg::Letters)]
    income: IncomeArg,
    /// Also write persons.csv, a single delimited table.
    #[arg(long)]
    table: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Oxford,
    Faofam,
    Dmp,
}

impl From<ScaleArg> for ScaleKind {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Oxford => ScaleKind::Oxford,
            ScaleArg::Faofam => ScaleKind::FaoFam,
            ScaleArg::Dmp => ScaleKind::Dmp,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PassArg {
    Size,
    Oxford,
    Faofam,
    Dmp,
    TotalIncome,
    LabelArea,
    LabelChief,
}

impl From<PassArg> for Pass {
    fn from(p: PassArg) -> Self {
        match p {
            PassArg::Size => Pass::Size,
            PassArg::Oxford => Pass::Oxford,
            PassArg::Faofam => Pass::FaoFam,
            PassArg::Dmp => Pass::Dmp,
            PassArg::TotalIncome => Pass::TotalIncome,
            PassArg::LabelArea => Pass::LabelArea,
            PassArg::LabelChief => Pass::LabelChief,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IncomeArg {
    None,
    Letters,
    Numeric,
}

impl Common {
    fn config_file(&self) -> Result<ConfigFile> {
        let mut file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        file.apply(&Overrides {
            out_dir: self.out_dir.clone(),
            paper_literal: self.paper_literal,
            paper_sentinel: self.paper_sentinel,
            sort: self.sort,
            dmp_c: self.dmp_c,
            dmp_s: self.dmp_s,
            scale: self.scale.map(Into::into),
            skip_header: self.skip_header,
        });
        Ok(file)
    }
}

fn with_config<F64, F32>(common: &Common, f64_run: F64, f32_run: F32) -> Result<pipeline::RunReport>
where
    F64: FnOnce(&PipelineConfig<f64>) -> Result<pipeline::RunReport>,
    F32: FnOnce(&PipelineConfig<f32>) -> Result<pipeline::RunReport>,
{
    let file = common.config_file()?;
    if common.f32 {
        f32_run(&file.resolve()?)
    } else {
        f64_run(&file.resolve()?)
    }
}

const SYNTH_CONFIG: &str = "hdbprep.toml";
const GROUND_TRUTH: &str = "groundtruth.csv";

fn synth(args: &SynthArgs) -> Result<pipeline::RunReport> {
    let params = SynthParams {
        households: args.households,
        anomalies: args.anomalies,
        renumber_households: args.renumber,
        income: match args.income {
            IncomeArg::None => SynthIncome::None,
            IncomeArg::Letters => SynthIncome::Letters,
            IncomeArg::Numeric => SynthIncome::Numeric,
        },
        seed: args.seed,
        ..Default::default()
    };
    let db = generate(&params)?;
    let dir = &args.out_dir;
    db.write_columns(dir)?;
    let mut outputs = vec![dir.clone()];
    if args.table {
        let p = dir.join("persons.csv");
        db.write_table(&p)?;
        outputs.push(p);
    }
    let truth = dir.join(GROUND_TRUTH);
    write_household_table(&db.truth, &truth)?;
    outputs.push(truth);

    let mode = match args.income {
        IncomeArg::None => "none",
        IncomeArg::Letters => "letters",
        IncomeArg::Numeric => "numeric",
    };
    let config = format!(
        "[input]\nformat = \"columns\"\ndir = \".\"\n\n[income]\nmode = \"{mode}\"\n\n[output]\ndir = \"out\"\n"
    );
    let cfg_path = dir.join(SYNTH_CONFIG);
    write_file(&cfg_path, &config)?;
    outputs.push(cfg_path);

    Ok(pipeline::RunReport {
        persons: db.persons.len(),
        households: db.truth.len(),
        outputs,
        ..Default::default()
    })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Identify(c) => with_config(c, pipeline::identify, pipeline::identify),
        Command::RecodeIncome(c) => with_config(c, pipeline::recode_income, pipeline::recode_income),
        Command::Aggregate { common, passes } => common.config_file().and_then(|file| {
            // without explicit passes: every pass the config supports
            let chosen = |income: bool, scales: &[ScaleKind]| -> Vec<Pass> {
                if !passes.is_empty() {
                    return passes.iter().map(|p| (*p).into()).collect();
                }
                Pass::ALL
                    .into_iter()
                    .filter(|p| match p {
                        Pass::TotalIncome => income,
                        Pass::Oxford => scales.contains(&ScaleKind::Oxford),
                        Pass::FaoFam => scales.contains(&ScaleKind::FaoFam),
                        Pass::Dmp => scales.contains(&ScaleKind::Dmp),
                        _ => true,
                    })
                    .collect()
            };
            if common.f32 {
                let cfg = file.resolve::<f32>()?;
                pipeline::aggregate_passes(&cfg, &chosen(cfg.income_enabled(), &cfg.scales))
            } else {
                let cfg = file.resolve::<f64>()?;
                pipeline::aggregate_passes(&cfg, &chosen(cfg.income_enabled(), &cfg.scales))
            }
        }),
        Command::Run(c) => with_config(c, pipeline::run_pipeline, pipeline::run_pipeline),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
