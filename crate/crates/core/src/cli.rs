//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{midfdr_upper_bound, midfdr_upper_bound_tarone};
use crate::error::{Error, Result};
use crate::exact::{ContingencyTable, TailDirection};
use crate::io::{read_family, read_oracle_spec, write_support, InputFormat, LoadedFamily};
use crate::numeric::fmt_sig;
use crate::oracle::{exact_fdr_with, OracleOptions, DEFAULT_OUTCOME_CAP};
use crate::procedures::{adjust, Family, Procedure};
use crate::simulation::{sweep, write_long_csv, SimulationConfig};

/// Ten studies relating treatment to an adverse event, used by `demo`.
pub const DEMO_TABLES: [(&str, ContingencyTable); 10] = [
    (
        "1",
        ContingencyTable {
            x11: 1,
            x12: 15,
            x21: 13,
            x22: 3,
        },
    ),
    (
        "2",
        ContingencyTable {
            x11: 2,
            x12: 36,
            x21: 12,
            x22: 20,
        },
    ),
    (
        "3",
        ContingencyTable {
            x11: 1,
            x12: 14,
            x21: 7,
            x22: 6,
        },
    ),
    (
        "4",
        ContingencyTable {
            x11: 10,
            x12: 30,
            x21: 12,
            x22: 8,
        },
    ),
    (
        "5",
        ContingencyTable {
            x11: 0,
            x12: 20,
            x21: 5,
            x22: 18,
        },
    ),
    (
        "6",
        ContingencyTable {
            x11: 2,
            x12: 5,
            x21: 7,
            x22: 2,
        },
    ),
    (
        "7",
        ContingencyTable {
            x11: 8,
            x12: 16,
            x21: 15,
            x22: 12,
        },
    ),
    (
        "8",
        ContingencyTable {
            x11: 3,
            x12: 11,
            x21: 7,
            x22: 15,
        },
    ),
    (
        "9",
        ContingencyTable {
            x11: 5,
            x12: 12,
            x21: 5,
            x22: 10,
        },
    ),
    (
        "10",
        ContingencyTable {
            x11: 7,
            x12: 14,
            x21: 5,
            x22: 20,
        },
    ),
];

#[derive(Debug, Parser)]
#[command(
    name = "discrete-fdr",
    version,
    about = "FDR-controlling procedures for discrete tests (BH, BL, DBH, DBL, Tarone+midP)"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adjusted p-values and rejections for every requested procedure
    Adjust(AdjustArgs),
    /// Dump the attainable p-values (atom, cdf) of every hypothesis
    Support(SupportArgs),
    /// Monte-Carlo FDR/power study; several --N values run a sweep
    Simulate(SimulateArgs),
    /// Upper bound on the FDR of BH applied to midP-values
    Bound(BoundArgs),
    /// Exact FDR/power by enumerating every joint outcome of a small family
    Oracle(OracleArgs),
    /// Run the procedures on the embedded ten-study example
    Demo(DemoArgs),
}

/// Comma-separated procedure names.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureList(pub Vec<Procedure>);

fn parse_procedures(s: &str) -> std::result::Result<ProcedureList, String> {
    let list = Procedure::parse_list(s).map_err(|e| e.to_string())?;
    if list.is_empty() {
        return Err("no procedures given".into());
    }
    Ok(ProcedureList(list))
}

fn parse_format(s: &str) -> std::result::Result<InputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tail(s: &str) -> std::result::Result<TailDirection, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_procedure(s: &str) -> std::result::Result<Procedure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV file
    #[arg(long)]
    pub input: PathBuf,
    /// Input schema: table (id,x11,x12,x21,x22), pharma
    /// (id,events,reports,total_events,total_reports) or support (id,atom,cdf,observed)
    #[arg(long, default_value = "table", value_parser = parse_format)]
    pub format: InputFormat,
    /// One-sided alternative: less or greater [default: less, greater for pharma]
    #[arg(long, value_parser = parse_tail)]
    pub tail: Option<TailDirection>,
}

impl InputArgs {
    fn load(&self) -> Result<LoadedFamily> {
        let tail = self.tail.unwrap_or(self.format.default_tail());
        read_family(File::open(&self.input)?, self.format, tail)
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Significant digits of printed numbers; 0 writes full precision
    #[arg(long, default_value_t = 6)]
    pub digits: usize,
}

impl OutputArgs {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn digits(&self) -> Option<usize> {
        (self.digits > 0).then_some(self.digits)
    }
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated list from bh, midp-bh, dbh, bl, midp-bl, dbl, tmidp-bh, tmidp-bl
    #[arg(long, default_value = "bh,dbh,tmidp-bh,bl,dbl,tmidp-bl", value_parser = parse_procedures)]
    pub procedures: ProcedureList,
    /// Nominal FDR level
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Tarone constant c >= 1
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of hypotheses
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Subjects per group; a comma-separated list runs a sweep
    #[arg(long = "N", value_delimiter = ',', default_value = "100")]
    pub n: Vec<u64>,
    /// True nulls with the low success probability (0.01)
    #[arg(long = "null-low", default_value_t = 4)]
    pub null_low: usize,
    /// True nulls with the high success probability (0.1)
    #[arg(long = "null-high", default_value_t = 15)]
    pub null_high: usize,
    /// False nulls (0.1 vs 0.3)
    #[arg(long = "false", default_value_t = 1)]
    pub n_false: usize,
    /// Equicorrelation of the latent Gaussian responses
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "less", value_parser = parse_tail)]
    pub tail: TailDirection,
    #[arg(long, default_value = "dbh,tmidp-bh,bh,dbl,tmidp-bl,bl", value_parser = parse_procedures)]
    pub procedures: ProcedureList,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Bound the Tarone+midP BH procedure instead (family size m(K))
    #[arg(long)]
    pub tarone: bool,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Support-format CSV with is_null (and gen_prob for false nulls) columns
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_parser = parse_procedure)]
    pub procedure: Procedure,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Refuse families with more joint outcomes than this
    #[arg(long, default_value_t = DEFAULT_OUTCOME_CAP)]
    pub cap: u128,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "bh,midp-bh,dbh,bl,midp-bl,dbl", value_parser = parse_procedures)]
    pub procedures: ProcedureList,
    #[arg(long, default_value_t = 0.1)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Adjust(a) => cmd_adjust(&a),
        Command::Support(a) => cmd_support(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bound(a) => cmd_bound(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Demo(a) => cmd_demo(&a),
    }
}

fn num(x: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => fmt_sig(x, d),
        None => format!("{x}"),
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("--q {q} must lie in (0, 1)")))
    }
}

/// Writes the adjusted p-value table: id, p-value, midP-value, then one
/// adjusted column and one 0/1 rejection column per procedure.
pub fn write_adjusted<W: Write>(
    mut out: W,
    loaded: &LoadedFamily,
    procedures: &[Procedure],
    q: f64,
    c: f64,
    digits: Option<usize>,
) -> Result<()> {
    check_q(q)?;
    let family = &loaded.family;
    let adjusted = procedures
        .iter()
        .map(|&p| adjust(family, p, q, c))
        .collect::<Result<Vec<_>>>()?;

    if procedures.contains(&Procedure::Dbh) {
        eprintln!("note: DBH does not guarantee FDR control at the nominal level");
    }
    for (id, r) in loaded.ids.iter().zip(family.results()) {
        if r.null.is_degenerate() {
            eprintln!("note: '{id}' has a degenerate null (a single attainable p-value of 1)");
        }
    }

    write!(out, "id,p_value,mid_p")?;
    for p in procedures {
        write!(out, ",{p},{p}_reject")?;
    }
    writeln!(out)?;
    for (i, (id, r)) in loaded.ids.iter().zip(family.results()).enumerate() {
        write!(
            out,
            "{id},{},{}",
            num(r.p_value, digits),
            num(r.mid_p, digits)
        )?;
        for a in &adjusted {
            let v = a.values[i];
            write!(
                out,
                ",{},{}",
                num(v, digits),
                u8::from(v <= q + crate::numeric::TOL)
            )?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_adjust(args: &AdjustArgs) -> Result<()> {
    let loaded = args.input.load()?;
    write_adjusted(
        args.output.writer()?,
        &loaded,
        &args.procedures.0,
        args.q,
        args.c,
        args.output.digits(),
    )
}

fn cmd_support(args: &SupportArgs) -> Result<()> {
    let loaded = args.input.load()?;
    let mut out = args.output.writer()?;
    write_support(&mut out, &loaded, args.output.digits())?;
    out.flush()?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let configs: Vec<SimulationConfig> = args
        .n
        .iter()
        .map(|&n| SimulationConfig {
            m: args.m,
            n_per_group: n,
            n_null_low: args.null_low,
            n_null_high: args.null_high,
            n_false: args.n_false,
            rho: args.rho,
            reps: args.reps,
            q: args.q,
            c: args.c,
            seed: args.seed,
            tail: args.tail,
            ..SimulationConfig::default()
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let summaries = sweep(&configs, &args.procedures.0)?;
    let mut out = args.output.writer()?;
    write_long_csv(&summaries, &mut out, args.output.digits())?;
    out.flush()?;
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    check_q(args.q)?;
    let loaded = args.input.load()?;
    let bound = if args.tarone {
        midfdr_upper_bound_tarone(&loaded.family, args.q, args.c)?
    } else {
        midfdr_upper_bound(&loaded.family, args.q)?
    };
    let d = args.output.digits();
    let mut out = args.output.writer()?;
    writeln!(out, "q={}", num(bound.q, d))?;
    writeln!(out, "m={}", bound.m)?;
    writeln!(out, "bound={}", num(bound.bound_all, d))?;
    writeln!(out, "id,epsilon")?;
    for (&i, eps) in bound.indices.iter().zip(&bound.epsilons) {
        writeln!(out, "{},{}", loaded.ids[i], num(*eps, d))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    check_q(args.q)?;
    let specs = read_oracle_spec(File::open(&args.spec)?)?;
    let options = OracleOptions {
        cap: args.cap,
        c: args.c,
    };
    let r = exact_fdr_with(&specs, args.procedure, args.q, &options)?;
    if args.procedure == Procedure::Dbh {
        eprintln!("note: DBH does not guarantee FDR control at the nominal level");
    }
    let d = args.output.digits();
    let mut out = args.output.writer()?;
    writeln!(out, "procedure={}", args.procedure)?;
    writeln!(out, "q={}", num(args.q, d))?;
    writeln!(out, "fdr={}", num(r.fdr, d))?;
    writeln!(out, "power={}", num(r.power, d))?;
    writeln!(out, "outcomes={}", r.outcome_count)?;
    out.flush()?;
    Ok(())
}

/// Test results of the embedded example under the LESS tail.
pub fn demo_family() -> LoadedFamily {
    let results = DEMO_TABLES
        .iter()
        .map(|(_, t)| crate::exact::fisher_exact(t, TailDirection::Less))
        .collect();
    LoadedFamily {
        ids: DEMO_TABLES.iter().map(|(id, _)| id.to_string()).collect(),
        tables: DEMO_TABLES.iter().map(|(_, t)| Some(*t)).collect(),
        family: Family::new(results).expect("non-empty"),
    }
}

fn cmd_demo(args: &DemoArgs) -> Result<()> {
    write_adjusted(
        args.output.writer()?,
        &demo_family(),
        &args.procedures.0,
        args.q,
        args.c,
        args.output.digits(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_procedure_is_a_usage_error() {
        let err =
            Cli::try_parse_from(["discrete-fdr", "demo", "--procedures", "bh,holm"]).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::ValueValidation);
    }

    #[test]
    fn unknown_flag_fails() {
        assert!(Cli::try_parse_from(["discrete-fdr", "demo", "--bogus"]).is_err());
    }

    #[test]
    fn sweep_flag_accepts_lists() {
        let cli = Cli::try_parse_from(["discrete-fdr", "simulate", "--N", "25,50"]).unwrap();
        match cli.command {
            Command::Simulate(a) => assert_eq!(a.n, vec![25, 50]),
            _ => unreachable!(),
        }
    }
}
