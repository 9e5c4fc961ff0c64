//! Command-line front end.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::adversary::{self, exact_report, monte_carlo_with, ExperimentReport, EXACT_KEY_LIMIT};
use crate::costs::{cost_row, render_table, CostRow, TableFormat};
use crate::dbfile;
use crate::error::{Error, Result};
use crate::field::{Database, FieldParams};
use crate::grouphash::setup_group;
use crate::net::{self, ClientConfig, Server, ServerConfig};
use crate::schemes::{ClientSetup, RetrievalResult, SchemeId};

/// Named parameter sets: `(p, t)`.
pub const PRESETS: [(&str, &str, usize); 3] =
    [("toy", "97", 2), ("small", "257", 4), ("demo", "2305843009213693951", 64)];

pub fn preset(name: &str) -> Result<(BigUint, usize)> {
    PRESETS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, p, t)| (p.parse().expect("preset prime"), *t))
        .ok_or_else(|| Error::InvalidParams(format!("unknown preset {name:?} (expected toy, small or demo)")))
}

#[derive(Parser, Debug)]
#[command(name = "vpir", version, about = "Verifiable two-server private information retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a random database file.
    GenDb(GenDbArgs),
    /// Serve one database replica.
    Serve(ServeArgs),
    /// Retrieve one record from two servers.
    Retrieve(RetrieveArgs),
    /// Run the single-malicious-server security experiment.
    Attack(AttackArgs),
    /// Print per-scheme communication costs.
    Bench(BenchArgs),
    /// Print field and group parameters.
    Params(ParamsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct FieldArgs {
    /// toy (p=97, t=2), small (p=257, t=4) or demo (p=2^61-1, t=64).
    #[arg(long)]
    pub preset: Option<String>,
    /// Prime modulus in decimal; overrides the preset.
    #[arg(long)]
    pub p: Option<BigUint>,
    /// Extension degree.
    #[arg(long)]
    pub t: Option<usize>,
}

impl FieldArgs {
    pub fn resolve(&self) -> Result<Arc<FieldParams>> {
        let (p, t) = match (&self.p, &self.preset) {
            (Some(p), _) => (p.clone(), self.t.unwrap_or(1)),
            (None, name) => {
                let (p, t) = preset(name.as_deref().unwrap_or("toy"))?;
                (p, self.t.unwrap_or(t))
            }
        };
        Ok(Arc::new(FieldParams::generate(p, t)?))
    }
}

#[derive(Args, Debug)]
pub struct GenDbArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Number of records.
    #[arg(long)]
    pub m: usize,
    #[arg(long, env = "VPIR_SEED")]
    pub seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7001")]
    pub bind: String,
    /// Test hook: corrupt every answer.
    #[arg(long, hide = true)]
    pub tamper: bool,
    #[arg(long, env = "VPIR_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RetrieveArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: SchemeId,
    /// 1-based record index.
    #[arg(long)]
    pub i: usize,
    #[arg(long, env = "VPIR_ADDR1")]
    pub addr1: String,
    #[arg(long, env = "VPIR_ADDR2")]
    pub addr2: String,
    #[arg(long, env = "VPIR_SEED")]
    pub seed: Option<u64>,
    /// Per-server timeout in seconds.
    #[arg(long, default_value_t = 10)]
    pub timeout: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: SchemeId,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub i: usize,
    /// Corrupted server.
    #[arg(long, default_value_t = 1)]
    pub j: usize,
    /// honest, random, key-guesser, point-guesser or additive:<d0>,<d1>;
    /// defaults to the guesser matching the scheme.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Enumerate the key space instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Public-verification game (pi2 only).
    #[arg(long)]
    pub public: bool,
    #[arg(long, env = "VPIR_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// With both addresses, also measure each scheme over the wire.
    #[arg(long, env = "VPIR_ADDR1")]
    pub addr1: Option<String>,
    #[arg(long, env = "VPIR_ADDR2")]
    pub addr2: Option<String>,
    #[arg(long, env = "VPIR_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeId, String> {
    s.parse::<SchemeId>().map_err(|e| e.to_string())
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Reject,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Reject => 2,
        }
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        log::info!("using seed {s}");
        s
    })
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<Status> {
    match cli.command {
        Command::GenDb(a) => gen_db(a, out),
        Command::Serve(a) => serve(a, out),
        Command::Retrieve(a) => retrieve(a, out),
        Command::Attack(a) => attack(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Params(a) => params(a, out),
    }
}

fn gen_db(a: GenDbArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    if a.m == 0 {
        return Err(Error::InvalidParams("--m must be at least 1".into()));
    }
    let field = a.field.resolve()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed_or_random(a.seed));
    let db = Database::random(field, a.m, &mut rng)?;
    match a.out {
        Some(path) => dbfile::write(&db, &path)?,
        None => out.write_all(dbfile::to_string(&db).as_bytes())?,
    }
    Ok(Status::Ok)
}

fn serve(a: ServeArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    let db = dbfile::read(&a.db)?;
    if a.tamper {
        log::warn!("tamper hook enabled: every answer will be corrupted");
    }
    let config = ServerConfig { tamper: a.tamper, seed: seed_or_random(a.seed), timeout: Some(Duration::from_secs(60)) };
    let server = Server::bind(&a.bind, db, config)?;
    writeln!(out, "listening on {}", server.local_addr()?)?;
    out.flush()?;
    server.run()?;
    Ok(Status::Ok)
}

fn cost_line(label: &str, c: &CostRow, format: Format) -> String {
    match format {
        Format::Text => format!(
            "{label}: upload_bits={} download_bits={} file_bits={} rate={}",
            c.upload_bits, c.download_bits, c.file_bits, c.rate
        ),
        Format::Csv => format!("{label},{},{},{},{}", c.upload_bits, c.download_bits, c.file_bits, c.rate),
    }
}

fn retrieve(a: RetrieveArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    let config = ClientConfig {
        addr1: a.addr1,
        addr2: a.addr2,
        scheme: a.scheme,
        i: a.i,
        timeout: Duration::from_secs(a.timeout),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed_or_random(a.seed));
    let outcome = net::client_retrieve(&config, &mut rng)?;
    let status = match &outcome.result {
        RetrievalResult::Value(x) => {
            writeln!(out, "{x}")?;
            Status::Ok
        }
        RetrievalResult::Reject => {
            writeln!(out, "REJECT")?;
            Status::Reject
        }
    };
    if a.format == Format::Csv {
        writeln!(out, "kind,upload_bits,download_bits,file_bits,rate")?;
    }
    writeln!(out, "{}", cost_line("measured", &outcome.measured, a.format))?;
    writeln!(out, "{}", cost_line("formula", &outcome.formula, a.format))?;
    Ok(status)
}

fn report_csv(r: &ExperimentReport) -> String {
    let ci = r.ci_upper.map(|u| format!("{u:e}")).unwrap_or_default();
    let bound = if r.dlog_caveat { "negl".to_string() } else { r.analytic_bound.to_string() };
    format!(
        "scheme,strategy,p_bits,trials,wins,rate,bound,ci_upper,mode\n{},{},{},{},{},{},{},{},{}\n",
        r.scheme,
        r.strategy,
        r.p_bits,
        r.trials,
        r.wins,
        r.rate,
        bound,
        ci,
        r.mode.name()
    )
}

fn attack(a: AttackArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    let field = a.field.resolve()?;
    if a.exact && *field.p() > BigUint::from(EXACT_KEY_LIMIT) {
        return Err(Error::BudgetExceeded(format!(
            "exact mode is limited to p <= {EXACT_KEY_LIMIT}; drop --exact for Monte-Carlo"
        )));
    }
    let strategy = match &a.strategy {
        Some(name) => adversary::strategy_by_name(name, &field)?,
        None => adversary::default_strategy(a.scheme),
    };
    let seed = seed_or_random(a.seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let db = Database::random(field.clone(), a.m, &mut rng)?;
    let setup = ClientSetup::new(a.scheme, field, a.m, &mut rng)?;
    let report = if a.exact {
        if a.public && a.scheme != SchemeId::Pi2 {
            return Err(Error::SchemeMismatch(format!("{} has no public verification game", a.scheme)));
        }
        exact_report(&setup, strategy.as_ref(), a.j)?
    } else {
        monte_carlo_with(&setup, strategy.as_ref(), &db, a.i, a.j, a.trials, a.public, seed)?
    };
    let text = match a.format {
        Format::Text => report.to_text(),
        Format::Csv => report_csv(&report),
    };
    out.write_all(text.as_bytes())?;
    Ok(Status::Ok)
}

fn bench(a: BenchArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    let field = a.field.resolve()?;
    let group = setup_group(field.p())?;
    let m = a.m as u64;
    let rows = SchemeId::ALL
        .iter()
        .map(|&s| cost_row(s, m, &field, Some(&group)))
        .collect::<Result<Vec<_>>>()?;
    let format = match a.format {
        Format::Text => TableFormat::Text,
        Format::Csv => TableFormat::Csv,
    };
    out.write_all(render_table(&rows, &field, format).as_bytes())?;
    if let (Some(addr1), Some(addr2)) = (a.addr1, a.addr2) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed_or_random(a.seed));
        writeln!(out)?;
        let mut measured = Vec::new();
        for scheme in SchemeId::ALL {
            let config = ClientConfig {
                addr1: addr1.clone(),
                addr2: addr2.clone(),
                scheme,
                i: 1,
                timeout: net::DEFAULT_TIMEOUT,
            };
            let o = net::client_retrieve(&config, &mut rng)?;
            if o.session.field != *field || o.session.m as u64 != m {
                return Err(Error::ParamsMismatch("servers hold a database with other parameters".into()));
            }
            measured.push(o.measured);
        }
        writeln!(out, "measured over the wire:")?;
        out.write_all(render_table(&measured, &field, format).as_bytes())?;
    }
    Ok(Status::Ok)
}

fn params(a: ParamsArgs, out: &mut dyn std::io::Write) -> Result<Status> {
    let field = a.field.resolve()?;
    let group = setup_group(field.p())?;
    let irr = field.irreducible().iter().map(|c| c.value().to_string()).collect::<Vec<_>>().join(",");
    let rows = [
        ("p", field.p().to_string()),
        ("p_bits", field.p_bits().to_string()),
        ("t", field.degree().to_string()),
        ("irr", irr),
        ("r", group.r().to_string()),
        ("r_bits", group.r_bits().to_string()),
        ("g", group.g().to_string()),
    ];
    match a.format {
        Format::Text => {
            for (k, v) in rows {
                writeln!(out, "{k:<7}{v}")?;
            }
        }
        Format::Csv => {
            writeln!(out, "key,value")?;
            for (k, v) in rows {
                writeln!(out, "{k},\"{v}\"")?;
            }
        }
    }
    Ok(Status::Ok)
}
