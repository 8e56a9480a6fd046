use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use rawq_core::agg::Strategy;
use rawq_core::bench::{run_bench, Suite};
use rawq_core::datagen::tpch::generate_tpch;
use rawq_core::datagen::{generate, write_dataset, DatasetSpec, Distribution, ValueRule};
use rawq_core::storage::{Catalog, Format};
use rawq_core::udf::UdfRegistry;
use rawq_core::{Engine, Error, ExecConfig};

#[derive(Parser)]
#[command(name = "rawq", version, about = "SQL over raw delimited files")]
struct Cli {
    #[command(flatten)]
    engine: EngineFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineFlags {
    /// Catalog config (TOML table list).
    #[arg(long, global = true, default_value = "catalog.toml")]
    catalog: PathBuf,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value_t = 4096)]
    partition_size: usize,
    /// Group-by strategy, e.g. partition_and_aggregate, shared, plat.
    #[arg(long, global = true, default_value = "partition_and_aggregate")]
    strategy: String,
    /// Script of register_udf(...) lines.
    #[arg(long, global = true)]
    udf_script: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Interactive SQL prompt; statements end with `;`.
    Repl,
    /// Run one statement and print the result table.
    Query {
        sql: String,
        /// Also print the per-task execution trace.
        #[arg(long)]
        trace: bool,
    },
    /// Print the engine plan tree.
    Explain { sql: String },
    /// Generate a synthetic key dataset or TPC-H tables.
    Datagen(DatagenArgs),
    /// Run a query suite and report timings and counters.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DatagenArgs {
    /// Generate TPC-H tables plus catalog.toml into --out.
    #[arg(long)]
    tpch: bool,
    #[arg(long, default_value_t = 0.01)]
    sf: f64,
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    c: Option<u64>,
    /// Zipf exponent.
    #[arg(long, default_value_t = 0.5)]
    e: f64,
    /// Moving-cluster window.
    #[arg(long = "W", alias = "w", default_value_t = 64)]
    window: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "tpch")]
    suite: String,
    #[arg(long, default_value_t = 0.01)]
    sf: f64,
    /// Cross-check every result against the reference evaluator.
    #[arg(long)]
    verify: bool,
    /// Generate TPC-H data at --sf into a scratch directory instead of
    /// using --catalog.
    #[arg(long)]
    generate: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exec_config(flags: &EngineFlags) -> Result<ExecConfig, String> {
    let strategy: Strategy = flags.strategy.parse().map_err(|e| format!("{e}"))?;
    let mut config = ExecConfig {
        partition_size: flags.partition_size,
        strategy,
        ..ExecConfig::default()
    };
    if let Some(w) = flags.workers {
        config.workers = w;
    }
    if config.workers == 0 || config.partition_size == 0 {
        return Err("--workers and --partition-size must be positive".into());
    }
    Ok(config)
}

fn open_engine(flags: &EngineFlags, catalog_path: &Path) -> Result<Engine, Error> {
    let config = exec_config(flags).map_err(Error::Config)?;
    let catalog = Catalog::from_config_file(catalog_path)?;
    let udfs = UdfRegistry::with_suite();
    if let Some(path) = &flags.udf_script {
        let text = std::fs::read_to_string(path)
            .map_err(|e| rawq_core::udf::UdfError::Script {
                line: 0,
                message: format!("{}: {e}", path.display()),
            })?;
        udfs.load_script(&text)?;
    }
    Ok(Engine::new(Arc::new(catalog), Arc::new(udfs), config))
}

/// Malformed SQL is reported before the catalog is touched.
fn check_syntax(sql: &str) -> Result<(), Error> {
    rawq_core::sql::parse(sql)?;
    Ok(())
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_syntax() { 2 } else { 1 })
}

fn repl(engine: &Engine) {
    let stdin = io::stdin();
    let mut buf = String::new();
    let prompt = |cont: bool| {
        print!("{}", if cont { "   ...> " } else { "rawq> " });
        let _ = io::stdout().flush();
    };
    prompt(false);
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let t = line.trim();
        if buf.is_empty() && matches!(t, "\\q" | "quit" | "exit") {
            break;
        }
        buf.push_str(&line);
        buf.push('\n');
        if !t.ends_with(';') {
            prompt(!buf.trim().is_empty());
            if buf.trim().is_empty() {
                buf.clear();
            }
            continue;
        }
        let stmt = std::mem::take(&mut buf);
        let stmt = stmt.trim();
        let outcome = match stmt.get(..8) {
            Some(head) if head.eq_ignore_ascii_case("explain ") => {
                engine.explain(&stmt[8..]).map(|s| s.to_string())
            }
            _ => engine.query(stmt).map(|r| r.to_table()),
        };
        match outcome {
            Ok(text) => print!("{text}"),
            Err(e) => eprintln!("error: {e}"),
        }
        prompt(false);
    }
}

fn datagen(args: &DatagenArgs) -> Result<String, Error> {
    if args.tpch {
        let sizes = generate_tpch(&args.out, args.sf, args.seed)?;
        return Ok(format!(
            "wrote TPC-H sf={} to {} (orders={}, customer={}, part={}, supplier={})\n",
            args.sf,
            args.out.display(),
            sizes.orders,
            sizes.customer,
            sizes.part,
            sizes.supplier
        ));
    }
    let missing = |f: &str| rawq_core::datagen::DatagenError::InvalidSpec(format!("--{f} is required"));
    let dist: Distribution = args.dist.as_deref().ok_or_else(|| missing("dist"))?.parse()?;
    let r = args.r.ok_or_else(|| missing("r"))?;
    let c = args.c.ok_or_else(|| missing("c"))?;
    let format: Format = args.format.parse()?;
    let mut spec = DatasetSpec::new(dist, r, c, args.seed);
    spec.e = args.e;
    spec.w = args.window;
    let keys = generate(&spec)?;
    write_dataset(&keys, ValueRule::Key, &args.out, format)?;
    Ok(format!("wrote {} records ({}) to {}\n", keys.len(), dist.name(), args.out.display()))
}

fn bench(flags: &EngineFlags, args: &BenchArgs) -> Result<String, Error> {
    let suite: Suite = args
        .suite
        .parse()
        .map_err(Error::Config)?;
    let scratch;
    let catalog = if args.generate {
        scratch = std::env::temp_dir().join(format!("rawq-bench-{}-{}", args.sf, std::process::id()));
        generate_tpch(&scratch, args.sf, 0)?;
        scratch.join("catalog.toml")
    } else {
        flags.catalog.clone()
    };
    let engine = open_engine(flags, &catalog)?;
    let report = run_bench(&engine, suite, args.sf, args.verify)?;
    if args.generate {
        let _ = std::fs::remove_dir_all(catalog.parent().unwrap());
    }
    let text = report.to_text();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Ok(format!("wrote report to {}\n", path.display()))
        }
        None => Ok(text),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = exec_config(&cli.engine) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Repl => match open_engine(&cli.engine, &cli.engine.catalog) {
            Ok(engine) => {
                repl(&engine);
                Ok(String::new())
            }
            Err(e) => Err(e),
        },
        Command::Query { sql, trace } => check_syntax(sql)
            .and_then(|_| open_engine(&cli.engine, &cli.engine.catalog))
            .and_then(|e| e.query(sql))
            .map(|r| {
                let mut out = r.to_table();
                if *trace {
                    out.push_str(&r.trace);
                }
                out
            }),
        Command::Explain { sql } => {
            check_syntax(sql)
                .and_then(|_| open_engine(&cli.engine, &cli.engine.catalog))
                .and_then(|e| e.explain(sql))
        }
        Command::Datagen(args) => datagen(args),
        Command::Bench(args) => bench(&cli.engine, args),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
