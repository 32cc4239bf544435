use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use nondim_core::expr::Symbol;
use nondim_core::odesys::{parse_model, Model};
use nondim_core::reduce::{reduce_system, report_json, ReduceConfig};
use nondim_core::symfind::{find_symmetries, Backend, FindConfig, Kind, SymmetryBasis};

const EXIT_INPUT: u8 = 2;
const EXIT_NONE: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "nondim", version, about = "Scaling and translation symmetries of rational ODE models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the scaling and/or translation generators of a model.
    Symmetries {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        kind: KindArg,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rewrite a model in invariant coordinates with fewer parameters.
    Reduce {
        file: PathBuf,
        /// Parameters to normalize first, comma separated.
        #[arg(long, value_delimiter = ',')]
        prefer: Vec<String>,
        /// Fail with exit code 4 if the exact check does not pass.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Scale,
    Translation,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Points,
    Series,
}

#[derive(Args)]
struct RunArgs {
    /// Random seed; drawn from the OS when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample coordinates from [-bound, bound].
    #[arg(long, default_value_t = 65536)]
    bound: u64,
    /// Verification points per generator.
    #[arg(long, default_value_t = 8)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = BackendArg::Points)]
    backend: BackendArg,
    #[arg(long)]
    jet_order: Option<usize>,
    /// Full LLL reduction of the exponent basis.
    #[arg(long)]
    lll: bool,
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn find_config(&self) -> FindConfig {
        let seed = self.seed.unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        });
        FindConfig {
            seed,
            bound: self.bound,
            trials: self.trials,
            lll: self.lll,
            backend: match self.backend {
                BackendArg::Points => Backend::Points,
                BackendArg::Series => Backend::Series,
            },
            jet_order: self.jet_order,
            ..FindConfig::default()
        }
    }
}

fn load(file: &PathBuf) -> Result<Model, ExitCode> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        ExitCode::from(EXIT_INPUT)
    })?;
    parse_model(&text).map_err(|e| {
        eprintln!("{}:{e}", file.display());
        ExitCode::from(EXIT_INPUT)
    })
}

fn table(basis: &SymmetryBasis) -> String {
    let header: Vec<String> = basis.coordinates.iter().map(ToString::to_string).collect();
    let rows: Vec<Vec<String>> = basis.generators.iter().map(|g| g.alpha.iter().map(ToString::to_string).collect()).collect();
    let width: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(1))
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(s, w)| format!("{s:>w$}")).collect();
        format!("  {}\n", padded.join("  "))
    };
    let mut out = line(&header);
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn symmetries(file: &PathBuf, kind: KindArg, run: &RunArgs) -> ExitCode {
    let model = match load(file) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let kinds = match kind {
        KindArg::Scale => vec![Kind::Scale],
        KindArg::Translation => vec![Kind::Translation],
        KindArg::Both => vec![Kind::Scale, Kind::Translation],
    };
    let config = run.find_config();
    let mut found = Vec::new();
    for k in kinds {
        match find_symmetries(&model, k, &config) {
            Ok(b) => found.push(b),
            Err(e) => {
                eprintln!("{}: {e}", file.display());
                return ExitCode::from(EXIT_INPUT);
            }
        }
    }
    let total: usize = found.iter().map(SymmetryBasis::m).sum();
    if run.json {
        let groups: Vec<_> = found
            .iter()
            .map(|b| {
                json!({
                    "kind": b.kind.to_string(),
                    "m": b.m(),
                    "coordinates": b.coordinates,
                    "generators": b.generators.iter().map(|g| g.alpha.iter().map(ToString::to_string).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "operators": b.generators.iter().map(|g| g.describe(&b.coordinates)).collect::<Vec<_>>(),
                })
            })
            .collect();
        let doc = json!({"model": model.name(), "groups": groups});
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        for b in &found {
            println!("{} {} symmetries: m = {}", model.name(), b.kind, b.m());
            if b.m() == 0 {
                println!("  none found");
                continue;
            }
            print!("{}", table(b));
            for g in &b.generators {
                println!("  {}", g.describe(&b.coordinates));
            }
        }
    }
    if total == 0 {
        ExitCode::from(EXIT_NONE)
    } else {
        ExitCode::SUCCESS
    }
}

fn reduce(file: &PathBuf, prefer: &[String], check: bool, run: &RunArgs) -> ExitCode {
    let model = match load(file) {
        Ok(m) => m,
        Err(code) => return code,
    };
    if let Some(bad) = prefer.iter().find(|p| !model.is_param(&Symbol::new(p))) {
        eprintln!("{}: --prefer: `{bad}` is not a parameter", file.display());
        return ExitCode::from(EXIT_INPUT);
    }
    let prefer: Vec<Symbol> = prefer.iter().map(|p| Symbol::new(p)).collect();
    let config = ReduceConfig { find: run.find_config(), ..ReduceConfig::default() };
    let result = match reduce_system(&model, &prefer, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", file.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if run.json {
        println!("{}", serde_json::to_string_pretty(&report_json(&result)).expect("json"));
    } else {
        print!("{}", result.reduced.render());
        println!("# removed parameters: {}", result.total_m);
        for s in &result.stages {
            for (new, def) in &s.definitions {
                println!("# {new} = {def}");
            }
        }
        for a in &result.assumptions {
            println!("# assuming {a}");
        }
        let verdict = |ok: bool| if ok { "pass" } else { "fail" };
        println!(
            "# check: chain rule {}, invariance {}",
            verdict(result.check.chain_rule),
            verdict(result.check.invariance)
        );
        if let Some(w) = &result.check.witness {
            println!("# witness: {w}");
        }
    }
    if check && !result.check.passed() {
        return ExitCode::from(EXIT_CHECK);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Symmetries { file, kind, run } => symmetries(file, *kind, run),
        Command::Reduce { file, prefer, check, run } => reduce(file, prefer, *check, run),
    }
}
