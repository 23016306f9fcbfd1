use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_rational::BigRational;
use twostep_lab::harness::{
    attack_succeeded, bound_calc, run_sweep, run_trial, summary_csv, verify_cmd, write_jsonl, BoundQuery,
    ExperimentConfig, VerifySelector,
};
use twostep_lab::hashing::FamilyKind;

#[derive(Parser)]
#[command(name = "twostep", version, about = "Attack laboratory for two-step MAC authenticated QKD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded Monte Carlo sweep, written as JSON lines.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Also write the two-line CSV summary here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bound calculators, optionally with a Monte Carlo estimate.
    Bound(BoundArgs),
    /// Brute-force family verifiers.
    Verify(VerifyArgs),
    /// One verbose session: every message Eve handles and the outcome.
    AttackTrace {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Trial index; the session seed derives from --seed and this.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<String>,
    #[arg(long)]
    auth: Option<String>,
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    z_bits: Option<u32>,
    #[arg(long)]
    t_bits: Option<u32>,
    #[arg(long)]
    w_max: Option<usize>,
    #[arg(long)]
    k_budget: Option<usize>,
    #[arg(long)]
    ec_code: Option<usize>,
    #[arg(long)]
    vacuum: Option<f64>,
    #[arg(long)]
    distort: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    loss: Option<f64>,
    #[arg(long)]
    flip: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BoundArgs {
    /// collision-ball, mask-crafting, subseq-exact, key-consumption or composition
    kind: String,
    #[arg(long, default_value_t = 64)]
    ell: u64,
    #[arg(long, default_value_t = 3)]
    w: u64,
    #[arg(long, default_value_t = 12)]
    z_bits: u32,
    #[arg(long, default_value_t = 64)]
    t_bits: u32,
    #[arg(long, default_value_t = 1024)]
    n: u64,
    #[arg(long, default_value_t = 64)]
    k: u64,
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Message length for key-consumption, as digits or 10^e.
    #[arg(long)]
    message_bits: Option<String>,
    /// eps' for composition, as a fraction like 1/2.
    #[arg(long, default_value = "1/2")]
    eps_prime: String,
    #[arg(long, default_value_t = 2)]
    range: usize,
    /// Monte Carlo trials next to the bound (collision-ball, mask-crafting, subseq-exact).
    #[arg(long)]
    mc: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// all-functions, constant, su2, poly, composed or composed-collapsing
    selector: String,
    #[arg(long, default_value_t = 4)]
    domain: usize,
    #[arg(long, default_value_t = 2)]
    range: usize,
    /// au2, su2 or asu2 (all-functions only)
    #[arg(long, default_value = "au2")]
    kind: String,
    /// Claimed epsilon for all-functions, as a fraction.
    #[arg(long, default_value = "1/2")]
    epsilon: String,
    #[arg(long, default_value_t = 2)]
    z_bits: u32,
    #[arg(long, default_value_t = 1)]
    t_bits: u32,
    #[arg(long, default_value_t = 4)]
    message_bits: usize,
    /// Input count of F for the composed selectors.
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long)]
    json: bool,
}

/// Bad input; exits with code 2.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig, UsageError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, Option<String>); 16] = [
            ("protocol", self.protocol.clone()),
            ("auth", self.auth.clone()),
            ("attack", self.attack.clone()),
            ("n", self.n.map(|v| v.to_string())),
            ("z_bits", self.z_bits.map(|v| v.to_string())),
            ("t_bits", self.t_bits.map(|v| v.to_string())),
            ("w_max", self.w_max.map(|v| v.to_string())),
            ("k_budget", self.k_budget.map(|v| v.to_string())),
            ("ec_code", self.ec_code.map(|v| v.to_string())),
            ("vacuum", self.vacuum.map(|v| v.to_string())),
            ("distort", self.distort.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("loss", self.loss.map(|v| v.to_string())),
            ("flip", self.flip.map(|v| v.to_string())),
            ("out", self.out.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_fraction(name: &str, s: &str) -> Result<BigRational, UsageError> {
    s.trim().parse().map_err(|_| UsageError(format!("{name}: not a fraction: {s}")))
}

fn parse_big(s: &str) -> Result<BigUint, UsageError> {
    let bad = || UsageError(format!("message-bits: not a count: {s}"));
    match s.split_once('^') {
        Some((b, e)) => {
            let b: BigUint = b.trim().parse().map_err(|_| bad())?;
            Ok(b.pow(e.trim().parse::<u32>().map_err(|_| bad())?))
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn bound_query(a: &BoundArgs) -> Result<BoundQuery, UsageError> {
    Ok(match a.kind.as_str() {
        "collision-ball" => BoundQuery::CollisionBall {
            ell: a.ell,
            w: a.w,
            z_bits: a.z_bits,
        },
        "mask-crafting" => BoundQuery::MaskCrafting { n: a.n, k: a.k },
        "subseq-exact" => BoundQuery::SubseqExact {
            m: a.m,
            n: a.n as usize,
        },
        "key-consumption" => BoundQuery::KeyConsumption {
            z_bits: a.z_bits,
            t_bits: a.t_bits,
            message_bits: a.message_bits.as_deref().map(parse_big).transpose()?,
        },
        "composition" => BoundQuery::Composition {
            eps_prime: parse_fraction("eps-prime", &a.eps_prime)?,
            range: a.range,
        },
        other => return Err(UsageError(format!("unknown bound kind {other:?}"))),
    })
}

fn verify_selector(a: &VerifyArgs) -> Result<VerifySelector, UsageError> {
    Ok(match a.selector.as_str() {
        "all-functions" => VerifySelector::AllFunctions {
            domain: a.domain,
            range: a.range,
            kind: match a.kind.to_ascii_lowercase().as_str() {
                "au2" => FamilyKind::Au2,
                "su2" => FamilyKind::Su2,
                "asu2" => FamilyKind::Asu2,
                k => return Err(UsageError(format!("unknown family kind {k:?}"))),
            },
            epsilon: parse_fraction("epsilon", &a.epsilon)?,
        },
        "constant" => VerifySelector::Constant {
            domain: a.domain,
            range: a.range,
        },
        "su2" => VerifySelector::Su2 {
            z_bits: a.z_bits,
            t_bits: a.t_bits,
        },
        "poly" => VerifySelector::Poly {
            z_bits: a.z_bits,
            message_bits: a.message_bits,
        },
        "composed" => VerifySelector::Composed {
            m: a.m,
            z_bits: a.z_bits,
            t_bits: a.t_bits,
        },
        "composed-collapsing" => VerifySelector::ComposedCollapsing {
            m: a.m,
            z_bits: a.z_bits,
            t_bits: a.t_bits,
        },
        other => return Err(UsageError(format!("unknown selector {other:?}"))),
    })
}

fn run(exp: &ExperimentArgs, csv: Option<&PathBuf>) -> Result<(), UsageError> {
    let cfg = exp.config()?;
    let result = run_sweep(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| UsageError(format!("{path}: {e}")))?;
            let mut w = BufWriter::new(file);
            write_jsonl(&result, &mut w)?;
            w.flush()?;
            let s = &result.summary;
            let rate = s.success_rate.map_or("n/a".into(), |r| format!("{r:.4}"));
            println!("{} trials, {} successes, rate {rate}, wrote {path}", s.trials, s.successes);
        }
        None => write_jsonl(&result, io::stdout().lock())?,
    }
    if let Some(path) = csv {
        std::fs::write(path, summary_csv(&result)).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn trace(exp: &ExperimentArgs, trial: u64) -> Result<(), UsageError> {
    let cfg = exp.config()?;
    let (seed, out) = run_trial(&cfg, trial)?;
    println!(
        "protocol {} auth {} attack {} n {} z {} t {} seed {seed:#018x}",
        cfg.variant().name(),
        cfg.auth,
        cfg.attack,
        cfg.n,
        cfg.z_bits,
        cfg.t_bits
    );
    for e in &out.events {
        let mut line = format!("{:<5} {:<3}", e.direction, e.msg_type);
        if e.forged {
            line.push_str(" forged");
        }
        if let Some(w) = e.weight {
            line.push_str(&format!(" weight={w}"));
        }
        if let Some(c) = e.candidates_tested {
            line.push_str(&format!(" tested={c}"));
        }
        if let Some(a) = e.accepted {
            line.push_str(if a { " accepted" } else { " rejected" });
        }
        if let Some(n) = &e.note {
            line.push_str(&format!(" ({n})"));
        }
        println!("{line}");
    }
    let len = |k: &Option<twostep_lab::BitString>| k.as_ref().map_or("-".into(), |k| k.len().to_string());
    println!("relation {:?}", out.relation);
    if let Some(c) = out.correlation_case {
        println!("case {c}");
    }
    if let Some(a) = &out.abort_by {
        println!("abort {:?} by {:?}", a.kind, a.party);
    }
    if let Some(q) = out.qber_observed {
        println!("qber {q:.4}");
    }
    if let Some(g) = out.eve_guessed_bits {
        println!("guessed bits {g}");
    }
    println!("final key bits A {} B {}", len(&out.final_a), len(&out.final_b));
    println!("key bits consumed {} tags sent {}", out.key_bits_consumed, out.tags_sent);
    println!("success {}", attack_succeeded(&cfg.attack, &out));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let res = match &cli.command {
        Command::Run { exp, csv } => run(exp, csv.as_ref()),
        Command::Bound(a) => bound_query(a).and_then(|q| {
            let r = bound_calc(&q, a.mc.map(|t| (t, a.seed)))?;
            if a.json {
                println!("{}", serde_json::to_string(&r)?);
            } else {
                print!("{r}");
            }
            Ok(())
        }),
        Command::Verify(a) => verify_selector(a).and_then(|s| {
            let r = verify_cmd(&s)?;
            if a.json {
                println!("{}", serde_json::to_string(&r)?);
            } else {
                print!("{r}");
            }
            Ok(())
        }),
        Command::AttackTrace { exp, trial } => trace(exp, *trial),
    };
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
