use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hedlund::io::{cmd_validate, render_report, FieldKind, Pipeline, RunConfig, RunManifest};

#[derive(Parser)]
#[command(name = "hedlund", version, about = "Hedlund metrics on flat tori and their stable norms")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Solver nodes per unit length.
    #[arg(long, global = true)]
    res: Option<usize>,
    /// Solver stencil radius.
    #[arg(long, global = true)]
    stencil: Option<usize>,
    /// Largest multiple n in the stable-norm sequence.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Node budget for a single search.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Seed for random curve placement.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the configuration and check the polytope and curves.
    Validate,
    /// Build the metric, certify it and write the manifest.
    Build,
    /// Sandwich the stable norm for every configured vector.
    StableNorm,
    /// Build the broken path realizing the upper bound for one vector.
    LemmaPath {
        /// Integer vector, e.g. `1,1,1`.
        #[arg(long, allow_hyphen_values = true)]
        w: String,
    },
    /// Sample a field of the metric to a binary volume.
    ExportField {
        /// `F`, `phi` or `eta_<facet>`.
        #[arg(long)]
        field: String,
        /// Samples per unit length.
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Print the manifest, building it if absent.
    Report,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let path = c.config.as_ref().context("--config is required")?;
    let mut cfg = RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(o) = &c.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    if let Some(r) = c.res {
        cfg.res = r;
    }
    if let Some(r) = c.stencil {
        cfg.stencil_radius = r;
    }
    if let Some(n) = c.nmax {
        cfg.n_max = n;
    }
    if let Some(b) = c.budget {
        cfg.budget = b;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.check()?;
    Ok(cfg)
}

fn parse_w(s: &str, m: usize) -> Result<Vec<i64>> {
    let w = s
        .split(',')
        .map(|t| t.trim().parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("w: {s:?} is not a comma-separated integer vector"))?;
    if w.len() != m {
        bail!("w: expected {m} entries, found {}", w.len());
    }
    Ok(w)
}

/// Ok(true) when every certificate passed.
fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Validate => {
            let r = cmd_validate(&cfg);
            for m in &r.messages {
                println!("{m}");
            }
            println!("{}", if r.pass { "valid" } else { "invalid" });
            Ok(r.pass)
        }
        Command::Build => {
            let manifest = Pipeline::build(&cfg)?.cmd_build()?;
            print!("{}", render_report(&manifest));
            Ok(manifest.certificates.pass)
        }
        Command::StableNorm => {
            let p = Pipeline::build(&cfg)?;
            let mut pass = true;
            for (w, r) in cfg.w.iter().zip(p.cmd_stable_norm()?) {
                match r {
                    Ok(rep) => {
                        println!(
                            "w {:?}: lambda {}, C {:.4}, monotone {}, converging {}, {}",
                            w,
                            rep.lambda_w,
                            rep.c_hat.value,
                            rep.monotone,
                            rep.converging,
                            if rep.pass { "pass" } else { "FAIL" }
                        );
                        for row in &rep.rows {
                            match row.f_hat_over_n {
                                Some(f) => println!(
                                    "  n {}: {:.6} in [{:.6}, {:.6}] {}",
                                    row.n,
                                    f,
                                    row.lower,
                                    row.upper,
                                    if row.pass { "ok" } else { "out" }
                                ),
                                None => println!("  n {}: {}", row.n, row.error.as_deref().unwrap_or("no estimate")),
                            }
                        }
                        pass &= rep.pass;
                    }
                    Err(e) => {
                        println!("w {w:?}: error: {e}");
                        pass = false;
                    }
                }
            }
            Ok(pass)
        }
        Command::LemmaPath { w } => {
            let w = parse_w(&w, cfg.dimension)?;
            let p = Pipeline::build(&cfg)?;
            let (path, report) = p.cmd_lemma_path(&w)?;
            for row in &report.ledger {
                println!(
                    "segment {} {}: length {:.6}, budget {:.6} {}",
                    row.segment,
                    row.kind,
                    row.length,
                    row.budget,
                    if row.within { "ok" } else { "over" }
                );
            }
            println!(
                "w {:?}: {} segments, total {:.6} <= {:.6}: {}",
                w,
                path.segments.len(),
                report.total_length,
                report.bound,
                if report.pass { "pass" } else { "FAIL" }
            );
            Ok(report.pass)
        }
        Command::ExportField { field, samples } => {
            let kind = FieldKind::parse(&field)?;
            let p = Pipeline::build(&cfg)?;
            let side = p.cmd_export_field(&kind, samples)?;
            println!(
                "wrote {}/{}.bin ({} nodes, {} components)",
                cfg.out_dir,
                kind.stem(),
                side.dims.iter().product::<usize>(),
                side.components
            );
            Ok(true)
        }
        Command::Report => {
            let path = PathBuf::from(&cfg.out_dir).join("manifest.json");
            let manifest: RunManifest = match std::fs::read_to_string(&path) {
                Ok(text) => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
                Err(_) => Pipeline::build(&cfg)?.cmd_build()?,
            };
            print!("{}", render_report(&manifest));
            Ok(manifest.certificates.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
