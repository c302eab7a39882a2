use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hybridnet::evaluation::{evaluate, rows_to_csv, select_evaluable_diseases, EvalConfig};
use hybridnet::inference::{diagnose, discretize, exact_posterior, lw_posterior, DiscretizedNet, Evidence};
use hybridnet::mcmc::chainio::{read_chain, write_chain};
use hybridnet::mcmc::diagnostics::diagnose_chain;
use hybridnet::mcmc::{
    d_statistic_histogram, d_statistics, is_free, load_csv, marginal_prior, param_layout, posterior_mean_params,
    posterior_summary, run_chains, LoadOptions, Progress,
};
use hybridnet::netspec::parse_network;
use hybridnet::priors::{parse_priors, prior_summary, write_priors};
use hybridnet::server::{serve, AppState, Model, ServerConfig};
use hybridnet::{CNode, McmcConfig, NetworkSpec, PriorSpec};

#[derive(Parser)]
#[command(name = "hybridnet", version, about = "Fit, check and query hybrid diagnostic networks")]
struct Cli {
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check a model file.
    Validate { model: PathBuf },
    /// Prior summaries.
    Priors {
        #[command(subcommand)]
        cmd: PriorsCmd,
    },
    /// Run the MCMC sampler and write chain files.
    Fit(FitArgs),
    /// Convergence diagnostics of a chain.
    Diagnostics {
        chain: PathBuf,
        /// Priors the chain was fitted with; model defaults otherwise.
        #[arg(long)]
        priors: Option<PathBuf>,
    },
    /// Prior-to-posterior D statistics of a chain.
    Dstat { chain: PathBuf, priors: PathBuf },
    /// Discretize a model at the posterior means of a chain, or at the
    /// prior means without one.
    Discretize {
        model: PathBuf,
        chain: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        priors: Option<PathBuf>,
    },
    /// Posterior marginals, or a disease ranking when no variables are given.
    Query(QueryArgs),
    /// Concordance index of disease rankings on a dataset.
    Cindex(CindexArgs),
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = "HYBRIDNET_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Model file or discretized network (`.json`), registered as `default`.
        #[arg(long, env = "HYBRIDNET_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum PriorsCmd {
    Summary { model: PathBuf, priors: PathBuf },
    /// Print the default prior file of a model.
    Defaults { model: PathBuf },
}

#[derive(Args)]
struct FitArgs {
    model: PathBuf,
    priors: PathBuf,
    data: PathBuf,
    #[arg(long, default_value_t = 55_000)]
    iters: u64,
    #[arg(long, default_value_t = 30_000)]
    burnin: u64,
    #[arg(long, default_value_t = 5)]
    thin: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: u32,
    /// Chain file; with several chains `.<k>` is appended per chain.
    #[arg(long)]
    out: PathBuf,
    /// Also store draws of the missing cells.
    #[arg(long)]
    keep_imputations: bool,
    /// Echo the configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryMethod {
    Exact,
    Lw,
}

#[derive(Args)]
struct QueryArgs {
    net: PathBuf,
    #[arg(long)]
    evidence: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
    #[arg(long, value_enum, default_value = "lw")]
    method: QueryMethod,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CindexArgs {
    net: PathBuf,
    data: PathBuf,
    /// Model file the dataset columns refer to.
    #[arg(long)]
    model: PathBuf,
    /// Diseases to score; the evaluable ones by default.
    #[arg(long, value_delimiter = ',')]
    diseases: Vec<String>,
    /// File listing evidence variables, one per line; all variables by default.
    #[arg(long)]
    scope: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Input that failed to parse or check; exit status 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Invalid(String);

fn invalid(e: impl std::fmt::Display) -> anyhow::Error {
    Invalid(e.to_string()).into()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_spec(path: &Path) -> Result<NetworkSpec> {
    parse_network(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_priors(path: &Path, spec: &NetworkSpec) -> Result<PriorSpec> {
    parse_priors(&read(path)?, spec).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> Result<DiscretizedNet> {
    DiscretizedNet::from_json(&read(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Writes to stdout; a closed pipe ends the process quietly.
fn put(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: writing output: {e}");
        std::process::exit(2);
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        put(&(serde_json::to_string_pretty(value).expect("output serializes") + "\n"));
    } else {
        put(&text());
    }
}

fn names(net: &DiscretizedNet, list: &[String]) -> Result<Vec<usize>> {
    list.iter()
        .map(|n| net.index_of(n.trim()).ok_or_else(|| invalid(format!("unknown variable `{n}`"))))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let js = cli.json;
    match cli.cmd {
        Cmd::Validate { model } => {
            let spec = load_spec(&model)?;
            let by_cnode: serde_json::Map<String, serde_json::Value> = CNode::ALL
                .iter()
                .map(|&c| (c.as_str().to_string(), json!(spec.in_cnode(c).len())))
                .collect();
            let continuous = spec.variables().iter().filter(|v| v.typology.scale().is_some()).count();
            let out = json!({
                "variables": spec.len(),
                "edges": spec.edge_count(),
                "exemptions": spec.exemptions().len(),
                "continuous": continuous,
                "by_cnode": by_cnode,
            });
            emit(js, &out, || {
                format!(
                    "{}: {} variables, {} edges ({} continuous, {} exempted edges)\n",
                    model.display(),
                    spec.len(),
                    spec.edge_count(),
                    continuous,
                    spec.exemptions().len()
                )
            });
        }
        Cmd::Priors {
            cmd: PriorsCmd::Summary { model, priors },
        } => {
            let spec = load_spec(&model)?;
            let priors = load_priors(&priors, &spec)?;
            let rows: Vec<serde_json::Value> = param_layout(&spec, &priors)
                .iter()
                .map(|d| {
                    let s = &prior_summary(&marginal_prior(&priors, d))[0];
                    json!({
                        "name": d.name,
                        "free": is_free(&priors, d),
                        "mean": s.mean,
                        "sd": s.sd,
                        "qi_low": s.qi_low,
                        "qi_high": s.qi_high,
                    })
                })
                .collect();
            emit(js, &rows, || {
                let mut t = String::new();
                for r in &rows {
                    t += &format!(
                        "{:<48} {:>9.4} {:>9.4}  ({:.4}, {:.4})\n",
                        r["name"].as_str().unwrap(),
                        r["mean"].as_f64().unwrap(),
                        r["sd"].as_f64().unwrap(),
                        r["qi_low"].as_f64().unwrap(),
                        r["qi_high"].as_f64().unwrap()
                    );
                }
                t
            });
        }
        Cmd::Priors {
            cmd: PriorsCmd::Defaults { model },
        } => {
            let spec = load_spec(&model)?;
            put(&write_priors(&spec, &PriorSpec::defaults(&spec)));
        }
        Cmd::Fit(a) => fit(js, a)?,
        Cmd::Diagnostics { chain, priors } => {
            let (chain, model_text) = read_chain(&chain)?;
            let spec = parse_network(&model_text).map_err(invalid)?;
            let priors = match priors {
                Some(p) => load_priors(&p, &spec)?,
                None => PriorSpec::defaults(&spec),
            };
            let report = diagnose_chain(&chain, &priors);
            emit(js, &report, || {
                let mut t = String::new();
                for p in &report.params {
                    t += &format!("{:<48} passed {}/3\n", p.name, p.passed);
                }
                t += &format!("tests passed 0/1/2/3: {:?}\n", report.pass_histogram);
                t
            });
        }
        Cmd::Dstat { chain, priors } => {
            let (chain, model_text) = read_chain(&chain)?;
            let spec = parse_network(&model_text).map_err(invalid)?;
            let priors = load_priors(&priors, &spec)?;
            let d = d_statistics(&chain, &priors);
            let values: Vec<f64> = d.iter().map(|x| x.1).collect();
            let hist = d_statistic_histogram(&values);
            let out = json!({
                "histogram": hist,
                "values": d.iter().map(|(n, v)| json!({"name": n, "d": v})).collect::<Vec<_>>(),
            });
            emit(js, &out, || {
                let e = hist.edges;
                let labels = [
                    format!("D < {}", e[0]),
                    format!("{} <= D < {}", e[0], e[1]),
                    format!("{} <= D < {}", e[1], e[2]),
                    format!("{} <= D <= {}", e[2], e[3]),
                    format!("D > {}", e[3]),
                ];
                labels
                    .iter()
                    .zip(hist.counts)
                    .map(|(l, c)| format!("{l:<22} {c}\n"))
                    .collect()
            });
        }
        Cmd::Discretize {
            model,
            chain,
            out,
            priors,
        } => {
            let spec = load_spec(&model)?;
            let priors = match priors {
                Some(p) => load_priors(&p, &spec)?,
                None => PriorSpec::defaults(&spec),
            };
            let params = match chain {
                Some(c) => posterior_mean_params(&spec, &priors, &read_chain(&c)?.0)?,
                None => priors.mean_params(&spec)?,
            };
            let net = discretize(&spec, &params)?;
            std::fs::write(&out, net.to_json()).with_context(|| format!("writing {}", out.display()))?;
            let summary = json!({"out": out, "variables": net.len()});
            emit(js, &summary, || format!("wrote {} ({} variables)\n", out.display(), net.len()));
        }
        Cmd::Query(a) => query(js, a)?,
        Cmd::Cindex(a) => cindex(js, a)?,
        Cmd::Serve {
            addr,
            model,
            samples,
            seed,
        } => {
            let state = AppState::new(ServerConfig { n_samples: samples, seed });
            if let Some(path) = model {
                let m = Model::load(&path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                log::info!("loaded {} ({} variables) as `default`", path.display(), m.net.len());
                state.insert_model("default", m);
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(addr, state))?;
        }
    }
    Ok(())
}

fn fit(js: bool, a: FitArgs) -> Result<()> {
    let cfg = McmcConfig {
        iterations: a.iters,
        burn_in: a.burnin,
        thin: a.thin,
        seed: a.seed,
        chains: a.chains,
        keep_imputations: a.keep_imputations,
        ..McmcConfig::default()
    };
    cfg.validate().map_err(invalid)?;
    let echo = json!({"config": cfg});
    if js {
        put(&format!("{}\n", serde_json::to_string(&echo)?));
    } else {
        put(&format!(
            "iterations {}, burn-in {}, thin {}, seed {}, chains {}\n",
            cfg.iterations, cfg.burn_in, cfg.thin, cfg.seed, cfg.chains
        ));
    }
    if a.dry_run {
        return Ok(());
    }
    let model_text = read(&a.model)?;
    let spec = parse_network(&model_text).map_err(|e| invalid(format!("{}: {e}", a.model.display())))?;
    let priors = load_priors(&a.priors, &spec)?;
    let data = load_csv(&a.data, &spec, &LoadOptions::default()).map_err(|e| invalid(format!("{}: {e}", a.data.display())))?;
    log::info!(
        "{} records, {} missing cells, {} clamped",
        data.n_records(),
        data.missing_count(),
        data.clamped
    );
    let progress = |p: &Progress| {
        log::info!(
            "chain {}: {}/{} (mean acceptance {:.3})",
            p.chain,
            p.iteration,
            p.total,
            p.mean_acceptance
        )
    };
    let chains = run_chains(&spec, &priors, &data, &cfg, Some(&progress))?;
    let mut outputs = Vec::new();
    for c in &chains {
        let path = if chains.len() == 1 {
            a.out.clone()
        } else {
            let mut s = a.out.as_os_str().to_owned();
            s.push(format!(".{}", c.chain_index));
            PathBuf::from(s)
        };
        write_chain(&path, c, &model_text)?;
        outputs.push(json!({
            "path": path,
            "draws": c.n_draws(),
            "acceptance": c.acceptance,
            "summary": posterior_summary(c),
        }));
    }
    let out = json!({"chains": outputs});
    emit(js, &out, || {
        let mut t = String::new();
        for (c, o) in chains.iter().zip(&outputs) {
            t += &format!("wrote {} ({} draws)\n", o["path"].as_str().unwrap_or_default(), c.n_draws());
            for u in &c.acceptance {
                t += &format!("  {:<48} acceptance {:.3}\n", u.name, u.rate);
            }
        }
        t
    });
    Ok(())
}

fn query(js: bool, a: QueryArgs) -> Result<()> {
    let net = load_net(&a.net)?;
    let ev = match &a.evidence {
        Some(p) => Evidence::from_json(&net, &read(p)?).map_err(invalid)?,
        None => Evidence::new(),
    };
    if a.vars.is_empty() {
        let d = diagnose(&net, &ev, None, a.samples, a.seed)?;
        emit(js, &d, || {
            let mut t = format!("status {:?}, ess {:.1}\n", d.status, d.ess);
            for r in &d.ranking {
                t += &format!("{:<40} {:.4}\n", r.variable, r.probability);
            }
            t
        });
        return Ok(());
    }
    let queries = names(&net, &a.vars)?;
    let res = match a.method {
        QueryMethod::Exact => exact_posterior(&net, &ev, &queries)?,
        QueryMethod::Lw => lw_posterior(&net, &ev, &queries, a.samples, a.seed)?,
    };
    emit(js, &res, || {
        let mut t = format!("status {:?}\n", res.status);
        for m in &res.marginals {
            let p: Vec<String> = m.probs.iter().map(|x| format!("{x:.4}")).collect();
            t += &format!("{:<40} {}\n", m.variable, p.join(" "));
        }
        t
    });
    Ok(())
}

fn cindex(js: bool, a: CindexArgs) -> Result<()> {
    let net = load_net(&a.net)?;
    let spec = load_spec(&a.model)?;
    if spec.len() != net.len() || (0..spec.len()).any(|i| spec.var(i).name != net.var(i).name) {
        bail!(invalid("the network and the model file list different variables"));
    }
    let data =
        load_csv(&a.data, &spec, &LoadOptions::default()).map_err(|e| invalid(format!("{}: {e}", a.data.display())))?;
    let diseases = if a.diseases.is_empty() {
        select_evaluable_diseases(&spec, &data)
    } else {
        names(&net, &a.diseases)?
    };
    let (scope_name, scope) = match &a.scope {
        Some(p) => {
            let list: Vec<String> = read(p)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect();
            let name = p.file_stem().map_or("scope".into(), |s| s.to_string_lossy().into_owned());
            (name, names(&net, &list)?)
        }
        None => ("all".to_string(), (0..net.len()).collect()),
    };
    let cfg = EvalConfig {
        n_samples: a.samples,
        seed: a.seed,
        bootstrap: a.bootstrap,
    };
    let rows = evaluate(&net, &data, &diseases, &scope_name, &scope, &cfg)?;
    emit(js, &rows, || rows_to_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
