//! Command-line driver: `solve`, `eval` and `grid`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::domlang::parse_constant;
use crate::model::Domain;
use crate::poly::Rational;
use crate::sdp::{self, SolveOptions, SolveResult};
use crate::vars::{State, VarId, VarKind, Vocab};

#[derive(Parser, Debug)]
#[command(name = "xadd-sdp", version, about = "Exact symbolic dynamic programming for hybrid MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run value iteration and write statistics and diagram exports.
    Solve(RunArgs),
    /// Print the value and greedy action at one state.
    Eval(RunArgs),
    /// Sample the value function on a 2-D grid as CSV.
    Grid(RunArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Domain file (may also be given positionally).
    #[arg(long = "domain", value_name = "FILE")]
    pub domain: Option<PathBuf>,
    #[arg(value_name = "DOMAIN")]
    pub domain_arg: Option<PathBuf>,
    /// Number of backups; defaults to the domain's horizon.
    #[arg(long)]
    pub iterations: Option<u32>,
    #[arg(long)]
    pub prune: bool,
    /// Overrides the domain's discount factor.
    #[arg(long)]
    pub discount: Option<String>,
    /// Directory for V_h.dot files.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Directory for V_h.case files.
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// Statistics CSV path.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// State such as `k=0,x1=30,x2=40` (booleans as true/false).
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub horizon: Option<u32>,
    /// The two grid axes.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Values for every non-axis variable.
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    #[arg(long, default_value_t = 50)]
    pub res: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn domain_path(&self) -> Result<&Path> {
        match (&self.domain, &self.domain_arg) {
            (Some(p), None) | (None, Some(p)) => Ok(p),
            (Some(a), Some(b)) if a == b => Ok(a),
            (Some(_), Some(_)) => bail!("domain given twice"),
            (None, None) => bail!("missing --domain"),
        }
    }

    fn load(&self) -> Result<Domain> {
        let path = self.domain_path()?;
        let mut domain = Domain::load(path).map_err(|e| anyhow!("{e}"))?;
        if let Some(d) = &self.discount {
            let gamma = parse_constant(d).map_err(|e| anyhow!("bad --discount: {e}"))?;
            if gamma < Rational::from_integer(0.into()) || gamma > Rational::from_integer(1.into()) {
                bail!("--discount must lie in [0, 1]");
            }
            domain.mdp.discount = gamma;
        }
        Ok(domain)
    }

    fn iterations(&self, domain: &Domain) -> Result<u32> {
        self.iterations
            .or(domain.mdp.horizon)
            .ok_or_else(|| anyhow!("--iterations is required: the domain has no finite horizon"))
    }

    /// Horizon to query: `--horizon`, else `--iterations`, else the domain's.
    fn query_horizon(&self, domain: &Domain) -> Result<u32> {
        match self.horizon {
            Some(h) => Ok(h),
            None => self.iterations(domain),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Eval(args) => {
            let out = cmd_eval(&args)?;
            print!("{out}");
            Ok(())
        }
        Command::Grid(args) => {
            let csv = cmd_grid(&args)?;
            match &args.out {
                Some(path) => write_atomic(path, &csv),
                None => {
                    std::io::stdout().write_all(csv.as_bytes())?;
                    Ok(())
                }
            }
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// The statistics CSV: one row per backup, or a single `V⁰` row when no
/// backup ran.
pub fn stats_csv(result: &SolveResult) -> String {
    let mut out = String::from("iter,nodes,leaves,decisions,time_ms\n");
    let rows: Vec<usize> = if result.iterations.len() == 1 {
        vec![0]
    } else {
        (1..result.iterations.len()).collect()
    };
    for h in rows {
        let it = &result.iterations[h];
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            h,
            it.stats.nodes,
            it.stats.leaves,
            it.stats.decisions,
            it.elapsed.as_secs_f64() * 1000.0
        );
    }
    out
}

pub fn cmd_solve(args: &RunArgs) -> Result<()> {
    let mut domain = args.load()?;
    let horizon = args.iterations(&domain)?;
    let opts = SolveOptions { horizon, prune: args.prune, ..Default::default() };
    let result = sdp::solve_with(&mut domain.store, &domain.mdp, &opts, |h, it| {
        println!(
            "iter {h}: nodes={} leaves={} decisions={} time_ms={:.3}",
            it.stats.nodes,
            it.stats.leaves,
            it.stats.decisions,
            it.elapsed.as_secs_f64() * 1000.0
        );
    })?;
    if let Some(h) = result.converged_at {
        eprintln!("converged at iteration {h}");
    }
    if let Some(path) = &args.stats {
        write_atomic(path, &stats_csv(&result))?;
    }
    for (dir, ext) in [(&args.dot, "dot"), (&args.case, "case")] {
        let Some(dir) = dir else { continue };
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (h, it) in result.iterations.iter().enumerate() {
            let text = if ext == "dot" {
                domain.store.export_dot(it.value)
            } else {
                domain.store.to_case(it.value)
            };
            write_atomic(&dir.join(format!("V_{h}.{ext}")), &text)?;
        }
    }
    Ok(())
}

fn parse_value(vocab: &Vocab, v: VarId, text: &str) -> Result<(bool, Rational)> {
    let name = vocab.name(v);
    match vocab.kind(v) {
        VarKind::Boolean => match text {
            "true" | "1" => Ok((true, Rational::default())),
            "false" | "0" => Ok((false, Rational::default())),
            _ => bail!("`{name}` is boolean; expected true or false, got `{text}`"),
        },
        VarKind::Continuous => {
            let value = parse_constant(text).map_err(|e| anyhow!("bad value for `{name}`: {e}"))?;
            Ok((false, value))
        }
    }
}

/// Parses `name=value` pairs into a state.
pub fn parse_assignments<'a>(vocab: &Vocab, pairs: impl IntoIterator<Item = &'a str>) -> Result<State> {
    let mut state = State::new();
    for pair in pairs {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected name=value, got `{pair}`"))?;
        let name = name.trim();
        let v = vocab
            .get(name)
            .filter(|v| !vocab.is_primed(*v))
            .ok_or_else(|| anyhow!("unknown variable `{name}`"))?;
        if state.contains(v) {
            bail!("`{name}` assigned twice");
        }
        let (b, r) = parse_value(vocab, v, value.trim())?;
        match vocab.kind(v) {
            VarKind::Boolean => state.set_bool(v, b),
            VarKind::Continuous => state.set_real(v, r),
        };
    }
    Ok(state)
}

pub fn to_decimal(r: &Rational) -> String {
    r.to_f64().map_or_else(|| "nan".into(), |f| f.to_string())
}

pub fn cmd_eval(args: &RunArgs) -> Result<String> {
    let mut domain = args.load()?;
    let h = args.query_horizon(&domain)?;
    let text = args.state.as_deref().ok_or_else(|| anyhow!("missing --state"))?;
    let state = parse_assignments(domain.store.vocab(), text.split(','))?;
    sdp::check_state(&domain.store, &domain.mdp, &state)?;
    let opts = SolveOptions { horizon: h, prune: args.prune, ..Default::default() };
    let result = sdp::solve(&mut domain.store, &domain.mdp, &opts)?;
    let value = sdp::value_at(&domain.store, &domain.mdp, &result, h, &state)?;
    let action = if h == 0 {
        "-".to_string()
    } else {
        sdp::policy_at(&domain.store, &domain.mdp, &result, h, &state)?.0
    };
    Ok(format!(
        "horizon: {h}\nvalue: {value}\ndecimal: {}\naction: {action}\n",
        to_decimal(&value)
    ))
}

pub fn cmd_grid(args: &RunArgs) -> Result<String> {
    let mut domain = args.load()?;
    let h = args.query_horizon(&domain)?;
    if args.vars.len() != 2 {
        bail!("--vars needs exactly two continuous variables");
    }
    if args.res < 2 {
        bail!("--res must be at least 2");
    }
    let vocab = domain.store.vocab().clone();
    let mut axes = Vec::new();
    for name in &args.vars {
        let v = vocab
            .get(name)
            .filter(|v| !vocab.is_primed(*v))
            .ok_or_else(|| anyhow!("unknown variable `{name}`"))?;
        let c = domain
            .mdp
            .cvar(v)
            .ok_or_else(|| anyhow!("grid axis `{name}` is not a continuous variable"))?;
        axes.push(c.clone());
    }
    if axes[0].id == axes[1].id {
        bail!("grid axes must differ");
    }
    let fixed = parse_assignments(&vocab, args.fix.iter().map(String::as_str))?;
    for c in &axes {
        if fixed.contains(c.id) {
            bail!("grid axis `{}` cannot also be fixed", vocab.name(c.id));
        }
    }
    let others = domain
        .mdp
        .bvars
        .iter()
        .copied()
        .chain(domain.mdp.cvars.iter().map(|c| c.id))
        .filter(|v| axes.iter().all(|a| a.id != *v));
    for v in others {
        if !fixed.contains(v) {
            bail!("variable `{}` is not fixed (use --fix)", vocab.name(v));
        }
    }

    let opts = SolveOptions { horizon: h, prune: args.prune, ..Default::default() };
    let result = sdp::solve(&mut domain.store, &domain.mdp, &opts)?;
    let value = result.value(h)?;

    let res = args.res;
    let steps = Rational::from_integer((res as i64 - 1).into());
    let point = |c: &crate::model::ContinuousVar, i: usize| -> Rational {
        &c.lower + (&c.upper - &c.lower) * Rational::from_integer((i as i64).into()) / &steps
    };
    let store = &domain.store;
    let mdp = &domain.mdp;
    let rows: Vec<Result<String>> = (0..res * res)
        .into_par_iter()
        .map(|n| {
            let (i, j) = (n / res, n % res);
            let (a, b) = (point(&axes[0], i), point(&axes[1], j));
            let mut s = fixed.clone();
            s.set_real(axes[0].id, a.clone());
            s.set_real(axes[1].id, b.clone());
            sdp::check_state(store, mdp, &s)?;
            let v = store.eval(value, &s)?;
            Ok(format!("{},{},{}", to_decimal(&a), to_decimal(&b), to_decimal(&v)))
        })
        .collect();
    let mut out = format!("{},{},value\n", args.vars[0], args.vars[1]);
    for row in rows {
        out.push_str(&row?);
        out.push('\n');
    }
    Ok(out)
}
