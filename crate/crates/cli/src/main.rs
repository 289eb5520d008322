//! `rdbalance`: validate networks, compute equilibria and spectral gaps,
//! run simulations and fit decay rates.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or parse error,
//! 3 numerical failure.

mod config;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rdbalance::solver::default_time_step;
use rdbalance::{
    build_initial, conserved_masses, detailed_balance_equilibrium, fit_decay_rate, operator_spectral_gap,
    read_table, simulate, validate_network, write_snapshot, ConservedMasses, Domain, EquilibriumState,
    RunSettings, StoichiometryDecomposition, VERSION,
};

use config::{load_network, parse_domain, parse_list, read_file, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn context(self, path: &Path) -> Self {
        let wrap = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Invalid(m) => CliError::Invalid(wrap(m)),
            CliError::Io(m) => CliError::Io(wrap(m)),
            CliError::Numerical(m) => CliError::Numerical(wrap(m)),
        }
    }
}

impl From<rdbalance::Error> for CliError {
    fn from(e: rdbalance::Error) -> Self {
        match e {
            rdbalance::Error::Parse(_) | rdbalance::Error::Csv(_) => CliError::Io(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "rdbalance", version, about = "Quadratic mass-action reaction-diffusion networks with detailed balance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the admissibility hypotheses.
    Validate { network: PathBuf },
    /// Detailed-balance equilibrium for given conserved masses.
    Equilibrium {
        network: PathBuf,
        /// Conserved masses, one per conservation law, comma separated.
        #[arg(long, conflicts_with = "from_initial", allow_hyphen_values = true)]
        masses: Option<String>,
        /// Take the masses from the initial data of a run config.
        #[arg(long)]
        from_initial: Option<PathBuf>,
        /// Domain the masses refer to.
        #[arg(long, default_value = "interval:1")]
        domain: String,
    },
    /// Spectral gap of the linearised reaction-diffusion operator.
    Gap {
        network: PathBuf,
        #[arg(long, default_value = "interval:1")]
        domain: String,
        /// Equilibrium to linearise around, comma separated.
        #[arg(long, conflicts_with = "masses", allow_hyphen_values = true)]
        a_inf: Option<String>,
        /// Conserved masses; the equilibrium is computed first.
        #[arg(long, allow_hyphen_values = true)]
        masses: Option<String>,
        /// Number of Laplacian modes to examine at most.
        #[arg(long, default_value_t = rdbalance::linearised::DEFAULT_MODE_BUDGET)]
        max_modes: usize,
    },
    /// Run one or more simulation configs.
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Run this many configs in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the output directory (one subdirectory per config when several are given).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit an exponential decay rate to a diagnostics column.
    Fit {
        csv: PathBuf,
        /// Column name; a trailing `sq` squares it (e.g. L2sq).
        #[arg(long, default_value = "L2sq")]
        column: String,
        /// Time window `a,b`.
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { network } => validate(&network),
        Command::Equilibrium {
            network,
            masses,
            from_initial,
            domain,
        } => equilibrium(&network, masses.as_deref(), from_initial.as_deref(), &domain),
        Command::Gap {
            network,
            domain,
            a_inf,
            masses,
            max_modes,
        } => gap(&network, &domain, a_inf.as_deref(), masses.as_deref(), max_modes),
        Command::Simulate { configs, jobs, out } => simulate_all(&configs, jobs, out.as_deref()),
        Command::Fit { csv, column, window } => fit(&csv, &column, &window),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn validate(path: &Path) -> Result<(), CliError> {
    let text = read_file(path)?;
    let net = rdbalance::parse_network(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let report = validate_network(&net);
    println!(
        "{}: {} species, {} reactions",
        path.display(),
        net.species_count(),
        net.reaction_count()
    );
    for v in &report.violations {
        println!("violation: {v}");
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    if !report.is_admissible() {
        let reasons: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Invalid(format!("network is not admissible: {}", reasons.join("; "))));
    }
    let stoich = StoichiometryDecomposition::new(&net);
    println!("admissible; {} conservation laws", stoich.conserved_count());
    for k in 0..stoich.conserved_count() {
        println!("  M{} = {}", k + 1, stoich.law_label(k, &net.species));
    }
    Ok(())
}

fn print_equilibrium(names: &[String], stoich: &StoichiometryDecomposition, eq: &EquilibriumState<f64>) {
    for (k, m) in eq.masses.values.iter().enumerate() {
        println!("M{} = {} = {m}", k + 1, stoich.law_label(k, names));
    }
    let values: Vec<String> = eq.a_inf.iter().map(|a| format!("{a:.12}")).collect();
    println!("a_inf = {}", values.join(", "));
    for (name, a) in names.iter().zip(&eq.a_inf) {
        println!("  {name} = {a:.16e}");
    }
    println!("db_residual = {:.3e}", eq.db_residual);
    println!("newton_iterations = {}", eq.iterations);
}

fn masses_from_list(
    text: &str,
    stoich: &StoichiometryDecomposition,
    domain: &Domain<f64>,
) -> Result<ConservedMasses<f64>, CliError> {
    let values = parse_list(text)?;
    if values.len() != stoich.conserved_count() {
        return Err(CliError::Invalid(format!(
            "{} masses given, the network has {} conservation laws",
            values.len(),
            stoich.conserved_count()
        )));
    }
    Ok(ConservedMasses::new(values, domain.measure()))
}

fn equilibrium(path: &Path, masses: Option<&str>, from_initial: Option<&Path>, domain: &str) -> Result<(), CliError> {
    let (net, _) = load_network(path)?;
    let stoich = StoichiometryDecomposition::new(&net);
    let masses = match (masses, from_initial) {
        (Some(list), None) => masses_from_list(list, &stoich, &parse_domain(domain)?)?,
        (None, Some(cfg_path)) => {
            let cfg = RunConfig::load(cfg_path)?;
            if cfg.network.species != net.species {
                return Err(CliError::Invalid(format!(
                    "{} uses a network with different species",
                    cfg_path.display()
                )));
            }
            let init = build_initial(&cfg.initial, &cfg.grid, &net.species)?;
            conserved_masses(&stoich, &init.mean(), cfg.grid.domain.measure(), &net.species)?
        }
        _ => return Err(CliError::Invalid("give exactly one of --masses or --from-initial".into())),
    };
    let eq = detailed_balance_equilibrium(&net, &stoich, &masses)?;
    print_equilibrium(&net.species, &stoich, &eq);
    Ok(())
}

fn gap(path: &Path, domain: &str, a_inf: Option<&str>, masses: Option<&str>, max_modes: usize) -> Result<(), CliError> {
    let (net, _) = load_network(path)?;
    let domain = parse_domain(domain)?;
    let stoich = StoichiometryDecomposition::new(&net);
    let a_inf = match (a_inf, masses) {
        (Some(list), None) => {
            let a = parse_list(list)?;
            if a.len() != net.species_count() || a.iter().any(|&x| x.is_nan() || x <= 0.0) {
                return Err(CliError::Invalid(format!(
                    "--a-inf needs {} strictly positive values",
                    net.species_count()
                )));
            }
            a
        }
        (None, Some(list)) => {
            let eq = detailed_balance_equilibrium(&net, &stoich, &masses_from_list(list, &stoich, &domain)?)?;
            let values: Vec<String> = eq.a_inf.iter().map(|a| format!("{a:.12}")).collect();
            println!("a_inf = {}", values.join(", "));
            eq.a_inf
        }
        _ => return Err(CliError::Invalid("give exactly one of --a-inf or --masses".into())),
    };
    let report = operator_spectral_gap(&net, &a_inf, &domain, max_modes)?;
    println!("lambda_star = {:.12}", report.lambda_star);
    println!("modes_examined = {}", report.modes_examined);
    for (k, m) in report.per_mode.iter().enumerate() {
        println!("  mode {k}: mu = {:.12}, gap = {:.12}", m.mu, m.gap);
    }
    if let Some(bound) = report.analytic_bound {
        println!("analytic_bound = {bound:.12}");
    }
    Ok(())
}

struct RunSummary {
    lines: Vec<String>,
}

fn output_dirs(configs: &[RunConfig], out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let dirs: Vec<PathBuf> = configs
        .iter()
        .map(|cfg| match out {
            Some(o) if configs.len() > 1 => {
                let stem = cfg.path.file_stem().map(PathBuf::from).unwrap_or_default();
                o.join(stem)
            }
            Some(o) => o.to_path_buf(),
            None => cfg.output_dir.clone(),
        })
        .collect();
    for (i, d) in dirs.iter().enumerate() {
        if dirs[..i].contains(d) {
            return Err(CliError::Invalid(format!(
                "configs {} and {} write to the same directory {}",
                configs[dirs[..i].iter().position(|x| x == d).unwrap()].path.display(),
                configs[i].path.display(),
                d.display()
            )));
        }
    }
    Ok(dirs)
}

fn simulate_all(paths: &[PathBuf], jobs: usize, out: Option<&Path>) -> Result<(), CliError> {
    let configs: Vec<RunConfig> = paths.iter().map(|p| RunConfig::load(p)).collect::<Result<_, _>>()?;
    let dirs = output_dirs(&configs, out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    let results: Vec<Result<RunSummary, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .zip(dirs.par_iter())
            .map(|(cfg, dir)| run_config(cfg, dir).map_err(|e| e.context(&cfg.path)))
            .collect()
    });
    let mut first_error = None;
    for result in results {
        match result {
            Ok(summary) => summary.lines.iter().for_each(|l| println!("{l}")),
            Err(e) => {
                eprintln!("error: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

fn io_error(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("cannot write {}: {e}", path.display()))
}

fn run_config(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, CliError> {
    let net = &cfg.network;
    let init = build_initial(&cfg.initial, &cfg.grid, &net.species)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => {
            let stoich = StoichiometryDecomposition::new(net);
            let masses = conserved_masses(&stoich, &init.mean(), cfg.grid.domain.measure(), &net.species)?;
            let eq = detailed_balance_equilibrium(net, &stoich, &masses)?;
            let guess = default_time_step(net, &eq.a_inf, &cfg.grid)?;
            // land exactly on t_end
            cfg.t_end / (cfg.t_end / guess).ceil()
        }
    };
    let settings = RunSettings {
        dt,
        t_end: cfg.t_end,
        scheme: cfg.scheme,
        output_every: cfg.output_every,
        snapshot_every: cfg.snapshot_every,
    };
    let output = simulate(net, &cfg.grid, init, &settings)?;

    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let provenance = format!("rdbalance {VERSION} {}", cfg.hash);
    let diag_path = dir.join("diag.csv");
    let file = fs::File::create(&diag_path).map_err(io_error(&diag_path))?;
    let mut w = BufWriter::new(file);
    output
        .series
        .write_csv(&mut w, Some(&provenance))
        .and_then(|_| w.flush())
        .map_err(io_error(&diag_path))?;

    for (k, snap) in output.snapshots.iter().enumerate() {
        let path = dir.join(format!("snapshot_{k:05}.csv"));
        let file = fs::File::create(&path).map_err(io_error(&path))?;
        let mut w = BufWriter::new(file);
        write_snapshot(&mut w, &cfg.grid, snap, &net.species, Some(&provenance))
            .and_then(|_| w.flush())
            .map_err(io_error(&path))?;
    }

    let last = output.series.rows.last().expect("at least two rows");
    // empirical basin check: did this start relax monotonically?
    let first = &output.series.rows[0];
    let monotone = output.series.rows.windows(2).all(|w| w[1].l2 <= w[0].l2 * (1.0 + 1e-12));
    let a_inf: Vec<String> = output.equilibrium.a_inf.iter().map(|a| format!("{a:.12}")).collect();
    Ok(RunSummary {
        lines: vec![
            format!(
                "{}: {} steps of {} with dt = {dt:e}, {} diagnostics rows, {} snapshots -> {}",
                cfg.path.display(),
                (cfg.t_end / dt).round(),
                cfg.scheme.name(),
                output.series.len(),
                output.snapshots.len(),
                diag_path.display()
            ),
            format!("  a_inf = {}", a_inf.join(", ")),
            format!("  final t = {:.6}, H = {:.6e}, L2 = {:.6e}", last.t, last.entropy, last.l2),
            format!(
                "  |h0|_2 = {:.6e}, L2 monotone = {monotone}, L2 ratio = {:.3e}",
                first.l2,
                last.l2 / first.l2
            ),
        ],
    })
}

fn fit(path: &Path, column: &str, window: &str) -> Result<(), CliError> {
    let table = read_table(&read_file(path)?).map_err(|e| CliError::from(e).context(path))?;
    let bounds = parse_list(window)?;
    let [lo, hi] = bounds[..] else {
        return Err(CliError::Invalid(format!("--window needs two values a,b, got `{window}`")));
    };
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(CliError::Invalid(format!("--window start {lo} must be below its end {hi}")));
    }
    let t = table
        .column("t")
        .ok_or_else(|| CliError::Invalid(format!("{} has no `t` column", path.display())))?;
    let y = table.column(column).ok_or_else(|| {
        CliError::Invalid(format!(
            "{} has no column `{column}` (available: {})",
            path.display(),
            table.header.join(", ")
        ))
    })?;
    let fit = fit_decay_rate(&t, &y, (lo, hi))?;
    println!("lambda_fit = {:.12}", fit.rate);
    println!("r_squared = {:.12}", fit.r_squared);
    println!("samples = {}", fit.samples);
    if fit.degenerate {
        println!("note: {column} is constant on the window, r_squared is undefined");
    }
    Ok(())
}
