//! Run configuration: a flat `key = value` file.
//!
//! ```text
//! network = four_species_unit.rdn      # relative to the config file
//! domain = interval:1                  # or rect:Lx,Ly
//! grid = 128                           # or Nx,Ny
//! scheme = strang                      # imex | strang | strang-rk4
//! dt = 0.001                           # optional, heuristic otherwise
//! t_end = 0.5
//! output_every = 1                     # default 1
//! snapshot_every = 100                 # optional
//! output_dir = out                     # relative to the working directory
//! species.A1.base = 1
//! species.A1.perturb = 1:0.01; 2:-0.005   # mode:amplitude, or kx,ky:amplitude in 2D
//! initial.csv = start.csv              # instead of species.* keys
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rdbalance::{parse_network, validate_network, CosineMode, Domain, Grid, InitialSpec, ReactionNetwork, Scheme};
use sha2::{Digest, Sha256};

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "network",
    "domain",
    "grid",
    "scheme",
    "dt",
    "t_end",
    "output_every",
    "snapshot_every",
    "output_dir",
    "initial.csv",
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub path: PathBuf,
    pub network: ReactionNetwork,
    pub grid: Grid<f64>,
    pub initial: InitialSpec<f64>,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub output_every: usize,
    pub snapshot_every: Option<usize>,
    pub output_dir: PathBuf,
    /// Hex digest of every input file, for CSV provenance.
    pub hash: String,
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Reads and validates a network file; inadmissible networks are rejected.
pub fn load_network(path: &Path) -> Result<(ReactionNetwork, String), CliError> {
    let text = read_file(path)?;
    let net = parse_network(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let report = validate_network(&net);
    if !report.is_admissible() {
        let reasons: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(CliError::Invalid(format!(
            "{} is not admissible: {}",
            path.display(),
            reasons.join("; ")
        )));
    }
    Ok((net, text))
}

pub fn parse_domain(text: &str) -> Result<Domain<f64>, CliError> {
    let bad = || CliError::Invalid(format!("domain `{text}` must be interval:L or rect:Lx,Ly with positive lengths"));
    let (kind, rest) = text.trim().split_once(':').ok_or_else(bad)?;
    let lengths = parse_list(rest).map_err(|_| bad())?;
    if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(bad());
    }
    match (kind.trim(), lengths.as_slice()) {
        ("interval", [l]) => Ok(Domain::Interval { length: *l }),
        ("rect", [lx, ly]) => Ok(Domain::Rectangle { lx: *lx, ly: *ly }),
        _ => Err(bad()),
    }
}

/// Comma-separated reals.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("`{}` is not a number", v.trim())))
        })
        .collect()
}

fn parse_modes(text: &str, two_d: bool) -> Result<Vec<CosineMode<f64>>, CliError> {
    let bad = |item: &str| {
        CliError::Invalid(format!(
            "perturbation `{item}` must be mode:amplitude{}",
            if two_d { " with mode kx,ky" } else { "" }
        ))
    };
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (mode, amp) = item.split_once(':').ok_or_else(|| bad(item))?;
            let amplitude: f64 = amp.trim().parse().map_err(|_| bad(item))?;
            let ks: Vec<usize> = mode
                .split(',')
                .map(|k| k.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(item))?;
            match (ks.as_slice(), two_d) {
                ([k], false) => Ok(CosineMode::new(*k, 0, amplitude)),
                ([kx, ky], true) => Ok(CosineMode::new(*kx, *ky, amplitude)),
                _ => Err(bad(item)),
            }
        })
        .collect()
}

/// `key = value` pairs, rejecting malformed lines and duplicate keys.
fn parse_pairs(text: &str, path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut pairs = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Io(format!("{}:{}: expected `key = value`", path.display(), n + 1))
        })?;
        let key = key.trim().to_string();
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Io(format!("{}:{}: duplicate key `{key}`", path.display(), n + 1)));
        }
    }
    Ok(pairs)
}

fn positive(key: &str, value: &str) -> Result<f64, CliError> {
    match value.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(CliError::Invalid(format!("`{key}` must be a positive number, got `{value}`"))),
    }
}

fn count(key: &str, value: &str) -> Result<usize, CliError> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(CliError::Invalid(format!("`{key}` must be a positive integer, got `{value}`"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_file(path)?;
        let pairs = parse_pairs(&text, path)?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let get = |key: &str| pairs.get(key).map(String::as_str);
        let require = |key: &str| get(key).ok_or_else(|| CliError::Invalid(format!("{}: missing `{key}`", path.display())));

        let network_path = base_dir.join(require("network")?);
        let (network, network_text) = load_network(&network_path)?;

        for key in pairs.keys() {
            let known = KNOWN_KEYS.contains(&key.as_str())
                || key
                    .strip_prefix("species.")
                    .and_then(|rest| rest.rsplit_once('.'))
                    .is_some_and(|(name, field)| {
                        network.species_index(name).is_some() && (field == "base" || field == "perturb")
                    });
            if !known {
                return Err(CliError::Invalid(format!("{}: unknown key `{key}`", path.display())));
            }
        }

        let domain = parse_domain(require("domain")?)?;
        let cells: Vec<usize> = require("grid")?
            .split(',')
            .map(|v| count("grid", v.trim()))
            .collect::<Result<_, _>>()?;
        let grid = match (domain, cells.as_slice()) {
            (Domain::Interval { .. }, [n]) => Grid::new(domain, *n, 1),
            (Domain::Rectangle { .. }, [nx, ny]) => Grid::new(domain, *nx, *ny),
            _ => {
                return Err(CliError::Invalid(format!(
                    "{}: `grid` needs one count for an interval, two for a rectangle",
                    path.display()
                )))
            }
        }
        .map_err(|e| CliError::Invalid(e.to_string()))?;

        let scheme: Scheme = get("scheme")
            .unwrap_or("strang")
            .parse()
            .map_err(CliError::Invalid)?;
        let dt = get("dt").map(|v| positive("dt", v)).transpose()?;
        let t_end = positive("t_end", require("t_end")?)?;
        let output_every = get("output_every").map(|v| count("output_every", v)).transpose()?.unwrap_or(1);
        let snapshot_every = get("snapshot_every").map(|v| count("snapshot_every", v)).transpose()?;
        let output_dir = PathBuf::from(get("output_dir").unwrap_or("out"));

        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update([0]);
        hasher.update(network_text.as_bytes());

        let has_species_keys = pairs.keys().any(|k| k.starts_with("species."));
        let initial = match get("initial.csv") {
            Some(csv) => {
                if has_species_keys {
                    return Err(CliError::Invalid(format!(
                        "{}: give either `initial.csv` or `species.*` keys, not both",
                        path.display()
                    )));
                }
                let csv_path = base_dir.join(csv);
                let csv_text = read_file(&csv_path)?;
                hasher.update([0]);
                hasher.update(csv_text.as_bytes());
                let values = rdbalance::read_snapshot(&csv_text, &grid, &network.species)
                    .map_err(|e| CliError::from(e).context(&csv_path))?;
                InitialSpec::Cells(values)
            }
            None => {
                let mut base = Vec::new();
                let mut modes = Vec::new();
                for name in &network.species {
                    let key = format!("species.{name}.base");
                    let value = get(&key).ok_or_else(|| CliError::Invalid(format!("{}: missing `{key}`", path.display())))?;
                    let b: f64 = value
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                        .ok_or_else(|| CliError::Invalid(format!("`{key}` must be a nonnegative number, got `{value}`")))?;
                    base.push(b);
                    let perturb = get(&format!("species.{name}.perturb")).unwrap_or("");
                    modes.push(parse_modes(perturb, grid.is_2d())?);
                }
                InitialSpec::Profile { base, modes }
            }
        };

        Ok(Self {
            path: path.to_path_buf(),
            network,
            grid,
            initial,
            dt,
            t_end,
            scheme,
            output_every,
            snapshot_every,
            output_dir,
            hash: hex::encode(hasher.finalize())[..16].to_string(),
        })
    }
}
