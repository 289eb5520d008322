//! Lyapunov functionals, weighted norms, dissipation terms and decay fits.
//!
//! All integrals are midpoint sums over the grid cells. Gradients live on
//! interior faces; Neumann boundary faces carry no flux.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::network::{monomial, ReactionNetwork, StoichiometryDecomposition};
use crate::scalar::Real;
use crate::solver::{Grid, State};

/// `(sum_i int |h_i|^p / a_inf_i^(p-1))^(1/p)`; `p = inf` gives the plain max.
pub fn weighted_norm<T: Real>(grid: &Grid<T>, h: &[Vec<T>], a_inf: &[T], p: T) -> T {
    if p.is_infinite() {
        return h
            .iter()
            .flat_map(|f| f.iter())
            .fold(T::zero(), |m, &x| m.max(x.abs()));
    }
    let vol = grid.cell_volume();
    let mut total = T::zero();
    for (field, &e) in h.iter().zip(a_inf) {
        let weight = e.powf(p - T::one());
        let sum = field.iter().fold(T::zero(), |s, &x| s + x.abs().powf(p));
        total = total + sum / weight;
    }
    (total * vol).powf(T::one() / p)
}

/// `u ln u - u + 1` for `u >= 0`, accurate near `u = 1`.
fn entropy_density<T: Real>(u: T) -> T {
    if u == T::zero() {
        return T::one();
    }
    let h = u - T::one();
    let v = if h.abs() < T::lit(0.5) {
        u * h.ln_1p() - h
    } else {
        u * u.ln() - h
    };
    v.max(T::zero())
}

/// `H(a | a_inf) = sum_i int a_i ln(a_i / a_inf_i) - a_i + a_inf_i`, with
/// `0 ln 0 = 0`.
pub fn relative_entropy<T: Real>(grid: &Grid<T>, a: &[Vec<T>], a_inf: &[T]) -> T {
    let vol = grid.cell_volume();
    let mut total = T::zero();
    for (field, &e) in a.iter().zip(a_inf) {
        let sum = field
            .iter()
            .fold(T::zero(), |s, &x| s + entropy_density(x / e));
        total = total + e * sum;
    }
    total * vol
}

/// Sum of `(v_r - v_l)^2 / mean(v_l, v_r)` over the interior faces of one
/// direction, already scaled by `1/h^2` and the cell volume.
fn face_sum<T: Real>(grid: &Grid<T>, field: &[T], stride: usize, lines: usize, len: usize, line_step: usize, h: T) -> T {
    let half = T::lit(0.5);
    let mut total = T::zero();
    for line in 0..lines {
        let start = line * line_step;
        for j in 0..len - 1 {
            let l = field[start + j * stride];
            let r = field[start + (j + 1) * stride];
            let g = r - l;
            if g == T::zero() {
                continue;
            }
            total = total + g * g / ((l + r) * half);
        }
    }
    total * grid.cell_volume() / (h * h)
}

fn fisher_term<T: Real>(net: &ReactionNetwork, grid: &Grid<T>, a: &[Vec<T>]) -> T {
    let mut total = T::zero();
    for (field, &d) in a.iter().zip(&net.diffusion) {
        let mut s = face_sum(grid, field, 1, grid.ny, grid.nx, grid.nx, grid.hx());
        if grid.is_2d() {
            s = s + face_sum(grid, field, grid.nx, grid.nx, grid.ny, 1, grid.hy());
        }
        total = total + T::lit(d) * s;
    }
    total
}

/// Reaction dissipation; zero concentrations give the `+inf` limit.
fn reaction_term<T: Real>(net: &ReactionNetwork, grid: &Grid<T>, a: &[Vec<T>], a_inf: &[T]) -> T {
    let n = a.len();
    let coef: Vec<T> = net
        .reactions
        .iter()
        .map(|r| T::lit(r.kf) * monomial(a_inf, &r.reactants))
        .collect();
    let mut u = vec![T::zero(); n];
    let mut log_u = vec![T::zero(); n];
    let mut total = T::zero();
    for c in 0..grid.cells() {
        for i in 0..n {
            u[i] = a[i][c] / a_inf[i];
            log_u[i] = u[i].ln();
        }
        for (r, &k) in net.reactions.iter().zip(&coef) {
            let fwd = monomial(&u, &r.reactants);
            let bwd = monomial(&u, &r.products);
            if fwd == bwd {
                continue;
            }
            let log_ratio = r
                .reactants
                .iter()
                .zip(&r.products)
                .zip(&log_u)
                .fold(T::zero(), |s, ((&al, &be), &l)| {
                    let e = i64::from(al) - i64::from(be);
                    if e == 0 {
                        s
                    } else {
                        s + T::lit(e as f64) * l
                    }
                });
            total = total + k * (fwd - bwd) * log_ratio;
        }
    }
    total * grid.cell_volume()
}

/// `(fisher, reaction)` with `fisher = sum_i d_i int |grad a_i|^2 / a_i` and
/// `reaction = sum_r int kf_r a_inf^alpha (u^alpha - u^beta)(ln u^alpha - ln u^beta)`
/// where `u = a / a_inf`. Along trajectories `-dH/dt = fisher + reaction`.
pub fn entropy_dissipation<T: Real>(
    net: &ReactionNetwork,
    grid: &Grid<T>,
    a: &[Vec<T>],
    a_inf: &[T],
) -> Result<(T, T)> {
    for (s, field) in a.iter().enumerate() {
        if let Some((cell, &v)) = field.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
            return Err(Error::NonPositivity {
                species: net.species.get(s).cloned().unwrap_or_else(|| format!("#{s}")),
                cell,
                t: f64::NAN,
                value: v.as_f64(),
            });
        }
    }
    Ok((fisher_term(net, grid, a), reaction_term(net, grid, a, a_inf)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRow<T> {
    pub t: T,
    /// `Q . int a`.
    pub masses: Vec<T>,
    pub entropy: T,
    pub l2: T,
    pub l4: T,
    pub linf: T,
    pub fisher: T,
    pub reaction: T,
}

impl<T: Real> DiagnosticsRow<T> {
    /// Every diagnostic of `state`. Unlike [`entropy_dissipation`] this
    /// accepts zero concentrations, reporting the `+inf` reaction limit.
    pub fn evaluate(
        net: &ReactionNetwork,
        stoich: &StoichiometryDecomposition,
        grid: &Grid<T>,
        state: &State<T>,
        a_inf: &[T],
    ) -> Self {
        let h = state.perturbation(a_inf);
        Self {
            t: state.t,
            masses: stoich.q.apply(&state.totals(grid)),
            entropy: relative_entropy(grid, &state.fields, a_inf),
            l2: weighted_norm(grid, &h, a_inf, T::lit(2.0)),
            l4: weighted_norm(grid, &h, a_inf, T::lit(4.0)),
            linf: weighted_norm(grid, &h, a_inf, T::infinity()),
            fisher: fisher_term(net, grid, &state.fields),
            reaction: reaction_term(net, grid, &state.fields, a_inf),
        }
    }

    fn values(&self) -> impl Iterator<Item = T> + '_ {
        std::iter::once(self.t)
            .chain(self.masses.iter().copied())
            .chain([self.entropy, self.l2, self.l4, self.linf, self.fisher, self.reaction])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsSeries<T> {
    /// Human-readable conservation laws, e.g. `A1 + A2`.
    pub mass_labels: Vec<String>,
    pub rows: Vec<DiagnosticsRow<T>>,
}

impl<T: Real> DiagnosticsSeries<T> {
    pub fn new(stoich: &StoichiometryDecomposition, species: &[String]) -> Self {
        Self {
            mass_labels: (0..stoich.conserved_count())
                .map(|k| stoich.law_label(k, species))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: DiagnosticsRow<T>) {
        debug_assert!(self.rows.last().is_none_or(|last| last.t < row.t));
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.mass_labels.len()).map(|k| format!("M{k}")));
        cols.extend(["H", "L2", "L4", "Linf", "fisher", "reaction"].map(String::from));
        cols
    }

    /// A column by its CSV header name; `L2sq` and friends give the square.
    pub fn column(&self, name: &str) -> Option<Vec<T>> {
        let (base, square) = match name.strip_suffix("sq") {
            Some(b) if !b.is_empty() => (b, true),
            _ => (name, false),
        };
        let idx = self.header().iter().position(|c| c == base)?;
        Some(
            self.rows
                .iter()
                .map(|r| {
                    let v = r.values().nth(idx).expect("row matches header");
                    if square {
                        v * v
                    } else {
                        v
                    }
                })
                .collect(),
        )
    }

    /// Writes the CSV table, values with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W, comment: Option<&str>) -> io::Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", self.header().join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.values().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Least-squares fit of `ln y = c - rate t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub rate: T,
    pub r_squared: T,
    pub samples: usize,
    /// `y` was constant on the window, so `r_squared` is undefined (reported as 0).
    pub degenerate: bool,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits an exponential to the samples with `t` in the closed `window`.
pub fn fit_decay_rate<T: Real>(t: &[T], y: &[T], window: (T, T)) -> Result<DecayFit<T>> {
    if t.len() != y.len() {
        return Err(Error::Fit(format!("{} times but {} values", t.len(), y.len())));
    }
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < lo || ti > hi {
            continue;
        }
        if !(yi > T::zero()) || !yi.is_finite() {
            return Err(Error::Fit(format!(
                "non-positive value {} at t = {}",
                yi.as_f64(),
                ti.as_f64()
            )));
        }
        xs.push(ti);
        ls.push(yi.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in window [{}, {}], need at least {MIN_FIT_SAMPLES}",
            xs.len(),
            lo.as_f64(),
            hi.as_f64()
        )));
    }
    let n = T::count(xs.len());
    let mean_x = xs.iter().fold(T::zero(), |s, &x| s + x) / n;
    let mean_l = ls.iter().fold(T::zero(), |s, &x| s + x) / n;
    let (mut sxx, mut sxl, mut sll) = (T::zero(), T::zero(), T::zero());
    for (&x, &l) in xs.iter().zip(&ls) {
        let dx = x - mean_x;
        let dl = l - mean_l;
        sxx = sxx + dx * dx;
        sxl = sxl + dx * dl;
        sll = sll + dl * dl;
    }
    if !(sxx > T::zero()) {
        return Err(Error::Fit("all samples share one time".into()));
    }
    let slope = sxl / sxx;
    let (lmin, lmax) = ls
        .iter()
        .fold((ls[0], ls[0]), |(a, b), &l| (a.min(l), b.max(l)));
    let scale = mean_l.abs().max(T::one());
    let degenerate = lmax - lmin <= T::lit(8.0) * T::epsilon() * scale;
    let r_squared = if degenerate {
        T::zero()
    } else {
        (sxl * sxl / (sxx * sll)).min(T::one())
    };
    Ok(DecayFit {
        rate: if degenerate { T::zero() } else { -slope },
        r_squared,
        samples: xs.len(),
        degenerate,
    })
}
