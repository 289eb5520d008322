//! Finite-volume simulation of `d_t a_i = d_i Lap a_i + P_i(a)` with
//! homogeneous Neumann boundary conditions on intervals and rectangles.
//!
//! Cells are centered, the Laplacian is the standard second-order stencil
//! with mirror ghost cells, so fluxes telescope and every species' cell sum
//! is preserved exactly by the diffusion solves. Time stepping splits
//! diffusion from reaction:
//!
//! - [`Scheme::ImexEuler`]: backward-Euler diffusion, then forward-Euler reaction.
//! - [`Scheme::Strang`]: Crank-Nicolson half step, Heun (RK2) reaction step,
//!   Crank-Nicolson half step. Second order overall.
//! - [`Scheme::StrangRk4`]: same splitting with a classical RK4 reaction
//!   step, for reaction-dominated problems where the splitting error is small.
//!
//! In 2D each implicit diffusion solve is done dimension by dimension (one
//! tridiagonal sweep per grid line and direction). The 1D operators act on
//! different indices and commute, so the factorization adds no splitting
//! error between directions beyond that of the 1D schemes.

use std::str::FromStr;

use crate::diagnostics::{DiagnosticsRow, DiagnosticsSeries};
use crate::domain::Domain;
use crate::equilibrium::{conserved_masses, detailed_balance_equilibrium, EquilibriumState};
use crate::error::{Error, Result};
use crate::linalg::solve_tridiagonal;
use crate::linearised::linearised_matrix;
use crate::network::{ReactionNetwork, StoichiometryDecomposition};
use crate::scalar::Real;

/// Values below this abort a run.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-10;
pub const MIN_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub domain: Domain<T>,
    pub nx: usize,
    /// 1 for intervals.
    pub ny: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(domain: Domain<T>, nx: usize, ny: usize) -> Result<Self> {
        let lengths_ok = match domain {
            Domain::Interval { length } => length > T::zero() && length.is_finite(),
            Domain::Rectangle { lx, ly } => lx > T::zero() && ly > T::zero() && lx.is_finite() && ly.is_finite(),
        };
        if !lengths_ok {
            return Err(Error::Dimension("domain lengths must be positive and finite".into()));
        }
        let ny_ok = match domain {
            Domain::Interval { .. } => ny == 1,
            Domain::Rectangle { .. } => ny >= MIN_CELLS,
        };
        if nx < MIN_CELLS || !ny_ok {
            return Err(Error::Dimension(format!(
                "grid needs at least {MIN_CELLS} cells per direction, got {nx}x{ny}"
            )));
        }
        Ok(Self { domain, nx, ny })
    }

    pub fn interval(length: T, n: usize) -> Result<Self> {
        Self::new(Domain::Interval { length }, n, 1)
    }

    pub fn rectangle(lx: T, ly: T, nx: usize, ny: usize) -> Result<Self> {
        Self::new(Domain::Rectangle { lx, ly }, nx, ny)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_2d(&self) -> bool {
        matches!(self.domain, Domain::Rectangle { .. })
    }

    pub fn hx(&self) -> T {
        match self.domain {
            Domain::Interval { length } => length / T::count(self.nx),
            Domain::Rectangle { lx, .. } => lx / T::count(self.nx),
        }
    }

    /// Cell height; the transverse extent (1) for intervals.
    pub fn hy(&self) -> T {
        match self.domain {
            Domain::Interval { .. } => T::one(),
            Domain::Rectangle { ly, .. } => ly / T::count(self.ny),
        }
    }

    pub fn cell_volume(&self) -> T {
        self.hx() * self.hy()
    }

    /// Cell center; `y` is 0 on intervals.
    pub fn center(&self, cell: usize) -> (T, T) {
        let ix = cell % self.nx;
        let iy = cell / self.nx;
        let half = T::lit(0.5);
        let x = (T::count(ix) + half) * self.hx();
        let y = if self.is_2d() {
            (T::count(iy) + half) * self.hy()
        } else {
            T::zero()
        };
        (x, y)
    }
}

/// Cell-centered 5-point (3-point in 1D) Neumann Laplacian.
#[derive(Clone, Copy, Debug)]
pub struct NeumannLaplacian<T> {
    nx: usize,
    ny: usize,
    inv_hx2: T,
    inv_hy2: T,
}

impl<T: Real> NeumannLaplacian<T> {
    /// `out = Lap u`.
    pub fn apply(&self, u: &[T], out: &mut [T]) {
        assert_eq!(u.len(), self.nx * self.ny);
        assert_eq!(out.len(), u.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = iy * self.nx + ix;
                let mut acc = T::zero();
                if ix > 0 {
                    acc = acc + (u[c - 1] - u[c]) * self.inv_hx2;
                }
                if ix + 1 < self.nx {
                    acc = acc + (u[c + 1] - u[c]) * self.inv_hx2;
                }
                if self.ny > 1 {
                    if iy > 0 {
                        acc = acc + (u[c - self.nx] - u[c]) * self.inv_hy2;
                    }
                    if iy + 1 < self.ny {
                        acc = acc + (u[c + self.nx] - u[c]) * self.inv_hy2;
                    }
                }
                out[c] = acc;
            }
        }
    }
}

pub fn build_laplacian<T: Real>(grid: &Grid<T>) -> NeumannLaplacian<T> {
    let hx = grid.hx();
    let hy = grid.hy();
    NeumannLaplacian {
        nx: grid.nx,
        ny: grid.ny,
        inv_hx2: T::one() / (hx * hx),
        inv_hy2: if grid.is_2d() { T::one() / (hy * hy) } else { T::zero() },
    }
}

/// Concentrations of every species on every cell at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State<T> {
    pub t: T,
    /// `fields[species][cell]`.
    pub fields: Vec<Vec<T>>,
}

impl<T: Real> State<T> {
    /// Spatially constant state.
    pub fn uniform(values: &[T], grid: &Grid<T>) -> Self {
        Self {
            t: T::zero(),
            fields: values.iter().map(|&v| vec![v; grid.cells()]).collect(),
        }
    }

    pub fn species_count(&self) -> usize {
        self.fields.len()
    }

    /// Cell average of every species.
    pub fn mean(&self) -> Vec<T> {
        self.fields
            .iter()
            .map(|f| f.iter().fold(T::zero(), |s, &x| s + x) / T::count(f.len()))
            .collect()
    }

    /// `integral a_i` for every species.
    pub fn totals(&self, grid: &Grid<T>) -> Vec<T> {
        let vol = grid.cell_volume();
        self.fields
            .iter()
            .map(|f| f.iter().fold(T::zero(), |s, &x| s + x) * vol)
            .collect()
    }

    /// `a - a_inf` per species and cell.
    pub fn perturbation(&self, a_inf: &[T]) -> Vec<Vec<T>> {
        self.fields
            .iter()
            .zip(a_inf)
            .map(|(f, &e)| f.iter().map(|&x| x - e).collect())
            .collect()
    }

    fn check_nonnegative(&self, species: &[String]) -> Result<()> {
        let floor = T::lit(NEGATIVITY_TOLERANCE);
        for (s, field) in self.fields.iter().enumerate() {
            for (cell, &v) in field.iter().enumerate() {
                if !(v >= floor) {
                    return Err(Error::NonPositivity {
                        species: species.get(s).cloned().unwrap_or_else(|| format!("#{s}")),
                        cell,
                        t: self.t.as_f64(),
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One cosine perturbation `amplitude cos(kx pi x / Lx) cos(ky pi y / Ly)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineMode<T> {
    pub kx: usize,
    pub ky: usize,
    pub amplitude: T,
}

impl<T: Real> CosineMode<T> {
    pub fn new(kx: usize, ky: usize, amplitude: T) -> Self {
        Self { kx, ky, amplitude }
    }

    fn eval(&self, domain: &Domain<T>, x: T, y: T) -> T {
        let pi = T::lit(std::f64::consts::PI);
        match *domain {
            Domain::Interval { length } => self.amplitude * (T::count(self.kx) * pi * x / length).cos(),
            Domain::Rectangle { lx, ly } => {
                self.amplitude
                    * (T::count(self.kx) * pi * x / lx).cos()
                    * (T::count(self.ky) * pi * y / ly).cos()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec<T> {
    /// Per species: a base constant plus a sum of cosine modes.
    Profile {
        base: Vec<T>,
        modes: Vec<Vec<CosineMode<T>>>,
    },
    /// Per species, per cell values (e.g. loaded from a snapshot CSV).
    Cells(Vec<Vec<T>>),
}

impl<T: Real> InitialSpec<T> {
    pub fn constant(base: Vec<T>) -> Self {
        let modes = vec![Vec::new(); base.len()];
        InitialSpec::Profile { base, modes }
    }
}

/// Evaluates the initial data at cell centers.
pub fn build_initial<T: Real>(spec: &InitialSpec<T>, grid: &Grid<T>, species: &[String]) -> Result<State<T>> {
    let n = species.len();
    let fields = match spec {
        InitialSpec::Profile { base, modes } => {
            if base.len() != n || modes.len() != n {
                return Err(Error::InitialData(format!(
                    "initial profile describes {} species, network has {n}",
                    base.len()
                )));
            }
            (0..n)
                .map(|s| {
                    (0..grid.cells())
                        .map(|c| {
                            let (x, y) = grid.center(c);
                            modes[s]
                                .iter()
                                .fold(base[s], |acc, m| acc + m.eval(&grid.domain, x, y))
                        })
                        .collect::<Vec<T>>()
                })
                .collect::<Vec<_>>()
        }
        InitialSpec::Cells(values) => {
            if values.len() != n || values.iter().any(|f| f.len() != grid.cells()) {
                return Err(Error::InitialData(format!(
                    "cell data shape does not match {n} species on {} cells",
                    grid.cells()
                )));
            }
            values.clone()
        }
    };
    for (s, field) in fields.iter().enumerate() {
        if let Some((cell, &v)) = field.iter().enumerate().find(|(_, &v)| !(v >= T::zero())) {
            return Err(Error::InitialData(format!(
                "negative initial value {} for {} in cell {cell}",
                v.as_f64(),
                species[s]
            )));
        }
    }
    Ok(State { t: T::zero(), fields })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ImexEuler,
    Strang,
    StrangRk4,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImexEuler => "imex",
            Scheme::Strang => "strang",
            Scheme::StrangRk4 => "strang-rk4",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "imex" | "imex-euler" | "imex_euler" => Ok(Scheme::ImexEuler),
            "strang" => Ok(Scheme::Strang),
            "strang-rk4" | "strang_rk4" => Ok(Scheme::StrangRk4),
            other => Err(format!("unknown scheme `{other}` (expected imex, strang or strang-rk4)")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum ReactionMethod {
    Euler,
    Heun,
    Rk4,
}

/// Stateful integrator holding the scratch buffers of one run.
pub struct Simulator<'a, T> {
    net: &'a ReactionNetwork,
    grid: Grid<T>,
    scheme: Scheme,
    dt: T,
    diffusion: Vec<T>,
    state: State<T>,
    t0: T,
    steps: usize,
    line: Vec<T>,
    lower: Vec<T>,
    diag: Vec<T>,
    upper: Vec<T>,
    scratch: Vec<T>,
    cell: Vec<Vec<T>>,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub fn new(net: &'a ReactionNetwork, grid: Grid<T>, initial: State<T>, dt: T, scheme: Scheme) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Dimension("time step must be positive".into()));
        }
        if initial.species_count() != net.species_count()
            || initial.fields.iter().any(|f| f.len() != grid.cells())
        {
            return Err(Error::Dimension("state shape does not match network and grid".into()));
        }
        initial.check_nonnegative(&net.species)?;
        let longest = grid.nx.max(grid.ny);
        let n = net.species_count();
        Ok(Self {
            net,
            grid,
            scheme,
            dt,
            diffusion: net.diffusion.iter().map(|&d| T::lit(d)).collect(),
            t0: initial.t,
            state: initial,
            steps: 0,
            line: vec![T::zero(); longest],
            lower: vec![T::zero(); longest],
            diag: vec![T::zero(); longest],
            upper: vec![T::zero(); longest],
            scratch: vec![T::zero(); longest],
            cell: vec![vec![T::zero(); n]; 6],
        })
    }

    pub fn state(&self) -> &State<T> {
        &self.state
    }

    pub fn into_state(self) -> State<T> {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    /// Advances by one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt;
        let half = T::lit(0.5);
        match self.scheme {
            Scheme::ImexEuler => {
                self.diffuse(dt, T::one());
                self.react(dt, ReactionMethod::Euler);
            }
            Scheme::Strang => {
                self.diffuse(dt * half, half);
                self.react(dt, ReactionMethod::Heun);
                self.diffuse(dt * half, half);
            }
            Scheme::StrangRk4 => {
                self.diffuse(dt * half, half);
                self.react(dt, ReactionMethod::Rk4);
                self.diffuse(dt * half, half);
            }
        }
        self.steps += 1;
        self.state.t = self.t0 + T::count(self.steps) * dt;
        self.state.check_nonnegative(&self.net.species)
    }

    /// Theta-method diffusion over `tau`: `theta = 1` backward Euler,
    /// `theta = 1/2` Crank-Nicolson.
    fn diffuse(&mut self, tau: T, theta: T) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let hx = self.grid.hx();
        let hy = self.grid.hy();
        for s in 0..self.state.fields.len() {
            let d = self.diffusion[s];
            let cx = tau * d / (hx * hx);
            for iy in 0..ny {
                self.solve_line(s, iy * nx, 1, nx, cx, theta);
            }
            if self.grid.is_2d() {
                let cy = tau * d / (hy * hy);
                for ix in 0..nx {
                    self.solve_line(s, ix, nx, ny, cy, theta);
                }
            }
        }
    }

    fn solve_line(&mut self, species: usize, start: usize, stride: usize, len: usize, coef: T, theta: T) {
        let field = &mut self.state.fields[species];
        let implicit = theta * coef;
        let explicit = (T::one() - theta) * coef;
        let two = T::lit(2.0);
        for j in 0..len {
            let u = field[start + j * stride];
            let left = if j > 0 { field[start + (j - 1) * stride] } else { u };
            let right = if j + 1 < len { field[start + (j + 1) * stride] } else { u };
            self.line[j] = u + explicit * (left - two * u + right);
            let boundary = j == 0 || j + 1 == len;
            self.diag[j] = T::one() + if boundary { implicit } else { two * implicit };
            if j + 1 < len {
                self.lower[j] = -implicit;
                self.upper[j] = -implicit;
            }
        }
        solve_tridiagonal(
            &self.lower[..len - 1],
            &self.diag[..len],
            &self.upper[..len - 1],
            &mut self.line[..len],
            &mut self.scratch[..len],
        );
        for j in 0..len {
            field[start + j * stride] = self.line[j];
        }
    }

    fn react(&mut self, dt: T, method: ReactionMethod) {
        let n = self.state.fields.len();
        let half = T::lit(0.5);
        let [a, k1, k2, k3, k4, tmp] = &mut self.cell[..] else {
            unreachable!("six scratch vectors")
        };
        for c in 0..self.grid.cells() {
            for s in 0..n {
                a[s] = self.state.fields[s][c];
            }
            match method {
                ReactionMethod::Euler => {
                    self.net.production_into(a, k1);
                    for s in 0..n {
                        a[s] = a[s] + dt * k1[s];
                    }
                }
                ReactionMethod::Heun => {
                    self.net.production_into(a, k1);
                    for s in 0..n {
                        tmp[s] = a[s] + dt * k1[s];
                    }
                    self.net.production_into(tmp, k2);
                    for s in 0..n {
                        a[s] = a[s] + dt * half * (k1[s] + k2[s]);
                    }
                }
                ReactionMethod::Rk4 => {
                    self.net.production_into(a, k1);
                    for s in 0..n {
                        tmp[s] = a[s] + dt * half * k1[s];
                    }
                    self.net.production_into(tmp, k2);
                    for s in 0..n {
                        tmp[s] = a[s] + dt * half * k2[s];
                    }
                    self.net.production_into(tmp, k3);
                    for s in 0..n {
                        tmp[s] = a[s] + dt * k3[s];
                    }
                    self.net.production_into(tmp, k4);
                    let sixth = T::one() / T::lit(6.0);
                    for s in 0..n {
                        a[s] = a[s] + dt * sixth * (k1[s] + T::lit(2.0) * (k2[s] + k3[s]) + k4[s]);
                    }
                }
            }
            for s in 0..n {
                self.state.fields[s][c] = a[s];
            }
        }
    }
}

/// Single step from `state`; allocates a fresh [`Simulator`].
pub fn step<T: Real>(state: &State<T>, net: &ReactionNetwork, grid: &Grid<T>, dt: T, scheme: Scheme) -> Result<State<T>> {
    let mut sim = Simulator::new(net, *grid, state.clone(), dt, scheme)?;
    sim.step()?;
    Ok(sim.into_state())
}

/// Time step heuristic `min(0.1 / ||L||, 0.25 h^2 / max d)` with the
/// Frobenius norm as operator-norm estimate.
pub fn default_time_step<T: Real>(net: &ReactionNetwork, a_inf: &[T], grid: &Grid<T>) -> Result<T> {
    let lin = linearised_matrix(net, a_inf)?;
    let norm = lin.matrix.frobenius_norm();
    let h = if grid.is_2d() { grid.hx().min(grid.hy()) } else { grid.hx() };
    let d_max = net.diffusion.iter().copied().fold(0.0, f64::max);
    let diffusive = T::lit(0.25) * h * h / T::lit(d_max);
    Ok(if norm > T::zero() {
        diffusive.min(T::lit(0.1) / norm)
    } else {
        diffusive
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings<T> {
    pub dt: T,
    pub t_end: T,
    pub scheme: Scheme,
    /// Record diagnostics every this many steps (the first and last step are
    /// always recorded).
    pub output_every: usize,
    /// Keep a snapshot every this many steps.
    pub snapshot_every: Option<usize>,
}

impl<T: Real> RunSettings<T> {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutput<T> {
    pub equilibrium: EquilibriumState<T>,
    pub stoichiometry: StoichiometryDecomposition,
    pub series: DiagnosticsSeries<T>,
    pub snapshots: Vec<State<T>>,
    pub final_state: State<T>,
}

/// Runs a full simulation, recording diagnostics relative to the
/// equilibrium in the compatibility class of the initial data.
pub fn simulate<T: Real>(
    net: &ReactionNetwork,
    grid: &Grid<T>,
    initial: State<T>,
    settings: &RunSettings<T>,
) -> Result<SimulationOutput<T>> {
    if settings.output_every == 0 || settings.snapshot_every == Some(0) {
        return Err(Error::Dimension("output intervals must be at least one step".into()));
    }
    if !(settings.t_end > T::zero()) {
        return Err(Error::Dimension("t_end must be positive".into()));
    }
    let stoich = StoichiometryDecomposition::new(net);
    let masses = conserved_masses(&stoich, &initial.mean(), grid.domain.measure(), &net.species)?;
    let equilibrium = detailed_balance_equilibrium(net, &stoich, &masses)?;
    let steps = settings.steps().max(1);

    let mut series = DiagnosticsSeries::new(&stoich, &net.species);
    let mut snapshots = Vec::new();
    let mut sim = Simulator::new(net, *grid, initial, settings.dt, settings.scheme)?;
    series.push(DiagnosticsRow::evaluate(net, &stoich, grid, sim.state(), &equilibrium.a_inf));
    if settings.snapshot_every.is_some() {
        snapshots.push(sim.state().clone());
    }
    for k in 1..=steps {
        sim.step()?;
        if k % settings.output_every == 0 || k == steps {
            series.push(DiagnosticsRow::evaluate(net, &stoich, grid, sim.state(), &equilibrium.a_inf));
        }
        if let Some(every) = settings.snapshot_every {
            if k % every == 0 || k == steps {
                snapshots.push(sim.state().clone());
            }
        }
    }
    Ok(SimulationOutput {
        equilibrium,
        stoichiometry: stoich,
        series,
        snapshots,
        final_state: sim.into_state(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::StoichiometryDecomposition;
    use std::f64::consts::PI;

    fn four(d: f64) -> ReactionNetwork {
        ReactionNetwork::four_species(1.0, 1.0, [d; 4])
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::interval(1.0, 3).is_err());
        assert!(Grid::interval(0.0, 8).is_err());
        assert!(Grid::rectangle(1.0, 1.0, 8, 2).is_err());
        let g = Grid::rectangle(2.0, 1.0, 8, 4).unwrap();
        assert_eq!(g.cells(), 32);
        assert_eq!(g.cell_volume(), 0.25 * 0.25);
        assert_eq!(g.center(9), (0.375, 0.375));
    }

    #[test]
    fn laplacian_annihilates_constants_and_conserves() {
        for grid in [Grid::interval(1.0, 16).unwrap(), Grid::rectangle(1.0, 2.0, 8, 6).unwrap()] {
            let lap = build_laplacian(&grid);
            let u = vec![3.5; grid.cells()];
            let mut out = vec![1.0; grid.cells()];
            lap.apply(&u, &mut out);
            assert!(out.iter().all(|&x| x == 0.0));

            let u: Vec<f64> = (0..grid.cells()).map(|i| ((i * 37 % 11) as f64).sin() + 2.0).collect();
            lap.apply(&u, &mut out);
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(out.iter().sum::<f64>().abs() <= 1e-13 * norm * lap.inv_hx2.max(lap.inv_hy2));
        }
    }

    #[test]
    fn laplacian_is_second_order_on_cosine() {
        let err = |n: usize| {
            let grid = Grid::interval(1.0, n).unwrap();
            let lap = build_laplacian(&grid);
            let u: Vec<f64> = (0..n).map(|c| (PI * grid.center(c).0).cos()).collect();
            let mut out = vec![0.0; n];
            lap.apply(&u, &mut out);
            out.iter().zip(&u).map(|(l, u)| (l + PI * PI * u).abs()).fold(0.0, f64::max)
        };
        let slope = (err(32) / err(64)).log2();
        assert!((slope - 2.0).abs() < 0.1, "observed order {slope}");
    }

    #[test]
    fn initial_data() {
        let grid = Grid::interval(1.0, 8).unwrap();
        let names: Vec<String> = (1..=4).map(|i| format!("A{i}")).collect();
        let s = build_initial(&InitialSpec::constant(vec![1.0; 4]), &grid, &names).unwrap();
        assert_eq!(s, State::uniform(&[1.0; 4], &grid));

        let eps = 0.01;
        let signs = [1.0, -1.0, 1.0, -1.0];
        let spec = InitialSpec::Profile {
            base: vec![1.0; 4],
            modes: signs.iter().map(|&sg| vec![CosineMode::new(1, 0, sg * eps)]).collect(),
        };
        let s = build_initial(&spec, &grid, &names).unwrap();
        for (sp, field) in s.fields.iter().enumerate() {
            for (c, &v) in field.iter().enumerate() {
                let x = grid.center(c).0;
                assert!((v - 1.0 - signs[sp] * eps * (PI * x).cos()).abs() < 1e-15);
            }
        }

        let mut modes = vec![Vec::new(); 4];
        modes[2].push(CosineMode::new(1, 0, 2.0));
        let bad = InitialSpec::Profile { base: vec![1.0; 4], modes };
        let err = build_initial(&bad, &grid, &names).unwrap_err();
        assert!(err.to_string().contains("negative initial value"));

        let wrong = InitialSpec::Cells(vec![vec![1.0; 7]; 4]);
        assert!(build_initial(&wrong, &grid, &names).is_err());
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let net = four(1.0);
        let grid = Grid::interval(1.0, 16).unwrap();
        let eq = [2.4, 0.6, 0.4, 1.6];
        let start = State::uniform(&eq, &grid);
        for scheme in [Scheme::ImexEuler, Scheme::Strang, Scheme::StrangRk4] {
            let next = step(&start, &net, &grid, 1e-3, scheme).unwrap();
            for (f, &e) in next.fields.iter().zip(&eq) {
                assert!(f.iter().all(|&v| f64::abs(v - e) <= 1e-14), "{scheme:?}");
            }
        }
    }

    #[test]
    fn homogeneous_reaction_matches_closed_form() {
        let net = four(1.0);
        let grid = Grid::interval(1.0, 4).unwrap();
        let mut sim = Simulator::new(&net, grid, State::uniform(&[2.0, 0.0, 2.0, 0.0], &grid), 1e-3, Scheme::Strang).unwrap();
        for _ in 0..500 {
            sim.step().unwrap();
        }
        let a1 = sim.state().fields[0][0];
        assert!((a1 - (1.0 + (-2.0f64).exp())).abs() < 1e-6);
        assert!((sim.state().t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_diffusion_mode_decay() {
        // A1 <-> A2 started at detailed balance in every cell with the same
        // profile shape keeps K = 0 pointwise, leaving pure diffusion.
        let net = ReactionNetwork::new(
            vec!["A1".into(), "A2".into()],
            vec![crate::network::Reaction::new(vec![1, 0], vec![0, 1], 1.0, 1.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let grid = Grid::interval(1.0, 128).unwrap();
        let eps = 0.1;
        let spec = InitialSpec::Profile {
            base: vec![1.0, 1.0],
            modes: vec![vec![CosineMode::new(1, 0, eps)], vec![CosineMode::new(1, 0, eps)]],
        };
        let names = net.species.clone();
        for scheme in [Scheme::ImexEuler, Scheme::Strang] {
            let mut sim = Simulator::new(&net, grid, build_initial(&spec, &grid, &names).unwrap(), 1e-3, scheme).unwrap();
            for _ in 0..100 {
                sim.step().unwrap();
            }
            let decay = (-0.5 * PI * PI * 0.1f64).exp();
            for c in 0..grid.cells() {
                let x = grid.center(c).0;
                let exact = 1.0 + eps * decay * (PI * x).cos();
                assert!((sim.state().fields[0][c] - exact).abs() < 1e-4, "{scheme:?}");
            }
        }
    }

    #[test]
    fn mass_is_conserved_in_2d() {
        let net = four(1.0);
        let grid = Grid::rectangle(1.0, 1.5, 8, 6).unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        let spec = InitialSpec::Profile {
            base: vec![1.0, 0.8, 1.2, 0.9],
            modes: vec![
                vec![CosineMode::new(1, 1, 0.2)],
                vec![CosineMode::new(0, 2, -0.1)],
                vec![CosineMode::new(2, 0, 0.15)],
                vec![],
            ],
        };
        let init = build_initial(&spec, &grid, &net.species).unwrap();
        let before = stoich.q.apply(&init.totals(&grid));
        for scheme in [Scheme::ImexEuler, Scheme::Strang] {
            let mut sim = Simulator::new(&net, grid, init.clone(), 5e-3, scheme).unwrap();
            for _ in 0..50 {
                sim.step().unwrap();
            }
            let after = stoich.q.apply(&sim.state().totals(&grid));
            for (b, a) in before.iter().zip(&after) {
                assert!(f64::abs(b - a) <= 1e-12 * b);
            }
        }
    }

    #[test]
    fn negative_values_abort() {
        // fast forward reaction drives A1/A3 through zero under forward Euler
        let net = ReactionNetwork::four_species(100.0, 100.0, [1.0; 4]);
        let grid = Grid::interval(1.0, 4).unwrap();
        let err = step(&State::uniform(&[1.0, 0.0, 1.0, 0.0], &grid), &net, &grid, 0.1, Scheme::ImexEuler).unwrap_err();
        match err {
            Error::NonPositivity { species, .. } => assert_eq!(species, "A1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::ImexEuler, Scheme::Strang, Scheme::StrangRk4] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("rk45".parse::<Scheme>().is_err());
    }

    #[test]
    fn time_step_heuristic() {
        let net = four(1.0);
        let grid = Grid::interval(1.0, 10).unwrap();
        let dt = default_time_step(&net, &[1.0; 4], &grid).unwrap();
        // ||L||_F = 4, so 0.1/4 = 0.025 versus 0.25 * 0.01 = 0.0025
        assert!(f64::abs(dt - 0.0025) < 1e-15);
    }

    #[test]
    fn single_precision_run() {
        let net = four(1.0);
        let grid = Grid::<f32>::interval(1.0, 8).unwrap();
        let state = step(&State::uniform(&[1.5f32, 0.5, 1.5, 0.5], &grid), &net, &grid, 1e-3, Scheme::Strang).unwrap();
        assert!(state.fields[0][0] < 1.5);
    }
}
