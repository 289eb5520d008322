//! Mass-action reaction networks and their stoichiometric algebra.
//!
//! A network with `I` species and `R` reversible reactions
//! `sum_i alpha_i A_i <-> sum_i beta_i A_i` is described by integer
//! stoichiometric vectors, forward/backward rate constants and one diffusion
//! coefficient per species. The stoichiometric matrix `W` has rows
//! `beta - alpha`; its integer kernel basis `Q` gives the conserved
//! quantities.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// One reversible reaction.
#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    /// Reactant stoichiometric coefficients, one per species.
    pub reactants: Vec<u32>,
    /// Product stoichiometric coefficients, one per species.
    pub products: Vec<u32>,
    pub kf: f64,
    pub kb: f64,
}

impl Reaction {
    pub fn new(reactants: Vec<u32>, products: Vec<u32>, kf: f64, kb: f64) -> Self {
        Self {
            reactants,
            products,
            kf,
            kb,
        }
    }

    /// Total order of the reactant side.
    pub fn reactant_order(&self) -> u32 {
        self.reactants.iter().sum()
    }

    /// Total order of the product side.
    pub fn product_order(&self) -> u32 {
        self.products.iter().sum()
    }

    /// `reactants - products`, the direction the forward flux removes.
    pub fn net_consumption(&self) -> Vec<i64> {
        self.reactants
            .iter()
            .zip(&self.products)
            .map(|(&a, &b)| i64::from(a) - i64::from(b))
            .collect()
    }

    /// `kf a^alpha - kb a^beta`.
    pub fn flux<T: Scalar>(&self, a: &[T]) -> T {
        let kf = T::from_f64(self.kf).expect("rate representable");
        let kb = T::from_f64(self.kb).expect("rate representable");
        kf * monomial(a, &self.reactants) - kb * monomial(a, &self.products)
    }
}

/// `prod_i a_i^{k_i}`, with `0^0 = 1`.
pub fn monomial<T: Scalar>(a: &[T], powers: &[u32]) -> T {
    a.iter()
        .zip(powers)
        .fold(T::one(), |acc, (x, &k)| acc * num_traits::pow(x.clone(), k as usize))
}

#[inline]
fn monomial_real<T: Real>(a: &[T], powers: &[u32]) -> T {
    let mut acc = T::one();
    for (&x, &k) in a.iter().zip(powers) {
        match k {
            0 => {}
            1 => acc = acc * x,
            2 => acc = acc * x * x,
            _ => acc = acc * x.powi(k as i32),
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReactionNetwork {
    pub species: Vec<String>,
    pub reactions: Vec<Reaction>,
    pub diffusion: Vec<f64>,
}

impl ReactionNetwork {
    /// Checks only that all vectors have one entry per species; admissibility
    /// is the job of [`validate_network`].
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>, diffusion: Vec<f64>) -> Result<Self> {
        let n = species.len();
        if diffusion.len() != n {
            return Err(Error::Dimension(format!(
                "{} diffusion coefficients for {} species",
                diffusion.len(),
                n
            )));
        }
        for (r, reaction) in reactions.iter().enumerate() {
            if reaction.reactants.len() != n || reaction.products.len() != n {
                return Err(Error::Dimension(format!(
                    "reaction {} has stoichiometry of length {}/{} for {} species",
                    r + 1,
                    reaction.reactants.len(),
                    reaction.products.len(),
                    n
                )));
            }
        }
        Ok(Self {
            species,
            reactions,
            diffusion,
        })
    }

    /// `A1 + A3 <-> A2 + A4` with the given rates and diffusion coefficients.
    pub fn four_species(kf: f64, kb: f64, diffusion: [f64; 4]) -> Self {
        Self {
            species: (1..=4).map(|i| format!("A{i}")).collect(),
            reactions: vec![Reaction::new(vec![1, 0, 1, 0], vec![0, 1, 0, 1], kf, kb)],
            diffusion: diffusion.to_vec(),
        }
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// True for a single reaction whose stoichiometry is `A1 + A3 <-> A2 + A4`
    /// (in either direction).
    pub fn is_four_species(&self) -> bool {
        if self.species_count() != 4 || self.reaction_count() != 1 {
            return false;
        }
        let r = &self.reactions[0];
        let fwd = r.reactants == [1, 0, 1, 0] && r.products == [0, 1, 0, 1];
        let rev = r.reactants == [0, 1, 0, 1] && r.products == [1, 0, 1, 0];
        fwd || rev
    }

    /// Writes `P(a) = W^T K(a)` into `out` without checks; used by the time
    /// integrators on every cell.
    pub fn production_into<T: Real>(&self, a: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|p| *p = T::zero());
        for r in &self.reactions {
            let flux = T::lit(r.kf) * monomial_real(a, &r.reactants)
                - T::lit(r.kb) * monomial_real(a, &r.products);
            for i in 0..out.len() {
                let change = i64::from(r.products[i]) - i64::from(r.reactants[i]);
                if change != 0 {
                    out[i] = out[i] + T::lit(change as f64) * flux;
                }
            }
        }
    }
}

/// Dense integer matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    cols: usize,
    rows: Vec<Vec<i64>>,
}

impl IntMatrix {
    pub fn new(cols: usize, rows: Vec<Vec<i64>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == cols), "ragged integer matrix");
        Self { cols, rows }
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            cols,
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.rows[i]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[i64]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `self * other^T`, in 128-bit arithmetic.
    pub fn mul_transpose(&self, other: &IntMatrix) -> Vec<Vec<i128>> {
        assert_eq!(self.cols, other.cols);
        self.rows
            .iter()
            .map(|a| {
                other
                    .rows
                    .iter()
                    .map(|b| a.iter().zip(b).map(|(&x, &y)| i128::from(x) * i128::from(y)).sum())
                    .collect()
            })
            .collect()
    }

    /// Applies the matrix to a vector of any scalar type.
    pub fn apply<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| {
                row.iter().zip(v).fold(T::zero(), |acc, (&q, x)| {
                    acc + T::from_i64(q).expect("integer representable") * x.clone()
                })
            })
            .collect()
    }

    /// Rank over the rationals.
    pub fn rank(&self) -> usize {
        let mut m: Vec<Vec<i128>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&x| i128::from(x)).collect())
            .collect();
        eliminate(&mut m, self.cols).len()
    }
}

/// The stoichiometric matrix `W` together with its conservation basis `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoichiometryDecomposition {
    pub w: IntMatrix,
    pub q: IntMatrix,
    pub rank: usize,
}

impl StoichiometryDecomposition {
    pub fn new(net: &ReactionNetwork) -> Self {
        let w = stoichiometric_matrix(net);
        let q = conservation_basis(&w);
        let rank = w.cols() - q.rows();
        Self { w, q, rank }
    }

    pub fn conserved_count(&self) -> usize {
        self.q.rows()
    }

    /// Human label of a conservation law, e.g. `A1 + A2`.
    pub fn law_label(&self, k: usize, species: &[String]) -> String {
        let mut out = String::new();
        for (i, &c) in self.q.row(k).iter().enumerate() {
            if c == 0 {
                continue;
            }
            let name = species.get(i).map_or("?", String::as_str);
            if out.is_empty() {
                if c < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0 { " - " } else { " + " });
            }
            if c.abs() != 1 {
                out.push_str(&format!("{} ", c.abs()));
            }
            out.push_str(name);
        }
        out
    }
}

/// `W[r][i] = beta_i^r - alpha_i^r`.
pub fn stoichiometric_matrix(net: &ReactionNetwork) -> IntMatrix {
    let rows = net
        .reactions
        .iter()
        .map(|r| {
            r.products
                .iter()
                .zip(&r.reactants)
                .map(|(&b, &a)| i64::from(b) - i64::from(a))
                .collect()
        })
        .collect();
    IntMatrix::new(net.species_count(), rows)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn make_primitive(row: &mut [i128]) {
    let g = row.iter().fold(0, |g, &x| gcd(g, x));
    if g > 1 {
        row.iter_mut().for_each(|x| *x /= g);
    }
}

/// Fraction-free Gauss-Jordan elimination, leftmost pivot column first and
/// the first row with a nonzero entry as pivot row. Rows are kept primitive
/// after every update. Returns the pivot columns; the first `len` rows of
/// `m` are the reduced pivot rows.
fn eliminate(m: &mut [Vec<i128>], cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, p);
        for k in 0..m.len() {
            if k == r || m[k][c] == 0 {
                continue;
            }
            let g = gcd(m[r][c], m[k][c]);
            let scale_k = m[r][c] / g;
            let scale_r = m[k][c] / g;
            for j in 0..cols {
                m[k][j] = m[k][j] * scale_k - m[r][j] * scale_r;
            }
            make_primitive(&mut m[k]);
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    pivots
}

fn negative_mass(row: &[i128]) -> i128 {
    row.iter().filter(|&&x| x < 0).map(|&x| -x).sum()
}

fn positive_mass(row: &[i128]) -> i128 {
    row.iter().filter(|&&x| x > 0).sum()
}

/// Integer basis of `Ker W`, one primitive row per conserved quantity.
///
/// The kernel is read off the reduced echelon form of `W`. The basis is then
/// normalized deterministically: rows are combined by unimodular `+-1` row
/// additions as long as that strictly lowers the total weight of negative
/// entries, each row is oriented so positive weight dominates, and rows are
/// sorted in descending lexicographic order. For `A1 + A3 <-> A2 + A4` this
/// yields `A1 + A2`, `A1 + A4`, `A2 + A3`.
pub fn conservation_basis(w: &IntMatrix) -> IntMatrix {
    let cols = w.cols();
    let mut m: Vec<Vec<i128>> = w
        .iter_rows()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let pivots = eliminate(&mut m, cols);

    let mut basis: Vec<Vec<i128>> = Vec::new();
    for f in (0..cols).filter(|c| !pivots.contains(c)) {
        let lcm = pivots.iter().enumerate().fold(1i128, |l, (r, _)| {
            if m[r][f] == 0 {
                l
            } else {
                let p = m[r][pivots[r]].abs();
                l / gcd(l, p) * p
            }
        });
        let mut v = vec![0i128; cols];
        v[f] = lcm;
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = -m[r][f] * lcm / m[r][p];
        }
        make_primitive(&mut v);
        basis.push(v);
    }

    loop {
        let mut improved = false;
        for i in 0..basis.len() {
            if positive_mass(&basis[i]) < negative_mass(&basis[i]) {
                basis[i].iter_mut().for_each(|x| *x = -*x);
            }
            for j in 0..basis.len() {
                if i == j {
                    continue;
                }
                for sign in [1i128, -1] {
                    let mut cand: Vec<i128> = basis[i]
                        .iter()
                        .zip(&basis[j])
                        .map(|(&a, &b)| a + sign * b)
                        .collect();
                    make_primitive(&mut cand);
                    if negative_mass(&cand) < negative_mass(&basis[i]) {
                        basis[i] = cand;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    for row in &mut basis {
        let first = row.iter().copied().find(|&x| x != 0).unwrap_or(1);
        let (pos, neg) = (positive_mass(row), negative_mass(row));
        if pos < neg || (pos == neg && first < 0) {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    basis.sort_by(|a, b| b.cmp(a));

    let rows = basis
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|x| i64::try_from(x).expect("conservation coefficient overflow"))
                .collect()
        })
        .collect();
    IntMatrix::new(cols, rows)
}

/// Reaction fluxes `K` and species production `P = W^T K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Production<T> {
    pub fluxes: Vec<T>,
    pub production: Vec<T>,
}

/// Mass-action fluxes `K_r = kf_r a^alpha - kb_r a^beta` and the resulting
/// species production `P = W^T K`, so that `d_t a = d Lap a + P(a)`.
pub fn production_term<T: Scalar>(net: &ReactionNetwork, a: &[T]) -> Result<Production<T>> {
    if a.len() != net.species_count() {
        return Err(Error::Dimension(format!(
            "state has {} components for {} species",
            a.len(),
            net.species_count()
        )));
    }
    if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| **v < T::zero()) {
        return Err(Error::NegativeConcentration {
            species: i,
            value: v.to_f64().unwrap_or(f64::NAN),
        });
    }
    let fluxes: Vec<T> = net.reactions.iter().map(|r| r.flux(a)).collect();
    let mut production = vec![T::zero(); a.len()];
    for (r, k) in net.reactions.iter().zip(&fluxes) {
        for (i, p) in production.iter_mut().enumerate() {
            let change = i64::from(r.products[i]) - i64::from(r.reactants[i]);
            if change != 0 {
                *p = p.clone() + T::from_i64(change).expect("integer representable") * k.clone();
            }
        }
    }
    Ok(Production { fluxes, production })
}

/// One reason a network is not admissible.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewSpecies(usize),
    NoReactions,
    DuplicateSpecies(String),
    NonPositiveDiffusion { species: String, value: f64 },
    NonPositiveRate { reaction: usize, which: &'static str, value: f64 },
    NonQuadratic { reaction: usize, side: &'static str, order: u32 },
    NoOp { reaction: usize },
    ShapeMismatch(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewSpecies(n) => write!(f, "at least 2 species required, found {n}"),
            Violation::NoReactions => write!(f, "at least one reaction required"),
            Violation::DuplicateSpecies(name) => write!(f, "duplicate species name {name}"),
            Violation::NonPositiveDiffusion { species, value } => {
                write!(f, "diffusion of {species} must be strictly positive (got {value})")
            }
            Violation::NonPositiveRate {
                reaction,
                which,
                value,
            } => write!(
                f,
                "reaction {reaction}: rate must be strictly positive ({which} = {value})"
            ),
            Violation::NonQuadratic {
                reaction,
                side,
                order,
            } => write!(f, "reaction {reaction}: non-quadratic: |{side}| = {order}"),
            Violation::NoOp { reaction } => {
                write!(f, "reaction {reaction}: reactants equal products (no-op reaction)")
            }
            Violation::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Informational remarks that do not make the network inadmissible.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects every admissibility violation; never fails.
pub fn validate_network(net: &ReactionNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = net.species_count();
    if n < 2 {
        report.violations.push(Violation::TooFewSpecies(n));
    }
    if net.reactions.is_empty() {
        report.violations.push(Violation::NoReactions);
    }
    for (i, name) in net.species.iter().enumerate() {
        if net.species[..i].iter().filter(|s| *s == name).count() == 1 {
            report.violations.push(Violation::DuplicateSpecies(name.clone()));
        }
    }
    if net.diffusion.len() != n {
        report.violations.push(Violation::ShapeMismatch(format!(
            "{} diffusion coefficients for {n} species",
            net.diffusion.len()
        )));
    }
    for (name, &d) in net.species.iter().zip(&net.diffusion) {
        if !(d > 0.0 && d.is_finite()) {
            report.violations.push(Violation::NonPositiveDiffusion {
                species: name.clone(),
                value: d,
            });
        }
    }
    for (idx, r) in net.reactions.iter().enumerate() {
        let reaction = idx + 1;
        if r.reactants.len() != n || r.products.len() != n {
            report.violations.push(Violation::ShapeMismatch(format!(
                "reaction {reaction} stoichiometry length differs from species count"
            )));
            continue;
        }
        for (which, value) in [("kf", r.kf), ("kb", r.kb)] {
            if !(value > 0.0 && value.is_finite()) {
                report.violations.push(Violation::NonPositiveRate {
                    reaction,
                    which,
                    value,
                });
            }
        }
        for (side, order) in [("α", r.reactant_order()), ("β", r.product_order())] {
            if order > 2 {
                report.violations.push(Violation::NonQuadratic {
                    reaction,
                    side,
                    order,
                });
            }
        }
        if r.reactants == r.products {
            report.violations.push(Violation::NoOp { reaction });
        }
        if r.reactant_order() == 0 || r.product_order() == 0 {
            report.notes.push(format!(
                "reaction {reaction} has an empty side (pure production/degradation); it changes the conservation laws"
            ));
        }
    }
    report
}
