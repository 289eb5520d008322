//! Linearisation around a detailed-balance equilibrium and the spectral gap
//! of `T = D + L` under Neumann boundary conditions.
//!
//! Writing `a = a_inf + h`, the reaction part linearises to
//! `L h = -sum_r kf_r a_inf^alpha_r (alpha_r - beta_r) <alpha_r - beta_r, h>_w`
//! with the weighted inner product `<u, v>_w = sum_i u_i v_i / a_inf_i`.
//! `L` is self-adjoint and nonpositive for that product. Expanding `h` in
//! Neumann eigenfunctions decouples `T` into the matrices
//! `-mu_k diag(d) + L`, one per Laplacian eigenvalue `mu_k`; the constant
//! mode is restricted to `Im W^T` because the conservation laws pin the
//! kernel directions.

use crate::domain::{neumann_eigenvalues, Domain};
use crate::equilibrium::detailed_balance_residual;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::network::{monomial, ReactionNetwork};
use crate::scalar::{dot, norm2, Real};

/// Relative detailed-balance residual accepted for an `a_inf` passed in by
/// the caller.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;
/// Asymmetry of the similarity-transformed operator that is still accepted.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MODE_BUDGET: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearisedMatrix<T> {
    pub matrix: Matrix<T>,
    /// `w_i = 1 / a_inf_i`.
    pub weights: Vec<T>,
}

impl<T: Real> LinearisedMatrix<T> {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, h: &[T]) -> Vec<T> {
        self.matrix.mul_vec(h)
    }

    /// `<u, v>_w`.
    pub fn inner(&self, u: &[T], v: &[T]) -> T {
        u.iter()
            .zip(v)
            .zip(&self.weights)
            .fold(T::zero(), |s, ((&x, &y), &w)| s + x * y * w)
    }
}

/// `L_ij = -sum_r kf_r a_inf^alpha_r (alpha_i - beta_i)(alpha_j - beta_j) / a_inf_j`.
pub fn linearised_matrix<T: Real>(net: &ReactionNetwork, a_inf: &[T]) -> Result<LinearisedMatrix<T>> {
    let n = net.species_count();
    if a_inf.len() != n {
        return Err(Error::Dimension(format!("a_inf has {} entries for {n} species", a_inf.len())));
    }
    if let Some((i, &v)) = a_inf.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
        return Err(Error::NegativeConcentration {
            species: i,
            value: v.as_f64(),
        });
    }
    let (_, relative) = detailed_balance_residual(net, a_inf);
    if relative > T::tol(EQUILIBRIUM_TOLERANCE) {
        return Err(Error::NotEquilibrium {
            residual: relative.as_f64(),
        });
    }
    let mut matrix = Matrix::zeros(n, n);
    for r in &net.reactions {
        let rate = T::lit(r.kf) * monomial(a_inf, &r.reactants);
        let v: Vec<T> = r.net_consumption().iter().map(|&x| T::lit(x as f64)).collect();
        for i in 0..n {
            for j in 0..n {
                matrix[(i, j)] = matrix[(i, j)] - rate * v[i] * v[j] / a_inf[j];
            }
        }
    }
    Ok(LinearisedMatrix {
        matrix,
        weights: a_inf.iter().map(|&a| T::one() / a).collect(),
    })
}

/// `diag(sqrt w) A diag(1/sqrt w)`, checked for symmetry and symmetrized.
fn similarity<T: Real>(a: &Matrix<T>, weights: &[T]) -> Result<Matrix<T>> {
    let n = a.rows();
    let sqrt_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let s = Matrix::from_fn(n, n, |i, j| sqrt_w[i] * a[(i, j)] / sqrt_w[j]);
    let scale = T::one().max(s.frobenius_norm());
    let asym = s.asymmetry();
    if asym > T::tol(SYMMETRY_TOLERANCE) * scale {
        return Err(Error::NotSymmetric {
            asymmetry: (asym / scale).as_f64(),
        });
    }
    Ok(Matrix::from_fn(n, n, |i, j| (s[(i, j)] + s[(j, i)]) / T::lit(2.0)))
}

/// Orthonormal basis (Euclidean) of `span{ diag(sqrt w) b }` for the given
/// vectors, via modified Gram-Schmidt; dependent vectors are dropped.
fn weighted_orthonormal_basis<T: Real>(basis: &[Vec<T>], weights: &[T]) -> Vec<Vec<T>> {
    let sqrt_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let mut out: Vec<Vec<T>> = Vec::new();
    for b in basis {
        let mut v: Vec<T> = b.iter().zip(&sqrt_w).map(|(&x, &s)| x * s).collect();
        let original = norm2(&v);
        if original == T::zero() {
            continue;
        }
        for _ in 0..2 {
            for u in &out {
                let c = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(x, &y)| *x = *x - c * y);
            }
        }
        let len = norm2(&v);
        if len > T::tol(1e-10) * original {
            out.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    out
}

/// Eigenvalues (ascending) of a weighted-symmetric operator, optionally
/// restricted to an invariant subspace spanned by `subspace`.
pub fn weighted_spectrum<T: Real>(lin: &LinearisedMatrix<T>, subspace: Option<&[Vec<T>]>) -> Result<Vec<T>> {
    spectrum_of(&lin.matrix, &lin.weights, subspace)
}

fn spectrum_of<T: Real>(a: &Matrix<T>, weights: &[T], subspace: Option<&[Vec<T>]>) -> Result<Vec<T>> {
    let s = similarity(a, weights)?;
    let projected = match subspace {
        None => s,
        Some(basis) => {
            let u = weighted_orthonormal_basis(basis, weights);
            let k = u.len();
            let su: Vec<Vec<T>> = u.iter().map(|col| s.mul_vec(col)).collect();
            let p = Matrix::from_fn(k, k, |i, j| dot(&u[i], &su[j]));
            Matrix::from_fn(k, k, |i, j| (p[(i, j)] + p[(j, i)]) / T::lit(2.0))
        }
    };
    Ok(symmetric_eigen(&projected).values)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeGap<T> {
    /// Laplacian eigenvalue `mu_k`.
    pub mu: T,
    /// `-(largest eigenvalue of -mu_k D + L)` on the mode's admissible space.
    pub gap: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGapReport<T> {
    pub lambda_star: T,
    pub per_mode: Vec<ModeGap<T>>,
    pub modes_examined: usize,
    /// Constructive lower bound, available for the four-species system only.
    pub analytic_bound: Option<T>,
}

/// Spectral gap of `D + L` on the conservation-constrained space, mode by
/// mode. Enumeration stops as soon as `mu_k min_i d_i` reaches the current
/// minimum (no later mode can undercut it) or after `max_modes` modes.
pub fn operator_spectral_gap<T: Real>(
    net: &ReactionNetwork,
    a_inf: &[T],
    domain: &Domain<T>,
    max_modes: usize,
) -> Result<SpectralGapReport<T>> {
    let lin = linearised_matrix(net, a_inf)?;
    let n = lin.dim();
    let diffusion: Vec<T> = net.diffusion.iter().map(|&d| T::lit(d)).collect();
    let d_min = diffusion.iter().copied().fold(T::infinity(), T::min);

    let image: Vec<Vec<T>> = net
        .reactions
        .iter()
        .map(|r| r.net_consumption().iter().map(|&x| T::lit(x as f64)).collect())
        .collect();
    let zero_mode = weighted_spectrum(&lin, Some(&image))?;
    let top = zero_mode.last().copied().unwrap_or_else(T::neg_infinity);
    let mut per_mode = vec![ModeGap {
        mu: T::zero(),
        gap: -top,
    }];
    let mut lambda_star = -top;

    let mus = neumann_eigenvalues(domain, max_modes.max(2));
    for &mu in mus.iter().skip(1) {
        if mu * d_min >= lambda_star {
            break;
        }
        let mut a = lin.matrix.clone();
        for i in 0..n {
            a[(i, i)] = a[(i, i)] - mu * diffusion[i];
        }
        let values = spectrum_of(&a, &lin.weights, None)?;
        let gap = -*values.last().expect("nonempty spectrum");
        per_mode.push(ModeGap { mu, gap });
        lambda_star = lambda_star.min(gap);
    }

    let analytic_bound = if net.is_four_species() {
        Some(analytic_gap_bound_four_species(net, a_inf, domain.poincare_constant())?)
    } else {
        None
    };
    Ok(SpectralGapReport {
        lambda_star,
        modes_examined: per_mode.len(),
        per_mode,
        analytic_bound,
    })
}

/// Constructive lower bound on the four-species gap.
///
/// With `M12 = a1 + a2`, `M14 = a1 + a4`, `M32 = a3 + a2`,
/// `M34 = a3 + a4`, `M = sum a` (unit measure) and
/// `C_M = M12 M32 M14 M34 / M^2`, the bound is `gamma min_i d_i` where
/// `gamma = min(C_Omega, C_M (sum 1/a_i)^2 / sum(d_i / a_i))`.
///
/// `C_M` is the reaction coefficient `kf a_inf^alpha` of the linearised
/// operator; at an equilibrium with unit rates it equals the mass formula
/// above, and for other rates the coefficient is used directly.
pub fn analytic_gap_bound_four_species<T: Real>(net: &ReactionNetwork, a_inf: &[T], poincare: T) -> Result<T> {
    if !net.is_four_species() {
        return Err(Error::NotFourSpecies);
    }
    if a_inf.len() != 4 {
        return Err(Error::Dimension(format!("a_inf has {} entries for 4 species", a_inf.len())));
    }
    let (_, relative) = detailed_balance_residual(net, a_inf);
    if relative > T::tol(EQUILIBRIUM_TOLERANCE) {
        return Err(Error::NotEquilibrium {
            residual: relative.as_f64(),
        });
    }
    let a = a_inf;
    let reaction = &net.reactions[0];
    let c_m = T::lit(reaction.kf) * monomial(a, &reaction.reactants);

    let d: Vec<T> = net.diffusion.iter().map(|&x| T::lit(x)).collect();
    let inv_sum = a.iter().fold(T::zero(), |s, &x| s + T::one() / x);
    let weighted_d = a.iter().zip(&d).fold(T::zero(), |s, (&x, &di)| s + di / x);
    let gamma = poincare.min(c_m * inv_sum * inv_sum / weighted_d);
    let d_min = d.iter().copied().fold(T::infinity(), T::min);
    Ok(gamma * d_min)
}
