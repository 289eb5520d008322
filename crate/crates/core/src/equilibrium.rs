//! Conserved masses and strictly positive detailed-balance equilibria.
//!
//! The general solver works in two stages. First the Wegscheider system
//! `W mu = ln(kf / kb)` is solved in the least-squares sense; a nonzero
//! residual means no detailed-balance equilibrium exists. Every positive
//! state with `ln a - mu` in `Ker W = span(Q^T)` then satisfies detailed
//! balance, so the equilibrium is `a(theta) = exp(mu + Q^T theta)` with
//! `theta` chosen to hit the prescribed masses. That last step minimizes the
//! strictly convex dual `sum_i a_i(theta) - theta . m` by damped Newton.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, symmetric_eigen, Matrix};
use crate::network::{monomial, ReactionNetwork, StoichiometryDecomposition};
use crate::scalar::{dot, norm2, Real};

/// Residual above which the Wegscheider system is declared infeasible.
pub const WEGSCHEIDER_TOLERANCE: f64 = 1e-9;
/// Newton stops once every law `k` has `|(Q a)_k - m_k| <= tol (|Q| a)_k`.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const MAX_NEWTON_ITERATIONS: usize = 200;

/// `m = Q . integral(a)`, one entry per row of `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedMasses<T> {
    pub values: Vec<T>,
    /// `|Omega|`; equilibria are homogeneous with `Q a_inf = values / volume`.
    pub volume: T,
}

impl<T: Real> ConservedMasses<T> {
    pub fn new(values: Vec<T>, volume: T) -> Self {
        Self { values, volume }
    }

    /// Masses on a domain of unit measure.
    pub fn unit(values: Vec<T>) -> Self {
        Self::new(values, T::one())
    }

    /// `Q a / |Omega|`-level targets.
    fn densities(&self) -> Vec<T> {
        self.values.iter().map(|&m| m / self.volume).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumState<T> {
    pub a_inf: Vec<T>,
    pub masses: ConservedMasses<T>,
    /// `max_r |K_r(a_inf)|`.
    pub db_residual: T,
    /// Newton iterations used (0 for closed-form results).
    pub iterations: usize,
}

/// Masses carried by a spatially averaged state: `m = Q . mean . |Omega|`.
///
/// Every component must be strictly positive, otherwise the compatibility
/// class touches the boundary and no positive equilibrium is guaranteed.
pub fn conserved_masses<T: Real>(
    stoich: &StoichiometryDecomposition,
    mean: &[T],
    volume: T,
    species: &[String],
) -> Result<ConservedMasses<T>> {
    if mean.len() != stoich.q.cols() {
        return Err(Error::Dimension(format!(
            "mean state has {} components, network has {} species",
            mean.len(),
            stoich.q.cols()
        )));
    }
    if let Some((i, &v)) = mean.iter().enumerate().find(|(_, &v)| v < T::zero()) {
        return Err(Error::NegativeConcentration {
            species: i,
            value: v.as_f64(),
        });
    }
    let values: Vec<T> = stoich.q.apply(mean).into_iter().map(|m| m * volume).collect();
    for (k, &m) in values.iter().enumerate() {
        if !(m > T::zero()) {
            return Err(Error::NonPositiveMass {
                label: format!("#{} ({})", k + 1, stoich.law_label(k, species)),
                value: m.as_f64(),
            });
        }
    }
    Ok(ConservedMasses::new(values, volume))
}

/// Closed-form equilibrium of `A1 + A3 <-> A2 + A4` with unit rates on a
/// domain of unit measure: `a_1 = M12 M14 / M`, `a_2 = M12 M32 / M`,
/// `a_3 = M32 M34 / M`, `a_4 = M14 M34 / M` with `M = M12 + M34 = M14 + M32`.
pub fn four_species_equilibrium<T: Real>(m12: T, m14: T, m32: T, m34: T) -> Result<EquilibriumState<T>> {
    for (label, v) in [("M12", m12), ("M14", m14), ("M32", m32), ("M34", m34)] {
        if !(v > T::zero()) {
            return Err(Error::NonPositiveMass {
                label: label.to_string(),
                value: v.as_f64(),
            });
        }
    }
    let lhs = m12 + m34;
    let rhs = m14 + m32;
    let total = lhs.max(rhs);
    if (lhs - rhs).abs() > T::tol(1e-12) * total {
        return Err(Error::InconsistentMasses {
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
        });
    }
    let total = (lhs + rhs) / T::lit(2.0);
    let a_inf = vec![
        m12 * m14 / total,
        m12 * m32 / total,
        m32 * m34 / total,
        m14 * m34 / total,
    ];
    let db_residual = (a_inf[0] * a_inf[2] - a_inf[1] * a_inf[3]).abs();
    Ok(EquilibriumState {
        a_inf,
        masses: ConservedMasses::unit(vec![m12, m14, m32]),
        db_residual,
        iterations: 0,
    })
}

/// Least-squares solution of `W mu = c` (minimum norm) and its residual.
fn wegscheider<T: Real>(stoich: &StoichiometryDecomposition, net: &ReactionNetwork) -> (Vec<T>, T) {
    let n = stoich.w.cols();
    let w = Matrix::from_fn(stoich.w.rows(), n, |r, i| T::lit(stoich.w.row(r)[i] as f64));
    let c: Vec<T> = net
        .reactions
        .iter()
        .map(|r| T::lit(r.kf).ln() - T::lit(r.kb).ln())
        .collect();
    let wt = w.transpose();
    let normal = wt.matmul(&w);
    let rhs = wt.mul_vec(&c);
    let eig = symmetric_eigen(&normal);
    let largest = eig.values.last().copied().unwrap_or_else(T::zero);
    let cutoff = T::tol(1e-10) * largest;
    let mut mu = vec![T::zero(); n];
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.vectors.column(k);
            let coef = dot(&v, &rhs) / lambda;
            for i in 0..n {
                mu[i] = mu[i] + coef * v[i];
            }
        }
    }
    let fit = w.mul_vec(&mu);
    let residual: Vec<T> = fit.iter().zip(&c).map(|(&f, &c)| f - c).collect();
    (mu, norm2(&residual))
}

fn residual_norm<T: Real>(q: &Matrix<T>, a: &[T], target: &[T]) -> T {
    let r: Vec<T> = q.mul_vec(a).iter().zip(target).map(|(&qa, &m)| qa - m).collect();
    norm2(&r)
}

fn state_at<T: Real>(mu: &[T], q: &Matrix<T>, theta: &[T]) -> Vec<T> {
    (0..mu.len())
        .map(|i| {
            let shift = (0..q.rows()).fold(T::zero(), |acc, k| acc + q[(k, i)] * theta[k]);
            (mu[i] + shift).exp()
        })
        .collect()
}

/// `max_r |K_r(a)|` and `max_r |K_r(a)| / (kf_r a^alpha_r)`.
pub fn detailed_balance_residual<T: Real>(net: &ReactionNetwork, a: &[T]) -> (T, T) {
    let mut absolute = T::zero();
    let mut relative = T::zero();
    for r in &net.reactions {
        let forward = T::lit(r.kf) * monomial(a, &r.reactants);
        let backward = T::lit(r.kb) * monomial(a, &r.products);
        let k = (forward - backward).abs();
        absolute = absolute.max(k);
        let scale = forward.max(backward);
        if scale > T::zero() {
            relative = relative.max(k / scale);
        } else if k > T::zero() {
            relative = T::infinity();
        }
    }
    (absolute, relative)
}

/// The unique strictly positive detailed-balance equilibrium in the
/// compatibility class of `masses`.
pub fn detailed_balance_equilibrium<T: Real>(
    net: &ReactionNetwork,
    stoich: &StoichiometryDecomposition,
    masses: &ConservedMasses<T>,
) -> Result<EquilibriumState<T>> {
    let q_rows = stoich.q.rows();
    if masses.values.len() != q_rows {
        return Err(Error::Dimension(format!(
            "{} masses given, network has {} conservation laws",
            masses.values.len(),
            q_rows
        )));
    }
    for (k, &m) in masses.values.iter().enumerate() {
        if !(m > T::zero()) {
            return Err(Error::NonPositiveMass {
                label: format!("#{} ({})", k + 1, stoich.law_label(k, &net.species)),
                value: m.as_f64(),
            });
        }
    }

    let (mu, residual) = wegscheider::<T>(stoich, net);
    if residual > T::lit(WEGSCHEIDER_TOLERANCE) {
        return Err(Error::NoDetailedBalance {
            residual: residual.as_f64(),
        });
    }

    let n = stoich.q.cols();
    let q = Matrix::from_fn(q_rows, n, |k, i| T::lit(stoich.q.row(k)[i] as f64));
    let target = masses.densities();
    let target_norm = norm2(&target);
    let tol = T::tol(NEWTON_TOLERANCE);

    let mut theta = vec![T::zero(); q_rows];
    let mut a = state_at(&mu, &q, &theta);
    let dual = |a: &[T], theta: &[T]| a.iter().fold(T::zero(), |s, &x| s + x) - dot(theta, &target);
    let mut iterations = 0;
    let mut gradient_norm;
    loop {
        let gradient: Vec<T> = q
            .mul_vec(&a)
            .iter()
            .zip(&target)
            .map(|(&qa, &m)| qa - m)
            .collect();
        gradient_norm = norm2(&gradient);
        // per law, against the size of its terms: small masses next to
        // large ones and nearly cancelling mixed-sign laws both stay accurate
        let converged = gradient.iter().enumerate().all(|(k, &g)| {
            let scale = (0..n).fold(T::zero(), |s, i| s + q[(k, i)].abs() * a[i]);
            g.abs() <= tol * scale
        });
        if converged {
            break;
        }
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: (gradient_norm / target_norm).as_f64(),
            });
        }
        iterations += 1;

        let hessian = Matrix::from_fn(q_rows, q_rows, |k, l| {
            (0..n).fold(T::zero(), |s, i| s + q[(k, i)] * a[i] * q[(l, i)])
        });
        let neg_grad: Vec<T> = gradient.iter().map(|&g| -g).collect();
        let Some(step) = cholesky_solve(&hessian, &neg_grad) else {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: (gradient_norm / target_norm).as_f64(),
            });
        };
        let slope = dot(&gradient, &step);
        let current = dual(&a, &theta);
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&x, &s)| x + t * s).collect();
            if trial == theta {
                break;
            }
            let trial_a = state_at(&mu, &q, &trial);
            let value = dual(&trial_a, &trial);
            // Near the solution the dual decrease drowns in roundoff, so a
            // sufficient drop of the mass residual also counts.
            let armijo = value.is_finite() && value <= current + T::lit(1e-4) * t * slope;
            if armijo || residual_norm(&q, &trial_a, &target) <= (T::one() - T::lit(1e-4) * t) * gradient_norm {
                theta = trial;
                a = trial_a;
                accepted = true;
                break;
            }
            t = t / T::lit(2.0);
        }
        if !accepted {
            // At the roundoff floor the dual can no longer decrease; take the
            // full step if it reduces the mass residual.
            let trial: Vec<T> = theta.iter().zip(&step).map(|(&x, &s)| x + s).collect();
            let trial_a = state_at(&mu, &q, &trial);
            if residual_norm(&q, &trial_a, &target) < gradient_norm {
                theta = trial;
                a = trial_a;
            } else {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: (gradient_norm / target_norm).as_f64(),
                });
            }
        }
    }

    let (db_residual, _) = detailed_balance_residual(net, &a);
    Ok(EquilibriumState {
        a_inf: a,
        masses: masses.clone(),
        db_residual,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Reaction;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("A{i}")).collect()
    }

    fn exchange(kf: f64, kb: f64) -> ReactionNetwork {
        ReactionNetwork::new(
            names(2),
            vec![Reaction::new(vec![1, 0], vec![0, 1], kf, kb)],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn masses_of_averaged_state() {
        let net = ReactionNetwork::four_species(1.0, 1.0, [1.0; 4]);
        let stoich = StoichiometryDecomposition::new(&net);
        let m = conserved_masses(&stoich, &[2.0, 0.0, 2.0, 0.0], 1.0, &net.species).unwrap();
        assert_eq!(m.values, vec![2.0, 2.0, 2.0]);

        let err = conserved_masses(&stoich, &[1.0, 0.0, 0.0, 0.0], 1.0, &net.species).unwrap_err();
        match err {
            Error::NonPositiveMass { label, value } => {
                assert_eq!(value, 0.0);
                assert!(label.contains("A2 + A3"), "{label}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn closed_form_four_species() {
        let eq = four_species_equilibrium(3.0, 4.0, 1.0, 2.0).unwrap();
        let want = [2.4, 0.6, 0.4, 1.6];
        for (a, b) in eq.a_inf.iter().zip(want) {
            assert!(f64::abs(a - b) < 1e-15);
        }
        assert!(f64::abs(eq.a_inf[0] * eq.a_inf[2] - 0.96) < 1e-15);
        assert!(eq.db_residual < 1e-15);

        let eq = four_species_equilibrium(2.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!(eq.a_inf, vec![1.0; 4]);

        assert!(matches!(
            four_species_equilibrium(3.0, 4.0, 1.0, 3.0),
            Err(Error::InconsistentMasses { .. })
        ));
        assert!(matches!(
            four_species_equilibrium(0.0, 1.0, 1.0, 2.0),
            Err(Error::NonPositiveMass { .. })
        ));
    }

    #[test]
    fn newton_matches_closed_form() {
        let net = ReactionNetwork::four_species(1.0, 1.0, [1.0; 4]);
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![3.0, 4.0, 1.0])).unwrap();
        let want = [2.4, 0.6, 0.4, 1.6];
        for (a, b) in eq.a_inf.iter().zip(want) {
            assert!(f64::abs(a - b) <= 1e-10 * b, "{:?}", eq.a_inf);
        }
        assert!(eq.db_residual <= 1e-10);
    }

    #[test]
    fn converges_quadratically_with_inert_species() {
        // A1 <-> 0 with four bystanders: the dual stops decreasing visibly
        // before the mass residual reaches the tolerance
        let net = ReactionNetwork::new(
            names(5),
            vec![Reaction::new(vec![1, 0, 0, 0, 0], vec![0; 5], 3.0323874817184233, 1.2779797090350675)],
            vec![0.1; 5],
        )
        .unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        let m = vec![0.6840440952319402, 1.0931512425198522, 2.9977892541055198, 3.19199138539778];
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(m.clone())).unwrap();
        assert!(eq.iterations <= 10, "{} iterations", eq.iterations);
        for (a, m) in eq.a_inf[1..].iter().zip(&m) {
            assert!(f64::abs(a - m) < 1e-12);
        }
    }

    #[test]
    fn exchange_equilibrium() {
        let net = exchange(2.0, 1.0);
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![3.0])).unwrap();
        assert!(f64::abs(eq.a_inf[0] - 1.0) < 1e-12);
        assert!(f64::abs(eq.a_inf[1] - 2.0) < 1e-12);
    }

    #[test]
    fn volume_scales_targets() {
        let net = exchange(2.0, 1.0);
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::new(vec![6.0], 2.0)).unwrap();
        assert!(f64::abs(eq.a_inf[0] - 1.0) < 1e-12);
        assert!(f64::abs(eq.a_inf[1] - 2.0) < 1e-12);
    }

    #[test]
    fn triangle_cycle_has_no_detailed_balance() {
        let net = ReactionNetwork::new(
            names(3),
            vec![
                Reaction::new(vec![1, 0, 0], vec![0, 1, 0], 1.0, 1.0),
                Reaction::new(vec![0, 1, 0], vec![0, 0, 1], 1.0, 1.0),
                Reaction::new(vec![0, 0, 1], vec![1, 0, 0], 2.0, 1.0),
            ],
            vec![1.0; 3],
        )
        .unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        let err = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![3.0])).unwrap_err();
        assert!(matches!(err, Error::NoDetailedBalance { .. }));
    }

    #[test]
    fn consistent_cycle_is_fine() {
        let net = ReactionNetwork::new(
            names(3),
            vec![
                Reaction::new(vec![1, 0, 0], vec![0, 1, 0], 2.0, 1.0),
                Reaction::new(vec![0, 1, 0], vec![0, 0, 1], 3.0, 1.0),
                Reaction::new(vec![0, 0, 1], vec![1, 0, 0], 1.0, 6.0),
            ],
            vec![1.0; 3],
        )
        .unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![9.0])).unwrap();
        // a2 = 2 a1, a3 = 3 a2
        assert!(f64::abs(eq.a_inf[0] - 1.0) < 1e-12);
        assert!(f64::abs(eq.a_inf[1] - 2.0) < 1e-12);
        assert!(f64::abs(eq.a_inf[2] - 6.0) < 1e-12);
    }

    #[test]
    fn dimerization_equilibrium() {
        // 2 A1 <-> A2: kf a1^2 = kb a2, a1 + 2 a2 = m
        let net = ReactionNetwork::new(
            names(2),
            vec![Reaction::new(vec![2, 0], vec![0, 1], 1.0, 3.0)],
            vec![1.0; 2],
        )
        .unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![5.0])).unwrap();
        // a2 = a1^2 / 3 and a1 + 2 a2 = 5, so 2 a1^2 + 3 a1 - 15 = 0
        let a1 = (-3.0 + (9.0f64 + 120.0).sqrt()) / 4.0;
        assert!((eq.a_inf[0] - a1).abs() < 1e-12);
        assert!((eq.a_inf[1] - a1 * a1 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_masses() {
        let net = exchange(1.0, 1.0);
        let stoich = StoichiometryDecomposition::new(&net);
        assert!(matches!(
            detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![0.0])),
            Err(Error::NonPositiveMass { .. })
        ));
        assert!(matches!(
            detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![1.0, 2.0])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn single_precision_solver() {
        let net = ReactionNetwork::four_species(1.0, 1.0, [1.0; 4]);
        let stoich = StoichiometryDecomposition::new(&net);
        let eq = detailed_balance_equilibrium(&net, &stoich, &ConservedMasses::unit(vec![3.0f32, 4.0, 1.0])).unwrap();
        assert!((eq.a_inf[0] - 2.4).abs() < 1e-5);
    }
}
