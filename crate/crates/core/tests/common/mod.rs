#![allow(dead_code)]

use proptest::prelude::*;
use rdbalance::{Reaction, ReactionNetwork};

/// One side of a quadratic reaction: up to two species indices.
fn side(species: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..species, 0..=2).prop_map(move |picks| {
        let mut v = vec![0u32; species];
        for p in picks {
            v[p] += 1;
        }
        v
    })
}

fn reaction_shape(species: usize) -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (side(species), side(species)).prop_filter("reaction changes something", |(a, b)| a != b)
}

fn monomial(a: &[f64], powers: &[u32]) -> f64 {
    a.iter().zip(powers).map(|(x, &p)| x.powi(p as i32)).product()
}

/// A random admissible network together with a positive state at which it
/// is in detailed balance (backward rates are chosen to make it so).
pub fn balanced_network() -> impl Strategy<Value = (ReactionNetwork, Vec<f64>)> {
    (2usize..=5)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(reaction_shape(n), 1..=4),
                prop::collection::vec(0.2f64..5.0, n),
                prop::collection::vec(0.1f64..10.0, 4),
                prop::collection::vec(0.1f64..10.0, n),
            )
        })
        .prop_map(|(shapes, a_star, kf, diffusion)| {
            let n = a_star.len();
            let reactions = shapes
                .into_iter()
                .zip(kf)
                .map(|((alpha, beta), kf)| {
                    let kb = kf * monomial(&a_star, &alpha) / monomial(&a_star, &beta);
                    Reaction::new(alpha, beta, kf, kb)
                })
                .collect();
            let species = (1..=n).map(|i| format!("A{i}")).collect();
            (ReactionNetwork::new(species, reactions, diffusion).unwrap(), a_star)
        })
}

/// Random four-species network with unit rates and one of its equilibria.
pub fn four_species_instance() -> impl Strategy<Value = (ReactionNetwork, Vec<f64>)> {
    (
        prop::collection::vec(0.1f64..10.0, 3),
        prop::collection::vec(0.1f64..10.0, 4),
    )
        .prop_map(|(m, d)| {
            let (m12, m14, m32) = (m[0], m[1], m[2]);
            let net = ReactionNetwork::four_species(1.0, 1.0, [d[0], d[1], d[2], d[3]]);
            (net, closed_form(m12, m14, m32))
        })
        .prop_filter("M34 = M14 + M32 - M12 at least 0.1", |(_, a)| a[2] + a[3] >= 0.1)
}

/// Four-species equilibrium from the three independent masses, with
/// `M34 = M14 + M32 - M12`.
pub fn closed_form(m12: f64, m14: f64, m32: f64) -> Vec<f64> {
    // a2 = m12 - a1, a4 = m14 - a1, a3 = m32 - a2 = m32 - m12 + a1
    // a1 (m32 - m12 + a1) = (m12 - a1)(m14 - a1)
    // a1 (m32 - m12 + m12 + m14) = m12 m14
    let a1 = m12 * m14 / (m32 + m14);
    vec![a1, m12 - a1, m32 - m12 + a1, m14 - a1]
}
