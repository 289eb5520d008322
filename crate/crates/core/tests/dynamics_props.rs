mod common;

use proptest::prelude::*;
use rdbalance::solver::default_time_step;
use rdbalance::{
    build_initial, conserved_masses, detailed_balance_equilibrium, entropy_dissipation, relative_entropy,
    weighted_norm, CosineMode, Grid, InitialSpec, Scheme, Simulator, StoichiometryDecomposition,
};

fn fields(n: usize, cells: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.05f64..5.0, cells), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn entropy_vanishes_only_at_equilibrium((net, a_inf) in common::balanced_network(), a in fields(5, 8)) {
        let grid = Grid::interval(1.0, 8).unwrap();
        let n = net.species_count();
        let a = &a[..n];
        let h = relative_entropy(&grid, a, &a_inf);
        prop_assert!(h > 0.0);
        let eq: Vec<Vec<f64>> = a_inf.iter().map(|&x| vec![x; 8]).collect();
        prop_assert_eq!(relative_entropy(&grid, &eq, &a_inf), 0.0);
    }

    #[test]
    fn dissipation_terms_are_nonnegative((net, a_inf) in common::balanced_network(), a in fields(5, 6)) {
        let grid = Grid::rectangle(1.0, 1.0, 6, 1 + 5).unwrap();
        let n = net.species_count();
        let a: Vec<Vec<f64>> = a[..n].iter().map(|f| f.iter().cycle().take(36).copied().collect()).collect();
        let (fisher, reaction) = entropy_dissipation(&net, &grid, &a, &a_inf).unwrap();
        prop_assert!(fisher >= 0.0);
        prop_assert!(reaction >= 0.0);
    }

    #[test]
    fn norms_grow_with_the_exponent(h in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 10), 3)) {
        let grid = Grid::interval(1.0, 10).unwrap();
        let ones = [1.0; 3];
        let l2 = weighted_norm(&grid, &h, &ones, 2.0);
        let l4 = weighted_norm(&grid, &h, &ones, 4.0);
        let linf = weighted_norm(&grid, &h, &ones, f64::INFINITY);
        // the species sum is an extra counting measure: normalize by it
        let s = 3f64;
        prop_assert!(l2 / s.sqrt() <= l4 / s.powf(0.25) * (1.0 + 1e-12));
        prop_assert!(l4 / s.powf(0.25) <= linf * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_conserve_mass_and_dissipate_entropy(
        (net, a_star) in common::balanced_network(),
        amps in prop::collection::vec(-0.3f64..0.3, 5),
        imex in any::<bool>(),
    ) {
        let grid = Grid::interval(1.0, 16).unwrap();
        let n = net.species_count();
        let spec = InitialSpec::Profile {
            base: a_star.clone(),
            modes: (0..n).map(|i| vec![CosineMode::new(1 + i % 2, 0, amps[i] * a_star[i])]).collect(),
        };
        let init = build_initial(&spec, &grid, &net.species).unwrap();
        let stoich = StoichiometryDecomposition::new(&net);
        // classes violating mass positivity are outside the admissible data
        let Ok(masses) = conserved_masses(&stoich, &init.mean(), 1.0, &net.species) else {
            return Ok(());
        };
        let eq = detailed_balance_equilibrium(&net, &stoich, &masses).unwrap();
        let dt = default_time_step(&net, &eq.a_inf, &grid).unwrap();
        let scheme = if imex { Scheme::ImexEuler } else { Scheme::Strang };
        let before = stoich.q.apply(&init.totals(&grid));
        let mut h_prev = relative_entropy(&grid, &init.fields, &eq.a_inf);
        let mut sim = Simulator::new(&net, grid, init, dt, scheme).unwrap();
        for _ in 0..100 {
            sim.step().unwrap();
            let h = relative_entropy(&grid, &sim.state().fields, &eq.a_inf);
            prop_assert!(h <= h_prev + 1e-12, "H rose from {} to {}", h_prev, h);
            h_prev = h;
        }
        let totals = sim.state().totals(&grid);
        let after = stoich.q.apply(&totals);
        // laws with mixed signs can nearly cancel, so measure drift against
        // the size of the terms rather than the mass itself
        for (k, (b, a)) in before.iter().zip(&after).enumerate() {
            let scale: f64 = stoich.q.row(k).iter().zip(&totals).map(|(&q, t)| (q as f64).abs() * t).sum();
            prop_assert!((b - a).abs() <= 1e-10 * scale, "law {}: {} -> {}", k, b, a);
        }
    }
}
