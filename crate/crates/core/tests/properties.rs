use std::sync::Arc;

use proptest::prelude::*;

use nodalsphere::energy::EnergyFunctional;
use nodalsphere::geometry::{sphere_distance, ProblemConfig, SpherePoint};
use nodalsphere::grid::{ReducedField, ReducedGrid};
use nodalsphere::limit::{scaling_exponent, soliton_1d};
use nodalsphere::nonlinearity::{big_f_eval, f_eval, PenalizedNonlinearity};

fn pn(eps: f64) -> PenalizedNonlinearity {
    PenalizedNonlinearity::new(eps, 3.0, 2.0, 3.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn penalized_terms_are_odd_and_even(eps in 0.05f64..0.6, s in -5.0f64..5.0) {
        let pn = pn(eps);
        for inside in [true, false] {
            prop_assert_eq!(pn.g_switch(inside, -s), -pn.g_switch(inside, s));
            prop_assert_eq!(pn.big_g_switch(inside, -s), pn.big_g_switch(inside, s));
            prop_assert_eq!(pn.g_prime_switch(inside, -s), pn.g_prime_switch(inside, s));
        }
        prop_assert_eq!(f_eval(-s, 3.0), -f_eval(s, 3.0));
    }

    #[test]
    fn penalized_bounds_hold(eps in 0.05f64..0.6, s in 0.0f64..5.0) {
        let pn = pn(eps);
        let slope = pn.slope;
        let ft = pn.f_tilde(s);
        prop_assert!(ft.abs() <= slope * s * (1.0 + 1e-12) + 1e-300);
        let d = pn.f_tilde_prime(s);
        prop_assert!(d >= 0.0 && d <= 2.0 * slope * (1.0 + 1e-12));
        prop_assert!(2.0 * pn.big_f_tilde(s) <= ft * s * (1.0 + 1e-12) + 1e-300);
        // inside the region the original nonlinearity is used
        prop_assert_eq!(pn.g_switch(true, s), f_eval(s, 3.0));
        prop_assert_eq!(pn.big_g_switch(true, s), big_f_eval(s, 3.0));
    }

    #[test]
    fn soliton_energy_scales(a in 0.2f64..6.0) {
        let e1 = soliton_1d(1.0, 3.0, 1).unwrap().energy;
        let ea = soliton_1d(a, 3.0, 1).unwrap().energy;
        let sigma = scaling_exponent(1, 3.0);
        prop_assert!((ea - a.powf(sigma) * e1).abs() <= 1e-9 * ea);
    }

    #[test]
    fn sphere_distance_is_a_metric(
        a in prop::collection::vec(-2.0f64..2.0, 2),
        b in prop::collection::vec(-2.0f64..2.0, 2),
        c in prop::collection::vec(-2.0f64..2.0, 2),
        ra in 0.0f64..3.0, rb in 0.0f64..3.0, rc in 0.0f64..3.0,
    ) {
        let p = SpherePoint::new(a, ra);
        let q = SpherePoint::new(b, rb);
        let w = SpherePoint::new(c, rc);
        let pq = sphere_distance(&p, &q);
        prop_assert_eq!(pq, sphere_distance(&q, &p));
        prop_assert_eq!(sphere_distance(&p, &p), 0.0);
        prop_assert!(pq <= sphere_distance(&p, &w) + sphere_distance(&w, &q) + 1e-12);
    }

    #[test]
    fn binary_format_round_trips(values in prop::collection::vec(-1e3f64..1e3, 60)) {
        let g = Arc::new(ReducedGrid::new(1, 1, 10, 6, 0.2, 0.4, usize::MAX).unwrap());
        let v = ReducedField::from_values(g.clone(), values).unwrap();
        let back = ReducedField::from_binary(&v.to_binary()).unwrap();
        prop_assert_eq!(back.values, v.values);
        prop_assert_eq!(&*back.grid, &*g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_sign_flip_invariant(
        c1 in 1.4f64..1.8, c2 in 2.2f64..2.6,
        amp1 in 0.3f64..2.0, amp2 in 0.3f64..2.0,
    ) {
        let f = EnergyFunctional::new(&ProblemConfig::desk_default(), 0.3).unwrap();
        let eps = f.eps();
        let v = ReducedField::from_fn(f.grid.clone(), |p| {
            let r = eps * p.r;
            amp1 * (-((r - c1) / 0.15).powi(2)).exp() - amp2 * (-((r - c2) / 0.15).powi(2)).exp()
        });
        let flipped = v.scaled(-1.0);
        prop_assert_eq!(f.value(&v.values), f.value(&flipped.values));
        let g = f.euclidean_gradient(&v.values);
        let gf = f.euclidean_gradient(&flipped.values);
        prop_assert!(g.iter().zip(&gf).all(|(a, b)| *a == -*b));
        let p = f.nodal_nehari_project(&v).unwrap();
        let q = f.nodal_nehari_project(&flipped).unwrap();
        prop_assert!((p.t - q.s).abs() <= 1e-9 * p.t);
        prop_assert!((p.s - q.t).abs() <= 1e-9 * p.s);
        let ep = f.value(&p.field.values);
        prop_assert!((ep - f.value(&q.field.values)).abs() <= 1e-9 * ep.abs());
    }
}
