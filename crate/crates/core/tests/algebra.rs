use proptest::prelude::*;
use shiftfact::{Monomial, ShiftOp};

fn op(max_deg: u32) -> impl Strategy<Value = ShiftOp> {
    prop::collection::vec((0..=max_deg, 0..=max_deg, -2.0..2.0f64), 0..5)
        .prop_map(|terms| ShiftOp::from_terms(terms.into_iter().map(|(i, j, c)| (Monomial::new(i, j), c))))
}

fn rinf_op() -> impl Strategy<Value = ShiftOp> {
    prop::collection::vec((0..4u32, -2.0..2.0f64), 0..4)
        .prop_map(|terms| ShiftOp::from_terms(terms.into_iter().map(|(k, c)| (Monomial::new(k, k), c))))
}

fn window(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, len)
}

proptest! {
    #[test]
    fn products_compose_actions(x in op(3), y in op(3), s in window(40)) {
        let xy = &x * &y;
        let direct = xy.apply(&s).unwrap();
        let inner = y.apply(&s).unwrap();
        let nested = x.apply(inner.valid_values()).unwrap();
        for (a, b) in direct.valid_values().iter().zip(nested.valid_values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn product_is_associative(x in op(2), y in op(2), z in op(2)) {
        let left = &(&x * &y) * &z;
        let right = &x * &(&y * &z);
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn adjoint_reverses_products(x in op(3), y in op(3)) {
        let lhs = (&x * &y).adjoint();
        let rhs = &y.adjoint() * &x.adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn adjoint_matches_transposed_truncation(x in op(3)) {
        let t = 20;
        let a = x.to_truncation(t).unwrap();
        let b = x.adjoint().to_truncation(t).unwrap();
        prop_assert!((a.transpose() - b).amax() <= 1e-12);
    }

    #[test]
    fn truncations_multiply_away_from_the_edge(x in op(3), y in op(3)) {
        let t = 30;
        let keep = t - 6;
        let prod = (&x * &y).to_truncation(t).unwrap();
        let dense = x.to_truncation(t).unwrap() * y.to_truncation(t).unwrap();
        let diff = (prod - dense).view((0, 0), (keep, keep)).amax();
        prop_assert!(diff <= 1e-12);
    }

    #[test]
    fn rinf_is_closed_and_commutative(x in rinf_op(), y in rinf_op()) {
        let xy = &x * &y;
        prop_assert!(xy.is_rinf());
        prop_assert!(xy.max_abs_diff(&(&y * &x)) <= 1e-12);
    }

    #[test]
    fn gram_elements_are_psd(x in op(3)) {
        let g = &x.adjoint() * &x;
        if g.is_rinf() {
            prop_assert!(g.is_psd_rinf());
        }
    }

    #[test]
    fn inverse_is_two_sided(x in rinf_op()) {
        if let Ok(inv) = x.inv_rinf() {
            prop_assert!((&inv * &x).max_abs_diff(&ShiftOp::identity()) <= 1e-8);
            prop_assert!((&x * &inv).max_abs_diff(&ShiftOp::identity()) <= 1e-8);
        }
    }

    #[test]
    fn monomial_product_rule(a in 0..5u32, b in 0..5u32, c in 0..5u32, d in 0..5u32) {
        let p = Monomial::new(a, b).product(Monomial::new(c, d));
        let lhs = ShiftOp::monomial(a, b, 1.0).to_truncation(24).unwrap()
            * ShiftOp::monomial(c, d, 1.0).to_truncation(24).unwrap();
        let rhs = ShiftOp::monomial(p.istar, p.j, 1.0).to_truncation(24).unwrap();
        prop_assert!((lhs - rhs).view((0, 0), (12, 12)).amax() == 0.0);
    }
}
