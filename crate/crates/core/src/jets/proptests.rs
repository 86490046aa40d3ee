use std::sync::Arc;

use proptest::prelude::*;

use super::*;

const DIM: usize = 2;

fn spec() -> JetSpec {
    JetSpec::new(DIM, 2, 3).unwrap()
}

fn base() -> Arc<Point> {
    Arc::new(Point::new(vec![0.3, -0.4], vec![0.8, 0.6]))
}

/// Random polynomial in the four coordinates, degree <= 2 in x and <= 3 in y,
/// built from monomials `c * x^a * y^b`.
fn poly_jet(coeffs: &[(f64, [u8; 2], [u8; 2])]) -> Jet {
    let b = base();
    let xs: Vec<Jet> = (0..DIM)
        .map(|i| Jet::lift(spec(), b.clone(), Coordinate::X(i)).unwrap())
        .collect();
    let ys: Vec<Jet> = (0..DIM)
        .map(|i| Jet::lift(spec(), b.clone(), Coordinate::Y(i)).unwrap())
        .collect();
    let mut acc = Jet::constant(spec(), b, 0.0);
    for (c, a, bb) in coeffs {
        let mut term = acc.like(*c);
        for i in 0..DIM {
            term = &term * &xs[i].powi(a[i] as u64);
            term = &term * &ys[i].powi(bb[i] as u64);
        }
        acc = &acc + &term;
    }
    acc
}

/// Direct evaluation of the monomial sum's mixed partial at the base point.
fn poly_partial(coeffs: &[(f64, [u8; 2], [u8; 2])], alpha: [u8; 2], beta: [u8; 2]) -> f64 {
    let p = base();
    let falling = |v: f64, e: u8, d: u8| -> f64 {
        if d > e {
            return 0.0;
        }
        let f: f64 = (0..d).map(|k| (e - k) as f64).product();
        f * v.powi((e - d) as i32)
    };
    coeffs
        .iter()
        .map(|(c, a, b)| {
            let mut t = *c;
            for i in 0..DIM {
                t *= falling(p.x[i], a[i], alpha[i]);
                t *= falling(p.y[i], b[i], beta[i]);
            }
            t
        })
        .sum()
}

fn monomials() -> impl Strategy<Value = Vec<(f64, [u8; 2], [u8; 2])>> {
    prop::collection::vec(
        (
            -2.0..2.0f64,
            (0u8..=1, 0u8..=1).prop_map(|(a, b)| [a, b]),
            (0u8..=2, 0u8..=1).prop_map(|(a, b)| [a, b]),
        ),
        1..5,
    )
}

fn all_orders() -> Vec<([u8; 2], [u8; 2])> {
    let mut out = Vec::new();
    for a0 in 0..=2u8 {
        for a1 in 0..=(2 - a0) {
            for b0 in 0..=3u8 {
                for b1 in 0..=(3 - b0) {
                    out.push(([a0, a1], [b0, b1]));
                }
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn polynomials_are_exact(m in monomials()) {
        let j = poly_jet(&m);
        for (alpha, beta) in all_orders() {
            let expected = poly_partial(&m, alpha, beta);
            let got = j.partial(&alpha, &beta).unwrap();
            prop_assert!((got - expected).abs() <= 1e-13 * (1.0 + expected.abs()),
                "{alpha:?} {beta:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn leibniz_rule(m1 in monomials(), m2 in monomials()) {
        let a = poly_jet(&m1);
        let b = poly_jet(&m2);
        let ab = &a * &b;
        for (alpha, beta) in all_orders() {
            // sum over sub-multi-indices with binomial weights
            let mut expected = 0.0;
            for p0 in 0..=alpha[0] { for p1 in 0..=alpha[1] {
            for q0 in 0..=beta[0] { for q1 in 0..=beta[1] {
                let w = binom(alpha[0], p0) * binom(alpha[1], p1)
                    * binom(beta[0], q0) * binom(beta[1], q1);
                expected += w * a.partial(&[p0, p1], &[q0, q1]).unwrap()
                    * b.partial(&[alpha[0] - p0, alpha[1] - p1], &[beta[0] - q0, beta[1] - q1]).unwrap();
            }}}}
            let got = ab.partial(&alpha, &beta).unwrap();
            prop_assert!((got - expected).abs() <= 1e-11 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn sqrt_squares_back(m in monomials()) {
        // shift to a positive value so sqrt is admissible
        let p = poly_jet(&m);
        let a = p.add_scalar(1.0 + p.value().abs() + 2.0 * p.max_abs_coeff());
        let s = a.sqrt().unwrap();
        let back = &s * &s;
        for ((_, _, x), (_, _, y)) in back.terms().zip(a.terms()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn quotient_inverts_product(m1 in monomials(), m2 in monomials()) {
        let a = poly_jet(&m1);
        let b0 = poly_jet(&m2);
        let b = b0.add_scalar(1.0 + b0.value().abs() + 2.0 * b0.max_abs_coeff());
        let q = a.try_div(&b).unwrap();
        let back = &q * &b;
        for ((_, _, x), (_, _, y)) in back.terms().zip(a.terms()) {
            prop_assert!((x - y).abs() <= 1e-11 * (1.0 + y.abs()));
        }
    }
}

fn binom(n: u8, k: u8) -> f64 {
    let f = |m: u8| (1..=m).map(f64::from).product::<f64>();
    f(n) / (f(k) * f(n - k))
}
