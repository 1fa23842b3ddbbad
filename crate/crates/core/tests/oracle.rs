mod common;

use common::{
    dense_norm_diff, exact_power, norm_vs_dense, poisson_exp, random_symmetric_dyadic, Dyadic, Lcg,
};
use latcp::approx::measure_exp;
use latcp::experiments::{example_mass, ExampleId, ExampleSpec};
use latcp::{convolution_power, tv_distance, SignedLatticeMeasure};

const ORACLE_TV: f64 = 1e-9;

struct Case {
    f: Dyadic,
    n: u64,
}

fn cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = Lcg(seed);
    (0..count)
        .map(|_| {
            let r = 1 + rng.below(8) as i64;
            let n = 1 + rng.below(64);
            Case {
                f: random_symmetric_dyadic(&mut rng, r, 10),
                n,
            }
        })
        .collect()
}

#[test]
fn convolution_powers_match_exact_arithmetic() {
    for (i, c) in cases(60, 11).iter().enumerate() {
        let exact = exact_power(&c.f, c.n);
        let ours = convolution_power(&c.f.to_measure(), c.n, 0.0).unwrap();
        let diff = norm_vs_dense(&ours, &exact);
        assert!(diff < ORACLE_TV, "case {i}: n={} ‖ours − exact‖ = {diff:e}", c.n);
        assert!(diff <= ours.trunc_err() + 1e-12, "case {i}: error bound {:e} < {diff:e}", ours.trunc_err());
    }
}

#[test]
fn exponentials_match_poisson_series() {
    for (i, c) in cases(60, 12).iter().enumerate() {
        let lambda = c.n as f64;
        let oracle = poisson_exp(&c.f, lambda);
        let g = latcp::measure::difference(&c.f.to_measure(), &SignedLatticeMeasure::identity(1)).unwrap();
        let ours = measure_exp(&g.scaled(lambda), 0.0).unwrap();
        let diff = norm_vs_dense(&ours, &oracle);
        assert!(diff < ORACLE_TV, "case {i}: λ={lambda} ‖ours − oracle‖ = {diff:e}");
    }
}

#[test]
fn distances_match_oracle() {
    for (i, c) in cases(50, 13).iter().enumerate() {
        let exact = exact_power(&c.f, c.n);
        let cp = poisson_exp(&c.f, c.n as f64);
        let oracle = 0.5 * dense_norm_diff(&exact, &cp);
        let f = latcp::SymmetricDistribution::new(c.f.to_measure()).unwrap();
        let target = convolution_power(f.measure(), c.n, 0.0).unwrap();
        let approx = latcp::approx::cp_accompanying(&f, c.n as f64, 0.0).unwrap();
        let (d, err) = tv_distance(&target, &approx).unwrap();
        assert!((d - oracle).abs() < ORACLE_TV, "case {i}: {d:e} vs {oracle:e}");
        assert!((d - oracle).abs() <= err + 1e-12, "case {i}: err {err:e} too small");
    }
}

#[test]
fn truncated_results_stay_within_their_error() {
    for (i, c) in cases(30, 14).iter().enumerate() {
        let exact = exact_power(&c.f, c.n);
        for tol in [1e-3, 1e-6, 1e-9] {
            let ours = convolution_power(&c.f.to_measure(), c.n, tol).unwrap();
            let diff = norm_vs_dense(&ours, &exact);
            assert!(diff <= ours.trunc_err() + 1e-12, "case {i} tol {tol}: {diff:e} > {:e}", ours.trunc_err());
            assert!(ours.trunc_err() <= tol + 1e-12, "case {i}: err {:e} above tol", ours.trunc_err());
        }
    }
}

#[test]
fn lazy_walk_squared_by_hand() {
    // (½ + ¼z + ¼z⁻¹)² = 1/16 z⁻² + 1/4 z⁻¹ + 3/8 + 1/4 z + 1/16 z²
    let f = Dyadic::new(-1, &[1, 2, 1], 2);
    let p = exact_power(&f, 2);
    assert_eq!(p.values, vec![1.0 / 16.0, 0.25, 0.375, 0.25, 1.0 / 16.0]);
    let ours = convolution_power(&f.to_measure(), 2, 0.0).unwrap();
    assert_eq!(ours.weights(), &p.values[..]);
}

#[test]
fn example_tails_match_partial_sums() {
    // brute-force partial sums out to 10⁶ against the closed-form tails
    const K_FAR: u64 = 1_000_000;
    for id in [ExampleId::Ex1, ExampleId::Ex3] {
        let far_tail = ExampleSpec::new(id, K_FAR).tail_mass();
        for k in [2u64, 10, 1000, 100_000] {
            let partial: f64 = ((k + 1)..=K_FAR).rev().map(|j| 2.0 * example_mass(id, j)).sum();
            let closed = ExampleSpec::new(id, k).tail_mass();
            let rel = (partial + far_tail - closed).abs() / closed;
            assert!(rel < 1e-9, "{id} K={k}: {partial:e} + {far_tail:e} vs {closed:e}");
        }
    }
    // total masses: ½ + 2·Σ 1/(k(k+1)(k+2)) = 1 and 8/9 + 2·Σ 1/(k(k+1)(k+2)(k+3)) = 1
    let ex1: f64 = 0.5 + (1..=K_FAR).rev().map(|k| 2.0 * example_mass(ExampleId::Ex1, k)).sum::<f64>();
    assert!((ex1 + ExampleSpec::new(ExampleId::Ex1, K_FAR).tail_mass() - 1.0).abs() < 1e-14);
    let ex3: f64 = 8.0 / 9.0 + (1..=K_FAR).rev().map(|k| 2.0 * example_mass(ExampleId::Ex3, k)).sum::<f64>();
    assert!((ex3 + ExampleSpec::new(ExampleId::Ex3, K_FAR).tail_mass() - 1.0).abs() < 1e-14);
}
