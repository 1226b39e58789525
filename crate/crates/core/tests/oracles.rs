//! Independent oracles: every check here recomputes its expected answer from
//! scratch (closed forms, exhaustive enumeration, or a from-first-principles
//! reimplementation) rather than trusting the code under test.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fpprace_core::branching::{estimate_v_distribution, BranchingPair, PairRng};
use fpprace_core::degrees::{compute_stats, DegreeSequence, DegreeSource, IntPmf};
use fpprace_core::exploration::{ExplorationConfig, ExplorationState, SeedChoice};
use fpprace_core::pairing::{canonical_matching, enumerate_matchings, generate_configuration_graph};
use fpprace_core::stats::{chi_square_test, ks_test_two_sample, ks_test_uniform, mean};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pmf(entries: &[(usize, f64)]) -> IntPmf {
    let map: BTreeMap<usize, f64> = entries.iter().copied().collect();
    IntPmf::new(&map).expect("valid pmf")
}

/// Uniformity of the pairing over all 105 matchings of 8 half-edges.
#[test]
fn matching_uniformity_on_eight_half_edges() {
    let seq = DegreeSequence::from_degrees(vec![2, 2, 2, 2]).unwrap();
    let matchings = enumerate_matchings(8);
    assert_eq!(matchings.len(), 105); // 7!! = 7 * 5 * 3 * 1
    let index: HashMap<Vec<(u32, u32)>, usize> = matchings
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut canon = m.clone();
            canon.sort_unstable();
            (canon, i)
        })
        .collect();
    let samples = 52_500; // 500 expected per cell
    let mut counts = vec![0u64; matchings.len()];
    let mut r = rng(401);
    for _ in 0..samples {
        let g = generate_configuration_graph(&seq, &mut r);
        counts[index[&canonical_matching(g.pairing())]] += 1;
    }
    let expected = vec![samples as f64 / 105.0; 105];
    let test = chi_square_test(&counts, &expected);
    assert!(
        test.p_value > 1e-3,
        "matching law deviates from uniform: chi2 = {}, p = {}",
        test.statistic,
        test.p_value
    );
}

/// One exploration step on (2,2,3,3), enumerated from the process rules
/// directly: type i fires with probability lambda_i s_i / sum, the partner
/// is uniform over the q-excluded free half-edges, and the active counts
/// move by -2 (partner active) or d_y - 2 (partner free on a fresh vertex).
/// The simulated mean of M_1 must match at Monte Carlo resolution.
fn one_step_expected_m(lambda1: f64, lambda2: f64) -> f64 {
    // State at step 0: v0 (degree 2) carries type 1, v3 (degree 3) type 2;
    // v1 (degree 2) and v2 (degree 3) are untouched. All same-type active
    // half-edges are exchangeable, so one representative q per type is
    // enough.
    let s1 = 2.0;
    let s2 = 3.0;
    let p_type1 = lambda1 * s1 / (lambda1 * s1 + lambda2 * s2);
    // Partner candidates after excluding q: counts per category among the 9
    // remaining free half-edges, and the resulting (s1, s2).
    let after_type1: [(f64, f64, f64); 4] = [
        (1.0, s1 - 2.0, s2),        // v0's other active half-edge: self-loop
        (3.0, s1 - 1.0, s2 - 1.0),  // one of v3's active half-edges
        (2.0, s1, s2),              // fresh vertex v1, degree 2
        (3.0, s1 + 1.0, s2),        // fresh vertex v2, degree 3
    ];
    let after_type2: [(f64, f64, f64); 4] = [
        (2.0, s1 - 1.0, s2 - 1.0),  // one of v0's active half-edges
        (2.0, s1, s2 - 2.0),        // v3's other two: self-loop
        (2.0, s1, s2),              // fresh v1
        (3.0, s1, s2 + 1.0),        // fresh v2
    ];
    let branch = |cases: &[(f64, f64, f64); 4]| -> f64 {
        cases
            .iter()
            .map(|&(ways, a1, a2)| {
                let m = if a1 + a2 == 0.0 { 0.0 } else { a1 / (a1 + a2) };
                ways / 9.0 * m
            })
            .sum()
    };
    p_type1 * branch(&after_type1) + (1.0 - p_type1) * branch(&after_type2)
}

#[test]
fn one_step_mean_matches_enumeration() {
    let seq = DegreeSequence::from_degrees(vec![2, 2, 3, 3]).unwrap();
    for (case, (l1, l2)) in [(0, (1.0, 1.0)), (1, (1.0, 2.0))] .into_iter() {
        let expected = one_step_expected_m(l1, l2);
        if case == 0 {
            // Equal rates: one-step mean preservation, M_0 = 2/5.
            assert!((expected - 0.4).abs() < 1e-12);
        }
        let cfg = ExplorationConfig {
            lambda1: l1,
            lambda2: l2,
            thinning: 1,
            ..ExplorationConfig::default()
        };
        let replicas = 200_000;
        let mut r = rng(402 + case as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..replicas {
            let mut state = ExplorationState::init(
                &seq,
                SeedChoice::Explicit { v1: 0, v2: 3 },
                &cfg,
                &mut r,
            )
            .unwrap();
            let event = state.step(&mut r).unwrap();
            let total = event.s1 + event.s2;
            let m = if total == 0 {
                0.0
            } else {
                event.s1 as f64 / total as f64
            };
            sum += m;
            sumsq += m * m;
        }
        let n = replicas as f64;
        let got = sum / n;
        let se = ((sumsq / n - got * got) / n).sqrt();
        assert!(
            (got - expected).abs() <= 4.0 * se.max(1e-9),
            "rates ({l1},{l2}): simulated mean {got} vs enumerated {expected} (se {se})"
        );
    }
}

/// The Yule population at time t is geometric on {{1, 2, ...}} with success
/// probability e^(-t); binned chi-square against the closed form.
#[test]
fn yule_population_is_geometric() {
    let offspring = pmf(&[(2, 1.0)]);
    let t = 2.0;
    let replicas = 20_000;
    let p = (-t as f64).exp();
    // Bins 1..=19 plus a tail bin; geometric pmf p (1-p)^(k-1).
    let cells = 20usize;
    let mut counts = vec![0u64; cells];
    for i in 0..replicas {
        let rngs = PairRng::from_seed(403, i as u64);
        let mut pair = BranchingPair::new(1, 1, 1.0, 1.0, &offspring, rngs).unwrap();
        pair.advance_until(t);
        let (b1, _) = pair.populations();
        assert!(b1 >= 1, "a Yule population never dies");
        let cell = (b1 as usize - 1).min(cells - 1);
        counts[cell] += 1;
    }
    let mut expected = vec![0.0; cells];
    let mut tail = 1.0;
    for (k, slot) in expected.iter_mut().enumerate().take(cells - 1) {
        let prob = p * (1.0 - p).powi(k as i32);
        *slot = replicas as f64 * prob;
        tail -= prob;
    }
    expected[cells - 1] = replicas as f64 * tail;
    let test = chi_square_test(&counts, &expected);
    assert!(
        test.p_value > 1e-3,
        "Yule law deviates from geometric: chi2 = {}, p = {}",
        test.statistic,
        test.p_value
    );
}

/// First event of a pair: time Exp(lambda1 a1 + lambda2 a2), type 1 with
/// probability lambda1 a1 / total. Checks the exponential-race mechanics.
#[test]
fn first_event_race_oracle() {
    let offspring = pmf(&[(2, 1.0)]);
    let (a1, a2, l1, l2) = (2u64, 3u64, 1.0, 1.0);
    let total_rate = l1 * a1 as f64 + l2 * a2 as f64;
    let replicas = 5000;
    let mut times = Vec::with_capacity(replicas);
    let mut type1 = 0u64;
    for i in 0..replicas {
        let rngs = PairRng::from_seed(404, i as u64);
        let pair = BranchingPair::new(a1, a2, l1, l2, &offspring, rngs).unwrap();
        let (which, t) = pair.peek().expect("supercritical pair has events");
        if which == 0 {
            type1 += 1;
        }
        times.push(1.0 - (-total_rate * t).exp());
    }
    let ks = ks_test_uniform(&times);
    assert!(
        ks.p_value > 1e-3,
        "first event time is not Exp({total_rate}): p = {}",
        ks.p_value
    );
    let expected1 = replicas as f64 * l1 * a1 as f64 / total_rate;
    let test = chi_square_test(
        &[type1, replicas as u64 - type1],
        &[expected1, replicas as f64 - expected1],
    );
    assert!(
        test.p_value > 1e-3,
        "first event type is biased: p = {}",
        test.p_value
    );
}

/// An urn implementation of the Yule race, written from scratch: at total
/// size N the type-1 count is uniform on 1..N. The urn's limit fraction and
/// the branching pair's must agree in law.
fn urn_race_samples(replicas: usize, additions: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut samples = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let mut b1: u64 = 1;
        let mut total: u64 = 2;
        for _ in 0..additions {
            if r.gen_range(0..total) < b1 {
                b1 += 1;
            }
            total += 1;
        }
        samples.push(b1 as f64 / total as f64);
    }
    samples
}

#[test]
fn urn_oracle_is_exactly_uniform_at_fixed_size() {
    // After N - 2 additions the total is N and b1 is uniform on 1..N.
    let n_total = 12u64;
    let replicas = 30_000;
    let mut r = rng(405);
    let mut counts = vec![0u64; (n_total - 1) as usize];
    for _ in 0..replicas {
        let mut b1: u64 = 1;
        let mut total: u64 = 2;
        while total < n_total {
            if r.gen_range(0..total) < b1 {
                b1 += 1;
            }
            total += 1;
        }
        counts[(b1 - 1) as usize] += 1;
    }
    let expected = vec![replicas as f64 / (n_total - 1) as f64; (n_total - 1) as usize];
    let test = chi_square_test(&counts, &expected);
    assert!(
        test.p_value > 1e-3,
        "urn law is not uniform at fixed size: p = {}",
        test.p_value
    );
}

#[test]
fn yule_race_fraction_matches_urn_oracle() {
    let offspring = pmf(&[(2, 1.0)]);
    let dist = estimate_v_distribution(1, 1, 1.0, 1.0, &offspring, 8.0, 4000, 406).unwrap();
    assert_eq!(dist.extinct_pairs, 0);
    let urn = urn_race_samples(4000, 2000, 407);
    assert!((mean(&urn) - 0.5).abs() < 0.02);
    let test = ks_test_two_sample(&dist.samples, &urn);
    assert!(
        test.p_value > 1e-3,
        "branching race and urn oracle disagree: D = {}, p = {}",
        test.statistic,
        test.p_value
    );
}

/// Empirical size-biased law of a large IID sample against the model's
/// closed form d p_d / E[D].
#[test]
fn size_biased_law_matches_model() {
    let source = DegreeSource::Iid {
        pmf: pmf(&[(2, 0.5), (3, 0.5)]),
        n: 200_000,
    };
    let mut r = rng(408);
    let seq = source.realize(&mut r).unwrap();
    let stats = compute_stats(&seq);
    // Model: E[D] = 2.5, size-biased weights 2*0.5/2.5 = 0.4 and 3*0.5/2.5 = 0.6.
    let got2 = stats.size_biased_pmf.get(&2).copied().unwrap_or(0.0);
    let got3 = stats.size_biased_pmf.get(&3).copied().unwrap_or(0.0);
    assert!((got2 - 0.4).abs() < 0.01, "size-biased weight at 2: {got2}");
    assert!((got3 - 0.6).abs() < 0.01, "size-biased weight at 3: {got3}");
    assert!((stats.mean_excess - 1.6).abs() < 0.02);
}

/// Calibration of the hand-rolled tests under the null: p-values from true
/// uniform samples and true multinomial counts are themselves roughly
/// uniform, so the 5% tail holds about 5% of cases.
#[test]
fn test_statistics_are_calibrated_under_the_null() {
    let mut r = rng(409);
    let reps = 400;
    let mut ks_small = 0usize;
    let mut chi_small = 0usize;
    for _ in 0..reps {
        let samples: Vec<f64> = (0..100).map(|_| r.gen::<f64>()).collect();
        if ks_test_uniform(&samples).p_value < 0.05 {
            ks_small += 1;
        }
        let mut counts = [0u64; 4];
        for _ in 0..1000 {
            counts[r.gen_range(0..4usize)] += 1;
        }
        if chi_square_test(&counts, &[250.0; 4]).p_value < 0.05 {
            chi_small += 1;
        }
    }
    // Binomial(400, 0.05): mean 20, sd ~4.4; allow 5 sigma.
    assert!(
        (ks_small as i64 - 20).abs() <= 22,
        "KS 5% tail is off: {ks_small}/400"
    );
    assert!(
        (chi_small as i64 - 20).abs() <= 22,
        "chi-square 5% tail is off: {chi_small}/400"
    );
}
