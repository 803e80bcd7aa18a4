mod common;

use common::*;
use levcomp::harness::{CsvRow, Scheme, CSV_HEADER};
use levcomp::io::{read_matrix, read_observations, write_matrix, write_observations};
use levcomp::leverage::{leverage_scores, EntryWeights, LeveragedSampling};
use levcomp::operators::project_t;
use levcomp::sampling::{bernoulli_sample, sample_uniform, sample_without_replacement, RandomStream};
use levcomp::solver::svt;
use levcomp::ObservationSet;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn leveraged_probabilities_are_bounded_and_sum_in_closed_form(
        seed in any::<u64>(), n1 in 4usize..30, n2 in 4usize..30, r in 1usize..4, c0 in 0.01f64..2.0,
    ) {
        let r = r.min(n1.min(n2));
        let f = random_factorization(n1, n2, r, &mut rng(seed));
        let scores = leverage_scores(&f);
        let law = LeveragedSampling::new(c0).unwrap();
        let floor = LeveragedSampling::floor(n1, n2);
        for &p in law.distribution(&scores).values() {
            prop_assert!(p >= floor && p <= 1.0);
        }
        let total: f64 = law.uncapped(&scores).iter().sum();
        let l = ((n1 + n2) as f64).ln();
        let closed = 2.0 * c0 * n1.max(n2) as f64 * r as f64 * l * l;
        prop_assert!((total - closed).abs() <= 1e-9 * closed);
    }

    #[test]
    fn leverage_scores_average_to_one(seed in any::<u64>(), n in 3usize..25, r in 1usize..4) {
        let r = r.min(n);
        let scores = leverage_scores(&random_factorization(n, n + 2, r, &mut rng(seed)));
        let mean_mu: f64 = scores.mu().iter().sum::<f64>() / n as f64;
        let mean_nu: f64 = scores.nu().iter().sum::<f64>() / (n + 2) as f64;
        prop_assert!((mean_mu - 1.0).abs() < 1e-10 && (mean_nu - 1.0).abs() < 1e-10);
        prop_assert!(scores.mu().iter().all(|&m| m <= n as f64 / r as f64 + 1e-9));
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in any::<u64>(), n1 in 2usize..15, n2 in 2usize..15) {
        let mut g = rng(seed);
        let f = random_factorization(n1, n2, 1, &mut g);
        let z = to_dense(&gaussian(n1, n2, &mut g));
        let once = project_t(&f, &z).unwrap();
        let twice = project_t(&f, &once).unwrap();
        prop_assert!(max_abs_diff(&to_rows(&once), &to_rows(&twice)) < 1e-12);
    }

    #[test]
    fn svt_shrinks_every_singular_value(seed in any::<u64>(), n1 in 1usize..12, n2 in 1usize..12, tau in 0.0f64..3.0) {
        let a = gaussian(n1, n2, &mut rng(seed));
        let out = svt(&to_dense(&a), tau).unwrap();
        let want: f64 = jacobi_singular_values(&a).iter().map(|s| (s - tau).max(0.0)).sum();
        prop_assert!((out.nuclear_norm().unwrap() - want).abs() < 1e-9 * (1.0 + want));
    }

    #[test]
    fn streams_are_deterministic(seed in any::<u64>(), stream in any::<u64>(), p in 0.0f64..1.0) {
        let m = to_dense(&vec![vec![1.0; 7]; 6]);
        let prob = levcomp::leverage::ProbabilityMatrix::constant(6, 7, p).unwrap();
        let s = RandomStream::new(seed, stream);
        prop_assert_eq!(bernoulli_sample(&m, &prob, &s).unwrap(), bernoulli_sample(&m, &prob, &s).unwrap());
    }

    #[test]
    fn without_replacement_draws_exact_distinct_and_excluded(
        seed in any::<u64>(), n1 in 2usize..10, n2 in 2usize..10, frac in 0.0f64..1.0, ex in 0.0f64..0.5,
    ) {
        let m = to_dense(&gaussian(n1, n2, &mut rng(seed)));
        let total = n1 * n2;
        let exclude = sample_uniform(&m, (ex * total as f64) as usize, &RandomStream::new(seed, 1)).unwrap();
        let count = (frac * (total - exclude.len()) as f64) as usize;
        let w = EntryWeights::from_raw((n1, n2), (0..total).map(|k| 1.0 + k as f64).collect()).unwrap();
        let got = sample_without_replacement(&m, &w, count, &RandomStream::new(seed, 2), &exclude).unwrap();
        prop_assert_eq!(got.len(), count);
        let mut seen = std::collections::HashSet::new();
        for (i, j) in got.indices() {
            prop_assert!(seen.insert((i, j)));
            prop_assert!(!exclude.contains(i, j));
            prop_assert_eq!(got.entries().iter().find(|e| e.row == i && e.col == j).unwrap().value, m.get(i, j));
        }
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>(), n1 in 1usize..8, n2 in 1usize..8, p in 0.05f64..1.0) {
        let m = to_dense(&gaussian(n1, n2, &mut rng(seed)));
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        prop_assert_eq!(read_matrix(&buf[..]).unwrap(), m.clone());
        let prob = levcomp::leverage::ProbabilityMatrix::constant(n1, n2, p).unwrap();
        let obs = bernoulli_sample(&m, &prob, &RandomStream::new(seed, 0)).unwrap();
        for o in [obs.clone(), obs.without_probabilities()] {
            let mut buf = Vec::new();
            write_observations(&o, &mut buf).unwrap();
            let back: ObservationSet = read_observations(&buf[..]).unwrap();
            // An empty file cannot say whether it carried probabilities.
            if o.is_empty() {
                prop_assert!(back.is_empty());
            } else {
                prop_assert_eq!(back, o);
            }
        }
    }

    #[test]
    fn csv_rows_parse_back(frac in 0.0f64..1.0, err in 0.0f64..10.0, beta in proptest::option::of(0.0f64..1.0)) {
        let row = CsvRow {
            scheme: Scheme::TwoPhase, alpha: 0.5, beta, n: 200, r: 5, m: 1234, trials: 40,
            success_frac: frac, ci_halfwidth: 3.0 * (frac * (1.0 - frac) / 40.0).sqrt(),
            median_rel_err: err, mean_samples: 1234.0, seconds: 0.0,
        };
        let line = row.to_csv_line();
        let fields: Vec<&str> = line.split(',').collect();
        prop_assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        prop_assert_eq!(fields[0], "two-phase");
        for k in [1, 3, 4, 5, 6, 7, 8, 9, 10, 11] {
            prop_assert!(fields[k].parse::<f64>().is_ok(), "field {} = {:?}", k, fields[k]);
        }
        prop_assert_eq!(fields[2].is_empty(), beta.is_none());
    }
}
