//! m-selection checked against a from-scratch recomputation of every
//! statistic and distance.

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use plasmode::dataio::Dataset;
use plasmode::mselect::{self, candidate_seed, MSelectionConfig};
use plasmode::resampler::{derive_seed, draw_indices, Scheme};

/// Shrunken covariance Frobenius norm written out entry by entry.
fn naive_lw_norm(x: &DMatrix<f64>) -> f64 {
    let (m, p) = x.shape();
    let mf = m as f64;
    let means: Vec<f64> = (0..p).map(|j| (0..m).map(|i| x[(i, j)]).sum::<f64>() / mf).collect();
    let z = |i: usize, j: usize| x[(i, j)] - means[j];
    let mut s = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            s[a][b] = (0..m).map(|i| z(i, a) * z(i, b)).sum::<f64>() / mf;
        }
    }
    let mu = (0..p).map(|a| s[a][a]).sum::<f64>() / p as f64;
    let mut d2 = 0.0;
    for a in 0..p {
        for b in 0..p {
            let t = s[a][b] - if a == b { mu } else { 0.0 };
            d2 += t * t;
        }
    }
    let mut bb = 0.0;
    for i in 0..m {
        for a in 0..p {
            for b in 0..p {
                let t = z(i, a) * z(i, b) - s[a][b];
                bb += t * t;
            }
        }
    }
    bb /= mf * mf;
    let rho = if d2 > 0.0 { (bb / d2).min(1.0) } else { 0.0 };
    let mut norm2 = 0.0;
    for a in 0..p {
        for b in 0..p {
            let v = (1.0 - rho) * s[a][b] + if a == b { rho * mu } else { 0.0 };
            norm2 += v * v;
        }
    }
    norm2.sqrt()
}

fn sorted_w1(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(u, v)| (u - v).abs()).sum::<f64>() / a.len() as f64
}

#[test]
fn selection_matches_brute_force() {
    let (n, p) = (120, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x = DMatrix::from_fn(n, p, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let ds = Dataset::from_matrix(vec!["a".into(), "b".into(), "c".into()], x.clone(), None, None).unwrap();
    let cfg = MSelectionConfig {
        q: 0.9,
        draws: 30,
        seed: 77,
        ..Default::default()
    };
    let got = mselect::select_m(&ds, &cfg).unwrap();

    let floor = 10;
    let mut candidates = vec![n];
    let mut j = 1;
    loop {
        let m = (0.9f64.powi(j) * n as f64 - 1e-9).ceil() as usize;
        if m < floor {
            break;
        }
        if m < *candidates.last().unwrap() {
            candidates.push(m);
        }
        j += 1;
    }
    assert_eq!(got.candidates, candidates);

    let samples: Vec<Vec<f64>> = candidates
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            (1..=cfg.draws)
                .map(|i| {
                    let idx = draw_indices(
                        Scheme::WithReplacement,
                        n,
                        m,
                        derive_seed(candidate_seed(cfg.seed, j), i as u64),
                    )
                    .unwrap();
                    naive_lw_norm(&x.select_rows(&idx))
                })
                .collect()
        })
        .collect();
    for (j, (mine, theirs)) in samples.iter().zip(&got.draws).enumerate() {
        for (a, b) in mine.iter().zip(theirs) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "candidate {j}: {a} vs {b}");
        }
    }
    let distances: Vec<f64> = samples.windows(2).map(|w| sorted_w1(&w[0], &w[1])).collect();
    for (a, b) in distances.iter().zip(&got.distances) {
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
    let best = distances
        .iter()
        .enumerate()
        .fold(0, |k, (i, d)| if *d < distances[k] { i } else { k });
    assert_eq!(got.m_star, candidates[best]);
}
