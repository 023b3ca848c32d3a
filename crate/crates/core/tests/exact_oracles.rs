use proptest::prelude::*;
use rand::Rng;
use sparse_ising::ising::{EmpiricalMoments, Enumerator, IsingParams};
use sparse_ising::seed;

/// Direct summation over states with explicit double loops.
fn naive_log_partition(p: &IsingParams) -> f64 {
    let n = p.n();
    let energies: Vec<f64> = (0..1usize << n)
        .map(|s| {
            let x: Vec<f64> = (0..n).map(|i| if s >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let mut e = 0.0;
            for i in 0..n {
                e += p.b()[i] * x[i];
                for j in 0..n {
                    e += x[i] * p.coupling(i, j) * x[j];
                }
            }
            e
        })
        .collect();
    let m = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + energies.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

fn naive_loss(p: &IsingParams, emp: &EmpiricalMoments) -> f64 {
    let n = p.n();
    let mut inner = 0.0;
    for i in 0..n {
        inner += emp.mu_hat()[i] * p.b()[i];
        for j in 0..n {
            inner += emp.sigma_hat()[i * n + j] * p.coupling(i, j);
        }
    }
    naive_log_partition(p) - inner
}

fn random_params(n: usize, rng: &mut seed::Rng, scale: f64) -> IsingParams {
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            couplings.push((i, j, scale * rng.random_range(-1.0..1.0)));
        }
    }
    let b = (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    IsingParams::from_couplings(n, &couplings, b).unwrap()
}

fn random_moments(n: usize, rng: &mut seed::Rng) -> EmpiricalMoments {
    let data: Vec<Vec<i8>> = (0..20)
        .map(|_| (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        .collect();
    EmpiricalMoments::from_dataset(&sparse_ising::Dataset::new(data).unwrap())
}

#[test]
fn log_partition_at_origin_is_n_log_2() {
    let en = Enumerator::default();
    for n in 1..=10 {
        let z = en.log_partition(&IsingParams::zeros(n)).unwrap();
        assert!((z - n as f64 * std::f64::consts::LN_2).abs() < 1e-12, "n = {n}");
    }
}

#[test]
fn log_partition_matches_direct_summation() {
    let en = Enumerator::default();
    let mut rng = seed::rng(11);
    for n in [1, 2, 5, 9, 12] {
        let p = random_params(n, &mut rng, 0.8);
        let a = en.log_partition(&p).unwrap();
        let b = naive_log_partition(&p);
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "n = {n}: {a} vs {b}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let en = Enumerator::default();
    let mut rng = seed::rng(2024);
    let h = 1e-5;
    for point in 0..20 {
        let n = 2 + point % 5;
        let p = random_params(n, &mut rng, 0.7);
        let emp = random_moments(n, &mut rng);
        let g = en.gradient(&p, &emp).unwrap();
        let mut fd = IsingParams::zeros(n).to_flat();
        for i in 0..n {
            for j in i + 1..n {
                let shifted = |delta: f64| {
                    let mut q = p.to_flat();
                    q[i * n + j] += delta;
                    q[j * n + i] += delta;
                    naive_loss(&IsingParams::from_flat(n, &q).unwrap(), &emp)
                };
                // The symmetric perturbation moves both halves at once.
                let d = (shifted(h) - shifted(-h)) / (2.0 * h) / 2.0;
                fd[i * n + j] = d;
                fd[j * n + i] = d;
            }
            let shifted = |delta: f64| {
                let mut q = p.to_flat();
                q[n * n + i] += delta;
                naive_loss(&IsingParams::from_flat(n, &q).unwrap(), &emp)
            };
            fd[n * n + i] = (shifted(h) - shifted(-h)) / (2.0 * h);
        }
        let fd = IsingParams::from_flat(n, &fd).unwrap();
        let mut diff = g.clone();
        diff.axpy(-1.0, &fd);
        let rel = diff.norm2() / g.norm2().max(1e-12);
        assert!(rel < 1e-6, "point {point}: relative error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_non_negative(seed_p in any::<u64>(), seed_q in any::<u64>(), n in 1usize..7) {
        let en = Enumerator::default();
        let p = random_params(n, &mut seed::rng(seed_p), 1.5);
        let q = random_params(n, &mut seed::rng(seed_q), 1.5);
        prop_assert!(en.kl(&p, &q).unwrap() >= 0.0);
        prop_assert!(en.kl(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one(seed_p in any::<u64>(), n in 1usize..9) {
        let p = random_params(n, &mut seed::rng(seed_p), 2.0);
        let (probs, _) = Enumerator::default().probabilities(&p).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
