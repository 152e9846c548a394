//! Checks against independent oracles: Monte Carlo, max-stability, brute
//! force simulation and closed forms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ebgev::gev::score_process;
use ebgev::simstudy::{generate_block_maxima, replication_rng};
use ebgev::{
    fisher_info_monte_carlo, fisher_info_numeric, ml_fit, predictive_quantile, BlockMaxSample,
    GevParams, PosteriorDraws, TrueModel,
};

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn frechet_maxima_are_max_stable() {
    let mut rng = replication_rng(17, 0);
    let s = generate_block_maxima(TrueModel::UnitFrechet, 100, 2000, &mut rng).unwrap();
    // unit-Frechet maxima of 100 are Frechet with b = a = 100
    let d = ks(s.maxima().to_vec(), |x| (-100.0 / x).exp());
    assert!(d < 0.05, "KS {d}");
}

#[test]
fn block_max_quantile_matches_brute_force() {
    let n = 200_000;
    let m = 10;
    for model in TrueModel::ALL {
        let mut rng = replication_rng(5, model as u64 as usize);
        let mut mx = generate_block_maxima(model, m, n, &mut rng)
            .unwrap()
            .maxima()
            .to_vec();
        mx.sort_by(|a, b| a.total_cmp(b));
        for p in [0.5, 0.1, 0.01] {
            let q = model.block_max_quantile(p, m);
            // fraction of simulated maxima above the exact quantile is
            // binomial(n, p)
            let above = mx.iter().filter(|&&x| x > q).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((above - p).abs() < 5.0 * se, "{model} p={p}: {above}");
        }
    }
}

// closed-form information of the standard GEV (Prescott and Walden),
// evaluated with mpmath at 30 digits
const CLOSED_FORM: [(f64, [[f64; 3]; 3]); 3] = [
    (
        -0.3,
        [
            [7.423236461035019, 1.3142540742109556, 3.066993825783534],
            [1.3142540742109556, 1.0868981764412673, 0.5941981452932559],
            [3.066993825783534, 0.5941981452932559, 2.995785674829848],
        ],
    ),
    (
        0.25,
        [
            [1.6503853737342224, 0.5264334402683614, -0.3580849582107535],
            [0.5264334402683614, 1.3847295710199343, -1.0069058988023523],
            [-0.3580849582107535, -1.0069058988023523, 1.8995740540998671],
        ],
    ),
    (
        -0.45,
        [
            [36.583082350187084, 8.368349795643367, 17.728060740960277],
            [8.368349795643367, 2.877836078847292, 4.419928291208501],
            [17.728060740960277, 4.419928291208501, 10.370861151804244],
        ],
    ),
];

#[test]
fn fisher_quadrature_matches_closed_form() {
    for (g, want) in CLOSED_FORM {
        let quad = fisher_info_numeric(g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let rel = (quad[(i, j)] - want[i][j]).abs() / want[i][j].abs();
                assert!(
                    rel < 1e-8,
                    "gamma={g} ({i},{j}): {} vs {}",
                    quad[(i, j)],
                    want[i][j]
                );
            }
        }
    }
}

// the squared score has finite variance only for gamma > -1/4, so the Monte
// Carlo estimate is a usable oracle only there
#[test]
fn fisher_quadrature_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for g in [0.0, 0.25] {
        let quad = fisher_info_numeric(g).unwrap();
        let mc = fisher_info_monte_carlo(g, 400_000, &mut rng).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let tol = 0.03 * quad[(i, i)].abs().max(quad[(j, j)].abs());
                assert!(
                    (quad[(i, j)] - mc[(i, j)]).abs() < tol,
                    "gamma={g} ({i},{j}): quad {} mc {}",
                    quad[(i, j)],
                    mc[(i, j)]
                );
            }
        }
        assert!((quad - quad.transpose()).amax() < 1e-10);
    }
}

// closer to -1/4 the outer products are heavy tailed, so judge each entry
// against its own sampled standard error
#[test]
fn fisher_quadrature_within_monte_carlo_error_for_negative_shape() {
    let g = -0.15;
    let th = GevParams::new(g, 0.0, 1.0).unwrap();
    let quad = fisher_info_numeric(g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 400_000;
    let (mut sum, mut sq) = ([[0.0f64; 3]; 3], [[0.0f64; 3]; 3]);
    for _ in 0..n {
        let s = th.score(th.sample(&mut rng)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v = s[i] * s[j];
                sum[i][j] += v;
                sq[i][j] += v * v;
            }
        }
    }
    let nf = n as f64;
    for i in 0..3 {
        for j in 0..3 {
            let mean = sum[i][j] / nf;
            let se = ((sq[i][j] / nf - mean * mean) / nf).sqrt();
            assert!(
                (mean - quad[(i, j)]).abs() < 5.0 * se,
                "({i},{j}): quad {} mc {mean} se {se}",
                quad[(i, j)]
            );
        }
    }
}

#[test]
fn score_has_zero_mean_at_truth() {
    let th = GevParams::new(0.2, 1.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let s = BlockMaxSample::new((0..n).map(|_| th.sample(&mut rng)).collect(), 1, "s").unwrap();
    let sc = score_process(&th, &s).unwrap();
    // score_process is k^{-1/2} times the summed score: N(0, I) at the truth
    let info = fisher_info_numeric(0.2).unwrap();
    for c in 0..3 {
        assert!(
            sc[c].abs() < 5.0 * info[(c, c)].sqrt(),
            "component {c}: {}",
            sc[c]
        );
    }
}

#[test]
fn ml_recovers_parameters_on_large_samples() {
    for (g, mu, sigma) in [(-0.3, 216.0, 38.0), (0.0, 0.0, 1.0), (0.6, 10.0, 3.0)] {
        let th = GevParams::new(g, mu, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = BlockMaxSample::new((0..20_000).map(|_| th.sample(&mut rng)).collect(), 1, "ml")
            .unwrap();
        let fit = ml_fit(&s, None).unwrap();
        assert!(fit.converged, "{g}: {fit:?}");
        let e = fit.theta_hat;
        assert!((e.gamma - g).abs() < 0.03, "{e:?}");
        assert!((e.mu - mu).abs() < 0.03 * sigma, "{e:?}");
        assert!((e.sigma / sigma - 1.0).abs() < 0.03, "{e:?}");
    }
}

#[test]
fn predictive_quantile_of_point_mass_is_gev_quantile() {
    let th = GevParams::new(-0.35, 216.4, 38.1).unwrap();
    let pd = PosteriorDraws::from_draws(vec![th; 10], 1).unwrap();
    for t in [2.0, 15.0, 100.0] {
        let q = predictive_quantile(&pd, 1.0 / t).unwrap();
        assert!((q - th.quantile(1.0 / t).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn predictive_quantile_solves_mixture_equation() {
    let ths = vec![
        GevParams::new(0.1, 0.0, 1.0).unwrap(),
        GevParams::new(-0.2, 1.0, 0.5).unwrap(),
        GevParams::new(0.4, -1.0, 2.0).unwrap(),
    ];
    let pd = PosteriorDraws::from_draws(ths.clone(), 1).unwrap();
    for p in [0.5, 0.1, 0.01] {
        let q = predictive_quantile(&pd, p).unwrap();
        let mix: f64 = ths.iter().map(|t| t.cdf(q).unwrap()).sum::<f64>() / 3.0;
        assert!((mix - (1.0 - p)).abs() < 1e-10, "p={p}");
    }
}
