//! The information chain behind the lower bounds, checked numerically on a
//! real experiment: Fano threshold, measured KL, the closed-form MI bound,
//! and what happens when that bound is deliberately weakened.
//!
//! Run with `cargo run --release --example fano_chain`.

use kslab::bounds;
use kslab::model::KsDictionary;
use kslab::packing::{self, EnsembleMode, PackingParams};
use kslab::simulate::{self, ExperimentSpec, SideInfo};
use kslab::{CoefficientModel, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let eye = Matrix::identity(3, 3);
    println!(
        "KL(N(0,2I) || N(0,I)) in 2-D = {:.15} (1 - ln 2 = {:.15})",
        bounds::kl_gaussian(&(Matrix::identity(2, 2) * 2.0), &Matrix::identity(2, 2))?,
        1.0 - std::f64::consts::LN_2
    );
    println!(
        "KL of a law with itself = {}",
        bounds::kl_gaussian(&eye, &eye)?
    );

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let reference = KsDictionary::random(8, 8, 8, 8, &mut rng)?;
    let params = PackingParams {
        t: 0.9,
        c1: 0.14,
        alpha: None,
        eps_prime: PackingParams::eps_cap(EnsembleMode::General, 1.0, 64) / 2.0,
        r: 1.0,
        l_target: Some(16),
    };
    let ensemble = packing::build_ensemble_seeded(&reference, &params, EnsembleMode::General, 11)?;
    let model = CoefficientModel::General {
        covariance: Matrix::identity(64, 64),
    };
    let sigma = 0.3;
    let report = packing::verify_ensemble(&ensemble, &model, sigma)?;
    let kl = report.kl.as_ref().expect("verify fills the KL check");
    let l = ensemble.len() as f64;
    println!(
        "\nL = {l}, Fano threshold (1/2) log2 L - 1 = {}",
        bounds::fano_lower(l)?
    );
    println!(
        "per-sample: worst measured KL {:.4} nats, closed-form MI bound {:.4}",
        kl.alpha_l_per_sample, kl.budget_per_sample
    );

    let spec = ExperimentSpec {
        ensemble: &ensemble,
        model,
        sigma,
        n_grid: vec![1, 2, 4, 8],
        trials: 2000,
        side_info: SideInfo::FullX,
        master_seed: 12,
    };
    let curve = simulate::run_error_experiment(&spec)?;
    let honest = simulate::fano_consistency_check(&curve, &spec);
    let halved = simulate::fano_consistency_with(&curve, ensemble.len(), |n| {
        0.5 * simulate::analytic_mi_upper(&spec, n)
    });
    println!(
        "\n{:>4} {:>8} {:>12} {:>12} {:>12}",
        "N", "error", "Fano LHS", "MI bound", "MI bound/2"
    );
    for ((pt, h), f) in curve.points.iter().zip(&honest.rows).zip(&halved.rows) {
        println!(
            "{:>4} {:>8.4} {:>12.4} {:>12.4} {:>12.4}",
            pt.n, pt.error_rate, h.lhs, h.mi_upper, f.mi_upper
        );
    }
    println!(
        "violations: honest {}, halved {}",
        honest.violations, halved.violations
    );
    println!(
        "halving leaves the bound near the average pairwise KL, which itself bounds the mutual \
         information, so Fano's left side stays below it."
    );
    Ok(())
}
