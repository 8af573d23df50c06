//! Monte Carlo hypothesis test over a verified ensemble: error rate with
//! Wilson intervals, decode-then-output MSE against the matching lower bound,
//! and the Fano consistency check, for both kinds of side information.
//!
//! Run with `cargo run --release --example detection_experiment`.

use kslab::model::{CoefficientModel, KsDictionary};
use kslab::packing::{self, EnsembleMode, PackingParams};
use kslab::simulate::{self, ExperimentSpec, SideInfo};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reference = KsDictionary::random(4, 8, 4, 8, &mut rng)?;
    let mode = EnsembleMode::Sparse { s: 2 };
    let params = PackingParams {
        t: 0.9,
        c1: 0.14,
        alpha: None,
        eps_prime: PackingParams::eps_cap(mode, 1.0, 64) / 2.0,
        r: 1.0,
        l_target: Some(8),
    };
    let ensemble = packing::build_ensemble_seeded(&reference, &params, mode, 8)?;
    println!("ensemble of {} members", ensemble.len());

    for (side, sigma) in [(SideInfo::FullX, 0.15), (SideInfo::SupportOnly, 0.05)] {
        let spec = ExperimentSpec {
            ensemble: &ensemble,
            model: CoefficientModel::sparse_gaussian(2, 1.0),
            sigma,
            n_grid: vec![1, 4, 16, 64],
            trials: 1000,
            side_info: side,
            master_seed: 9,
        };
        let (curve, mse) = simulate::run_mse_experiment(&spec)?;
        let fano = simulate::fano_consistency_check(&curve, &spec);
        println!("\n{side:?}, sigma = {sigma}");
        println!(
            "{:>5} {:>10} {:>21} {:>12} {:>12}",
            "N", "error", "95% CI", "worst MSE", "bound"
        );
        for (pt, c) in curve.points.iter().zip(&mse) {
            println!(
                "{:>5} {:>10.4} [{:.4}, {:.4}] {:>12.4e} {:>12.4e}",
                pt.n, pt.error_rate, pt.ci_low, pt.ci_high, pt.worst_mse, c.bound.value
            );
        }
        println!("Fano violations: {}", fano.violations);
    }
    Ok(())
}
