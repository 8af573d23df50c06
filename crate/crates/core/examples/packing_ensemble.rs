//! Constructs a Kronecker-structured dictionary ensemble around a random
//! reference, verifies geometry and KL budget, and persists it.
//!
//! Run with `cargo run --example packing_ensemble [out_dir]`.

use kslab::model::{CoefficientModel, KsDictionary};
use kslab::packing::{self, DictionaryEnsemble, EnsembleMode, PackingParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let reference = KsDictionary::random(4, 8, 4, 8, &mut rng)?;
    let mode = EnsembleMode::Sparse { s: 2 };
    let params = PackingParams {
        t: 0.5,
        c1: 0.044,
        alpha: None,
        eps_prime: PackingParams::eps_cap(mode, 1.0, 64) / 2.0,
        r: 1.0,
        l_target: None,
    };
    let ensemble = packing::build_ensemble_seeded(&reference, &params, mode, 5)?;
    let report =
        packing::verify_ensemble(&ensemble, &CoefficientModel::sparse_gaussian(2, 1.0), 1.0)?;

    println!(
        "L = {} members, eps' = {}",
        ensemble.len(),
        params.eps_prime
    );
    println!(
        "pairwise ||Dl - Dl'||^2 in [{:.6}, {:.6}], required [{}, {}]",
        report.min_pair_dist_sq,
        report.max_pair_dist_sq,
        report.lower_sandwich,
        report.upper_sandwich
    );
    println!(
        "max ||Dl - D0||_F = {:.6} < r = {}",
        report.max_dist_to_reference, report.radius
    );
    if let Some(kl) = &report.kl {
        println!(
            "worst per-sample KL {:.3e} nats against budget {:.3}",
            kl.alpha_l_per_sample, kl.budget_per_sample
        );
    }
    println!(
        "verification: {}",
        if report.pass { "PASS" } else { "FAIL" }
    );

    // A larger ensemble: t = 0.9 admits c1 up to 0.146, capped here at 32 members.
    let wide = PackingParams {
        t: 0.9,
        c1: 0.14,
        l_target: Some(32),
        ..params
    };
    let big_ref = KsDictionary::random(8, 8, 8, 8, &mut rng)?;
    let big = packing::build_ensemble_seeded(&big_ref, &wide, mode, 6)?;
    println!(
        "(8,8,8,8), t = 0.9: L = {}, pairwise distance ratio max/min = {:.3}",
        big.len(),
        big.report.max_pair_dist_sq / big.report.min_pair_dist_sq
    );

    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-ensemble".into());
    ensemble.save(std::path::Path::new(&out))?;
    let back = DictionaryEnsemble::load(std::path::Path::new(&out))?;
    println!(
        "saved to {out}; reload identical: {}",
        back.members == ensemble.members
    );
    Ok(())
}
