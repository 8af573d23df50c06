//! Builds a ±α sign codebook with bounded pairwise correlation, rechecks it
//! exhaustively, and shows that an injected duplicate is caught.
//!
//! Run with `cargo run --example sign_codebook`.

use kslab::packing::{self, PackingParams, SignCodebook};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let (m, p) = (8, 8);
    let params = PackingParams {
        t: 0.53,
        c1: 0.05,
        alpha: Some(1.0 / 8.0),
        eps_prime: 1e-3,
        r: 1.0,
        l_target: None,
    };
    let cap = packing::max_codebook_size(m, p, params.c1)?;
    println!("largest admissible codebook: floor(2^(c1 m p - 1/2)) = {cap}");
    println!(
        "alpha condition c1 < (t/(2 alpha^2 m p))^2/(2 ln 2): {}",
        packing::alpha_admissible(params.c1, params.t, 1.0 / 8.0, m, p)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cb = packing::build_sign_codebook(m, p, &params, cap, &mut rng, 100)?;
    let rep = packing::verify_sign_codebook(&cb);
    println!(
        "built {} codewords, max |corr| = {} (t = {}), worst pair {:?}, pass = {}",
        rep.size, rep.max_abs_correlation, cb.t, rep.worst_pair, rep.pass
    );

    let mut tampered = cb.matrices.clone();
    tampered.push(cb.matrices[1].clone());
    let bad = packing::verify_sign_codebook(&SignCodebook {
        matrices: tampered,
        ..cb
    });
    println!(
        "with a duplicate appended: max |corr| = {}, worst pair {:?}, pass = {}",
        bad.max_abs_correlation, bad.worst_pair, bad.pass
    );
    Ok(())
}
