//! Draws observations `Y = D X + N` under each coefficient law, reports the
//! empirical SNR against its closed form, and saves one dataset to disk.
//!
//! Run with `cargo run --example generative_model [out_dir]`.

use kslab::model::{self, CoefficientModel, KsDictionary, NonzeroLaw};
use kslab::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dict = KsDictionary::random(4, 8, 4, 8, &mut rng)?;
    let (m, p) = (dict.m(), dict.p());
    let sigma = 0.5;
    let n = 20_000;

    let models = [
        (
            "general, Σx = 0.1 I",
            CoefficientModel::General {
                covariance: Matrix::identity(p, p) * 0.1,
            },
        ),
        ("sparse ±σa", CoefficientModel::sparse_uniform(3, 1.0)),
        (
            "sparse uniform",
            CoefficientModel::SparseUniform {
                s: 3,
                sigma_a: 1.0,
                law: NonzeroLaw::Uniform,
            },
        ),
        ("sparse Gaussian", CoefficientModel::sparse_gaussian(3, 1.0)),
    ];
    for (name, coeff) in &models {
        let data = model::synthesize_seeded(&dict, coeff, n, sigma, 7)?;
        let signal = (dict.d() * &data.x).norm_squared();
        let noise = (&data.y - dict.d() * &data.x).norm_squared();
        let predicted = model::snr(coeff, m, sigma, Some(&dict))?;
        println!(
            "{name:<22} empirical SNR {:.4}  closed form {:.4}",
            signal / noise,
            predicted
        );
    }

    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-dataset".into());
    let data = model::synthesize_seeded(&dict, &models[3].1, 100, sigma, 7)?;
    data.save(std::path::Path::new(&out), &models[3].1)?;
    println!("saved 100 samples to {out}");
    Ok(())
}
