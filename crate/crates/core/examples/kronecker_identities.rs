//! Kronecker, Khatri-Rao and index-map identities on small random factors.
//!
//! Run with `cargo run --example kronecker_identities`.

use kslab::linalg::{self, IndexMultiset, Matrix};
use kslab::model::KsDictionary;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dict = KsDictionary::random(3, 8, 2, 6, &mut rng)?;
    let (a, b) = (dict.a(), dict.b());
    println!(
        "A is {:?}, B is {:?}, D = A ⊗ B is {:?}",
        a.shape(),
        b.shape(),
        dict.d().shape()
    );

    // vec(B X Aᵀ) = (A ⊗ B) vec(X) with column-major vec.
    let x = Matrix::from_fn(6, 8, |i, j| ((i * 8 + j) as f64).sin());
    let lhs = linalg::vec(&(b * &x * a.transpose()));
    let rhs = dict.d() * linalg::vec(&x);
    println!(
        "max |vec(BXA^T) - (A⊗B)vec(X)| = {:e}",
        (lhs - rhs).abs().max()
    );

    // Factor-level supports may repeat; the merged support does not.
    let ska = IndexMultiset::new(vec![1, 2, 2, 3], 8)?;
    let skb = IndexMultiset::new(vec![3, 1, 4, 5], 6)?;
    let sk = linalg::merge_indices(&ska, &skb, 8, 6)?;
    println!(
        "merge({:?}, {:?}) = {:?}",
        ska.as_slice(),
        skb.as_slice(),
        sk.as_slice()
    );
    let (back_a, back_b) = linalg::split_indices(&sk, 8, 6)?;
    println!(
        "split recovers the factors: {}",
        back_a == ska && back_b == skb
    );

    // The subdictionary on Sk is the Khatri-Rao product of the factor selections.
    let via_kr = dict.subdictionary(&sk)?;
    let via_slice = linalg::select_columns(dict.d(), &sk)?;
    println!(
        "max |A_Ska * B_Skb - D_Sk| = {:e}",
        (via_kr - via_slice).abs().max()
    );
    Ok(())
}
