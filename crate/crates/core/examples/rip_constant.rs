//! Exhaustive restricted isometry constants of a Kronecker dictionary and its
//! factors, for increasing order s.
//!
//! Run with `cargo run --example rip_constant`.

use kslab::bounds::{self, RIP_BUDGET};
use kslab::model::KsDictionary;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> kslab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dict = KsDictionary::random(6, 8, 4, 4, &mut rng)?;
    for (name, m) in [("A", dict.a()), ("B", dict.b()), ("A ⊗ B", dict.d())] {
        print!("{name:<6} {:?}:", m.shape());
        for s in 1..=3 {
            if s > m.ncols() {
                break;
            }
            let rep = bounds::rip_constant(m, s, RIP_BUDGET)?;
            print!(
                "  delta_{s} = {:.4} at {:?}",
                rep.delta,
                rep.witness.as_slice()
            );
        }
        println!();
    }
    match bounds::rip_constant(dict.d(), 8, 1000) {
        Err(e) => println!("order 8 on 128 columns: {e}"),
        Ok(r) => println!("order 8: {}", r.delta),
    }
    Ok(())
}
