//! Evaluates the three minimax lower bounds over N, the order-wise Table-1
//! scalings, and the SNR at which the sparse and sparse-Gaussian bounds cross.
//!
//! Run with `cargo run --example bound_sweep`.

use kslab::bounds::{self, BoundInputs, Table1Distribution, Table1Structure};

fn main() -> kslab::Result<()> {
    let base = BoundInputs {
        n: 100.0,
        m1: 16,
        m2: 16,
        p1: 32,
        p2: 32,
        r: 1.0,
        sigma: 1.0,
        sigma_a: 1.0,
        s: 3,
        sigma_x_spectral: 3.0 / 1024.0,
        t: 0.5,
        c1: 0.05,
    };
    println!(
        "degrees term c1(p1(m1-1)+p2(m2-1)) - 3 = {}, L = {}",
        base.degrees_term(),
        base.cardinality()
    );
    println!("{:>8} {:>14} {:>14} {:>14}", "N", "thm1", "cor1", "thm2");
    for n in [1e2, 1e3, 1e4, 1e5] {
        let i = BoundInputs { n, ..base };
        println!(
            "{n:>8} {:>14.6e} {:>14.6e} {:>14.6e}",
            bounds::thm1_bound(&i)?.value,
            bounds::cor1_bound(&i)?.value,
            bounds::thm2_bound(&i)?.value
        );
    }

    let dims = (base.m1, base.m2, base.p1, base.p2);
    let snr = 0.1;
    println!("\norder-wise scalings at N = 1000, SNR = {snr}:");
    for d in [
        Table1Distribution::Sparse,
        Table1Distribution::GaussianSparse,
    ] {
        let un = bounds::table1_scaling(d, Table1Structure::Unstructured, dims, 1000.0, 1.0, snr);
        let ks = bounds::table1_scaling(d, Table1Structure::Kronecker, dims, 1000.0, 1.0, snr);
        println!(
            "{d:?}: unstructured {un:.4e}, Kronecker {ks:.4e}, ratio {:.1}",
            un / ks
        );
    }

    let x = bounds::crossover_snr(&base)?;
    println!(
        "\nsparse and sparse-Gaussian bounds cross at sigma_a = {:.6}, SNR = {:.4e}",
        x.sigma_a, x.snr
    );
    println!(
        "closed form SNR* = 32 * 1.58e-5 / m = {:.4e}",
        32.0 * 1.58e-5 / base.m() as f64
    );

    let vacuous = BoundInputs {
        m1: 4,
        m2: 4,
        p1: 8,
        p2: 8,
        c1: 0.044,
        ..base
    };
    let r = bounds::thm1_bound(&vacuous)?;
    println!(
        "\n(4,4,8,8) with c1 = 0.044: degrees term {:.3}, value {}, vacuous {}",
        r.degrees_term, r.value, r.vacuous
    );
    Ok(())
}
