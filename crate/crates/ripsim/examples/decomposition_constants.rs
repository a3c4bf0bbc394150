//! Exact combinatorial constants of the moment decomposition, and a Monte
//! Carlo evaluation of the decomposed second moment.

use ripsim::analytic::RipsParams;
use ripsim::decomp::{constants_table, enumerate_classes, moment_estimate, variance_terms};

fn main() -> ripsim::Result<()> {
    // C(n, r) for the second moment: 1/n!^2 at r = 0 up to 1/n! at r = n
    println!("second-moment constants:");
    for row in constants_table(3)? {
        if row.p == 2 {
            println!(
                "  n = {}, r = {}: {}/{}",
                row.n,
                row.signature.label(),
                row.constant.numer(),
                row.constant.denom()
            );
        }
    }

    // the full class list is finer than the (p, n, r) table: classes with
    // equal shared counts can still integrate differently for p >= 3
    let d23 = enumerate_classes(2, 3)?;
    println!(
        "\np = 3, n = 2: {} classes over {} count signatures",
        d23.terms.len(),
        {
            let mut sigs: Vec<_> = d23.terms.iter().map(|t| &t.signature.shared).collect();
            sigs.dedup();
            sigs.len()
        }
    );

    // E[F_1^2] assembled term by term
    let p = RipsParams::new(2, 50.0, 0.1, 1)?;
    let d22 = enumerate_classes(2, 2)?;
    let second = moment_estimate(&d22, &p, 500_000, 1)?;
    println!(
        "\nE[F_1^2] at d=2, t=50, delta=0.1: {:.3} +- {:.3}",
        second.value, second.standard_error
    );
    for (r, term) in variance_terms(&d22, &p, 500_000, 2)?.iter().enumerate() {
        println!(
            "  variance term r = {}: {:.3} +- {:.3}",
            r + 1,
            term.value,
            term.standard_error
        );
    }
    Ok(())
}
