//! Power profiles `t^p / p`, their behaviour at the origin, and the
//! `t^2 + t` profile that breaks the standing assumptions.

use hbary::cost::{classify_origin, counterexample_profile, custom_profile, power_profile};

fn main() -> hbary::Result<()> {
    for p in [1.5, 2.0, 3.0] {
        let h = power_profile(p)?;
        println!(
            "p = {p}: h(0.5) = {:.5}, h'(0.5) = {:.5}, h''(0.5) = {:.5}, (h')^-1(0.25) = {:.5}, origin {:?}",
            h.eval(0.5),
            h.deriv(0.5),
            h.second_deriv(0.5),
            h.inv_deriv(0.25)?,
            classify_origin(&h)
        );
    }

    // t^2/2 + t^4/4 is admissible and C^2 at the origin
    let quartic = custom_profile(
        |t| t * t / 2.0 + t.powi(4) / 4.0,
        |t| t + t.powi(3),
        |t| 1.0 + 3.0 * t * t,
        f64::INFINITY,
    )?;
    println!("quartic origin {:?}", quartic.origin_class());

    let bad = counterexample_profile();
    println!(
        "t^2 + t: admissible = {}, origin {:?}",
        bad.is_admissible(),
        bad.origin_class()
    );
    Ok(())
}
