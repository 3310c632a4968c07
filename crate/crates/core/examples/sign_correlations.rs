//! One-bit correlation estimates: compare the arcsine-law estimate from
//! sign bits with the plain sample correlation.

use ggm_mac::estimators::{sample_covariance, sign_quantize, signs_covariance};
use ggm_mac::model::{generate_random_model, RandomModelSpec};

fn main() -> ggm_mac::Result<()> {
    let m = generate_random_model(&RandomModelSpec::new(5, 0.5, 3), 1)?;
    let samples = m.sample(50_000, 2)?;
    let signs = signs_covariance(&sign_quantize(&samples))?;
    let plain = sample_covariance(&samples)?;
    println!("pair    true     sample   signs");
    for j in 0..5 {
        for k in (j + 1)..5 {
            println!(
                "({j},{k})  {:+.4}  {:+.4}  {:+.4}",
                m.covariance()[(j, k)],
                plain.matrix()[(j, k)],
                signs.matrix()[(j, k)]
            );
        }
    }
    Ok(())
}
