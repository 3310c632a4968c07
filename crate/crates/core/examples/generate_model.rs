//! Draw a random sparse model and a star, then print their incoherence
//! constants.

use ggm_mac::model::{
    compute_constants, generate_random_model, generate_star_model, RandomModelSpec,
};

fn main() -> ggm_mac::Result<()> {
    let random = generate_random_model(&RandomModelSpec::new(30, 0.1, 5), 42)?;
    let star = generate_star_model(20, 0.25)?;
    for (name, m) in [("random", &random), ("star", &star)] {
        let c = compute_constants(m)?;
        println!(
            "{name:>6}: d={} edges={} max_degree={} theta_min={:.3} alpha={:.3} kappa_sigma={:.3} kappa_gamma={:.3}",
            m.dim(),
            m.edges().len(),
            m.max_degree(),
            m.theta_min(),
            c.alpha,
            c.kappa_sigma,
            c.kappa_gamma
        );
    }
    Ok(())
}
