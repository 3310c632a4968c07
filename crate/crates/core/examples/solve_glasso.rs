//! Solve the penalized log-determinant problem along a λ path and watch the
//! support shrink.

use ggm_mac::estimators::sample_covariance;
use ggm_mac::metrics::score;
use ggm_mac::model::{generate_random_model, RandomModelSpec};
use ggm_mac::solver::{glasso_solve, SolverConfig};

fn main() -> ggm_mac::Result<()> {
    let m = generate_random_model(&RandomModelSpec::new(25, 0.15, 4), 8)?;
    let s = sample_covariance(&m.sample(2_000, 9)?)?;
    println!("true edges: {}", m.edges().len());
    println!("lambda   edges  tpr    fpr    sweeps");
    for lambda in [0.01, 0.03, 0.05, 0.1, 0.2, 0.4] {
        let r = glasso_solve(&s, &SolverConfig::with_lambda(lambda))?;
        let rep = score(&m, &r)?;
        println!(
            "{lambda:<7}  {:>5}  {:.3}  {:.3}  {}",
            r.edges.len(),
            rep.tpr,
            rep.fpr,
            r.sweeps_used
        );
    }
    Ok(())
}
