//! Exact-recovery probability of a star against the sample size, for every
//! method.

use ggm_mac::metrics::recovery_rate;
use ggm_mac::model::generate_star_model;
use ggm_mac::{ChannelSpec, Method, Pipeline, SolverConfig};
use nalgebra::DMatrix;

fn main() -> ggm_mac::Result<()> {
    let m = generate_star_model(12, 0.3)?;
    let spec = ChannelSpec::from_snr(DMatrix::identity(12, 12), 3.0)?;
    print!("{:>6}", "n");
    for method in Method::ALL {
        print!("  {method:>8}");
    }
    println!();
    for n in [500, 1000, 2000, 4000, 8000] {
        print!("{n:>6}");
        for method in Method::ALL {
            let p = Pipeline::new(method, Some(&spec), SolverConfig::with_lambda(0.1))?;
            print!("  {:>8.2}", recovery_rate(&m, &p, n, 50, 17)?.exact);
        }
        println!();
    }
    Ok(())
}
