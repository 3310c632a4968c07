//! Sufficient sample sizes for the two methods on a star as the channel
//! gets noisier.

use ggm_mac::channel::build_real_block;
use ggm_mac::estimators::uncoded_tail_constant;
use ggm_mac::metrics::theorem_bounds;
use ggm_mac::model::{compute_constants, generate_star_model};
use ggm_mac::ChannelSpec;
use nalgebra::DMatrix;

fn main() -> ggm_mac::Result<()> {
    let m = generate_star_model(20, 0.25)?;
    let constants = compute_constants(&m)?;
    let eps = 0.5 / 400.0;
    println!("snr     c           signs n_min   uncoded n_min");
    for snr in [1.0, 3.0, 10.0, 100.0] {
        let spec = ChannelSpec::from_snr(DMatrix::identity(20, 20), snr)?;
        let c = uncoded_tail_constant(&build_real_block(&spec)?);
        let b = theorem_bounds(&constants, &m, c, eps)?;
        println!(
            "{snr:<6}  {c:.3e}   {:.3e}     {:.3e}",
            b.n_min_sign_b, b.n_min_uncoded_b
        );
    }
    Ok(())
}
