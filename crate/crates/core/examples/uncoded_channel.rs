//! Send raw samples through a fading channel, then de-mix and de-bias them
//! at the receiver.

use ggm_mac::channel::{build_real_block, demixed_noise_variances};
use ggm_mac::estimators::uncoded_tail_constant;
use ggm_mac::model::{generate_random_model, RandomModelSpec};
use ggm_mac::{linalg, ChannelSpec, FadingModel, Method, Pipeline, SolverConfig};

fn main() -> ggm_mac::Result<()> {
    let d = 8;
    let m = generate_random_model(&RandomModelSpec::new(d, 0.3, 3), 3)?;
    let samples = m.sample(20_000, 4)?;
    for snr in [1.0, 3.0, 10.0, 100.0] {
        let spec = ChannelSpec::rayleigh(d, FadingModel::ComplexNormal, snr, 1.0, 5)?;
        let chan = build_real_block(&spec)?;
        let p = Pipeline::new(Method::Uncoded, Some(&spec), SolverConfig::default())?;
        let est = p.estimate(&samples, 6)?;
        let v = demixed_noise_variances(&chan);
        println!(
            "snr {snr:>5}: max error {:.4}, mean noise variance {:.3}, c = {:.3e}",
            linalg::max_abs_diff(est.matrix(), m.covariance()),
            v.iter().sum::<f64>() / d as f64,
            uncoded_tail_constant(&chan)
        );
    }
    Ok(())
}
