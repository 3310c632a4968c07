//! Find the lowest SNR at which every machine can send one bit per channel
//! use, for identity gains and one fading draw.

use ggm_mac::channel::{fading_gains, rate_region_feasible};
use ggm_mac::{ChannelSpec, FadingModel};
use nalgebra::DMatrix;

fn threshold(gains: &DMatrix<nalgebra::Complex<f64>>) -> ggm_mac::Result<f64> {
    let ones = vec![1.0; gains.ncols()];
    let (mut lo, mut hi) = (1e-6_f64, 1e6_f64);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if rate_region_feasible(&ChannelSpec::from_snr(gains.clone(), mid)?, &ones)?.feasible {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn main() -> ggm_mac::Result<()> {
    let d = 6;
    let identity = DMatrix::identity(d, d);
    println!(
        "identity gains: one bit each needs snr ≥ {:.4}",
        threshold(&identity)?
    );
    let faded = fading_gains(d, FadingModel::ComplexNormal, 9);
    println!(
        "fading draw:    one bit each needs snr ≥ {:.4}",
        threshold(&faded)?
    );
    let r = rate_region_feasible(&ChannelSpec::from_snr(faded, 0.5)?, &vec![1.0; d])?;
    println!(
        "at snr 0.5 the tightest subset is {:?} with slack {:.3} bits",
        r.tightest_subset, r.tightest_slack
    );
    Ok(())
}
