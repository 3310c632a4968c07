//! Write a model and an estimate in the plain-text matrix format and read
//! them back.

use ggm_mac::estimators::sample_covariance;
use ggm_mac::matrix_io::{
    estimate_file, estimate_from_file, model_file, model_from_file, MatrixFile,
};
use ggm_mac::model::generate_star_model;

fn main() -> ggm_mac::Result<()> {
    let m = generate_star_model(4, 0.3)?;
    let text = model_file(&m, None).to_string_lossless();
    print!("{text}");
    let back = model_from_file(&MatrixFile::read_from(text.as_bytes())?)?;
    assert_eq!(back.precision(), m.precision());

    let est = sample_covariance(&m.sample(500, 1)?)?;
    let est_text = estimate_file(&est).to_string_lossless();
    let est_back = estimate_from_file(&MatrixFile::read_from(est_text.as_bytes())?)?;
    assert_eq!(est_back.matrix(), est.matrix());
    println!("round trip exact for both files");
    Ok(())
}
