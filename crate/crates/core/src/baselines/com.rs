use super::{background_free_roi, BaselineParams};
use crate::error::{Error, Result};
use crate::image::{GrayImage, SubpixelPoint};

/// Intensity-weighted centroid of `|ROI - median(image)|`.
pub fn detect_com(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &BaselineParams,
) -> Result<SubpixelPoint> {
    params.validate()?;
    com_with_background(image, guess, params.roi_n, image.median())
}

pub(crate) fn com_with_background(
    image: &GrayImage,
    guess: SubpixelPoint,
    n: usize,
    background: f64,
) -> Result<SubpixelPoint> {
    let (roi, (ox, oy)) = background_free_roi(image, guess, n, background)?;
    let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
    for (k, &w) in roi.iter().enumerate() {
        mass += w;
        mx += w * (k % n) as f64;
        my += w * (k / n) as f64;
    }
    if !(mass > 0.0) {
        return Err(Error::NoParticle(
            "region matches the image median everywhere".into(),
        ));
    }
    Ok(SubpixelPoint::new(
        ox as f64 + mx / mass,
        oy as f64 + my / mass,
    ))
}
