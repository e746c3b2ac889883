//! Print-and-scan degradation.
//!
//! Steps run in a fixed order on a float copy of the image: contrast scaling
//! about mid-grey, Gaussian blur, rigid warp (the same resampler as
//! [`crate::align::warp_image`]), additive Gaussian noise, then rounding and
//! clamping to `[0, 255]`.

use rand::prelude::*;
use rand_distr::Normal;

use crate::align::{warp_f32, RigidTransform};
use crate::error::{Error, Result};
use crate::image::{gaussian_blur_f32, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradeParams {
    /// Contrast factor in `[0.5, 1.5]` applied about 127.5.
    pub contrast: f64,
    /// Gaussian blur σ in pixels, at most 3.
    pub blur_sigma: f64,
    /// |θ| ≤ 10°, |tx|, |ty| ≤ 50 px.
    pub transform: RigidTransform,
    /// Additive noise σ in grey levels, at most 25.
    pub noise_sigma: f64,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            contrast: 1.0,
            blur_sigma: 0.0,
            transform: RigidTransform::IDENTITY,
            noise_sigma: 0.0,
        }
    }
}

impl DegradeParams {
    pub fn validate(&self) -> Result<()> {
        let t = &self.transform;
        let checks = [
            ((0.5..=1.5).contains(&self.contrast), "contrast must lie in [0.5, 1.5]"),
            ((0.0..=3.0).contains(&self.blur_sigma), "blur sigma must lie in [0, 3]"),
            (
                (0.0..=25.0).contains(&self.noise_sigma),
                "noise sigma must lie in [0, 25]",
            ),
            (t.theta.abs() <= 10.0, "rotation must lie in [-10, 10] degrees"),
            (
                t.tx.abs() <= 50.0 && t.ty.abs() <= 50.0,
                "shift must lie in [-50, 50] px",
            ),
        ];
        match checks.iter().find(|c| !c.0) {
            Some((_, msg)) => Err(Error::InvalidArgument((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Simulates printing and re-digitizing `img`. Deterministic given `rng`.
pub fn degrade_image(img: &GrayImage, params: &DegradeParams, rng: &mut impl Rng) -> Result<GrayImage> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let mut data = img.to_f32();
    if params.contrast != 1.0 {
        let s = params.contrast as f32;
        for v in &mut data {
            *v = 127.5 + s * (*v - 127.5);
        }
    }
    if params.blur_sigma > 0.0 {
        data = gaussian_blur_f32(&data, w, h, params.blur_sigma);
    }
    if params.transform != RigidTransform::IDENTITY {
        data = warp_f32(&data, w, h, &params.transform);
    }
    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0f32, params.noise_sigma as f32)
            .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        for v in &mut data {
            *v += normal.sample(rng);
        }
    }
    GrayImage::from_f32(w, h, &data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::warp_image;
    use rand_chacha::ChaCha8Rng;

    fn img() -> GrayImage {
        let mut im = GrayImage::filled(40, 30, 255);
        for y in 10..20 {
            for x in 5..25 {
                im.set(x, y, (x * 9) as u8);
            }
        }
        im
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn neutral_parameters_are_identity() {
        assert_eq!(
            degrade_image(&img(), &DegradeParams::default(), &mut rng()).unwrap(),
            img()
        );
    }

    #[test]
    fn pure_rotation_matches_warp_image() {
        let p = DegradeParams {
            transform: RigidTransform::rotation(2.0),
            ..DegradeParams::default()
        };
        let expected = warp_image(&img(), &RigidTransform::rotation(2.0));
        assert_eq!(degrade_image(&img(), &p, &mut rng()).unwrap(), expected);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let p = DegradeParams {
            contrast: 0.8,
            blur_sigma: 1.0,
            transform: RigidTransform::new(1.0, 3.0, -2.0),
            noise_sigma: 10.0,
        };
        let a = degrade_image(&img(), &p, &mut rng()).unwrap();
        let b = degrade_image(&img(), &p, &mut rng()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, img());
    }

    #[test]
    fn blur_preserves_flat_images() {
        let flat = GrayImage::filled(9, 9, 100);
        let p = DegradeParams {
            blur_sigma: 2.0,
            ..DegradeParams::default()
        };
        assert_eq!(degrade_image(&flat, &p, &mut rng()).unwrap(), flat);
    }

    #[test]
    fn out_of_range_parameters() {
        for p in [
            DegradeParams {
                contrast: 2.0,
                ..DegradeParams::default()
            },
            DegradeParams {
                blur_sigma: 3.5,
                ..DegradeParams::default()
            },
            DegradeParams {
                noise_sigma: 30.0,
                ..DegradeParams::default()
            },
            DegradeParams {
                transform: RigidTransform::rotation(11.0),
                ..DegradeParams::default()
            },
            DegradeParams {
                transform: RigidTransform::translation(0.0, 51.0),
                ..DegradeParams::default()
            },
        ] {
            assert!(degrade_image(&img(), &p, &mut rng()).is_err());
        }
    }
}
