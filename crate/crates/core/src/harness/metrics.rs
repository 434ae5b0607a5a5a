//! Image error metrics.

use thiserror::Error;

use super::image::Image;

/// Stabilizer in the relative metric denominators.
pub const METRIC_EPSILON: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimensions(usize, usize, usize, usize),
    #[error("at least two images are needed")]
    TooFewImages,
}

fn check(a: &Image, b: &Image) -> Result<(), MetricsError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricsError::Dimensions(a.width, a.height, b.width, b.height))
    }
}

fn channels(img: &Image) -> impl Iterator<Item = f64> + '_ {
    img.pixels.iter().flat_map(|p| p.to_array())
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean relative squared error `(e - r)^2 / (r^2 + ε)`.
pub fn mrse(estimate: &Image, reference: &Image) -> Result<f64, MetricsError> {
    check(estimate, reference)?;
    Ok(mean_of(
        channels(estimate)
            .zip(channels(reference))
            .map(|(e, r)| (e - r) * (e - r) / (r * r + METRIC_EPSILON)),
    ))
}

/// Symmetric mean absolute percentage error between consecutive frames.
pub fn smape(current: &Image, previous: &Image) -> Result<f64, MetricsError> {
    check(current, previous)?;
    Ok(mean_of(
        channels(current)
            .zip(channels(previous))
            .map(|(e, p)| (e - p).abs() / ((e.abs() + p.abs()) * 0.5 + METRIC_EPSILON)),
    ))
}

/// Metrics of one frame; absent inputs give `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImageMetrics {
    pub mrse: Option<f64>,
    pub smape: Option<f64>,
}

pub fn compute_metrics(
    image: &Image,
    reference: Option<&Image>,
    previous: Option<&Image>,
) -> Result<ImageMetrics, MetricsError> {
    Ok(ImageMetrics {
        mrse: reference.map(|r| mrse(image, r)).transpose()?,
        smape: previous.map(|p| smape(image, p)).transpose()?,
    })
}

/// Relative bias and variance of independent renderings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVariance {
    /// MRSE of the mean image.
    pub rbias2: f64,
    /// Mean of the per-channel sample variance over `r^2 + ε`.
    pub rvar: f64,
}

pub fn bias_variance(images: &[Image], reference: &Image) -> Result<BiasVariance, MetricsError> {
    if images.len() < 2 {
        return Err(MetricsError::TooFewImages);
    }
    for img in images {
        check(img, reference)?;
    }
    let n = images.len() as f64;
    let mut mean = Image::new(reference.width, reference.height);
    for img in images {
        for (m, p) in mean.pixels.iter_mut().zip(&img.pixels) {
            *m += *p / n;
        }
    }
    let rbias2 = mrse(&mean, reference)?;
    let mut var = Image::new(reference.width, reference.height);
    for img in images {
        for (v, (p, m)) in var.pixels.iter_mut().zip(img.pixels.iter().zip(&mean.pixels)) {
            let d = *p - *m;
            *v += d * d / (n - 1.0);
        }
    }
    let rvar = mean_of(
        channels(&var)
            .zip(channels(reference))
            .map(|(v, r)| v / (r * r + METRIC_EPSILON)),
    );
    Ok(BiasVariance { rbias2, rvar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rgb;

    #[test]
    fn identical_images() {
        let a = Image::filled(4, 3, Rgb::new(0.2, 1.0, 3.0));
        assert_eq!(mrse(&a, &a).unwrap(), 0.0);
        assert_eq!(smape(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_pixel_mrse() {
        let e = Image::filled(1, 1, Rgb::splat(2.0));
        let r = Image::filled(1, 1, Rgb::splat(1.0));
        assert!((mrse(&e, &r).unwrap() - 1.0 / 1.01).abs() < 1e-15);
        assert!((smape(&e, &r).unwrap() - 1.0 / 1.51).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Image::new(2, 2);
        let b = Image::new(2, 3);
        assert_eq!(mrse(&a, &b), Err(MetricsError::Dimensions(2, 2, 2, 3)));
        assert!(compute_metrics(&a, None, Some(&b)).is_err());
        assert_eq!(compute_metrics(&a, None, None).unwrap(), ImageMetrics::default());
    }

    #[test]
    fn bias_variance_split() {
        let r = Image::filled(1, 1, Rgb::splat(1.0));
        let imgs = [Image::filled(1, 1, Rgb::splat(1.0)), Image::filled(1, 1, Rgb::splat(3.0))];
        let bv = bias_variance(&imgs, &r).unwrap();
        assert!((bv.rbias2 - 1.0 / 1.01).abs() < 1e-15);
        assert!((bv.rvar - 2.0 / 1.01).abs() < 1e-15);
        // mse = bias² + (n-1)/n var
        let m = (mrse(&imgs[0], &r).unwrap() + mrse(&imgs[1], &r).unwrap()) / 2.0;
        assert!((m - (bv.rbias2 + bv.rvar / 2.0)).abs() < 1e-12);
    }
}
