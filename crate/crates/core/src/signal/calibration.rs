use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Ratio between the device's raw pulse metric and a reference pulse meter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "CalibrationFields<F>",
    bound(deserialize = "F: Scalar + Deserialize<'de>")
)]
pub struct CalibrationRecord<F> {
    pub device_mean: F,
    pub reference_mean: F,
    pub scaling_factor: F,
}

#[derive(Deserialize)]
struct CalibrationFields<F> {
    device_mean: F,
    reference_mean: F,
    scaling_factor: Option<F>,
}

impl<F: Scalar> TryFrom<CalibrationFields<F>> for CalibrationRecord<F> {
    type Error = Error;

    fn try_from(f: CalibrationFields<F>) -> Result<Self> {
        let rec = Self::from_means(f.device_mean, f.reference_mean)?;
        if let Some(s) = f.scaling_factor {
            // Accept factors quoted to five decimals.
            if !((s - rec.scaling_factor).abs() <= F::lit(1e-5) * rec.scaling_factor.abs()) {
                return Err(Error::invalid(format!(
                    "scaling_factor {s} disagrees with device_mean / reference_mean = {}",
                    rec.scaling_factor
                )));
            }
        }
        Ok(rec)
    }
}

impl<F: Scalar> CalibrationRecord<F> {
    pub fn from_means(device_mean: F, reference_mean: F) -> Result<Self> {
        if !(reference_mean > F::zero() && reference_mean.is_finite()) {
            return Err(Error::invalid(format!(
                "reference mean must be positive, got {reference_mean}"
            )));
        }
        if !device_mean.is_finite() {
            return Err(Error::invalid("device mean must be finite"));
        }
        Ok(Self {
            device_mean,
            reference_mean,
            scaling_factor: device_mean / reference_mean,
        })
    }

    /// A record with `S = 1`.
    pub fn identity() -> Self {
        Self {
            device_mean: F::one(),
            reference_mean: F::one(),
            scaling_factor: F::one(),
        }
    }

    pub fn apply(&self, raw_metric: F) -> Result<F> {
        apply_scale(raw_metric, self)
    }
}

impl<F: Scalar> Default for CalibrationRecord<F> {
    fn default() -> Self {
        Self::identity()
    }
}

fn mean<F: Scalar>(xs: &[F], what: &str) -> Result<F> {
    if xs.is_empty() {
        return Err(Error::invalid(format!("{what} readings are empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} readings contain a non-finite value")));
    }
    Ok(xs.iter().copied().sum::<F>() / F::from_usize_lossy(xs.len()))
}

/// `S = mean(device) / mean(reference)`.
pub fn calibrate_scale<F: Scalar>(device_readings: &[F], reference_readings: &[F]) -> Result<CalibrationRecord<F>> {
    let device_mean = mean(device_readings, "device")?;
    let reference_mean = mean(reference_readings, "reference")?;
    CalibrationRecord::from_means(device_mean, reference_mean)
}

/// Converts a raw device metric to BPM: `raw / S`.
pub fn apply_scale<F: Scalar>(raw_metric: F, s: &CalibrationRecord<F>) -> Result<F> {
    if !(s.scaling_factor > F::zero()) {
        return Err(Error::invalid(format!(
            "scaling factor must be positive, got {}",
            s.scaling_factor
        )));
    }
    Ok(raw_metric / s.scaling_factor)
}
