//! Fringe visibility from interference scans.
//!
//! Extrema come from a least-squares sinusoid `c + a cos(kx) + b sin(kx)`
//! rather than from raw samples, which additive noise biases outward.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A fit explaining less of the variance than this is treated as "no fringe".
const MIN_R_SQUARED: f64 = 0.5;

/// Intensities recorded by each detector along a phase or time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    pub axis: Vec<f64>,
    pub intensities: Vec<Vec<f64>>,
}

impl FringeScan {
    pub fn new(axis: Vec<f64>, intensities: Vec<Vec<f64>>) -> Result<Self> {
        if axis.len() < 8 {
            return Err(Error::range("a fringe scan needs at least 8 samples"));
        }
        if axis.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("scan axis must be strictly increasing"));
        }
        if intensities.is_empty() {
            return Err(Error::Shape("a fringe scan needs at least one detector".into()));
        }
        for (i, row) in intensities.iter().enumerate() {
            if row.len() != axis.len() {
                return Err(Error::Shape(format!(
                    "detector {} has {} samples, axis has {}",
                    i + 1,
                    row.len(),
                    axis.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::domain(format!(
                    "detector {} has a negative intensity {v}",
                    i + 1
                )));
            }
        }
        Ok(Self { axis, intensities })
    }
}

/// `(I_max − I_min) / (I_max + I_min)`.
pub fn visibility_from_extrema(max: f64, min: f64) -> f64 {
    (max - min) / (max + min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Angular frequency along the scan axis (rad per axis unit).
    pub wavenumber: f64,
    pub phase: f64,
    pub r_squared: f64,
}

impl SinusoidFit {
    pub fn visibility(&self) -> f64 {
        visibility_from_extrema(self.offset + self.amplitude, self.offset - self.amplitude)
    }
}

struct LinearFit {
    coef: Vector3<f64>,
    sse: f64,
}

fn fit_at(x: &[f64], y: &[f64], k: f64) -> Option<LinearFit> {
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let (s, c) = (k * xi).sin_cos();
        let row = Vector3::new(1.0, c, s);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata.cholesky()?.solve(&aty);
    let sse = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let (s, c) = (k * xi).sin_cos();
            (yi - coef[0] - coef[1] * c - coef[2] * s).powi(2)
        })
        .sum();
    Some(LinearFit { coef, sse })
}

/// Fits one sinusoid to `y(x)`, searching the wavenumber between one period
/// per scan and the sampling limit.
pub fn fit_sinusoid(axis: &[f64], y: &[f64]) -> Result<SinusoidFit> {
    let x0 = axis[0];
    let x: Vec<f64> = axis.iter().map(|v| v - x0).collect();
    let span = *x.last().unwrap();
    let mut spacing: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    spacing.sort_by(f64::total_cmp);
    let median_dx = spacing[spacing.len() / 2];

    let k_min = 0.9 * TAU / span;
    let k_max = std::f64::consts::PI / median_dx;
    let step = 0.5 / span;
    let sse = |k: f64| fit_at(&x, y, k).map_or(f64::INFINITY, |f| f.sse);

    let mut best = (k_min, sse(k_min));
    let mut k = k_min + step;
    while k <= k_max {
        let e = sse(k);
        if e < best.1 {
            best = (k, e);
        }
        k += step;
    }

    // Golden-section refinement around the grid optimum.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best.0 - step).max(k_min), (best.0 + step).min(k_max));
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sse(d);
        }
    }
    let k = if fc < fd { c } else { d };
    let fit = fit_at(&x, y, k).ok_or_else(|| Error::Analysis("singular sinusoid fit".into()))?;

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - fit.sse / sst } else { 0.0 };
    let (c0, a1, b1) = (fit.coef[0], fit.coef[1], fit.coef[2]);
    Ok(SinusoidFit {
        offset: c0,
        amplitude: a1.hypot(b1),
        wavenumber: k,
        // c + A sin(kx' + phase) with x' measured from the first axis point.
        phase: a1.atan2(b1) - k * x0,
        r_squared,
    })
}

/// Visibility seen by each detector of the scan.
pub fn fringe_visibility(scan: &FringeScan) -> Result<Vec<f64>> {
    let span = scan.axis.last().unwrap() - scan.axis[0];
    scan.intensities
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let fit = fit_sinusoid(&scan.axis, y)?;
            if fit.r_squared < MIN_R_SQUARED {
                return Err(Error::Analysis(format!(
                    "detector {}: no fringe found (R² = {:.3})",
                    i + 1,
                    fit.r_squared
                )));
            }
            if TAU / fit.wavenumber > span * 1.02 {
                return Err(Error::Analysis(format!(
                    "detector {}: scan covers less than one fringe period",
                    i + 1
                )));
            }
            if !(fit.offset > 0.0) {
                return Err(Error::Analysis(format!(
                    "detector {}: fitted mean intensity is not positive",
                    i + 1
                )));
            }
            Ok(fit.visibility().clamp(0.0, 1.0))
        })
        .collect()
}

/// Synthetic scan `mean (1 + V cos(x + φ_i))` over `periods` fringes with
/// Gaussian noise of standard deviation `noise_fraction · mean`.
/// Detector 2 sees the complementary fringe. Negative samples are clipped to zero.
pub fn synthetic_fringe_scan<R: Rng + ?Sized>(
    visibilities: &[f64],
    mean: f64,
    periods: f64,
    points: usize,
    noise_fraction: f64,
    rng: &mut R,
) -> Result<FringeScan> {
    let noise = Normal::new(0.0, noise_fraction * mean).map_err(|e| Error::domain(e.to_string()))?;
    let axis: Vec<f64> = (0..points)
        .map(|i| TAU * periods * i as f64 / (points - 1) as f64)
        .collect();
    let intensities = visibilities
        .iter()
        .enumerate()
        .map(|(d, &v)| {
            let offset = if d % 2 == 0 { 0.0 } else { std::f64::consts::PI };
            axis.iter()
                .map(|&x| (mean * (1.0 + v * (x + offset).cos()) + noise.sample(rng)).max(0.0))
                .collect()
        })
        .collect();
    FringeScan::new(axis, intensities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extrema_formula() {
        assert_eq!(visibility_from_extrema(2.0, 0.0), 1.0);
        assert_relative_eq!(visibility_from_extrema(1.99, 0.01), 0.99, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let axis: Vec<f64> = (0..300).map(|i| i as f64 * 0.07 + 2.0).collect();
        let y: Vec<f64> = axis.iter().map(|x| 3.0 + 1.5 * (1.3 * x + 0.4).sin()).collect();
        let fit = fit_sinusoid(&axis, &y).unwrap();
        assert_relative_eq!(fit.wavenumber, 1.3, max_relative = 1e-7);
        assert_relative_eq!(fit.amplitude, 1.5, max_relative = 1e-7);
        assert_relative_eq!(fit.offset, 3.0, max_relative = 1e-7);
        assert_relative_eq!(fit.visibility(), 0.5, max_relative = 1e-7);
        assert_relative_eq!(fit.phase.rem_euclid(TAU), 0.4, epsilon = 1e-5);
    }

    #[test]
    fn recovers_lab_visibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let scan = synthetic_fringe_scan(&[0.985, 0.985], 1.0, 3.0, 1000, 0.01, &mut rng).unwrap();
        for v in fringe_visibility(&scan).unwrap() {
            assert!((v - 0.985).abs() < 0.005, "{v}");
        }
    }

    #[test]
    fn scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let scan = synthetic_fringe_scan(&[0.9], 2.0, 2.5, 400, 0.01, &mut rng).unwrap();
        let scaled = FringeScan::new(
            scan.axis.clone(),
            vec![scan.intensities[0].iter().map(|v| v * 37.5).collect()],
        )
        .unwrap();
        let a = fringe_visibility(&scan).unwrap()[0];
        let b = fringe_visibility(&scaled).unwrap()[0];
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }

    #[test]
    fn flat_scan_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scan = synthetic_fringe_scan(&[0.0], 1.0, 3.0, 500, 0.01, &mut rng).unwrap();
        assert!(matches!(fringe_visibility(&scan), Err(Error::Analysis(_))));
        let constant = FringeScan::new((0..50).map(f64::from).collect(), vec![vec![1.0; 50]]).unwrap();
        assert!(matches!(fringe_visibility(&constant), Err(Error::Analysis(_))));
    }

    #[test]
    fn partial_fringe_fails() {
        let axis: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = axis.iter().map(|x| 1.0 + 0.9 * (0.5 * x).cos()).collect();
        let scan = FringeScan::new(axis, vec![y]).unwrap();
        assert!(fringe_visibility(&scan).is_err());
    }

    #[test]
    fn scan_validation() {
        assert!(FringeScan::new(vec![0.0; 10], vec![vec![1.0; 10]]).is_err());
        let axis: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(FringeScan::new(axis.clone(), vec![vec![1.0; 9]]).is_err());
        assert!(FringeScan::new(axis, vec![vec![-1.0; 10]]).is_err());
    }
}
