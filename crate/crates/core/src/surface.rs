//! Error surfaces over the bilinear span of four weight configurations.
//!
//! `W(α, β) = β(αW₁ + (1−α)W₂) + (1−β)(αW₃ + (1−α)W₄)`, so the corners are
//! `(1,1)→W₁`, `(0,1)→W₂`, `(1,0)→W₃` and `(0,0)→W₄`.

use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::experiment::{evaluate, Metric};
use crate::matrix::Matrix;
use crate::network::NetworkParams;

pub const DEFAULT_RESOLUTION: usize = 41;

fn check_corners(corners: &[NetworkParams; 4]) -> Result<()> {
    let arch = corners[0].architecture();
    for (i, c) in corners.iter().enumerate().skip(1) {
        if c.architecture() != arch {
            return Err(Error::Shape(format!(
                "corner {} is {} but corner 1 is {}",
                i + 1,
                c.architecture(),
                arch
            )));
        }
    }
    Ok(())
}

pub fn bilinear_interpolate(
    corners: &[NetworkParams; 4],
    alpha: f64,
    beta: f64,
) -> Result<NetworkParams> {
    check_corners(corners)?;
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!(
            "coefficients ({alpha}, {beta}) outside [0, 1]"
        )));
    }
    let [w1, w2, w3, w4] = corners;
    let weights = (0..w1.weights().len())
        .map(|k| {
            let (a, b, c, d) = (
                &w1.weights()[k],
                &w2.weights()[k],
                &w3.weights()[k],
                &w4.weights()[k],
            );
            let data = (0..a.len())
                .map(|i| {
                    let (a, b, c, d) = (
                        a.as_slice()[i],
                        b.as_slice()[i],
                        c.as_slice()[i],
                        d.as_slice()[i],
                    );
                    beta * (alpha * a + (1.0 - alpha) * b)
                        + (1.0 - beta) * (alpha * c + (1.0 - alpha) * d)
                })
                .collect();
            Matrix::from_vec(a.rows(), a.cols(), data)
        })
        .collect();
    NetworkParams::new(w1.architecture().clone(), weights)
}

/// Evaluated lattice; `values[(i, j)]` is the error at `(coordinate(i), coordinate(j))`.
#[derive(Debug, Clone)]
pub struct InterpolationGrid {
    pub resolution: usize,
    pub values: Matrix,
    /// Points whose evaluation failed or came out non-finite; stored as NaN.
    pub invalid_points: usize,
}

impl InterpolationGrid {
    pub fn coordinate(&self, i: usize) -> f64 {
        lattice(i, self.resolution)
    }

    pub fn value(&self, alpha_index: usize, beta_index: usize) -> f64 {
        self.values[(alpha_index, beta_index)]
    }

    pub fn is_complete(&self) -> bool {
        self.invalid_points == 0
    }

    /// Long format, alpha outer and beta inner.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,error\n");
        for i in 0..self.resolution {
            for j in 0..self.resolution {
                writeln!(
                    out,
                    "{},{},{}",
                    self.coordinate(i),
                    self.coordinate(j),
                    self.values[(i, j)]
                )
                .unwrap();
            }
        }
        out
    }
}

fn lattice(i: usize, resolution: usize) -> f64 {
    i as f64 / (resolution - 1) as f64
}

pub fn scan_surface(
    corners: &[NetworkParams; 4],
    resolution: usize,
    dataset: &LabeledDataset,
    metric: Metric,
) -> Result<InterpolationGrid> {
    scan_surface_parallel(corners, resolution, dataset, metric, 1)
}

/// As [`scan_surface`], spreading lattice rows over `jobs` threads.
pub fn scan_surface_parallel(
    corners: &[NetworkParams; 4],
    resolution: usize,
    dataset: &LabeledDataset,
    metric: Metric,
    jobs: usize,
) -> Result<InterpolationGrid> {
    if resolution < 2 {
        return Err(Error::Config(format!(
            "resolution must be >= 2, got {resolution}"
        )));
    }
    check_corners(corners)?;
    let point = |i: usize, j: usize| -> f64 {
        bilinear_interpolate(corners, lattice(i, resolution), lattice(j, resolution))
            .and_then(|p| evaluate(&p, dataset, metric))
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NAN)
    };
    let mut values = Matrix::zeros(resolution, resolution);
    let rows_per_job = resolution.div_ceil(jobs.clamp(1, resolution));
    std::thread::scope(|s| {
        let point = &point;
        for (c, block) in values
            .as_mut_slice()
            .chunks_mut(rows_per_job * resolution)
            .enumerate()
        {
            s.spawn(move || {
                for (k, v) in block.iter_mut().enumerate() {
                    *v = point(c * rows_per_job + k / resolution, k % resolution);
                }
            });
        }
    });
    let invalid_points = values.as_slice().iter().filter(|v| v.is_nan()).count();
    Ok(InterpolationGrid {
        resolution,
        values,
        invalid_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_teacher;
    use crate::network::{Activation, Architecture, LossKind};
    use crate::rng::{RngStream, StreamId};

    fn corners(seed: u64) -> [NetworkParams; 4] {
        let arch = Architecture::with_loss(
            vec![3, 4, 2],
            Activation::Sigmoid,
            LossKind::Quadratic,
            true,
        )
        .unwrap();
        let mut rng = RngStream::new(seed, StreamId::WeightInit);
        std::array::from_fn(|_| NetworkParams::init(arch.clone(), &mut rng))
    }

    #[test]
    fn corner_identities_and_center() {
        let c = corners(1);
        assert_eq!(bilinear_interpolate(&c, 1.0, 1.0).unwrap(), c[0]);
        assert_eq!(bilinear_interpolate(&c, 0.0, 1.0).unwrap(), c[1]);
        assert_eq!(bilinear_interpolate(&c, 1.0, 0.0).unwrap(), c[2]);
        assert_eq!(bilinear_interpolate(&c, 0.0, 0.0).unwrap(), c[3]);
        let mid = bilinear_interpolate(&c, 0.5, 0.5).unwrap();
        for (k, m) in mid.weights().iter().enumerate() {
            for (i, &v) in m.as_slice().iter().enumerate() {
                let mean = c.iter().map(|p| p.weights()[k].as_slice()[i]).sum::<f64>() / 4.0;
                assert!((v - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_mismatched_corners_and_coefficients() {
        let mut c = corners(2);
        assert!(bilinear_interpolate(&c, 1.5, 0.0).is_err());
        let other = Architecture::with_loss(
            vec![3, 5, 2],
            Activation::Sigmoid,
            LossKind::Quadratic,
            true,
        )
        .unwrap();
        c[3] = NetworkParams::zeros(other);
        assert!(bilinear_interpolate(&c, 0.5, 0.5).is_err());
    }

    #[test]
    fn affine_in_alpha() {
        let c = corners(3);
        let beta = 0.3;
        let p: Vec<Vec<f64>> = [0.0, 0.4, 1.0]
            .iter()
            .map(|&a| {
                bilinear_interpolate(&c, a, beta)
                    .unwrap()
                    .values()
                    .collect()
            })
            .collect();
        for ((a, mid), b) in p[0].iter().zip(&p[1]).zip(&p[2]) {
            assert!((mid - (a + 0.4 * (b - a))).abs() < 1e-14);
        }
    }

    #[test]
    fn resolution_two_matches_corners() {
        let c = corners(4);
        let (_, test) =
            generate_teacher(3, 2, 1, 50, &mut RngStream::new(4, StreamId::DataGen)).unwrap();
        let g = scan_surface(&c, 2, &test, Metric::Mse).unwrap();
        let direct = |k: usize| evaluate(&c[k], &test, Metric::Mse).unwrap();
        assert!((g.value(1, 1) - direct(0)).abs() <= 1e-12);
        assert!((g.value(0, 1) - direct(1)).abs() <= 1e-12);
        assert!((g.value(1, 0) - direct(2)).abs() <= 1e-12);
        assert!((g.value(0, 0) - direct(3)).abs() <= 1e-12);
    }

    #[test]
    fn equal_corners_give_flat_grid() {
        let one = corners(5)[0].clone();
        let c = [one.clone(), one.clone(), one.clone(), one];
        let (_, test) =
            generate_teacher(3, 2, 1, 20, &mut RngStream::new(5, StreamId::DataGen)).unwrap();
        let g = scan_surface_parallel(&c, 5, &test, Metric::Mse, 3).unwrap();
        let v0 = g.value(0, 0);
        assert!(g.values.as_slice().iter().all(|&v| (v - v0).abs() < 1e-15));
        assert!(g.is_complete());
    }

    #[test]
    fn scalar_closed_form() {
        // 1-1 network without bias: w(α,β) is bilinear and the error is
        // ½(σ(w·x) − t)².
        let arch =
            Architecture::with_loss(vec![1, 1], Activation::Sigmoid, LossKind::Quadratic, false)
                .unwrap();
        let ws = [2.0, -1.0, 0.5, 3.0];
        let c = ws.map(|w| {
            NetworkParams::new(arch.clone(), vec![Matrix::from_vec(1, 1, vec![w])]).unwrap()
        });
        let data = LabeledDataset::regression(
            Matrix::from_vec(1, 1, vec![0.7]),
            Matrix::from_vec(1, 1, vec![0.2]),
        )
        .unwrap();
        let g = scan_surface(&c, 11, &data, Metric::Mse).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
                let w = b * (a * 2.0 + -(1.0 - a)) + (1.0 - b) * (a * 0.5 + (1.0 - a) * 3.0);
                let y = 1.0 / (1.0 + (-w * 0.7f64).exp());
                assert!((g.value(i, j) - 0.5 * (y - 0.2) * (y - 0.2)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn csv_is_long_format() {
        let c = corners(6);
        let (_, test) =
            generate_teacher(3, 2, 1, 10, &mut RngStream::new(6, StreamId::DataGen)).unwrap();
        let csv = scan_surface(&c, 3, &test, Metric::Mse).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "alpha,beta,error");
        assert_eq!(lines.len(), 10);
        assert!(lines[2].starts_with("0,0.5,"));
        assert!(lines[4].starts_with("0.5,0,"));
    }
}
