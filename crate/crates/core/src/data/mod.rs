//! Datasets: the synthetic teacher task, MNIST IDX files, subsetting and
//! mini-batch iteration.

mod batch;
mod idx;
mod store;

pub use batch::BatchPlan;
pub use idx::{
    encode_idx_images, encode_idx_labels, load_mnist_idx, parse_idx_images, parse_idx_labels,
    read_idx_images, read_idx_labels, IdxImages, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use store::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::sigmoid;
use crate::rng::{gaussian_matrix, RngStream};

pub const NUM_CLASSES: usize = 10;

/// Inputs and targets, one example per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Matrix,
    targets: Matrix,
    /// Raw class labels for classification data.
    labels: Option<Vec<u8>>,
}

impl LabeledDataset {
    pub fn regression(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        if !inputs.is_finite() || !targets.is_finite() {
            return Err(Error::Config("dataset contains non-finite values".into()));
        }
        Ok(Self {
            inputs,
            targets,
            labels: None,
        })
    }

    /// Classification data; targets are the one-hot encoding of `labels`.
    pub fn classification(inputs: Matrix, labels: Vec<u8>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Config(format!("label {bad} out of range")));
        }
        let mut targets = Matrix::zeros(labels.len(), NUM_CLASSES);
        for (r, &l) in labels.iter().enumerate() {
            targets[(r, l as usize)] = 1.0;
        }
        Ok(Self {
            inputs,
            targets,
            labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_width(&self) -> usize {
        self.inputs.cols()
    }

    pub fn target_width(&self) -> usize {
        self.targets.cols()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn is_classification(&self) -> bool {
        self.labels.is_some()
    }

    /// Examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.input_width() != other.input_width() || self.target_width() != other.target_width()
        {
            return Err(Error::Shape(
                "cannot concatenate datasets of different widths".into(),
            ));
        }
        let mut inputs = self.inputs.as_slice().to_vec();
        inputs.extend_from_slice(other.inputs.as_slice());
        let mut targets = self.targets.as_slice().to_vec();
        targets.extend_from_slice(other.targets.as_slice());
        let n = self.len() + other.len();
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some([a.as_slice(), b.as_slice()].concat()),
            _ => None,
        };
        Ok(LabeledDataset {
            inputs: Matrix::from_vec(n, self.input_width(), inputs),
            targets: Matrix::from_vec(n, self.target_width(), targets),
            labels,
        })
    }

    /// The half-open range `start..end` of examples.
    pub fn slice(&self, start: usize, end: usize) -> LabeledDataset {
        let idx: Vec<usize> = (start..end).collect();
        self.select(&idx)
    }
}

/// One-hot vector of length 10 for `label`.
pub fn one_hot(label: u8) -> Vec<f64> {
    let mut v = vec![0.0; NUM_CLASSES];
    v[label as usize] = 1.0;
    v
}

/// Random teacher mapping `y* = sigmoid(W_g v)` without bias.
///
/// Draws `W_g` (`n_out x n_in`) first, then all inputs, from `rng`; the
/// first `train_count` examples form the training set and the rest the
/// test set.
pub fn generate_teacher(
    n_in: usize,
    n_out: usize,
    train_count: usize,
    test_count: usize,
    rng: &mut RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::Config("teacher dimensions must be >= 1".into()));
    }
    let teacher = gaussian_matrix(n_out, n_in, 0.0, 1.0, rng);
    let inputs = gaussian_matrix(train_count + test_count, n_in, 0.0, 1.0, rng);
    let all = teacher_targets(&teacher, inputs)?;
    Ok((
        all.slice(0, train_count),
        all.slice(train_count, train_count + test_count),
    ))
}

/// Paired teacher dataset of `count` examples split evenly into train and test.
pub fn generate_teacher_dataset(
    n_in: usize,
    n_out: usize,
    count: usize,
    rng: &mut RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !count.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "teacher example count must be even, got {count}"
        )));
    }
    generate_teacher(n_in, n_out, count / 2, count / 2, rng)
}

/// Labels `inputs` with the teacher matrix.
pub fn teacher_targets(teacher: &Matrix, inputs: Matrix) -> Result<LabeledDataset> {
    let targets = inputs.matmul(&teacher.transpose()).map(sigmoid);
    LabeledDataset::regression(inputs, targets)
}

/// Uniformly random disjoint train and test subsets.
pub fn subsample(
    dataset: &LabeledDataset,
    train_count: usize,
    test_count: usize,
    rng: &mut RngStream,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let need = train_count + test_count;
    if need > dataset.len() {
        return Err(Error::InsufficientData(format!(
            "requested {train_count} train + {test_count} test examples from a pool of {}",
            dataset.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    rng.shuffle(&mut idx);
    Ok((
        dataset.select(&idx[..train_count]),
        dataset.select(&idx[train_count..need]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    #[test]
    fn teacher_targets_in_unit_interval() {
        let (train, test) =
            generate_teacher_dataset(20, 5, 200, &mut RngStream::new(1, StreamId::DataGen))
                .unwrap();
        assert_eq!((train.len(), test.len()), (100, 100));
        for d in [&train, &test] {
            assert!(d.targets().as_slice().iter().all(|&y| y > 0.0 && y < 1.0));
        }
        assert!(
            generate_teacher_dataset(20, 5, 201, &mut RngStream::new(1, StreamId::DataGen))
                .is_err()
        );
    }

    #[test]
    fn zero_input_gives_half() {
        let teacher = gaussian_matrix(3, 4, 0.0, 1.0, &mut RngStream::new(2, StreamId::DataGen));
        let d = teacher_targets(&teacher, Matrix::zeros(1, 4)).unwrap();
        assert!(d.targets().as_slice().iter().all(|&y| y == 0.5));
    }

    #[test]
    fn teacher_field_variance() {
        // Each sample draws a fresh teacher row and input; the field sums 100
        // products of independent unit normals.
        let mut rng = RngStream::new(3, StreamId::DataGen);
        let n = 10_000;
        let h: Vec<f64> = (0..n)
            .map(|_| {
                let w = gaussian_matrix(1, 100, 0.0, 1.0, &mut rng);
                let v = gaussian_matrix(100, 1, 0.0, 1.0, &mut rng);
                w.matmul(&v)[(0, 0)]
            })
            .collect();
        let mean = h.iter().sum::<f64>() / n as f64;
        let var = h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((var - 100.0).abs() <= 5.0, "variance {var}");
    }

    #[test]
    fn teacher_regeneration_is_identical() {
        let a =
            generate_teacher_dataset(7, 3, 40, &mut RngStream::new(4, StreamId::DataGen)).unwrap();
        let b =
            generate_teacher_dataset(7, 3, 40, &mut RngStream::new(4, StreamId::DataGen)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_hot_three() {
        assert_eq!(
            one_hot(3),
            vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let d = LabeledDataset::classification(Matrix::zeros(2, 1), vec![3, 9]).unwrap();
        assert_eq!(d.targets().row(0), one_hot(3).as_slice());
        assert!(LabeledDataset::classification(Matrix::zeros(1, 1), vec![10]).is_err());
    }

    #[test]
    fn subsample_disjoint_and_seeded() {
        let inputs = Matrix::from_vec(50, 1, (0..50).map(f64::from).collect());
        let pool =
            LabeledDataset::classification(inputs, (0..50).map(|i| (i % 10) as u8).collect())
                .unwrap();
        let (tr, te) =
            subsample(&pool, 30, 15, &mut RngStream::new(5, StreamId::Subsample)).unwrap();
        let (tr2, te2) =
            subsample(&pool, 30, 15, &mut RngStream::new(5, StreamId::Subsample)).unwrap();
        assert_eq!((&tr, &te), (&tr2, &te2));
        let a: std::collections::HashSet<u64> =
            tr.inputs().as_slice().iter().map(|v| *v as u64).collect();
        assert!(te
            .inputs()
            .as_slice()
            .iter()
            .all(|v| !a.contains(&(*v as u64))));
        assert_eq!((tr.len(), te.len()), (30, 15));
        assert!(matches!(
            subsample(&pool, 40, 11, &mut RngStream::new(5, StreamId::Subsample)),
            Err(Error::InsufficientData(_))
        ));
    }
}
