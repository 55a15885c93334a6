use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

use super::LabeledDataset;

/// Epoch-wise shuffled mini-batch schedule over `count` examples.
///
/// The permutation is redrawn from the shuffle stream each time a new epoch
/// starts, and each epoch is cut into `count / batch_size` consecutive slices.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: RngStream,
    epochs_started: u64,
}

impl BatchPlan {
    pub fn new(count: usize, batch_size: usize, rng: RngStream) -> Result<Self> {
        if batch_size == 0 || count == 0 {
            return Err(Error::Config(
                "batch size and example count must be >= 1".into(),
            ));
        }
        if !count.is_multiple_of(batch_size) {
            return Err(Error::Config(format!(
                "batch size {batch_size} does not divide training count {count}"
            )));
        }
        Ok(Self {
            batch_size,
            order: (0..count).collect(),
            cursor: count,
            rng,
            epochs_started: 0,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len() / self.batch_size
    }

    pub fn epochs_started(&self) -> u64 {
        self.epochs_started
    }

    /// Indices of the next mini-batch, reshuffling at epoch boundaries.
    pub fn next_indices(&mut self) -> &[usize] {
        if self.cursor == self.order.len() {
            // Reset to identity so each epoch's order depends only on the stream.
            for (i, v) in self.order.iter_mut().enumerate() {
                *v = i;
            }
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
            self.epochs_started += 1;
        }
        let start = self.cursor;
        self.cursor += self.batch_size;
        &self.order[start..self.cursor]
    }

    /// Inputs and targets of the next mini-batch.
    pub fn next_batch(&mut self, dataset: &LabeledDataset) -> (Matrix, Matrix) {
        let idx = self.next_indices();
        (
            dataset.inputs().select_rows(idx),
            dataset.targets().select_rows(idx),
        )
    }
}
