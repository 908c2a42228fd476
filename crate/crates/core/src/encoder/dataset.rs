use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compute_norms, encode_into, EncodeError, NormConstants, CHANNELS};
use crate::grid::{Snapshot, Topology};
use crate::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Unsafe,
    Safe,
}

impl Label {
    pub fn from_safe(is_safe: bool) -> Self {
        if is_safe {
            Label::Safe
        } else {
            Label::Unsafe
        }
    }

    /// Column in the one-hot encoding: unsafe `[1, 0]`, safe `[0, 1]`.
    pub fn index(self) -> usize {
        match self {
            Label::Unsafe => 0,
            Label::Safe => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Unsafe
        } else {
            Label::Safe
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Label::Unsafe => [1.0, 0.0],
            Label::Safe => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub snapshot: Snapshot,
    pub label: Label,
    /// Worst damping ratio reported by the oracle.
    pub min_damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Seeded shuffle of `0..size` cut into train/val/test by rounded ratios; the test split
/// takes the remainder.
pub fn split_dataset(size: usize, ratios: [f64; 3], seed: u64) -> Splits {
    assert!(
        ratios.iter().all(|&r| r >= 0.0),
        "split ratios must be non-negative"
    );
    let sum: f64 = ratios.iter().sum();
    let mut idx: Vec<usize> = (0..size).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratios[0] / sum) * size as f64).round() as usize;
    let n_val = (((ratios[1] / sum) * size as f64).round() as usize).min(size - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Splits {
        train: idx,
        val,
        test,
    }
}

/// Which samples the normalisation constants are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    #[default]
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub topology: Topology,
    pub samples: Vec<Sample>,
    pub norms: NormConstants,
    pub splits: Splits,
}

impl LabeledDataset {
    /// Splits the samples with `ratios` and fits norms on the chosen population.
    pub fn build(
        topology: Topology,
        samples: Vec<Sample>,
        ratios: [f64; 3],
        seed: u64,
        scope: NormScope,
    ) -> Result<Self, EncodeError> {
        let splits = split_dataset(samples.len(), ratios, seed);
        let norms = match scope {
            NormScope::Train => compute_norms(
                splits.train.iter().map(|&i| &samples[i].snapshot),
                &topology,
            )?,
            NormScope::All => compute_norms(samples.iter().map(|s| &s.snapshot), &topology)?,
        };
        Ok(Self {
            topology,
            samples,
            norms,
            splits,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_buses(&self) -> usize {
        self.topology.n_buses
    }

    /// Fraction of safe samples among `indices`.
    pub fn safe_share(&self, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return f64::NAN;
        }
        let safe = indices
            .iter()
            .filter(|&&i| self.samples[i].label == Label::Safe)
            .count();
        safe as f64 / indices.len() as f64
    }

    /// Images and one-hot labels for the given indices, in order.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Batch<T> {
        let n = self.n_buses();
        let cell = n * n * CHANNELS;
        let mut images = Tensor::zeros(&[indices.len(), n, n, CHANNELS]);
        let mut labels = Tensor::zeros(&[indices.len(), 2]);
        for (r, &i) in indices.iter().enumerate() {
            let s = &self.samples[i];
            encode_into(
                &s.snapshot,
                &self.topology,
                &self.norms,
                &mut images.data_mut()[r * cell..(r + 1) * cell],
            );
            let oh = s.label.one_hot();
            labels[2 * r] = T::lit(oh[0]);
            labels[2 * r + 1] = T::lit(oh[1]);
        }
        Batch {
            images,
            labels,
            indices: indices.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub images: Tensor<T>,
    pub labels: Tensor<T>,
    pub indices: Vec<usize>,
}

/// Lazily encodes one batch at a time.
pub struct BatchIter<'a, T> {
    dataset: &'a LabeledDataset,
    order: Vec<usize>,
    size: usize,
    pos: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Scalar> Iterator for BatchIter<'_, T> {
    type Item = Batch<T>;

    fn next(&mut self) -> Option<Batch<T>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.size).min(self.order.len());
        let batch = self.dataset.batch(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }
}

pub fn batch_iter<T: Scalar>(
    dataset: &LabeledDataset,
    split: Split,
    size: usize,
    seed: u64,
    shuffle: bool,
) -> BatchIter<'_, T> {
    assert!(size >= 1, "batch size must be positive");
    let mut order = dataset.splits.get(split).to_vec();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    BatchIter {
        dataset,
        order,
        size,
        pos: 0,
        _scalar: std::marker::PhantomData,
    }
}
