use crate::orbital::SatId;

use super::LearningError;

/// Labelled samples with a fixed feature width. Features are stored as
/// `f32` to halve the memory of full-size image sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u8>,
    dim: usize,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f32>,
        labels: Vec<u8>,
        dim: usize,
        num_classes: usize,
    ) -> Result<Self, LearningError> {
        if dim == 0 {
            return Err(LearningError::Shape("feature dimension must be > 0".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(LearningError::Shape(format!(
                "{} feature values for {} samples of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(LearningError::Shape(format!("num_classes {num_classes} out of range")));
        }
        if let Some(bad) = labels.iter().find(|&&l| usize::from(l) >= num_classes) {
            return Err(LearningError::Shape(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (&[f32], u8) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (x, y) = self.sample(i);
            features.extend_from_slice(x);
            labels.push(y);
        }
        Dataset {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }

    /// First `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &l in &self.labels {
            h[usize::from(l)] += 1;
        }
        h
    }
}

/// One satellite's local dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataShard {
    pub owner: SatId,
    pub data: Dataset,
}

impl DataShard {
    pub fn new(owner: SatId, data: Dataset) -> Result<Self, LearningError> {
        if data.is_empty() {
            return Err(LearningError::Empty("data shard"));
        }
        Ok(Self { owner, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
