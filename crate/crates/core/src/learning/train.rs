use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataShard, Dataset, HyperParams, LearningError, MlpArchitecture, ModelVector, Workspace};

const EVAL_CHUNK: usize = 256;

fn to_f64(dst: &mut Vec<f64>, src: &[f32]) {
    dst.clear();
    dst.extend(src.iter().map(|&v| f64::from(v)));
}

fn check_dims(arch: &MlpArchitecture, data: &Dataset) -> Result<(), LearningError> {
    if data.dim() != arch.input_dim() {
        return Err(LearningError::Shape(format!(
            "dataset width {} does not match network input {}",
            data.dim(),
            arch.input_dim()
        )));
    }
    if data.num_classes() > arch.num_classes() {
        return Err(LearningError::Shape(format!(
            "dataset has {} classes, network outputs {}",
            data.num_classes(),
            arch.num_classes()
        )));
    }
    Ok(())
}

/// Cross-entropy of the softmax output for one sample.
pub fn sample_loss(
    arch: &MlpArchitecture,
    model: &ModelVector,
    x: &[f32],
    label: u8,
) -> Result<f64, LearningError> {
    arch.check_model(model)?;
    let mut buf = Vec::new();
    to_f64(&mut buf, x);
    let (loss, _) = arch.batch_loss(&model.values, &buf, &[label], &mut Workspace::new())?;
    Ok(loss)
}

/// Loss and accuracy summed over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub samples: usize,
}

pub fn evaluate(
    arch: &MlpArchitecture,
    model: &ModelVector,
    data: &Dataset,
) -> Result<Evaluation, LearningError> {
    if data.is_empty() {
        return Err(LearningError::Empty("evaluation set"));
    }
    arch.check_model(model)?;
    check_dims(arch, data)?;
    let mut ws = Workspace::new();
    let mut buf = Vec::new();
    let (mut loss, mut correct) = (0.0, 0usize);
    let d = data.dim();
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        to_f64(&mut buf, &data.features()[start * d..end * d]);
        let (l, c) = arch.batch_loss(&model.values, &buf, &data.labels()[start..end], &mut ws)?;
        loss += l;
        correct += c;
    }
    Ok(Evaluation {
        loss: loss / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        samples: data.len(),
    })
}

/// Mean sample loss over a shard.
pub fn local_loss(
    arch: &MlpArchitecture,
    model: &ModelVector,
    shard: &DataShard,
) -> Result<f64, LearningError> {
    Ok(evaluate(arch, model, &shard.data)?.loss)
}

/// Fraction of argmax-correct predictions.
pub fn evaluate_accuracy(
    arch: &MlpArchitecture,
    model: &ModelVector,
    data: &Dataset,
) -> Result<f64, LearningError> {
    Ok(evaluate(arch, model, data)?.accuracy)
}

/// Data-size-weighted sum of local losses at a common model.
pub fn global_objective(
    arch: &MlpArchitecture,
    model: &ModelVector,
    shards: &[DataShard],
) -> Result<f64, LearningError> {
    let n: usize = shards.iter().map(DataShard::len).sum();
    if n == 0 {
        return Err(LearningError::Empty("constellation data"));
    }
    let mut f = 0.0;
    for s in shards {
        f += s.len() as f64 / n as f64 * local_loss(arch, model, s)?;
    }
    Ok(f)
}

/// `I` epochs of mini-batch gradient descent on a shard. Batch order comes
/// from a ChaCha8 stream seeded with `hyper.rng_seed`.
pub fn local_train(
    arch: &MlpArchitecture,
    model: &ModelVector,
    shard: &DataShard,
    hyper: &HyperParams,
) -> Result<ModelVector, LearningError> {
    hyper.validate()?;
    arch.check_model(model)?;
    if shard.is_empty() {
        return Err(LearningError::Empty("data shard"));
    }
    check_dims(arch, &shard.data)?;
    let data = &shard.data;
    let d = data.dim();
    let mut params = model.values.clone();
    let mut grad = vec![0.0; params.len()];
    let mut ws = Workspace::new();
    let mut x = Vec::with_capacity(hyper.batch_size * d);
    let mut y = Vec::with_capacity(hyper.batch_size);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.rng_seed);
    let mut step = 0;
    for _ in 0..hyper.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.batch_size) {
            x.clear();
            y.clear();
            for &i in batch {
                let (f, l) = data.sample(i);
                x.extend(f.iter().map(|&v| f64::from(v)));
                y.push(l);
            }
            let loss = arch.loss_and_grad(&params, &x, &y, &mut ws, &mut grad)?;
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(LearningError::NonFinite { step });
            }
            let mut finite = true;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= hyper.learning_rate * g;
                finite &= p.is_finite();
            }
            if !finite {
                return Err(LearningError::NonFinite { step });
            }
            step += 1;
        }
    }
    Ok(ModelVector::new(params))
}
