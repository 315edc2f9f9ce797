use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{Confusion, Metrics};
use crate::model::{check_params, forward_logits, init_params, BoundParams, ModelSpec};
use crate::superwin::{ConfigId, SuperWindow, SuperWindowSet};
use crate::tensorcore::{AdamConfig, GradMap, ParamStore, Real, Tape, Tensor};
use crate::{Error, Result, NUM_CLASSES, WINDOW_SAMPLES};

/// Windows per forward pass during evaluation.
const EVAL_WINDOWS: usize = 2048;
/// Stream id for the shuffle generator, kept apart from initialization.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub folds: usize,
}

impl TrainConfig {
    /// Defaults for one configuration, including its batch size.
    pub fn for_config(id: ConfigId) -> Self {
        Self {
            epochs: 30,
            lr: 0.00025,
            seed: 42,
            batch_size: id.default_batch_size(),
            folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Model input for a group of equally sized super-windows.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    /// `[batch, q·1024]`
    pub input: Tensor<T>,
    /// Class per position, `None` where masked.
    pub targets: Vec<Option<usize>>,
}

impl<T: Real> Batch<T> {
    pub fn from_items(items: &[&SuperWindow]) -> Result<Self> {
        let q = items.first().map(|sw| sw.len()).ok_or(Error::EmptyBatch)?;
        if items.iter().any(|sw| sw.len() != q) {
            return Err(Error::Shape("super-windows in one batch differ in length".into()));
        }
        let mut data = Vec::with_capacity(items.len() * q * WINDOW_SAMPLES);
        let mut targets = Vec::with_capacity(items.len() * q);
        for sw in items {
            data.extend(sw.windows.iter().map(|&v| T::of(v as f64)));
            targets.extend(
                sw.labels
                    .iter()
                    .zip(&sw.valid)
                    .map(|(l, &ok)| if ok { l.class_index() } else { None }),
            );
        }
        Ok(Self {
            input: Tensor::new(vec![items.len(), q * WINDOW_SAMPLES], data)?,
            targets,
        })
    }

    pub fn valid_count(&self) -> usize {
        self.targets.iter().filter(|t| t.is_some()).count()
    }
}

/// Masked cross-entropy of one batch and its gradient for every parameter.
pub fn loss_and_grads<T: Real>(
    params: &ParamStore<T>,
    spec: &ModelSpec,
    batch: &Batch<T>,
) -> Result<(T, GradMap<T>)> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let input = tape.leaf(batch.input.clone());
    let logits = forward_logits(&mut tape, &bound, spec, input)?;
    let loss = tape.masked_softmax_ce(logits, &batch.targets)?;
    let mut grads = tape.backward(loss)?;
    let mut map = GradMap::new();
    for (name, var) in bound.iter() {
        let g = grads
            .take(var)
            .unwrap_or_else(|| Tensor::zeros(tape.shape(var).to_vec()));
        map.insert(name.to_string(), g);
    }
    Ok((tape.value(loss).data()[0], map))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ParamStore<T>,
    /// Mean loss per epoch, weighted by valid positions per batch.
    pub loss_trace: Vec<f64>,
}

/// Initializes from `config.seed` and trains.
pub fn train<T: Real>(config: &TrainConfig, spec: &ModelSpec, data: &SuperWindowSet) -> Result<TrainOutcome<T>> {
    let params = init_params(spec, config.seed)?;
    train_from(params, config, spec, data, &mut |_, _| {})
}

/// Runs `config.epochs` epochs of shuffled mini-batch Adam on `data`.
/// `progress` is called after each epoch with the epoch index and its mean
/// loss. Batches without valid positions are skipped.
pub fn train_from<T: Real>(
    mut params: ParamStore<T>,
    config: &TrainConfig,
    spec: &ModelSpec,
    data: &SuperWindowSet,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    check_params(spec, &params)?;
    if data.valid_count() == 0 {
        return Err(Error::EmptyBatch);
    }
    let adam = config.adam();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut positions = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<&SuperWindow> = chunk.iter().map(|&i| &data.items[i]).collect();
            let batch = Batch::<T>::from_items(&items)?;
            let n = batch.valid_count();
            if n == 0 {
                continue;
            }
            let (loss, grads) = loss_and_grads(&params, spec, &batch)?;
            params.adam_step(&grads, &adam)?;
            weighted += loss.as_f64() * n as f64;
            positions += n;
        }
        let mean = weighted / positions as f64;
        progress(epoch, mean);
        loss_trace.push(mean);
    }
    Ok(TrainOutcome { params, loss_trace })
}

/// Argmax class per position for every super-window (ties to the lowest
/// class index).
pub fn predict<T: Real>(params: &ParamStore<T>, spec: &ModelSpec, data: &SuperWindowSet) -> Result<Vec<Vec<usize>>> {
    let q = data.spec.n.max(1);
    let per_pass = (EVAL_WINDOWS / q).max(1);
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.items.chunks(per_pass) {
        let items: Vec<&SuperWindow> = chunk.iter().collect();
        let batch = Batch::<T>::from_items(&items)?;
        let logits = crate::model::forward_logits_tensor(params, spec, &batch.input)?;
        let q = items[0].len();
        for rows in logits.data().chunks(q * NUM_CLASSES) {
            out.push(rows.chunks(NUM_CLASSES).map(argmax).collect());
        }
    }
    Ok(out)
}

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub metrics: Metrics,
    /// Valid positions scored; equals `confusion.total()`.
    pub positions: u64,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Result<Self> {
        Ok(Self {
            metrics: confusion.metrics()?,
            positions: confusion.total(),
            confusion,
        })
    }
}

/// Scores every valid (super-window, position) pair as one sample;
/// overlapping super-windows are not merged.
pub fn evaluate<T: Real>(params: &ParamStore<T>, spec: &ModelSpec, data: &SuperWindowSet) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyEval);
    }
    let preds = predict(params, spec, data)?;
    let mut confusion = Confusion::new();
    for (sw, p) in data.items.iter().zip(&preds) {
        for ((label, &ok), &pred) in sw.labels.iter().zip(&sw.valid).zip(p) {
            if let (true, Some(t)) = (ok, label.class_index()) {
                confusion.add(t, pred)?;
            }
        }
    }
    if confusion.total() == 0 {
        return Err(Error::EmptyEval);
    }
    EvalReport::from_confusion(confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigprep::WindowGrid;
    use crate::superwin::build_contiguous;
    use crate::traineval::labels::StageLabel;

    fn tiny_set(w: usize, labels: Vec<StageLabel>) -> SuperWindowSet {
        let windows = (0..w * WINDOW_SAMPLES).map(|i| ((i as f32) * 0.01).sin()).collect();
        let grid = WindowGrid::new("t", windows, labels).unwrap();
        build_contiguous(&grid, 2).unwrap()
    }

    #[test]
    fn zero_epochs_keeps_init() {
        let spec = ModelSpec::reduced();
        let data = tiny_set(2, vec![StageLabel::Wake, StageLabel::Deep]);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::for_config(ConfigId::C04)
        };
        let out = train::<f32>(&cfg, &spec, &data).unwrap();
        assert_eq!(out.params, init_params::<f32>(&spec, 42).unwrap());
        assert!(out.loss_trace.is_empty());
    }

    #[test]
    fn all_invalid_rejected() {
        let spec = ModelSpec::reduced();
        let data = tiny_set(2, vec![StageLabel::Unscored; 2]);
        let cfg = TrainConfig::for_config(ConfigId::C04);
        assert!(matches!(train::<f32>(&cfg, &spec, &data), Err(Error::EmptyBatch)));
        let p = init_params::<f32>(&spec, 1).unwrap();
        assert!(matches!(evaluate(&p, &spec, &data), Err(Error::EmptyEval)));
    }

    #[test]
    fn batch_targets_follow_mask() {
        let data = tiny_set(3, vec![StageLabel::Rem, StageLabel::Unscored, StageLabel::Light]);
        let items: Vec<&SuperWindow> = data.items.iter().collect();
        let b = Batch::<f32>::from_items(&items).unwrap();
        assert_eq!(b.input.shape(), &[2, 2 * WINDOW_SAMPLES]);
        assert_eq!(b.targets, vec![Some(3), None, Some(1), None]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5f32, 0.5, 0.1, 0.5]), 0);
        assert_eq!(argmax(&[0.1f32, 0.2, 0.7, 0.7]), 2);
    }
}
