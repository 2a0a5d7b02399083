use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax of a `(batch, classes)` tensor, computed after
/// subtracting each row's maximum.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let &[_, classes] = logits.shape() else {
        return Err(shape_err(format!(
            "softmax expects (batch, classes), got {:?}",
            logits.shape()
        )));
    };
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean categorical cross-entropy over the batch.
///
/// Returns `(loss, probabilities, d loss / d logits)`, where the gradient is
/// `(probs - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let probs = softmax(logits)?;
    let &[batch, classes] = logits.shape() else {
        unreachable!()
    };
    if labels.len() != batch {
        return Err(shape_err(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let scale = 1.0 / batch as f64;
    let mut grad = probs.data().to_vec();
    let mut loss = 0.0;
    for (n, &label) in labels.iter().enumerate() {
        let row = &mut grad[n * classes..(n + 1) * classes];
        // Log-sum-exp form keeps the loss finite when a probability underflows.
        let logit_row = &logits.data()[n * classes..(n + 1) * classes];
        let max = logit_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logit_row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - logit_row[label];
        row[label] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss * scale, probs, Tensor::new(logits.shape().to_vec(), grad)?))
}

/// Softmax head with cached probabilities for a later backward call.
#[derive(Debug, Clone, Default)]
pub struct SoftmaxCrossEntropy {
    probs: Option<Tensor>,
    grad: Option<Tensor>,
}

impl SoftmaxCrossEntropy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, logits: &Tensor, labels: &[usize]) -> Result<f64> {
        let (loss, probs, grad) = softmax_cross_entropy(logits, labels)?;
        self.probs = Some(probs);
        self.grad = Some(grad);
        Ok(loss)
    }

    pub fn probs(&self) -> Option<&Tensor> {
        self.probs.as_ref()
    }

    pub fn backward(&self) -> Result<Tensor> {
        self.grad
            .clone()
            .ok_or_else(|| Error::State("softmax head: backward called before forward".into()))
    }
}
