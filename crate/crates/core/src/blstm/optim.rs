use super::network::Params;
use super::Real;

/// Clamps every gradient entry to `[-clip_value, clip_value]`.
pub fn clip_gradients<T: Real>(grads: &mut Params<T>, clip_value: T) {
    let lo = -clip_value;
    for t in grads.tensors_mut() {
        for v in t.iter_mut() {
            *v = v.max(lo).min(clip_value);
        }
    }
}

/// RMSprop with one squared-gradient accumulator per parameter:
///
/// ```text
/// v <- decay * v + (1 - decay) * g^2
/// p <- p - lr * g / (sqrt(v) + eps)
/// ```
#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    pub learning_rate: T,
    pub decay: T,
    pub eps: T,
    pub accumulators: Params<T>,
}

impl<T: Real> RmsProp<T> {
    pub fn new(learning_rate: T, decay: T, eps: T, hidden: usize, embed_dim: usize) -> Self {
        RmsProp {
            learning_rate,
            decay,
            eps,
            accumulators: Params::zeros(hidden, embed_dim),
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        let (lr, decay, eps) = (self.learning_rate, self.decay, self.eps);
        let rest = T::one() - decay;
        let params = params.tensors_mut();
        let accums = self.accumulators.tensors_mut();
        for ((p, v), g) in params.into_iter().zip(accums).zip(grads.tensors()) {
            for ((pi, vi), &gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = decay * *vi + rest * gi * gi;
                *pi = *pi - lr * gi / (vi.sqrt() + eps);
            }
        }
    }
}

/// Outcome of feeding one validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Waiting,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement of
/// the monitored loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// `epoch` is 1-based.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.wait = 0;
            return StopDecision::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Waiting
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}
