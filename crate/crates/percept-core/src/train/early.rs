//! Early stopping on validation loss with best-snapshot restoration.

/// What the training loop should do after reporting a validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The loss failed to improve for more than `patience` epochs.
    Patience,
    /// The loss went NaN; training state is no longer trustworthy.
    NanLoss,
}

/// Tracks the best validation loss seen and a snapshot of the parameters
/// that produced it. `S` is whatever the caller wants restored on stop —
/// the fit loop uses a full parameter clone.
#[derive(Debug, Clone)]
pub struct EarlyStopper<S: Clone> {
    patience: usize,
    min_delta: f32,
    best_loss: f32,
    best_epoch: usize,
    best: S,
    strikes: usize,
}

impl<S: Clone> EarlyStopper<S> {
    /// `initial` is the snapshot restored if the very first epoch already
    /// fails (e.g. NaN before any improvement).
    pub fn new(patience: usize, min_delta: f32, initial: S) -> Self {
        EarlyStopper {
            patience,
            min_delta,
            best_loss: f32::INFINITY,
            best_epoch: 0,
            best: initial,
            strikes: 0,
        }
    }

    /// Report one epoch's validation loss. An improvement means
    /// `val_loss < best - min_delta`; it resets the strike count and
    /// snapshots `params`. Otherwise a strike accrues and training stops
    /// once `strikes > patience`.
    pub fn observe(&mut self, epoch: usize, val_loss: f32, params: &S) -> StopDecision {
        if val_loss.is_nan() {
            return StopDecision::Stop(StopReason::NanLoss);
        }
        if val_loss < self.best_loss - self.min_delta {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.best = params.clone();
            self.strikes = 0;
            return StopDecision::Continue;
        }
        self.strikes += 1;
        if self.strikes > self.patience {
            StopDecision::Stop(StopReason::Patience)
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> &S {
        &self.best
    }

    pub fn into_best(self) -> S {
        self.best
    }

    /// Epoch of the best observation (0 if none was ever an improvement).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f32 {
        self.best_loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The pinned trace: patience 2, losses 1.0, 0.9, 0.95, 0.91, 0.92.
    /// Best is 0.9 at epoch 2; epochs 3 and 4 are strikes 1 and 2; epoch 5
    /// is strike 3 > patience, so training stops after the 5th epoch with
    /// the epoch-2 snapshot.
    #[test]
    fn patience_two_trace_stops_at_epoch_five_restoring_epoch_two() {
        let mut stopper = EarlyStopper::new(2, 0.0, 0usize);
        let losses = [1.0, 0.9, 0.95, 0.91, 0.92];
        let mut stopped_at = None;
        for (i, &loss) in losses.iter().enumerate() {
            let epoch = i + 1;
            match stopper.observe(epoch, loss, &epoch) {
                StopDecision::Continue => {}
                StopDecision::Stop(StopReason::Patience) => {
                    stopped_at = Some(epoch);
                    break;
                }
                StopDecision::Stop(StopReason::NanLoss) => panic!("no NaN in trace"),
            }
        }
        assert_eq!(stopped_at, Some(5));
        assert_eq!(stopper.best_epoch(), 2);
        assert_eq!(*stopper.best(), 2);
        assert!((stopper.best_loss() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn strictly_decreasing_losses_never_stop() {
        let mut stopper = EarlyStopper::new(1, 0.0, 0usize);
        for epoch in 1..=50 {
            let loss = 1.0 / epoch as f32;
            assert_eq!(
                stopper.observe(epoch, loss, &epoch),
                StopDecision::Continue
            );
        }
        assert_eq!(stopper.best_epoch(), 50);
    }

    #[test]
    fn nan_at_first_epoch_stops_with_initial_snapshot() {
        let mut stopper = EarlyStopper::new(5, 0.0, 99usize);
        let decision = stopper.observe(1, f32::NAN, &1);
        assert_eq!(decision, StopDecision::Stop(StopReason::NanLoss));
        assert_eq!(*stopper.best(), 99, "initial snapshot preserved");
    }

    #[test]
    fn min_delta_demands_a_real_improvement() {
        let mut stopper = EarlyStopper::new(0, 0.05, 0usize);
        assert_eq!(stopper.observe(1, 1.0, &1), StopDecision::Continue);
        // 0.97 is better but not by min_delta: a strike, and patience 0
        // means one strike stops.
        assert_eq!(
            stopper.observe(2, 0.97, &2),
            StopDecision::Stop(StopReason::Patience)
        );
        assert_eq!(stopper.best_epoch(), 1);
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut stopper = EarlyStopper::new(3, 0.0, 0usize);
        stopper.observe(1, 0.5, &1);
        stopper.observe(2, 0.5, &2);
        assert_eq!(stopper.best_epoch(), 1);
    }
}
