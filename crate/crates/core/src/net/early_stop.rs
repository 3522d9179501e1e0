/// Whether lower or higher metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience-based early stopping. Stops as soon as the number of
/// consecutive non-improving epochs exceeds `patience`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    pub objective: Objective,
    pub best_metric: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_since_best: usize,
    epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, objective: Objective) -> Self {
        EarlyStopper {
            patience,
            objective,
            best_metric: None,
            best_epoch: None,
            epochs_since_best: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, metric: f64) -> Verdict {
        let epoch = self.epoch;
        self.epoch += 1;
        let better = match (self.best_metric, self.objective) {
            (None, _) => true,
            (Some(b), Objective::Minimize) => metric < b,
            (Some(b), Objective::Maximize) => metric > b,
        };
        if better {
            self.best_metric = Some(metric);
            self.best_epoch = Some(epoch);
            self.epochs_since_best = 0;
            Verdict::Improved
        } else {
            self.epochs_since_best += 1;
            if self.epochs_since_best > self.patience {
                Verdict::Stop
            } else {
                Verdict::NoImprovement
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_exceeded() {
        let mut s = EarlyStopper::new(2, Objective::Minimize);
        let verdicts: alloc::vec::Vec<Verdict> = [3.0, 2.0, 2.0, 2.0, 2.0].iter().map(|&m| s.observe(m)).collect();
        assert_eq!(
            verdicts,
            [Verdict::Improved, Verdict::Improved, Verdict::NoImprovement, Verdict::NoImprovement, Verdict::Stop]
        );
        assert_eq!(s.best_epoch, Some(1));
        assert_eq!(s.best_metric, Some(2.0));
    }

    #[test]
    fn maximize_tracks_accuracy() {
        let mut s = EarlyStopper::new(0, Objective::Maximize);
        assert_eq!(s.observe(0.5), Verdict::Improved);
        assert_eq!(s.observe(0.7), Verdict::Improved);
        assert_eq!(s.observe(0.7), Verdict::Stop);
    }
}
