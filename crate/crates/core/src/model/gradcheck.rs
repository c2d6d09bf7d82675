use std::collections::BTreeSet;

use serde::Serialize;

use super::{EncodedDialogue, Params, Result, Tagger};

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)`.
    pub max_rel_err: f64,
    /// Tensor holding the worst entry.
    pub worst_tensor: String,
    /// Entries compared.
    pub checked: usize,
    /// Sampled entries whose analytic and numeric values are both below the
    /// floor, where round-off swamps the difference quotient.
    pub skipped: usize,
    /// Sampled entries whose perturbation flips a ReLU, so the loss has a
    /// kink inside the difference interval.
    pub kinked: usize,
}

/// Smallest gradient magnitude compared. The effective floor also rises
/// with the round-off of the difference quotient, `eps·|loss| / step`, so
/// that a relative error of `1e-4` stays resolvable.
pub const GRADIENT_FLOOR: f64 = 1e-7;

const PER_TENSOR: usize = 48;

/// Compares the analytic gradient with central differences of step `step`
/// on an evenly strided sample of each tensor. Embedding entries are drawn
/// only from rows of tokens present in `dialogues`.
pub fn gradient_check(tagger: &Tagger, dialogues: &[EncodedDialogue], step: f64) -> Result<GradCheckReport> {
    let (loss, grad) = tagger.batch_loss_and_grad(dialogues)?;
    let floor = GRADIENT_FLOOR.max(1e4 * f64::EPSILON * loss.abs().max(1.0) / step);
    let dim = tagger.config.embedding_dim;
    let rows: BTreeSet<usize> = dialogues.iter().flat_map(|d| d.ids.iter().flatten().copied()).collect();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_tensor: String::new(),
        checked: 0,
        skipped: 0,
        kinked: 0,
    };
    let base = tagger.relu_pattern(dialogues);
    let mut probe = tagger.clone();
    for (t, name) in Params::NAMES.iter().enumerate() {
        let analytic = grad.tensors()[t].2.to_vec();
        let candidates: Vec<usize> = if t == 0 {
            rows.iter().flat_map(|&r| (0..dim).map(move |k| r * dim + k)).collect()
        } else {
            (0..analytic.len()).collect()
        };
        let stride = candidates.len().div_ceil(PER_TENSOR).max(1);
        for &idx in candidates.iter().step_by(stride) {
            let orig = tagger.params.tensors()[t].2[idx];
            probe.params.tensors_mut()[t][idx] = orig + step;
            let up = probe.batch_loss(dialogues)?;
            let smooth_up = probe.relu_pattern(dialogues) == base;
            probe.params.tensors_mut()[t][idx] = orig - step;
            let down = probe.batch_loss(dialogues)?;
            let smooth_down = probe.relu_pattern(dialogues) == base;
            probe.params.tensors_mut()[t][idx] = orig;
            if !(smooth_up && smooth_down) {
                report.kinked += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[idx];
            let scale = a.abs().max(numeric.abs());
            if scale < floor {
                report.skipped += 1;
                continue;
            }
            report.checked += 1;
            let rel = (a - numeric).abs() / scale;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_tensor = name.to_string();
            }
        }
    }
    Ok(report)
}
