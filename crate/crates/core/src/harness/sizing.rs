use crate::error::{Error, Result};

/// Hidden-layer width estimate ⌈C·√(S / (R·ln S))⌉, at least 1, for a
/// smoothness constant `c`, `samples` training samples and input width
/// `inputs`.
pub fn sizing_estimate(c: f64, samples: f64, inputs: usize) -> Result<usize> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Precondition(format!(
            "smoothness constant must be finite and ≥ 0, got {c}"
        )));
    }
    if !(samples.is_finite() && samples >= 2.0) {
        return Err(Error::Precondition(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    if inputs == 0 {
        return Err(Error::Precondition("input width must be at least 1".into()));
    }
    let width = (c * (samples / (inputs as f64 * samples.ln())).sqrt()).ceil();
    Ok((width as usize).max(1))
}
