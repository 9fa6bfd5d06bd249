//! Bidirectional InfoNCE over a text-by-video similarity matrix.

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, Graph, Matrix, Var};

fn check(sim: &Matrix, tau: f64) -> Result<()> {
    if sim.rows() != sim.cols() {
        return Err(Error::NonSquare {
            rows: sim.rows(),
            cols: sim.cols(),
        });
    }
    if sim.rows() == 0 {
        return Err(Error::EmptyInput("similarity matrix"));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::NonPositiveTemperature(tau));
    }
    Ok(())
}

/// Mean over rows of `logsumexp(row/τ) - diag/τ`.
fn row_loss(sim: &Matrix, tau: f64) -> f64 {
    let b = sim.rows();
    let total: f64 = (0..b)
        .map(|i| {
            let row = sim.row(i);
            log_sum_exp(row.iter().map(|s| s / tau)) - row[i] / tau
        })
        .sum();
    total / b as f64
}

/// Text-to-video loss: each text row normalizes over videos.
pub fn infonce_t2v(sim: &Matrix, tau: f64) -> Result<f64> {
    check(sim, tau)?;
    Ok(row_loss(sim, tau))
}

/// Video-to-text loss: each video column normalizes over texts.
pub fn infonce_v2t(sim: &Matrix, tau: f64) -> Result<f64> {
    check(sim, tau)?;
    Ok(row_loss(&sim.transpose(), tau))
}

pub fn infonce_total(sim: &Matrix, tau: f64) -> Result<f64> {
    Ok(0.5 * (infonce_t2v(sim, tau)? + infonce_v2t(sim, tau)?))
}

/// Graph form of [`infonce_total`] with a `1×1` temperature node.
pub fn infonce_total_var(g: &mut Graph, sim: Var, tau: Var) -> Result<Var> {
    let t = g.value(tau)[(0, 0)];
    check(g.value(sim), t)?;
    let logits = g.div_scalar(sim, tau)?;
    let t2v = g.diag_cross_entropy(logits)?;
    let transposed = g.transpose(logits);
    let v2t = g.diag_cross_entropy(transposed)?;
    let both = g.add(t2v, v2t)?;
    Ok(g.scale(both, 0.5))
}
