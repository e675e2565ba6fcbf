use std::sync::Arc;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Mean negative log-likelihood of `labels` under `softmax(logits)`.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    tape.softmax_cross_entropy(logits, Arc::from(labels))
}

/// Contrastive loss over two `B x d` matrices of unit rows, row `i` of each
/// being a view of graph `i`.
///
/// Each of the `2B` rows is an anchor whose positive is the other view of the
/// same graph; the denominator runs over both views of every other graph,
/// i.e. `2(B - 1)` terms. Returns the mean over anchors.
pub fn ntxent(tape: &mut Tape, u0: Var, u1: Var, tau: f64) -> Result<Var> {
    let (b, d0) = tape.value(u0).shape();
    let (b1, d1) = tape.value(u1).shape();
    if (b, d0) != (b1, d1) {
        return Err(Error::Shape {
            op: "ntxent",
            detail: format!("views {:?} and {:?}", (b, d0), (b1, d1)),
        });
    }
    if b < 2 {
        return Err(Error::BatchTooSmall(b));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("temperature must be positive, got {tau}")));
    }
    let n = 2 * b;
    let mut neg = Tensor::zeros(n, n);
    let mut pos = Tensor::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            if c % b != r % b {
                neg.row_mut(r)[c] = 1.0;
            } else if c != r {
                pos.row_mut(r)[c] = 1.0;
            }
        }
    }
    let u = tape.concat_rows(&[u0, u1])?;
    let ut = tape.transpose(u)?;
    let sim = tape.matmul(u, ut)?;
    let logits = tape.scale(sim, 1.0 / tau)?;

    let e = tape.exp(logits)?;
    let neg = tape.leaf(neg);
    let masked = tape.mul(e, neg)?;
    let denom = tape.sum_cols(masked)?;
    let log_denom = tape.log(denom)?;

    let pos = tape.leaf(pos);
    let picked = tape.mul(logits, pos)?;
    let positive = tape.sum_cols(picked)?;
    let neg_positive = tape.scale(positive, -1.0)?;

    let per_anchor = tape.add(log_denom, neg_positive)?;
    let total = tape.sum_all(per_anchor)?;
    tape.scale(total, 1.0 / n as f64)
}

/// `ce + alpha * cl`.
pub fn combined_loss(tape: &mut Tape, ce: Var, cl: Var, alpha: f64) -> Result<Var> {
    let weighted = tape.scale(cl, alpha)?;
    tape.add(ce, weighted)
}
