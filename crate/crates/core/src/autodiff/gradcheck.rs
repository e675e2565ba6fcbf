use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Maximum elementwise relative error `|a - b| / max(|a|, |b|, 1e-8)` between
/// tape gradients and central differences.
///
/// The step starts at `eps`. A central difference is accepted once it agrees
/// with the one at half the step; otherwise the step shrinks tenfold, which
/// moves the stencil off nearby relu kinks. Accepted pairs are combined by
/// Richardson extrapolation.
///
/// `f` records a scalar function of the parameter leaves on a fresh tape.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.value(out).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("grad_check"))
        }
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let scale = tape.value(out).item().abs().max(1.0);
    let grads = tape.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[pi], p);
        for k in 0..p.len() {
            let mut central = |h: f64| -> Result<f64> {
                let orig = p.data()[k];
                work[pi].data_mut()[k] = orig + h;
                let hi = eval(&work)?;
                work[pi].data_mut()[k] = orig - h;
                let lo = eval(&work)?;
                work[pi].data_mut()[k] = orig;
                Ok((hi - lo) / (2.0 * h))
            };
            let numeric = settle(&mut central, eps, scale)?;
            let a = analytic.data()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Smallest step tried before giving up on agreement.
const MIN_STEP: f64 = 1e-8;

fn settle(central: &mut impl FnMut(f64) -> Result<f64>, eps: f64, scale: f64) -> Result<f64> {
    let mut h = eps;
    loop {
        let a = central(h)?;
        let b = central(h / 2.0)?;
        // rounding in a central difference is about ulp(f) / h
        let noise = 1e-13 * scale / h;
        if (a - b).abs() <= 1e-6 * a.abs().max(b.abs()) + noise || h / 10.0 < MIN_STEP {
            return Ok((4.0 * b - a) / 3.0);
        }
        h /= 10.0;
    }
}
