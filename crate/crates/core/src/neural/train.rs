use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, Axis};

use super::mlp::Mlp;
use super::optim::AdamW;
use crate::error::{Error, Result};

fn join(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array2<f64>> {
    if states.dim() != actions.dim() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            actual: actions.len(),
        });
    }
    Ok(concatenate![Axis(1), states, actions])
}

/// Critic evaluation `Q(s, a)` for a batch of state/action rows.
pub fn critic_values(
    critic: &Mlp,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
) -> Result<Vec<f64>> {
    let x = join(states, actions)?;
    Ok(critic.forward(x.view())?.into_raw_vec_and_offset().0)
}

/// One optimizer step on the mean squared error `(1/B)·Σ(y_b − Q(s_b, a_b))²`.
///
/// Returns the loss measured before the step.
pub fn critic_step(
    critic: &mut Mlp,
    opt: &mut AdamW,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<f64> {
    let b = states.nrows();
    if b == 0 {
        return Err(Error::Empty("critic batch".into()));
    }
    if targets.len() != b {
        return Err(Error::DimensionMismatch {
            expected: b,
            actual: targets.len(),
        });
    }
    let x = join(states, actions)?;
    let cache = critic.forward_cached(x.view())?;
    let q = cache.output().column(0);
    let mut loss = 0.0;
    let mut grad = Array2::zeros((b, 1));
    for i in 0..b {
        let e = q[i] - targets[i];
        loss += e * e;
        grad[[i, 0]] = 2.0 * e / b as f64;
    }
    loss /= b as f64;
    let (grads, _) = critic.backward(&cache, grad, true)?;
    opt.apply(critic, &grads.expect("requested parameter gradients"))?;
    Ok(loss)
}

/// One deterministic policy gradient step raising `mean_b Q(s_b, μ(s_b))`.
///
/// The critic is held fixed; its action gradient is chained through the
/// actor. Returns the objective measured before the step.
pub fn actor_step(
    actor: &mut Mlp,
    critic: &Mlp,
    opt: &mut AdamW,
    states: ArrayView2<f64>,
) -> Result<f64> {
    let b = states.nrows();
    if b == 0 {
        return Err(Error::Empty("actor batch".into()));
    }
    let m = actor.outputs();
    if critic.inputs() != states.ncols() + m {
        return Err(Error::DimensionMismatch {
            expected: states.ncols() + m,
            actual: critic.inputs(),
        });
    }
    let actor_cache = actor.forward_cached(states)?;
    let x = join(states, actor_cache.output().view())?;
    let critic_cache = critic.forward_cached(x.view())?;
    let objective = critic_cache.output().sum() / b as f64;

    // Descend on -J.
    let grad_q = Array2::from_elem((b, 1), -1.0 / b as f64);
    let (_, grad_x) = critic.backward(&critic_cache, grad_q, false)?;
    let grad_a = grad_x.slice(s![.., states.ncols()..]).to_owned();
    let (grads, _) = actor.backward(&actor_cache, grad_a, true)?;
    opt.apply(actor, &grads.expect("requested parameter gradients"))?;
    Ok(objective)
}
