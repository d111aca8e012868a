use crate::error::{Error, Result};
use crate::nn::{relative_error, Rng, Tape, Tensor};

use super::{Fdan, ParamStore};

#[derive(Clone, Debug)]
pub struct CoordinateCheck {
    pub param: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug)]
pub struct ParamGradCheck {
    pub coords: Vec<CoordinateCheck>,
    /// Draws rejected because `±eps` straddled a ReLU, pooling or l1 kink.
    pub resampled: usize,
    pub max_relative_error: f64,
}

fn loss_and_signature(
    model: &Fdan,
    params: &ParamStore<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
) -> Result<(f64, Vec<u64>)> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let x = tape.leaf(input.clone());
    let t = tape.leaf(target.clone());
    let y = model.forward(&mut tape, &vars, &x)?;
    let loss = tape.l1_loss(y, t)?;
    Ok((tape.value(loss).data()[0], tape.kink_signature()))
}

/// Central-difference check of the l1 training loss against reverse
/// mode, on `count` parameter coordinates drawn uniformly from the whole
/// store. A draw is rejected and redrawn when the perturbed evaluations
/// do not share the unperturbed branch pattern, so every accepted
/// coordinate lies on one smooth piece of the loss.
pub fn check_param_gradients(
    model: &Fdan,
    params: &ParamStore<f64>,
    input: &Tensor<f64>,
    target: &Tensor<f64>,
    count: usize,
    eps: f64,
    rng: &mut Rng,
) -> Result<ParamGradCheck> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let x = tape.leaf(input.clone());
    let t = tape.leaf(target.clone());
    let y = model.forward(&mut tape, &vars, &x)?;
    let loss = tape.l1_loss(y, t)?;
    let signature = tape.kink_signature();
    let mut grads = tape.backward(loss)?;
    let mut analytic = params.clone();
    analytic.load_grads(&vars, &mut grads)?;
    drop(tape);

    let total = params.numel();
    let mut coords = Vec::with_capacity(count);
    let mut resampled = 0;
    let max_draws = count * 20 + 100;
    let mut draws = 0;
    while coords.len() < count {
        draws += 1;
        if draws > max_draws {
            return Err(Error::Numeric(format!(
                "only {} of {count} coordinates avoided kinks after {max_draws} draws",
                coords.len()
            )));
        }
        let (id, offset) = params.locate(rng.below(total)).expect("index in range");
        let mut plus = params.clone();
        plus.get_mut(id).value.data_mut()[offset] += eps;
        let mut minus = params.clone();
        minus.get_mut(id).value.data_mut()[offset] -= eps;
        let (lp, sp) = loss_and_signature(model, &plus, input, target)?;
        let (lm, sm) = loss_and_signature(model, &minus, input, target)?;
        if sp != signature || sm != signature {
            resampled += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * eps);
        let ad = analytic.get(id).grad.data()[offset];
        coords.push(CoordinateCheck {
            param: params.get(id).name.clone(),
            offset,
            analytic: ad,
            numeric,
            relative_error: relative_error(ad, numeric),
        });
    }
    let max_relative_error = coords.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    Ok(ParamGradCheck {
        coords,
        resampled,
        max_relative_error,
    })
}
