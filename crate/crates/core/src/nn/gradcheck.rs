use crate::error::Result;

use super::{Scalar, Tape, Tensor, Var};

pub const FD_DEFAULT_EPS: f64 = 1e-3;

/// `|ad − fd| / max(|ad|, |fd|, 1e-8)`.
pub fn relative_error<T: Scalar>(ad: T, fd: T) -> T {
    let denom = ad.abs().max(fd.abs()).max(T::of(1e-8));
    (ad - fd).abs() / denom
}

/// Compares the reverse-mode gradient of the scalar `f` at `x` with
/// central differences `(f(x + eps·e_i) − f(x − eps·e_i)) / 2eps` over
/// every coordinate and returns the worst relative error.
pub fn finite_diff_check<T, F>(f: F, x: &Tensor<T>, eps: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let eval = |input: Tensor<T>| -> Result<T> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(input);
        let out = f(&mut tape, leaf)?;
        Ok(tape.value(out).data()[0])
    };

    let mut tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let out = f(&mut tape, leaf)?;
    let grads = tape.backward(out)?;
    let zero = Tensor::zeros(x.dims());
    let ad = grads.get(leaf).unwrap_or(&zero);

    let mut worst = T::zero();
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let fd = (eval(plus)? - eval(minus)?) / (eps + eps);
        worst = worst.max(relative_error(ad.data()[i], fd));
    }
    Ok(worst)
}
