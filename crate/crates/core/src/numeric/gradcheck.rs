//! Central finite-difference gradient checking.

use super::tensor::Tensor;

/// Analytic vs numeric comparison for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

impl GroupCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Numeric gradient of `f` at `x` by central differences with step `h`.
pub fn central_difference(
    x: &Tensor<f64>,
    h: f64,
    mut f: impl FnMut(&Tensor<f64>) -> f64,
) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * h);
    }
    out
}

/// Element-wise relative error `|a - n| / max(|a|, |n|, floor)`.
///
/// The floor keeps entries whose true gradient is (near) zero from being
/// judged on pure round-off.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

pub fn compare(name: &str, analytic: &Tensor<f64>, numeric: &Tensor<f64>, floor: f64) -> GroupCheck {
    assert_eq!(analytic.shape(), numeric.shape());
    let (mut rel, mut abs) = (0.0f64, 0.0f64);
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        rel = rel.max(relative_error(a, n, floor));
        abs = abs.max((a - n).abs());
    }
    GroupCheck {
        name: name.to_string(),
        max_rel_error: rel,
        max_abs_error: abs,
    }
}
