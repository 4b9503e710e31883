use super::{NumericsError, ParameterStore, Tape, Var};

/// Per-tensor outcome of a finite-difference comparison.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub name: String,
    pub elements: usize,
    pub max_abs_error: f64,
    /// `max |analytic − numeric|` divided by the largest gradient magnitude
    /// seen in the tensor (either route), floored at `1e-12`.
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().fold(0.0, |m, t| m.max(t.max_rel_error))
    }

    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

/// Compares tape gradients of `f` against central differences
/// `(f(w+h) − f(w−h)) / 2h` for every trainable scalar. Frozen entries are
/// skipped. Failures are reported, not raised; errors only come from `f`.
pub fn finite_difference_check<F>(
    store: &ParameterStore,
    step: f64,
    tolerance: f64,
    f: F,
) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Tape, &ParameterStore) -> Result<Var, NumericsError>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    let analytic = tape.gradients(loss, store)?;

    let eval = |s: &ParameterStore| -> Result<f64, NumericsError> {
        let mut t = Tape::new();
        let l = f(&mut t, s)?;
        Ok(t.value(l).item())
    };

    let mut work = store.clone();
    let mut tensors = Vec::new();
    for (name, grad) in &analytic {
        let base = store.get(name)?.clone();
        let mut max_abs: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..base.len() {
            let mut t = base.clone();
            t.data_mut()[i] = base.data()[i] + step;
            work.set(name, t.clone())?;
            let plus = eval(&work)?;
            t.data_mut()[i] = base.data()[i] - step;
            work.set(name, t)?;
            let minus = eval(&work)?;
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[i];
            max_abs = max_abs.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        work.set(name, base.clone())?;
        let rel = max_abs / scale.max(1e-12);
        tensors.push(TensorCheck {
            name: name.clone(),
            elements: base.len(),
            max_abs_error: max_abs,
            max_rel_error: rel,
            passed: rel < tolerance,
        });
    }
    Ok(GradCheckReport { tensors, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic_agrees() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::from_vec(1, 4, vec![0.3, -1.2, 2.0, 0.0]).unwrap(), true).unwrap();
        store.insert("frozen", Tensor::scalar(5.0), false).unwrap();
        let report = finite_difference_check(&store, 1e-6, 1e-8, |tape, s| {
            let w = tape.param(s, "w")?;
            let f = tape.param(s, "frozen")?;
            let wt = tape.transpose(w);
            let sq = tape.matmul(w, wt)?;
            let extra = tape.mul_scalar(f, sq)?;
            let _ = extra;
            Ok(sq)
        })
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.tensors.len(), 1);
        assert_eq!(report.tensors[0].name, "w");
    }
}
