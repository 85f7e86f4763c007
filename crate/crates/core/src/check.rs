//! Finite-difference verification of the full training objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{batch_loss, DfanParams, ModelConfig, Objective, ParamVars, SampleInput, Variant};
use crate::numeric::gradcheck::{central_difference, compare, GroupCheck};
use crate::numeric::{Tape, Tensor};

const MAX_DRAWS: u64 = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub regions: usize,
    pub dim: usize,
    pub attributes: usize,
    pub seen_classes: usize,
    pub batch: usize,
    pub lambda: f64,
    pub step: f64,
    pub tol: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
    pub seed: u64,
    /// Adds an offset to the analytic gradient of the named group.
    pub corrupt: Option<String>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            regions: 6,
            dim: 8,
            attributes: 4,
            seen_classes: 3,
            batch: 2,
            lambda: 0.1,
            step: 1e-3,
            tol: 1e-4,
            floor: 1e-6,
            seed: 0,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupResult {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub tol: f64,
    /// Probe points drawn before one avoided every kink.
    pub draws: u64,
    pub groups: Vec<GroupResult>,
}

impl GradcheckReport {
    pub fn passes(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.groups.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect()
    }
}

struct Toy {
    params: DfanParams<f64>,
    seen_t: Tensor<f64>,
    locals: Vec<Tensor<f64>>,
    globals: Vec<Tensor<f64>>,
    targets: Vec<usize>,
}

impl Toy {
    fn draw(cfg: &GradcheckConfig, seed: u64) -> Result<Self> {
        let model = ModelConfig::new(cfg.dim, cfg.attributes);
        let params = DfanParams::<f64>::init(model, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let seen_t = Tensor::from_fn(&[cfg.attributes, cfg.seen_classes], |_| rng.random_range(0.0..1.0));
        let mut locals = Vec::new();
        let mut globals = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..cfg.batch {
            let z = Tensor::from_fn(&[cfg.regions, cfg.dim], |_| rng.random_range(-1.0..1.0));
            let mut p = Tensor::zeros(&[1, cfg.dim]);
            for r in 0..cfg.regions {
                for (d, v) in p.data_mut().iter_mut().enumerate() {
                    *v += z.at(r, d) / cfg.regions as f64;
                }
            }
            locals.push(z);
            globals.push(p);
            targets.push(rng.random_range(0..cfg.seen_classes));
        }
        Ok(Self {
            params,
            seen_t,
            locals,
            globals,
            targets,
        })
    }

    fn forward(&self, params: &DfanParams<f64>, trainable: &[&str], lambda: f64) -> Result<(Tape<f64>, ParamVars, crate::numeric::Var)> {
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, params, trainable);
        let seen_t = tape.constant(self.seen_t.clone());
        let batch: Vec<SampleInput<'_, f64>> = (0..self.locals.len())
            .map(|i| SampleInput {
                local: &self.locals[i],
                global: &self.globals[i],
                target: self.targets[i],
            })
            .collect();
        let objective = Objective {
            lambda,
            variant: Variant::default(),
        };
        let loss = batch_loss(&mut tape, &vars, params.config.attention_axis, &objective, seen_t, &batch)?;
        Ok((tape, vars, loss.total))
    }
}

/// Compares analytic and central-difference gradients of the total loss
/// for every parameter group on a small random instance.
///
/// A probe point is redrawn whenever any finite-difference evaluation
/// changes the ReLU activation pattern, so no difference straddles a kink.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if cfg.regions == 0 || cfg.dim == 0 || cfg.attributes == 0 || cfg.seen_classes == 0 || cfg.batch == 0 {
        return Err(Error::Config("gradcheck dimensions must be positive".into()));
    }
    if !(cfg.step > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::Config("gradcheck step and tolerance must be positive".into()));
    }
    for k in 0..MAX_DRAWS {
        let toy = Toy::draw(cfg, cfg.seed.wrapping_mul(MAX_DRAWS).wrapping_add(k))?;
        if let Some(groups) = check_point(cfg, &toy)? {
            return Ok(GradcheckReport {
                tol: cfg.tol,
                draws: k + 1,
                groups,
            });
        }
    }
    Err(Error::Consistency(
        "every probe point crossed a ReLU kink".into(),
    ))
}

fn check_point(cfg: &GradcheckConfig, toy: &Toy) -> Result<Option<Vec<GroupResult>>> {
    let names: Vec<String> = toy.params.params().iter().map(|p| p.name.clone()).collect();
    let all: Vec<&str> = names.iter().map(String::as_str).collect();
    let (tape, vars, total) = toy.forward(&toy.params, &all, cfg.lambda)?;
    let pattern = tape.relu_pattern();
    let mut grads = tape.backward(total)?;

    let mut groups = Vec::new();
    for (i, var) in vars.all().into_iter().enumerate() {
        let name = &names[i];
        let mut analytic = grads.take(var).ok_or_else(|| Error::MissingGrad(name.clone()))?;
        if cfg.corrupt.as_deref() == Some(name.as_str()) {
            let first = &mut analytic.data_mut()[0];
            *first += 1e-2 * (1.0 + first.abs());
        }
        let base = toy.params.params()[i].value.clone();
        let mut failure: Option<Error> = None;
        let mut crossed = false;
        let numeric = central_difference(&base, cfg.step, |probe| {
            let mut p = toy.params.clone();
            p.params_mut()[i].value = probe.clone();
            match toy.forward(&p, &[], cfg.lambda) {
                Ok((t, _, l)) => {
                    crossed |= t.relu_pattern() != pattern;
                    t.value(l).item()
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if crossed {
            return Ok(None);
        }
        let GroupCheck {
            name,
            max_rel_error,
            max_abs_error,
        } = compare(name, &analytic, &numeric, cfg.floor);
        groups.push(GroupResult {
            pass: max_rel_error < cfg.tol,
            name,
            max_rel_error,
            max_abs_error,
        });
    }
    Ok(Some(groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_check_passes_all_groups() {
        let report = run_gradcheck(&GradcheckConfig::default()).unwrap();
        for g in &report.groups {
            eprintln!("{} rel={:e} abs={:e}", g.name, g.max_rel_error, g.max_abs_error);
        }
        assert_eq!(report.groups.len(), 8);
        assert!(report.passes(), "{:?}", report.failing());
    }

    #[test]
    fn lambda_zero_still_checks_ce_paths() {
        let cfg = GradcheckConfig {
            lambda: 0.0,
            ..Default::default()
        };
        let report = run_gradcheck(&cfg).unwrap();
        assert!(report.passes(), "{:?}", report.failing());
        assert!(report.groups.iter().all(|g| g.max_abs_error.is_finite()));
    }

    #[test]
    fn corruption_names_the_group() {
        for name in ["w_local", "phi.b2"] {
            let cfg = GradcheckConfig {
                corrupt: Some(name.into()),
                ..Default::default()
            };
            let report = run_gradcheck(&cfg).unwrap();
            assert_eq!(report.failing(), vec![name]);
        }
    }

    #[test]
    fn rejects_degenerate_config() {
        let cfg = GradcheckConfig {
            batch: 0,
            ..Default::default()
        };
        assert!(matches!(run_gradcheck(&cfg), Err(Error::Config(_))));
    }
}
