use evalexpr::error::EvalexprResultValue;
use evalexpr::{build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node, Value};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// Time-varying delay `τ_ij(t)` description, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelaySpec {
    /// `0.4 + 0.1 sin((i + 2j) t)` with 1-based indices, bounded by 0.5.
    Reference,
    Constant {
        value: f64,
    },
    /// Expression in `t`, `i`, `j` (1-based), e.g. `0.3 + 0.1*math::sin(2*t)`.
    CustomExpression {
        expr: String,
        bound: f64,
    },
}

/// Compiled delay function.
#[derive(Debug, Clone)]
pub enum DelayFn {
    Reference,
    Constant(f64),
    Expression {
        node: Node<DefaultNumericTypes>,
        bound: f64,
    },
}

impl PartialEq for DelayFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Reference, Self::Reference) => true,
            (Self::Constant(a), Self::Constant(b)) => a == b,
            (Self::Expression { node: a, bound: x }, Self::Expression { node: b, bound: y }) => {
                a.to_string() == b.to_string() && x == y
            }
            _ => false,
        }
    }
}

struct DelayContext {
    t: Value<DefaultNumericTypes>,
    i: Value<DefaultNumericTypes>,
    j: Value<DefaultNumericTypes>,
}

impl Context for DelayContext {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value<DefaultNumericTypes>> {
        match identifier {
            "t" => Some(&self.t),
            "i" => Some(&self.i),
            "j" => Some(&self.j),
            _ => None,
        }
    }

    fn call_function(
        &self,
        identifier: &str,
        _argument: &Value<DefaultNumericTypes>,
    ) -> EvalexprResultValue<DefaultNumericTypes> {
        Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string()))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, disabled: bool) -> EvalexprResult<(), DefaultNumericTypes> {
        if disabled {
            Err(EvalexprError::BuiltinFunctionsCannotBeDisabled)
        } else {
            Ok(())
        }
    }
}

impl DelaySpec {
    pub fn compile(&self) -> Result<DelayFn, String> {
        match self {
            DelaySpec::Reference => Ok(DelayFn::Reference),
            DelaySpec::Constant { value } => {
                if *value >= 0.0 && value.is_finite() {
                    Ok(DelayFn::Constant(*value))
                } else {
                    Err(format!("constant delay must be nonnegative, got {value}"))
                }
            }
            DelaySpec::CustomExpression { expr, bound } => {
                if !(*bound >= 0.0 && bound.is_finite()) {
                    return Err(format!("delay bound must be nonnegative, got {bound}"));
                }
                let node = build_operator_tree::<DefaultNumericTypes>(expr)
                    .map_err(|e| format!("cannot parse delay expression {expr:?}: {e}"))?;
                let f = DelayFn::Expression { node, bound: *bound };
                // probe once so unknown identifiers fail at load time
                f.eval(1, 1, 0.0).map_err(|e| e.to_string())?;
                Ok(f)
            }
        }
    }
}

impl DelayFn {
    pub fn bound(&self) -> f64 {
        match self {
            DelayFn::Reference => 0.5,
            DelayFn::Constant(v) => *v,
            DelayFn::Expression { bound, .. } => *bound,
        }
    }

    /// Delay for the pair `(i, j)`, 1-based, at time `t`, checked against
    /// the declared bound.
    pub fn eval(&self, i: usize, j: usize, t: f64) -> Result<f64, SimError> {
        let tau = match self {
            DelayFn::Reference => 0.4 + 0.1 * ((i + 2 * j) as f64 * t).sin(),
            DelayFn::Constant(v) => *v,
            DelayFn::Expression { node, .. } => {
                let ctx = DelayContext {
                    t: Value::Float(t),
                    i: Value::Float(i as f64),
                    j: Value::Float(j as f64),
                };
                node.eval_number_with_context(&ctx)
                    .map_err(|e| SimError::InvalidConfig(format!("delay expression failed at t = {t}: {e}")))?
            }
        };
        let bound = self.bound();
        if !(tau >= 0.0 && tau <= bound * (1.0 + 1e-12)) {
            return Err(SimError::DelayBoundViolated { t, delay: tau, bound });
        }
        Ok(tau)
    }
}
