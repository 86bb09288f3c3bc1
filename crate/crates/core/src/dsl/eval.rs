use std::collections::BTreeMap;

use super::ast::Condition;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no value for signal `{0}`")]
    MissingSignal(String),
}

/// Evaluates a condition against the latest value of each signal.
pub fn eval_condition(cond: &Condition, snapshot: &BTreeMap<String, f64>) -> Result<bool, EvalError> {
    Ok(match cond {
        Condition::Comparison { signal, op, value, .. } => {
            let current = snapshot
                .get(&signal.name)
                .ok_or_else(|| EvalError::MissingSignal(signal.name.clone()))?;
            op.apply(*current, *value)
        }
        Condition::And(l, r) => eval_condition(l, snapshot)? && eval_condition(r, snapshot)?,
        Condition::Or(l, r) => eval_condition(l, snapshot)? || eval_condition(r, snapshot)?,
        Condition::Not(inner) => !eval_condition(inner, snapshot)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::ast::CompareOp;
    use proptest::prelude::*;

    fn snap(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn strict_less_than_boundary() {
        let c = Condition::compare("touch", CompareOp::Lt, 3.0);
        assert_eq!(eval_condition(&c, &snap(&[("touch", 2.0)])), Ok(true));
        assert_eq!(eval_condition(&c, &snap(&[("touch", 3.0)])), Ok(false));
    }

    #[test]
    fn missing_signal() {
        let c = Condition::compare("touch", CompareOp::Lt, 3.0);
        assert_eq!(
            eval_condition(&c, &BTreeMap::new()),
            Err(EvalError::MissingSignal("touch".into()))
        );
    }

    #[test]
    fn conjunction_truth_table() {
        let c = Condition::compare("touch", CompareOp::Lt, 3.0).and(Condition::compare("proximity", CompareOp::Gt, 1.0));
        for (touch, prox, expected) in [
            (2.0, 2.0, true),
            (2.0, 0.5, false),
            (4.0, 2.0, false),
            (4.0, 0.5, false),
        ] {
            assert_eq!(eval_condition(&c, &snap(&[("touch", touch), ("proximity", prox)])), Ok(expected));
        }
    }

    // Independent evaluator: flattens the tree into postfix and runs a stack machine.
    fn oracle(cond: &Condition, env: &BTreeMap<String, f64>) -> bool {
        enum Op {
            Leaf(bool),
            And,
            Or,
            Not,
        }
        fn flatten(c: &Condition, env: &BTreeMap<String, f64>, out: &mut Vec<Op>) {
            match c {
                Condition::Comparison { signal, op, value, .. } => {
                    let v = env[&signal.name];
                    let r = match op {
                        CompareOp::Lt => v < *value,
                        CompareOp::Le => !(v > *value),
                        CompareOp::Gt => *value < v,
                        CompareOp::Ge => !(v < *value),
                        CompareOp::Eq => !(v < *value) && !(v > *value),
                        CompareOp::Ne => v < *value || v > *value,
                    };
                    out.push(Op::Leaf(r));
                }
                Condition::And(l, r) => {
                    flatten(l, env, out);
                    flatten(r, env, out);
                    out.push(Op::And);
                }
                Condition::Or(l, r) => {
                    flatten(l, env, out);
                    flatten(r, env, out);
                    out.push(Op::Or);
                }
                Condition::Not(i) => {
                    flatten(i, env, out);
                    out.push(Op::Not);
                }
            }
        }
        let mut ops = Vec::new();
        flatten(cond, env, &mut ops);
        let mut stack = Vec::new();
        for op in ops {
            match op {
                Op::Leaf(b) => stack.push(b),
                Op::Not => {
                    let a = stack.pop().unwrap();
                    stack.push(!a);
                }
                Op::And | Op::Or => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(if matches!(op, Op::And) { a & b } else { a | b });
                }
            }
        }
        stack.pop().unwrap()
    }

    fn condition(depth: u32) -> impl Strategy<Value = Condition> {
        let leaf = (0usize..4, 0usize..6, -5i32..5).prop_map(|(s, op, v)| {
            let ops = [CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge, CompareOp::Eq, CompareOp::Ne];
            Condition::compare(["a", "b", "c", "d"][s], ops[op], f64::from(v))
        });
        leaf.prop_recursive(depth, 64, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| l.and(r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| l.or(r)),
                inner.prop_map(Condition::not),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn agrees_with_stack_machine(cond in condition(6), vals in proptest::array::uniform4(-6i32..6)) {
            let env = snap(&[("a", f64::from(vals[0])), ("b", f64::from(vals[1])), ("c", f64::from(vals[2])), ("d", f64::from(vals[3]))]);
            prop_assert_eq!(eval_condition(&cond, &env).unwrap(), oracle(&cond, &env));
        }
    }
}
