//! Rule-based judges producing binary rewards.
//!
//! A judge document names an evaluation mode (`rinfo` for the agent's final
//! answer, `rprog` for terminal URL and state probes), an optional parse mode,
//! and an ordered list of checks. Reward is the conjunction of all checks.

mod eval;
pub mod fuzzy;
mod normalize;
mod spec;

pub use eval::{
    eval_check, eval_check_with, evaluate_rinfo, evaluate_rprog, lookup_path, stringify,
    CheckOutcome, CheckResult, JudgeVerdict, ProbeDocument,
};
pub use normalize::normalize;
pub use spec::{
    is_valid_path, judge_from_value, parse_judge, Check, CheckOp, EvalType, Expected, JudgeSpec,
    ParseMode, SchemaError,
};

/// What a judge is evaluated against.
#[derive(Debug, Clone)]
pub enum JudgeInput<'a> {
    Answer(&'a str),
    Probe(&'a ProbeDocument),
}

/// Evaluate a judge against whatever input its mode calls for. A mismatched
/// input (answer for `rprog`, probe for `rinfo`) fails every check.
pub fn evaluate(spec: &JudgeSpec, input: JudgeInput<'_>) -> JudgeVerdict {
    match (spec.eval_type, input) {
        (EvalType::Rinfo, JudgeInput::Answer(a)) => evaluate_rinfo(spec, a),
        (EvalType::Rprog, JudgeInput::Probe(p)) => evaluate_rprog(spec, p),
        _ => JudgeVerdict::all_failed(spec),
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn op_strategy() -> impl Strategy<Value = CheckOp> {
        prop::sample::select(CheckOp::ALL.to_vec())
    }

    fn check_strategy() -> impl Strategy<Value = Check> {
        (op_strategy(), prop::collection::vec("[a-d0-9]{1,3}", 1..4)).prop_map(|(op, vals)| {
            let expected = if op == CheckOp::MustIncludeAll {
                Expected::All(vals)
            } else {
                Expected::One(vals[0].clone())
            };
            Check {
                op,
                expected,
                path: None,
            }
        })
    }

    fn spec_strategy() -> impl Strategy<Value = JudgeSpec> {
        prop::collection::vec(check_strategy(), 1..=8).prop_map(|checks| JudgeSpec {
            eval_type: EvalType::Rinfo,
            parse: ParseMode::None,
            checks,
        })
    }

    #[test]
    fn repeated_evaluation_is_byte_identical() {
        let spec = parse_judge(
            r#"{"eval_type":"rinfo","checks":[{"op":"must_include","expected":"SPX"},{"op":"fuzzy_match","expected":"3746.49"},{"op":"must_include_all","expected":["s&p","500"]}]}"#,
        )
        .unwrap();
        let answer = "The S&P 500 (SPX) is at 3,746.4 right now";
        let first = serde_json::to_vec(&evaluate_rinfo(&spec, answer)).unwrap();
        for _ in 0..1000 {
            assert_eq!(serde_json::to_vec(&evaluate_rinfo(&spec, answer)).unwrap(), first);
        }
    }

    proptest! {
        #[test]
        fn reward_is_product_of_check_bits(spec in spec_strategy(), answer in "[a-d0-9 ]{0,24}") {
            let v = evaluate_rinfo(&spec, &answer);
            prop_assert_eq!(v.per_check.len(), spec.checks.len());
            let product: u8 = v.per_check.iter().map(|c| u8::from(c.pass)).product();
            prop_assert_eq!(v.reward, product);
            for (i, c) in v.per_check.iter().enumerate() {
                prop_assert_eq!(c.index, i);
                prop_assert_eq!(c.pass, eval_check(&spec.checks[i], &normalize(&answer)).pass);
            }
        }

        #[test]
        fn include_all_is_monotone(
            vals in prop::collection::vec("[a-c]{1,2}", 2..6),
            target in "[a-c ]{0,16}",
            drop in any::<prop::sample::Index>(),
        ) {
            let full = Check { op: CheckOp::MustIncludeAll, expected: Expected::All(vals.clone()), path: None };
            let mut fewer = vals.clone();
            fewer.remove(drop.index(vals.len()));
            let reduced = Check { op: CheckOp::MustIncludeAll, expected: Expected::All(fewer), path: None };
            let t = normalize(&target);
            if eval_check(&full, &t).pass {
                prop_assert!(eval_check(&reduced, &t).pass);
            }
        }

        #[test]
        fn exact_implies_include(expected in "[a-c1 ]{1,6}", target in "[a-c1 ]{0,8}") {
            let t = normalize(&target);
            let exact = Check { op: CheckOp::ExactMatch, expected: Expected::One(expected.clone()), path: None };
            let inc = Check { op: CheckOp::MustInclude, expected: Expected::One(expected), path: None };
            if eval_check(&exact, &t).pass {
                prop_assert!(eval_check(&inc, &t).pass);
            }
        }

        #[test]
        fn exact_answer_passes_its_own_judge(expected in "[A-Za-z0-9$., ]{1,12}") {
            prop_assume!(!normalize(&expected).is_empty());
            for op in [CheckOp::ExactMatch, CheckOp::MustInclude, CheckOp::FuzzyMatch] {
                let c = Check { op, expected: Expected::One(expected.clone()), path: None };
                prop_assert!(eval_check(&c, &normalize(&expected)).pass);
            }
        }
    }
}
