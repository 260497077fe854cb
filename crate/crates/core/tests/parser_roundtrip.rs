//! Printing then re-parsing preserves program structure.

mod common;

use common::programs_dir;
use datalogo::ast::check;
use datalogo::parser::{parse, pretty};
use proptest::prelude::*;

#[test]
fn shipped_programs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(programs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "dl") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let program = parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        check(&program).unwrap_or_else(|d| panic!("{}: {d:?}", path.display()));
        let printed = pretty(&program);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{}: {e}\n{printed}", path.display()));
        assert_eq!(again, program, "{}", path.display());
        assert_eq!(pretty(&again), printed);
        seen += 1;
    }
    assert!(seen >= 10, "only {seen} programs");
}

fn key() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(String::from),
        prop::sample::select(vec!["a", "b"]).prop_map(|c| c.to_string()),
        (0i64..9).prop_map(|n| n.to_string()),
        (prop::sample::select(vec!["x", "y"]), -2i64..3).prop_map(|(v, k)| match k {
            0 => v.to_string(),
            k if k > 0 => format!("{v} + {k}"),
            k => format!("{v} - {}", -k),
        }),
    ]
}

fn atom() -> impl Strategy<Value = String> {
    (prop::sample::select(vec!["E", "R", "Q"]), proptest::collection::vec(key(), 0..3))
        .prop_map(|(r, args)| format!("{r}({})", args.join(", ")))
}

fn factor() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => atom(),
        1 => atom().prop_map(|a| format!("[{a}]")),
        1 => atom().prop_map(|a| format!("not({a})")),
        1 => atom().prop_map(|a| format!("threshold(1/2, {a})")),
        1 => (prop::sample::select(vec!["x", "y"]), key()).prop_map(|(v, k)| format!("[{v} = {k}]")),
        1 => prop::sample::select(vec!["3", "inf", "bot", "true", "[1, 4]", "{2, 5}", "1/3", "-2"]).prop_map(String::from),
    ]
}

fn product() -> impl Strategy<Value = String> {
    proptest::collection::vec(factor(), 1..4).prop_map(|fs| fs.join(" * "))
}

fn expr() -> impl Strategy<Value = String> {
    let sum = (product(), proptest::option::of(atom())).prop_map(|(body, guard)| match guard {
        Some(g) => format!("sum(z){{ {body} | !{g}, z != x }}"),
        None => format!("sum(z in 0..4){{ {body} }}"),
    });
    proptest::collection::vec(prop_oneof![3 => product(), 1 => sum], 1..4).prop_map(|ts| ts.join(" + "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_rules_round_trip(head in atom(), body in expr(), cased in any::<bool>(), other in expr()) {
        let text = if cased {
            format!("{head} :- case x = 0 : {body} ; x < 3 : {other} ; else : {body}.")
        } else {
            format!("{head} :- {body}.")
        };
        let program = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        let printed = pretty(&program);
        let again = parse(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(again, program);
    }
}
