use std::path::PathBuf;

use consent_core::consent::Reason;
use consent_core::script::{
    execute, parse_script, print_program, AccessSpec, Act, DataDesc, Program, Statement,
};
use consent_core::TimeStep;
use proptest::prelude::*;

fn scenario(file: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `(line, expected)` of every assume, all of which must hold.
fn assumes(file: &str) -> Vec<(usize, bool)> {
    let report = execute(&parse_script(&scenario(file)).unwrap()).unwrap();
    assert!(
        report.passed,
        "{file}: {:?}",
        report.failed_assumes().collect::<Vec<_>>()
    );
    report
        .assumes
        .iter()
        .map(|a| (a.line, a.expected))
        .collect()
}

#[test]
fn overlapping_consents() {
    assert_eq!(
        assumes("overlapping.consent"),
        vec![
            (13, false),
            (14, true),
            (15, true),
            (20, false),
            (21, false),
            (22, true)
        ]
    );
}

#[test]
fn refining_data_types() {
    assert_eq!(assumes("refining.consent"), vec![(14, false), (15, true)]);
}

#[test]
fn legacy_data_type() {
    assert_eq!(
        assumes("legacy.consent"),
        vec![(12, false), (13, true), (14, true)]
    );
}

#[test]
fn multiple_classification() {
    assert_eq!(assumes("multiclass.consent"), vec![(12, true), (13, true)]);
}

#[test]
fn intro_example() {
    assert_eq!(assumes("intro.consent"), vec![(4, true)]);
}

#[test]
fn denial_reasons_in_overlapping_consents() {
    let report = execute(&parse_script(&scenario("overlapping.consent")).unwrap()).unwrap();
    let reasons: Vec<Reason> = report.assumes.iter().map(|a| a.reason).collect();
    assert_eq!(
        reasons,
        vec![
            Reason::WithdrawnNonRetro,
            Reason::Ok,
            Reason::Ok,
            Reason::WithdrawnRetro,
            Reason::WithdrawnRetro,
            Reason::Ok,
        ]
    );
}

#[test]
fn flipped_assume_fails() {
    let text = scenario("legacy.consent").replace(
        "assume true collect NonPersonal",
        "assume false collect NonPersonal",
    );
    let report = execute(&parse_script(&text).unwrap()).unwrap();
    assert!(!report.passed);
    assert_eq!(
        report.failed_assumes().map(|a| a.line).collect::<Vec<_>>(),
        vec![14]
    );
}

#[test]
fn scripts_reprint_to_themselves() {
    for file in [
        "overlapping.consent",
        "refining.consent",
        "legacy.consent",
        "multiclass.consent",
        "intro.consent",
    ] {
        let text = scenario(file);
        let program = parse_script(&text).unwrap();
        assert_eq!(print_program(program.iter()), text, "{file}");
    }
}

const NAMES: [&str; 5] = ["Location", "Advertiser", "ds1", "Cell_2", "x"];

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(NAMES.to_vec()).prop_map(str::to_owned)
}

fn label() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_.-]{0,6}".prop_map(|s| format!(":{s}"))
}

fn step() -> impl Strategy<Value = TimeStep> {
    (1..500u32).prop_map(|n| TimeStep::new(n).unwrap())
}

fn desc() -> impl Strategy<Value = DataDesc> {
    (ident(), ident(), ident()).prop_map(|(data, subject, recipient)| DataDesc {
        data,
        subject,
        recipient,
    })
}

fn act() -> impl Strategy<Value = Act> {
    prop_oneof![
        desc().prop_map(Act::Collect),
        (desc(), prop::option::of((step(), prop::option::of(step())))).prop_map(|(desc, t)| {
            Act::Access(AccessSpec {
                desc,
                from: t.map(|t| t.0),
                to: t.and_then(|t| t.1),
            })
        }),
    ]
}

fn statement() -> impl Strategy<Value = Statement> {
    prop_oneof![
        (ident(), prop::option::of(ident()))
            .prop_map(|(name, parent)| Statement::NewData { name, parent }),
        (ident(), prop::option::of(ident()))
            .prop_map(|(name, parent)| Statement::NewRecipient { name, parent }),
        prop::collection::vec(ident(), 2..5).prop_map(|names| Statement::NewDisjoint { names }),
        (ident(), ident()).prop_map(|(a, b)| Statement::NewEquiv { a, b }),
        (any::<bool>(), desc(), label()).prop_map(|(retro, desc, label)| Statement::Grant {
            retro,
            desc,
            label
        }),
        (any::<bool>(), label()).prop_map(|(retro, label)| Statement::Withdraw { retro, label }),
        act().prop_map(Statement::Act),
        Just(Statement::Step),
        (any::<bool>(), act()).prop_map(|(expected, act)| Statement::Assume { expected, act }),
    ]
}

proptest! {
    #[test]
    fn print_then_parse_round_trips(statements in prop::collection::vec(statement(), 0..20)) {
        let text = print_program(statements.iter());
        let parsed = parse_script(&text).unwrap();
        let back: Vec<Statement> = parsed.iter().cloned().collect();
        prop_assert_eq!(&back, &statements);
        let reprinted = print_program(Program::from_statements(back).iter());
        prop_assert_eq!(reprinted, text);
    }
}
