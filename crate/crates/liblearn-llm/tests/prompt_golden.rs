//! The prompt format is load-bearing: scripted backends key on the final
//! `-- ` line and run determinism requires byte-stable prompts, so this
//! fixture pins the exact rendering.

use liblearn_core::domains::toylist;
use liblearn_llm::{build_prompt, PromptSpec};

const GOLDEN: &str = include_str!("fixtures/prompt_golden.txt");

fn fixture_prompt() -> String {
    let lib = toylist::library();
    let spec = PromptSpec::new(
        "You write list and arithmetic programs in a small lambda DSL.",
        &lib,
        "add two to the second element",
        4096,
    )
    .with_exemplars(vec![
        (
            "add two to the number".into(),
            "(lambda (+ $0 (+ 1 1)))".into(),
        ),
        (
            "second element of the list".into(),
            "(lambda (head (tail $0)))".into(),
        ),
    ]);
    build_prompt(&spec).unwrap().text
}

#[test]
fn prompt_matches_the_stored_golden_bytes() {
    assert_eq!(fixture_prompt(), GOLDEN);
}

#[test]
#[ignore = "rewrites the stored fixture"]
fn regenerate_golden_fixture() {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/prompt_golden.txt"
    );
    std::fs::write(path, fixture_prompt()).unwrap();
}
