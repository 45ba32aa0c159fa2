//! Prompt assembly: a domain header, the current library rendered as typed
//! signatures with doc comments, solved exemplars, and the target description
//! left open for the model to complete.

use liblearn_core::Library;
use thiserror::Error;

/// Token estimator signature. Estimation only has to be stable and monotone
/// in text length; exact tokenizer behavior is model-specific.
pub type TokenEstimator = fn(&str) -> usize;

/// Default estimator: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("prompt scaffolding needs {needed} tokens but the budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

/// Everything needed to render one prompt deterministically.
pub struct PromptSpec<'a> {
    pub header: &'a str,
    pub library: &'a Library,
    /// (description, program text) pairs, already ordered by the caller.
    pub exemplars: Vec<(String, String)>,
    pub target_description: &'a str,
    pub token_budget: usize,
    pub estimator: TokenEstimator,
}

impl<'a> PromptSpec<'a> {
    pub fn new(
        header: &'a str,
        library: &'a Library,
        target_description: &'a str,
        token_budget: usize,
    ) -> Self {
        PromptSpec {
            header,
            library,
            exemplars: Vec::new(),
            target_description,
            token_budget,
            estimator: estimate_tokens,
        }
    }

    pub fn with_exemplars(mut self, exemplars: Vec<(String, String)>) -> Self {
        self.exemplars = exemplars;
        self
    }
}

/// A rendered prompt plus the bookkeeping callers need for token accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltPrompt {
    pub text: String,
    /// How many exemplars made it into the prompt (a prefix of the input).
    pub exemplars_used: usize,
    pub prompt_tokens: usize,
}

/// One line per production: an optional `{- doc -}` comment line, then
/// `name :: type`. Learned abstractions follow the primitives and show their
/// readable name once documented.
pub fn render_library_block(lib: &Library) -> String {
    let mut out = String::new();
    for prim in &lib.primitives {
        if let Some(doc) = &prim.doc {
            out.push_str("{- ");
            out.push_str(doc);
            out.push_str(" -}\n");
        }
        out.push_str(&prim.name);
        out.push_str(" :: ");
        out.push_str(&prim.ty.to_string());
        out.push('\n');
    }
    for abs in &lib.abstractions {
        if let Some(doc) = &abs.doc {
            out.push_str("{- ");
            out.push_str(doc);
            out.push_str(" -}\n");
        }
        out.push_str(abs.display_name());
        out.push_str(" :: ");
        out.push_str(&abs.ty.to_string());
        out.push('\n');
    }
    out
}

fn render_exemplar(description: &str, program: &str) -> String {
    format!("-- {description}\n{program}\n\n")
}

/// Estimated cost of one exemplar block as it appears in the prompt.
pub fn exemplar_tokens(description: &str, program: &str, est: TokenEstimator) -> usize {
    est(&render_exemplar(description, program))
}

/// Renders the prompt. Exemplars are appended in order while the estimate
/// stays within budget; the rest are dropped. Fails only when the scaffold
/// alone (header, library, target line) exceeds the budget.
pub fn build_prompt(spec: &PromptSpec) -> Result<BuiltPrompt, PromptError> {
    let est = spec.estimator;
    let mut scaffold = String::new();
    scaffold.push_str(spec.header);
    scaffold.push_str("\n\n");
    scaffold.push_str(&render_library_block(spec.library));
    scaffold.push('\n');
    let target_line = format!("-- {}", spec.target_description);

    let base = est(&scaffold) + est(&target_line);
    if base > spec.token_budget {
        return Err(PromptError::BudgetExceeded {
            needed: base,
            budget: spec.token_budget,
        });
    }

    let mut text = scaffold;
    let mut used = 0;
    let mut spent = base;
    for (description, program) in &spec.exemplars {
        let block = render_exemplar(description, program);
        let cost = est(&block);
        if spent + cost > spec.token_budget {
            break;
        }
        text.push_str(&block);
        spent += cost;
        used += 1;
    }
    text.push_str(&target_line);

    let prompt_tokens = est(&text);
    Ok(BuiltPrompt {
        text,
        exemplars_used: used,
        prompt_tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use liblearn_core::domains::stringrw;

    fn lib() -> Library {
        stringrw::library()
    }

    #[test]
    fn estimator_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abc"), 1);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn empty_exemplars_render_header_library_target_only() {
        let lib = lib();
        let spec = PromptSpec::new("Rewrite strings.", &lib, "replace vowels with x", 100_000);
        let built = build_prompt(&spec).unwrap();
        assert!(built.text.starts_with("Rewrite strings.\n\n"));
        assert!(built.text.ends_with("-- replace vowels with x"));
        assert_eq!(built.exemplars_used, 0);
        assert!(built.text.contains("regex_split :: tsubstr -> tfullstr -> list(tsubstr)"));
    }

    #[test]
    fn exemplars_render_as_description_program_pairs() {
        let lib = lib();
        let spec = PromptSpec::new("Rewrite strings.", &lib, "target", 100_000).with_exemplars(vec![
            ("first".into(), "(lambda $0)".into()),
            ("second".into(), "(lambda (regex_tail $0))".into()),
        ]);
        let built = build_prompt(&spec).unwrap();
        assert!(built
            .text
            .contains("-- first\n(lambda $0)\n\n-- second\n(lambda (regex_tail $0))\n\n-- target"));
        assert_eq!(built.exemplars_used, 2);
    }

    #[test]
    fn prompt_is_byte_stable() {
        let lib = lib();
        let spec = || {
            PromptSpec::new("Rewrite strings.", &lib, "target", 100_000)
                .with_exemplars(vec![("first".into(), "(lambda $0)".into())])
        };
        assert_eq!(build_prompt(&spec()).unwrap(), build_prompt(&spec()).unwrap());
    }

    #[test]
    fn overlong_exemplars_are_dropped_not_fatal() {
        let lib = lib();
        let scaffold_only = build_prompt(&PromptSpec::new("H", &lib, "t", 100_000))
            .unwrap()
            .prompt_tokens;
        let spec = PromptSpec::new("H", &lib, "t", scaffold_only + 3).with_exemplars(vec![(
            "very long description".into(),
            "(lambda (regex_tail (regex_tail $0)))".into(),
        )]);
        let built = build_prompt(&spec).unwrap();
        assert_eq!(built.exemplars_used, 0);
        assert!(built.prompt_tokens <= scaffold_only + 3);
    }

    #[test]
    fn scaffold_overflow_is_an_error() {
        let lib = lib();
        let err = build_prompt(&PromptSpec::new("header", &lib, "target", 5)).unwrap_err();
        assert!(matches!(err, PromptError::BudgetExceeded { budget: 5, .. }));
    }

    #[test]
    fn documented_abstraction_shows_readable_name_and_doc() {
        let mut lib = lib();
        let body = stringrw::vowel_expr();
        lib.register_abstractions(&[body]).unwrap();
        lib.rename_abstraction("fn_0", "vowel_regex").unwrap();
        lib.abstraction_mut("vowel_regex").unwrap().doc = Some("Matches any single vowel.".into());
        let block = render_library_block(&lib);
        assert!(block.contains("{- Matches any single vowel. -}\nvowel_regex :: tsubstr\n"));
        assert!(!block.contains("fn_0"));
    }

    #[test]
    fn custom_estimator_is_honored() {
        fn one_token_per_char(s: &str) -> usize {
            s.chars().count()
        }
        let lib = lib();
        let mut spec = PromptSpec::new("H", &lib, "t", 1_000_000);
        spec.estimator = one_token_per_char;
        let built = build_prompt(&spec).unwrap();
        assert_eq!(built.prompt_tokens, built.text.chars().count());
    }
}
