//! LLM-guided synthesis for the library learning loop: prompt construction,
//! few-shot exemplar selection, completion verification, usage accounting,
//! and automatic naming/documentation of learned abstractions. Backends are
//! pluggable; the deterministic scripted backend drives all tests.

pub mod autodoc;
pub mod backend;
pub mod prompt;
pub mod select;
pub mod solve;

pub use autodoc::{
    document_library, parse_autodoc_json, rename_everywhere, AutoDocConfig, AutoDocOutcome,
    AutoDocResponse, MalformedResponse,
};
pub use backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResponse, HttpBackend,
    HttpConfig, PayloadStyle, ScriptedBackend,
};
pub use prompt::{
    build_prompt, estimate_tokens, render_library_block, BuiltPrompt, PromptError, PromptSpec,
};
pub use select::{select_examples, Embeddings, SelectionStrategy};
pub use solve::{
    solve_with_llm, BackendKind, LlmBackendConfig, QueryUsage, SolveOutcome, TaskSolutions,
    UsageLedger,
};
