//! Naming and documenting learned abstractions. Abstractions are processed
//! strictly in registration order so accepted names cascade into every later
//! request; rejected or failed responses leave the anon name in place.

use liblearn_core::expr;
use liblearn_core::library::RenameError;
use liblearn_core::{Expr, Library};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;
use tracing::debug;

use crate::backend::{CompletionBackend, CompletionRequest};
use crate::prompt::render_library_block;
use crate::solve::{QueryUsage, UsageLedger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoDocConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    /// Usage examples shown per request, most compressed first.
    pub max_usages: usize,
}

impl Default for AutoDocConfig {
    fn default() -> Self {
        AutoDocConfig {
            temperature: 0.90,
            top_p: 0.10,
            max_tokens: 256,
            max_usages: 10,
        }
    }
}

/// The JSON object a documentation response must contain. A null
/// `readable_name` means the model declined to name the abstraction.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct AutoDocResponse {
    pub anonymous_name: String,
    pub readable_name: Option<String>,
    pub description: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no parseable JSON object in completion")]
pub struct MalformedResponse;

/// Extracts the first JSON object from a completion, tolerating surrounding
/// prose. Scans balanced braces with string awareness, then tries serde on
/// each candidate until one parses.
pub fn parse_autodoc_json(text: &str) -> Result<AutoDocResponse, MalformedResponse> {
    let bytes: Vec<char> = text.chars().collect();
    for start in 0..bytes.len() {
        if bytes[start] != '{' {
            continue;
        }
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (offset, &ch) in bytes[start..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == '"' {
                    in_string = false;
                }
                continue;
            }
            match ch {
                '"' => in_string = true,
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate: String = bytes[start..=start + offset].iter().collect();
                        if let Ok(parsed) = serde_json::from_str::<AutoDocResponse>(&candidate) {
                            return Ok(parsed);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    Err(MalformedResponse)
}

/// Names must be underscore-separated identifiers: letters, digits, and
/// underscores only, not starting with a digit.
fn valid_readable_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Renames an abstraction and rewrites every given program, so the old
/// display name no longer occurs anywhere. Renaming to the abstraction's own
/// anon alias returns it to the anonymous state, which makes renames
/// invertible.
pub fn rename_everywhere(
    lib: &Library,
    programs: &[Expr],
    old: &str,
    new: &str,
) -> Result<(Library, Vec<Expr>), RenameError> {
    let mut lib = lib.clone();
    let target = lib.abstraction(old).ok_or_else(|| RenameError::NotFound {
        name: old.to_owned(),
    })?;
    let old_display = target.display_name().to_owned();
    if target.anon_name == new {
        let anon = target.anon_name.clone();
        lib.abstraction_mut(old)
            .expect("abstraction was just found")
            .readable_name = None;
        for abs in &mut lib.abstractions {
            if abs.anon_name != anon {
                abs.body = abs.body.rename_prim(&old_display, new);
            }
        }
    } else {
        lib.rename_abstraction(old, new)?;
    }
    let rewritten = programs
        .iter()
        .map(|p| p.rename_prim(&old_display, new))
        .collect();
    Ok((lib, rewritten))
}

#[derive(Debug, Clone)]
pub struct AutoDocOutcome {
    pub library: Library,
    /// Accepted (anon_name, readable_name) pairs in processing order.
    pub renames: Vec<(String, String)>,
    /// Anon names that kept their placeholder (null, invalid, or failed).
    pub skipped: Vec<String>,
    /// Frontier programs rewritten under the accepted names.
    pub programs: Vec<(String, Expr)>,
    pub ledger: UsageLedger,
}

fn render_request(
    header: &str,
    lib: &Library,
    anon: &str,
    usages: &[(String, String)],
) -> String {
    let abs = lib.abstraction(anon).expect("target abstraction exists");
    let mut out = String::new();
    out.push_str(header);
    out.push_str("\n\n");
    out.push_str(&render_library_block(lib));
    out.push('\n');
    out.push_str(&format!(
        "{} :: {}\n{} = {}\n\n",
        anon,
        abs.ty,
        anon,
        expr::print_pattern(&abs.body)
    ));
    if !usages.is_empty() {
        out.push_str("Usage examples:\n");
        for (desc, prog) in usages {
            out.push_str(&format!("-- {desc}\n{prog}\n"));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "Write a human-readable name and description for {anon}. Respond with one JSON \
         object: {{\"anonymous_name\": \"{anon}\", \"readable_name\": \"...\", \
         \"description\": \"...\"}}. The readable_name must be underscore_separated and \
         contain no spaces; set it to null if no good name exists.\n-- {anon}"
    ));
    out
}

/// Usage examples for `anon`: programs referencing it, smallest first.
fn usage_examples(
    programs: &[(String, Expr)],
    anon: &str,
    cap: usize,
) -> Vec<(String, String)> {
    let mut hits: Vec<(usize, &(String, Expr))> = programs
        .iter()
        .filter(|(_, p)| p.referenced_prims().iter().any(|n| n == anon))
        .map(|entry| (entry.1.size(), entry))
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1 .0.cmp(&b.1 .0)));
    hits.into_iter()
        .take(cap)
        .map(|(_, (desc, prog))| (desc.clone(), expr::print_pattern(prog)))
        .collect()
}

fn request_response(
    backend: &mut dyn CompletionBackend,
    prompt: &str,
    anon: &str,
    cfg: &AutoDocConfig,
    ledger: &mut UsageLedger,
) -> Result<AutoDocResponse, ()> {
    // One request plus at most one retry, for backend errors and malformed
    // responses alike.
    for _ in 0..2 {
        let request = CompletionRequest {
            prompt: prompt.to_owned(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            n: 1,
            max_tokens: cfg.max_tokens,
            stop: None,
        };
        let start = Instant::now();
        match backend.complete(&request) {
            Err(err) => {
                debug!(%anon, %err, "documentation request failed");
                ledger.backend_failures += 1;
                ledger.record(QueryUsage {
                    task_id: anon.to_owned(),
                    prompt_tokens: crate::prompt::estimate_tokens(prompt),
                    completion_tokens: 0,
                    wall_secs: start.elapsed().as_secs_f64(),
                    ok: false,
                });
            }
            Ok(resp) => {
                ledger.record(QueryUsage {
                    task_id: anon.to_owned(),
                    prompt_tokens: resp.prompt_tokens,
                    completion_tokens: resp.completion_tokens,
                    wall_secs: start.elapsed().as_secs_f64(),
                    ok: true,
                });
                match resp.texts.first().map(|t| parse_autodoc_json(t)) {
                    Some(Ok(parsed)) => return Ok(parsed),
                    _ => {
                        debug!(%anon, "documentation response had no parseable object");
                        ledger.parse_failures += 1;
                    }
                }
            }
        }
    }
    Err(())
}

/// Documents every still-anonymous abstraction. When `reuse_from` holds a
/// previously documented library, byte-identical bodies adopt their old name
/// and doc without a backend request.
pub fn document_library(
    backend: &mut dyn CompletionBackend,
    lib: &Library,
    header: &str,
    frontier_programs: &[(String, Expr)],
    reuse_from: Option<&Library>,
    cfg: &AutoDocConfig,
) -> AutoDocOutcome {
    let mut library = lib.clone();
    let mut programs: Vec<(String, Expr)> = frontier_programs.to_vec();
    let mut renames = Vec::new();
    let mut skipped = Vec::new();
    let mut ledger = UsageLedger::default();

    let pending: Vec<String> = library
        .abstractions
        .iter()
        .filter(|a| a.readable_name.is_none())
        .map(|a| a.anon_name.clone())
        .collect();

    for anon in pending {
        let body_print = {
            let abs = library.abstraction(&anon).expect("pending abstraction exists");
            expr::print_pattern(&abs.body)
        };
        if let Some(prior) = reuse_from {
            let recycled = prior.abstractions.iter().find(|a| {
                a.readable_name.is_some() && expr::print_pattern(&a.body) == body_print
            });
            if let Some(prior_abs) = recycled {
                let name = prior_abs.readable_name.clone().expect("filtered on Some");
                if !library.has_name(&name) {
                    let doc = prior_abs.doc.clone();
                    apply_accepted(&mut library, &mut programs, &anon, &name, doc);
                    renames.push((anon.clone(), name));
                    continue;
                }
            }
        }

        let usages = usage_examples(&programs, &anon, cfg.max_usages);
        let prompt = render_request(header, &library, &anon, &usages);
        let Ok(response) = request_response(backend, &prompt, &anon, cfg, &mut ledger) else {
            skipped.push(anon);
            continue;
        };

        let doc = (!response.description.trim().is_empty())
            .then(|| response.description.trim().to_owned());
        match response.readable_name {
            None => {
                if let Some(doc) = doc {
                    library
                        .abstraction_mut(&anon)
                        .expect("pending abstraction exists")
                        .doc = Some(doc);
                }
                skipped.push(anon);
            }
            Some(name) => {
                if !valid_readable_name(&name) {
                    debug!(%anon, %name, "rejected readable name");
                    if let Some(doc) = doc {
                        library
                            .abstraction_mut(&anon)
                            .expect("pending abstraction exists")
                            .doc = Some(doc);
                    }
                    skipped.push(anon);
                    continue;
                }
                match library.rename_abstraction(&anon, &name) {
                    Ok(()) => {
                        for (_, p) in programs.iter_mut() {
                            *p = p.rename_prim(&anon, &name);
                        }
                        if let Some(doc) = doc {
                            library
                                .abstraction_mut(&name)
                                .expect("abstraction was just renamed")
                                .doc = Some(doc);
                        }
                        renames.push((anon.clone(), name));
                    }
                    Err(err) => {
                        debug!(%anon, %name, %err, "rename rejected");
                        if let Some(doc) = doc {
                            library
                                .abstraction_mut(&anon)
                                .expect("pending abstraction exists")
                                .doc = Some(doc);
                        }
                        skipped.push(anon);
                    }
                }
            }
        }
    }

    AutoDocOutcome {
        library,
        renames,
        skipped,
        programs,
        ledger,
    }
}

fn apply_accepted(
    library: &mut Library,
    programs: &mut [(String, Expr)],
    anon: &str,
    name: &str,
    doc: Option<String>,
) {
    library
        .rename_abstraction(anon, name)
        .expect("reuse name was checked for collisions");
    for (_, p) in programs.iter_mut() {
        *p = p.rename_prim(anon, name);
    }
    if let Some(doc) = doc {
        library
            .abstraction_mut(name)
            .expect("abstraction was just renamed")
            .doc = Some(doc);
    }
}
