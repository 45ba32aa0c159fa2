//! DOT export of a library's invocation structure. An edge f2 -> f1 means
//! f2's body invokes f1; up to three solved tasks illustrate each
//! abstraction. Output is deterministic and layout-independent.

use std::collections::BTreeSet;

use liblearn_core::expr::Expr;
use liblearn_core::library::Library;

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

const TASKS_PER_ABSTRACTION: usize = 3;

pub fn export_graph(lib: &Library, solutions: &[(String, Expr)]) -> String {
    let mut out = String::from("digraph library {\n  rankdir=LR;\n");
    for prim in &lib.primitives {
        out.push_str(&format!("  {} [shape=box];\n", quote(&prim.name)));
    }
    for abs in &lib.abstractions {
        out.push_str(&format!(
            "  {} [shape=ellipse, label=\"{} :: {}\"];\n",
            quote(abs.display_name()),
            abs.display_name(),
            abs.ty,
        ));
    }

    // Literal primitives can appear in bodies without being registered;
    // edges only point at known names so the graph stays closed.
    let known: BTreeSet<&str> = lib
        .primitives
        .iter()
        .map(|p| p.name.as_str())
        .chain(lib.abstractions.iter().map(|a| a.display_name()))
        .collect();

    for abs in &lib.abstractions {
        let refs: BTreeSet<String> = abs.body.referenced_prims().into_iter().collect();
        for name in refs {
            if known.contains(name.as_str()) {
                out.push_str(&format!(
                    "  {} -> {};\n",
                    quote(abs.display_name()),
                    quote(&name)
                ));
            }
        }
    }

    let mut task_nodes = BTreeSet::new();
    let mut task_edges = Vec::new();
    for abs in &lib.abstractions {
        let mut users: Vec<&str> = solutions
            .iter()
            .filter(|(_, program)| {
                program
                    .referenced_prims()
                    .iter()
                    .any(|n| n == abs.display_name())
            })
            .map(|(task_id, _)| task_id.as_str())
            .collect();
        users.sort_unstable();
        users.dedup();
        for task_id in users.into_iter().take(TASKS_PER_ABSTRACTION) {
            task_nodes.insert(task_id.to_owned());
            task_edges.push(format!(
                "  {} -> {};\n",
                quote(task_id),
                quote(abs.display_name())
            ));
        }
    }
    for task_id in &task_nodes {
        out.push_str(&format!("  {} [shape=note];\n", quote(task_id)));
    }
    for edge in task_edges {
        out.push_str(&edge);
    }

    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use liblearn_core::domains::load_domain;
    use liblearn_core::expr;

    #[test]
    fn empty_library_is_primitives_only_with_no_edges() {
        let domain = load_domain("toylist").unwrap();
        let dot = export_graph(&domain.library, &[]);
        assert!(dot.contains("\"+\" [shape=box];"));
        assert!(!dot.contains("->"));
        assert!(!dot.contains("ellipse"));
    }

    #[test]
    fn abstraction_edges_follow_invocation_direction() {
        let domain = load_domain("toylist").unwrap();
        let mut lib = domain.library;
        let b0 = expr::parse("(lambda (+ $0 1))", &lib).unwrap();
        lib.register_abstractions(std::slice::from_ref(&b0)).unwrap();
        let b1 = expr::parse("(lambda (fn_0 (fn_0 $0)))", &lib).unwrap();
        lib.register_abstractions(std::slice::from_ref(&b1)).unwrap();

        let dot = export_graph(&lib, &[]);
        // fn_1 invokes fn_0, so the arrow runs fn_1 -> fn_0, never reversed.
        assert!(dot.contains("\"fn_1\" -> \"fn_0\";"));
        assert!(!dot.contains("\"fn_0\" -> \"fn_1\";"));
        assert!(dot.contains("\"fn_0\" -> \"+\";"));
    }

    #[test]
    fn task_examples_are_capped_at_three() {
        let domain = load_domain("toylist").unwrap();
        let mut lib = domain.library;
        let b0 = expr::parse("(lambda (+ $0 1))", &lib).unwrap();
        lib.register_abstractions(std::slice::from_ref(&b0)).unwrap();
        let program = expr::parse("(lambda (fn_0 $0))", &lib).unwrap();
        let solutions: Vec<(String, Expr)> = (0..5)
            .map(|i| (format!("task_{i}"), program.clone()))
            .collect();

        let dot = export_graph(&lib, &solutions);
        let task_edges = dot.matches("-> \"fn_0\";").count();
        // Three task arrows plus nothing else pointing at fn_0.
        assert_eq!(task_edges, 3);
        assert!(dot.contains("\"task_0\" [shape=note];"));
        assert!(!dot.contains("task_4"));
    }
}
