use std::collections::BTreeSet;
use std::fmt::Write;

use super::{ObjectKind, Predicate, TaskDefinition};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn inline<'a, I: IntoIterator<Item = &'a Predicate>>(preds: I) -> String {
    preds
        .into_iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn block(out: &mut String, header: &str, preds: &BTreeSet<Predicate>) {
    let _ = writeln!(out, "{header} {{");
    let n = preds.len();
    for (i, p) in preds.iter().enumerate() {
        let sep = if i + 1 < n { "," } else { "" };
        let _ = writeln!(out, "  {p}{sep}");
    }
    out.push_str("}\n");
}

pub(super) fn write_canonical(task: &TaskDefinition) -> String {
    let mut out = String::new();

    out.push_str("objects {\n");
    // Runs of the same kind share a line; declaration order is preserved
    // because element order defines class ids.
    for run in task.objects.chunk_by(|a, b| a.kind == b.kind) {
        let label = match run[0].kind {
            ObjectKind::Element => "element",
            ObjectKind::Tray => "tray",
        };
        let names: Vec<&str> = run.iter().map(|o| o.name.as_str()).collect();
        let _ = writeln!(out, "  {label}: {}", names.join(", "));
    }
    out.push_str("}\n\n");

    out.push_str("predicates {\n");
    if !task.predicate_schemas.is_empty() {
        let schemas: Vec<String> = task
            .predicate_schemas
            .iter()
            .map(|s| format!("{}/{}", s.name, s.arity))
            .collect();
        let _ = writeln!(out, "  {}", schemas.join(", "));
    }
    out.push_str("}\n\n");

    out.push_str("steps {\n");
    for (i, step) in task.steps.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "  step {} {{", quote(&step.name));
        if !step.actions.is_empty() {
            let actions: Vec<String> = step.actions.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "    actions: {}", actions.join(", "));
        }
        for (label, set) in [
            ("pre", &step.preconditions),
            ("add", &step.add_effects),
            ("del", &step.del_effects),
        ] {
            if !set.is_empty() {
                let _ = writeln!(out, "    {label}: {}", inline(set));
            }
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n\n");

    block(&mut out, "initial", task.initial.predicates());
    out.push('\n');
    block(&mut out, "final", task.goal.predicates());
    out
}
