mod common;

use std::collections::BTreeSet;

use asmon::scenarios::LEGO_TASK;
use asmon::task::{apply_step, check_preconditions, parse_task_definition, Configuration, Predicate};
use common::proptest_config;
use proptest::prelude::*;

fn p(name: &str, args: &[&str]) -> Predicate {
    Predicate::new(name, args)
}

#[test]
fn mount_step_moves_e4_onto_the_model() {
    let task = parse_task_definition(LEGO_TASK).unwrap();
    let (_, step) = task.step_by_name("Mount element E4 on E3").unwrap();
    let mut c = Configuration::new();
    for q in [
        p("do_contain", &["T_in", "E4"]),
        p("is_accessible", &["E3"]),
        p("is_free", &["E3"]),
        p("is_mounted", &["E1"]),
        p("do_contain", &["T_in", "E5"]),
    ] {
        c.insert(q);
    }
    assert!(check_preconditions(&c, step));
    let next = apply_step(&c, step).unwrap();
    let expected: BTreeSet<Predicate> = [
        p("is_accessible", &["E3"]),
        p("is_mounted", &["E1"]),
        p("do_contain", &["T_in", "E5"]),
        p("is_mounted", &["E4"]),
    ]
    .into_iter()
    .collect();
    assert_eq!(next.predicates(), &expected);
}

#[test]
fn add_then_delete_restores_the_configuration() {
    let src = r#"
objects { element: A tray: T }
predicates { is_free/1, do_contain/2 }
steps {
  step "grab" { actions: take(A, T) pre: do_contain(T, A) add: is_free(A) }
  step "drop" { actions: put(A, T) pre: is_free(A) del: is_free(A) }
}
initial { do_contain(T, A) }
final { do_contain(T, A) }
"#;
    let task = parse_task_definition(src).unwrap();
    let mid = apply_step(&task.initial, &task.steps[0]).unwrap();
    assert_eq!(mid.len(), 2);
    assert_eq!(apply_step(&mid, &task.steps[1]).unwrap(), task.initial);
}

#[derive(Clone, Debug)]
struct RawStep {
    actions: Vec<(usize, usize, usize)>,
    pre: BTreeSet<(usize, usize, usize)>,
    add: BTreeSet<(usize, usize, usize)>,
    del: BTreeSet<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
struct RawTask {
    elements: usize,
    trays: usize,
    steps: Vec<RawStep>,
    initial: BTreeSet<(usize, usize, usize)>,
    goal: BTreeSet<(usize, usize, usize)>,
}

const SCHEMAS: [(&str, usize); 3] = [("is_free", 1), ("is_mounted", 1), ("do_contain", 2)];
const ACTIONS: [&str; 6] = ["join", "split", "mount", "remove", "put", "take"];

/// `(schema, element, tray)`; unary schemas ignore the tray.
fn atom() -> impl Strategy<Value = (usize, usize, usize)> {
    (0..SCHEMAS.len(), 0..4usize, 0..3usize).prop_map(|(s, e, t)| if SCHEMAS[s].1 == 1 { (s, e, 0) } else { (s, e, t) })
}

fn atoms() -> impl Strategy<Value = BTreeSet<(usize, usize, usize)>> {
    prop::collection::btree_set(atom(), 0..5)
}

fn raw_task() -> impl Strategy<Value = RawTask> {
    let step = (
        prop::collection::vec((0..6usize, 0..4usize, 0..3usize), 0..3),
        atoms(),
        atoms(),
        atoms(),
    )
        .prop_map(|(actions, pre, add, del)| {
            let del = del.difference(&add).copied().collect();
            RawStep { actions, pre, add, del }
        });
    (prop::collection::vec(step, 0..5), atoms(), atoms()).prop_map(|(steps, initial, goal)| RawTask {
        elements: 4,
        trays: 3,
        steps,
        initial,
        goal,
    })
}

fn element(e: usize) -> String {
    if e == 3 {
        "E0'".to_string()
    } else {
        format!("E{e}")
    }
}

fn render_atom(&(s, e, t): &(usize, usize, usize)) -> String {
    let (name, arity) = SCHEMAS[s];
    if arity == 1 {
        format!("{name}({})", element(e))
    } else {
        format!("{name}(T{t}, {})", element(e))
    }
}

fn render_set(set: &BTreeSet<(usize, usize, usize)>) -> String {
    set.iter().map(render_atom).collect::<Vec<_>>().join(", ")
}

fn render(task: &RawTask) -> String {
    let mut s = String::from("objects {\n  element: ");
    s += &(0..task.elements).map(element).collect::<Vec<_>>().join(", ");
    s += "\n  tray: ";
    s += &(0..task.trays).map(|t| format!("T{t}")).collect::<Vec<_>>().join(", ");
    s += "\n}\npredicates { is_free/1, is_mounted/1, do_contain/2 }\nsteps {\n";
    for (i, st) in task.steps.iter().enumerate() {
        s += &format!("  step \"step {i}\" {{\n");
        if !st.actions.is_empty() {
            let acts: Vec<String> = st
                .actions
                .iter()
                .map(|&(a, e, t)| format!("{}({}, T{t})", ACTIONS[a], element(e)))
                .collect();
            s += &format!("    actions: {}\n", acts.join(", "));
        }
        for (label, set) in [("pre", &st.pre), ("add", &st.add), ("del", &st.del)] {
            if !set.is_empty() {
                s += &format!("    {label}: {}\n", render_set(set));
            }
        }
        s += "  }\n";
    }
    s += &format!(
        "}}\ninitial {{ {} }}\nfinal {{ {} }}\n",
        render_set(&task.initial),
        render_set(&task.goal)
    );
    s
}

fn to_config(set: &BTreeSet<(usize, usize, usize)>) -> Configuration {
    let mut c = Configuration::new();
    for a in set {
        let text = render_atom(a);
        let (name, rest) = text.split_once('(').unwrap();
        let args: Vec<&str> = rest.trim_end_matches(')').split(", ").collect();
        c.insert(Predicate::new(name, &args));
    }
    c
}

proptest! {
    #![proptest_config(proptest_config(200))]

    #[test]
    fn canonical_text_parses_back_to_the_same_task(raw in raw_task()) {
        let task = parse_task_definition(&render(&raw)).unwrap();
        prop_assert_eq!(task.steps.len(), raw.steps.len());
        let text = task.to_canonical_string();
        let again = parse_task_definition(&text).unwrap();
        prop_assert_eq!(&again, &task);
        prop_assert_eq!(again.to_canonical_string(), text);
    }

    #[test]
    fn apply_step_is_set_difference_then_union(raw in raw_task(), start in atoms()) {
        let task = parse_task_definition(&render(&raw)).unwrap();
        let c = to_config(&start);
        for (step, raw_step) in task.steps.iter().zip(&raw.steps) {
            let holds = raw_step.pre.is_subset(&start);
            prop_assert_eq!(check_preconditions(&c, step), holds);
            match apply_step(&c, step) {
                Ok(next) => {
                    prop_assert!(holds);
                    let expected: BTreeSet<_> =
                        start.difference(&raw_step.del).chain(&raw_step.add).copied().collect();
                    prop_assert_eq!(next, to_config(&expected));
                }
                Err(_) => prop_assert!(!holds),
            }
        }
    }
}
