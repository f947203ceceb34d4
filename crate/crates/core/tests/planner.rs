mod common;

use std::collections::BTreeSet;

use asmon::planner::{build_state_graph, enumerate_plans, transition_matrix};
use asmon::task::{apply_step, check_preconditions, parse_task_definition, Configuration, TaskDefinition};
use common::{lego, proptest_config, DIAMOND};
use proptest::prelude::*;

/// Every step sequence that reaches the goal from the initial configuration
/// without repeating a configuration, found by searching configurations
/// directly.
fn dfs_plans(task: &TaskDefinition) -> BTreeSet<Vec<usize>> {
    fn go(
        task: &TaskDefinition,
        c: &Configuration,
        seen: &mut Vec<Configuration>,
        steps: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if *c == task.goal {
            out.insert(steps.clone());
            return;
        }
        for (i, s) in task.steps.iter().enumerate() {
            if !check_preconditions(c, s) {
                continue;
            }
            let next = apply_step(c, s).unwrap();
            if seen.contains(&next) {
                continue;
            }
            seen.push(next.clone());
            steps.push(i);
            go(task, &next, seen, steps, out);
            steps.pop();
            seen.pop();
        }
    }
    let mut out = BTreeSet::new();
    go(
        task,
        &task.initial,
        &mut vec![task.initial.clone()],
        &mut Vec::new(),
        &mut out,
    );
    out
}

#[test]
fn degenerate_task_is_a_single_node() {
    let src = "objects { element: A tray: T }\npredicates { is_free/1 }\nsteps { }\ninitial { is_free(A) }\nfinal { is_free(A) }\n";
    let task = parse_task_definition(src).unwrap();
    let g = build_state_graph(&task).unwrap();
    assert_eq!((g.node_count(), g.edges.len(), g.final_index), (1, 0, 0));
    assert_eq!(enumerate_plans(&g, 10), vec![Vec::<usize>::new()]);
    let m = transition_matrix(&g, 0.8).unwrap();
    assert_eq!(m.get(0, 0), 1.0);
}

#[test]
fn diamond_has_two_plans() {
    let task = parse_task_definition(DIAMOND).unwrap();
    let g = build_state_graph(&task).unwrap();
    assert_eq!((g.node_count(), g.edges.len()), (4, 4));
    let plans: BTreeSet<Vec<usize>> = enumerate_plans(&g, 10).into_iter().collect();
    assert_eq!(plans, BTreeSet::from([vec![0, 3], vec![1, 2]]));
    let m = transition_matrix(&g, 0.8).unwrap();
    let row: Vec<f64> = m.row(0).to_vec();
    assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 3);
    assert!((row[0] - 0.8).abs() < 1e-15);
    assert!(row[1..].iter().all(|&x| x == 0.0 || (x - 0.1).abs() < 1e-15));
}

#[test]
fn lego_plans_equal_a_configuration_search() {
    let l = lego();
    let from_graph: BTreeSet<Vec<usize>> = enumerate_plans(&l.graph, usize::MAX).into_iter().collect();
    assert_eq!(from_graph, dfs_plans(&l.task));
}

#[test]
fn lego_graph_is_pruned_and_reproducible() {
    let l = lego();
    let g = &l.graph;
    assert_eq!(build_state_graph(&l.task).unwrap(), *g);
    // Every node lies on a path from the root to the final node.
    let n = g.node_count();
    let mut forward = vec![false; n];
    let mut stack = vec![0];
    while let Some(x) = stack.pop() {
        if !std::mem::replace(&mut forward[x], true) {
            stack.extend(g.successors(x));
        }
    }
    let mut backward = vec![false; n];
    let mut stack = vec![g.final_index];
    while let Some(x) = stack.pop() {
        if !std::mem::replace(&mut backward[x], true) {
            stack.extend(g.edges.iter().filter(|e| e.to == x).map(|e| e.from));
        }
    }
    assert!(forward.iter().all(|&f| f));
    assert!(backward.iter().all(|&b| b));
    for e in &g.edges {
        assert_eq!(
            apply_step(&g.nodes[e.from], &l.task.steps[e.step]).unwrap(),
            g.nodes[e.to]
        );
    }
}

proptest! {
    #![proptest_config(proptest_config(200))]

    #[test]
    fn transition_rows_are_stochastic(stay in 0.0f64..1.0) {
        let l = lego();
        let m = transition_matrix(&l.graph, stay).unwrap();
        for x in 0..m.size() {
            let row = m.row(x);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            let succ: BTreeSet<usize> = l.graph.successors(x).into_iter().collect();
            if x == l.graph.final_index {
                prop_assert_eq!(row[x], 1.0);
            } else {
                prop_assert_eq!(row[x], stay);
                for (y, &v) in row.iter().enumerate() {
                    if y != x {
                        let expected = if succ.contains(&y) { (1.0 - stay) / succ.len() as f64 } else { 0.0 };
                        prop_assert!((v - expected).abs() < 1e-15);
                    }
                }
            }
        }
    }
}
