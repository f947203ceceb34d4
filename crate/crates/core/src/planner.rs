//! State-graph generation.
//!
//! The graph is the breadth-first closure of applicable steps from the
//! initial configuration, pruned to the nodes that lie on some path from the
//! initial to the final configuration. The final configuration is absorbing:
//! its outgoing edges are dropped before pruning.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write;

use thiserror::Error;

use crate::task::{apply_step, check_preconditions, Configuration, StepId, TaskDefinition};

pub const DEFAULT_NODE_CAP: usize = 100_000;
pub const DEFAULT_STAY_PROB: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(
        "final configuration is not reachable from the initial configuration ({explored} configurations explored)"
    )]
    UnreachableGoal { explored: usize },
    #[error("state space exceeds the node cap of {cap}")]
    NodeCapExceeded { cap: usize },
    #[error("stay probability must lie in (0, 1), got {0}")]
    InvalidStayProb(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub step: StepId,
    pub to: usize,
}

/// Directed graph of configurations. Node 0 is the initial configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGraph {
    pub nodes: Vec<Configuration>,
    /// Sorted by `(from, to, step)`.
    pub edges: Vec<Edge>,
    pub final_index: usize,
}

impl StateGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Outgoing edges of `node`, ordered by target index then step id.
    pub fn out_edges(&self, node: usize) -> &[Edge] {
        let lo = self.edges.partition_point(|e| e.from < node);
        let hi = self.edges.partition_point(|e| e.from <= node);
        &self.edges[lo..hi]
    }

    /// Distinct successor indices of `node`, ascending, excluding `node` itself.
    pub fn successors(&self, node: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .out_edges(node)
            .iter()
            .map(|e| e.to)
            .filter(|&t| t != node)
            .collect();
        out.dedup();
        out
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.nodes.iter().position(|c| c == config)
    }

    /// Graphviz rendering. Nodes are labelled with their index and digest,
    /// edges with the step name.
    pub fn to_dot(&self, task: &TaskDefinition) -> String {
        let mut out = String::from("digraph states {\n  rankdir=LR;\n");
        for (i, c) in self.nodes.iter().enumerate() {
            let shape = if i == self.final_index {
                "doublecircle"
            } else if i == 0 {
                "box"
            } else {
                "ellipse"
            };
            let _ = writeln!(out, "  n{i} [label=\"{i}\\n{:016x}\", shape={shape}];", c.digest());
        }
        for e in &self.edges {
            let label = task.steps[e.step].name.replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  n{} -> n{} [label=\"{label}\"];", e.from, e.to);
        }
        out.push_str("}\n");
        out
    }

    /// Plain-text listing of every node's predicate set and outgoing steps.
    pub fn to_text_dump(&self, task: &TaskDefinition) -> String {
        let mut out = String::new();
        for (i, c) in self.nodes.iter().enumerate() {
            let tag = match (i == 0, i == self.final_index) {
                (true, true) => " [initial, final]",
                (true, false) => " [initial]",
                (false, true) => " [final]",
                _ => "",
            };
            let _ = writeln!(out, "node {i}{tag} digest={:016x}", c.digest());
            for p in c.iter() {
                let _ = writeln!(out, "  {p}");
            }
            for e in self.out_edges(i) {
                let _ = writeln!(out, "  -> {} via \"{}\"", e.to, task.steps[e.step].name);
            }
        }
        out
    }
}

/// Builds the pruned state graph with the default node cap.
pub fn build_state_graph(task: &TaskDefinition) -> Result<StateGraph, PlanError> {
    build_state_graph_with_cap(task, DEFAULT_NODE_CAP)
}

pub fn build_state_graph_with_cap(task: &TaskDefinition, node_cap: usize) -> Result<StateGraph, PlanError> {
    let (nodes, edges) = explore(task, node_cap)?;
    let Some(final_index) = nodes.iter().position(|c| *c == task.goal) else {
        return Err(PlanError::UnreachableGoal { explored: nodes.len() });
    };
    Ok(prune(nodes, edges, final_index))
}

/// Unpruned breadth-first closure. Nodes are numbered in discovery order and
/// steps are tried in declaration order. Self-loops are not recorded.
pub(crate) fn explore(task: &TaskDefinition, node_cap: usize) -> Result<(Vec<Configuration>, Vec<Edge>), PlanError> {
    let mut nodes = vec![task.initial.clone()];
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    index.insert(task.initial.clone(), 0);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);

    while let Some(from) = queue.pop_front() {
        // The goal is absorbing, nothing beyond it is part of a plan.
        if nodes[from] == task.goal {
            continue;
        }
        for (step_id, step) in task.steps.iter().enumerate() {
            if !check_preconditions(&nodes[from], step) {
                continue;
            }
            let next = apply_step(&nodes[from], step).expect("preconditions checked");
            let to = match index.get(&next) {
                Some(&i) => i,
                None => {
                    if nodes.len() >= node_cap {
                        return Err(PlanError::NodeCapExceeded { cap: node_cap });
                    }
                    let i = nodes.len();
                    index.insert(next.clone(), i);
                    nodes.push(next);
                    queue.push_back(i);
                    i
                }
            };
            if to != from {
                edges.push(Edge {
                    from,
                    step: step_id,
                    to,
                });
            }
        }
    }
    Ok((nodes, edges))
}

fn prune(nodes: Vec<Configuration>, edges: Vec<Edge>, final_index: usize) -> StateGraph {
    let n = nodes.len();
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for e in &edges {
        fwd[e.from].push(e.to);
        bwd[e.to].push(e.from);
    }
    let reach = |adj: &[Vec<usize>], start: usize| {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    let from_init = reach(&fwd, 0);
    let to_final = reach(&bwd, final_index);

    let mut remap = vec![usize::MAX; n];
    let mut kept = Vec::new();
    for (i, c) in nodes.into_iter().enumerate() {
        if from_init[i] && to_final[i] {
            remap[i] = kept.len();
            kept.push(c);
        }
    }
    let mut new_edges: Vec<Edge> = edges
        .into_iter()
        .filter(|e| remap[e.from] != usize::MAX && remap[e.to] != usize::MAX)
        .map(|e| Edge {
            from: remap[e.from],
            step: e.step,
            to: remap[e.to],
        })
        .collect();
    new_edges.sort_by_key(|e| (e.from, e.to, e.step));
    new_edges.dedup();
    StateGraph {
        nodes: kept,
        edges: new_edges,
        final_index: remap[final_index],
    }
}

/// Enumerates simple paths from node 0 to the final node as step sequences,
/// in lexicographic order of their node-index sequences, up to `max_plans`.
pub fn enumerate_plans(graph: &StateGraph, max_plans: usize) -> Vec<Vec<StepId>> {
    let mut plans = Vec::new();
    if max_plans == 0 || graph.nodes.is_empty() {
        return plans;
    }
    let mut on_path = vec![false; graph.node_count()];
    let mut steps = Vec::new();
    dfs(graph, 0, &mut on_path, &mut steps, &mut plans, max_plans);
    plans
}

fn dfs(
    graph: &StateGraph,
    node: usize,
    on_path: &mut [bool],
    steps: &mut Vec<StepId>,
    plans: &mut Vec<Vec<StepId>>,
    max_plans: usize,
) {
    if node == graph.final_index {
        plans.push(steps.clone());
        return;
    }
    on_path[node] = true;
    for e in graph.out_edges(node) {
        if plans.len() >= max_plans {
            break;
        }
        if on_path[e.to] {
            continue;
        }
        steps.push(e.step);
        dfs(graph, e.to, on_path, steps, plans, max_plans);
        steps.pop();
    }
    on_path[node] = false;
}

/// Row-stochastic transition matrix over graph nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    probs: Vec<f64>,
    pub stay_prob: f64,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from * self.n..(from + 1) * self.n]
    }
}

/// Self-loop `stay_prob` on every non-final node, the remainder split evenly
/// over distinct successors. The final node keeps all of its mass.
pub fn transition_matrix(graph: &StateGraph, stay_prob: f64) -> Result<TransitionMatrix, PlanError> {
    if !(stay_prob > 0.0 && stay_prob < 1.0) {
        return Err(PlanError::InvalidStayProb(stay_prob));
    }
    let n = graph.node_count();
    let mut probs = vec![0.0; n * n];
    for i in 0..n {
        let succ = graph.successors(i);
        if i == graph.final_index || succ.is_empty() {
            probs[i * n + i] = 1.0;
            continue;
        }
        probs[i * n + i] = stay_prob;
        let share = (1.0 - stay_prob) / succ.len() as f64;
        for j in succ {
            probs[i * n + j] = share;
        }
    }
    Ok(TransitionMatrix { n, probs, stay_prob })
}
