//! Fill-reducing ordering by nested dissection with BFS level-set separators.

use super::CsrMatrix;

const LEAF_SIZE: usize = 64;

/// Returns `perm` with `perm[new] = old`.
///
/// The separator at each level is the part of the middle level of a
/// breadth-first level structure (rooted at a pseudo-peripheral node) that
/// touches the next level, so the two halves share no edge. Works on the
/// (symmetrized) sparsity pattern only.
pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj = symmetric_adjacency(a);
    let mut label = vec![0usize; n];
    let mut next_label = 1usize;
    let mut out = Vec::with_capacity(n);
    let mut scratch = Scratch { level: vec![usize::MAX; n], queue: Vec::new() };
    let nodes: Vec<usize> = (0..n).collect();
    dissect(&adj, nodes, 0, &mut label, &mut next_label, &mut out, &mut scratch);
    debug_assert_eq!(out.len(), n);
    out
}

struct Adjacency {
    ptr: Vec<usize>,
    idx: Vec<usize>,
}

impl Adjacency {
    fn neighbors(&self, v: usize) -> &[usize] {
        &self.idx[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Scratch {
    level: Vec<usize>,
    queue: Vec<usize>,
}

fn symmetric_adjacency(a: &CsrMatrix) -> Adjacency {
    let n = a.nrows();
    let mut lists: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                lists[i].push(j);
                lists[j].push(i);
            }
        }
    }
    let mut ptr = vec![0];
    let mut idx = Vec::new();
    for l in &mut lists {
        l.sort_unstable();
        l.dedup();
        idx.extend_from_slice(l);
        ptr.push(idx.len());
    }
    Adjacency { ptr, idx }
}

/// BFS restricted to nodes carrying `lab`; returns the level sets.
fn level_structure(
    adj: &Adjacency,
    root: usize,
    lab: usize,
    label: &[usize],
    scratch: &mut Scratch,
) -> Vec<Vec<usize>> {
    let mut levels = vec![vec![root]];
    scratch.queue.clear();
    scratch.queue.push(root);
    scratch.level[root] = 0;
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in adj.neighbors(v) {
                if label[w] == lab && scratch.level[w] == usize::MAX {
                    scratch.level[w] = levels.len();
                    scratch.queue.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        levels.push(next);
    }
    for &v in &scratch.queue {
        scratch.level[v] = usize::MAX;
    }
    levels
}

fn dissect(
    adj: &Adjacency,
    nodes: Vec<usize>,
    lab: usize,
    label: &mut Vec<usize>,
    next_label: &mut usize,
    out: &mut Vec<usize>,
    scratch: &mut Scratch,
) {
    if nodes.len() <= LEAF_SIZE {
        out.extend(nodes);
        return;
    }

    let mut levels = level_structure(adj, nodes[0], lab, label, scratch);
    let reached: usize = levels.iter().map(Vec::len).sum();
    if reached < nodes.len() {
        // Disconnected: peel off the component just found and treat the rest separately.
        let comp: Vec<usize> = levels.into_iter().flatten().collect();
        let comp_label = fresh(next_label);
        for &v in &comp {
            label[v] = comp_label;
        }
        let rest: Vec<usize> = nodes.into_iter().filter(|&v| label[v] == lab).collect();
        dissect(adj, comp, comp_label, label, next_label, out, scratch);
        dissect(adj, rest, lab, label, next_label, out, scratch);
        return;
    }

    // Pseudo-peripheral root: restart from a minimum-degree node of the last level
    // while the eccentricity keeps growing.
    for _ in 0..4 {
        let last = levels.last().unwrap();
        let cand = *last
            .iter()
            .min_by_key(|&&v| adj.neighbors(v).iter().filter(|&&w| label[w] == lab).count())
            .unwrap();
        let trial = level_structure(adj, cand, lab, label, scratch);
        if trial.len() > levels.len() {
            levels = trial;
        } else {
            break;
        }
    }

    if levels.len() < 3 {
        out.extend(nodes);
        return;
    }

    let half = nodes.len() / 2;
    let mut cum = 0;
    let mut m = 1;
    for (k, l) in levels.iter().enumerate() {
        cum += l.len();
        if cum >= half {
            m = k;
            break;
        }
    }
    let m = m.clamp(1, levels.len() - 2);

    let la = fresh(next_label);
    let lb = fresh(next_label);
    let ls = fresh(next_label);
    let mut part_a = Vec::new();
    let mut part_b = Vec::new();
    for (k, l) in levels.iter().enumerate() {
        let (target, lbl) = match k.cmp(&m) {
            std::cmp::Ordering::Less => (&mut part_a, la),
            std::cmp::Ordering::Greater => (&mut part_b, lb),
            std::cmp::Ordering::Equal => continue,
        };
        for &v in l {
            label[v] = lbl;
            target.push(v);
        }
    }
    // Only nodes of the middle level touching the far side must separate.
    let mut sep = Vec::new();
    for &v in &levels[m] {
        if adj.neighbors(v).iter().any(|&w| label[w] == lb) {
            sep.push(v);
        } else {
            part_a.push(v);
        }
    }
    for &v in &part_a {
        label[v] = la;
    }
    for &v in &sep {
        label[v] = ls;
    }
    dissect(adj, part_a, la, label, next_label, out, scratch);
    dissect(adj, part_b, lb, label, next_label, out, scratch);
    out.extend(sep);
}

fn fresh(next: &mut usize) -> usize {
    let l = *next;
    *next += 1;
    l
}
