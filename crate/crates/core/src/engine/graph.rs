//! Support-graph structure of a nonnegative matrix: strongly connected
//! classes, condensation reachability, and class periods.

/// Strongly connected components of the directed graph `edges[i][j] != 0`,
/// returned in a deterministic order (by smallest member state).
pub fn strongly_connected_classes(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    // Iterative Tarjan.
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut classes: Vec<Vec<usize>> = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // Frame: (node, next neighbor to try)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            let mut advanced = false;
            while *next < n {
                let w = *next;
                *next += 1;
                if !adj[v][w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut class = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    class.push(w);
                    if w == v {
                        break;
                    }
                }
                class.sort_unstable();
                classes.push(class);
            }
        }
    }
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Condensation bookkeeping for a kernel support graph.
pub struct Condensation {
    /// Classes, each a sorted list of states.
    pub classes: Vec<Vec<usize>>,
    /// Class id of each state.
    pub class_of: Vec<usize>,
    /// reachable[c] = set of class ids reachable from class c (including c).
    pub reachable: Vec<Vec<usize>>,
}

pub fn condense(adj: &[Vec<bool>]) -> Condensation {
    let n = adj.len();
    let classes = strongly_connected_classes(adj);
    let mut class_of = vec![0usize; n];
    for (c, class) in classes.iter().enumerate() {
        for &s in class {
            class_of[s] = c;
        }
    }
    let k = classes.len();
    let mut dag = vec![vec![false; k]; k];
    for (i, row) in adj.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            if e {
                dag[class_of[i]][class_of[j]] = true;
            }
        }
    }
    // Transitive closure over the class DAG (k is small).
    let mut reach = vec![vec![false; k]; k];
    for c in 0..k {
        reach[c][c] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..k {
            for b in 0..k {
                if dag[a][b] && !reach[a][b] {
                    reach[a][b] = true;
                    changed = true;
                }
                if reach[a][b] {
                    for t in 0..k {
                        if reach[b][t] && !reach[a][t] {
                            reach[a][t] = true;
                            changed = true;
                        }
                    }
                }
            }
        }
    }
    let reachable = reach
        .into_iter()
        .map(|row| row.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect())
        .collect();
    Condensation { classes, class_of, reachable }
}

/// A class is terminal when no edge leaves it.
pub fn is_terminal(cond: &Condensation, adj: &[Vec<bool>], class_id: usize) -> bool {
    cond.classes[class_id]
        .iter()
        .all(|&i| adj[i].iter().enumerate().all(|(j, &e)| !e || cond.class_of[j] == class_id))
}

/// Period of a strongly connected class: gcd over edges of
/// `level(u) + 1 - level(v)` from a BFS layering inside the class.
pub fn class_period(adj: &[Vec<bool>], class: &[usize]) -> usize {
    let root = class[0];
    let mut level = vec![i64::MIN; adj.len()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let in_class: std::collections::HashSet<usize> = class.iter().cloned().collect();
    let mut g: i64 = 0;
    while let Some(u) = queue.pop_front() {
        for (v, &e) in adj[u].iter().enumerate() {
            if !e || !in_class.contains(&v) {
                continue;
            }
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1 - level[v]).abs());
            }
        }
    }
    if g == 0 { 1 } else { g as usize }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

pub fn support_adjacency(matrix: &[Vec<f64>]) -> Vec<Vec<bool>> {
    matrix.iter().map(|row| row.iter().map(|&p| p > 0.0).collect()).collect()
}
