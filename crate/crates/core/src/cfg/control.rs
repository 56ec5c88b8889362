//! Post-dominators and control dependence.

use std::collections::BTreeSet;

use super::lower::{BlockId, Body, Term};

/// Immediate post-dominator of each block; the exit maps to itself.
pub fn ipdom(body: &Body) -> Vec<BlockId> {
    let n = body.blocks.len();
    let exit = body.exit();
    // Reverse post-order on the reversed graph starting at the exit.
    let preds = body.preds();
    let mut order = Vec::new();
    let mut seen = vec![false; n];
    fn dfs(b: BlockId, preds: &[Vec<BlockId>], seen: &mut [bool], order: &mut Vec<BlockId>) {
        seen[b] = true;
        for &p in &preds[b] {
            if !seen[p] {
                dfs(p, preds, seen, order);
            }
        }
        order.push(b);
    }
    dfs(exit, &preds, &mut seen, &mut order);
    order.reverse();
    let mut rank = vec![usize::MAX; n];
    for (i, &b) in order.iter().enumerate() {
        rank[b] = i;
    }
    let mut idom = vec![usize::MAX; n];
    idom[exit] = exit;
    let intersect = |idom: &[BlockId], mut a: BlockId, mut b: BlockId| {
        while a != b {
            while rank[a] > rank[b] {
                a = idom[a];
            }
            while rank[b] > rank[a] {
                b = idom[b];
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().skip(1) {
            let mut new = usize::MAX;
            for s in body.blocks[b].term.succs() {
                if idom[s] == usize::MAX {
                    continue;
                }
                new = if new == usize::MAX { s } else { intersect(&idom, s, new) };
            }
            if new != usize::MAX && idom[b] != new {
                idom[b] = new;
                changed = true;
            }
        }
    }
    idom
}

/// For each block, the switch blocks it is control dependent on.
pub fn control_deps(body: &Body) -> Vec<BTreeSet<BlockId>> {
    let ip = ipdom(body);
    let mut deps = vec![BTreeSet::new(); body.blocks.len()];
    for (x, b) in body.blocks.iter().enumerate() {
        if !matches!(b.term, Term::Switch { .. }) || ip[x] == usize::MAX {
            continue;
        }
        for z in b.term.succs() {
            let mut y = z;
            while y != ip[x] && y != usize::MAX {
                deps[y].insert(x);
                if ip[y] == y {
                    break;
                }
                y = ip[y];
            }
        }
    }
    deps
}
