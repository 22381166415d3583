use super::factor::Factor;
use super::{BayesNet, BbnError};
use crate::Real;

/// Refusal bound for brute-force enumeration (2^20 joint assignments).
pub const MAX_ENUMERATION_STATES: u128 = 1 << 20;

fn cpt_factor<T: Real>(net: &BayesNet<T>, i: usize) -> Factor<T> {
    let mut vars: Vec<usize> = net.parents_of(i).to_vec();
    vars.push(i);
    let cards = vars.iter().map(|&v| net.cardinality(v)).collect();
    let values = net.node(i).cpt.iter().flatten().copied().collect();
    Factor {
        vars,
        cards,
        values,
    }
}

/// Ancestral closure of the query and evidence nodes. Everything else is
/// barren and sums to one.
fn relevant<T: Real>(net: &BayesNet<T>, observed: &[Option<usize>], target: usize) -> Vec<bool> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = observed
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.map(|_| i))
        .chain(std::iter::once(target))
        .collect();
    while let Some(i) = stack.pop() {
        if keep[i] {
            continue;
        }
        keep[i] = true;
        stack.extend(net.parents_of(i).iter().copied());
    }
    keep
}

pub(super) fn hidden_variables<T: Real>(
    net: &BayesNet<T>,
    observed: &[Option<usize>],
    target: usize,
) -> Vec<usize> {
    let keep = relevant(net, observed, target);
    (0..net.len())
        .filter(|&i| keep[i] && i != target && observed[i].is_none())
        .collect()
}

/// Greedy min-degree choice: fewest distinct neighbours in the current
/// factor set, ties to the lowest index.
fn pick_min_degree<T: Real>(factors: &[Factor<T>], hidden: &[usize]) -> usize {
    let mut best = (usize::MAX, usize::MAX);
    for &v in hidden {
        let mut nbrs: Vec<usize> = factors
            .iter()
            .filter(|f| f.contains(v))
            .flat_map(|f| f.vars.iter().copied())
            .filter(|&u| u != v)
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        if (nbrs.len(), v) < best {
            best = (nbrs.len(), v);
        }
    }
    best.1
}

pub(super) fn eliminate<T: Real>(
    net: &BayesNet<T>,
    observed: &[Option<usize>],
    target: usize,
    order: Option<&[usize]>,
) -> Result<Vec<T>, BbnError> {
    let keep = relevant(net, observed, target);
    let mut factors: Vec<Factor<T>> = Vec::new();
    for (i, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
        let mut f = cpt_factor(net, i);
        for (v, o) in observed.iter().enumerate() {
            if let Some(s) = *o {
                if v != target && f.contains(v) {
                    f = f.reduce(v, s);
                }
            }
        }
        factors.push(f);
    }
    if let Some(s) = observed[target] {
        let card = net.cardinality(target);
        let mut values = vec![T::zero(); card];
        values[s] = T::one();
        factors.push(Factor {
            vars: vec![target],
            cards: vec![card],
            values,
        });
    }

    let mut hidden = hidden_variables(net, observed, target);
    if let Some(order) = order {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != hidden {
            return Err(BbnError::BadEliminationOrder);
        }
    }
    let mut step = 0;
    while !hidden.is_empty() {
        let var = match order {
            Some(o) => o[step],
            None => pick_min_degree(&factors, &hidden),
        };
        step += 1;
        hidden.retain(|&v| v != var);
        let (with, without): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.contains(var));
        factors = without;
        let merged = with
            .iter()
            .fold(Factor::scalar(T::one()), |acc, f| acc.product(f));
        factors.push(merged.sum_out(var));
    }

    let joint = factors
        .iter()
        .fold(Factor::scalar(T::one()), |acc, f| acc.product(f));
    // scope is exactly {target} after elimination
    debug_assert_eq!(joint.vars, vec![target]);
    normalize(joint.values)
}

fn normalize<T: Real>(mut dist: Vec<T>) -> Result<Vec<T>, BbnError> {
    let total: T = dist.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(BbnError::InconsistentEvidence);
    }
    for v in dist.iter_mut() {
        *v = *v / total;
    }
    Ok(dist)
}

pub(super) fn enumerate<T: Real>(
    net: &BayesNet<T>,
    observed: &[Option<usize>],
    target: usize,
) -> Result<Vec<T>, BbnError> {
    let space: u128 = (0..net.len())
        .map(|i| net.cardinality(i) as u128)
        .try_fold(1u128, |acc, c| acc.checked_mul(c))
        .unwrap_or(u128::MAX);
    if space > MAX_ENUMERATION_STATES {
        return Err(BbnError::StateSpaceTooLarge(space));
    }
    let free: Vec<usize> = (0..net.len()).filter(|&i| observed[i].is_none()).collect();
    let mut assign: Vec<usize> = observed.iter().map(|o| o.unwrap_or(0)).collect();
    let mut dist = vec![T::zero(); net.cardinality(target)];
    loop {
        let mut p = T::one();
        for &i in net.topo_order() {
            let mut row = 0;
            for &par in net.parents_of(i) {
                row = row * net.cardinality(par) + assign[par];
            }
            p = p * net.node(i).cpt[row][assign[i]];
        }
        dist[assign[target]] = dist[assign[target]] + p;

        // advance the odometer over unobserved nodes
        let mut k = free.len();
        loop {
            if k == 0 {
                return normalize(dist);
            }
            k -= 1;
            let v = free[k];
            assign[v] += 1;
            if assign[v] < net.cardinality(v) {
                break;
            }
            assign[v] = 0;
        }
    }
}
