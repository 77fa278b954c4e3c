//! Bradley–Terry strengths from pairwise comparisons, fitted by
//! minorization–maximization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub winner: String,
    pub loser: String,
}

impl Comparison {
    pub fn new(winner: impl Into<String>, loser: impl Into<String>) -> Self {
        Self {
            winner: winner.into(),
            loser: loser.into(),
        }
    }
}

/// One judgement on a question shown to several raters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub question: String,
    pub winner: String,
    pub loser: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub strengths: BTreeMap<String, f64>,
    pub reference: String,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood before the first update and after each update.
    pub log_likelihood: Vec<f64>,
}

impl BtFit {
    /// Probability that `a` is preferred over `b`.
    pub fn win_probability(&self, a: &str, b: &str) -> Option<f64> {
        let (pa, pb) = (self.strengths.get(a)?, self.strengths.get(b)?);
        Some(pa / (pa + pb))
    }
}

pub const MAX_ITERATIONS: usize = 10_000;
pub const TOLERANCE: f64 = 1e-10;

/// Drops minority responses on questions whose majority share reaches
/// `threshold`; questions below it keep every response.
pub fn consensus_filter(responses: &[Response], threshold: f64) -> Vec<Comparison> {
    let mut by_question: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in responses {
        *by_question.entry(&r.question).or_default().entry(&r.winner).or_insert(0) += 1;
    }
    responses
        .iter()
        .filter(|r| {
            let votes = &by_question[r.question.as_str()];
            let total: usize = votes.values().sum();
            let top = votes.values().copied().max().unwrap_or(0);
            let winners_at_top = votes.values().filter(|&&v| v == top).count();
            let share = top as f64 / total as f64;
            share < threshold || winners_at_top > 1 || votes[r.winner.as_str()] == top
        })
        .map(|r| Comparison::new(r.winner.clone(), r.loser.clone()))
        .collect()
}

fn log_likelihood(wins: &BTreeMap<(usize, usize), f64>, pi: &[f64]) -> f64 {
    wins.iter().map(|(&(i, j), &w)| w * (pi[i] / (pi[i] + pi[j])).ln()).sum()
}

fn reachable(start: usize, edges: &[BTreeSet<usize>]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for &j in &edges[i] {
            if seen.insert(j) {
                stack.push(j);
            }
        }
    }
    seen
}

/// Maximum-likelihood strengths with `reference` pinned to 1. The items
/// must form one component in which every item can be reached from every
/// other along winner→loser edges, otherwise no finite maximizer exists.
pub fn bradley_terry_fit(comparisons: &[Comparison], reference: &str) -> Result<BtFit, StatsError> {
    let items: Vec<String> = comparisons
        .iter()
        .flat_map(|c| [c.winner.clone(), c.loser.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let Some(&reference_index) = index.get(reference) else {
        return Err(StatsError::UnknownReference(reference.to_string()));
    };
    let m = items.len();
    let mut wins: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut beats = vec![BTreeSet::new(); m];
    let mut undirected = vec![BTreeSet::new(); m];
    for c in comparisons {
        let (w, l) = (index[c.winner.as_str()], index[c.loser.as_str()]);
        if w == l {
            continue;
        }
        *wins.entry((w, l)).or_insert(0.0) += 1.0;
        beats[w].insert(l);
        undirected[w].insert(l);
        undirected[l].insert(w);
    }
    if reachable(0, &undirected).len() != m {
        return Err(StatsError::DisconnectedGraph);
    }
    let reversed: Vec<BTreeSet<usize>> = (0..m)
        .map(|i| (0..m).filter(|&j| beats[j].contains(&i)).collect())
        .collect();
    if m > 1 && (reachable(0, &beats).len() != m || reachable(0, &reversed).len() != m) {
        return Err(StatsError::NoFiniteMaximum);
    }

    let mut total_wins = vec![0.0; m];
    let mut games: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &wins {
        total_wins[i] += w;
        *games.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
    }
    let mut pi = vec![1.0; m];
    let mut trace = vec![log_likelihood(&wins, &pi)];
    let mut converged = m <= 1;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITERATIONS {
        let mut denom = vec![0.0; m];
        for (&(i, j), &n) in &games {
            let d = n / (pi[i] + pi[j]);
            denom[i] += d;
            denom[j] += d;
        }
        let mut next: Vec<f64> = (0..m).map(|i| total_wins[i] / denom[i]).collect();
        let scale = next[reference_index];
        next.iter_mut().for_each(|p| *p /= scale);
        let change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        pi = next;
        iterations += 1;
        trace.push(log_likelihood(&wins, &pi));
        converged = change < TOLERANCE;
    }
    Ok(BtFit {
        strengths: items.into_iter().zip(pi).collect(),
        reference: reference.to_string(),
        iterations,
        converged,
        log_likelihood: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn games(spec: &[(&str, &str, usize)]) -> Vec<Comparison> {
        spec.iter()
            .flat_map(|(w, l, n)| std::iter::repeat_with(|| Comparison::new(*w, *l)).take(*n))
            .collect()
    }

    #[test]
    fn two_items_three_of_four() {
        let fit = bradley_terry_fit(&games(&[("a", "b", 3), ("b", "a", 1)]), "b").unwrap();
        assert!((fit.strengths["a"] / fit.strengths["b"] - 3.0).abs() < 1e-6);
        assert_eq!(fit.strengths["b"], 1.0);
        assert!(fit.converged);
    }

    #[test]
    fn symmetric_wins_give_equal_strengths() {
        let fit = bradley_terry_fit(&games(&[("a", "b", 2), ("b", "a", 2), ("b", "c", 2), ("c", "b", 2)]), "c").unwrap();
        for s in fit.strengths.values() {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn graph_conditions() {
        assert!(matches!(
            bradley_terry_fit(&games(&[("a", "b", 1), ("b", "a", 1), ("c", "d", 1), ("d", "c", 1)]), "a"),
            Err(StatsError::DisconnectedGraph)
        ));
        assert!(matches!(bradley_terry_fit(&games(&[("a", "b", 3)]), "a"), Err(StatsError::NoFiniteMaximum)));
        assert!(matches!(bradley_terry_fit(&games(&[("a", "b", 1)]), "z"), Err(StatsError::UnknownReference(_))));
    }

    #[test]
    fn consensus_drops_minority_on_clear_questions() {
        let r = |q: &str, w: &str, l: &str| Response {
            question: q.into(),
            winner: w.into(),
            loser: l.into(),
        };
        let responses = vec![
            r("q1", "a", "b"),
            r("q1", "a", "b"),
            r("q1", "a", "b"),
            r("q1", "b", "a"),
            r("q2", "a", "b"),
            r("q2", "b", "a"),
        ];
        let kept = consensus_filter(&responses, 0.75);
        assert_eq!(kept.len(), 5);
        assert_eq!(kept.iter().filter(|c| c.winner == "b").count(), 1);
    }
}
