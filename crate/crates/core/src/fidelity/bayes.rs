//! Chow-Liu tree Bayesian network over discretized columns.

use super::align_categorical;
use crate::error::{Error, Result};
use crate::stats::{bin_of, quantile_cuts};
use crate::table::{ColumnData, Table};

/// Columns of `(real, synthetic)` state codes with their state counts.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub real: Vec<Vec<u32>>,
    pub syn: Vec<Vec<u32>>,
    pub states: Vec<usize>,
}

/// Categorical columns keep their (aligned) levels; continuous columns are cut
/// into `bins` real-quantile bins.
pub fn discretize(real: &Table, syn: &Table, bins: usize) -> Discretized {
    let mut out = Discretized {
        real: Vec::new(),
        syn: Vec::new(),
        states: Vec::new(),
    };
    for (rc, sc) in real.columns.iter().zip(&syn.columns) {
        match (&rc.data, &sc.data) {
            (ColumnData::Continuous(r), ColumnData::Continuous(s)) => {
                let cuts = quantile_cuts(r, bins);
                out.real.push(r.iter().map(|&x| bin_of(&cuts, x) as u32).collect());
                out.syn.push(s.iter().map(|&x| bin_of(&cuts, x) as u32).collect());
                out.states.push(cuts.len() + 1);
            }
            _ => {
                let (r, s, k) = align_categorical(rc, sc);
                out.real.push(r);
                out.syn.push(s);
                out.states.push(k.max(1));
            }
        }
    }
    out
}

/// Empirical mutual information in nats.
pub fn mutual_information(a: &[u32], ka: usize, b: &[u32], kb: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0.0f64; ka * kb];
    let mut pa = vec![0.0f64; ka];
    let mut pb = vec![0.0f64; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x as usize * kb + y as usize] += 1.0;
        pa[x as usize] += 1.0;
        pb[y as usize] += 1.0;
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0.0 {
                mi += c / n * (c * n / (pa[x] * pb[y])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Maximum spanning tree over a symmetric weight matrix, rooted at 0.
/// Returns each node's parent. Equal weights are taken in `(i, j)` order.
pub fn chow_liu_tree(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let d = weights.len();
    let mut edges: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
    edges.sort_by(|a, b| weights[b.0][b.1].total_cmp(&weights[a.0][a.1]));
    let mut uf: Vec<usize> = (0..d).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut adj = vec![Vec::new(); d];
    for (i, j) in edges {
        let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
        if ri != rj {
            uf[ri] = rj;
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut parent = vec![None; d];
    let mut seen = vec![false; d];
    let mut stack = vec![0];
    if d > 0 {
        seen[0] = true;
    }
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                stack.push(v);
            }
        }
    }
    parent
}

/// Sum of edge weights of a parent-encoded tree.
pub fn tree_weight(parents: &[Option<usize>], weights: &[Vec<f64>]) -> f64 {
    parents
        .iter()
        .enumerate()
        .filter_map(|(c, p)| p.map(|p| weights[p][c]))
        .sum()
}

/// Tree-structured network with Laplace-smoothed conditional tables.
#[derive(Debug, Clone)]
pub struct ChowLiuNetwork {
    pub parents: Vec<Option<usize>>,
    states: Vec<usize>,
    /// Per column: `parent_state * states[c] + state` log-probabilities, or
    /// plain marginal log-probabilities at the root.
    log_probs: Vec<Vec<f64>>,
}

impl ChowLiuNetwork {
    pub fn fit(columns: &[Vec<u32>], states: &[usize], alpha: f64) -> Result<Self> {
        let d = columns.len();
        if d == 0 || columns[0].is_empty() {
            return Err(Error::Empty("network needs at least one nonempty column".into()));
        }
        let mut weights = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in (i + 1)..d {
                let mi = mutual_information(&columns[i], states[i], &columns[j], states[j]);
                weights[i][j] = mi;
                weights[j][i] = mi;
            }
        }
        let parents = chow_liu_tree(&weights);
        let log_probs = (0..d)
            .map(|c| {
                let kc = states[c];
                let kp = parents[c].map_or(1, |p| states[p]);
                let mut counts = vec![0.0f64; kp * kc];
                for r in 0..columns[c].len() {
                    let ps = parents[c].map_or(0, |p| columns[p][r] as usize);
                    counts[ps * kc + columns[c][r] as usize] += 1.0;
                }
                let mut lp = vec![0.0; kp * kc];
                for ps in 0..kp {
                    let row = &counts[ps * kc..(ps + 1) * kc];
                    let total: f64 = row.iter().sum::<f64>() + alpha * kc as f64;
                    for s in 0..kc {
                        lp[ps * kc + s] = ((row[s] + alpha) / total).ln();
                    }
                }
                lp
            })
            .collect();
        Ok(ChowLiuNetwork {
            parents,
            states: states.to_vec(),
            log_probs,
        })
    }

    /// Mean per-row natural-log likelihood.
    pub fn mean_log_likelihood(&self, columns: &[Vec<u32>]) -> f64 {
        let n = columns[0].len();
        let mut total = 0.0;
        for r in 0..n {
            for (c, lp) in self.log_probs.iter().enumerate() {
                let ps = self.parents[c].map_or(0, |p| columns[p][r] as usize);
                total += lp[ps * self.states[c] + columns[c][r] as usize];
            }
        }
        total / n as f64
    }
}

/// Mean log-likelihood of the synthetic rows under a Chow-Liu network learned
/// on the real rows. Continuous columns are cut into `bins` quantile bins.
pub fn bn_loglik(real: &Table, syn: &Table, bins: usize) -> Result<f64> {
    if syn.n_rows() == 0 {
        return Err(Error::Empty("synthetic table has no rows".into()));
    }
    let disc = discretize(real, syn, bins);
    let net = ChowLiuNetwork::fit(&disc.real, &disc.states, 1.0)?;
    Ok(net.mean_log_likelihood(&disc.syn))
}
