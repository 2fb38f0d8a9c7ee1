//! Weighted CART with presorted feature orders.
//!
//! Sample weights double as bootstrap counts (forests) and boosting weights.
//! Each node carries one sorted index list per feature; splitting a node
//! partitions those lists stably, so a level costs `O(n · d)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::model::cmp_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per node; `None` examines all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Class-1 weighted fraction (Gini) or weighted mean (variance).
    Leaf { value: f64 },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Parent impurity minus the children's, in weighted units. Always > 0.
        impurity_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

/// Per-feature sample orders for one design matrix, reusable across fits.
pub struct Presorted {
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let orders = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| cmp_f64(x.get(a as usize, j), x.get(b as usize, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { orders }
    }
}

#[derive(Default, Clone, Copy)]
struct Stats {
    w: f64,
    wy: f64,
    wyy: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
        self.count += 1;
    }

    fn sub(self, o: Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            wy: self.wy - o.wy,
            wyy: self.wyy - o.wyy,
            count: self.count - o.count,
        }
    }

    /// Weighted impurity (not normalized by weight).
    fn impurity(&self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            // y ∈ {0,1}: W·(1 − p1² − p0²) = 2·W1·W0 / W
            Criterion::Gini => {
                let w1 = self.wy;
                let w0 = self.w - w1;
                (2.0 * w1 * w0 / self.w).max(0.0)
            }
            Criterion::Variance => (self.wyy - self.wy * self.wy / self.w).max(0.0),
        }
    }

    fn leaf_value(&self) -> f64 {
        if self.w > 0.0 {
            self.wy / self.w
        } else {
            0.0
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    w: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Fits a tree; rows with zero weight are ignored.
    pub fn fit(
        x: &Matrix,
        y: &[f64],
        w: &[f64],
        presorted: &Presorted,
        params: TreeParams,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let sorted: Vec<Vec<u32>> = presorted
            .orders
            .iter()
            .map(|o| o.iter().copied().filter(|&i| w[i as usize] > 0.0).collect())
            .collect();
        let mut b = Builder {
            x,
            y,
            w,
            params,
            nodes: Vec::new(),
            goes_left: vec![false; x.rows()],
        };
        b.grow(sorted, 0, &mut rng);
        Tree {
            nodes: b.nodes,
            n_features: x.cols(),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Builder<'_> {
    fn stats(&self, idx: &[u32]) -> Stats {
        let mut s = Stats::default();
        for &i in idx {
            s.add(self.w[i as usize], self.y[i as usize]);
        }
        s
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let id = self.nodes.len();
        let node_stats = self.stats(&sorted[0]);
        self.nodes.push(Node::Leaf {
            value: node_stats.leaf_value(),
        });

        let parent = node_stats.impurity(self.params.criterion);
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth
            || node_stats.count < 2 * min_leaf
            || parent <= 1e-12 * node_stats.w.max(f64::MIN_POSITIVE)
        {
            return id;
        }

        let features = self.candidate_features(rng);
        let mut best: Option<Candidate> = None;
        for f in features {
            if let Some(c) = self.best_split(&sorted[f], f, node_stats, parent, min_leaf) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best else { return id };

        for &i in &sorted[0] {
            self.goes_left[i as usize] = self.x.get(i as usize, best.feature) <= best.threshold;
        }
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&i| self.goes_left[i as usize]))
            .unzip();

        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
            impurity_decrease: best.gain,
        };
        id
    }

    fn candidate_features(&self, rng: &mut Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let d = self.x.cols();
        let mut all: Vec<usize> = (0..d).collect();
        match (self.params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                // Partial Fisher-Yates, then restore index order for deterministic tie-breaks.
                for i in 0..m {
                    let j = rng.random_range(i..d);
                    all.swap(i, j);
                }
                all.truncate(m);
                all.sort_unstable();
                all
            }
            _ => all,
        }
    }

    fn best_split(
        &self,
        order: &[u32],
        feature: usize,
        total: Stats,
        parent: f64,
        min_leaf: usize,
    ) -> Option<Candidate> {
        let mut left = Stats::default();
        let mut best: Option<Candidate> = None;
        let tol = 1e-12 * parent.max(1e-300);
        for k in 0..order.len() - 1 {
            let i = order[k] as usize;
            left.add(self.w[i], self.y[i]);
            let v = self.x.get(i, feature);
            let next = self.x.get(order[k + 1] as usize, feature);
            if next <= v {
                continue;
            }
            let right = total.sub(left);
            if left.count < min_leaf || right.count < min_leaf {
                continue;
            }
            let gain = parent
                - left.impurity(self.params.criterion)
                - right.impurity(self.params.criterion);
            if gain > tol && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
        best
    }
}
