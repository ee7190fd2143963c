//! Convex, symmetric, minimal (CSM) orderings built greedily on the
//! equality null.
//!
//! Starting from the most extreme table, each step adds the frontier
//! point(s) whose inclusion keeps the rejection region a staircase and gives
//! the smallest supremum of `P_theta[region]` over `theta1 = theta2 = theta`.
//! Points tied on that supremum are added together and share a rank.

use serde::{Deserialize, Serialize};

use super::{SampleSpaceOrdering, Sidedness, MASKED_RANK};
use crate::boundary::uniform_grid;
use crate::distributions::BinomialTable;
use crate::error::{Error, Result};
use crate::numeric::golden_max;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsmVariant {
    /// Grow from `[n1, 0]` upward; larger rank favours `theta2 > theta1`.
    BottomUp,
    /// Grow from `[0, n2]` downward.
    TopDown,
    /// Grow from both corners, adding each point with its label-swap mirror.
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmConfig {
    /// Points in the uniform `theta` grid on `[0, 1]`.
    pub grid_points: usize,
    /// Refine the grid supremum of competitive candidates by golden section.
    pub refine: bool,
    /// Largest sample space (number of tables) the construction accepts.
    pub max_cells: usize,
    /// Relative tolerance under which candidate suprema count as tied.
    pub tie_tolerance: f64,
}

impl Default for CsmConfig {
    fn default() -> Self {
        Self {
            grid_points: 1001,
            refine: true,
            max_cells: 10_201,
            tie_tolerance: 1e-9,
        }
    }
}

/// Intermediate state of the greedy construction.
#[derive(Debug, Clone)]
pub struct CsmState {
    n1: u32,
    n2: u32,
    variant: CsmVariant,
    cfg: CsmConfig,
    grid: Vec<f64>,
    b1: Vec<Vec<f64>>,
    b2: Vec<Vec<f64>>,
    t1: BinomialTable,
    t2: BinomialTable,
    ranks: Vec<u32>,
    /// Staircase grown from the seed corner (includes absorbed mirrors).
    stair: Vec<bool>,
    members: Vec<usize>,
    region_prob: Vec<f64>,
    step_sizes: Vec<f64>,
    steps: u32,
}

impl CsmState {
    pub fn new(n1: u32, n2: u32, variant: CsmVariant, cfg: CsmConfig) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Domain("group sizes must be at least 1".into()));
        }
        let cells = ((n1 + 1) * (n2 + 1)) as usize;
        if cells > cfg.max_cells {
            return Err(Error::Budget(format!(
                "CSM ordering over {cells} tables exceeds the limit of {}",
                cfg.max_cells
            )));
        }
        let grid = uniform_grid(0.0, 1.0, cfg.grid_points.max(3));
        let t1 = BinomialTable::new(n1);
        let t2 = BinomialTable::new(n2);
        let b1 = grid.iter().map(|&t| t1.pmf(t)).collect();
        let b2 = grid.iter().map(|&t| t2.pmf(t)).collect();
        Ok(Self {
            n1,
            n2,
            variant,
            cfg,
            region_prob: vec![0.0; grid.len()],
            grid,
            b1,
            b2,
            t1,
            t2,
            ranks: vec![MASKED_RANK; cells],
            stair: vec![false; cells],
            members: Vec::new(),
            step_sizes: Vec::new(),
            steps: 0,
        })
    }

    fn idx(&self, x1: u32, x2: u32) -> usize {
        (x1 * (self.n2 + 1) + x2) as usize
    }

    fn pt(&self, i: usize) -> (u32, u32) {
        let w = self.n2 as usize + 1;
        ((i / w) as u32, (i % w) as u32)
    }

    fn mirror_idx(&self, i: usize) -> usize {
        let (x1, x2) = self.pt(i);
        self.idx(self.n1 - x1, self.n2 - x2)
    }

    fn seed(&self) -> usize {
        match self.variant {
            CsmVariant::TopDown => self.idx(0, self.n2),
            _ => self.idx(self.n1, 0),
        }
    }

    /// Neighbours that must already be in the staircase before `i` can join.
    fn predecessors(&self, i: usize) -> [Option<usize>; 2] {
        let (x1, x2) = self.pt(i);
        match self.variant {
            CsmVariant::TopDown => [
                (x1 > 0).then(|| self.idx(x1 - 1, x2)),
                (x2 < self.n2).then(|| self.idx(x1, x2 + 1)),
            ],
            _ => [
                (x1 < self.n1).then(|| self.idx(x1 + 1, x2)),
                (x2 > 0).then(|| self.idx(x1, x2 - 1)),
            ],
        }
    }

    fn frontier_idx(&self) -> Vec<usize> {
        if self.members.is_empty() {
            return vec![self.seed()];
        }
        (0..self.ranks.len())
            .filter(|&i| {
                !self.stair[i]
                    && self
                        .predecessors(i)
                        .iter()
                        .all(|p| p.is_none_or(|p| self.stair[p]))
            })
            .collect()
    }

    /// Points that may be added at the next step.
    pub fn frontier(&self) -> Vec<(u32, u32)> {
        self.frontier_idx()
            .into_iter()
            .map(|i| self.pt(i))
            .collect()
    }

    /// Points ranked so far, in the order they were added.
    pub fn region(&self) -> Vec<(u32, u32)> {
        self.members.iter().map(|&i| self.pt(i)).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.members.len() == self.ranks.len()
    }

    /// Supremum of the null probability of the region after each step. For a
    /// one-sided construction these are the p-values of the points added at
    /// that step.
    pub fn step_sizes(&self) -> &[f64] {
        &self.step_sizes
    }

    /// Cells that join the region together with candidate `i`.
    fn group(&self, i: usize) -> Vec<usize> {
        let mut g = vec![i];
        if self.variant == CsmVariant::TwoSided {
            let m = self.mirror_idx(i);
            if m != i && self.ranks[m] == MASKED_RANK {
                g.push(m);
            }
        }
        g
    }

    fn cell_prob(&self, g: usize, i: usize) -> f64 {
        let (x1, x2) = self.pt(i);
        self.b1[g][x1 as usize] * self.b2[g][x2 as usize]
    }

    fn prob_at(&self, theta: f64, extra: &[usize]) -> f64 {
        let p1 = self.t1.pmf(theta);
        let p2 = self.t2.pmf(theta);
        self.members
            .iter()
            .chain(extra)
            .map(|&i| {
                let (x1, x2) = self.pt(i);
                p1[x1 as usize] * p2[x2 as usize]
            })
            .sum()
    }

    /// Supremum over the grid and its location.
    fn grid_sup(&self, extra: &[usize]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for g in 0..self.grid.len() {
            let v = self.region_prob[g] + extra.iter().map(|&i| self.cell_prob(g, i)).sum::<f64>();
            if v > best.1 {
                best = (g, v);
            }
        }
        best
    }

    fn refined_sup(&self, extra: &[usize], at: usize) -> f64 {
        let lo = self.grid[at.saturating_sub(1)];
        let hi = self.grid[(at + 1).min(self.grid.len() - 1)];
        let (_, v) = golden_max(lo, hi, 1e-9, |t| self.prob_at(t, extra));
        v
    }

    /// Performs one greedy step and returns the points added.
    pub fn step(&mut self) -> Option<Vec<(u32, u32)>> {
        if self.is_complete() {
            return None;
        }
        let cands: Vec<(Vec<usize>, usize, f64)> = self
            .frontier_idx()
            .into_iter()
            .map(|i| {
                let g = self.group(i);
                let (at, v) = self.grid_sup(&g);
                (g, at, v)
            })
            .collect();
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| cands[a].2.total_cmp(&cands[b].2));
        let tol = self.cfg.tie_tolerance;
        let mut values = vec![f64::INFINITY; cands.len()];
        let mut best = f64::INFINITY;
        for &k in &order {
            let (g, at, v) = &cands[k];
            if *v > best * (1.0 + tol) + f64::MIN_POSITIVE {
                break;
            }
            let r = if self.cfg.refine {
                self.refined_sup(g, *at).max(*v)
            } else {
                *v
            };
            values[k] = r;
            best = best.min(r);
        }
        let chosen: Vec<usize> = (0..cands.len())
            .filter(|&k| values[k] <= best * (1.0 + tol) + f64::MIN_POSITIVE)
            .collect();
        let rank = self.steps;
        let mut added = Vec::new();
        for k in chosen {
            for &i in &cands[k].0 {
                if self.ranks[i] != MASKED_RANK {
                    continue;
                }
                self.ranks[i] = rank;
                self.members.push(i);
                added.push(self.pt(i));
                for g in 0..self.grid.len() {
                    self.region_prob[g] += self.cell_prob(g, i);
                }
            }
            self.stair[cands[k].0[0]] = true;
        }
        // Mirrors ranked earlier count as part of the staircase.
        loop {
            let absorb: Vec<usize> = self
                .frontier_idx()
                .into_iter()
                .filter(|&i| self.ranks[i] != MASKED_RANK)
                .collect();
            if absorb.is_empty() {
                break;
            }
            for i in absorb {
                self.stair[i] = true;
            }
        }
        self.step_sizes.push(best);
        self.steps += 1;
        Some(added)
    }

    /// Runs the construction to completion and returns the ordering.
    pub fn finish(mut self) -> SampleSpaceOrdering {
        while self.step().is_some() {}
        let sign = if self.variant == CsmVariant::TopDown {
            -1.0
        } else {
            1.0
        };
        let values: Vec<f64> = self.ranks.iter().map(|&r| sign * r as f64).collect();
        let ranks: Vec<u32> = match self.variant {
            CsmVariant::TopDown => {
                let top = self.steps - 1;
                self.ranks.iter().map(|&r| top - r).collect()
            }
            _ => self.ranks.clone(),
        };
        let (name, sidedness) = match self.variant {
            CsmVariant::BottomUp => ("CSM (bottom-up)", Sidedness::OneSided),
            CsmVariant::TopDown => ("CSM (top-down)", Sidedness::OneSided),
            CsmVariant::TwoSided => ("CSM (two-sided)", Sidedness::TwoSided),
        };
        let mask = vec![true; values.len()];
        SampleSpaceOrdering::from_ranks(self.n1, self.n2, values, mask, ranks, name, sidedness)
    }
}

/// Builds the CSM ordering for the given sample sizes.
pub fn order_csm(
    n1: u32,
    n2: u32,
    variant: CsmVariant,
    cfg: &CsmConfig,
) -> Result<SampleSpaceOrdering> {
    Ok(CsmState::new(n1, n2, variant, *cfg)?.finish())
}
