//! Exact sampling of the generation-`n` population conditioned on survival,
//! and a rejection sampler used as an oracle.

use rand::Rng;

use crate::displacement::DisplacementLaw;
use crate::error::{Error, Result};
use crate::offspring::OffspringLaw;
use crate::reduced::ReducedLaws;
use crate::tree::{OccupationSample, SpatialTree};

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;
/// Rejection is refused when more than this many trials are expected.
pub const MAX_EXPECTED_TRIALS: f64 = 1e4;

/// Samples the conditioned reduced spatial tree.
///
/// Chains of single-child particles are skipped in one draw: the probability
/// that a particle at depth `d` starts a chain of at least `m` single
/// births is `exp(L[d+m] - L[d])`, with `L` the prefix sums of `ln p_1`.
/// For normal steps the displacement accumulated along a chain is drawn in
/// one go as well. Both shortcuts are exact.
#[derive(Debug, Clone)]
pub struct ConditionedSampler {
    laws: ReducedLaws,
    nu: DisplacementLaw,
    node_budget: usize,
    log_single: Vec<f64>,
    /// Per depth: CDF of the offspring count given at least two children, starting at `l = 2`.
    branch_cdf: Vec<Vec<f64>>,
}

impl ConditionedSampler {
    pub fn new(law: &OffspringLaw, nu: DisplacementLaw, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        Ok(Self::from_laws(ReducedLaws::new(law, n)?, nu))
    }

    pub fn from_laws(laws: ReducedLaws, nu: DisplacementLaw) -> Self {
        let n = laws.horizon();
        let mut log_single = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        log_single.push(acc);
        let mut branch_cdf = Vec::with_capacity(n);
        for d in 0..n {
            let r = laws.at_depth(d);
            acc += r.p(1).ln();
            log_single.push(acc);
            let mut c = 0.0;
            branch_cdf.push(r.pmf().iter().skip(2).map(|p| {
                c += p;
                c
            }).collect());
        }
        Self { laws, nu, node_budget: DEFAULT_NODE_BUDGET, log_single, branch_cdf }
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn horizon(&self) -> usize {
        self.laws.horizon()
    }

    pub fn laws(&self) -> &ReducedLaws {
        &self.laws
    }

    pub fn nu(&self) -> DisplacementLaw {
        self.nu
    }

    /// Depth of the first particle on the chain started at `depth` that does
    /// not have exactly one child, or `n` if the chain reaches the horizon.
    #[inline]
    fn chain_end<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> usize {
        let n = self.horizon();
        let base = self.log_single[depth];
        // 1 - U is in (0, 1], so the log is finite.
        let target = base + (1.0 - rng.random::<f64>()).ln();
        // first e >= depth with log_single[e + 1] < target
        let tail = &self.log_single[depth + 1..=n];
        depth + tail.partition_point(|&l| l >= target)
    }

    #[inline]
    fn branch_size<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> usize {
        let cdf = &self.branch_cdf[depth];
        let u = rng.random::<f64>() * cdf[cdf.len() - 1];
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) + 2
    }

    /// Generation-`n` positions of one conditioned tree.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OccupationSample> {
        let n = self.horizon();
        let mut leaves = Vec::new();
        // (depth, position drawn so far, steps not yet drawn)
        let mut stack: Vec<(usize, f64, usize)> = vec![(0, 0.0, 0)];
        let mut nodes = 1usize;
        while let Some((depth, pos, pending)) = stack.pop() {
            let end = self.chain_end(depth, rng);
            nodes += end - depth;
            let pending = pending + (end - depth);
            if end == n {
                leaves.push(pos + self.nu.sample_sum(pending, rng));
                continue;
            }
            let here = pos + self.nu.sample_sum(pending, rng);
            let l = self.branch_size(end, rng);
            nodes += l;
            if nodes > self.node_budget {
                return Err(Error::NodeBudget { budget: self.node_budget });
            }
            for _ in 0..l {
                stack.push((end + 1, here, 1));
            }
        }
        if nodes > self.node_budget {
            return Err(Error::NodeBudget { budget: self.node_budget });
        }
        Ok(OccupationSample::new(n, leaves))
    }

    /// The full reduced tree, generated one particle at a time.
    pub fn sample_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpatialTree> {
        let n = self.horizon();
        let mut tree = SpatialTree::new(n);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let v = &tree.nodes()[i];
            let (depth, pos) = (v.generation, v.position);
            if depth == n {
                continue;
            }
            let l = self.laws.at_depth(depth).sample(rng);
            if tree.len() + l > self.node_budget {
                return Err(Error::NodeBudget { budget: self.node_budget });
            }
            for rank in 1..=l {
                let child = tree.push(i, rank as u32, pos + self.nu.sample(rng));
                stack.push(child);
            }
        }
        Ok(tree)
    }
}

/// One exact draw of the conditioned generation-`n` tree.
pub fn sample_conditioned<R: Rng + ?Sized>(
    law: &OffspringLaw,
    nu: DisplacementLaw,
    n: usize,
    rng: &mut R,
) -> Result<SpatialTree> {
    ConditionedSampler::new(law, nu, n)?.sample_tree(rng)
}

/// Plain branching random walk, restarted until generation `n` is non-empty.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    cdf: Vec<f64>,
    nu: DisplacementLaw,
    n: usize,
    node_budget: usize,
    max_trials: u64,
}

impl RejectionSampler {
    pub fn new(law: &OffspringLaw, nu: DisplacementLaw, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        let qn = law.extinction_table(n)?.q(n);
        let expected = 1.0 / qn;
        if expected > MAX_EXPECTED_TRIALS {
            return Err(Error::TrialBudget { trials: expected.ceil() as u64 });
        }
        let mut c = 0.0;
        let cdf = law.pmf().iter().map(|p| {
            c += p;
            c
        }).collect();
        Ok(Self {
            cdf,
            nu,
            n,
            node_budget: DEFAULT_NODE_BUDGET,
            max_trials: (100.0 * expected).ceil() as u64 + 100,
        })
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    #[inline]
    fn offspring<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }

    /// Generation-`n` positions of one unconditioned tree (possibly empty).
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut leaves = Vec::new();
        let mut stack = vec![(0usize, 0.0f64)];
        let mut nodes = 1usize;
        while let Some((depth, pos)) = stack.pop() {
            if depth == self.n {
                leaves.push(pos);
                continue;
            }
            let l = self.offspring(rng);
            nodes += l;
            if nodes > self.node_budget {
                return Err(Error::NodeBudget { budget: self.node_budget });
            }
            for _ in 0..l {
                stack.push((depth + 1, pos + self.nu.sample(rng)));
            }
        }
        Ok(leaves)
    }

    /// First surviving population and the number of trials used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(OccupationSample, u64)> {
        for trial in 1..=self.max_trials {
            let leaves = self.trial(rng)?;
            if !leaves.is_empty() {
                return Ok((OccupationSample::new(self.n, leaves), trial));
            }
        }
        Err(Error::TrialBudget { trials: self.max_trials })
    }
}

/// Rejection sampling of the conditioned population; the oracle for
/// [`sample_conditioned`]. Only generation-`n` individuals are kept.
pub fn sample_rejection<R: Rng + ?Sized>(
    law: &OffspringLaw,
    nu: DisplacementLaw,
    n: usize,
    rng: &mut R,
) -> Result<OccupationSample> {
    RejectionSampler::new(law, nu, n)?.sample(rng).map(|(s, _)| s)
}
