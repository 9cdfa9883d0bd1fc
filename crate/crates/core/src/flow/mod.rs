//! Exact minimization of sum-of-submodular energies by maximum submodular
//! flow.
//!
//! [`minimize`] reparameterizes the energy into a [`FlowNetwork`], runs an
//! IBFS-style augmenting path search to maximum flow, and reads the minimizer
//! off as the set of nodes still reachable from the source. Label 1 is the
//! source side.

mod ibfs;
mod network;

pub use network::{Arc, FlowNetwork};

use crate::energy::{Labeling, SoSEnergy};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Start same-level parent searches at the per-node current arc.
    pub current_arc: bool,
    /// Record per-run invariant data in [`MinCutResult::trace`].
    pub trace: bool,
    /// Relative tolerance for the submodularity check when building the
    /// network.
    pub submodularity_tol: f64,
    /// Residual capacities above `positive_capacity * scale` count as
    /// positive.
    pub positive_capacity: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            current_arc: true,
            trace: false,
            submodularity_tol: 1e-9,
            positive_capacity: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowStats {
    pub augmentations: u64,
    pub adoptions: u64,
    pub capacity_evals: u64,
    pub flow_value: f64,
    /// Searches rebuilt from scratch because a path was found after the
    /// trees stopped growing. Zero on every instance in the test suite.
    pub restarts: u64,
}

/// Invariant data collected when [`FlowOptions::trace`] is set.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// Arc count of each augmenting path, in augmentation order.
    pub path_lengths: Vec<usize>,
    /// Times a node received a distance label below one it held before.
    pub label_decreases: u64,
    /// Augmentations that left every arc of their path unsaturated.
    pub unsaturated_augmentations: u64,
    /// Most negative residual produced by any push, before clamping.
    pub lowest_residual: f64,
    pub epochs: u64,
}

impl Default for FlowTrace {
    fn default() -> Self {
        FlowTrace {
            path_lengths: Vec::new(),
            label_decreases: 0,
            unsaturated_augmentations: 0,
            lowest_residual: 0.0,
            epochs: 1,
        }
    }
}

impl FlowTrace {
    pub fn path_lengths_nondecreasing(&self) -> bool {
        self.path_lengths.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone)]
pub struct MinCutResult {
    pub min_value: f64,
    pub minimizer: Labeling,
    pub flow_value: f64,
    /// Constant split off while building the network.
    pub offset: f64,
    pub stats: FlowStats,
    pub trace: Option<FlowTrace>,
}

impl MinCutResult {
    /// `min`, `set` and `stats` lines.
    pub fn to_text(&self) -> String {
        format!(
            "min {}\nset {}\nstats augmentations={} adoptions={} capeval={}\n",
            self.min_value,
            self.minimizer.to_bitstring(),
            self.stats.augmentations,
            self.stats.adoptions,
            self.stats.capacity_evals
        )
    }
}

pub fn build_network(energy: &SoSEnergy) -> Result<FlowNetwork> {
    FlowNetwork::build(energy, FlowOptions::default().submodularity_tol)
}

pub fn minimize(energy: &SoSEnergy) -> Result<MinCutResult> {
    minimize_with(energy, &FlowOptions::default())
}

pub fn minimize_with(energy: &SoSEnergy, opts: &FlowOptions) -> Result<MinCutResult> {
    let initial = FlowNetwork::build(energy, opts.submodularity_tol)?;
    let mut net = initial.clone();
    let mut search = ibfs::Ibfs::new(&mut net, opts);
    let minimizer = search.run()?;
    let stats = search.stats.clone();
    let trace = search.trace.take();
    let min_value = initial.offset() + initial.cut_value(&minimizer)?;
    Ok(MinCutResult {
        min_value,
        minimizer,
        flow_value: stats.flow_value,
        offset: initial.offset(),
        stats,
        trace,
    })
}
