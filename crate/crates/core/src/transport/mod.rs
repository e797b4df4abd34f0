//! Transport distances: closed-form tree-Wasserstein and its sliced
//! average, the 1-D sliced-Wasserstein baseline, and exact oracles.

mod assignment;
mod bound;
mod exact;
mod rank;
mod sliced;
mod tw;

pub use assignment::{hungarian, optimal_assignment, Assignment, AssignmentProblem, MAX_ASSIGNMENT_SIZE};
pub use bound::{check_w2_bound, check_w2_bound_in, BoundReport, LevelCounts, MAX_SEPARATION_DEPTH};
pub use exact::{exact_ot, exact_ot_with_limit, CostMatrix, OtSolution, DEFAULT_SIZE_LIMIT};
pub use rank::{nn_rank_experiment, nn_ranks, pairwise_w2, RankTable};
pub use sliced::{chain_tree, project, random_direction, sliced_wasserstein_1d, wasserstein_1d};
pub use tw::{
    average_slices, embed_measures, pairwise_slice_tw, pairwise_tsw, slice_tw, tree_sliced_wasserstein,
    tree_wasserstein, tw_from_subtree_masses, TreeEmbedding,
};
