//! Tree-Wasserstein (TW) and tree-sliced-Wasserstein (TSW) distances.
//!
//! The crate is organized around a handful of pieces:
//!
//! - [`measures`]: discrete probability measures and persistence diagrams.
//! - [`tree`]: rooted trees with nonnegative edge weights, path lengths and
//!   subtree masses.
//! - [`build`]: random tree metrics (quadtree partitioning for low dimension,
//!   farthest-point clustering for high dimension) and slice ensembles.
//! - [`transport`]: the closed-form TW distance, its sliced average, the 1-D
//!   sliced-Wasserstein baseline and exact optimal-transport oracles.
//! - [`kernel`]: the `exp(-t * TSW)` kernel, Gram matrices and definiteness
//!   checks.
//! - [`datagen`]: synthetic orbit datasets and random measures.
//! - [`validate`]: self-contained validation suites tying the above together.
//!
//! ```
//! use tsw_core::tree::{RootedTree, TreeBuilder, NodeMeasure};
//! use tsw_core::transport::tree_wasserstein;
//!
//! let mut b = TreeBuilder::new(None);
//! let a = b.add_child(b.root(), 1.0, None);
//! let leaf = b.add_child(a, 2.0, None);
//! let tree: RootedTree = b.finish();
//!
//! let mu = NodeMeasure::dirac(&tree, leaf).unwrap();
//! let nu = NodeMeasure::dirac(&tree, tree.root()).unwrap();
//! assert_eq!(tree_wasserstein(&tree, &mu, &nu).unwrap(), 3.0);
//! ```

pub mod build;
pub mod datagen;
pub mod error;
pub mod io;
pub mod kernel;
pub mod measures;
pub mod rng;
pub mod transport;
pub mod tree;
pub mod validate;

pub use error::{Error, Result};
pub use nalgebra::DMatrix;

/// A point in `R^d`.
pub type Point = Vec<f64>;
