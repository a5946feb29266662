//! Approximate nearest neighbor search with box trees over a Voronoi
//! diagram.
//!
//! A main `2^d`-ary box tree partitions a bounding cube until every leaf is
//! either met by a single Voronoi cell or has volume below `δ`. Each
//! multi-site leaf carries a list of auxiliary trees built over rotated,
//! enlarged copies of the leaf. A query intersects the site sets of all
//! leaves that contain it.

pub mod auxtree;
pub mod boxtree;
pub mod cells;
pub mod cli;
pub mod error;
pub mod format;
pub mod geometry;
pub mod index;
pub mod lp;
pub mod oracle;
pub mod svg;

pub use auxtree::{aux_root_box, enumerate_orientations, orientation_count};
pub use boxtree::{compute_delta, default_scale, make_bounding_box, BuildParams};
pub use cells::{cell_box_intersects, nearest_site, SiteId, SiteSet};
pub use error::{Error, Result};
pub use geometry::{OrientedBox, Point, Rotation};
pub use format::{load_index, parse_point, parse_points, save_index};
pub use index::{AnnIndex, AuxListView, BuildStats, NodeView, QueryResult, QueryStats};
pub use oracle::{oracle_s_prime, run_cardinality_experiment, smallest_enclosing_ball_radius, OracleConfig};
