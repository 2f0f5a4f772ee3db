//! Locality- and resource-aware streaming dataflows.
//!
//! Pipelines are built with [`graph::GraphBuilder`], annotated with layers and
//! capability constraints, split into FlowUnits and planned onto a tree of
//! zones by [`planner::plan`]. [`netsim::simulate`] executes the plan in
//! virtual time and [`dynamic`] applies updates to a running simulation.
//!
//! ```
//! use flowunits::{bundled, netsim, planner};
//!
//! let topology = bundled::topology("continuum").unwrap();
//! let graph = bundled::continuum_v1(10).unwrap();
//! let job = planner::JobSpec::new(graph, ["L1", "L2"], planner::Strategy::FlowUnits).with_workload(300, 1);
//! let plan = planner::plan(&job, &topology).unwrap();
//! let run = netsim::simulate(&plan, &topology, &netsim::NetworkCondition::default(), &job).unwrap();
//! assert_eq!(run.output, netsim::oracle_run(&job.graph, &job));
//! ```

pub mod bundled;
pub mod dynamic;
pub mod functions;
pub mod graph;
pub mod netsim;
pub mod planner;
pub mod topology;
pub mod value;
