//! Flow control of parabolic-trough collector fields with a clustered
//! distributed MPC coordinated by ALADIN.

// `!(a > b)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aladin;
pub mod dmpc;
pub mod metrics;
pub mod partition;
pub mod scenario;
pub mod selftest;
pub mod solvers;
pub mod thermal;
