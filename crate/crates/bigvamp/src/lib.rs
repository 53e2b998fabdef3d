//! Bi-VAMP / BiG-VAMP message passing for recovering `U`, `V` from a noisy,
//! possibly incomplete observation of `U Vᵀ`, with the matching state
//! evolution and an experiment harness.
//!
//! ```no_run
//! use bigvamp::model::{generate_instance, ChannelSpec, PriorSpec, ProblemDims, RunConfig};
//! use bigvamp::solver::run_bigvamp;
//!
//! let dims = ProblemDims::new(300, 150, 5).unwrap();
//! let (pu, pv) = (PriorSpec::Binary, PriorSpec::Gaussian { mean: 0.0, var: 1.0 });
//! let channel = ChannelSpec::selection(0.2, 1.0);
//! let inst = generate_instance(dims, pu, pv, channel, 30.0, 7).unwrap();
//! let cfg = RunConfig::for_problem(&pu, &pv, &channel);
//! let res = run_bigvamp(&inst.observation(), &pu, &pv, &dims, &cfg, Some(&inst.z_true)).unwrap();
//! println!("{:?} after {} iterations", res.termination, res.iterations_run);
//! ```

pub mod denoisers;
pub mod error;
pub mod experiments;
pub mod message_core;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod state_evolution;

pub use error::{Error, Result};
