//! Partial-conjunction hypothesis testing and replicability analysis.
//!
//! Given p-values from `n` studies, a partial-conjunction (PC) test of
//! `H_0^{r/n}` asks whether at least `r` of the studies carry a real effect.
//! `r = 1` is ordinary meta-analysis; `r = n` is a conjunction test. Running
//! the test for every `r` yields a confidence statement about how many
//! studies are non-null.
//!
//! Module map:
//!
//! * [`numerics`]: log-domain normal, chi-square and hypergeometric kernels.
//! * [`combiners`]: Fisher, Simes, Bonferroni, weighted Stouffer, truncated
//!   product, and the 2x2 Fisher exact test.
//! * [`partial_conjunction`]: BHPC and GBHPC p-values, PC curves.
//! * [`counterexample`]: non-monotone level-alpha tests for `n = r = 2`.
//! * [`simulation`]: power maps for PC tests over Gamma-distributed effects.
//! * [`oracle`]: Monte Carlo validity and distribution checks.
//! * [`dataset`]: the bundled 18-subgroup anticoagulant dataset.
//! * [`io`], [`cli`]: file formats and the `pcmeta` command line.

pub mod cli;
pub mod combiners;
pub mod counterexample;
pub mod dataset;
pub mod error;
pub mod io;
pub mod numerics;
pub mod oracle;
pub mod partial_conjunction;
pub mod simulation;

pub use combiners::{CombinerSpec, CountTable2x2};
pub use error::{Error, Result};
pub use numerics::ProbValue;
pub use partial_conjunction::{GroupPartition, PcCurve, PcMethod};
