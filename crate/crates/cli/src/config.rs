//! Experiment configuration: every estimator parameter, the master seed,
//! worker count, and output routing. A config is fully serializable and,
//! together with the build, determines the output byte for byte. Flags
//! override config-file values; defaults fill whatever remains.

use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Global options shared by every subcommand.
#[derive(Args, Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GlobalOpts {
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replication count (estimator subcommands).
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    /// Worker threads (0 = use all cores). Changes wall time, never results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

impl GlobalOpts {
    pub fn merge_under(&mut self, base: &GlobalOpts) {
        if self.seed.is_none() {
            self.seed = base.seed;
        }
        if self.reps.is_none() {
            self.reps = base.reps;
        }
        if self.workers.is_none() {
            self.workers = base.workers;
        }
        if self.out.is_none() {
            self.out = base.out.clone();
        }
        if self.format.is_none() {
            self.format = base.format;
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn reps(&self) -> u64 {
        self.reps.unwrap_or(10_000)
    }

    pub fn format(&self) -> OutputFormat {
        self.format.unwrap_or(OutputFormat::Csv)
    }
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Mean excursion functional of a difference walk started uniform on
    /// the neighbor set.
    ExcursionMean {
        /// x (exclusion exit), y (free exit), y-n0 (free neighbor time),
        /// y-0 (free origin time)
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Expected local time of a difference walk in a tracked set.
    LocalTime {
        /// x (exclusion difference) or y (free difference)
        #[arg(long)]
        kind: String,
        /// n0 (neighbors of the origin) or n0bar (neighbors plus origin)
        #[arg(long, default_value = "n0")]
        tracked: String,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// The d=3 lattice Green constant by quadrature, cross-checked by
    /// walk simulation.
    GreenConstant {
        /// walk horizon in discrete steps for the cross-check
        #[arg(long, default_value_t = 4000)]
        steps: u64,
    },
    /// Ratio of expected u-state times of the coupled renewal pair.
    RenewalRatio {
        #[arg(long)]
        u1: String,
        #[arg(long)]
        u2: String,
        #[arg(long)]
        v: String,
        #[arg(long)]
        t: f64,
    },
    /// E[max window gap] against the unit process, for mean-one u2.
    DeltaMax {
        #[arg(long)]
        u2: String,
        #[arg(long)]
        k: usize,
    },
    /// E[N_t]/t along a horizon grid (must decrease for infinite-mean v).
    NtSublinearity {
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
        /// comma-separated horizons
        #[arg(long, default_value = "1e2,1e3,1e4,1e5,1e6")]
        horizons: String,
    },
    /// Mean present count of the branching layer at a horizon.
    PsiMean {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
    },
    /// Coupled construction runs with invariant audit; optional event log.
    CoupledRun {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        t: f64,
        /// comma-separated checkpoint times (defaults to the horizon)
        #[arg(long)]
        checkpoints: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        cap: usize,
        /// write the first replication's event log as CSV here
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte Carlo frequency of the clock pattern vs its closed form.
    EventE {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_stir: f64,
    },
    /// Probability of collision pattern I (two births from the root).
    EventI {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Probability of collision pattern J (birth then grandchild birth).
    EventJ {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
    },
    /// Extinction criterion verdict from a collision-probability lower
    /// bound (estimated when not supplied).
    Criterion {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// use this P[I] lower bound instead of estimating
        #[arg(long)]
        p_i: Option<f64>,
    },
    /// Survival probability from a single particle with both censoring
    /// rules reported.
    Survival {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
    },
    /// Bisection bracket for the finite-horizon critical-value proxy.
    LambdaC {
        #[arg(long, default_value_t = 0.0)]
        n_stir: f64,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        reps_per_probe: u64,
        #[arg(long, default_value_t = 1.0)]
        lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hi: f64,
    },
    /// Asymptotic lower bound on the critical value for large stirring.
    Bound {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n_stir: f64,
    },
    /// Run an acceptance bundle: constants, coupling, renewal, criterion.
    Suite {
        #[arg(long)]
        name: String,
    },
}

/// A fully resolved experiment: subcommand plus globals. This is what a
/// config file holds.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    #[serde(flatten)]
    pub globals: GlobalOpts,
}
