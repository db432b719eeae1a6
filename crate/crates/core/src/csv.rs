//! CSV row schemas for every estimator family. The column layouts are
//! the output contract; writers prepend a provenance comment carrying
//! the build version and master seed so every number can be traced to a
//! configuration.

use crate::contact::SurvivalEstimate;
use crate::genealogy::EventRecord;
use crate::report::EstimateReport;

pub const SCHEMA_VERSION: &str = "v1";

/// Provenance comment placed above the header row.
pub fn provenance_comment(master_seed: u64) -> String {
    format!(
        "# schema={} build={}-{} seed={}",
        SCHEMA_VERSION,
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        master_seed
    )
}

pub const ESTIMATE_HEADER: &str = "kind,d,horizon,n_reps,mean,std_error,seed";

/// Generic estimator row: excursion means, local times, event
/// probabilities, renewal statistics.
pub fn estimate_row(kind: &str, d: usize, horizon: f64, report: &EstimateReport, seed: u64) -> String {
    format!(
        "{kind},{d},{horizon},{},{},{},{seed}",
        report.n_reps, report.mean, report.std_error
    )
}

pub const SURVIVAL_HEADER: &str =
    "d,n_stir,lambda,horizon,pop_cap,n_reps,survival_prob,std_error,censored_by_cap_fraction,seed";

pub fn survival_row(
    d: usize,
    n_stir: f64,
    lambda: f64,
    horizon: f64,
    pop_cap: usize,
    est: &SurvivalEstimate,
    seed: u64,
) -> String {
    format!(
        "{d},{n_stir},{lambda},{horizon},{pop_cap},{},{},{},{},{seed}",
        est.report.n_reps, est.report.mean, est.report.std_error, est.cap_fraction
    )
}

pub const EVENT_LOG_HEADER: &str = "time,event,address,site";

pub fn event_log_row(record: &EventRecord) -> String {
    format!(
        "{},{},{},{}",
        record.time,
        record.kind,
        record.addr,
        record.site.map_or_else(|| "-".to_string(), |s| s.to_string())
    )
}

pub const PROBE_HEADER: &str = "lambda,survival,std_error,n_reps,above_threshold";

pub fn probe_row(probe: &crate::contact::ProbeRecord) -> String {
    format!(
        "{},{},{},{},{}",
        probe.lambda, probe.survival, probe.std_error, probe.n_reps, probe.above_threshold
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_stable_shapes() {
        let report = EstimateReport {
            n_reps: 4,
            mean: 0.25,
            std_error: 0.01,
            extra: Default::default(),
        };
        let row = estimate_row("excursion-x", 2, 0.0, &report, 7);
        assert_eq!(row, "excursion-x,2,0,4,0.25,0.01,7");
        assert_eq!(row.split(',').count(), ESTIMATE_HEADER.split(',').count());
        assert!(provenance_comment(7).starts_with("# schema=v1"));
    }
}
