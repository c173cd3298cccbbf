//! Named configurations for the canonical figure families. Each preset is a
//! config fragment applied on top of the defaults.

const FIG3: &str = "\
# C-FIB freshness per deployment and caching strategy
topology = telstra
alpha = 0.8
cfib_ratio = 16
cache_budget = 0.04
seeds = 1,2,3,4,5
";

const FIG4: &str = "\
# hit ratio per deployment and caching strategy
topology = telstra
alpha = 0.8
cfib_ratio = 16
cache_budget = 0.04
seeds = 1,2,3,4,5
";

const FIG5: &str = "\
# hit ratio against C-FIB to cache size ratio
topology = abovenet
strategy = CH_FA
alpha = 0.8
cache_budget = 0.04
seeds = 1,2,3
";

const FIG6: &str = "\
# stale delivery under name rotation and TTL baselines
topology = telstra
strategy = CH_FA
alpha = 0.8
cfib_ratio = 16
cache_budget = 0.15
t_base = 50
t_min = 1
ttl = 1,3,8,20,60
seeds = 1,2,3
";

const FIG7: &str = "\
# incremental deployment: every upgraded router gets the same capacity
topology = telstra
sizing = per_router
policy = choice
alpha = 0.8
cfib_ratio = 16
cache_budget = 0.04
seeds = 1,2,3
";

pub const NAMES: [&str; 5] = ["fig3", "fig4", "fig5", "fig6", "fig7"];

pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "fig3" => Some(FIG3),
        "fig4" => Some(FIG4),
        "fig5" => Some(FIG5),
        "fig6" => Some(FIG6),
        "fig7" => Some(FIG7),
        _ => None,
    }
}

/// Study a preset belongs to.
pub fn study_of(name: &str) -> Option<&'static str> {
    match name {
        "fig3" | "fig4" => Some("deployment"),
        "fig5" => Some("ratio"),
        "fig6" => Some("purging"),
        "fig7" => Some("incremental"),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentConfig;

    #[test]
    fn every_preset_parses_and_validates() {
        for n in NAMES {
            let mut c = ExperimentConfig::default();
            c.apply_preset(n).unwrap();
            c.validate().unwrap();
            assert!(study_of(n).is_some());
        }
    }
}
