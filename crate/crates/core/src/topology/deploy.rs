use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{betweenness_ranking, Graph, NodeId, TopologyError};

/// Cache / C-FIB placement strategy: `H` = top half of the centrality
/// ranking, `A` = every router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    ChFa,
    ChFh,
    CaFa,
    CaFh,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::ChFa, Strategy::ChFh, Strategy::CaFa, Strategy::CaFh];

    /// Default (cache, C-FIB) router fractions.
    pub fn fractions(self) -> (f64, f64) {
        match self {
            Strategy::ChFa => (0.5, 1.0),
            Strategy::ChFh => (0.5, 0.5),
            Strategy::CaFa => (1.0, 1.0),
            Strategy::CaFh => (1.0, 0.5),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Strategy::ChFa => "CH_FA",
            Strategy::ChFh => "CH_FH",
            Strategy::CaFa => "CA_FA",
            Strategy::CaFh => "CA_FH",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_uppercase();
        match norm.as_str() {
            "CHFA" => Ok(Strategy::ChFa),
            "CHFH" => Ok(Strategy::ChFh),
            "CAFA" => Ok(Strategy::CaFa),
            "CAFH" => Ok(Strategy::CaFh),
            _ => Err(format!("unknown strategy `{s}` (expected CH_FA, CH_FH, CA_FA or CA_FH)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRole {
    pub has_cache: bool,
    pub has_cfib: bool,
    pub cache_capacity: usize,
    pub cfib_capacity: usize,
}

impl NodeRole {
    pub fn is_lira(&self) -> bool {
        self.has_cache || self.has_cfib
    }
}

/// Role of every node, indexed by [`NodeId`]. Hosts keep the default role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleMap(pub Vec<NodeRole>);

impl RoleMap {
    pub fn plain(g: &Graph) -> Self {
        RoleMap(vec![NodeRole::default(); g.node_count()])
    }

    pub fn get(&self, id: NodeId) -> NodeRole {
        self.0[id.index()]
    }

    pub fn total_cache(&self) -> usize {
        self.0.iter().map(|r| r.cache_capacity).sum()
    }

    pub fn total_cfib(&self) -> usize {
        self.0.iter().map(|r| r.cfib_capacity).sum()
    }

    pub fn cache_nodes(&self) -> usize {
        self.0.iter().filter(|r| r.has_cache).count()
    }

    pub fn cfib_nodes(&self) -> usize {
        self.0.iter().filter(|r| r.has_cfib).count()
    }
}

/// How the network-wide budgets map to per-router capacities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sizing {
    /// The budgets are shared by the selected routers.
    #[default]
    Split,
    /// Every selected router gets the share it would have if all routers
    /// were selected, so deploying on more routers adds capacity.
    PerRouter,
}

/// Inputs of [`apply_deployment`]. A fraction of exactly 0 deploys nothing
/// of that kind; any positive fraction must select at least one router.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeploymentPlan {
    pub cache_fraction: f64,
    pub cfib_fraction: f64,
    /// Total cache slots (chunks) across the network.
    pub total_cache_budget: usize,
    /// C-FIB entries per cache slot, network wide.
    pub cfib_ratio: f64,
    pub sizing: Sizing,
}

impl DeploymentPlan {
    pub fn for_strategy(strategy: Strategy, total_cache_budget: usize, cfib_ratio: f64) -> Self {
        let (cache_fraction, cfib_fraction) = strategy.fractions();
        DeploymentPlan { cache_fraction, cfib_fraction, total_cache_budget, cfib_ratio, sizing: Sizing::Split }
    }

    pub fn total_cfib_budget(&self) -> usize {
        (self.total_cache_budget as f64 * self.cfib_ratio).round() as usize
    }
}

fn selected(fraction: f64, routers: usize, what: &str) -> Result<usize, TopologyError> {
    if !(0.0..=1.0).contains(&fraction) || fraction.is_nan() {
        return Err(TopologyError::Deployment(format!("{what} fraction {fraction} outside [0, 1]")));
    }
    if fraction == 0.0 {
        return Ok(0);
    }
    let k = ((fraction * routers as f64).round() as usize).min(routers);
    if k == 0 {
        return Err(TopologyError::Deployment(format!(
            "{what} fraction {fraction} selects no router out of {routers}"
        )));
    }
    Ok(k)
}

/// Splits `total` over `k` nodes; the first `total % k` get one extra.
fn split(total: usize, k: usize) -> impl Iterator<Item = usize> {
    let (base, extra) = (total / k.max(1), total % k.max(1));
    (0..k).map(move |i| base + usize::from(i < extra))
}

/// Places caches and C-FIBs on the top-ranked routers, splitting the
/// network-wide budgets uniformly. `ranking` defaults to betweenness order.
pub fn apply_deployment(
    g: &Graph,
    plan: &DeploymentPlan,
    ranking: Option<&[NodeId]>,
) -> Result<RoleMap, TopologyError> {
    let owned;
    let ranking = match ranking {
        Some(r) => r,
        None => {
            owned = betweenness_ranking(g);
            &owned
        }
    };
    let cache_k = selected(plan.cache_fraction, ranking.len(), "cache")?;
    let cfib_k = selected(plan.cfib_fraction, ranking.len(), "C-FIB")?;
    if cache_k > 0 && plan.total_cache_budget == 0 {
        return Err(TopologyError::Deployment("cache budget must be positive".into()));
    }
    let (cache_n, cfib_n) = match plan.sizing {
        Sizing::Split => (cache_k, cfib_k),
        Sizing::PerRouter => (ranking.len(), ranking.len()),
    };
    let mut roles = RoleMap::plain(g);
    for (&node, cap) in ranking[..cache_k].iter().zip(split(plan.total_cache_budget, cache_n)) {
        let r = &mut roles.0[node.index()];
        r.has_cache = true;
        r.cache_capacity = cap;
    }
    for (&node, cap) in ranking[..cfib_k].iter().zip(split(plan.total_cfib_budget(), cfib_n)) {
        let r = &mut roles.0[node.index()];
        r.has_cfib = true;
        r.cfib_capacity = cap;
    }
    Ok(roles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;
    use crate::topology::GraphBuilder;

    /// Four routers in a path; ranking is r1, r2 (middle) then the ends.
    fn four() -> (Graph, Vec<NodeId>) {
        let mut b = GraphBuilder::new();
        for n in ["r0", "r1", "r2", "r3"] {
            b.router(n).unwrap();
        }
        b.edge("r0", "r1", SimTime::from_ms(1.0)).unwrap();
        b.edge("r1", "r2", SimTime::from_ms(1.0)).unwrap();
        b.edge("r2", "r3", SimTime::from_ms(1.0)).unwrap();
        b.provider("cp", "r3", SimTime::from_ms(1.0)).unwrap();
        let g = b.build().unwrap();
        let r = betweenness_ranking(&g);
        (g, r)
    }

    #[test]
    fn ch_fa_split() {
        let (g, rank) = four();
        let roles = apply_deployment(&g, &DeploymentPlan::for_strategy(Strategy::ChFa, 80, 1.0), None).unwrap();
        for (i, &n) in rank.iter().enumerate() {
            let r = roles.get(n);
            assert_eq!(r.cache_capacity, if i < 2 { 40 } else { 0 });
            assert_eq!(r.has_cache, i < 2);
            assert_eq!(r.cfib_capacity, 20);
        }
    }

    #[test]
    fn ca_fh_split() {
        let (g, rank) = four();
        let roles = apply_deployment(&g, &DeploymentPlan::for_strategy(Strategy::CaFh, 80, 1.0), None).unwrap();
        for (i, &n) in rank.iter().enumerate() {
            let r = roles.get(n);
            assert_eq!(r.cache_capacity, 20);
            assert_eq!(r.cfib_capacity, if i < 2 { 40 } else { 0 });
        }
    }

    #[test]
    fn tiny_fraction_is_an_error() {
        let (g, _) = four();
        let mut plan = DeploymentPlan::for_strategy(Strategy::ChFa, 80, 1.0);
        plan.cache_fraction = 0.05;
        assert!(matches!(apply_deployment(&g, &plan, None), Err(TopologyError::Deployment(_))));
    }

    #[test]
    fn remainders_go_to_top_ranked() {
        let (g, rank) = four();
        let plan = DeploymentPlan {
            cache_fraction: 0.75,
            cfib_fraction: 1.0,
            total_cache_budget: 10,
            cfib_ratio: 0.25,
            sizing: Sizing::Split,
        };
        let roles = apply_deployment(&g, &plan, None).unwrap();
        let caps: Vec<_> = rank.iter().map(|&n| roles.get(n).cache_capacity).collect();
        assert_eq!(caps, vec![4, 3, 3, 0]);
        assert_eq!(roles.total_cache(), 10);
        // 10 * 0.25 = 2.5 rounds to 3
        assert_eq!(roles.total_cfib(), 3);
    }

    #[test]
    fn per_router_sizing_keeps_router_shares() {
        let (g, rank) = four();
        let mut plan = DeploymentPlan::for_strategy(Strategy::ChFh, 80, 2.0);
        plan.sizing = Sizing::PerRouter;
        let roles = apply_deployment(&g, &plan, None).unwrap();
        let caps: Vec<_> = rank.iter().map(|&n| (roles.get(n).cache_capacity, roles.get(n).cfib_capacity)).collect();
        assert_eq!(caps, vec![(20, 40), (20, 40), (0, 0), (0, 0)]);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("(C_H,F_A)".parse::<Strategy>().unwrap(), Strategy::ChFa);
        assert_eq!("ca_fh".parse::<Strategy>().unwrap(), Strategy::CaFh);
        assert!("x".parse::<Strategy>().is_err());
    }
}
