//! Discrete-event simulator of a location-independent routing layer with
//! ephemeral content names, C-FIB breadcrumb forwarding and in-network
//! caching, plus the experiment harness that drives it.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

pub mod cache;
pub mod cfib;
pub mod engine;
pub mod experiments;
pub mod metrics;
pub mod naming;
pub mod node;
pub mod provider;
pub mod time;
pub mod topology;
pub mod workload;

/// Hash map with a fixed hasher so runs never depend on per-process seeds.
pub(crate) type DetMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;
