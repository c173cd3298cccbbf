use super::{route, Action, Body, DataMsg, Message, NodeCtx};
use crate::cache::select_cache_node;
use crate::metrics::Source;
use crate::naming::ContentId;
use crate::provider::{Provider, Served};
use crate::topology::Iface;

/// A content provider attached to the network.
#[derive(Debug, Clone)]
pub struct ProviderHost {
    pub provider: Provider,
}

impl ProviderHost {
    pub fn new(provider: Provider) -> Self {
        ProviderHost { provider }
    }

    fn data(&self, ctx: &mut NodeCtx, cid: ContentId, rid: u64, path: &[crate::topology::NodeId]) -> Option<DataMsg> {
        match self.provider.serve_chunk(&cid) {
            Served::Data { chunk, purge_list } => Some(DataMsg {
                cid,
                chunk,
                rid,
                source: Source::Provider,
                purge: purge_list,
                cache_at: select_cache_node(path, ctx.cfg.admission, ctx.rng).into_iter().collect(),
            }),
            Served::Reresolve => None,
        }
    }

    pub fn handle(&mut self, ctx: &mut NodeCtx, _in_if: Iface, msg: Message, out: &mut Vec<Action>) {
        match msg.body {
            Body::Resolve { object, start_chunk, fetch } => {
                let reply = self.provider.resolve(object, start_chunk, msg.ip_src, ctx.now);
                let piggyback = match &reply {
                    Ok(r) if ctx.cfg.piggyback_first_chunk => self.data(ctx, r.bundle[0], 0, &[]),
                    _ => None,
                };
                let body = Body::ResolveReply { reply, fetch, piggyback };
                route(ctx, Message { ip_src: ctx.id, ip_dst: msg.ip_src, hops: 0, body }, out);
            }
            Body::Request(req) => {
                let body = match self.data(ctx, req.cid, req.rid, &req.caches) {
                    Some(d) => Body::Data(d),
                    None => Body::Reresolve { cid: req.cid, rid: req.rid },
                };
                route(ctx, Message { ip_src: ctx.id, ip_dst: req.origin, hops: 0, body }, out);
            }
            // nothing is streaming at chunk granularity; a withdrawal needs no work
            _ => {}
        }
    }
}
