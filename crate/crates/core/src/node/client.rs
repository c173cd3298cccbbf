use super::{route, Action, Body, Counter, DataMsg, LocalEvent, Message, NodeCtx, RequestMsg};
use crate::metrics::{classify, HitRecord, Outcome, Source};
use crate::naming::{verify_cid, ContentId};
use crate::provider::{NamingMode, ResolutionReply};
use crate::time::SimTime;
use crate::topology::{Iface, NodeId};
use crate::DetMap;

#[derive(Debug, Clone)]
struct FetchState {
    object: u32,
    provider: NodeId,
    measured: bool,
    /// Chunk being fetched.
    chunk: u32,
    chunks: u32,
    bundle_start: u32,
    bundle: Vec<ContentId>,
    versions: Vec<u32>,
    /// Outstanding request, if any.
    rid: Option<u64>,
    attempts: u32,
    first_send: Option<SimTime>,
    /// The provider refused a stale name for this chunk.
    reresolved: bool,
}

/// A requesting host.
#[derive(Debug, Clone, Default)]
pub struct ClientState {
    fetches: DetMap<u64, FetchState>,
    next_rid: u32,
    /// Names are permanent, so version checks against the name are moot.
    permanent_names: bool,
}

impl ClientState {
    pub fn new(naming: NamingMode) -> Self {
        ClientState { permanent_names: naming == NamingMode::Permanent, ..Default::default() }
    }

    pub fn active_fetches(&self) -> usize {
        self.fetches.len()
    }

    pub fn start_fetch(
        &mut self,
        ctx: &mut NodeCtx,
        fetch: u64,
        object: u32,
        chunks: u32,
        measured: bool,
        out: &mut Vec<Action>,
    ) {
        let provider = ctx.provider_of(object);
        let st = FetchState {
            object,
            provider,
            measured,
            chunk: 0,
            chunks,
            bundle_start: 0,
            bundle: Vec::new(),
            versions: Vec::new(),
            rid: None,
            attempts: 0,
            first_send: None,
            reresolved: false,
        };
        self.fetches.insert(fetch, st);
        Self::resolve(ctx, fetch, object, 0, provider, out);
    }

    fn resolve(ctx: &NodeCtx, fetch: u64, object: u32, start_chunk: u32, provider: NodeId, out: &mut Vec<Action>) {
        let msg =
            Message { ip_src: ctx.id, ip_dst: provider, hops: 0, body: Body::Resolve { object, start_chunk, fetch } };
        route(ctx, msg, out);
    }

    fn send_request(&mut self, ctx: &NodeCtx, fetch: u64, out: &mut Vec<Action>) {
        self.next_rid += 1;
        let rid = (u64::from(ctx.id.0) << 32) | u64::from(self.next_rid);
        let st = self.fetches.get_mut(&fetch).expect("live fetch");
        let cid = st.bundle[(st.chunk - st.bundle_start) as usize];
        st.rid = Some(rid);
        st.attempts += 1;
        st.first_send.get_or_insert(ctx.now);
        let req = RequestMsg { cid, origin: ctx.id, rid, diverted: false, caches: Default::default() };
        let msg = Message { ip_src: ctx.id, ip_dst: st.provider, hops: 0, body: Body::Request(req) };
        route(ctx, msg, out);
        out.push(Action::Schedule(ctx.now + ctx.cfg.request_timeout, LocalEvent::Timeout { fetch, rid }));
    }

    pub fn handle(&mut self, ctx: &mut NodeCtx, in_if: Iface, msg: Message, out: &mut Vec<Action>) {
        match msg.body {
            Body::ResolveReply { reply: Ok(reply), fetch, piggyback } => {
                self.on_reply(ctx, reply, fetch, piggyback, msg.hops, out)
            }
            Body::ResolveReply { reply: Err(_), fetch, .. } => {
                // unknown object: nothing to fetch
                self.fetches.remove(&fetch);
                out.push(Action::FetchDone(fetch));
            }
            Body::Data(ref d) => {
                let fetch = self.fetch_of(d.rid);
                if let Some(fetch) = fetch {
                    let d = d.clone();
                    self.on_data(ctx, fetch, d, msg.hops, out);
                } else {
                    out.push(Action::Count(Counter::DuplicateData));
                }
            }
            Body::Reresolve { rid, .. } => {
                if let Some(fetch) = self.fetch_of(rid) {
                    let st = self.fetches.get_mut(&fetch).expect("live fetch");
                    st.rid = None;
                    st.reresolved = true;
                    st.attempts = 0;
                    out.push(Action::Count(Counter::Reresolves));
                    Self::resolve(ctx, fetch, st.object, st.chunk, st.provider, out);
                }
            }
            // our own request came back: the network found no path, retry now
            Body::Request(ref r) if r.origin == ctx.id => {
                if let Some(fetch) = self.fetch_of(r.rid) {
                    self.retry(ctx, fetch, out);
                }
            }
            // a breadcrumb led a request here: the host has nothing, send it back
            Body::Request(_) => out.push(Action::Send(in_if, msg)),
            _ => {}
        }
    }

    fn retry(&mut self, ctx: &mut NodeCtx, fetch: u64, out: &mut Vec<Action>) {
        let Some(st) = self.fetches.get_mut(&fetch) else { return };
        if st.attempts >= ctx.cfg.max_attempts {
            st.rid = None;
            st.attempts = 0;
            Self::resolve(ctx, fetch, st.object, st.chunk, st.provider, out);
        } else {
            self.send_request(ctx, fetch, out);
        }
    }

    fn fetch_of(&self, rid: u64) -> Option<u64> {
        self.fetches.iter().find(|(_, st)| st.rid == Some(rid)).map(|(f, _)| *f)
    }

    fn on_reply(
        &mut self,
        ctx: &mut NodeCtx,
        reply: ResolutionReply,
        fetch: u64,
        piggyback: Option<DataMsg>,
        hops: u32,
        out: &mut Vec<Action>,
    ) {
        let Some(st) = self.fetches.get_mut(&fetch) else { return };
        st.bundle_start = reply.start_chunk;
        st.bundle = reply.bundle;
        st.versions = reply.versions;
        match piggyback {
            Some(d) => {
                st.first_send.get_or_insert(ctx.now);
                st.rid = Some(d.rid);
                self.on_data(ctx, fetch, d, hops, out);
            }
            None => self.send_request(ctx, fetch, out),
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx, fetch: u64, d: DataMsg, hops: u32, out: &mut Vec<Action>) {
        let permanent = self.permanent_names;
        let st = self.fetches.get_mut(&fetch).expect("live fetch");
        let i = (st.chunk - st.bundle_start) as usize;
        if ctx.cfg.verify
            && !permanent
            && !verify_cid(&d.chunk.payload(), &d.chunk.padding, d.chunk.version, &st.bundle[i])
        {
            out.push(Action::Count(Counter::VerifyFailures));
            return;
        }
        let stale = d.chunk.version < st.versions[i];
        let outcome = if st.reresolved { Outcome::Provider } else { classify(d.source, stale) };
        let server = match d.source {
            Source::Provider => None,
            Source::Cache { node, .. } => Some(node),
        };
        out.push(Action::Record(HitRecord {
            rid: d.rid,
            client: ctx.id,
            object: st.object,
            chunk: st.chunk,
            outcome,
            server,
            diverted: matches!(d.source, Source::Cache { diverted: true, .. }),
            hops,
            latency: ctx.now.saturating_sub(st.first_send.unwrap_or(ctx.now)),
            measured: st.measured,
        }));
        st.rid = None;
        out.push(Action::Schedule(ctx.now + ctx.cfg.chunk_duration, LocalEvent::ChunkDone { fetch }));
    }

    pub fn on_local(&mut self, ctx: &mut NodeCtx, ev: LocalEvent, out: &mut Vec<Action>) {
        match ev {
            LocalEvent::ChunkDone { fetch } => {
                let Some(st) = self.fetches.get_mut(&fetch) else { return };
                st.chunk += 1;
                st.attempts = 0;
                st.first_send = None;
                st.reresolved = false;
                if st.chunk >= st.chunks {
                    self.fetches.remove(&fetch);
                    out.push(Action::FetchDone(fetch));
                } else if st.chunk >= st.bundle_start + st.bundle.len() as u32 {
                    Self::resolve(ctx, fetch, st.object, st.chunk, st.provider, out);
                } else {
                    self.send_request(ctx, fetch, out);
                }
            }
            LocalEvent::Timeout { fetch, rid } => {
                let Some(st) = self.fetches.get_mut(&fetch) else { return };
                if st.rid != Some(rid) {
                    return;
                }
                out.push(Action::Count(Counter::Timeouts));
                self.retry(ctx, fetch, out);
            }
            LocalEvent::Eoc { .. } => {}
        }
    }
}
