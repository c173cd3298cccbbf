use smallvec::SmallVec;

use super::{route, Action, Body, Counter, DataMsg, ForwardPolicy, LocalEvent, Message, NodeCtx, RequestMsg};
use crate::cache::{select_cache_node, ContentStore, Lookup};
use crate::cfib::{CfibTable, Decision, IfaceSet};
use crate::metrics::Source;
use crate::naming::ContentId;
use crate::time::SimTime;
use crate::topology::{Iface, NodeId};
use crate::DetMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub iface: Iface,
    pub client: NodeId,
    pub rid: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferState {
    /// Request copies are out, no data yet.
    Awaiting,
    /// Data is flowing in; `None` when this node's cache is the source.
    Receiving { from: Option<Iface> },
    /// Every downstream delivery was withdrawn.
    Canceled,
}

/// One in-flight chunk transfer through a router.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub epoch: u64,
    pub deliveries: Vec<Delivery>,
    /// Interfaces whose answer is still awaited (the race).
    pub forwarded: IfaceSet,
    /// Every interface a copy of the request went out on.
    pub tried: IfaceSet,
    pub state: TransferState,
    pub deadline: SimTime,
    /// Template of the opening request, for the upstream fallback.
    request: RequestMsg,
    ip_dst: NodeId,
    /// Source address and body of the data once it flows.
    data: Option<(NodeId, DataMsg)>,
}

impl Transfer {
    fn knows(&self, rid: u64) -> bool {
        self.request.rid == rid || self.deliveries.iter().any(|d| d.rid == rid)
    }

    fn serves(&self, client: NodeId) -> bool {
        self.deliveries.iter().any(|d| d.client == client)
    }
}

/// Router state: optional cache, optional C-FIB, open transfers.
#[derive(Debug, Clone, Default)]
pub struct RouterState {
    pub cache: Option<ContentStore>,
    pub cfib: Option<CfibTable>,
    transfers: DetMap<ContentId, Transfer>,
    epoch: u64,
}

fn data_copy(ip_src: NodeId, hops: u32, d: &DataMsg, to: &Delivery) -> Message {
    Message { ip_src, ip_dst: to.client, hops, body: Body::Data(DataMsg { rid: to.rid, ..d.clone() }) }
}

impl RouterState {
    pub fn new(cache: Option<ContentStore>, cfib: Option<CfibTable>) -> Self {
        RouterState { cache, cfib, ..Default::default() }
    }

    pub fn transfer(&self, cid: &ContentId) -> Option<&Transfer> {
        self.transfers.get(cid)
    }

    pub fn open_transfers(&self) -> usize {
        self.transfers.len()
    }

    pub fn handle(&mut self, ctx: &mut NodeCtx, in_if: Iface, msg: Message, out: &mut Vec<Action>) {
        match msg.body {
            Body::Request(_) => self.on_request(ctx, in_if, msg, out),
            Body::Data(_) => self.on_data(ctx, in_if, msg, out),
            Body::Nack { cid } => self.on_nack(ctx.id, in_if, cid, out),
            Body::Reresolve { cid, .. } => self.on_reresolve(ctx, in_if, cid, msg, out),
            _ => route(ctx, msg, out),
        }
    }

    pub fn on_local(&mut self, ev: LocalEvent) {
        if let LocalEvent::Eoc { cid, epoch } = ev {
            if self.transfers.get(&cid).is_some_and(|t| t.epoch == epoch) {
                self.transfers.remove(&cid);
                if let Some(c) = &mut self.cfib {
                    c.on_eoc(&cid);
                }
            }
        }
    }

    fn expire(&mut self, cid: &ContentId, now: SimTime) {
        let stale = self.transfers.get(cid).is_some_and(|t| match t.state {
            TransferState::Awaiting => now > t.deadline,
            TransferState::Canceled => true,
            TransferState::Receiving { .. } => false,
        });
        if stale {
            self.transfers.remove(cid);
            if let Some(c) = &mut self.cfib {
                c.clear_pending(cid);
            }
        }
    }

    fn count_eviction(evicted: Option<ContentId>, out: &mut Vec<Action>) {
        if evicted.is_some() {
            out.push(Action::Count(Counter::CfibEvictions));
        }
    }

    fn on_request(&mut self, ctx: &mut NodeCtx, in_if: Iface, msg: Message, out: &mut Vec<Action>) {
        let Body::Request(mut req) = msg.body else { unreachable!() };
        let cid = req.cid;
        let up = ctx.next_hop(msg.ip_dst);
        self.expire(&cid, ctx.now);

        if self.transfers.get(&cid).is_some_and(|t| t.knows(req.rid)) {
            self.on_bounce(ctx, in_if, cid, out);
            return;
        }

        if let Some(cache) = &mut self.cache {
            if let Lookup::Hit { chunk, .. } = cache.lookup(&cid, ctx.now) {
                self.serve_local(ctx, in_if, msg.ip_dst, req, chunk, up, out);
                return;
            }
            req.caches.push(ctx.id);
        }

        let msg = Message { body: Body::Request(req), ..msg };
        let Some(cfib) = &mut self.cfib else {
            route(ctx, msg, out);
            return;
        };
        let Body::Request(req) = &msg.body else { unreachable!() };
        let origin = req.origin;

        if self.transfers.contains_key(&cid) {
            cfib.prune(&cid, in_if);
            // an evicted entry or an upstream arrival still gets the data
            let _ = cfib.on_request_suppressed(cid, in_if, origin);
            self.join(in_if, &msg, out);
            return;
        }

        // a stale decision is re-evaluated once after cleaning up
        for _ in 0..2 {
            match cfib.forwarding_targets(&cid, in_if) {
                Decision::NoEntry => {
                    match up {
                        Some(u) if u != in_if => {
                            Self::count_eviction(cfib.on_request_forwarded(cid, in_if, u), out);
                            let set: IfaceSet = [u].into_iter().collect();
                            self.open(ctx, in_if, msg, set, up, out);
                        }
                        _ => route(ctx, msg, out),
                    }
                    return;
                }
                Decision::Suppress => cfib.clear_pending(&cid),
                Decision::Discard => cfib.prune(&cid, in_if),
                Decision::Forward(mut set) => {
                    let if_i = cfib.get(&cid).expect("decided on an entry").if_i;
                    if ctx.cfg.forward_policy == ForwardPolicy::BreadcrumbsOnly {
                        let crumbs: IfaceSet = set.iter().filter(|&i| Some(i) != if_i).collect();
                        if !crumbs.is_empty() {
                            set = crumbs;
                        }
                    }
                    if set.is_empty() {
                        match up {
                            Some(u) if u != in_if => {
                                set.insert(u);
                            }
                            _ => {
                                // only the way back is known: bounce
                                out.push(Action::Send(in_if, msg));
                                return;
                            }
                        }
                    }
                    if Some(in_if) != if_i {
                        let toward = if_i.or(up.filter(|&u| u != in_if)).or(set.first()).expect("non-empty set");
                        Self::count_eviction(cfib.on_request_forwarded(cid, in_if, toward), out);
                    }
                    self.open(ctx, in_if, msg, set, up, out);
                    return;
                }
            }
        }
        out.push(Action::Count(Counter::RequestDropped));
    }

    /// Answers from the local cache.
    #[allow(clippy::too_many_arguments)]
    fn serve_local(
        &mut self,
        ctx: &mut NodeCtx,
        in_if: Iface,
        ip_dst: NodeId,
        req: RequestMsg,
        chunk: crate::naming::ChunkDescriptor,
        up: Option<Iface>,
        out: &mut Vec<Action>,
    ) {
        let cid = req.cid;
        let data = DataMsg {
            cid,
            chunk,
            rid: req.rid,
            source: Source::Cache { node: ctx.id, diverted: req.diverted },
            purge: Vec::new(),
            cache_at: select_cache_node(&req.caches, ctx.cfg.admission, ctx.rng).into_iter().collect(),
        };
        let reply = Message { ip_src: ctx.id, ip_dst: req.origin, hops: 0, body: Body::Data(data.clone()) };
        out.push(Action::Send(in_if, reply));
        let Some(cfib) = &mut self.cfib else { return };
        Self::count_eviction(cfib.on_local_serve(cid, in_if, up), out);
        let delivery = Delivery { iface: in_if, client: req.origin, rid: req.rid };
        if let Some(t) = self.transfers.get_mut(&cid) {
            t.deliveries.push(delivery);
            return;
        }
        self.epoch += 1;
        let t = Transfer {
            epoch: self.epoch,
            deliveries: vec![delivery],
            forwarded: IfaceSet::new(),
            tried: IfaceSet::new(),
            state: TransferState::Receiving { from: None },
            deadline: ctx.now,
            request: req,
            ip_dst,
            data: Some((ctx.id, data)),
        };
        self.transfers.insert(cid, t);
        out.push(Action::Schedule(ctx.now + ctx.cfg.chunk_duration, LocalEvent::Eoc { cid, epoch: self.epoch }));
    }

    /// Adds a downstream delivery to the open transfer.
    fn join(&mut self, in_if: Iface, msg: &Message, out: &mut Vec<Action>) {
        let Body::Request(req) = &msg.body else { unreachable!() };
        let t = self.transfers.get_mut(&req.cid).expect("active transfer");
        let d = Delivery { iface: in_if, client: req.origin, rid: req.rid };
        t.deliveries.push(d);
        if let (TransferState::Receiving { .. }, Some((src, data))) = (t.state, &t.data) {
            out.push(Action::Send(in_if, data_copy(*src, 0, data, &d)));
        }
    }

    /// Opens a transfer and sends request copies out of `set`.
    fn open(
        &mut self,
        ctx: &mut NodeCtx,
        in_if: Iface,
        msg: Message,
        set: IfaceSet,
        up: Option<Iface>,
        out: &mut Vec<Action>,
    ) {
        let Body::Request(req) = msg.body else { unreachable!() };
        for o in set.iter() {
            let copy = RequestMsg { diverted: req.diverted || Some(o) != up, ..req.clone() };
            out.push(Action::Send(o, Message { body: Body::Request(copy), ..msg }));
        }
        self.epoch += 1;
        let t = Transfer {
            epoch: self.epoch,
            deliveries: vec![Delivery { iface: in_if, client: req.origin, rid: req.rid }],
            forwarded: set.clone(),
            tried: set,
            state: TransferState::Awaiting,
            deadline: ctx.now + ctx.cfg.request_timeout,
            ip_dst: msg.ip_dst,
            request: req,
            data: None,
        };
        self.transfers.insert(t.request.cid, t);
    }

    /// A copy of a request this node already handles came back.
    fn on_bounce(&mut self, ctx: &mut NodeCtx, in_if: Iface, cid: ContentId, out: &mut Vec<Action>) {
        if let Some(c) = &mut self.cfib {
            c.prune(&cid, in_if);
        }
        let t = self.transfers.get_mut(&cid).expect("bounce on open transfer");
        if !t.forwarded.remove(in_if) || !t.forwarded.is_empty() || t.state != TransferState::Awaiting {
            return;
        }
        let up = ctx.next_hop(t.ip_dst);
        match up {
            Some(u) if !t.tried.contains(u) && u != in_if && t.deliveries.iter().all(|d| d.iface != u) => {
                t.forwarded.insert(u);
                t.tried.insert(u);
                let req = RequestMsg { diverted: t.request.diverted, ..t.request.clone() };
                let msg = Message { ip_src: req.origin, ip_dst: t.ip_dst, hops: 0, body: Body::Request(req) };
                out.push(Action::Send(u, msg));
            }
            _ => {
                // nothing left to try: hand every request back so the
                // downstream side can look elsewhere
                let t = self.transfers.remove(&cid).expect("open transfer");
                for d in &t.deliveries {
                    let req = RequestMsg { origin: d.client, rid: d.rid, ..t.request.clone() };
                    out.push(Action::Send(
                        d.iface,
                        Message { ip_src: d.client, ip_dst: t.ip_dst, hops: 0, body: Body::Request(req) },
                    ));
                }
                if let Some(c) = &mut self.cfib {
                    c.clear_pending(&cid);
                }
                out.push(Action::Count(Counter::RequestDropped));
            }
        }
    }

    fn on_data(&mut self, ctx: &mut NodeCtx, in_if: Iface, msg: Message, out: &mut Vec<Action>) {
        let Body::Data(d) = &msg.body else { unreachable!() };
        let cid = d.cid;
        let Some(t) = self.transfers.get_mut(&cid) else {
            self.admit(ctx, d, out);
            route(ctx, msg, out);
            return;
        };
        let winner = t.state == TransferState::Awaiting && t.forwarded.contains(in_if);
        if !winner {
            if t.state == TransferState::Canceled || t.serves(msg.ip_dst) {
                out.push(Action::Count(Counter::DuplicateData));
            } else {
                route(ctx, msg, out);
            }
            return;
        }
        for l in t.forwarded.iter().filter(|&l| l != in_if) {
            out.push(Action::Send(l, Message { ip_src: ctx.id, ip_dst: t.ip_dst, hops: 0, body: Body::Nack { cid } }));
            out.push(Action::Count(Counter::NacksSent));
            if let Some(c) = &mut self.cfib {
                c.prune(&cid, l);
            }
        }
        t.forwarded.clear();
        t.state = TransferState::Receiving { from: Some(in_if) };
        for dl in &t.deliveries {
            out.push(Action::Send(dl.iface, data_copy(msg.ip_src, msg.hops, d, dl)));
        }
        t.data = Some((msg.ip_src, d.clone()));
        out.push(Action::Schedule(ctx.now + ctx.cfg.chunk_duration, LocalEvent::Eoc { cid, epoch: t.epoch }));
        self.admit(ctx, d, out);
    }

    fn admit(&mut self, ctx: &NodeCtx, d: &DataMsg, out: &mut Vec<Action>) {
        let Some(cache) = &mut self.cache else { return };
        for _ in 0..cache.purge(&d.purge) {
            out.push(Action::Count(Counter::Purged));
        }
        if d.cache_at.contains(&ctx.id) {
            cache.admit(d.cid, d.chunk, ctx.now);
        }
    }

    fn on_nack(&mut self, id: NodeId, in_if: Iface, cid: ContentId, out: &mut Vec<Action>) {
        let Some(t) = self.transfers.get_mut(&cid) else { return };
        let gone: SmallVec<[NodeId; 4]> = t.deliveries.iter().filter(|d| d.iface == in_if).map(|d| d.client).collect();
        if gone.is_empty() {
            return;
        }
        t.deliveries.retain(|d| d.iface != in_if);
        if let Some(c) = &mut self.cfib {
            c.cancel(&cid, in_if, &gone);
        }
        if !t.deliveries.is_empty() {
            return;
        }
        let nack = |_: Iface| Message { ip_src: id, ip_dst: t.ip_dst, hops: 0, body: Body::Nack { cid } };
        match t.state {
            TransferState::Awaiting => {
                for f in t.forwarded.iter() {
                    out.push(Action::Send(f, nack(f)));
                    out.push(Action::Count(Counter::NacksSent));
                }
                self.transfers.remove(&cid);
            }
            TransferState::Receiving { from: Some(f) } => {
                out.push(Action::Send(f, nack(f)));
                out.push(Action::Count(Counter::NacksSent));
                t.state = TransferState::Canceled;
            }
            TransferState::Receiving { from: None } | TransferState::Canceled => {}
        }
    }

    fn on_reresolve(&mut self, ctx: &mut NodeCtx, in_if: Iface, cid: ContentId, msg: Message, out: &mut Vec<Action>) {
        let awaiting = self.transfers.get(&cid).is_some_and(|t| t.state == TransferState::Awaiting);
        if !awaiting {
            route(ctx, msg, out);
            return;
        }
        let t = self.transfers.remove(&cid).expect("checked");
        for d in &t.deliveries {
            let m = Message { ip_dst: d.client, body: Body::Reresolve { cid, rid: d.rid }, ..msg.clone() };
            out.push(Action::Send(d.iface, m));
        }
        for f in t.forwarded.iter().filter(|&f| f != in_if) {
            out.push(Action::Send(f, Message { ip_src: ctx.id, ip_dst: t.ip_dst, hops: 0, body: Body::Nack { cid } }));
            out.push(Action::Count(Counter::NacksSent));
        }
        if let Some(c) = &mut self.cfib {
            c.clear_pending(&cid);
        }
    }
}
