//! Bucketed bulk-synchronous fixpoint.
//!
//! Workers own `(bucket, sub-bucket)` pairs round-robin. Each superstep runs
//! the five phases under barriers: intra-bucket replication, local join,
//! all-to-all exchange (the last two repeat until no partial rows remain in
//! flight), interning, and materialization into secondary indices.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use super::{EvalConfig, EvalError, PhaseTimes, RunStats, StratumStats, TraceStep};
use crate::plan::{ColOp, IndexId, Plan, RuleVersion, Step, Window};
use crate::term::{hash_values, InternId, RelId, Shard, TermStore, Value};

/// One indexed row: the fact's epoch, id and columns.
#[derive(Clone, Debug)]
struct Entry {
    epoch: u32,
    id: InternId,
    cols: Arc<[Value]>,
}

type Slice = FxHashMap<Box<[Value]>, Vec<Entry>>;

/// A partial match waiting at an exchange step.
#[derive(Debug)]
struct Partial {
    version: u32,
    step: u16,
    bucket: u16,
    /// Sub-bucket to join against; set by intra-bucket replication.
    sub: u16,
    slots: Box<[Value]>,
}

/// A candidate head fact routed to its canonical owner.
#[derive(Debug)]
struct HeadRow {
    rel: RelId,
    cols: Arc<[Value]>,
    height: u32,
}

/// A freshly interned fact routed to an index slice owner.
#[derive(Debug)]
struct Materialize {
    index: IndexId,
    bucket: u16,
    sub: u16,
    key: Box<[Value]>,
    entry: Entry,
}

type Seen = FxHashSet<(RelId, Arc<[Value]>)>;
type NewFact = (RelId, InternId, Arc<[Value]>);

#[derive(Default)]
struct Worker {
    slices: FxHashMap<(IndexId, u16, u16), Slice>,
    /// Head rows emitted this superstep, for local deduplication.
    seen: Seen,
}

/// Static routing parameters.
#[derive(Clone, Copy)]
pub(crate) struct Layout {
    pub workers: usize,
    pub buckets: u16,
    pub subs: u16,
    /// Sub-bucket used when a partition has no non-key columns.
    pub s0: u16,
}

impl Layout {
    pub fn new(workers: usize, buckets: u16, subs: u16) -> Self {
        let subs = subs.max(1);
        Layout {
            workers,
            buckets,
            subs,
            s0: (hash_values(&[]) % subs as u64) as u16,
        }
    }

    #[inline]
    pub fn owner(&self, bucket: u16, sub: u16) -> usize {
        (bucket as usize * self.subs as usize + sub as usize) % self.workers
    }

    #[inline]
    pub fn bucket_of(&self, key: &[Value]) -> u16 {
        (hash_values(key) % self.buckets as u64) as u16
    }

    #[inline]
    pub fn sub_of(&self, rest: &[Value]) -> u16 {
        (hash_values(rest) % self.subs as u64) as u16
    }

    /// `(bucket, sub)` of a row in a secondary index.
    pub fn partition(&self, cols: &[Value], key_cols: &[usize], split: bool) -> (u16, u16) {
        let key: Vec<Value> = key_cols.iter().map(|&c| cols[c]).collect();
        let bucket = self.bucket_of(&key);
        let sub = if split {
            let rest: Vec<Value> = (0..cols.len())
                .filter(|c| !key_cols.contains(c))
                .map(|c| cols[c])
                .collect();
            self.sub_of(&rest)
        } else {
            self.s0
        };
        (bucket, sub)
    }
}

/// Transposes per-source outboxes into per-destination inboxes, preserving
/// source order so runs are deterministic.
fn transpose<T>(outs: Vec<Vec<Vec<T>>>, workers: usize) -> Vec<Vec<T>> {
    let mut inboxes: Vec<Vec<T>> = (0..workers).map(|_| Vec::new()).collect();
    for out in outs {
        for (dst, mut batch) in out.into_iter().enumerate() {
            inboxes[dst].append(&mut batch);
        }
    }
    inboxes
}

fn outboxes<T>(workers: usize) -> Vec<Vec<T>> {
    (0..workers).map(|_| Vec::new()).collect()
}

/// Read-only context of one superstep.
struct Ctx<'a> {
    versions: &'a [&'a RuleVersion],
    store: &'a TermStore,
    layout: Layout,
    lo: u32,
    hi: u32,
}

/// Per-worker output of the join phases.
struct JoinOut {
    partials: Vec<Vec<Partial>>,
    heads: Vec<Vec<HeadRow>>,
}

impl JoinOut {
    fn new(workers: usize) -> Self {
        JoinOut {
            partials: outboxes(workers),
            heads: outboxes(workers),
        }
    }
}

impl Ctx<'_> {
    /// Runs the pipeline of `version` from `step` with the current slots,
    /// stopping at the next exchange boundary or at the head.
    fn exec(&self, w: &mut Seen, vi: usize, step: usize, slots: &mut [Value], out: &mut JoinOut) {
        let v = self.versions[vi];
        let Some(s) = v.steps.get(step) else {
            self.emit_head(w, v, slots, out);
            return;
        };
        match s {
            Step::Scan { .. } => unreachable!("scan is only a source"),
            Step::Join { key, .. } | Step::AntiJoin { key, .. } => {
                let key: Vec<Value> = key.iter().map(|k| k.get(slots)).collect();
                let bucket = self.layout.bucket_of(&key);
                let dst = self.layout.owner(bucket, self.layout.s0);
                out.partials[dst].push(Partial {
                    version: vi as u32,
                    step: step as u16,
                    bucket,
                    sub: u16::MAX,
                    slots: slots.into(),
                });
            }
            Step::Lookup {
                rel,
                window,
                id,
                cols,
            } => {
                let Value::Id(fid) = slots[*id] else { return };
                if fid.rel() != rel.0 {
                    return;
                }
                let Ok(row) = self.store.stored(fid) else { return };
                if !window.admits(row.epoch, self.lo, self.hi) {
                    return;
                }
                if apply_cols(cols, &row.cols, slots) {
                    self.exec(w, vi, step + 1, slots, out);
                }
            }
            Step::Probe {
                rel,
                window,
                id,
                cols,
            } => {
                let vals: Vec<Value> = cols.iter().map(|c| c.get(slots)).collect();
                let Some(fid) = self.store.find(*rel, &vals) else { return };
                let epoch = self.store.stored(fid).map(|r| r.epoch).unwrap_or(u32::MAX);
                if !window.admits(epoch, self.lo, self.hi) {
                    return;
                }
                if id.apply(Value::Id(fid), slots) {
                    self.exec(w, vi, step + 1, slots, out);
                }
            }
            Step::AntiProbe { rel, cols } => {
                let vals: Vec<Value> = cols.iter().map(|c| c.get(slots)).collect();
                if self.store.find(*rel, &vals).is_none() {
                    self.exec(w, vi, step + 1, slots, out);
                }
            }
            Step::Filter { lhs, op, rhs } => {
                let eq = lhs.get(slots) == rhs.get(slots);
                if eq == (*op == crate::syntax::CmpOp::Eq) {
                    self.exec(w, vi, step + 1, slots, out);
                }
            }
        }
    }

    /// Executes an exchange step that has arrived at its slice owner.
    fn arrive(&self, w: &mut Worker, p: Partial, out: &mut JoinOut) {
        let vi = p.version as usize;
        let step = p.step as usize;
        let mut slots: Box<[Value]> = p.slots;
        let Worker { slices, seen } = w;
        match &self.versions[vi].steps[step] {
            Step::Join {
                index,
                window,
                key,
                id,
                cols,
            } => {
                let key: Vec<Value> = key.iter().map(|k| k.get(&slots)).collect();
                let Some(rows) = slices
                    .get(&(*index, p.bucket, p.sub))
                    .and_then(|s| s.get(&key[..]))
                else {
                    return;
                };
                for e in rows {
                    if window.admits(e.epoch, self.lo, self.hi)
                        && id.apply(Value::Id(e.id), &mut slots)
                        && apply_cols(cols, &e.cols, &mut slots)
                    {
                        self.exec(seen, vi, step + 1, &mut slots, out);
                    }
                }
            }
            Step::AntiJoin { index, key } => {
                let key: Vec<Value> = key.iter().map(|k| k.get(&slots)).collect();
                let present = slices
                    .get(&(*index, p.bucket, p.sub))
                    .and_then(|s| s.get(&key[..]))
                    .is_some_and(|rows| !rows.is_empty());
                if !present {
                    self.exec(seen, vi, step + 1, &mut slots, out);
                }
            }
            _ => unreachable!("only exchange steps arrive"),
        }
    }

    fn emit_head(&self, w: &mut Seen, v: &RuleVersion, slots: &[Value], out: &mut JoinOut) {
        let cols: Vec<Value> = v.head.iter().map(|o| o.get(slots)).collect();
        if self.store.find(v.head_rel, &cols).is_some() {
            return;
        }
        let cols: Arc<[Value]> = cols.into();
        if !w.insert((v.head_rel, cols.clone())) {
            return;
        }
        let height = match self.store.height_of(&cols) {
            Ok(h) => h,
            Err(_) => return,
        };
        let bucket = crate::term::canonical_bucket(&cols, self.layout.buckets);
        let dst = self.layout.owner(bucket, self.layout.s0);
        out.heads[dst].push(HeadRow {
            rel: v.head_rel,
            cols,
            height,
        });
    }

    /// Stage-0 scan over the canonical shards this worker owns.
    fn scan(&self, wid: usize, w: &mut Worker, first: bool, out: &mut JoinOut) {
        for (vi, v) in self.versions.iter().enumerate() {
            if v.once && !first {
                continue;
            }
            let Some(Step::Scan {
                rel,
                window,
                id,
                cols,
            }) = v.steps.first()
            else {
                // No positive atom: a single empty match, run by worker 0.
                if wid == 0 {
                    let mut slots = vec![Value::Int(0); v.slot_names.len()];
                    self.exec(&mut w.seen, vi, 0, &mut slots, out);
                }
                continue;
            };
            let mut slots = vec![Value::Int(0); v.slot_names.len()];
            for b in 0..self.layout.buckets {
                if self.layout.owner(b, self.layout.s0) != wid {
                    continue;
                }
                let shard = self.store.shard(*rel, b);
                let rows = shard.rows();
                let (start, end) = match window {
                    Window::Delta => (shard.first_at_epoch(self.lo), shard.first_at_epoch(self.hi + 1)),
                    Window::Full => (0, shard.first_at_epoch(self.lo)),
                    Window::All => (0, shard.first_at_epoch(self.hi + 1)),
                };
                for (c, row) in rows[start..end].iter().enumerate() {
                    let fid = InternId::pack(rel.0, b, (start + c) as u32);
                    if id.apply(Value::Id(fid), &mut slots) && apply_cols(cols, &row.cols, &mut slots) {
                        self.exec(&mut w.seen, vi, 1, &mut slots, out);
                    }
                }
            }
        }
    }
}

#[inline]
fn apply_cols(ops: &[ColOp], cols: &[Value], slots: &mut [Value]) -> bool {
    ops.iter().zip(cols).all(|(op, v)| op.apply(*v, slots))
}

/// Result of interning one worker's head rows.
struct Interned {
    fresh: Vec<(RelId, InternId, Arc<[Value]>)>,
}

pub(crate) struct Engine<'a> {
    plan: &'a Plan,
    cfg: &'a EvalConfig,
    layout: Layout,
    pool: rayon::ThreadPool,
    workers: Vec<Worker>,
    pub times: PhaseTimes,
}

impl<'a> Engine<'a> {
    pub fn new(plan: &'a Plan, cfg: &'a EvalConfig, buckets: u16) -> Result<Self, EvalError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| EvalError::Runtime(e.to_string()))?;
        Ok(Engine {
            plan,
            cfg,
            layout: Layout::new(cfg.workers, buckets, cfg.subbuckets as u16),
            pool,
            workers: (0..cfg.workers).map(|_| Worker::default()).collect(),
            times: PhaseTimes::default(),
        })
    }

    /// Routes rows of indexed relations into their slices.
    fn materialize(&mut self, facts: Vec<Vec<NewFact>>, epoch_of: impl Fn(InternId) -> u32 + Sync) {
        let t = Instant::now();
        let plan = self.plan;
        let layout = self.layout;
        let outs: Vec<Vec<Vec<Materialize>>> = self.pool.install(|| {
            facts
                .into_par_iter()
                .map(|batch| {
                    let mut out = outboxes(layout.workers);
                    for (rel, id, cols) in batch {
                        for &ix in &plan.indices_of[rel.index()] {
                            let spec = &plan.indices[ix];
                            let (bucket, sub) = layout.partition(&cols, &spec.cols, spec.split);
                            let key: Box<[Value]> = spec.cols.iter().map(|&c| cols[c]).collect();
                            out[layout.owner(bucket, sub)].push(Materialize {
                                index: ix,
                                bucket,
                                sub,
                                key,
                                entry: Entry {
                                    epoch: epoch_of(id),
                                    id,
                                    cols: cols.clone(),
                                },
                            });
                        }
                    }
                    out
                })
                .collect()
        });
        let inboxes = transpose(outs, layout.workers);
        self.pool.install(|| {
            self.workers
                .par_iter_mut()
                .zip(inboxes.into_par_iter())
                .for_each(|(w, inbox)| {
                    for m in inbox {
                        w.slices
                            .entry((m.index, m.bucket, m.sub))
                            .or_default()
                            .entry(m.key)
                            .or_default()
                            .push(m.entry);
                    }
                });
        });
        self.times.materialize += t.elapsed();
    }

    /// Indexes every fact already in the store.
    pub fn load(&mut self, store: &TermStore) {
        let mut batches: Vec<Vec<NewFact>> = (0..self.layout.workers).map(|_| Vec::new()).collect();
        for (rel, b, shard) in store.shards() {
            if self.plan.indices_of.get(rel.index()).is_none_or(|v| v.is_empty()) {
                continue;
            }
            let dst = self.layout.owner(b, self.layout.s0);
            for (c, row) in shard.rows().iter().enumerate() {
                batches[dst].push((rel, InternId::pack(rel.0, b, c as u32), row.cols.clone()));
            }
        }
        self.materialize(batches, |id| store.stored(id).map(|r| r.epoch).unwrap_or(0));
    }

    /// Runs one superstep; returns the ids of facts it created.
    fn superstep(
        &mut self,
        store: &mut TermStore,
        versions: &[&RuleVersion],
        lo: u32,
        hi: u32,
        first: bool,
    ) -> Result<Vec<InternId>, EvalError> {
        let layout = self.layout;
        let nw = layout.workers;
        for w in &mut self.workers {
            w.seen.clear();
        }

        // Local join, stage 0.
        let t = Instant::now();
        let ctx = Ctx {
            versions,
            store,
            layout,
            lo,
            hi,
        };
        let ctx = &ctx;
        let mut outs: Vec<JoinOut> = self.pool.install(|| {
            self.workers
                .par_iter_mut()
                .enumerate()
                .map(|(wid, w)| {
                    let mut out = JoinOut::new(nw);
                    ctx.scan(wid, w, first, &mut out);
                    out
                })
                .collect()
        });
        self.times.local_join += t.elapsed();

        let mut heads: Vec<Vec<Vec<HeadRow>>> = Vec::with_capacity(nw);
        let mut in_flight: Vec<Vec<Vec<Partial>>> = Vec::with_capacity(nw);
        for o in outs.drain(..) {
            heads.push(o.heads);
            in_flight.push(o.partials);
        }

        loop {
            let t = Instant::now();
            let inboxes = transpose(std::mem::take(&mut in_flight), nw);
            self.times.all_to_all += t.elapsed();
            if inboxes.iter().all(Vec::is_empty) {
                break;
            }

            // Intra-bucket replication to the other sub-bucket owners.
            let t = Instant::now();
            let plan = self.plan;
            let replicated: Vec<Vec<Vec<Partial>>> = self.pool.install(|| {
                inboxes
                    .into_par_iter()
                    .map(|inbox| {
                        let mut out = outboxes(nw);
                        for p in inbox {
                            let split = match &versions[p.version as usize].steps[p.step as usize] {
                                Step::Join { index, .. } => plan.indices[*index].split,
                                _ => false,
                            };
                            if split && layout.subs > 1 {
                                for s in 0..layout.subs {
                                    out[layout.owner(p.bucket, s)].push(Partial {
                                        version: p.version,
                                        step: p.step,
                                        bucket: p.bucket,
                                        sub: s,
                                        slots: p.slots.clone(),
                                    });
                                }
                            } else {
                                let dst = layout.owner(p.bucket, layout.s0);
                                out[dst].push(Partial { sub: layout.s0, ..p });
                            }
                        }
                        out
                    })
                    .collect()
            });
            let inboxes = transpose(replicated, nw);
            self.times.intra_bucket += t.elapsed();

            // Local join against owned slices.
            let t = Instant::now();
            let outs: Vec<JoinOut> = self.pool.install(|| {
                self.workers
                    .par_iter_mut()
                    .zip(inboxes.into_par_iter())
                    .map(|(w, inbox)| {
                        let mut out = JoinOut::new(nw);
                        for p in inbox {
                            ctx.arrive(w, p, &mut out);
                        }
                        out
                    })
                    .collect()
            });
            self.times.local_join += t.elapsed();
            for o in outs {
                heads.push(o.heads);
                in_flight.push(o.partials);
            }
        }

        // All-to-all: head rows to their canonical owners.
        let t = Instant::now();
        let head_in = transpose(heads, nw);
        self.times.all_to_all += t.elapsed();

        // Interning on canonical owners.
        let t = Instant::now();
        let epoch = hi + 1;
        let max_height = self.cfg.max_height;
        let buckets = layout.buckets as usize;
        let mut groups: Vec<Vec<(RelId, u16, &mut Shard)>> = (0..nw).map(|_| Vec::new()).collect();
        let mut position = FxHashMap::default();
        for (rel, b, shard) in store.shards_mut() {
            let owner = layout.owner(b, layout.s0);
            position.insert(rel.index() * buckets + b as usize, groups[owner].len());
            groups[owner].push((rel, b, shard));
        }
        let position = &position;
        let plan = self.plan;
        let results: Vec<Result<Interned, EvalError>> = self.pool.install(|| {
            groups
                .into_par_iter()
                .zip(head_in.into_par_iter())
                .map(|(mut shards, inbox)| {
                    let mut fresh = Vec::new();
                    for h in inbox {
                        let bucket = crate::term::canonical_bucket(&h.cols, layout.buckets);
                        let pos = position[&(h.rel.index() * buckets + bucket as usize)];
                        let (rel, b, shard) = &mut shards[pos];
                        debug_assert_eq!((*rel, *b), (h.rel, bucket));
                        if shard.get(&h.cols).is_some() {
                            continue;
                        }
                        if let Some(limit) = max_height {
                            if h.height > limit {
                                return Err(EvalError::HeightLimitExceeded {
                                    relation: plan.relation_name(h.rel).to_string(),
                                    height: h.height,
                                    limit,
                                });
                            }
                        }
                        let (counter, _) = shard
                            .insert(h.cols.clone(), epoch, h.height)
                            .map_err(|_| {
                                EvalError::Capacity(format!(
                                    "bucket {bucket} of relation `{}` is full",
                                    plan.relation_name(h.rel)
                                ))
                            })?;
                        fresh.push((h.rel, InternId::pack(h.rel.0, bucket, counter), h.cols));
                    }
                    Ok(Interned { fresh })
                })
                .collect()
        });
        self.times.intern += t.elapsed();
        let mut fresh = Vec::with_capacity(nw);
        for r in results {
            fresh.push(r?.fresh);
        }
        let ids: Vec<InternId> = fresh.iter().flatten().map(|(_, id, _)| *id).collect();
        self.materialize(fresh, |_| epoch);
        Ok(ids)
    }

    /// Evaluates every stratum to its fixpoint.
    pub fn run(&mut self, store: &mut TermStore) -> Result<RunStats, EvalError> {
        let start = Instant::now();
        self.load(store);
        let mut epoch: u32 = 0;
        let mut stats = RunStats::default();
        let plan = self.plan;
        for (si, stratum) in plan.strata.iter().enumerate() {
            let mut st = StratumStats {
                relations: stratum.relations.clone(),
                ..StratumStats::default()
            };
            if stratum.versions.is_empty() {
                stats.strata.push(st);
                continue;
            }
            let versions: Vec<&RuleVersion> = stratum.versions.iter().collect();
            let mut lo = 0;
            let mut first = true;
            loop {
                if let Some(limit) = self.cfg.max_iterations {
                    if st.iterations >= limit {
                        return Err(EvalError::IterationLimitExceeded {
                            stratum: si,
                            limit,
                        });
                    }
                }
                let hi = epoch;
                let ids = self.superstep(store, &versions, lo, hi, first)?;
                st.iterations += 1;
                st.new_per_iteration.push(ids.len() as u64);
                first = false;
                if self.cfg.trace {
                    stats.trace.push(TraceStep {
                        stratum: si,
                        iteration: st.iterations,
                        new: ids.clone(),
                    });
                }
                if ids.is_empty() {
                    break;
                }
                epoch = epoch
                    .checked_add(1)
                    .ok_or_else(|| EvalError::Capacity("epoch counter overflow".into()))?;
                lo = epoch;
            }
            stats.strata.push(st);
        }
        stats.epochs = epoch;
        stats.times = self.times;
        stats.total = start.elapsed();
        Ok(stats)
    }
}
