//! Fact interning.
//!
//! Every structurally distinct fact is assigned exactly one [`InternId`], a
//! 64-bit word packing the relation id (16 bits), the fact's canonical bucket
//! (16 bits) and a per-bucket bump counter (32 bits). Literals never get ids:
//! a [`Value`] carries an explicit kind tag next to its 64-bit payload.
//!
//! The store is split into one [`Shard`] per `(relation, bucket)`. During
//! evaluation each shard is mutated only by the worker owning its bucket.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use rustc_hash::FxHashMap;
use thiserror::Error;

/// Upper bound on the number of relations addressable by the id layout.
pub const MAX_RELATIONS: usize = 1 << 16;
/// Upper bound on the bucket count addressable by the id layout.
pub const MAX_BUCKETS: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("relation `{name}` used with arity {found}, declared with arity {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("too many relations (limit {MAX_RELATIONS})")]
    TooManyRelations,
    #[error("bucket {bucket} of relation `{rel}` is full")]
    CounterOverflow { rel: String, bucket: u16 },
    #[error("unknown intern id {0:#018x}")]
    UnknownId(u64),
    #[error("unknown relation id {0}")]
    UnknownRelation(u16),
}

/// Relation identifier; the top 16 bits of every [`InternId`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(pub u16);

impl RelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Handle into the append-only string pool (its insertion index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrId(pub u32);

/// Packed fact identity: `rel << 48 | bucket << 32 | counter`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InternId(u64);

impl InternId {
    pub const fn pack(rel: u16, bucket: u16, counter: u32) -> Self {
        InternId(((rel as u64) << 48) | ((bucket as u64) << 32) | counter as u64)
    }

    pub const fn from_raw(raw: u64) -> Self {
        InternId(raw)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }

    pub const fn rel(self) -> u16 {
        (self.0 >> 48) as u16
    }

    pub const fn bucket(self) -> u16 {
        (self.0 >> 32) as u16
    }

    pub const fn counter(self) -> u32 {
        self.0 as u32
    }

    pub const fn unpack(self) -> (u16, u16, u32) {
        (self.rel(), self.bucket(), self.counter())
    }
}

impl fmt::Debug for InternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:016x}", self.0)
    }
}

impl fmt::Display for InternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Packs the three id fields into a raw 64-bit word.
pub const fn pack_id(rel: u16, bucket: u16, counter: u32) -> u64 {
    InternId::pack(rel, bucket, counter).raw()
}

/// Inverse of [`pack_id`].
pub const fn unpack_id(raw: u64) -> (u16, u16, u32) {
    InternId::from_raw(raw).unpack()
}

/// The only thing a column may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Id(InternId),
    Int(i64),
    Str(StrId),
}

/// Kind tag of a [`Value`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKind {
    FactId = 0,
    Int = 1,
    Str = 2,
}

impl Value {
    pub fn kind(self) -> ValueKind {
        match self {
            Value::Id(_) => ValueKind::FactId,
            Value::Int(_) => ValueKind::Int,
            Value::Str(_) => ValueKind::Str,
        }
    }

    pub fn payload(self) -> u64 {
        match self {
            Value::Id(id) => id.raw(),
            Value::Int(i) => i as u64,
            Value::Str(s) => s.0 as u64,
        }
    }

    pub fn as_id(self) -> Option<InternId> {
        match self {
            Value::Id(id) => Some(id),
            _ => None,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seed-free 64-bit hash of a value sequence: FNV-1a over the kind byte and
/// little-endian payload of each value, followed by the MurmurHash3 `fmix64`
/// finalizer so that `hash % B` is well spread for small B.
pub fn hash_values(values: &[Value]) -> u64 {
    let mut h = FNV_OFFSET;
    for v in values {
        h ^= v.kind() as u64;
        h = h.wrapping_mul(FNV_PRIME);
        for b in v.payload().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    fmix64(h)
}

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Canonical bucket of a fact: hash of all its columns modulo `buckets`.
pub fn canonical_bucket(cols: &[Value], buckets: u16) -> u16 {
    (hash_values(cols) % buckets.max(1) as u64) as u16
}

/// Append-only string literal pool.
#[derive(Clone, Debug, Default)]
pub struct StringPool {
    strings: Vec<Arc<str>>,
    index: FxHashMap<Arc<str>, StrId>,
}

impl StringPool {
    pub fn intern(&mut self, s: &str) -> StrId {
        if let Some(&id) = self.index.get(s) {
            return id;
        }
        let id = StrId(self.strings.len() as u32);
        let s: Arc<str> = Arc::from(s);
        self.strings.push(s.clone());
        self.index.insert(s, id);
        id
    }

    pub fn get(&self, id: StrId) -> Option<&str> {
        self.strings.get(id.0 as usize).map(|s| &**s)
    }

    pub fn lookup(&self, s: &str) -> Option<StrId> {
        self.index.get(s).copied()
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// Relation names and arities, indexed by [`RelId`].
#[derive(Clone, Debug, Default)]
pub struct RelTable {
    names: Vec<Arc<str>>,
    arities: Vec<usize>,
    index: FxHashMap<Arc<str>, RelId>,
}

impl RelTable {
    /// Registers `name` with `arity`, or checks the arity of an existing entry.
    pub fn declare(&mut self, name: &str, arity: usize) -> Result<RelId, TermError> {
        if let Some(&rel) = self.index.get(name) {
            let expected = self.arities[rel.index()];
            if expected != arity {
                return Err(TermError::ArityMismatch {
                    name: name.to_string(),
                    expected,
                    found: arity,
                });
            }
            return Ok(rel);
        }
        if self.names.len() >= MAX_RELATIONS {
            return Err(TermError::TooManyRelations);
        }
        let rel = RelId(self.names.len() as u16);
        let name: Arc<str> = Arc::from(name);
        self.names.push(name.clone());
        self.arities.push(arity);
        self.index.insert(name, rel);
        Ok(rel)
    }

    pub fn lookup(&self, name: &str) -> Option<RelId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, rel: RelId) -> &str {
        &self.names[rel.index()]
    }

    pub fn arity(&self, rel: RelId) -> usize {
        self.arities[rel.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RelId, &str, usize)> + '_ {
        self.names
            .iter()
            .zip(&self.arities)
            .enumerate()
            .map(|(i, (n, &a))| (RelId(i as u16), &**n, a))
    }
}

/// Relation table plus string pool: everything needed to resolve names.
#[derive(Clone, Debug, Default)]
pub struct Symbols {
    pub rels: RelTable,
    pub strings: StringPool,
}

/// One stored fact.
#[derive(Clone, Debug)]
pub struct StoredFact {
    pub cols: Arc<[Value]>,
    /// Superstep in which the fact was materialized; 0 for input facts.
    pub epoch: u32,
    /// 1 + the maximum height of the facts referenced by its columns.
    pub height: u32,
}

/// The canonical interning index for one `(relation, bucket)` pair.
#[derive(Clone, Debug, Default)]
pub struct Shard {
    index: FxHashMap<Arc<[Value]>, u32>,
    rows: Vec<StoredFact>,
}

impl Shard {
    pub fn get(&self, cols: &[Value]) -> Option<u32> {
        self.index.get(cols).copied()
    }

    pub fn row(&self, counter: u32) -> Option<&StoredFact> {
        self.rows.get(counter as usize)
    }

    pub fn rows(&self) -> &[StoredFact] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the first row whose epoch is `>= epoch`. Rows are appended in
    /// epoch order, so every partition is a contiguous range.
    pub fn first_at_epoch(&self, epoch: u32) -> usize {
        self.rows.partition_point(|r| r.epoch < epoch)
    }

    /// Looks the row up and allocates the next counter if it is new.
    /// Returns the counter and whether it was freshly allocated.
    pub fn insert(
        &mut self,
        cols: Arc<[Value]>,
        epoch: u32,
        height: u32,
    ) -> Result<(u32, bool), ShardFull> {
        if let Some(&c) = self.index.get(&*cols) {
            return Ok((c, false));
        }
        let counter = u32::try_from(self.rows.len()).map_err(|_| ShardFull)?;
        self.index.insert(cols.clone(), counter);
        self.rows.push(StoredFact {
            cols,
            epoch,
            height,
        });
        Ok((counter, true))
    }
}

/// Returned by [`Shard::insert`] when the 32-bit counter space is exhausted.
#[derive(Debug, Clone, Copy)]
pub struct ShardFull;

/// Global fact store: symbols plus one shard per `(relation, bucket)`.
#[derive(Clone, Debug)]
pub struct TermStore {
    symbols: Symbols,
    buckets: u16,
    shards: Vec<Shard>,
}

impl TermStore {
    /// `buckets` is clamped to `1..=65535`.
    pub fn new(symbols: Symbols, buckets: usize) -> Self {
        let buckets = buckets.clamp(1, MAX_BUCKETS - 1) as u16;
        let mut store = TermStore {
            symbols,
            buckets,
            shards: Vec::new(),
        };
        store.grow();
        store
    }

    fn grow(&mut self) {
        let want = self.symbols.rels.len() * self.buckets as usize;
        self.shards.resize_with(want, Shard::default);
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn buckets(&self) -> u16 {
        self.buckets
    }

    pub fn declare_relation(&mut self, name: &str, arity: usize) -> Result<RelId, TermError> {
        let rel = self.symbols.rels.declare(name, arity)?;
        self.grow();
        Ok(rel)
    }

    pub fn intern_str(&mut self, s: &str) -> StrId {
        self.symbols.strings.intern(s)
    }

    pub fn shard_index(&self, rel: RelId, bucket: u16) -> usize {
        rel.index() * self.buckets as usize + bucket as usize
    }

    pub fn shard(&self, rel: RelId, bucket: u16) -> &Shard {
        &self.shards[self.shard_index(rel, bucket)]
    }

    /// All shards with their `(relation, bucket)` coordinates.
    pub fn shards(&self) -> impl Iterator<Item = (RelId, u16, &Shard)> + '_ {
        let b = self.buckets as usize;
        self.shards
            .iter()
            .enumerate()
            .map(move |(i, s)| (RelId((i / b) as u16), (i % b) as u16, s))
    }

    /// Mutable access to every shard, for splitting ownership among workers.
    pub fn shards_mut(&mut self) -> impl Iterator<Item = (RelId, u16, &mut Shard)> + '_ {
        let b = self.buckets as usize;
        self.shards
            .iter_mut()
            .enumerate()
            .map(move |(i, s)| (RelId((i / b) as u16), (i % b) as u16, s))
    }

    /// Interns `(rel, args)`, returning its id. Idempotent.
    pub fn intern(&mut self, rel: RelId, args: &[Value]) -> Result<InternId, TermError> {
        self.intern_at(rel, args, 0).map(|(id, _)| id)
    }

    /// Like [`intern`](Self::intern) but tags a fresh fact with `epoch`.
    pub fn intern_at(
        &mut self,
        rel: RelId,
        args: &[Value],
        epoch: u32,
    ) -> Result<(InternId, bool), TermError> {
        if rel.index() >= self.symbols.rels.len() {
            return Err(TermError::UnknownRelation(rel.0));
        }
        let arity = self.symbols.rels.arity(rel);
        if arity != args.len() {
            return Err(TermError::ArityMismatch {
                name: self.symbols.rels.name(rel).to_string(),
                expected: arity,
                found: args.len(),
            });
        }
        let height = self.height_of(args)?;
        let bucket = canonical_bucket(args, self.buckets);
        let idx = self.shard_index(rel, bucket);
        let (counter, fresh) = self.shards[idx]
            .insert(Arc::from(args), epoch, height)
            .map_err(|_| TermError::CounterOverflow {
                rel: self.symbols.rels.name(rel).to_string(),
                bucket,
            })?;
        Ok((InternId::pack(rel.0, bucket, counter), fresh))
    }

    /// Height a fact with these columns would have; fails on dangling ids.
    pub fn height_of(&self, args: &[Value]) -> Result<u32, TermError> {
        let mut h = 0;
        for v in args {
            if let Value::Id(id) = v {
                h = h.max(self.stored(*id)?.height);
            }
        }
        Ok(h + 1)
    }

    /// Looks up a fact without interning it.
    pub fn find(&self, rel: RelId, args: &[Value]) -> Option<InternId> {
        if rel.index() >= self.symbols.rels.len() || self.symbols.rels.arity(rel) != args.len() {
            return None;
        }
        let bucket = canonical_bucket(args, self.buckets);
        self.shard(rel, bucket)
            .get(args)
            .map(|c| InternId::pack(rel.0, bucket, c))
    }

    pub fn stored(&self, id: InternId) -> Result<&StoredFact, TermError> {
        let (rel, bucket, counter) = id.unpack();
        if rel as usize >= self.symbols.rels.len() || bucket >= self.buckets {
            return Err(TermError::UnknownId(id.raw()));
        }
        self.shard(RelId(rel), bucket)
            .row(counter)
            .ok_or(TermError::UnknownId(id.raw()))
    }

    /// Returns exactly the tuple that was interned under `id`.
    pub fn resolve(&self, id: InternId) -> Result<(RelId, &[Value]), TermError> {
        let row = self.stored(id)?;
        Ok((RelId(id.rel()), &row.cols))
    }

    /// Number of stored facts of `rel`.
    pub fn relation_len(&self, rel: RelId) -> usize {
        (0..self.buckets).map(|b| self.shard(rel, b).len()).sum()
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(Shard::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ids of all facts of `rel`, in shard order.
    pub fn relation_ids(&self, rel: RelId) -> Vec<InternId> {
        let mut out = Vec::with_capacity(self.relation_len(rel));
        for b in 0..self.buckets {
            for c in 0..self.shard(rel, b).len() {
                out.push(InternId::pack(rel.0, b, c as u32));
            }
        }
        out
    }

    /// Ids of every stored fact.
    pub fn all_ids(&self) -> Vec<InternId> {
        (0..self.symbols.rels.len())
            .flat_map(|r| self.relation_ids(RelId(r as u16)))
            .collect()
    }

    /// Fully expanded canonical text of a fact.
    pub fn deep_print(&self, id: InternId) -> Result<String, TermError> {
        let mut out = String::new();
        self.write_fact(&mut out, id)?;
        Ok(out)
    }

    /// Canonical text of a single column value.
    pub fn value_text(&self, v: Value) -> Result<String, TermError> {
        let mut out = String::new();
        self.write_value(&mut out, v)?;
        Ok(out)
    }

    fn write_fact(&self, out: &mut String, id: InternId) -> Result<(), TermError> {
        let (rel, cols) = self.resolve(id)?;
        out.push_str(self.symbols.rels.name(rel));
        out.push('(');
        for (i, v) in cols.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.write_value(out, *v)?;
        }
        out.push(')');
        Ok(())
    }

    fn write_value(&self, out: &mut String, v: Value) -> Result<(), TermError> {
        match v {
            Value::Id(id) => self.write_fact(out, id),
            Value::Int(i) => {
                let _ = write!(out, "{i}");
                Ok(())
            }
            Value::Str(s) => {
                let text = self.symbols.strings.get(s).unwrap_or("");
                write_quoted(out, text);
                Ok(())
            }
        }
    }

    /// Renders the tuple `rel(cols)` without it having to be stored.
    pub fn print_tuple(&self, rel: RelId, cols: &[Value]) -> Result<String, TermError> {
        let mut out = String::from(self.symbols.rels.name(rel));
        out.push('(');
        for (i, v) in cols.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.write_value(&mut out, *v)?;
        }
        out.push(')');
        Ok(out)
    }

    /// Intern-table dump: `<hex id>\t<deep_print>` per fact, sorted by id.
    pub fn dump_interns(&self) -> Result<String, TermError> {
        let mut ids = self.all_ids();
        ids.sort();
        let mut out = String::new();
        for id in ids {
            let _ = writeln!(out, "{id}\t{}", self.deep_print(id)?);
        }
        Ok(out)
    }
}

/// Double-quotes `s` with backslash escapes for `"`, `\`, and control chars.
pub fn write_quoted(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store() -> (TermStore, RelId, RelId, RelId) {
        let mut s = TermStore::new(Symbols::default(), 8);
        let a = s.declare_relation("A", 0).unwrap();
        let g = s.declare_relation("G", 1).unwrap();
        let e = s.declare_relation("edge", 2).unwrap();
        (s, a, g, e)
    }

    #[test]
    fn pack_boundaries() {
        assert_eq!(pack_id(1, 2, 3), 0x0001_0002_0000_0003);
        assert_eq!(pack_id(0, 0, 0), 0);
        assert_eq!(pack_id(65535, 65535, 4_294_967_295), 0xFFFF_FFFF_FFFF_FFFF);
    }

    #[test]
    fn intern_is_idempotent_and_resolves() {
        let (mut s, a, g, e) = store();
        let ia = s.intern(a, &[]).unwrap();
        assert_eq!(s.intern(a, &[]).unwrap(), ia);
        let ig = s.intern(g, &[Value::Id(ia)]).unwrap();
        assert_ne!(ig, ia);
        assert_eq!(s.resolve(ig).unwrap(), (g, &[Value::Id(ia)][..]));
        let ie = s.intern(e, &[Value::Int(1), Value::Int(2)]).unwrap();
        assert_eq!(s.resolve(ie).unwrap().1, &[Value::Int(1), Value::Int(2)]);
        assert_eq!(s.deep_print(ia).unwrap(), "A()");
        assert_eq!(s.deep_print(ig).unwrap(), "G(A())");
        assert_eq!(s.deep_print(ie).unwrap(), "edge(1, 2)");
    }

    #[test]
    fn resolve_unknown_id() {
        let (s, a, ..) = store();
        let bogus = InternId::pack(a.0, 0, 7);
        assert_eq!(s.resolve(bogus), Err(TermError::UnknownId(bogus.raw())));
        assert!(s.resolve(InternId::pack(999, 0, 0)).is_err());
    }

    #[test]
    fn dangling_child_rejected() {
        let (mut s, a, g, _) = store();
        let bogus = InternId::pack(a.0, 3, 5);
        assert!(matches!(
            s.intern(g, &[Value::Id(bogus)]),
            Err(TermError::UnknownId(_))
        ));
    }

    #[test]
    fn arity_checked() {
        let (mut s, _, g, _) = store();
        assert!(matches!(
            s.intern(g, &[]),
            Err(TermError::ArityMismatch { .. })
        ));
        assert!(s.declare_relation("G", 2).is_err());
    }

    #[test]
    fn counters_dense_per_bucket() {
        let (mut s, _, _, e) = store();
        for i in 0..200 {
            s.intern(e, &[Value::Int(i), Value::Int(i + 1)]).unwrap();
        }
        for b in 0..s.buckets() {
            let shard = s.shard(e, b);
            for (c, row) in shard.rows().iter().enumerate() {
                let id = InternId::pack(e.0, b, c as u32);
                assert_eq!(s.find(e, &row.cols), Some(id));
            }
        }
        assert_eq!(s.relation_len(e), 200);
    }

    #[test]
    fn strings_are_quoted() {
        let (mut s, ..) = store();
        let r = s.declare_relation("name", 1).unwrap();
        let h = s.intern_str("a\"b\\c");
        let id = s.intern(r, &[Value::Str(h)]).unwrap();
        assert_eq!(s.deep_print(id).unwrap(), r#"name("a\"b\\c")"#);
    }

    #[test]
    fn heights() {
        let (mut s, a, g, _) = store();
        let ia = s.intern(a, &[]).unwrap();
        let g1 = s.intern(g, &[Value::Id(ia)]).unwrap();
        let g2 = s.intern(g, &[Value::Id(g1)]).unwrap();
        assert_eq!(s.stored(ia).unwrap().height, 1);
        assert_eq!(s.stored(g2).unwrap().height, 3);
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(rel: u16, bucket: u16, counter: u32) {
            prop_assert_eq!(unpack_id(pack_id(rel, bucket, counter)), (rel, bucket, counter));
        }

        #[test]
        fn bijection(pairs in proptest::collection::vec((0i64..20, 0i64..20), 0..60)) {
            let (mut s, _, g, e) = store();
            let mut ids = Vec::new();
            for (x, y) in &pairs {
                let id = s.intern(e, &[Value::Int(*x), Value::Int(*y)]).unwrap();
                let wrapped = s.intern(g, &[Value::Id(id)]).unwrap();
                ids.push((id, (*x, *y)));
                let (rel, cols) = s.resolve(wrapped).map(|(r, c)| (r, c.to_vec())).unwrap();
                prop_assert_eq!(rel, g);
                prop_assert_eq!(s.intern(rel, &cols).unwrap(), wrapped);
            }
            for (id, (x, y)) in &ids {
                for (id2, (x2, y2)) in &ids {
                    prop_assert_eq!(id == id2, (x, y) == (x2, y2));
                }
            }
        }
    }
}
