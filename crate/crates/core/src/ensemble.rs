//! Global functions, local-function ensembles, corruption models and the
//! JSON persistence format.
//!
//! Implicit ensembles never store tables: `f_S(A)` is recomputed from the
//! global function and a stack of corruption layers, each keyed by its own
//! seed, so every estimator that touches the same `S` sees the same table.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{param, Error, Result};
use crate::rng::KeyedHash;
use crate::setcore::{
    binom, enumerate_k_subsets, enumerate_small_subsets, small_domain_len, small_subset_rank, Symbol, TestParams,
    VertexSet,
};

/// Largest number of explicit tables [`LocalEnsemble::to_explicit`] will build.
pub const EXPLICIT_LIMIT: u128 = 1_000_000;

/// `F`: a symbol for every subset of `[n]` of size `1..=d` (or `0..=d`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalFunction {
    n: usize,
    d: usize,
    alphabet_size: usize,
    include_empty: bool,
    values: Vec<Symbol>,
}

impl GlobalFunction {
    fn check_shape(n: usize, d: usize, alphabet_size: usize) -> Result<()> {
        if d == 0 {
            return param("dimension d must be at least 1");
        }
        if alphabet_size < 2 || alphabet_size > Symbol::MAX as usize {
            return param(format!("alphabet size {alphabet_size} out of range"));
        }
        if binom(n, d.min(n)) > 50_000_000 {
            return param(format!("domain of size-{d} subsets of [{n}] is too large to store"));
        }
        Ok(())
    }

    pub fn constant(n: usize, d: usize, alphabet_size: usize, include_empty: bool, symbol: Symbol) -> Result<Self> {
        Self::check_shape(n, d, alphabet_size)?;
        if symbol as usize >= alphabet_size {
            return param(format!("symbol {symbol} outside alphabet of size {alphabet_size}"));
        }
        let len = small_domain_len(n, d, include_empty);
        Ok(GlobalFunction { n, d, alphabet_size, include_empty, values: vec![symbol; len] })
    }

    /// Independent uniform symbols on the whole domain.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, alphabet_size: usize, include_empty: bool, rng: &mut R) -> Result<Self> {
        let mut f = Self::constant(n, d, alphabet_size, include_empty, 0)?;
        for v in &mut f.values {
            *v = rng.gen_range(0..alphabet_size as Symbol);
        }
        Ok(f)
    }

    pub fn from_fn(
        n: usize,
        d: usize,
        alphabet_size: usize,
        include_empty: bool,
        mut value: impl FnMut(&VertexSet) -> Symbol,
    ) -> Result<Self> {
        let mut f = Self::constant(n, d, alphabet_size, include_empty, 0)?;
        for a in enumerate_small_subsets(&VertexSet::full(n), d, include_empty) {
            let v = value(&a);
            f.set(&a, v)?;
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn include_empty(&self) -> bool {
        self.include_empty
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn rank(&self, a: &VertexSet) -> Option<usize> {
        let size = a.len();
        if size > self.d || (size == 0 && !self.include_empty) || !a.fits(self.n) {
            return None;
        }
        Some(small_subset_rank(self.n, self.include_empty, &a.to_vec()))
    }

    pub fn get(&self, a: &VertexSet) -> Option<Symbol> {
        self.rank(a).map(|r| self.values[r])
    }

    pub fn set(&mut self, a: &VertexSet, symbol: Symbol) -> Result<()> {
        if symbol as usize >= self.alphabet_size {
            return param(format!("symbol {symbol} outside alphabet of size {}", self.alphabet_size));
        }
        let r = self.rank(a).ok_or_else(|| Error::Parameter(format!("{a} is outside the domain")))?;
        self.values[r] = symbol;
        Ok(())
    }

    /// Every domain point in size-then-lexicographic order.
    pub fn domain(&self) -> impl Iterator<Item = VertexSet> {
        enumerate_small_subsets(&VertexSet::full(self.n), self.d, self.include_empty)
    }

    /// `F|_S` as a local function.
    pub fn restrict(&self, s: &VertexSet) -> LocalFunction {
        LocalFunction::from_fn(s.clone(), self.d, self.include_empty, |a| self.get(a).expect("subset of [n]"))
    }

    /// Number of domain points where the two functions differ.
    pub fn distance(&self, other: &GlobalFunction) -> usize {
        self.values.iter().zip(&other.values).filter(|(a, b)| a != b).count()
    }
}

#[derive(Serialize, Deserialize)]
struct GlobalRepr {
    n: usize,
    d: usize,
    alphabet_size: usize,
    #[serde(default)]
    include_empty: bool,
    values: BTreeMap<String, Symbol>,
}

impl Serialize for GlobalFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let values = self.domain().map(|a| (a.key(), self.get(&a).expect("domain point"))).collect();
        GlobalRepr { n: self.n, d: self.d, alphabet_size: self.alphabet_size, include_empty: self.include_empty, values }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GlobalFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = GlobalRepr::deserialize(deserializer)?;
        let mut f = GlobalFunction::constant(repr.n, repr.d, repr.alphabet_size, repr.include_empty, 0)
            .map_err(D::Error::custom)?;
        let mut seen = vec![false; f.len()];
        for (key, symbol) in &repr.values {
            let a = VertexSet::parse_key(key).map_err(D::Error::custom)?;
            let r = f.rank(&a).ok_or_else(|| D::Error::custom(format!("key {key:?} is outside the domain")))?;
            f.set(&a, *symbol).map_err(D::Error::custom)?;
            seen[r] = true;
        }
        if let Some(missing) = f.domain().find(|a| !seen[f.rank(a).unwrap()]) {
            return Err(D::Error::custom(format!("no value for {:?}", missing.key())));
        }
        Ok(f)
    }
}

/// `f_S`: a symbol for every subset of `S` of size `1..=d` (or `0..=d`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFunction {
    set: VertexSet,
    d: usize,
    include_empty: bool,
    // colex rank within each size class, positions relative to `set`
    values: Vec<Symbol>,
}

impl LocalFunction {
    pub fn from_fn(set: VertexSet, d: usize, include_empty: bool, mut value: impl FnMut(&VertexSet) -> Symbol) -> Self {
        let m = set.len();
        let mut values = vec![0; small_domain_len(m, d, include_empty)];
        for a in enumerate_small_subsets(&set, d, include_empty) {
            let positions: SmallVec<[usize; 4]> = a.iter().map(|v| set.rank_of(v)).collect();
            values[small_subset_rank(m, include_empty, &positions)] = value(&a);
        }
        LocalFunction { set, d, include_empty, values }
    }

    pub fn set(&self) -> &VertexSet {
        &self.set
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn include_empty(&self) -> bool {
        self.include_empty
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, a: &VertexSet) -> Option<Symbol> {
        let size = a.len();
        if size > self.d || (size == 0 && !self.include_empty) || !a.is_subset(&self.set) {
            return None;
        }
        let positions: SmallVec<[usize; 4]> = a.iter().map(|v| self.set.rank_of(v)).collect();
        Some(self.values[small_subset_rank(self.set.len(), self.include_empty, &positions)])
    }

    /// `(A, f(A))` in size-then-lexicographic order of `A`.
    pub fn entries(&self) -> impl Iterator<Item = (VertexSet, Symbol)> + '_ {
        enumerate_small_subsets(&self.set, self.d, self.include_empty).map(move |a| {
            let v = self.get(&a).expect("domain point");
            (a, v)
        })
    }

    /// Whether `self` equals `g` at every domain point.
    pub fn agrees_with_global(&self, g: &GlobalFunction) -> bool {
        self.entries().all(|(a, v)| g.get(&a) == Some(v))
    }
}

/// Distribution of the local sets `S`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// `S` ranges over the `k`-subsets of `[n]`.
    #[default]
    Uniform,
    /// `S ~ mu_p`; tables exist for every subset of `[n]`.
    Biased { p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// With probability `rate` per `S`, the whole table is resampled uniformly.
    ReplaceSet,
    /// With probability `rate` per `(S, A)`, the entry is replaced by a uniformly random different symbol.
    FlipEntry,
    /// Like `FlipEntry`, restricted to the designated points `A ∈ D`.
    PlantedDisagreement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub mode: CorruptionMode,
    pub rate: f64,
    /// The designated set `D` for planted disagreement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<VertexSet>>,
    /// When present, only sets `S ⊇ scope` are affected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<VertexSet>,
}

impl CorruptionSpec {
    pub fn new(mode: CorruptionMode, rate: f64) -> Self {
        CorruptionSpec { mode, rate, planted: None, scope: None }
    }

    pub fn planted(rate: f64, points: Vec<VertexSet>) -> Self {
        CorruptionSpec { mode: CorruptionMode::PlantedDisagreement, rate, planted: Some(points), scope: None }
    }

    pub fn within(mut self, scope: VertexSet) -> Self {
        self.scope = Some(scope);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return param(format!("corruption rate {} outside [0, 1]", self.rate));
        }
        if self.mode == CorruptionMode::PlantedDisagreement && self.planted.is_none() {
            return param("planted_disagreement needs the designated point set");
        }
        Ok(())
    }
}

/// A corruption spec together with the seed that keys its decisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionLayer {
    #[serde(flatten)]
    pub spec: CorruptionSpec,
    pub seed: u64,
}

// domain separation tags for the keyed hash
const TAG_REPLACE_DECIDE: u64 = 0x5245_504c_4143_4531;
const TAG_REPLACE_VALUE: u64 = 0x5245_504c_4143_4532;
const TAG_FLIP_DECIDE: u64 = 0x464c_4950_0000_0001;
const TAG_FLIP_VALUE: u64 = 0x464c_4950_0000_0002;

impl CorruptionLayer {
    fn set_hash(&self, tag: u64, s: &VertexSet) -> KeyedHash {
        KeyedHash::new(self.seed).word(tag).word(s.len() as u64).words(s.words())
    }

    fn applies_to(&self, s: &VertexSet) -> bool {
        self.spec.scope.as_ref().is_none_or(|t| t.is_subset(s))
    }

    /// Whether the whole table of `S` is replaced (only for `ReplaceSet`).
    fn replaces(&self, s: &VertexSet) -> bool {
        self.spec.mode == CorruptionMode::ReplaceSet
            && self.applies_to(s)
            && self.set_hash(TAG_REPLACE_DECIDE, s).unit() < self.spec.rate
    }

    fn apply(&self, s: &VertexSet, replaced: bool, a: &VertexSet, v: Symbol, q: usize) -> Symbol {
        let point = |tag| self.set_hash(tag, s).word(a.len() as u64 | 1 << 32).words(a.words());
        match self.spec.mode {
            CorruptionMode::ReplaceSet => {
                if replaced {
                    (point(TAG_REPLACE_VALUE).finish() % q as u64) as Symbol
                } else {
                    v
                }
            }
            CorruptionMode::FlipEntry | CorruptionMode::PlantedDisagreement => {
                if !self.applies_to(s) {
                    return v;
                }
                if self.spec.mode == CorruptionMode::PlantedDisagreement
                    && !self.spec.planted.as_ref().is_some_and(|d| d.contains(a))
                {
                    return v;
                }
                if point(TAG_FLIP_DECIDE).unit() < self.spec.rate {
                    let shift = 1 + point(TAG_FLIP_VALUE).finish() % (q as u64 - 1);
                    ((v as u64 + shift) % q as u64) as Symbol
                } else {
                    v
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Backing {
    /// Stored tables, keyed by `S`.
    Explicit(BTreeMap<VertexSet, LocalFunction>),
    /// `F|_S` with corruption layers applied in order.
    Implicit { global: GlobalFunction, layers: Vec<CorruptionLayer> },
}

/// The ensemble `{f_S}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEnsemble {
    params: TestParams,
    include_empty: bool,
    regime: Regime,
    backing: Backing,
}

/// Read access to `f_S` for one `S`, without building the full table.
pub struct LocalView<'a> {
    ensemble: &'a LocalEnsemble,
    set: VertexSet,
    replaced: SmallVec<[bool; 4]>,
}

impl LocalView<'_> {
    pub fn set(&self) -> &VertexSet {
        &self.set
    }

    /// `f_S(A)`; `A` must be a domain point of `S`.
    pub fn get(&self, a: &VertexSet) -> Symbol {
        match &self.ensemble.backing {
            Backing::Explicit(tables) => tables[&self.set].get(a).expect("domain point of S"),
            Backing::Implicit { global, layers } => {
                let q = self.ensemble.params.alphabet_size;
                let mut v = global.get(a).expect("domain point of S");
                for (layer, &replaced) in layers.iter().zip(&self.replaced) {
                    v = layer.apply(&self.set, replaced, a, v, q);
                }
                v
            }
        }
    }

    pub fn materialize(&self) -> LocalFunction {
        LocalFunction::from_fn(self.set.clone(), self.ensemble.params.d, self.ensemble.include_empty, |a| self.get(a))
    }
}

impl LocalEnsemble {
    /// The global ensemble `f_S = F|_S` over `k`-subsets. The default
    /// intersection size for agreement tests is `t = k / 2`; see [`Self::with_t`].
    pub fn from_global(global: GlobalFunction, k: usize) -> Result<Self> {
        let params = TestParams::new(global.n, k, k / 2, global.d, global.alphabet_size)?;
        if k < global.d {
            return param(format!("k = {k} is below the dimension d = {}", global.d));
        }
        Ok(LocalEnsemble {
            params,
            include_empty: global.include_empty,
            regime: Regime::Uniform,
            backing: Backing::Implicit { global, layers: Vec::new() },
        })
    }

    /// An explicit ensemble; every table must be total on its domain with `|S| = k`.
    pub fn explicit(params: TestParams, include_empty: bool, tables: Vec<LocalFunction>) -> Result<Self> {
        params.validate()?;
        let mut map = BTreeMap::new();
        for f in tables {
            if f.set.len() != params.k || !f.set.fits(params.n) {
                return param(format!("table for {} does not describe a {}-subset of [{}]", f.set, params.k, params.n));
            }
            if f.d != params.d || f.include_empty != include_empty {
                return param(format!("table for {} has the wrong domain", f.set));
            }
            if f.values.iter().any(|&v| v as usize >= params.alphabet_size) {
                return param(format!("table for {} uses symbols outside the alphabet", f.set));
            }
            if map.insert(f.set.clone(), f).is_some() {
                return param("duplicate table");
            }
        }
        Ok(LocalEnsemble { params, include_empty, regime: Regime::Uniform, backing: Backing::Explicit(map) })
    }

    pub fn with_t(mut self, t: usize) -> Result<Self> {
        TestParams { t, ..self.params }.validate()?;
        self.params.t = t;
        Ok(self)
    }

    /// Switch an implicit ensemble to the `mu_p` regime, where `S` may be any subset of `[n]`.
    pub fn with_regime(mut self, regime: Regime) -> Result<Self> {
        if let Regime::Biased { p } = regime {
            if !(p > 0.0 && p < 1.0) {
                return param(format!("bias p = {p} outside (0, 1)"));
            }
            if matches!(self.backing, Backing::Explicit(_)) {
                return param("explicit ensembles only cover k-subsets");
            }
        }
        self.regime = regime;
        Ok(self)
    }

    pub fn params(&self) -> &TestParams {
        &self.params
    }

    pub fn include_empty(&self) -> bool {
        self.include_empty
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    /// The uncorrupted global function of an implicit ensemble.
    pub fn global(&self) -> Option<&GlobalFunction> {
        match &self.backing {
            Backing::Implicit { global, .. } => Some(global),
            Backing::Explicit(_) => None,
        }
    }

    /// Add a corruption layer keyed by a seed drawn from `rng`.
    pub fn corrupt<R: RngCore + ?Sized>(&self, spec: CorruptionSpec, rng: &mut R) -> Result<LocalEnsemble> {
        self.corrupt_with_seed(spec, rng.next_u64())
    }

    pub fn corrupt_with_seed(&self, spec: CorruptionSpec, seed: u64) -> Result<LocalEnsemble> {
        spec.validate()?;
        if let Some(points) = &spec.planted {
            if let Some(bad) = points.iter().find(|a| a.len() > self.params.d || !a.fits(self.params.n)) {
                return param(format!("planted point {bad} is outside the domain"));
            }
        }
        let layer = CorruptionLayer { spec, seed };
        let mut out = self.clone();
        match &mut out.backing {
            Backing::Implicit { layers, .. } => {
                if layer.spec.rate > 0.0 {
                    layers.push(layer);
                }
            }
            Backing::Explicit(tables) => {
                let q = self.params.alphabet_size;
                for (s, f) in tables.iter_mut() {
                    let replaced = layer.replaces(s);
                    let old = f.clone();
                    *f = LocalFunction::from_fn(s.clone(), old.d, old.include_empty, |a| {
                        layer.apply(s, replaced, a, old.get(a).expect("domain point"), q)
                    });
                }
            }
        }
        Ok(out)
    }

    fn check_set(&self, s: &VertexSet) -> Result<()> {
        if !s.fits(self.params.n) {
            return param(format!("{s} is not a subset of [{}]", self.params.n));
        }
        match (&self.regime, &self.backing) {
            (_, Backing::Explicit(tables)) => {
                if !tables.contains_key(s) {
                    return param(format!("no table stored for {s}"));
                }
            }
            (Regime::Uniform, _) if s.len() != self.params.k => {
                return param(format!("|S| = {} but k = {}", s.len(), self.params.k));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn view(&self, s: &VertexSet) -> Result<LocalView<'_>> {
        self.check_set(s)?;
        Ok(self.view_unchecked(s.clone()))
    }

    pub(crate) fn view_unchecked(&self, s: VertexSet) -> LocalView<'_> {
        let replaced = match &self.backing {
            Backing::Implicit { layers, .. } => layers.iter().map(|l| l.replaces(&s)).collect(),
            Backing::Explicit(_) => SmallVec::new(),
        };
        LocalView { ensemble: self, set: s, replaced }
    }

    pub fn materialize_local(&self, s: &VertexSet) -> Result<LocalFunction> {
        Ok(self.view(s)?.materialize())
    }

    /// Every `k`-subset's table, for small `C(n, k)`.
    pub fn to_explicit(&self) -> Result<LocalEnsemble> {
        if self.regime != Regime::Uniform {
            return param("only the uniform regime can be made explicit");
        }
        let count = binom(self.params.n, self.params.k);
        if count > EXPLICIT_LIMIT {
            return Err(Error::ExactInfeasible(format!("{count} tables exceed the explicit limit")));
        }
        let tables = enumerate_k_subsets(self.params.n, self.params.k)
            .map(|s| self.view_unchecked(s).materialize())
            .collect();
        LocalEnsemble::explicit(self.params, self.include_empty, tables)
    }

    pub fn to_json(&self) -> Result<String> {
        let header = Header {
            n: self.params.n,
            k: self.params.k,
            t: self.params.t,
            d: self.params.d,
            alphabet_size: self.params.alphabet_size,
            kind: match self.backing {
                Backing::Explicit(_) => Kind::Explicit,
                Backing::Implicit { .. } => Kind::Implicit,
            },
            include_empty: self.include_empty,
            regime: self.regime,
        };
        let file = match &self.backing {
            Backing::Implicit { global, layers } => EnsembleFile {
                header,
                generator: Some(Generator { global: global.clone(), corruption: layers.clone() }),
                records: None,
            },
            Backing::Explicit(tables) => EnsembleFile {
                header,
                generator: None,
                records: Some(
                    tables
                        .values()
                        .map(|f| Record { s: f.set.clone(), f: f.entries().map(|(a, v)| (a.key(), v)).collect() })
                        .collect(),
                ),
            },
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Structural(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<LocalEnsemble> {
        let file: EnsembleFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        file.into_ensemble()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LocalEnsemble> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Implicit,
    Explicit,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n: usize,
    k: usize,
    t: usize,
    d: usize,
    alphabet_size: usize,
    kind: Kind,
    #[serde(default)]
    include_empty: bool,
    #[serde(default)]
    regime: Regime,
}

#[derive(Serialize, Deserialize)]
struct Generator {
    global: GlobalFunction,
    corruption: Vec<CorruptionLayer>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    #[serde(rename = "S")]
    s: VertexSet,
    f: BTreeMap<String, Symbol>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    header: Header,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<Generator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    records: Option<Vec<Record>>,
}

impl EnsembleFile {
    fn into_ensemble(self) -> Result<LocalEnsemble> {
        let h = self.header;
        let params = TestParams::new(h.n, h.k, h.t, h.d, h.alphabet_size)?;
        match (h.kind, self.generator, self.records) {
            (Kind::Implicit, Some(gen), None) => {
                let g = gen.global;
                if (g.n, g.d, g.alphabet_size, g.include_empty) != (h.n, h.d, h.alphabet_size, h.include_empty) {
                    return Err(Error::Structural("global function does not match the header".into()));
                }
                let mut e = LocalEnsemble::from_global(g, h.k)?.with_t(h.t)?.with_regime(h.regime)?;
                for layer in gen.corruption {
                    e = e.corrupt_with_seed(layer.spec, layer.seed)?;
                }
                Ok(e)
            }
            (Kind::Explicit, None, Some(records)) => {
                let mut tables = Vec::with_capacity(records.len());
                for rec in records {
                    let domain = small_domain_len(rec.s.len(), h.d, h.include_empty);
                    let mut entries = BTreeMap::new();
                    for (key, v) in rec.f {
                        entries.insert(VertexSet::parse_key(&key)?, v);
                    }
                    if entries.len() != domain {
                        return Err(Error::Structural(format!("table for {} has {} of {domain} entries", rec.s, entries.len())));
                    }
                    let mut missing = None;
                    let f = LocalFunction::from_fn(rec.s.clone(), h.d, h.include_empty, |a| {
                        entries.get(a).copied().unwrap_or_else(|| {
                            missing = Some(a.clone());
                            0
                        })
                    });
                    if let Some(a) = missing {
                        return Err(Error::Structural(format!("table for {} has no value at {a}", rec.s)));
                    }
                    tables.push(f);
                }
                LocalEnsemble::explicit(params, h.include_empty, tables)
            }
            _ => Err(Error::Structural("header kind does not match the body".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::setcore::sample_k_subset;

    fn global(n: usize, d: usize, q: usize, seed: u64) -> GlobalFunction {
        GlobalFunction::random(n, d, q, false, &mut rng::stream(seed, "global", 0)).unwrap()
    }

    #[test]
    fn global_function_indexing_and_json() {
        let mut f = GlobalFunction::constant(5, 2, 3, false, 0).unwrap();
        assert_eq!(f.len(), 15);
        f.set(&VertexSet::from_indices([1, 4]), 2).unwrap();
        assert_eq!(f.get(&VertexSet::from_indices([1, 4])), Some(2));
        assert_eq!(f.get(&VertexSet::from_indices([0, 4])), Some(0));
        assert_eq!(f.get(&VertexSet::new()), None);
        assert!(f.set(&VertexSet::singleton(1), 3).is_err());
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"1,4\":2"));
        let back: GlobalFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let partial = text.replace("\"1,4\":2,", "");
        assert!(serde_json::from_str::<GlobalFunction>(&partial).is_err());
    }

    #[test]
    fn local_functions_index_by_members() {
        let s = VertexSet::from_indices([2, 5, 7, 11]);
        let f = LocalFunction::from_fn(s.clone(), 2, true, |a| a.iter().sum::<usize>() as Symbol);
        assert_eq!(f.len(), 11);
        for (a, v) in f.entries() {
            assert_eq!(v as usize, a.iter().sum::<usize>());
        }
        assert_eq!(f.get(&VertexSet::from_indices([5, 11])), Some(16));
        assert_eq!(f.get(&VertexSet::from_indices([3])), None);
    }

    #[test]
    fn from_global_matches_probes() {
        let g = global(30, 2, 4, 1);
        let e = LocalEnsemble::from_global(g.clone(), 6).unwrap();
        let mut r = rng::stream(1, "probe", 0);
        for _ in 0..100 {
            let s = sample_k_subset(30, 6, &mut r).unwrap();
            let f = e.materialize_local(&s).unwrap();
            assert!(f.agrees_with_global(&g));
            assert_eq!(f, g.restrict(&s));
        }
        assert!(e.materialize_local(&VertexSet::from_indices([0, 1])).is_err());
    }

    #[test]
    fn zero_rate_is_identity_and_materialization_is_deterministic() {
        let e = LocalEnsemble::from_global(global(20, 1, 3, 2), 5).unwrap();
        let mut r = rng::stream(2, "c", 0);
        for mode in [CorruptionMode::ReplaceSet, CorruptionMode::FlipEntry] {
            assert_eq!(e.corrupt(CorruptionSpec::new(mode, 0.0), &mut r).unwrap(), e);
        }
        let noisy = e.corrupt(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.3), &mut r).unwrap();
        let s = VertexSet::from_indices([1, 3, 5, 7, 9]);
        assert_eq!(noisy.materialize_local(&s).unwrap(), noisy.materialize_local(&s).unwrap());
    }

    #[test]
    fn replace_set_rate_matches_nominal() {
        let g = global(60, 1, 2, 3);
        let e = LocalEnsemble::from_global(g.clone(), 10).unwrap();
        let noisy = e.corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.05), 77).unwrap();
        let mut r = rng::stream(3, "probe", 0);
        let draws = 10_000;
        let differ = (0..draws)
            .filter(|_| {
                let s = sample_k_subset(60, 10, &mut r).unwrap();
                !noisy.materialize_local(&s).unwrap().agrees_with_global(&g)
            })
            .count();
        // a replaced table equals F|_S with probability 2^-10
        let expected = 0.05 * (1.0 - 2f64.powi(-10));
        let sigma = (expected * (1.0 - expected) / draws as f64).sqrt();
        assert!((differ as f64 / draws as f64 - expected).abs() < 3.0 * sigma, "{differ}");
    }

    #[test]
    fn replace_set_half_rate_and_full_randomization() {
        let g = global(30, 1, 2, 4);
        let e = LocalEnsemble::from_global(g.clone(), 6).unwrap();
        let half = e.corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.5), 5).unwrap();
        let sets: Vec<VertexSet> = enumerate_k_subsets(30, 6).take(1000).collect();
        let differ = sets.iter().filter(|s| !half.materialize_local(s).unwrap().agrees_with_global(&g)).count();
        let expected = 0.5 * (1.0 - 2f64.powi(-6));
        let sigma = (expected * (1.0 - expected) / 1000.0).sqrt();
        assert!((differ as f64 / 1000.0 - expected).abs() < 3.0 * sigma, "{differ}");

        let full = e.corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 1.0), 6).unwrap();
        let matches = sets.iter().filter(|s| full.materialize_local(s).unwrap().agrees_with_global(&g)).count();
        let p = 2f64.powi(-6);
        assert!((matches as f64 / 1000.0 - p).abs() < 3.0 * (p * (1.0 - p) / 1000.0).sqrt() + 1e-9);
    }

    #[test]
    fn flip_entry_always_changes_the_symbol() {
        let g = global(12, 2, 4, 7);
        let e = LocalEnsemble::from_global(g.clone(), 4).unwrap();
        let all = e.corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 1.0), 8).unwrap();
        for s in enumerate_k_subsets(12, 4).take(50) {
            for (a, v) in all.materialize_local(&s).unwrap().entries() {
                assert_ne!(Some(v), g.get(&a));
            }
        }
    }

    #[test]
    fn planted_disagreement_only_touches_designated_points() {
        let g = global(12, 2, 2, 9);
        let d = vec![VertexSet::from_indices([0, 1]), VertexSet::from_indices([2, 3])];
        let e = LocalEnsemble::from_global(g.clone(), 5)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::planted(1.0, d.clone()), 10)
            .unwrap();
        for s in enumerate_k_subsets(12, 5).take(200) {
            for (a, v) in e.materialize_local(&s).unwrap().entries() {
                assert_eq!(d.contains(&a), Some(v) != g.get(&a), "{a}");
            }
        }
    }

    #[test]
    fn scoped_corruption_only_touches_supersets() {
        let g = global(12, 1, 3, 11);
        let t = VertexSet::from_indices([0, 1]);
        let e = LocalEnsemble::from_global(g.clone(), 4)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 1.0).within(t.clone()), 12)
            .unwrap();
        for s in enumerate_k_subsets(12, 4) {
            let ok = e.materialize_local(&s).unwrap().agrees_with_global(&g);
            assert_eq!(ok, !t.is_subset(&s));
        }
    }

    #[test]
    fn json_round_trips() {
        let g = global(14, 2, 3, 13);
        let e = LocalEnsemble::from_global(g, 5)
            .unwrap()
            .with_t(2)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.2), 14)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.1), 15)
            .unwrap();
        let text = e.to_json().unwrap();
        assert_eq!(text, e.to_json().unwrap());
        let back = LocalEnsemble::from_json(&text).unwrap();
        assert_eq!(back, e);
        let mut r = rng::stream(13, "probe", 0);
        for _ in 0..100 {
            let s = sample_k_subset(14, 5, &mut r).unwrap();
            assert_eq!(back.materialize_local(&s).unwrap(), e.materialize_local(&s).unwrap());
        }

        let small = LocalEnsemble::from_global(global(7, 1, 2, 16), 3)
            .unwrap()
            .corrupt_with_seed(CorruptionSpec::new(CorruptionMode::FlipEntry, 0.4), 17)
            .unwrap();
        let explicit = small.to_explicit().unwrap();
        for s in enumerate_k_subsets(7, 3) {
            assert_eq!(explicit.materialize_local(&s).unwrap(), small.materialize_local(&s).unwrap());
        }
        let text = explicit.to_json().unwrap();
        assert_eq!(LocalEnsemble::from_json(&text).unwrap(), explicit);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        e.save(&path).unwrap();
        assert_eq!(LocalEnsemble::load(&path).unwrap(), e);
    }

    #[test]
    fn truncated_json_reports_position() {
        let e = LocalEnsemble::from_global(global(10, 1, 2, 18), 4).unwrap();
        let text = e.to_json().unwrap();
        let cut = &text[..text.len() / 2];
        match LocalEnsemble::from_json(cut) {
            Err(Error::Parse { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
        let wrong_kind = text.replace("\"implicit\"", "\"explicit\"");
        assert!(matches!(LocalEnsemble::from_json(&wrong_kind), Err(Error::Structural(_))));
    }

    #[test]
    fn explicit_corruption_matches_implicit() {
        let base = LocalEnsemble::from_global(global(7, 2, 3, 19), 3).unwrap();
        let spec = CorruptionSpec::new(CorruptionMode::ReplaceSet, 0.5);
        let implicit = base.corrupt_with_seed(spec.clone(), 20).unwrap();
        let explicit = base.to_explicit().unwrap().corrupt_with_seed(spec, 20).unwrap();
        for s in enumerate_k_subsets(7, 3) {
            assert_eq!(explicit.materialize_local(&s).unwrap(), implicit.materialize_local(&s).unwrap());
        }
    }

    #[test]
    fn biased_regime_accepts_any_set() {
        let e = LocalEnsemble::from_global(global(10, 1, 2, 21), 3)
            .unwrap()
            .with_regime(Regime::Biased { p: 0.3 })
            .unwrap();
        assert_eq!(e.materialize_local(&VertexSet::from_indices([1, 2, 3, 4, 5])).unwrap().len(), 5);
        assert_eq!(e.materialize_local(&VertexSet::new()).unwrap().len(), 0);
    }
}
