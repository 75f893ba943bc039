//! Weight functions on index vectors and the per-iteration schedules that
//! emit them.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::strings::IndexVector;
use crate::{Error, Result};

/// Allowed deviation of the weight total from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A finitely supported map from index vectors to positive weights that sum
/// to one.
///
/// Besides an explicit sorted list of entries, the uniform weighting of the
/// singletons `(1), ..., (m)` has a compact form so that schedules which use
/// thousands of singletons per iteration stay cheap. Both forms describe the
/// same mathematical object and all queries treat them alike.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    repr: Repr,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Entries(Vec<(IndexVector, f64)>),
    UniformSingletons(usize),
}

/// Borrowed view of the support of a [`WeightFunction`].
#[derive(Clone, Copy, Debug)]
pub enum Support<'a> {
    /// Entries sorted lexicographically by index vector.
    Entries(&'a [(IndexVector, f64)]),
    /// `(1), ..., (count)`, each with weight `1 / count`.
    UniformSingletons { count: usize, weight: f64 },
}

impl WeightFunction {
    /// Validates `pairs`: weights must be finite and nonnegative and sum to
    /// one within [`WEIGHT_SUM_TOLERANCE`]. Zero weights are dropped,
    /// repeated index vectors are merged, and the survivors are renormalized
    /// by their exact sum.
    pub fn new(pairs: Vec<(IndexVector, f64)>) -> Result<Self> {
        for (iota, w) in &pairs {
            if !w.is_finite() {
                return Err(Error::InvalidWeights(format!("weight of {iota} is not finite")));
            }
            if *w < 0.0 {
                return Err(Error::InvalidWeights(format!("weight of {iota} is negative ({w})")));
            }
        }
        let mut entries: Vec<(IndexVector, f64)> = pairs.into_iter().filter(|(_, w)| *w > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|later, kept| {
            if later.0 == kept.0 {
                kept.1 += later.1;
                true
            } else {
                false
            }
        });
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        for entry in &mut entries {
            entry.1 /= total;
        }
        Ok(WeightFunction { repr: Repr::Entries(entries) })
    }

    /// The weight function that puts all mass on `iota`.
    pub fn single(iota: IndexVector) -> Self {
        WeightFunction { repr: Repr::Entries(alloc::vec![(iota, 1.0)]) }
    }

    /// Weight `1 / count` on each of `(1), ..., (count)`.
    pub fn uniform_singletons(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidWeights("uniform weighting needs at least one index".into()));
        }
        Ok(WeightFunction { repr: Repr::UniformSingletons(count) })
    }

    pub fn support(&self) -> Support<'_> {
        match &self.repr {
            Repr::Entries(e) => Support::Entries(e),
            Repr::UniformSingletons(count) => Support::UniformSingletons { count: *count, weight: 1.0 / *count as f64 },
        }
    }

    /// Number of index vectors used.
    pub fn len(&self) -> usize {
        match &self.repr {
            Repr::Entries(e) => e.len(),
            Repr::UniformSingletons(count) => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All `(iota, w(iota))` pairs in canonical order.
    pub fn entries(&self) -> Vec<(IndexVector, f64)> {
        match &self.repr {
            Repr::Entries(e) => e.clone(),
            Repr::UniformSingletons(count) => {
                let w = 1.0 / *count as f64;
                (1..=*count).map(|i| (IndexVector::single(i).expect("i >= 1"), w)).collect()
            }
        }
    }

    /// `w(iota)`, zero outside the support.
    pub fn weight(&self, iota: &IndexVector) -> f64 {
        match &self.repr {
            Repr::Entries(e) => e.binary_search_by(|(j, _)| j.cmp(iota)).map(|p| e[p].1).unwrap_or(0.0),
            Repr::UniformSingletons(count) => match iota.indices() {
                [i] if *i <= *count => 1.0 / *count as f64,
                _ => 0.0,
            },
        }
    }

    /// Longest index vector in the support.
    pub fn max_length(&self) -> usize {
        match &self.repr {
            Repr::Entries(e) => e.iter().map(|(iota, _)| iota.len()).max().unwrap_or(1),
            Repr::UniformSingletons(_) => 1,
        }
    }

    /// Smallest weight in use.
    pub fn min_weight(&self) -> f64 {
        match &self.repr {
            Repr::Entries(e) => e.iter().map(|(_, w)| *w).fold(f64::INFINITY, f64::min),
            Repr::UniformSingletons(count) => 1.0 / *count as f64,
        }
    }

    /// Whether some index vector in the support contains `i`.
    pub fn uses_index(&self, i: usize) -> bool {
        match &self.repr {
            Repr::Entries(e) => e.iter().any(|(iota, _)| iota.contains(i)),
            Repr::UniformSingletons(count) => i >= 1 && i <= *count,
        }
    }

    /// Sum of `w(iota)` over the support entries that contain `i`.
    pub fn index_weight_sum(&self, i: usize) -> f64 {
        match &self.repr {
            Repr::Entries(e) => e.iter().filter(|(iota, _)| iota.contains(i)).map(|(_, w)| w).sum(),
            Repr::UniformSingletons(count) => {
                if i >= 1 && i <= *count {
                    1.0 / *count as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// Sum of `w(iota) / Position(i, iota)`; vectors without `i` contribute 0.
    pub fn index_position_sum(&self, i: usize) -> f64 {
        match &self.repr {
            Repr::Entries(e) => e.iter().map(|(iota, w)| iota.position(i).divide(*w)).sum(),
            Repr::UniformSingletons(_) => self.index_weight_sum(i),
        }
    }

    pub fn total(&self) -> f64 {
        match &self.repr {
            Repr::Entries(e) => e.iter().map(|(_, w)| w).sum(),
            Repr::UniformSingletons(count) => *count as f64 * (1.0 / *count as f64),
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::UniformSingletons(count) => write!(f, "{{(1..{count}): 1/{count}}}"),
            Repr::Entries(e) => {
                f.write_str("{")?;
                for (n, (iota, w)) in e.iter().enumerate() {
                    if n > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{iota}: {w}")?;
                }
                f.write_str("}")
            }
        }
    }
}

pub fn make_weight(pairs: Vec<(IndexVector, f64)>) -> Result<WeightFunction> {
    WeightFunction::new(pairs)
}

pub fn max_length(w: &WeightFunction) -> usize {
    w.max_length()
}

pub fn index_weight_sum(w: &WeightFunction, i: usize) -> f64 {
    w.index_weight_sum(i)
}

pub fn index_position_sum(w: &WeightFunction, i: usize) -> f64 {
    w.index_position_sum(i)
}

/// How a schedule orders the indices inside its long strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Permutation {
    Identity,
    /// Fisher-Yates shuffle seeded from `(seed, k)`.
    Seeded(u64),
}

impl Permutation {
    pub fn apply(self, items: &mut [usize], k: u64) {
        if let Permutation::Seeded(seed) = self {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
            items.shuffle(&mut rng);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a top-level seed with a stream label into an independent sub-seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// `w^k` for `k >= 1` of the growing Cimmino-like scheme: weight `1/k` on each
/// of `(1), ..., (k)`.
pub fn cimmino_growing(k: u64) -> Result<WeightFunction> {
    if k == 0 {
        return Err(Error::ZeroIteration);
    }
    WeightFunction::uniform_singletons(k as usize)
}

/// `w^k` for `k >= 1` of the growing Kaczmarz-like scheme: one string that is
/// a permutation of `(1, ..., k)`.
pub fn kaczmarz_growing(k: u64, perm: Permutation) -> Result<WeightFunction> {
    if k == 0 {
        return Err(Error::ZeroIteration);
    }
    let mut idx: Vec<usize> = (1..=k as usize).collect();
    perm.apply(&mut idx, k);
    Ok(WeightFunction::single(IndexVector::new(idx)?))
}

/// `w^k` for `k >= 1` of the odd/even scheme: weight 1/2 on `(k+2)` and 1/2 on
/// a permutation of the indices up to `k` with the parity of `k`.
pub fn odd_even(k: u64, perm: Permutation) -> Result<WeightFunction> {
    if k == 0 {
        return Err(Error::ZeroIteration);
    }
    let start = if k % 2 == 1 { 1 } else { 2 };
    let mut idx: Vec<usize> = (start..=k as usize).step_by(2).collect();
    perm.apply(&mut idx, k);
    let lone = IndexVector::single(k as usize + 2)?;
    WeightFunction::new(alloc::vec![(lone, 0.5), (IndexVector::new(idx)?, 0.5)])
}

/// Periodic schedules for a finite family of `size` sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CyclicBlock {
    /// `w^k = {(k mod K + 1): 1}`.
    SingleIndex,
    /// All singletons with weight `1/K`.
    FullCimmino,
    /// The single string `(1, ..., K)`.
    FullKaczmarz,
}

pub fn cyclic_finite(k: u64, size: usize, block: CyclicBlock) -> Result<WeightFunction> {
    if size == 0 {
        return Err(Error::InvalidSchedule("cyclic schedule needs at least one set".into()));
    }
    match block {
        CyclicBlock::SingleIndex => Ok(WeightFunction::single(IndexVector::single((k % size as u64) as usize + 1)?)),
        CyclicBlock::FullCimmino => WeightFunction::uniform_singletons(size),
        CyclicBlock::FullKaczmarz => Ok(WeightFunction::single(IndexVector::new((1..=size).collect())?)),
    }
}

/// A deterministic rule `k -> w^k`.
pub trait WeightSchedule: Send + Sync {
    fn weights(&self, k: u64) -> Result<WeightFunction>;

    fn describe(&self) -> String;
}

fn first_weight() -> WeightFunction {
    WeightFunction::single(IndexVector::single(1).expect("1 is a valid index"))
}

/// Growing Cimmino-like schedule, with `w^0 = {(1): 1}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CimminoGrowing;

impl WeightSchedule for CimminoGrowing {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        if k == 0 {
            Ok(first_weight())
        } else {
            cimmino_growing(k)
        }
    }

    fn describe(&self) -> String {
        "cimmino_growing".into()
    }
}

/// Growing Kaczmarz-like schedule, with `w^0 = {(1): 1}`.
#[derive(Clone, Copy, Debug)]
pub struct KaczmarzGrowing {
    pub permutation: Permutation,
}

impl WeightSchedule for KaczmarzGrowing {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        if k == 0 {
            Ok(first_weight())
        } else {
            kaczmarz_growing(k, self.permutation)
        }
    }

    fn describe(&self) -> String {
        format!("kaczmarz_growing({:?})", self.permutation)
    }
}

/// Odd/even schedule, with `w^0 = {(1): 1}`.
#[derive(Clone, Copy, Debug)]
pub struct OddEven {
    pub permutation: Permutation,
}

impl WeightSchedule for OddEven {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        if k == 0 {
            Ok(first_weight())
        } else {
            odd_even(k, self.permutation)
        }
    }

    fn describe(&self) -> String {
        format!("odd_even({:?})", self.permutation)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CyclicFinite {
    pub size: usize,
    pub block: CyclicBlock,
}

impl CyclicFinite {
    pub fn new(size: usize, block: CyclicBlock) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidSchedule("cyclic schedule needs at least one set".into()));
        }
        Ok(CyclicFinite { size, block })
    }
}

impl WeightSchedule for CyclicFinite {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        cyclic_finite(k, self.size, self.block)
    }

    fn describe(&self) -> String {
        format!("cyclic_finite(K={}, {:?})", self.size, self.block)
    }
}

/// What a [`TableSchedule`] emits after its last row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailRule {
    RepeatLast,
    Cycle,
    /// Iterations past the table are an error.
    Exhausted,
}

/// Explicit per-iteration weight functions.
#[derive(Clone, Debug)]
pub struct TableSchedule {
    rows: Vec<WeightFunction>,
    tail: TailRule,
}

impl TableSchedule {
    pub fn new(rows: Vec<WeightFunction>, tail: TailRule) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSchedule("table schedule needs at least one row".into()));
        }
        Ok(TableSchedule { rows, tail })
    }

    pub fn rows(&self) -> &[WeightFunction] {
        &self.rows
    }

    pub fn tail(&self) -> TailRule {
        self.tail
    }
}

impl WeightSchedule for TableSchedule {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        let n = self.rows.len() as u64;
        let row = if k < n {
            k
        } else {
            match self.tail {
                TailRule::RepeatLast => n - 1,
                TailRule::Cycle => k % n,
                TailRule::Exhausted => {
                    return Err(Error::InvalidSchedule(format!("table has {n} rows; iteration {k} is past its end")))
                }
            }
        };
        Ok(self.rows[row as usize].clone())
    }

    fn describe(&self) -> String {
        format!("table({} rows, {:?})", self.rows.len(), self.tail)
    }
}

/// Schedule defined by a closure.
pub struct FnSchedule<F> {
    f: F,
    label: String,
}

impl<F> FnSchedule<F>
where
    F: Fn(u64) -> Result<WeightFunction> + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        FnSchedule { f, label: label.into() }
    }
}

impl<F> WeightSchedule for FnSchedule<F>
where
    F: Fn(u64) -> Result<WeightFunction> + Send + Sync,
{
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        (self.f)(k)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

impl<F> fmt::Debug for FnSchedule<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSchedule").field("label", &self.label).finish()
    }
}

impl<S: WeightSchedule + ?Sized> WeightSchedule for Box<S> {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        (**self).weights(k)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: WeightSchedule + ?Sized> WeightSchedule for alloc::sync::Arc<S> {
    fn weights(&self, k: u64) -> Result<WeightFunction> {
        (**self).weights(k)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
