use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;

use spin::RwLock;

use super::vector::check_dims;
use super::ConvexSet;
use crate::{Error, Result};

/// Lazily produces `C_i` for the infinite part of a [`Family`].
///
/// Implementations must be deterministic: the same `i` always yields the same
/// set. Indices passed to `generate` are relative to the generator, starting
/// at 1.
pub trait SetGenerator: Send + Sync {
    fn generate(&self, i: usize) -> Result<ConvexSet>;

    /// Short human-readable description used in traces.
    fn describe(&self) -> alloc::string::String {
        "generated".into()
    }
}

/// [`SetGenerator`] backed by a closure.
pub struct FnGenerator<F> {
    f: F,
    label: &'static str,
}

impl<F> FnGenerator<F>
where
    F: Fn(usize) -> Result<ConvexSet> + Send + Sync,
{
    pub fn new(label: &'static str, f: F) -> Self {
        FnGenerator { f, label }
    }
}

impl<F> SetGenerator for FnGenerator<F>
where
    F: Fn(usize) -> Result<ConvexSet> + Send + Sync,
{
    fn generate(&self, i: usize) -> Result<ConvexSet> {
        (self.f)(i)
    }

    fn describe(&self) -> alloc::string::String {
        self.label.into()
    }
}

impl<F> fmt::Debug for FnGenerator<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnGenerator").field("label", &self.label).finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Finitely many sets `C_1..C_K`; every `C_i` with `i > K` is `R^n`.
    Finite,
    /// An explicit head followed by a generated tail.
    Infinite,
}

/// Borrowed or shared reference to a set resolved from a [`Family`].
#[derive(Debug)]
pub enum SetHandle<'a> {
    Borrowed(&'a ConvexSet),
    Shared(Arc<ConvexSet>),
}

impl Deref for SetHandle<'_> {
    type Target = ConvexSet;

    fn deref(&self) -> &ConvexSet {
        match self {
            SetHandle::Borrowed(s) => s,
            SetHandle::Shared(s) => s,
        }
    }
}

/// The indexed collection `C_1, C_2, ...` of closed convex sets in `R^n`.
///
/// Generated sets are memoized by index; the cache sits behind a lock so a
/// family can be shared between threads.
pub struct Family {
    dim: usize,
    head: Vec<ConvexSet>,
    tail: Option<Arc<dyn SetGenerator>>,
    cache: RwLock<BTreeMap<usize, Arc<ConvexSet>>>,
    whole: ConvexSet,
}

impl Family {
    /// A finite family. At least one member must differ from `R^n`.
    pub fn finite(dim: usize, sets: Vec<ConvexSet>) -> Result<Self> {
        if sets.iter().all(ConvexSet::is_whole_space) {
            return Err(Error::InvalidFamily("at least one set must differ from R^n".into()));
        }
        Self::build(dim, sets, None)
    }

    /// An infinite family: `C_1..C_h` are `head`, and `C_{h+j}` is
    /// `generator.generate(j)`.
    pub fn infinite(dim: usize, head: Vec<ConvexSet>, generator: Arc<dyn SetGenerator>) -> Result<Self> {
        Self::build(dim, head, Some(generator))
    }

    fn build(dim: usize, head: Vec<ConvexSet>, tail: Option<Arc<dyn SetGenerator>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFamily("dimension must be positive".into()));
        }
        for (i, set) in head.iter().enumerate() {
            if let Some(n) = set.ambient_dim() {
                if n != dim {
                    return Err(Error::InvalidFamily(format!(
                        "set {} lives in R^{} but the family is in R^{}",
                        i + 1,
                        n,
                        dim
                    )));
                }
            }
        }
        Ok(Family { dim, head, tail, cache: RwLock::new(BTreeMap::new()), whole: ConvexSet::whole_space() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> FamilyKind {
        if self.tail.is_some() {
            FamilyKind::Infinite
        } else {
            FamilyKind::Finite
        }
    }

    /// Number of explicitly listed sets (all of them for a finite family).
    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn head(&self) -> &[ConvexSet] {
        &self.head
    }

    pub fn generator(&self) -> Option<&Arc<dyn SetGenerator>> {
        self.tail.as_ref()
    }

    /// For a finite family, the first index from which every set is `R^n`.
    pub fn trivial_from(&self) -> Option<usize> {
        match self.tail {
            None => Some(self.head.len() + 1),
            Some(_) => None,
        }
    }

    /// Resolves `C_i`.
    pub fn get(&self, i: usize) -> Result<SetHandle<'_>> {
        if i == 0 {
            return Err(Error::UnresolvableIndex(0));
        }
        if let Some(set) = self.head.get(i - 1) {
            return Ok(SetHandle::Borrowed(set));
        }
        let Some(generator) = &self.tail else {
            return Ok(SetHandle::Borrowed(&self.whole));
        };
        if let Some(set) = self.cache.read().get(&i) {
            return Ok(SetHandle::Shared(set.clone()));
        }
        let set = generator.generate(i - self.head.len())?;
        if let Some(n) = set.ambient_dim() {
            check_dims(self.dim, n)?;
        }
        let set = Arc::new(set);
        let mut cache = self.cache.write();
        let entry = cache.entry(i).or_insert(set);
        Ok(SetHandle::Shared(entry.clone()))
    }

    /// Whether `C_i = R^n`.
    pub fn is_whole_space(&self, i: usize) -> Result<bool> {
        if let Some(from) = self.trivial_from() {
            if i >= from {
                return Ok(true);
            }
        }
        Ok(self.get(i)?.is_whole_space())
    }

    pub fn describe(&self) -> alloc::string::String {
        match &self.tail {
            None => format!("finite family of {} sets in R^{}", self.head.len(), self.dim),
            Some(g) => format!("infinite family in R^{} ({} listed, then {})", self.dim, self.head.len(), g.describe()),
        }
    }
}

impl Clone for Family {
    fn clone(&self) -> Self {
        Family {
            dim: self.dim,
            head: self.head.clone(),
            tail: self.tail.clone(),
            cache: RwLock::new(self.cache.read().clone()),
            whole: self.whole.clone(),
        }
    }
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Family")
            .field("dim", &self.dim)
            .field("head", &self.head)
            .field("kind", &self.kind())
            .finish()
    }
}
