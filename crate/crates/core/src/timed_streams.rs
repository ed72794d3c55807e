//! Time-tagged streams and hiatons.
//!
//! Every item travelling between components carries a discrete [`TimeTag`].
//! A [`TimedItem::Hiaton`] is an explicit "nothing this tick" marker: a
//! producer with nothing to say still emits one, so a reader never waits on a
//! silent producer. Streams are finite; a channel stream produced by the
//! network runner is *dense*, carrying exactly one item for every tick from 0
//! to the run horizon.

use std::fmt;

use thiserror::Error;

/// Discrete simulation time. Tick 0 is the start of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag(pub u64);

impl TimeTag {
    pub const ZERO: TimeTag = TimeTag(0);

    pub fn tick(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, ticks: u64) -> Option<TimeTag> {
        self.0.checked_add(ticks).map(TimeTag)
    }
}

impl fmt::Display for TimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl From<u64> for TimeTag {
    fn from(t: u64) -> Self {
        TimeTag(t)
    }
}

/// A payload or a hiaton, each with exactly one tag.
#[derive(Clone, Debug, PartialEq)]
pub enum TimedItem<T> {
    Payload { tag: TimeTag, value: T },
    Hiaton { tag: TimeTag },
}

impl<T> TimedItem<T> {
    pub fn payload(tag: impl Into<TimeTag>, value: T) -> Self {
        TimedItem::Payload { tag: tag.into(), value }
    }

    pub fn tag(&self) -> TimeTag {
        match self {
            TimedItem::Payload { tag, .. } | TimedItem::Hiaton { tag } => *tag,
        }
    }

    pub fn is_hiaton(&self) -> bool {
        matches!(self, TimedItem::Hiaton { .. })
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            TimedItem::Payload { value, .. } => Some(value),
            TimedItem::Hiaton { .. } => None,
        }
    }

    pub fn into_value(self) -> Option<T> {
        match self {
            TimedItem::Payload { value, .. } => Some(value),
            TimedItem::Hiaton { .. } => None,
        }
    }

    /// Same item with a different tag.
    pub fn retagged(self, tag: TimeTag) -> Self {
        match self {
            TimedItem::Payload { value, .. } => TimedItem::Payload { tag, value },
            TimedItem::Hiaton { .. } => TimedItem::Hiaton { tag },
        }
    }
}

pub fn make_hiaton<T>(t: impl Into<TimeTag>) -> TimedItem<T> {
    TimedItem::Hiaton { tag: t.into() }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("{stream} stream: tag at index {index} ({found}) is earlier than its predecessor ({previous})")]
    NonMonotonic {
        stream: &'static str,
        index: usize,
        previous: TimeTag,
        found: TimeTag,
    },
    #[error("two items share tick {0}; a dense stream holds one item per tick")]
    DuplicateTick(TimeTag),
    #[error("item tagged {found} lies beyond the horizon {horizon}")]
    BeyondHorizon { found: TimeTag, horizon: TimeTag },
}

/// Index of the first item whose tag is smaller than its predecessor's.
fn first_decrease<T>(items: &[TimedItem<T>]) -> Option<usize> {
    items.windows(2).position(|w| w[1].tag() < w[0].tag()).map(|i| i + 1)
}

fn check_monotone<T>(items: &[TimedItem<T>], stream: &'static str) -> Result<(), StreamError> {
    match first_decrease(items) {
        Some(index) => Err(StreamError::NonMonotonic {
            stream,
            index,
            previous: items[index - 1].tag(),
            found: items[index].tag(),
        }),
        None => Ok(()),
    }
}

/// A finite sequence of timed items with non-decreasing tags.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedStream<T> {
    items: Vec<TimedItem<T>>,
}

impl<T> Default for TimedStream<T> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<T> TimedStream<T> {
    pub fn new(items: Vec<TimedItem<T>>) -> Result<Self, StreamError> {
        check_monotone(&items, "input")?;
        Ok(Self { items })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn with_capacity(n: usize) -> Self {
        Self {
            items: Vec::with_capacity(n),
        }
    }

    /// Appends without checking; callers guarantee monotonicity.
    pub(crate) fn push_unchecked(&mut self, item: TimedItem<T>) {
        debug_assert!(self.items.last().is_none_or(|l| l.tag() <= item.tag()));
        self.items.push(item);
    }

    /// A stream of hiatons for ticks `0..=horizon`.
    pub fn silence(horizon: TimeTag) -> Self {
        Self {
            items: (0..=horizon.0).map(make_hiaton).collect(),
        }
    }

    /// Fills every tick in `0..=horizon` without a payload with a hiaton.
    /// Existing hiatons are discarded and regenerated.
    pub fn densify(self, horizon: TimeTag) -> Result<Self, StreamError> {
        let mut out = Self::with_capacity(horizon.0 as usize + 1);
        let mut payloads = self.items.into_iter().filter(|i| !i.is_hiaton()).peekable();
        for t in 0..=horizon.0 {
            match payloads.peek() {
                Some(p) if p.tag().0 == t => {
                    out.items.push(payloads.next().expect("peeked"));
                    if let Some(next) = payloads.peek() {
                        if next.tag().0 == t {
                            return Err(StreamError::DuplicateTick(TimeTag(t)));
                        }
                    }
                }
                _ => out.items.push(make_hiaton(t)),
            }
        }
        if let Some(p) = payloads.next() {
            return Err(StreamError::BeyondHorizon {
                found: p.tag(),
                horizon,
            });
        }
        Ok(out)
    }

    pub fn items(&self) -> &[TimedItem<T>] {
        &self.items
    }

    pub fn into_items(self) -> Vec<TimedItem<T>> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&TimedItem<T>> {
        self.items.get(idx)
    }

    pub fn count_hiatons(&self) -> usize {
        self.items.iter().filter(|i| i.is_hiaton()).count()
    }

    pub fn count_payloads(&self) -> usize {
        self.items.len() - self.count_hiatons()
    }

    /// True when the stream holds exactly one item per tick `0..=horizon`,
    /// the item at index `i` being tagged `i`.
    pub fn is_dense(&self, horizon: TimeTag) -> bool {
        self.items.len() as u64 == horizon.0 + 1
            && self.items.iter().enumerate().all(|(i, item)| item.tag().0 == i as u64)
    }
}

impl<T: Clone> TimedStream<T> {
    /// The payload items only, in order.
    pub fn strip_hiatons(&self) -> Self {
        Self {
            items: self.items.iter().filter(|i| !i.is_hiaton()).cloned().collect(),
        }
    }

    /// Delays every item by `d` ticks.
    ///
    /// Panics if a tag would overflow `u64`.
    pub fn shift(&self, d: u64) -> Self {
        Self {
            items: self
                .items
                .iter()
                .map(|i| {
                    let tag = i.tag().checked_add(d).expect("time tag overflow");
                    i.clone().retagged(tag)
                })
                .collect(),
        }
    }
}

impl<T> IntoIterator for TimedStream<T> {
    type Item = TimedItem<T>;
    type IntoIter = std::vec::IntoIter<TimedItem<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter()
    }
}

impl<'a, T> IntoIterator for &'a TimedStream<T> {
    type Item = &'a TimedItem<T>;
    type IntoIter = std::slice::Iter<'a, TimedItem<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Stable time-ordered interleaving of two streams. On equal tags the item
/// from `a` comes first.
pub fn merge<T: Clone>(a: &[TimedItem<T>], b: &[TimedItem<T>]) -> Result<TimedStream<T>, StreamError> {
    check_monotone(a, "left")?;
    check_monotone(b, "right")?;

    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j].tag() < a[i].tag() {
            out.push(b[j].clone());
            j += 1;
        } else {
            out.push(a[i].clone());
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Ok(TimedStream { items: out })
}
