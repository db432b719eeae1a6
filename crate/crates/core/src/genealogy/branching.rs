//! The free branching layer: a continuous-time branching process indexed
//! by the genealogy tree.
//!
//! Each present particle carries a birth clock of rate lambda and a death
//! clock of rate 1, materialized lazily from streams labeled by the
//! particle's address. A birth mark promotes the lowest never-present
//! child to present; a death mark retires the particle for good. The
//! number of present particles is then a branching process with birth
//! rate lambda and death rate 1.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::genealogy::tree::TreeAddress;
use crate::stream::SeededStream;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum ClockKind {
    Death,
    Birth,
}

/// One scheduled clock mark. Heap order is earliest-time first; exact
/// float ties break by address (lexicographic in child indices), then
/// death before birth.
#[derive(Clone, Debug)]
pub(crate) struct QueuedEvent {
    pub time: f64,
    pub addr: TreeAddress,
    pub kind: ClockKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueuedEvent {}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap and we want the earliest event
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.addr.cmp(&self.addr))
            .then_with(|| {
                let rank = |k: ClockKind| match k {
                    ClockKind::Death => 0u8,
                    ClockKind::Birth => 1u8,
                };
                rank(other.kind).cmp(&rank(self.kind))
            })
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-particle clock state: the birth stream keeps producing gaps, the
/// death time was drawn once at spawn.
pub(crate) struct ParticleClocks {
    pub birth_stream: SeededStream,
}

pub(crate) fn spawn_clocks(
    base: &SeededStream,
    addr: &TreeAddress,
    birth_rate: f64,
    now: f64,
    queue: &mut BinaryHeap<QueuedEvent>,
) -> ParticleClocks {
    let mut birth_stream = base.substream(format!("B/{addr}"));
    let death_at = now + base.substream(format!("D/{addr}")).first_arrival(1.0);
    if death_at.is_finite() {
        queue.push(QueuedEvent { time: death_at, addr: addr.clone(), kind: ClockKind::Death });
    }
    let birth_at = now + birth_stream.first_arrival(birth_rate);
    if birth_at.is_finite() {
        queue.push(QueuedEvent { time: birth_at, addr: addr.clone(), kind: ClockKind::Birth });
    }
    ParticleClocks { birth_stream }
}

/// Present-count trajectory of the branching layer.
#[derive(Clone, Debug)]
pub struct BranchingRun {
    pub checkpoints: Vec<f64>,
    pub counts: Vec<u64>,
    /// Set when the population cap was hit; counts past that point are
    /// not meaningful and the run should be excluded from estimates.
    pub truncated: bool,
}

/// Evolve the branching layer from a single root, reporting the present
/// count at each checkpoint (sorted ascending).
pub fn evolve_psi(
    lambda: f64,
    checkpoints: &[f64],
    pop_cap: usize,
    stream: &SeededStream,
) -> BranchingRun {
    assert!(lambda >= 0.0, "birth rate must be nonnegative");
    assert!(!checkpoints.is_empty());
    debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
    let horizon = *checkpoints.last().unwrap();

    let mut queue: BinaryHeap<QueuedEvent> = BinaryHeap::new();
    let mut clocks: HashMap<TreeAddress, ParticleClocks> = HashMap::new();
    let mut next_child: HashMap<TreeAddress, u32> = HashMap::new();
    let mut present_count = 0u64;

    let root = TreeAddress::root();
    clocks.insert(root.clone(), spawn_clocks(stream, &root, lambda, 0.0, &mut queue));
    next_child.insert(root.clone(), 1);
    present_count += 1;

    let mut counts = vec![0u64; checkpoints.len()];
    let mut cp_idx = 0usize;
    let mut truncated = false;

    let record_until = |t: f64, count: u64, cp_idx: &mut usize, counts: &mut Vec<u64>| {
        while *cp_idx < checkpoints.len() && checkpoints[*cp_idx] < t {
            counts[*cp_idx] = count;
            *cp_idx += 1;
        }
    };

    while let Some(ev) = queue.pop() {
        if ev.time > horizon {
            break;
        }
        if !clocks.contains_key(&ev.addr) {
            continue; // stale mark of a retired particle
        }
        record_until(ev.time, present_count, &mut cp_idx, &mut counts);
        match ev.kind {
            ClockKind::Death => {
                clocks.remove(&ev.addr);
                next_child.remove(&ev.addr);
                present_count -= 1;
            }
            ClockKind::Birth => {
                let n = next_child[&ev.addr];
                *next_child.get_mut(&ev.addr).unwrap() = n + 1;
                let child = ev.addr.child(n);
                clocks.insert(
                    child.clone(),
                    spawn_clocks(stream, &child, lambda, ev.time, &mut queue),
                );
                next_child.insert(child, 1);
                present_count += 1;
                if present_count as usize > pop_cap {
                    truncated = true;
                    break;
                }
                let gap = clocks.get_mut(&ev.addr).unwrap().birth_stream.first_arrival(lambda);
                if gap.is_finite() {
                    queue.push(QueuedEvent {
                        time: ev.time + gap,
                        addr: ev.addr,
                        kind: ClockKind::Birth,
                    });
                }
            }
        }
    }

    // checkpoints past the last event (extinction or horizon)
    while cp_idx < checkpoints.len() {
        counts[cp_idx] = present_count;
        cp_idx += 1;
    }

    BranchingRun { checkpoints: checkpoints.to_vec(), counts, truncated }
}
