//! Sticky particle dynamics on the spacing cone.
//!
//! Two independent routes compute the same solution:
//!
//! * [`trajectory_at`] evaluates the closed form `x(t) = P_K(x0 + t u0)`, with
//!   the velocity given by the per-cluster mean of `u0`;
//! * [`evolve`] runs an event-driven simulation in which clusters move rigidly
//!   and merge at exact, closed-form contact times.
//!
//! Every cluster carries the sums of its translated initial positions and of
//! its initial velocities, so its translated position at time `t` is
//! `(sum_x + t * sum_u) / len`. States are right-continuous at events.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::cone::{project_onto_cone, rescaled_norm, SpacingCone};
use crate::error::{Error, Result};

mod multipliers;
mod verify;

pub use multipliers::{
    multipliers_at, pressure_measure, PressureAtom, PressureMeasure, CLOSURE_TOL, PRESSURE_NEG_TOL,
};
pub use verify::{
    active_set_monotone, verify_complementarity, verify_estimates, verify_oleinik,
    verify_semigroup, ComplementarityReport, EstimatesReport, OleinikReport, SemigroupReport,
};
#[cfg(test)]
use verify::max_abs_diff;

/// Events closer than this (in time) are processed together.
pub const EVENT_TIE: f64 = 1e-13;

/// Contiguous run of particles `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn new(start: usize, len: usize) -> Self {
        Block { start, len }
    }

    /// One past the last particle.
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    /// Contact indices `k` (pair `(k-1, k)`) internal to the block.
    pub fn contacts(&self) -> std::ops::Range<usize> {
        self.start + 1..self.end()
    }
}

/// Ordered partition of `0..n` into clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    blocks: Vec<Block>,
}

impl ClusterPartition {
    pub fn from_blocks(n: usize, blocks: Vec<Block>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.start != next || b.len == 0 {
                return Err(Error::InputDomain(format!(
                    "blocks must tile 0..{n} in order; found {b:?} where {next} was expected"
                )));
            }
            next = b.end();
        }
        if next != n {
            return Err(Error::InputDomain(format!("blocks cover 0..{next}, expected 0..{n}")));
        }
        Ok(ClusterPartition { blocks })
    }

    pub fn singletons(n: usize) -> Self {
        ClusterPartition {
            blocks: (0..n).map(|i| Block::new(i, 1)).collect(),
        }
    }

    /// Maximal runs of contacting particles.
    pub fn from_contacts(cone: &SpacingCone, x: &[f64]) -> Self {
        let mut blocks = Vec::new();
        let mut start = 0;
        for k in 1..x.len() {
            let touching =
                x[k] - x[k - 1] - cone.two_r() <= SpacingCone::contact_tol(x[k - 1], x[k]);
            if !touching {
                blocks.push(Block::new(start, k - start));
                start = k;
            }
        }
        blocks.push(Block::new(start, x.len() - start));
        ClusterPartition { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end())
    }

    /// `active[k]` is true iff contact `k` (pair `(k-1, k)`) is inside a block.
    /// Length `n + 1`; entries `0` and `n` are always false.
    pub fn active_contacts(&self) -> Vec<bool> {
        let n = self.n();
        let mut active = vec![false; n + 1];
        for b in &self.blocks {
            for k in b.contacts() {
                active[k] = true;
            }
        }
        active
    }

    /// Per-block mean of `v`.
    pub fn block_means(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for b in &self.blocks {
            let m = v[b.range()].iter().sum::<f64>() / b.len as f64;
            out[b.range()].fill(m);
        }
        out
    }
}

/// Positions, velocities and clusters at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub time: f64,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub partition: ClusterPartition,
}

impl MicroState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Rescaled kinetic energy `(1/n) sum u_i^2`.
    pub fn energy(&self) -> f64 {
        let r = rescaled_norm(&self.velocities);
        r * r
    }
}

/// Multipliers `lambda_0..lambda_n`, with `lambda_0 = lambda_n = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector {
    pub lambdas: Vec<f64>,
    /// Largest value of the recursion at the right end of a cluster before it
    /// was reset to zero. Vanishes in exact arithmetic.
    pub closure_residual: f64,
}

impl MultiplierVector {
    pub fn zeros(n: usize) -> Self {
        MultiplierVector {
            lambdas: vec![0.0; n + 1],
            closure_residual: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.lambdas.len() - 1
    }
}

/// Vector indexed `0..=n` stored as nonzero segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProfile {
    n: usize,
    segments: Vec<(usize, Vec<f64>)>,
}

impl SparseProfile {
    pub fn new(n: usize) -> Self {
        SparseProfile {
            n,
            segments: Vec::new(),
        }
    }

    /// Appends the entries `first..first + values.len()`. Segments must be
    /// pushed in increasing, non-overlapping order.
    pub fn push_segment(&mut self, first: usize, values: Vec<f64>) {
        debug_assert!(first + values.len() <= self.n + 1);
        if !values.is_empty() {
            self.segments.push((first, values));
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn segments(&self) -> &[(usize, Vec<f64>)] {
        &self.segments
    }

    /// Iterator over `(index, value)` of stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.segments
            .iter()
            .flat_map(|(first, v)| v.iter().enumerate().map(move |(j, &x)| (first + j, x)))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        for (k, v) in self.entries() {
            out[k] = v;
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.entries().map(|(_, v)| v).fold(0.0, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.entries().map(|(_, v)| v).sum()
    }
}

/// Coalescence of adjacent clusters into one.
#[derive(Debug, Clone, PartialEq)]
pub struct Coalescence {
    /// Pre-event clusters, left to right.
    pub blocks: Vec<Block>,
    pub merged: Block,
    pub post_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    pub time: f64,
    pub merges: Vec<Coalescence>,
    /// `lambda(t+) - lambda(t-)`, supported on contacts inside merged clusters.
    pub multiplier_jump: SparseProfile,
}

/// Piecewise-linear-in-time solution on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct EventTimeline {
    cone: SpacingCone,
    x0: Vec<f64>,
    u0: Vec<f64>,
    translated_x0: Vec<f64>,
    initial: MicroState,
    events: Vec<MergeEvent>,
    horizon: f64,
}

impl EventTimeline {
    pub fn cone(&self) -> &SpacingCone {
        &self.cone
    }

    pub fn n(&self) -> usize {
        self.cone.n()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn initial(&self) -> &MicroState {
        &self.initial
    }

    pub fn events(&self) -> &[MergeEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    /// Replace the event list. Intended for building corrupted timelines in
    /// negative-control tests.
    pub fn with_events(mut self, events: Vec<MergeEvent>) -> Self {
        self.events = events;
        self
    }

    /// State at time `t` (clamped to `[0, horizon]`).
    pub fn state_at(&self, t: f64) -> MicroState {
        let mut r = Replay::new(self);
        r.advance_to(t);
        r.state(t)
    }

    pub fn replay(&self) -> Replay<'_> {
        Replay::new(self)
    }
}

/// Incremental reconstruction of states from a timeline, for nondecreasing
/// query times.
pub struct Replay<'a> {
    timeline: &'a EventTimeline,
    next_event: usize,
    /// Indexed by block start; valid only at current block starts.
    len_at: Vec<usize>,
    sum_x_at: Vec<f64>,
    sum_u_at: Vec<f64>,
}

impl<'a> Replay<'a> {
    fn new(timeline: &'a EventTimeline) -> Self {
        let n = timeline.n();
        let mut len_at = vec![0; n];
        let mut sum_x_at = vec![0.0; n];
        let mut sum_u_at = vec![0.0; n];
        for b in timeline.initial.partition.blocks() {
            len_at[b.start] = b.len;
            sum_x_at[b.start] = timeline.translated_x0[b.range()].iter().sum();
            sum_u_at[b.start] = timeline.u0[b.range()].iter().sum();
        }
        Replay {
            timeline,
            next_event: 0,
            len_at,
            sum_x_at,
            sum_u_at,
        }
    }

    /// Applies every event with time `<= t`.
    pub fn advance_to(&mut self, t: f64) {
        while let Some(ev) = self.timeline.events.get(self.next_event) {
            if ev.time > t {
                break;
            }
            self.apply(self.next_event);
            self.next_event += 1;
        }
    }

    /// Applies the next event and returns it.
    pub fn step(&mut self) -> Option<&'a MergeEvent> {
        let ev = self.timeline.events.get(self.next_event)?;
        self.apply(self.next_event);
        self.next_event += 1;
        Some(ev)
    }

    pub fn next_event_time(&self) -> Option<f64> {
        self.timeline.events.get(self.next_event).map(|e| e.time)
    }

    fn apply(&mut self, idx: usize) {
        let ev = &self.timeline.events[idx];
        for c in &ev.merges {
            let (sx, su) = c.blocks.iter().fold((0.0, 0.0), |(sx, su), b| {
                (sx + self.sum_x_at[b.start], su + self.sum_u_at[b.start])
            });
            for b in &c.blocks {
                self.len_at[b.start] = 0;
            }
            self.len_at[c.merged.start] = c.merged.len;
            self.sum_x_at[c.merged.start] = sx;
            self.sum_u_at[c.merged.start] = su;
        }
    }

    pub fn partition(&self) -> ClusterPartition {
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < self.len_at.len() {
            let len = self.len_at[i].max(1);
            blocks.push(Block::new(i, len));
            i += len;
        }
        ClusterPartition { blocks }
    }

    /// State at `t` under the current partition (call [`advance_to`] first).
    ///
    /// [`advance_to`]: Replay::advance_to
    pub fn state(&self, t: f64) -> MicroState {
        let n = self.len_at.len();
        let partition = self.partition();
        let mut xt = vec![0.0; n];
        let mut u = vec![0.0; n];
        for b in partition.blocks() {
            let len = b.len as f64;
            let pos = (self.sum_x_at[b.start] + t * self.sum_u_at[b.start]) / len;
            let vel = self.sum_u_at[b.start] / len;
            xt[b.range()].fill(pos);
            u[b.range()].fill(vel);
        }
        MicroState {
            time: t,
            positions: self.timeline.cone.untranslate(&xt),
            velocities: u,
            partition,
        }
    }
}

/// Checks that `x0` is feasible and that contacting particles move together.
pub fn check_admissible(cone: &SpacingCone, x0: &[f64], u0: &[f64]) -> Result<()> {
    cone.check_feasible(x0)?;
    cone.check_len(u0)?;
    for k in 1..x0.len() {
        let touching = x0[k] - x0[k - 1] - cone.two_r() <= SpacingCone::contact_tol(x0[k - 1], x0[k]);
        let du = (u0[k] - u0[k - 1]).abs();
        if touching && du > 1e-12 * (1.0 + u0[k].abs().max(u0[k - 1].abs())) {
            return Err(Error::Admissibility(format!(
                "particles {} and {} touch but their velocities differ by {du:e}",
                k - 1,
                k
            )));
        }
    }
    Ok(())
}

/// Closed-form state `x(t) = P_K(x0 + t u0)`, velocities the per-cluster mean
/// of `u0`.
pub fn trajectory_at(x0: &[f64], u0: &[f64], cone: &SpacingCone, t: f64) -> Result<MicroState> {
    check_admissible(cone, x0, u0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InputDomain(format!("time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(MicroState {
            time: 0.0,
            positions: x0.to_vec(),
            velocities: u0.to_vec(),
            partition: ClusterPartition::from_contacts(cone, x0),
        });
    }
    let y: Vec<f64> = x0.iter().zip(u0).map(|(x, u)| x + t * u).collect();
    let positions = project_onto_cone(cone, &y)?;
    let partition = ClusterPartition::from_contacts(cone, &positions);
    let velocities = partition.block_means(u0);
    Ok(MicroState {
        time: t,
        positions,
        velocities,
        partition,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cluster {
    start: usize,
    len: usize,
    sum_x: f64,
    sum_u: f64,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    version: u32,
}

impl Cluster {
    fn velocity(&self) -> f64 {
        self.sum_u / self.len as f64
    }

    fn position_at(&self, t: f64) -> f64 {
        (self.sum_x + t * self.sum_u) / self.len as f64
    }

    fn block(&self) -> Block {
        Block::new(self.start, self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    time: f64,
    left: usize,
    left_version: u32,
    right: usize,
    right_version: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.left.cmp(&other.left))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time at which cluster `b` (right) is reached by cluster `a` (left), if
/// they approach; never earlier than `now`.
fn contact_time(a: &Cluster, b: &Cluster, now: f64) -> Option<f64> {
    let va = a.velocity();
    let vb = b.velocity();
    if va <= vb {
        return None;
    }
    let gap_now = b.position_at(now) - a.position_at(now);
    let t = now + gap_now / (va - vb);
    Some(if t < now { now } else { t })
}

/// Multipliers on the internal contacts of a cluster moving with velocity
/// `v`, starting from zero at its left end. Returns the values for contacts
/// `block.start + 1 .. block.end()` and the closure value after the last
/// particle (zero in exact arithmetic).
fn cluster_lambdas(u0: &[f64], block: Block, v: f64, n: usize) -> (Vec<f64>, f64) {
    let inv_n = 1.0 / n as f64;
    let mut out = Vec::with_capacity(block.len.saturating_sub(1));
    let mut lam = 0.0;
    for i in block.range() {
        lam -= inv_n * (v - u0[i]);
        if i + 1 < block.end() {
            out.push(lam);
        }
    }
    (out, lam)
}

/// Event-driven sticky evolution on `[0, horizon]`.
pub fn evolve(x0: &[f64], u0: &[f64], cone: &SpacingCone, horizon: f64) -> Result<EventTimeline> {
    check_admissible(cone, x0, u0)?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InputDomain(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    let n = cone.n();
    let translated_x0 = cone.translate(x0);
    let partition = ClusterPartition::from_contacts(cone, x0);
    let initial = MicroState {
        time: 0.0,
        positions: x0.to_vec(),
        velocities: u0.to_vec(),
        partition: partition.clone(),
    };

    let count = partition.len();
    let mut clusters: Vec<Cluster> = partition
        .blocks()
        .iter()
        .enumerate()
        .map(|(id, b)| Cluster {
            start: b.start,
            len: b.len,
            sum_x: translated_x0[b.range()].iter().sum(),
            sum_u: u0[b.range()].iter().sum(),
            prev: id.checked_sub(1),
            next: if id + 1 < count { Some(id + 1) } else { None },
            alive: true,
            version: 0,
        })
        .collect();

    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    for id in 0..clusters.len() {
        push_candidate(&mut heap, &clusters, id, 0.0);
    }

    let mut events = Vec::new();
    while let Some(Reverse(first)) = heap.pop() {
        if !first.is_valid(&clusters) {
            continue;
        }
        if first.time > horizon {
            break;
        }
        let t_event = first.time;

        // Every pair reaching contact within the tie window joins this event.
        let mut pairs = vec![first];
        while let Some(Reverse(c)) = heap.peek().copied() {
            if c.time > t_event + EVENT_TIE {
                break;
            }
            heap.pop();
            if c.is_valid(&clusters) {
                pairs.push(c);
            }
        }
        pairs.sort_by_key(|c| clusters[c.left].start);

        let mut merging = EventMerges::default();
        for c in &pairs {
            let a = holder(&clusters, c.left);
            if clusters[c.right].alive && clusters[a].next == Some(c.right) {
                merging.merge(&mut clusters, a, c.right);
            }
        }
        // A merged cluster may reach a neighbour at the same instant.
        loop {
            let mut cascade = None;
            for &id in merging.touched() {
                if !clusters[id].alive {
                    continue;
                }
                let left = clusters[id].prev.map(|p| (p, id));
                let right = clusters[id].next.map(|nx| (id, nx));
                for (a, b) in left.into_iter().chain(right) {
                    if let Some(tc) = contact_time(&clusters[a], &clusters[b], t_event) {
                        if tc <= t_event + EVENT_TIE {
                            cascade = Some((a, b));
                            break;
                        }
                    }
                }
                if cascade.is_some() {
                    break;
                }
            }
            match cascade {
                Some((a, b)) => merging.merge(&mut clusters, a, b),
                None => break,
            }
        }

        let mut touched: Vec<usize> = merging
            .touched()
            .iter()
            .copied()
            .filter(|&id| clusters[id].alive)
            .collect();
        touched.sort_unstable_by_key(|&id| clusters[id].start);
        touched.dedup();

        let mut jump = SparseProfile::new(n);
        let mut merges = Vec::with_capacity(touched.len());
        for &id in &touched {
            let pieces = merging.pieces.remove(&id).unwrap_or_default();
            let merged = clusters[id].block();
            let post_velocity = clusters[id].velocity();
            let (after, _) = cluster_lambdas(u0, merged, post_velocity, n);
            let mut before = Vec::with_capacity(after.len());
            for (j, p) in pieces.iter().enumerate() {
                let (lam, _) = cluster_lambdas(u0, p.block, p.sum_u / p.block.len as f64, n);
                before.extend(lam);
                if j + 1 < pieces.len() {
                    before.push(0.0);
                }
            }
            let values: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
            jump.push_segment(merged.start + 1, values);
            merges.push(Coalescence {
                blocks: pieces.iter().map(|p| p.block).collect(),
                merged,
                post_velocity,
            });
        }
        events.push(MergeEvent {
            time: t_event,
            merges,
            multiplier_jump: jump,
        });

        for &id in &touched {
            if let Some(p) = clusters[id].prev {
                push_candidate(&mut heap, &clusters, p, t_event);
            }
            push_candidate(&mut heap, &clusters, id, t_event);
        }
    }

    Ok(EventTimeline {
        cone: *cone,
        x0: x0.to_vec(),
        u0: u0.to_vec(),
        translated_x0,
        initial,
        events,
        horizon,
    })
}

impl Candidate {
    fn is_valid(&self, clusters: &[Cluster]) -> bool {
        let (a, b) = (&clusters[self.left], &clusters[self.right]);
        a.alive
            && b.alive
            && a.version == self.left_version
            && b.version == self.right_version
            && a.next == Some(self.right)
    }
}

fn push_candidate(heap: &mut BinaryHeap<Reverse<Candidate>>, clusters: &[Cluster], a: usize, now: f64) {
    if let Some(b) = clusters[a].next {
        if let Some(time) = contact_time(&clusters[a], &clusters[b], now) {
            heap.push(Reverse(Candidate {
                time,
                left: a,
                left_version: clusters[a].version,
                right: b,
                right_version: clusters[b].version,
            }));
        }
    }
}

/// Live cluster that absorbed `id` (absorbed clusters keep pointing left).
fn holder(clusters: &[Cluster], mut id: usize) -> usize {
    while !clusters[id].alive {
        id = clusters[id].prev.expect("absorbed cluster points to its absorber");
    }
    id
}

/// Pre-event cluster taking part in a merge.
#[derive(Debug, Clone, Copy)]
struct Piece {
    block: Block,
    sum_x: f64,
    sum_u: f64,
}

#[derive(Default)]
struct EventMerges {
    pieces: std::collections::HashMap<usize, Vec<Piece>>,
    touched: Vec<usize>,
}

impl EventMerges {
    fn touched(&self) -> &[usize] {
        &self.touched
    }

    /// Absorbs `b` into its left neighbour `a`.
    fn merge(&mut self, clusters: &mut [Cluster], a: usize, b: usize) {
        let own = |c: &Cluster| Piece {
            block: c.block(),
            sum_x: c.sum_x,
            sum_u: c.sum_u,
        };
        let mut pieces = self.pieces.remove(&a).unwrap_or_else(|| vec![own(&clusters[a])]);
        pieces.extend(self.pieces.remove(&b).unwrap_or_else(|| vec![own(&clusters[b])]));
        // Folded left to right over pre-event pieces, exactly as `Replay` does.
        let (sx, su) = pieces
            .iter()
            .fold((0.0, 0.0), |(sx, su), p| (sx + p.sum_x, su + p.sum_u));
        let next = clusters[b].next;
        let ca = &mut clusters[a];
        ca.len = pieces.iter().map(|p| p.block.len).sum();
        ca.sum_x = sx;
        ca.sum_u = su;
        ca.next = next;
        ca.version += 1;
        if let Some(nx) = next {
            clusters[nx].prev = Some(a);
        }
        clusters[b].alive = false;
        clusters[b].prev = Some(a);
        self.pieces.insert(a, pieces);
        self.touched.push(a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::qp_oracle_project;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_particles() -> (SpacingCone, Vec<f64>, Vec<f64>) {
        (SpacingCone::new(2, 1.0).unwrap(), vec![0.0, 2.0], vec![1.0, -1.0])
    }

    /// Random feasible data with some exact contacts; touching particles share a velocity.
    fn random_data(n: usize, rng: &mut ChaCha8Rng) -> (SpacingCone, Vec<f64>, Vec<f64>) {
        let cone = SpacingCone::canonical(n).unwrap();
        let mut x = vec![rng.gen_range(-1.0..1.0)];
        let mut u = vec![rng.gen_range(-1.0..1.0)];
        for _ in 1..n {
            let last = *x.last().unwrap();
            if rng.gen_bool(0.3) {
                x.push(last + cone.two_r());
                u.push(*u.last().unwrap());
            } else {
                x.push(last + cone.two_r() * (1.0 + rng.gen_range(0.0..3.0)));
                u.push(rng.gen_range(-1.0..1.0));
            }
        }
        (cone, x, u)
    }

    #[test]
    fn free_flight_before_contact() {
        let (cone, x0, u0) = two_particles();
        let s = trajectory_at(&x0, &u0, &cone, 0.25).unwrap();
        assert_eq!(s.positions, vec![0.25, 1.75]);
        assert_eq!(s.velocities, u0);
        assert_eq!(s.partition.len(), 2);
    }

    #[test]
    fn sticks_after_contact() {
        let (cone, x0, u0) = two_particles();
        let s = trajectory_at(&x0, &u0, &cone, 1.0).unwrap();
        assert_eq!(s.positions, vec![0.5, 1.5]);
        assert_eq!(s.velocities, vec![0.0, 0.0]);
        assert_eq!(s.partition.blocks(), &[Block::new(0, 2)]);
        let (x, _) = qp_oracle_project(&cone, &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn initial_time_is_identity() {
        let (cone, x0, u0) = two_particles();
        let s = trajectory_at(&x0, &u0, &cone, 0.0).unwrap();
        assert_eq!(s.positions, x0);
        assert_eq!(s.velocities, u0);
    }

    #[test]
    fn preconditions() {
        let cone = SpacingCone::new(2, 1.0).unwrap();
        assert!(matches!(
            trajectory_at(&[0.0, 0.5], &[0.0, 0.0], &cone, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            trajectory_at(&[0.0, 1.0], &[1.0, 0.0], &cone, 1.0),
            Err(Error::Admissibility(_))
        ));
        assert!(matches!(
            evolve(&[0.0, 2.0], &[0.0, 0.0], &cone, -1.0),
            Err(Error::InputDomain(_))
        ));
    }

    #[test]
    fn single_merge_event() {
        let (cone, x0, u0) = two_particles();
        let tl = evolve(&x0, &u0, &cone, 2.0).unwrap();
        assert_eq!(tl.events().len(), 1);
        let ev = &tl.events()[0];
        assert_eq!(ev.time, 0.5);
        assert_eq!(ev.merges.len(), 1);
        assert_eq!(ev.merges[0].post_velocity, 0.0);
        assert_eq!(ev.merges[0].blocks, vec![Block::new(0, 1), Block::new(1, 1)]);
        assert_eq!(ev.multiplier_jump.to_dense(), vec![0.0, 0.5, 0.0]);
        // Right-continuous at the event.
        assert_eq!(tl.state_at(0.5).velocities, vec![0.0, 0.0]);
        assert_eq!(tl.state_at(0.4999).velocities, u0);
    }

    #[test]
    fn rigid_translation_has_no_events() {
        let cone = SpacingCone::canonical(5).unwrap();
        let x0 = vec![0.0, 0.2, 0.5, 0.7, 1.5];
        let u0 = vec![0.3; 5];
        let tl = evolve(&x0, &u0, &cone, 10.0).unwrap();
        assert!(tl.events().is_empty());
        let s = tl.state_at(10.0);
        for (a, b) in s.positions.iter().zip(&x0) {
            assert_abs_diff_eq!(*a, b + 3.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn event_driven_matches_projection_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let (cone, x0, u0) = random_data(50, &mut rng);
            let tl = evolve(&x0, &u0, &cone, 2.0).unwrap();
            assert!(active_set_monotone(&tl));
            let mut replay = tl.replay();
            for k in 0..200 {
                let t = 2.0 * k as f64 / 199.0;
                replay.advance_to(t);
                let a = replay.state(t);
                let b = trajectory_at(&x0, &u0, &cone, t).unwrap();
                assert!(max_abs_diff(&a.positions, &b.positions) <= 1e-9, "t = {t}");
            }
        }
    }

    #[test]
    fn simultaneous_contacts_form_one_event() {
        // Three equally spaced particles converging on the middle one.
        let cone = SpacingCone::new(3, 1.0).unwrap();
        let tl = evolve(&[0.0, 2.0, 4.0], &[1.0, 0.0, -1.0], &cone, 5.0).unwrap();
        assert_eq!(tl.events().len(), 1);
        let ev = &tl.events()[0];
        assert_abs_diff_eq!(ev.time, 1.0, epsilon = 1e-15);
        assert_eq!(ev.merges.len(), 1);
        assert_eq!(ev.merges[0].merged, Block::new(0, 3));
        assert_eq!(ev.merges[0].blocks.len(), 3);
    }

    #[test]
    fn nearly_simultaneous_cascade() {
        // 0 and 1 meet at t = 1; the merged pair reaches 2 a hair later.
        let cone = SpacingCone::new(3, 1.0).unwrap();
        let x0 = [0.0, 2.0, 3.0 + 1e-11];
        let u0 = [2.0, 0.0, 0.0];
        let tl = evolve(&x0, &u0, &cone, 5.0).unwrap();
        let s = tl.state_at(5.0);
        let p = trajectory_at(&x0, &u0, &cone, 5.0).unwrap();
        assert!(max_abs_diff(&s.positions, &p.positions) <= 1e-12);
        assert!(active_set_monotone(&tl));
        assert_eq!(s.partition.len(), 1);
        assert_abs_diff_eq!(s.velocities[2], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn multiplier_examples() {
        let (cone, x0, u0) = two_particles();
        let before = trajectory_at(&x0, &u0, &cone, 0.25).unwrap();
        assert_eq!(multipliers_at(&before, &u0).unwrap().lambdas, vec![0.0; 3]);
        let after = trajectory_at(&x0, &u0, &cone, 1.0).unwrap();
        let m = multipliers_at(&after, &u0).unwrap();
        assert_eq!(m.lambdas, vec![0.0, 0.5, 0.0]);
        let total: f64 = after.velocities.iter().zip(&u0).map(|(u, v)| u - v).sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn multiplier_closure_failure_is_reported() {
        let (cone, x0, u0) = two_particles();
        let mut s = trajectory_at(&x0, &u0, &cone, 1.0).unwrap();
        s.velocities = vec![0.3, 0.3];
        assert!(matches!(
            multipliers_at(&s, &u0),
            Err(Error::InternalConsistency(_))
        ));
    }

    #[test]
    fn pressure_examples() {
        let cone = SpacingCone::canonical(3).unwrap();
        let tl = evolve(&[0.0, 1.0, 2.0], &[1.0; 3], &cone, 1.0).unwrap();
        assert!(pressure_measure(&tl).unwrap().atoms.is_empty());

        let (cone, x0, u0) = two_particles();
        let tl = evolve(&x0, &u0, &cone, 1.0).unwrap();
        let p = pressure_measure(&tl).unwrap();
        assert_eq!(p.atoms.len(), 1);
        assert_eq!(p.atoms[0].time, 0.5);
        assert_eq!(p.atoms[0].profile.to_dense(), vec![0.0, 0.5, 0.0]);
        assert_abs_diff_eq!(p.total_mass(), 0.25, epsilon = 1e-16);
    }

    #[test]
    fn negative_pressure_is_rejected() {
        let (cone, x0, u0) = two_particles();
        let tl = evolve(&x0, &u0, &cone, 1.0).unwrap();
        let mut events = tl.events().to_vec();
        let mut jump = SparseProfile::new(2);
        jump.push_segment(1, vec![-0.5]);
        events[0].multiplier_jump = jump;
        let tl = tl.with_events(events);
        assert!(matches!(pressure_measure(&tl), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn complementarity_examples() {
        let (cone, x0, u0) = two_particles();
        let before = trajectory_at(&x0, &u0, &cone, 0.25).unwrap();
        let m = multipliers_at(&before, &u0).unwrap();
        let r = verify_complementarity(&cone, &before, &m, 1e-12);
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);

        let after = trajectory_at(&x0, &u0, &cone, 1.0).unwrap();
        let mut m = multipliers_at(&after, &u0).unwrap();
        let r = verify_complementarity(&cone, &after, &m, 1e-12);
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);

        m.lambdas[1] = -0.1;
        assert!(!verify_complementarity(&cone, &after, &m, 1e-12).passed);
    }

    #[test]
    fn oleinik_examples() {
        let (cone, x0, u0) = two_particles();
        let s = trajectory_at(&x0, &u0, &cone, 0.25).unwrap();
        let r = verify_oleinik(&s).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 0.25 * -2.0 / 1.5, epsilon = 1e-15);
        assert!(r.passed);

        let s = trajectory_at(&x0, &u0, &cone, 1.0).unwrap();
        assert_eq!(verify_oleinik(&s).unwrap().max_ratio, 0.0);

        let u0 = [-1.0, 1.0];
        for t in [0.1, 1.0, 10.0, 1e6] {
            let s = trajectory_at(&x0, &u0, &cone, t).unwrap();
            let r = verify_oleinik(&s).unwrap();
            assert_abs_diff_eq!(r.max_ratio, 2.0 * t / (2.0 + 2.0 * t), epsilon = 1e-12);
            assert!(r.passed);
        }

        let s0 = trajectory_at(&x0, &u0, &cone, 0.0).unwrap();
        assert!(matches!(verify_oleinik(&s0), Err(Error::Precondition(_))));
    }

    #[test]
    fn semigroup_examples() {
        let (cone, x0, u0) = two_particles();
        let tl = evolve(&x0, &u0, &cone, 2.0).unwrap();
        for (s, t) in [(0.0, 1.0), (0.25, 1.5), (0.1, 0.3), (0.6, 2.0)] {
            let r = verify_semigroup(&tl, s, t, 1e-12).unwrap();
            assert!(r.passed, "{s} {t} {r:?}");
        }
        let r = verify_semigroup(&tl, 0.1, 0.3, 0.0).unwrap();
        assert_eq!(r.position_residual, 0.0);
        assert!(verify_semigroup(&tl, 1.0, 0.5, 1e-12).is_err());
    }

    #[test]
    fn estimates_examples() {
        let cone = SpacingCone::canonical(4).unwrap();
        let tl = evolve(&[0.0, 0.5, 1.0, 1.5], &[2.0; 4], &cone, 1.0).unwrap();
        let r = verify_estimates(&tl);
        assert!(r.passed);
        assert_eq!(r.sup_n_lambda, 0.0);
        assert_eq!(r.energies, vec![(0.0, 4.0)]);

        let (cone, x0, u0) = two_particles();
        let tl = evolve(&x0, &u0, &cone, 1.0).unwrap();
        let r = verify_estimates(&tl);
        assert!(r.passed);
        assert_eq!(r.energies, vec![(0.0, 1.0), (0.5, 0.0)]);
        assert_abs_diff_eq!(r.sup_n_lambda, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn corrupted_timeline_is_not_monotone() {
        let cone = SpacingCone::new(3, 1.0).unwrap();
        let tl = evolve(&[0.0, 2.0, 5.0], &[1.0, -1.0, -1.0], &cone, 5.0).unwrap();
        assert!(tl.events().len() >= 2);
        assert!(active_set_monotone(&tl));
        let mut events = tl.events().to_vec();
        // Pretend the pair formed at the first event splits again.
        events[1].merges[0].blocks = vec![Block::new(0, 1), Block::new(1, 1), Block::new(2, 1)];
        assert!(!active_set_monotone(&tl.clone().with_events(events)));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (cone, x0, u0) = random_data(200, &mut rng);
        let a = evolve(&x0, &u0, &cone, 3.0).unwrap();
        let b = evolve(&x0, &u0, &cone, 3.0).unwrap();
        assert_eq!(a.events(), b.events());
        assert_eq!(a.state_at(3.0), b.state_at(3.0));
    }
}
