//! Lazily materialized stirring flow for finitely many tracked particles.
//!
//! The full construction puts a rate-N Poisson clock on every edge of
//! Z^d; a ring swaps the entire contents of the edge's endpoints, and all
//! particles follow the resulting flow. For finitely many tracked
//! particles only edges incident to an occupied site can change anything,
//! so the engine schedules rings at total rate `N * (number of active
//! edges)` and picks the ringing edge uniformly among active ones; by
//! superposition this has exactly the law of the full clock family
//! restricted to the tracked set. An edge shared by two occupied sites is
//! counted once, and a ring there swaps the two site contents.
//!
//! Particles stack: all particles on a site move together, which is what
//! makes the flow a coupling rather than independent motions.

use std::collections::HashMap;

use crate::lattice::Site;
use crate::stream::SeededStream;

/// Opaque particle handle; callers map their own identities onto it.
pub type ParticleId = u64;

#[derive(Clone, Debug)]
struct SiteEntry {
    site: Site,
    occupants: Vec<ParticleId>,
}

/// Event-driven stirring of a finite tracked set at rate `n_stir` per
/// active edge.
#[derive(Clone, Debug)]
pub struct StirringEngine {
    d: usize,
    n_stir: f64,
    clock: f64,
    entries: Vec<SiteEntry>,
    site_index: HashMap<Site, usize>,
    positions: HashMap<ParticleId, Site>,
    /// Unordered occupied-occupied adjacent pairs (each shared edge once).
    adjacent_pairs: u64,
    stream: SeededStream,
    rings: u64,
}

impl StirringEngine {
    pub fn new(d: usize, n_stir: f64, stream: SeededStream) -> Self {
        assert!(n_stir >= 0.0, "stirring rate must be nonnegative");
        StirringEngine {
            d,
            n_stir,
            clock: 0.0,
            entries: Vec::new(),
            site_index: HashMap::new(),
            positions: HashMap::new(),
            adjacent_pairs: 0,
            stream,
            rings: 0,
        }
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn rings(&self) -> u64 {
        self.rings
    }

    pub fn tracked_sites(&self) -> usize {
        self.entries.len()
    }

    /// Number of edges incident to at least one occupied site: 2d per
    /// occupied site, minus one per adjacent occupied pair (the shared
    /// edge would otherwise be counted twice).
    pub fn active_edges(&self) -> u64 {
        2 * self.d as u64 * self.entries.len() as u64 - self.adjacent_pairs
    }

    /// Total stirring rate `N * active_edges`.
    pub fn total_rate(&self) -> f64 {
        self.n_stir * self.active_edges() as f64
    }

    /// Incrementally maintained adjacent occupied-pair count.
    pub fn adjacent_pairs(&self) -> u64 {
        self.adjacent_pairs
    }

    /// Recount adjacent occupied pairs from scratch (audit use).
    pub fn recount_adjacent_pairs(&self) -> u64 {
        let mut count = 0;
        for e in &self.entries {
            for k in 0..2 * self.d {
                let nb = e.site.step(k);
                if self.site_index.contains_key(&nb) {
                    count += 1;
                }
            }
        }
        count / 2
    }

    pub fn position(&self, id: ParticleId) -> Option<Site> {
        self.positions.get(&id).copied()
    }

    pub fn occupants(&self, site: &Site) -> &[ParticleId] {
        match self.site_index.get(site) {
            Some(&i) => &self.entries[i].occupants,
            None => &[],
        }
    }

    pub fn particle_count(&self) -> usize {
        self.positions.len()
    }

    fn neighbor_occupancy(&self, site: &Site) -> u64 {
        (0..2 * self.d)
            .filter(|&k| self.site_index.contains_key(&site.step(k)))
            .count() as u64
    }

    fn add_site(&mut self, site: Site) -> usize {
        debug_assert!(!self.site_index.contains_key(&site));
        self.adjacent_pairs += self.neighbor_occupancy(&site);
        let idx = self.entries.len();
        self.entries.push(SiteEntry { site, occupants: Vec::new() });
        self.site_index.insert(site, idx);
        idx
    }

    fn remove_site(&mut self, idx: usize) {
        debug_assert!(self.entries[idx].occupants.is_empty());
        let site = self.entries[idx].site;
        self.site_index.remove(&site);
        let last = self.entries.len() - 1;
        self.entries.swap_remove(idx);
        if idx != last {
            let moved = self.entries[idx].site;
            self.site_index.insert(moved, idx);
        }
        self.adjacent_pairs -= self.neighbor_occupancy(&site);
    }

    /// Track a new particle at `site`.
    pub fn insert(&mut self, id: ParticleId, site: Site) {
        assert_eq!(site.dim(), self.d);
        assert!(
            self.positions.insert(id, site).is_none(),
            "particle {id} already tracked"
        );
        let idx = match self.site_index.get(&site) {
            Some(&i) => i,
            None => self.add_site(site),
        };
        self.entries[idx].occupants.push(id);
    }

    /// Stop tracking a particle (death).
    pub fn remove(&mut self, id: ParticleId) {
        let site = self.positions.remove(&id).expect("particle not tracked");
        let idx = self.site_index[&site];
        let occ = &mut self.entries[idx].occupants;
        let pos = occ.iter().position(|&p| p == id).unwrap();
        occ.swap_remove(pos);
        if self.entries[idx].occupants.is_empty() {
            self.remove_site(idx);
        }
    }

    /// Process at most one ring: if the next ring falls before `until`,
    /// execute it and return its time; otherwise advance the clock to
    /// `until` and return None.
    pub fn step_until(&mut self, until: f64) -> Option<f64> {
        assert!(until >= self.clock, "cannot advance backwards");
        let rate = self.total_rate();
        if rate <= 0.0 {
            self.clock = until;
            return None;
        }
        let dt = self.stream.exponential(rate);
        if self.clock + dt > until {
            self.clock = until;
            return None;
        }
        self.clock += dt;
        self.ring_uniform_active_edge();
        Some(self.clock)
    }

    /// Advance the flow to `until`, processing every ring on the way.
    pub fn advance(&mut self, until: f64) {
        while self.step_until(until).is_some() {}
    }

    /// Pick a uniform active edge and swap its endpoint contents.
    ///
    /// Sampling: pick a uniform (occupied site, direction) slot; an edge
    /// with both endpoints occupied owns two slots, so it is accepted
    /// with probability 1/2 to equalize. Rejection resamples the slot,
    /// leaving the edge choice uniform over active edges.
    fn ring_uniform_active_edge(&mut self) {
        self.rings += 1;
        loop {
            let slot = self.stream.uniform_index(self.entries.len() * 2 * self.d);
            let (site_idx, k) = (slot / (2 * self.d), slot % (2 * self.d));
            let a = self.entries[site_idx].site;
            let b = a.step(k);
            match self.site_index.get(&b) {
                Some(&b_idx) => {
                    if self.stream.next_u64() & 1 == 0 {
                        continue;
                    }
                    // both occupied: swap the occupant lists
                    let (ai, bi) = (site_idx, b_idx);
                    let mut a_occ = std::mem::take(&mut self.entries[ai].occupants);
                    let mut b_occ = std::mem::take(&mut self.entries[bi].occupants);
                    for &p in &a_occ {
                        self.positions.insert(p, b);
                    }
                    for &p in &b_occ {
                        self.positions.insert(p, a);
                    }
                    std::mem::swap(&mut a_occ, &mut b_occ);
                    self.entries[ai].occupants = a_occ;
                    self.entries[bi].occupants = b_occ;
                    // adjacency of the pair {a, b} is unchanged: the
                    // occupied-site set is the same
                    return;
                }
                None => {
                    // move everything from a to the empty site b
                    let occ = std::mem::take(&mut self.entries[site_idx].occupants);
                    for &p in &occ {
                        self.positions.insert(p, b);
                    }
                    self.remove_site(site_idx);
                    let b_idx = self.add_site(b);
                    self.entries[b_idx].occupants = occ;
                    return;
                }
            }
        }
    }
}
