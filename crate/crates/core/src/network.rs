//! Flow-level transfers with per-link equal bandwidth sharing.
//!
//! A transfer occupies every link on its route while it drains. Its rate is
//! the minimum over those links of `bandwidth / active_transfers`. Rates are
//! recomputed whenever a transfer joins or leaves a link, and the affected
//! transfers get fresh drain deadlines. Propagation latency is added once,
//! after the last byte has drained.

use crate::engine::SimTime;
use crate::topology::{LinkId, NodeId, Route, Topology, TopologyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransferKind {
    TaskRequest,
    TaskResponse,
    ContainerImage,
    Control,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransferId(pub u32);

#[derive(Clone, Debug)]
pub struct Transfer<T> {
    pub id: TransferId,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_mb: f64,
    pub kind: TransferKind,
    pub tag: T,
    pub remaining_mb: f64,
    pub rate_mbps: f64,
    pub started_at: SimTime,
    pub latency_s: f64,
    /// Time the last byte leaves the route, at the current rate.
    pub drain_end: SimTime,
    path: Route,
    last_update: f64,
    draining: bool,
}

impl<T> Transfer<T> {
    pub fn path(&self) -> &[LinkId] {
        &self.path
    }

    pub fn is_draining(&self) -> bool {
        self.draining
    }
}

/// Timer the owner of the network must schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wakeup {
    /// The transfer drains at `at` unless a later wakeup with a newer
    /// version supersedes this one.
    Drained {
        id: TransferId,
        version: u32,
        at: SimTime,
    },
    /// The transfer is delivered at its destination at `at`.
    Delivered { id: TransferId, at: SimTime },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetworkError {
    #[error("no route: {0}")]
    NoPath(#[from] TopologyError),
    #[error("invalid transfer size {0} MB")]
    InvalidSize(f64),
}

struct Slot<T> {
    version: u32,
    transfer: Option<Transfer<T>>,
}

pub struct Network<T> {
    slots: Vec<Slot<T>>,
    free: Vec<u32>,
    link_transfers: Vec<Vec<TransferId>>,
    link_bandwidth: Vec<f64>,
    link_energy_j: Vec<f64>,
    wakeups: Vec<Wakeup>,
    mark: Vec<u64>,
    stamp: u64,
    scratch: Vec<TransferId>,
    delivered_mb: f64,
}

impl<T: Clone> Network<T> {
    pub fn new(topo: &Topology) -> Self {
        let links = topo.links();
        Self {
            slots: Vec::new(),
            free: Vec::new(),
            link_transfers: vec![Vec::new(); links.len()],
            link_bandwidth: links.iter().map(|l| l.bandwidth_mbps).collect(),
            link_energy_j: vec![0.0; links.len()],
            wakeups: Vec::new(),
            mark: Vec::new(),
            stamp: 0,
            scratch: Vec::new(),
            delivered_mb: 0.0,
        }
    }

    /// Starts moving `size_mb` megabytes from `src` to `dst`.
    #[allow(clippy::too_many_arguments)]
    pub fn start(
        &mut self,
        topo: &Topology,
        src: NodeId,
        dst: NodeId,
        size_mb: f64,
        kind: TransferKind,
        tag: T,
        now: SimTime,
    ) -> Result<TransferId, NetworkError> {
        if !(size_mb.is_finite() && size_mb >= 0.0) {
            return Err(NetworkError::InvalidSize(size_mb));
        }
        let path = topo.route(src, dst)?;
        let latency_s = topo.path_latency(src, dst)?;
        for &l in path.iter() {
            self.link_energy_j[l.index()] += size_mb * topo.link(l).energy_per_mb;
        }

        let index = match self.free.pop() {
            Some(i) => i,
            None => {
                self.slots.push(Slot {
                    version: 0,
                    transfer: None,
                });
                self.mark.push(0);
                (self.slots.len() - 1) as u32
            }
        };
        let id = TransferId(index);
        let draining = size_mb > 0.0 && !path.is_empty();
        let transfer = Transfer {
            id,
            src,
            dst,
            size_mb,
            kind,
            tag,
            remaining_mb: size_mb,
            rate_mbps: 0.0,
            started_at: now,
            latency_s,
            drain_end: now,
            path,
            last_update: now.secs(),
            draining,
        };
        if !draining {
            self.slots[index as usize].transfer = Some(transfer);
            self.wakeups.push(Wakeup::Delivered {
                id,
                at: now.after(latency_s),
            });
            return Ok(id);
        }

        let path = transfer.path;
        self.slots[index as usize].transfer = Some(transfer);
        self.settle_neighbours(&path, now);
        for &l in path.iter() {
            self.link_transfers[l.index()].push(id);
        }
        self.scratch.push(id);
        self.recompute_scratch(now);
        Ok(id)
    }

    /// Handles a drain wakeup. Stale versions are ignored and return `false`.
    pub fn on_drained(&mut self, id: TransferId, version: u32, now: SimTime) -> bool {
        let slot = &self.slots[id.0 as usize];
        if slot.version != version {
            return false;
        }
        let Some(t) = slot.transfer.as_ref() else {
            return false;
        };
        if !t.draining {
            return false;
        }
        let path = t.path;
        self.settle_neighbours(&path, now);
        for &l in path.iter() {
            let list = &mut self.link_transfers[l.index()];
            if let Some(pos) = list.iter().position(|&x| x == id) {
                list.swap_remove(pos);
            }
        }
        self.scratch.retain(|&x| x != id);
        let slot = &mut self.slots[id.0 as usize];
        slot.version = slot.version.wrapping_add(1);
        let t = slot.transfer.as_mut().expect("transfer present");
        t.remaining_mb = 0.0;
        t.rate_mbps = 0.0;
        t.draining = false;
        t.drain_end = now;
        let at = now.after(t.latency_s);
        self.wakeups.push(Wakeup::Delivered { id, at });
        self.recompute_scratch(now);
        true
    }

    /// Removes a delivered transfer and hands it back to the caller.
    pub fn on_delivered(&mut self, id: TransferId) -> Option<Transfer<T>> {
        let slot = &mut self.slots[id.0 as usize];
        let t = slot.transfer.take()?;
        debug_assert!(!t.draining);
        slot.version = slot.version.wrapping_add(1);
        self.free.push(id.0);
        self.delivered_mb += t.size_mb;
        Some(t)
    }

    /// Settles progress of every transfer sharing a link with `path` and
    /// collects them into `scratch`.
    fn settle_neighbours(&mut self, path: &[LinkId], now: SimTime) {
        self.stamp += 1;
        self.scratch.clear();
        let t_now = now.secs();
        for &l in path {
            for &tid in &self.link_transfers[l.index()] {
                let i = tid.0 as usize;
                if self.mark[i] == self.stamp {
                    continue;
                }
                self.mark[i] = self.stamp;
                if let Some(t) = self.slots[i].transfer.as_mut() {
                    let dt = t_now - t.last_update;
                    if dt > 0.0 {
                        t.remaining_mb = (t.remaining_mb - t.rate_mbps * dt / 8.0).max(0.0);
                    }
                    t.last_update = t_now;
                }
                self.scratch.push(tid);
            }
        }
    }

    fn recompute_scratch(&mut self, now: SimTime) {
        let t_now = now.secs();
        for k in 0..self.scratch.len() {
            let tid = self.scratch[k];
            let i = tid.0 as usize;
            let Some(t) = self.slots[i].transfer.as_mut() else {
                continue;
            };
            let rate = t
                .path
                .iter()
                .map(|l| self.link_bandwidth[l.index()] / self.link_transfers[l.index()].len() as f64)
                .fold(f64::INFINITY, f64::min);
            t.last_update = t_now;
            if rate == t.rate_mbps {
                continue;
            }
            t.rate_mbps = rate;
            t.drain_end = now.after(t.remaining_mb * 8.0 / rate);
            let slot = &mut self.slots[i];
            slot.version = slot.version.wrapping_add(1);
            self.wakeups.push(Wakeup::Drained {
                id: tid,
                version: slot.version,
                at: slot.transfer.as_ref().unwrap().drain_end,
            });
        }
        self.scratch.clear();
    }

    /// Timers produced since the last call, in production order.
    pub fn take_wakeups(&mut self, out: &mut Vec<Wakeup>) {
        out.append(&mut self.wakeups);
    }

    pub fn get(&self, id: TransferId) -> Option<&Transfer<T>> {
        self.slots.get(id.0 as usize)?.transfer.as_ref()
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().filter(|s| s.transfer.is_some()).count()
    }

    pub fn link_load(&self, link: LinkId) -> &[TransferId] {
        &self.link_transfers[link.index()]
    }

    /// Sum of allocated rates on `link`.
    pub fn link_allocated_mbps(&self, link: LinkId) -> f64 {
        self.link_transfers[link.index()]
            .iter()
            .filter_map(|t| self.get(*t))
            .map(|t| t.rate_mbps)
            .sum()
    }

    /// True when every link carries at most its bandwidth (1e-9 relative).
    pub fn capacity_respected(&self) -> bool {
        (0..self.link_transfers.len()).all(|l| {
            let bw = self.link_bandwidth[l];
            self.link_allocated_mbps(LinkId(l as u32)) <= bw * (1.0 + 1e-9)
        })
    }

    pub fn link_energy_j(&self) -> &[f64] {
        &self.link_energy_j
    }

    pub fn total_energy_j(&self) -> f64 {
        self.link_energy_j.iter().sum()
    }

    pub fn delivered_mb(&self) -> f64 {
        self.delivered_mb
    }
}
