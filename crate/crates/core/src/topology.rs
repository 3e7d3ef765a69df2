//! Hierarchical PON infrastructure: cloud, OLTs with their VMs and DNS
//! brokers, ONTs and edge devices, joined by typed links.
//!
//! The node graph is a tree rooted at the cloud node. Every non-root node
//! owns exactly one uplink to its parent, so routes are forced: a path
//! climbs from both endpoints to their lowest common ancestor.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Cloud,
    Olt,
    Vm,
    Ont,
    EdgeDevice,
    Broker,
}

impl NodeKind {
    /// Whether containers may ever be hosted on this kind of node.
    pub fn can_host(self) -> bool {
        matches!(self, NodeKind::Cloud | NodeKind::Vm | NodeKind::Ont)
    }
}

/// Processing and storage capacity of a compute node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeSpec {
    pub cores: u32,
    /// Million instructions per second, per core.
    pub mips_per_core: f64,
    pub ram_mb: f64,
    pub storage_mb: f64,
    /// Power drawn by one busy core, in watts.
    #[serde(default)]
    pub active_watts: f64,
    /// Power drawn by one idle core, in watts.
    #[serde(default)]
    pub idle_watts: f64,
}

impl ComputeSpec {
    pub fn new(cores: u32, mips_per_core: f64, ram_mb: f64, storage_mb: f64) -> Self {
        Self {
            cores,
            mips_per_core,
            ram_mb,
            storage_mb,
            active_watts: 0.0,
            idle_watts: 0.0,
        }
    }

    /// Default cloud datacenter.
    pub fn cloud() -> Self {
        Self::new(64, 100_000.0, 262_144.0, 4_096_000.0)
    }

    /// Raspberry Pi 4 class ONT.
    pub fn ont() -> Self {
        Self::new(4, 12_000.0, 4_096.0, 32_000.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Fiber,
    Lan,
    Wan,
    Hypervisor,
}

/// Configurable parameters of one class of link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
    /// Joules per transferred megabyte.
    #[serde(default)]
    pub energy_per_mb: f64,
}

impl LinkParams {
    pub fn new(latency_s: f64, bandwidth_mbps: f64) -> Self {
        Self {
            latency_s,
            bandwidth_mbps,
            energy_per_mb: 0.0,
        }
    }
}

/// Parameters for every link class in the hierarchy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkTable {
    /// Edge device to its ONT.
    pub device_ont: LinkParams,
    /// ONT to OLT fiber, with the passive splitter folded in.
    pub ont_olt: LinkParams,
    /// OLT uplink to the cloud.
    pub olt_cloud: LinkParams,
    /// OLT host backplane to one of its VMs.
    pub olt_vm: LinkParams,
    /// OLT to its co-located DNS broker.
    pub olt_broker: LinkParams,
    /// Mediation between a VM and the containers it runs.
    pub hypervisor: LinkParams,
}

impl Default for LinkTable {
    fn default() -> Self {
        Self {
            device_ont: LinkParams::new(0.0005, 1_000.0),
            ont_olt: LinkParams::new(0.001, 1_000.0),
            olt_cloud: LinkParams::new(0.020, 10_000.0),
            olt_vm: LinkParams::new(0.0, 10_000.0),
            olt_broker: LinkParams::new(0.0, 10_000.0),
            hypervisor: LinkParams::new(0.0002, 10_000.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub olts: u32,
    pub vms_per_olt: u32,
    /// Number of ONTs; one per user when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onts: Option<u32>,
    #[serde(default = "ComputeSpec::cloud")]
    pub cloud: ComputeSpec,
    /// Physical OLT server; its cores are partitioned among the VMs.
    pub olt: ComputeSpec,
    pub vm: ComputeSpec,
    #[serde(default = "ComputeSpec::ont")]
    pub ont: ComputeSpec,
    #[serde(default)]
    pub links: LinkTable,
    /// Allow the cloud node to host containers.
    #[serde(default)]
    pub cloud_hosts_containers: bool,
}

/// Depth of the deepest node kind (edge devices) plus one.
const MAX_DEPTH: usize = 4;

/// Inline list of the links between two nodes (at most two tree heights).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Route {
    links: [LinkId; 2 * (MAX_DEPTH - 1)],
    len: u8,
}

impl Route {
    fn push(&mut self, l: LinkId) {
        self.links[self.len as usize] = l;
        self.len += 1;
    }
}

impl std::ops::Deref for Route {
    type Target = [LinkId];
    fn deref(&self) -> &[LinkId] {
        &self.links[..self.len as usize]
    }
}

/// Route data of one node, packed for path queries: ids of its ancestors and
/// their uplinks by depth, and the propagation latency to the root.
#[derive(Clone, Copy, Debug, Default)]
struct Lineage {
    chain: [u32; MAX_DEPTH],
    uplinks: [u32; MAX_DEPTH],
    root_latency: f64,
    depth: u32,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub id: LinkId,
    /// Lower end of the link in the hierarchy.
    pub child: NodeId,
    pub parent: NodeId,
    pub kind: LinkKind,
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
    pub energy_per_mb: f64,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub compute: Option<ComputeSpec>,
    pub parent: Option<NodeId>,
    pub uplink: Option<LinkId>,
    depth: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("device {device} references ONT index {ont}, but only {onts} ONTs exist")]
    DanglingOnt { device: usize, ont: u32, onts: u32 },
    #[error("{count} devices need an ONT but the topology has none")]
    NoOnts { count: usize },
    #[error("ONTs need an OLT but the topology has none")]
    NoOlts,
    #[error("{vms} VMs x {cores} cores exceed the {olt_cores} physical OLT cores")]
    VmCoresExceedOlt { vms: u32, cores: u32, olt_cores: u32 },
    #[error("duplicate node identifier {0}")]
    DuplicateNode(NodeId),
    #[error("no path between {0} and {1}")]
    Disconnected(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Immutable infrastructure graph.
#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    cloud: NodeId,
    olts: Vec<NodeId>,
    brokers: Vec<NodeId>,
    vms: Vec<NodeId>,
    onts: Vec<NodeId>,
    devices: Vec<NodeId>,
    /// VM -> hypervisor link (not part of any routed path).
    hypervisor: Vec<Option<LinkId>>,
    olt_of: Vec<Option<NodeId>>,
    /// Summed uplink latency from each node up to the cloud.
    lineage: Vec<Lineage>,
    vms_of_olt: Vec<Vec<NodeId>>,
    devices_below: Vec<Vec<NodeId>>,
    cloud_hosts_containers: bool,
}

impl Topology {
    /// Builds the hierarchy. `devices[i]` is the explicit ONT index of
    /// device `i`, or `None` to auto-assign device `i` to ONT `i % onts`.
    ///
    /// Node identifiers are assigned in a fixed order: cloud, OLTs, brokers,
    /// VMs, ONTs, devices. VMs and ONTs are interleaved across OLTs (VM `k`
    /// and ONT `k` sit under OLT `k % olts`), so identifier order visits the
    /// OLTs in rotation.
    pub fn build(cfg: &TopologyConfig, devices: &[Option<u32>]) -> Result<Self, TopologyError> {
        let ont_count = cfg.onts.unwrap_or(devices.len() as u32);
        if !devices.is_empty() && ont_count == 0 {
            return Err(TopologyError::NoOnts {
                count: devices.len(),
            });
        }
        if ont_count > 0 && cfg.olts == 0 {
            return Err(TopologyError::NoOlts);
        }
        if cfg.vms_per_olt * cfg.vm.cores > cfg.olt.cores {
            return Err(TopologyError::VmCoresExceedOlt {
                vms: cfg.vms_per_olt,
                cores: cfg.vm.cores,
                olt_cores: cfg.olt.cores,
            });
        }
        for (i, d) in devices.iter().enumerate() {
            if let Some(ont) = *d {
                if ont >= ont_count {
                    return Err(TopologyError::DanglingOnt {
                        device: i,
                        ont,
                        onts: ont_count,
                    });
                }
            }
        }

        let mut b = Builder::default();
        let links = &cfg.links;
        let cloud = b.node(NodeKind::Cloud, Some(cfg.cloud.clone()), None);

        let olts: Vec<NodeId> = (0..cfg.olts)
            .map(|_| b.node(NodeKind::Olt, Some(cfg.olt.clone()), Some((cloud, LinkKind::Wan, &links.olt_cloud))))
            .collect();
        let brokers: Vec<NodeId> = olts
            .iter()
            .map(|&olt| b.node(NodeKind::Broker, None, Some((olt, LinkKind::Lan, &links.olt_broker))))
            .collect();
        let mut vms = Vec::new();
        for _ in 0..cfg.vms_per_olt {
            for &olt in &olts {
                vms.push(b.node(NodeKind::Vm, Some(cfg.vm.clone()), Some((olt, LinkKind::Lan, &links.olt_vm))));
            }
        }
        let onts: Vec<NodeId> = (0..ont_count)
            .map(|k| {
                let olt = olts[(k % cfg.olts) as usize];
                b.node(NodeKind::Ont, Some(cfg.ont.clone()), Some((olt, LinkKind::Fiber, &links.ont_olt)))
            })
            .collect();
        let device_ids: Vec<NodeId> = devices
            .iter()
            .enumerate()
            .map(|(i, explicit)| {
                let ont = explicit.unwrap_or((i as u32) % ont_count.max(1));
                b.node(NodeKind::EdgeDevice, None, Some((onts[ont as usize], LinkKind::Lan, &links.device_ont)))
            })
            .collect();

        let mut hypervisor = vec![None; b.nodes.len()];
        for &vm in &vms {
            let id = LinkId(b.links.len() as u32);
            b.links.push(Link {
                id,
                child: vm,
                parent: vm,
                kind: LinkKind::Hypervisor,
                latency_s: links.hypervisor.latency_s,
                bandwidth_mbps: links.hypervisor.bandwidth_mbps,
                energy_per_mb: links.hypervisor.energy_per_mb,
            });
            hypervisor[vm.index()] = Some(id);
        }

        let mut topo = Topology {
            nodes: b.nodes,
            links: b.links,
            cloud,
            olts,
            brokers,
            vms,
            onts,
            devices: device_ids,
            hypervisor,
            olt_of: Vec::new(),
            lineage: Vec::new(),
            vms_of_olt: Vec::new(),
            devices_below: Vec::new(),
            cloud_hosts_containers: cfg.cloud_hosts_containers,
        };
        topo.index();
        Ok(topo)
    }

    fn index(&mut self) {
        let n = self.nodes.len();
        // Parents are created before their children.
        let mut lineage = vec![Lineage::default(); n];
        for node in &self.nodes {
            let i = node.id.index();
            if let (Some(p), Some(l)) = (node.parent, node.uplink) {
                lineage[i] = lineage[p.index()];
                lineage[i].root_latency += self.links[l.index()].latency_s;
                lineage[i].uplinks[node.depth as usize] = l.0;
            }
            lineage[i].chain[node.depth as usize] = node.id.0;
            lineage[i].depth = node.depth;
        }
        self.lineage = lineage;
        let mut olt_of = vec![None; n];
        for node in &self.nodes {
            let mut cur = Some(node.id);
            while let Some(c) = cur {
                if self.nodes[c.index()].kind == NodeKind::Olt {
                    olt_of[node.id.index()] = Some(c);
                    break;
                }
                cur = self.nodes[c.index()].parent;
            }
        }
        let mut vms_of_olt = vec![Vec::new(); n];
        for &vm in &self.vms {
            if let Some(olt) = olt_of[vm.index()] {
                vms_of_olt[olt.index()].push(vm);
            }
        }
        let mut devices_below = vec![Vec::new(); n];
        for &d in &self.devices {
            let mut cur = self.nodes[d.index()].parent;
            while let Some(c) = cur {
                devices_below[c.index()].push(d);
                cur = self.nodes[c.index()].parent;
            }
        }
        self.olt_of = olt_of;
        self.vms_of_olt = vms_of_olt;
        self.devices_below = devices_below;
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn compute(&self, id: NodeId) -> Option<&ComputeSpec> {
        self.nodes[id.index()].compute.as_ref()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn cloud(&self) -> NodeId {
        self.cloud
    }

    pub fn olts(&self) -> &[NodeId] {
        &self.olts
    }

    pub fn brokers(&self) -> &[NodeId] {
        &self.brokers
    }

    pub fn vms(&self) -> &[NodeId] {
        &self.vms
    }

    pub fn onts(&self) -> &[NodeId] {
        &self.onts
    }

    pub fn devices(&self) -> &[NodeId] {
        &self.devices
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    /// OLT above (or equal to) `id`; `None` for the cloud.
    pub fn olt_of(&self, id: NodeId) -> Option<NodeId> {
        self.olt_of[id.index()]
    }

    /// The DNS broker serving the OLT that `id` hangs under.
    pub fn broker_of(&self, id: NodeId) -> Option<NodeId> {
        let olt = self.olt_of(id)?;
        let pos = self.olts.iter().position(|&o| o == olt)?;
        Some(self.brokers[pos])
    }

    pub fn ont_of(&self, device: NodeId) -> Option<NodeId> {
        self.parent(device)
            .filter(|&p| self.kind(p) == NodeKind::Ont)
    }

    pub fn vms_of(&self, olt: NodeId) -> &[NodeId] {
        &self.vms_of_olt[olt.index()]
    }

    /// Edge devices located anywhere below `id`.
    pub fn devices_below(&self, id: NodeId) -> &[NodeId] {
        &self.devices_below[id.index()]
    }

    pub fn hypervisor_link(&self, vm: NodeId) -> Option<&Link> {
        self.hypervisor
            .get(vm.index())
            .copied()
            .flatten()
            .map(|l| &self.links[l.index()])
    }

    pub fn cloud_hosts_containers(&self) -> bool {
        self.cloud_hosts_containers
    }

    fn check(&self, id: NodeId) -> Result<(), TopologyError> {
        if id.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownNode(id))
        }
    }

    /// Depth of the lowest common ancestor of `a` and `b`.
    fn meet(&self, a: NodeId, b: NodeId) -> Result<usize, TopologyError> {
        self.check(a)?;
        self.check(b)?;
        let (la, lb) = (&self.lineage[a.index()], &self.lineage[b.index()]);
        if la.chain[0] != lb.chain[0] {
            return Err(TopologyError::Disconnected(a, b));
        }
        let mut d = la.depth.min(lb.depth) as usize;
        while la.chain[d] != lb.chain[d] {
            d -= 1;
        }
        Ok(d)
    }

    /// Links traversed from `a` to `b`, in travel order.
    pub fn path(&self, a: NodeId, b: NodeId) -> Result<Vec<LinkId>, TopologyError> {
        Ok(self.route(a, b)?.to_vec())
    }

    /// [`Topology::path`] without allocating.
    pub fn route(&self, a: NodeId, b: NodeId) -> Result<Route, TopologyError> {
        let d = self.meet(a, b)?;
        let (la, lb) = (&self.lineage[a.index()], &self.lineage[b.index()]);
        let mut r = Route::default();
        for &l in la.uplinks[d + 1..=la.depth as usize].iter().rev() {
            r.push(LinkId(l));
        }
        for &l in &lb.uplinks[d + 1..=lb.depth as usize] {
            r.push(LinkId(l));
        }
        Ok(r)
    }

    /// Sum of propagation latencies along `path(a, b)`, from the cached
    /// latencies to the root and the lowest common ancestor.
    pub fn path_latency(&self, a: NodeId, b: NodeId) -> Result<f64, TopologyError> {
        let d = self.meet(a, b)?;
        let (la, lb) = (&self.lineage[a.index()], &self.lineage[b.index()]);
        let lca = &self.lineage[la.chain[d] as usize];
        Ok((la.root_latency - lca.root_latency) + (lb.root_latency - lca.root_latency))
    }

    /// Smallest bandwidth along the path; infinite for an empty path.
    pub fn path_bottleneck_mbps(&self, path: &[LinkId]) -> f64 {
        path.iter()
            .map(|l| self.links[l.index()].bandwidth_mbps)
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes that may host containers under the given deployment model.
    pub fn execution_hosts(&self, far_edge: bool) -> Vec<NodeId> {
        let mut hosts: Vec<NodeId> = Vec::new();
        if self.cloud_hosts_containers {
            hosts.push(self.cloud);
        }
        hosts.extend_from_slice(&self.vms);
        if far_edge {
            hosts.extend_from_slice(&self.onts);
        }
        hosts.sort();
        hosts
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl Builder {
    fn node(
        &mut self,
        kind: NodeKind,
        compute: Option<ComputeSpec>,
        up: Option<(NodeId, LinkKind, &LinkParams)>,
    ) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let (parent, uplink, depth) = match up {
            Some((parent, lk, params)) => {
                let lid = LinkId(self.links.len() as u32);
                self.links.push(Link {
                    id: lid,
                    child: id,
                    parent,
                    kind: lk,
                    latency_s: params.latency_s,
                    bandwidth_mbps: params.bandwidth_mbps,
                    energy_per_mb: params.energy_per_mb,
                });
                (Some(parent), Some(lid), self.nodes[parent.index()].depth + 1)
            }
            None => (None, None, 0),
        };
        self.nodes.push(Node {
            id,
            kind,
            compute,
            parent,
            uplink,
            depth,
        });
        id
    }
}
