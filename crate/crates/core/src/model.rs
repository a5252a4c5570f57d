//! Static system description: servers, resources, service chains, VNFs and
//! their fixed placement, plus the service-rate function of a VNF instance.
//!
//! Everything here is immutable once a [`SystemModel`] is built and can be
//! shared across concurrent simulation runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::topology::CommCostMatrix;

/// Index of a server hosting VNF instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ServerId(pub usize);

/// Index of a VNF. The same function appearing in two chains is two VNFs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VnfId(pub usize);

/// Index of a network service (one service chain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ServiceId(pub usize);

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for VnfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

impl fmt::Display for ServiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

/// Non-negative integer amount per resource type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(pub Vec<u32>);

impl ResourceVector {
    pub fn zeros(types: usize) -> Self {
        Self(vec![0; types])
    }

    pub fn scalar(amount: u32) -> Self {
        Self(vec![amount])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Componentwise `self ⪯ other`. Vectors of different length never compare.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &ResourceVector) -> ResourceVector {
        debug_assert_eq!(self.len(), other.len());
        ResourceVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn dot(&self, weights: &ResourceVector) -> u64 {
        self.0
            .iter()
            .zip(&weights.0)
            .map(|(&a, &w)| u64::from(a) * u64::from(w))
            .sum()
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: ServerId,
    /// Capacity per resource type.
    pub capacity: ResourceVector,
    /// Energy cost per allocated unit of each resource type.
    pub unit_cost: ResourceVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnfSpec {
    pub id: VnfId,
    pub service: ServiceId,
    /// 1-based position in the service chain.
    pub position: usize,
    /// Requests processed per allocated unit of each resource type.
    pub theta: ResourceVector,
    /// Hard cap on requests processed by one instance in one slot.
    pub phi_max: u32,
    /// Admissible allocations. Always contains the all-zero vector.
    pub options: Vec<ResourceVector>,
}

impl VnfSpec {
    /// Linear-with-cap service rate, without checking option membership.
    pub fn rate(&self, alloc: &ResourceVector) -> u32 {
        let linear = self.theta.dot(alloc);
        linear.min(u64::from(self.phi_max)) as u32
    }
}

/// Service rate `min(phi_max, θ·alloc)` of an instance given an allocation
/// that must be one of the VNF's admissible options.
pub fn service_rate(vnf: &VnfSpec, alloc: &ResourceVector) -> Result<u32, ModelError> {
    if !vnf.options.contains(alloc) {
        return Err(ModelError::InvalidOption {
            vnf: vnf.id,
            alloc: alloc.clone(),
        });
    }
    Ok(vnf.rate(alloc))
}

/// `{0, 1, ..., y_max}` units of a single resource type.
pub fn single_resource_options(y_max: u32) -> Vec<ResourceVector> {
    (0..=y_max).map(ResourceVector::scalar).collect()
}

/// Cross product of `0..=per_type_max[i]`, keeping only vectors that fit
/// the largest server.
pub fn cross_product_options(
    per_type_max: &ResourceVector,
    largest_server: &ResourceVector,
) -> Vec<ResourceVector> {
    let mut out = vec![ResourceVector(Vec::new())];
    for &max in &per_type_max.0 {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=max).map(move |a| {
                    let mut v = prefix.0.clone();
                    v.push(a);
                    ResourceVector(v)
                })
            })
            .collect();
    }
    out.retain(|o| o.fits_within(largest_server));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceChain {
    pub id: ServiceId,
    /// Ordered VNFs of the chain; `vnfs[0]` is the ingress.
    pub vnfs: Vec<VnfId>,
    /// Prediction window size D_k in slots.
    pub window_size: u32,
}

impl ServiceChain {
    pub fn ingress(&self) -> VnfId {
        self.vnfs[0]
    }

    pub fn terminal(&self) -> VnfId {
        self.vnfs[self.vnfs.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub services: Vec<ServiceChain>,
    /// Indexed by `VnfId`.
    pub vnfs: Vec<VnfSpec>,
}

impl Catalog {
    pub fn vnf(&self, f: VnfId) -> Result<&VnfSpec, ModelError> {
        self.vnfs.get(f.0).ok_or(ModelError::UnknownVnf(f))
    }

    pub fn service(&self, k: ServiceId) -> Result<&ServiceChain, ModelError> {
        self.services.get(k.0).ok_or(ModelError::UnknownService(k))
    }

    pub fn is_ingress(&self, f: VnfId) -> bool {
        self.vnfs.get(f.0).is_some_and(|v| v.position == 1)
    }

    pub fn is_terminal(&self, f: VnfId) -> bool {
        self.vnfs.get(f.0).is_some_and(|v| {
            self.services
                .get(v.service.0)
                .is_some_and(|s| s.vnfs.len() == v.position)
        })
    }

    pub fn max_phi(&self) -> u32 {
        self.vnfs.iter().map(|v| v.phi_max).max().unwrap_or(0)
    }

    pub fn max_window(&self) -> u32 {
        self.services
            .iter()
            .map(|s| s.window_size)
            .max()
            .unwrap_or(0)
    }
}

/// Previous and next VNF of `f` in its chain.
pub fn chain_neighbors(
    catalog: &Catalog,
    f: VnfId,
) -> Result<(Option<VnfId>, Option<VnfId>), ModelError> {
    let vnf = catalog.vnf(f)?;
    let chain = catalog.service(vnf.service)?;
    let idx = chain
        .vnfs
        .iter()
        .position(|&g| g == f)
        .ok_or(ModelError::UnknownVnf(f))?;
    let prev = idx.checked_sub(1).map(|i| chain.vnfs[i]);
    let next = chain.vnfs.get(idx + 1).copied();
    Ok((prev, next))
}

/// Fixed placement of VNF instances; at most one instance per (VNF, server).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Placement {
    /// F_s: VNFs with an instance on each server.
    pub hosted: BTreeMap<ServerId, BTreeSet<VnfId>>,
    /// S_f: servers hosting an instance of each VNF.
    pub hosts: BTreeMap<VnfId, BTreeSet<ServerId>>,
}

impl Placement {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VnfId, ServerId)>) -> Self {
        let mut p = Placement::default();
        for (f, s) in pairs {
            p.insert(f, s);
        }
        p
    }

    pub fn insert(&mut self, f: VnfId, s: ServerId) -> bool {
        let fresh = self.hosts.entry(f).or_default().insert(s);
        self.hosted.entry(s).or_default().insert(f);
        fresh
    }

    pub fn servers_of(&self, f: VnfId) -> impl Iterator<Item = ServerId> + '_ {
        self.hosts.get(&f).into_iter().flatten().copied()
    }

    pub fn vnfs_on(&self, s: ServerId) -> impl Iterator<Item = VnfId> + '_ {
        self.hosted.get(&s).into_iter().flatten().copied()
    }

    pub fn instance_count(&self, f: VnfId) -> usize {
        self.hosts.get(&f).map_or(0, BTreeSet::len)
    }

    pub fn max_instances(&self) -> usize {
        self.hosts.values().map(BTreeSet::len).max().unwrap_or(0)
    }
}

/// A violated model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnplacedVnf(VnfId),
    PlacementInconsistency {
        vnf: VnfId,
        server: ServerId,
    },
    UnknownServer(ServerId),
    UnknownVnf(VnfId),
    ResourceArity {
        what: String,
        expected: usize,
        got: usize,
    },
    EmptyServer(ServerId),
    ShortChain(ServiceId),
    DuplicateVnfInChain {
        service: ServiceId,
        vnf: VnfId,
    },
    VnfChainMismatch(VnfId),
    MissingEmptyOption(VnfId),
    OptionTooLarge {
        vnf: VnfId,
        option: ResourceVector,
    },
    OptionFitsNoHost {
        vnf: VnfId,
        option: ResourceVector,
    },
    ZeroPhiMax(VnfId),
    CommMatrixSize {
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnplacedVnf(v) => write!(f, "unplaced VNF {v}"),
            Violation::PlacementInconsistency { vnf, server } => {
                write!(f, "placement inconsistency: {vnf} on {server}")
            }
            Violation::UnknownServer(s) => write!(f, "unknown server {s}"),
            Violation::UnknownVnf(v) => write!(f, "unknown VNF {v}"),
            Violation::ResourceArity {
                what,
                expected,
                got,
            } => write!(f, "{what} has {got} resource types, expected {expected}"),
            Violation::EmptyServer(s) => write!(f, "server {s} has no capacity"),
            Violation::ShortChain(k) => write!(f, "service {k} has fewer than 2 VNFs"),
            Violation::DuplicateVnfInChain { service, vnf } => {
                write!(f, "service {service} lists {vnf} twice")
            }
            Violation::VnfChainMismatch(v) => {
                write!(f, "{v} disagrees with its chain about service or position")
            }
            Violation::MissingEmptyOption(v) => write!(f, "{v} lacks the empty allocation"),
            Violation::OptionTooLarge { vnf, option } => {
                write!(f, "{vnf} option {option} exceeds every server")
            }
            Violation::OptionFitsNoHost { vnf, option } => {
                write!(f, "{vnf} option {option} fits no hosting server")
            }
            Violation::ZeroPhiMax(v) => write!(f, "{v} has phi_max = 0"),
            Violation::CommMatrixSize { expected, got } => {
                write!(
                    f,
                    "communication matrix is {got}x{got}, expected {expected}"
                )
            }
        }
    }
}

/// Checks every structural invariant of substrate, catalog and placement.
/// Never panics; returns all violations found.
pub fn validate_model(
    servers: &[Server],
    catalog: &Catalog,
    placement: &Placement,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let arity = servers.first().map_or(1, |s| s.capacity.len());

    for (i, s) in servers.iter().enumerate() {
        if s.id != ServerId(i) {
            out.push(Violation::UnknownServer(s.id));
        }
        for (what, v) in [("capacity", &s.capacity), ("unit cost", &s.unit_cost)] {
            if v.len() != arity {
                out.push(Violation::ResourceArity {
                    what: format!("{} of {}", what, s.id),
                    expected: arity,
                    got: v.len(),
                });
            }
        }
        if s.capacity.0.iter().all(|&c| c == 0) {
            out.push(Violation::EmptyServer(s.id));
        }
    }

    for chain in &catalog.services {
        if chain.vnfs.len() < 2 {
            out.push(Violation::ShortChain(chain.id));
        }
        let mut seen = BTreeSet::new();
        for (j, &f) in chain.vnfs.iter().enumerate() {
            if !seen.insert(f) {
                out.push(Violation::DuplicateVnfInChain {
                    service: chain.id,
                    vnf: f,
                });
            }
            match catalog.vnfs.get(f.0) {
                Some(v) if v.service == chain.id && v.position == j + 1 => {}
                Some(_) => out.push(Violation::VnfChainMismatch(f)),
                None => out.push(Violation::UnknownVnf(f)),
            }
        }
    }

    for (i, v) in catalog.vnfs.iter().enumerate() {
        if v.id != VnfId(i) {
            out.push(Violation::UnknownVnf(v.id));
        }
        if v.phi_max == 0 {
            out.push(Violation::ZeroPhiMax(v.id));
        }
        if v.theta.len() != arity {
            out.push(Violation::ResourceArity {
                what: format!("theta of {}", v.id),
                expected: arity,
                got: v.theta.len(),
            });
        }
        if !v.options.iter().any(|o| o.len() == arity && o.is_zero()) {
            out.push(Violation::MissingEmptyOption(v.id));
        }
        let hosts: Vec<&Server> = placement
            .servers_of(v.id)
            .filter_map(|s| servers.get(s.0))
            .collect();
        if placement.instance_count(v.id) == 0 {
            out.push(Violation::UnplacedVnf(v.id));
        }
        for o in v.options.iter().filter(|o| !o.is_zero()) {
            if !servers.iter().any(|s| o.fits_within(&s.capacity)) {
                out.push(Violation::OptionTooLarge {
                    vnf: v.id,
                    option: o.clone(),
                });
            } else if !hosts.is_empty() && !hosts.iter().any(|s| o.fits_within(&s.capacity)) {
                out.push(Violation::OptionFitsNoHost {
                    vnf: v.id,
                    option: o.clone(),
                });
            }
        }
    }

    for (f, ss) in &placement.hosts {
        if f.0 >= catalog.vnfs.len() {
            out.push(Violation::UnknownVnf(*f));
        }
        for s in ss {
            if s.0 >= servers.len() {
                out.push(Violation::UnknownServer(*s));
            }
            if !placement.hosted.get(s).is_some_and(|fs| fs.contains(f)) {
                out.push(Violation::PlacementInconsistency {
                    vnf: *f,
                    server: *s,
                });
            }
        }
    }
    for (s, fs) in &placement.hosted {
        for f in fs {
            if !placement.hosts.get(f).is_some_and(|ss| ss.contains(s)) {
                out.push(Violation::PlacementInconsistency {
                    vnf: *f,
                    server: *s,
                });
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// One deployed instance: VNF `vnf` on server `server`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceKey {
    pub vnf: VnfId,
    pub server: ServerId,
}

/// Validated, immutable system description with precomputed instance indices.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub servers: Vec<Server>,
    pub catalog: Catalog,
    pub placement: Placement,
    pub comm: CommCostMatrix,
    instances: Vec<InstanceKey>,
    index: BTreeMap<InstanceKey, usize>,
    /// Instance indices per VNF in ascending server order.
    by_vnf: Vec<Vec<usize>>,
    /// Instance indices per server in ascending VNF order.
    by_server: Vec<Vec<usize>>,
}

impl SystemModel {
    pub fn new(
        servers: Vec<Server>,
        catalog: Catalog,
        placement: Placement,
        comm: CommCostMatrix,
    ) -> Result<Self, ModelError> {
        let mut violations = validate_model(&servers, &catalog, &placement)
            .err()
            .unwrap_or_default();
        if comm.len() != servers.len() {
            violations.push(Violation::CommMatrixSize {
                expected: servers.len(),
                got: comm.len(),
            });
        }
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let mut instances = Vec::new();
        for (f, ss) in &placement.hosts {
            for s in ss {
                instances.push(InstanceKey {
                    vnf: *f,
                    server: *s,
                });
            }
        }
        let index = instances.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut by_vnf = vec![Vec::new(); catalog.vnfs.len()];
        let mut by_server = vec![Vec::new(); servers.len()];
        for (i, k) in instances.iter().enumerate() {
            by_vnf[k.vnf.0].push(i);
            by_server[k.server.0].push(i);
        }
        Ok(Self {
            servers,
            catalog,
            placement,
            comm,
            instances,
            index,
            by_vnf,
            by_server,
        })
    }

    pub fn instances(&self) -> &[InstanceKey] {
        &self.instances
    }

    pub fn instance_index(&self, vnf: VnfId, server: ServerId) -> Option<usize> {
        self.index.get(&InstanceKey { vnf, server }).copied()
    }

    pub fn instances_of(&self, vnf: VnfId) -> &[usize] {
        &self.by_vnf[vnf.0]
    }

    pub fn instances_on(&self, server: ServerId) -> &[usize] {
        &self.by_server[server.0]
    }

    pub fn vnf(&self, f: VnfId) -> &VnfSpec {
        &self.catalog.vnfs[f.0]
    }

    /// Next VNF in the chain, or `None` for a terminal VNF.
    pub fn next_vnf(&self, f: VnfId) -> Option<VnfId> {
        let v = &self.catalog.vnfs[f.0];
        self.catalog.services[v.service.0]
            .vnfs
            .get(v.position)
            .copied()
    }

    pub fn service_count(&self) -> usize {
        self.catalog.services.len()
    }

    pub fn resource_types(&self) -> usize {
        self.servers.first().map_or(1, |s| s.capacity.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vnf(theta: u32, phi_max: u32, y_max: u32) -> VnfSpec {
        VnfSpec {
            id: VnfId(0),
            service: ServiceId(0),
            position: 1,
            theta: ResourceVector::scalar(theta),
            phi_max,
            options: single_resource_options(y_max),
        }
    }

    #[test]
    fn service_rate_linear_and_capped() {
        assert_eq!(
            service_rate(&vnf(2, 10, 5), &ResourceVector::scalar(3)).unwrap(),
            6
        );
        assert_eq!(
            service_rate(&vnf(4, 10, 5), &ResourceVector::scalar(3)).unwrap(),
            10
        );
        assert_eq!(
            service_rate(&vnf(7, 10, 5), &ResourceVector::scalar(0)).unwrap(),
            0
        );
    }

    #[test]
    fn service_rate_rejects_foreign_option() {
        let err = service_rate(&vnf(2, 10, 2), &ResourceVector::scalar(3)).unwrap_err();
        assert!(matches!(err, ModelError::InvalidOption { .. }));
    }

    fn abc_catalog() -> Catalog {
        let mk = |i: usize| VnfSpec {
            id: VnfId(i),
            service: ServiceId(0),
            position: i + 1,
            theta: ResourceVector::scalar(1),
            phi_max: 2,
            options: single_resource_options(2),
        };
        Catalog {
            services: vec![ServiceChain {
                id: ServiceId(0),
                vnfs: vec![VnfId(0), VnfId(1), VnfId(2)],
                window_size: 0,
            }],
            vnfs: (0..3).map(mk).collect(),
        }
    }

    #[test]
    fn neighbors_follow_chain_order() {
        let c = abc_catalog();
        let (a, b, cc) = (VnfId(0), VnfId(1), VnfId(2));
        assert_eq!(chain_neighbors(&c, b).unwrap(), (Some(a), Some(cc)));
        assert_eq!(chain_neighbors(&c, a).unwrap(), (None, Some(b)));
        assert_eq!(chain_neighbors(&c, cc).unwrap(), (Some(b), None));
        assert!(matches!(
            chain_neighbors(&c, VnfId(9)),
            Err(ModelError::UnknownVnf(_))
        ));
    }

    fn servers(n: usize) -> Vec<Server> {
        (0..n)
            .map(|i| Server {
                id: ServerId(i),
                capacity: ResourceVector::scalar(2),
                unit_cost: ResourceVector::scalar(1),
            })
            .collect()
    }

    #[test]
    fn validate_accepts_consistent_model() {
        let c = abc_catalog();
        let p = Placement::from_pairs([
            (VnfId(0), ServerId(0)),
            (VnfId(1), ServerId(1)),
            (VnfId(2), ServerId(0)),
        ]);
        assert_eq!(validate_model(&servers(2), &c, &p), Ok(()));
    }

    #[test]
    fn validate_reports_unplaced_and_inconsistent() {
        let c = abc_catalog();
        let mut p = Placement::from_pairs([(VnfId(0), ServerId(0)), (VnfId(1), ServerId(1))]);
        let errs = validate_model(&servers(2), &c, &p).unwrap_err();
        assert!(errs
            .iter()
            .any(|v| v.to_string().starts_with("unplaced VNF")));

        p.insert(VnfId(2), ServerId(0));
        p.hosted.get_mut(&ServerId(0)).unwrap().remove(&VnfId(2));
        let errs = validate_model(&servers(2), &c, &p).unwrap_err();
        assert!(errs
            .iter()
            .any(|v| v.to_string().starts_with("placement inconsistency")));
    }

    #[test]
    fn validate_flags_missing_empty_option_and_oversize() {
        let mut c = abc_catalog();
        c.vnfs[0].options = vec![ResourceVector::scalar(1), ResourceVector::scalar(5)];
        let p = Placement::from_pairs((0..3).map(|i| (VnfId(i), ServerId(0))));
        let errs = validate_model(&servers(1), &c, &p).unwrap_err();
        assert!(errs.contains(&Violation::MissingEmptyOption(VnfId(0))));
        assert!(errs
            .iter()
            .any(|v| matches!(v, Violation::OptionTooLarge { .. })));
    }

    #[test]
    fn cross_product_truncates_to_largest_server() {
        let opts = cross_product_options(&ResourceVector(vec![2, 1]), &ResourceVector(vec![1, 1]));
        assert_eq!(opts.len(), 4);
        assert!(opts.contains(&ResourceVector(vec![0, 0])));
        assert!(!opts.contains(&ResourceVector(vec![2, 0])));
    }

    proptest! {
        #[test]
        fn rate_bounded_and_monotone(
            theta in proptest::collection::vec(0u32..20, 1..4),
            phi_max in 1u32..100,
            a in proptest::collection::vec(0u32..10, 4),
            bump in proptest::collection::vec(0u32..5, 4),
        ) {
            let r = theta.len();
            let spec = VnfSpec {
                id: VnfId(0), service: ServiceId(0), position: 1,
                theta: ResourceVector(theta), phi_max, options: vec![],
            };
            let lo = ResourceVector(a[..r].to_vec());
            let hi = ResourceVector(lo.0.iter().zip(&bump).map(|(x, b)| x + b).collect());
            let (rl, rh) = (spec.rate(&lo), spec.rate(&hi));
            prop_assert!(rl <= phi_max && rh <= phi_max);
            prop_assert!(rl <= rh);
            prop_assert_eq!(spec.rate(&ResourceVector::zeros(r)), 0);
        }

        #[test]
        fn placement_inverse_property(pairs in proptest::collection::vec((0usize..6, 0usize..5), 0..30)) {
            let p = Placement::from_pairs(pairs.iter().map(|&(f, s)| (VnfId(f), ServerId(s))));
            for (f, ss) in &p.hosts {
                for s in ss {
                    prop_assert!(p.hosted[s].contains(f));
                }
            }
            for (s, fs) in &p.hosted {
                for f in fs {
                    prop_assert!(p.hosts[f].contains(s));
                }
            }
        }
    }
}
