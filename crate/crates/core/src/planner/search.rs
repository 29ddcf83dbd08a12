use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, NoPathReason, Result};
use crate::gaits::Primitive;
use crate::geometry::Pose2;
use crate::planner::heuristic::{build_heuristic, HeuristicField};
use crate::planner::kdtree::{pose_distance, PoseKdTree};
use crate::planner::scenario::{point_blocked, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    /// Popped poses this close to an explored pose are dropped, m.
    pub prune_radius: f64,
    /// Meters per radian of heading in the closed-list metric.
    pub angular_weight: f64,
    /// Heuristic grid cell, m.
    pub cell: f64,
    pub max_expansions: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self { prune_radius: 0.05, angular_weight: 0.1, cell: 0.05, max_expansions: 200_000 }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.prune_radius >= 0.0 && self.angular_weight >= 0.0 && self.cell > 0.0 && self.max_expansions > 0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid planner settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanNode {
    pub pose: Pose2,
    pub g: f64,
    pub f: f64,
    pub parent: Option<usize>,
    /// Index into the primitive slice of the edge that produced this node.
    pub via_primitive: Option<usize>,
    pub depth: usize,
}

/// Primitive sequence from the start pose to the goal region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// Primitive ids (`spec.id`) in execution order.
    pub primitive_ids: Vec<usize>,
    /// `primitive_ids.len() + 1` poses starting at the start pose.
    pub poses: Vec<Pose2>,
    pub total_cost: f64,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.primitive_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitive_ids.is_empty()
    }
}

/// Everything a search produced, including the poses it expanded.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub outcome: std::result::Result<Plan, NoPathReason>,
    /// Poses in the order they were expanded.
    pub expanded: Vec<Pose2>,
    /// Nodes taken off the open list, including rejected ones.
    pub popped: usize,
}

impl SearchReport {
    pub fn into_plan(self) -> Result<Plan> {
        self.outcome.map_err(Error::NoPath)
    }
}

pub fn propagate(pose: &Pose2, prim: &Primitive) -> Pose2 {
    pose.compose(&prim.delta)
}

/// Converts grid meters into cost units: the smallest cost per meter of
/// translation over the library, so the heuristic never charges more per
/// meter than the cheapest primitive does.
pub fn heuristic_scale(primitives: &[Primitive]) -> f64 {
    let s = primitives
        .iter()
        .filter(|p| p.delta.translation_norm() > 1e-9)
        .map(|p| p.cost / p.delta.translation_norm())
        .fold(f64::INFINITY, f64::min);
    // Pure rotations only: no translation to price, fall back to Dijkstra.
    if s.is_finite() { s } else { 0.0 }
}

/// Walks parent links back to the root.
pub fn reconstruct(nodes: &[PlanNode], leaf: usize, primitives: &[Primitive]) -> Plan {
    let mut chain = vec![leaf];
    while let Some(p) = nodes[*chain.last().unwrap()].parent {
        chain.push(p);
    }
    chain.reverse();
    let primitive_ids = chain[1..].iter().map(|&k| primitives[nodes[k].via_primitive.unwrap()].spec.id).collect();
    let poses = chain.iter().map(|&k| nodes[k].pose).collect();
    Plan { primitive_ids, poses, total_cost: nodes[leaf].g }
}

/// Lowest f first, then highest g, then earliest insertion.
fn pops_before(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => match a.1.total_cmp(&b.1) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.2 < b.2,
        },
    }
}

struct HeapEntry {
    f: f64,
    g: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        let (a, b) = ((self.f, self.g, self.node), (o.f, o.g, o.node));
        if pops_before(a, b) {
            Ordering::Greater
        } else if pops_before(b, a) {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

trait OpenList {
    fn push(&mut self, f: f64, g: f64, node: usize);
    fn pop(&mut self) -> Option<usize>;
}

impl OpenList for BinaryHeap<HeapEntry> {
    fn push(&mut self, f: f64, g: f64, node: usize) {
        BinaryHeap::push(self, HeapEntry { f, g, node });
    }

    fn pop(&mut self) -> Option<usize> {
        BinaryHeap::pop(self).map(|e| e.node)
    }
}

/// Unsorted open list scanned in full on every pop.
#[derive(Default)]
struct ScanOpen(Vec<(f64, f64, usize)>);

impl OpenList for ScanOpen {
    fn push(&mut self, f: f64, g: f64, node: usize) {
        self.0.push((f, g, node));
    }

    fn pop(&mut self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.0.iter().enumerate() {
            if best.is_none_or(|b| pops_before(*e, self.0[b])) {
                best = Some(i);
            }
        }
        best.map(|i| self.0.swap_remove(i).2)
    }
}

trait ClosedList {
    fn near(&self, pose: &Pose2, radius: f64) -> bool;
    fn insert(&mut self, pose: &Pose2);
}

impl ClosedList for PoseKdTree {
    fn near(&self, pose: &Pose2, radius: f64) -> bool {
        self.nearest_distance(pose).is_some_and(|d| d <= radius)
    }

    fn insert(&mut self, pose: &Pose2) {
        PoseKdTree::insert(self, pose)
    }
}

struct ScanClosed {
    weight: f64,
    poses: Vec<Pose2>,
}

impl ClosedList for ScanClosed {
    fn near(&self, pose: &Pose2, radius: f64) -> bool {
        self.poses.iter().any(|p| pose_distance(p, pose, self.weight) <= radius)
    }

    fn insert(&mut self, pose: &Pose2) {
        self.poses.push(*pose);
    }
}

fn validate_inputs(scenario: &Scenario, primitives: &[Primitive], settings: &PlannerSettings) -> Result<()> {
    scenario.validate()?;
    settings.validate()?;
    if primitives.is_empty() {
        return Err(Error::InvalidArgument("planning needs at least one primitive".into()));
    }
    if let Some(p) = primitives.iter().find(|p| !p.delta.is_finite() || !(p.cost > 0.0) || !p.cost.is_finite()) {
        return Err(Error::InvalidArgument(format!("primitive {} has a non-finite delta or non-positive cost", p.spec.id)));
    }
    Ok(())
}

fn pose_key(p: &Pose2) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.theta.to_bits()]
}

fn run(
    scenario: &Scenario,
    primitives: &[Primitive],
    settings: &PlannerSettings,
    field: &HeuristicField,
    open: &mut impl OpenList,
    closed: &mut impl ClosedList,
) -> SearchReport {
    let scale = heuristic_scale(primitives);
    let h = |p: &Pose2| field.lookup(p.x, p.y) * scale;
    let start = scenario.start;
    let mut nodes =
        vec![PlanNode { pose: start, g: 0.0, f: h(&start), parent: None, via_primitive: None, depth: 0 }];
    let mut best_g: HashMap<[u64; 3], f64> = HashMap::new();
    best_g.insert(pose_key(&start), 0.0);
    open.push(nodes[0].f, 0.0, 0);
    let mut expanded = Vec::new();
    let mut popped = 0;
    while let Some(k) = open.pop() {
        popped += 1;
        let node = nodes[k];
        if point_blocked(node.pose.x, node.pose.y, scenario) {
            continue;
        }
        if let Some(parent) = node.parent {
            let a = nodes[parent].pose;
            if point_blocked(0.5 * (a.x + node.pose.x), 0.5 * (a.y + node.pose.y), scenario) {
                continue;
            }
        }
        if scenario.at_goal(node.pose.x, node.pose.y) {
            return SearchReport { outcome: Ok(reconstruct(&nodes, k, primitives)), expanded, popped };
        }
        if closed.near(&node.pose, settings.prune_radius) {
            continue;
        }
        if expanded.len() >= settings.max_expansions {
            return SearchReport { outcome: Err(NoPathReason::ExpansionCap), expanded, popped };
        }
        closed.insert(&node.pose);
        expanded.push(node.pose);
        for (i, prim) in primitives.iter().enumerate() {
            let pose = propagate(&node.pose, prim);
            let g = node.g + prim.cost;
            let slot = best_g.entry(pose_key(&pose)).or_insert(f64::INFINITY);
            if g < *slot {
                *slot = g;
                let f = g + h(&pose);
                nodes.push(PlanNode { pose, g, f, parent: Some(k), via_primitive: Some(i), depth: node.depth + 1 });
                open.push(f, g, nodes.len() - 1);
            }
        }
    }
    SearchReport { outcome: Err(NoPathReason::OpenExhausted), expanded, popped }
}

/// A* over primitive edges with KD-tree pruning of near-duplicate poses.
/// Input errors are returned as `Err`; a failed search is reported in the
/// report's outcome.
pub fn search(scenario: &Scenario, primitives: &[Primitive], settings: &PlannerSettings) -> Result<SearchReport> {
    validate_inputs(scenario, primitives, settings)?;
    let field = build_heuristic(scenario, settings.cell)?;
    let mut open = BinaryHeap::new();
    let mut closed = PoseKdTree::new(settings.angular_weight);
    Ok(run(scenario, primitives, settings, &field, &mut open, &mut closed))
}

/// [`search`] with a failed search turned into [`Error::NoPath`].
pub fn plan(scenario: &Scenario, primitives: &[Primitive], settings: &PlannerSettings) -> Result<Plan> {
    search(scenario, primitives, settings)?.into_plan()
}

/// The same search with linear scans for both the open and closed lists.
/// Quadratic; meant as an oracle on small problems.
pub fn search_reference(
    scenario: &Scenario,
    primitives: &[Primitive],
    settings: &PlannerSettings,
) -> Result<SearchReport> {
    validate_inputs(scenario, primitives, settings)?;
    let field = build_heuristic(scenario, settings.cell)?;
    let mut open = ScanOpen::default();
    let mut closed = ScanClosed { weight: settings.angular_weight, poses: Vec::new() };
    Ok(run(scenario, primitives, settings, &field, &mut open, &mut closed))
}
