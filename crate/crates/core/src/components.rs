//! Evolving component structure of the two forests.
//!
//! Each forest partitions its vertex set into components. Components carry
//! activity flags; forest-1 components additionally track the dual mass
//! accumulated inside them (`dual_inside`) and the cap imposed by the second
//! forest (`dual_cap`), plus how many forest-2 components they currently
//! contain. A forest-2 component that does not hold the second depot always
//! sits inside exactly one forest-1 component, its parent.
//!
//! Merging two components creates a fresh component id; old ids stay in the
//! arena as dead entries so the dual history can refer to them. Every
//! component ever created owns one history record that accumulates the dual
//! growth of its active iterations; the records of one forest form a laminar
//! family.

use serde::Serialize;

use crate::instance::Vehicle;
use crate::weight::{leq_with_slack, Weight};

pub type Vertex = u32;
pub type CompId = u32;

/// One set of the laminar dual family with its accumulated dual value.
#[derive(Clone, Debug, Serialize)]
pub struct DualRecord<W> {
    /// Sorted vertex indices of the component (0 is the forest's depot).
    pub verts: Vec<Vertex>,
    pub y: W,
    /// Record of the component this one merged into, if any.
    pub parent: Option<usize>,
}

/// Frozen dual solution of a finished run.
#[derive(Clone, Debug)]
pub struct DualHistory<W> {
    pub n_targets: usize,
    pub forest1: Vec<DualRecord<W>>,
    pub forest2: Vec<DualRecord<W>>,
}

#[derive(Clone, Debug)]
struct Comp1<W> {
    live: bool,
    active: bool,
    has_depot: bool,
    /// w(C): dual mass accumulated by components inside C.
    dual_inside: W,
    /// Bound(C): dual mass the same vertices accumulated in the second forest.
    dual_cap: W,
    child_count: usize,
}

#[derive(Clone, Debug)]
struct Comp2 {
    live: bool,
    active: bool,
    has_depot: bool,
    /// Enclosing forest-1 component; `None` iff the component holds d2.
    parent: Option<CompId>,
}

/// Side effects of a merge the growth scheduler needs to react to.
#[derive(Clone, Debug, Default)]
pub struct MergeOutcome {
    pub new_comp: CompId,
    /// Vertices whose forest-1 component flipped inactive -> active.
    pub reactivated: Vec<Vertex>,
    /// The merged forest-1 component is active with no children left.
    pub exhaustion_candidate: Option<CompId>,
    /// Forest-1 component that just lost its last child and is still active.
    pub parent_exhaustion_candidate: Option<CompId>,
}

pub struct GrowthState<W: Weight> {
    n: usize,

    comp_of1: Vec<CompId>,
    comps1: Vec<Comp1<W>>,
    members1: Vec<Vec<Vertex>>,
    potential1: Vec<W>,

    comp_of2: Vec<CompId>,
    comps2: Vec<Comp2>,
    members2: Vec<Vec<Vertex>>,
    potential2: Vec<W>,

    records1: Vec<DualRecord<W>>,
    records2: Vec<DualRecord<W>>,

    labels: Vec<Option<usize>>,
    label_sets: Vec<Vec<Vertex>>,

    pub f1_edges: Vec<(Vertex, Vertex)>,
    pub f2_edges: Vec<(Vertex, Vertex)>,

    /// Total dual growth so far (sum of all per-iteration increases).
    pub elapsed: W,
    active1: usize,
    active2: usize,
    live1: usize,
    live2: usize,
}

impl<W: Weight> GrowthState<W> {
    /// Both forests start empty: every vertex is its own component, depot
    /// components inactive, every target singleton its own child/parent.
    pub fn init(n: usize) -> Self {
        let dim = n + 1;
        let mut comps1 = Vec::with_capacity(2 * dim);
        let mut comps2 = Vec::with_capacity(2 * dim);
        let mut records1 = Vec::with_capacity(2 * dim);
        let mut records2 = Vec::with_capacity(2 * dim);
        let mut members1 = Vec::with_capacity(2 * dim);
        let mut members2 = Vec::with_capacity(2 * dim);
        for v in 0..dim as Vertex {
            let depot = v == 0;
            comps1.push(Comp1 {
                live: true,
                active: !depot,
                has_depot: depot,
                dual_inside: W::zero(),
                dual_cap: W::zero(),
                child_count: if depot { 0 } else { 1 },
            });
            comps2.push(Comp2 {
                live: true,
                active: !depot,
                has_depot: depot,
                parent: if depot { None } else { Some(v) },
            });
            records1.push(DualRecord { verts: vec![v], y: W::zero(), parent: None });
            records2.push(DualRecord { verts: vec![v], y: W::zero(), parent: None });
            members1.push(vec![v]);
            members2.push(vec![v]);
        }
        GrowthState {
            n,
            comp_of1: (0..dim as Vertex).collect(),
            comps1,
            members1,
            potential1: vec![W::zero(); dim],
            comp_of2: (0..dim as Vertex).collect(),
            comps2,
            members2,
            potential2: vec![W::zero(); dim],
            records1,
            records2,
            labels: vec![None; dim],
            label_sets: Vec::new(),
            f1_edges: Vec::new(),
            f2_edges: Vec::new(),
            elapsed: W::zero(),
            active1: n,
            active2: n,
            live1: dim,
            live2: dim,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.n
    }

    pub fn comp_of(&self, vehicle: Vehicle, v: Vertex) -> CompId {
        match vehicle {
            Vehicle::First => self.comp_of1[v as usize],
            Vehicle::Second => self.comp_of2[v as usize],
        }
    }

    pub fn arena_len(&self, vehicle: Vehicle) -> usize {
        match vehicle {
            Vehicle::First => self.comps1.len(),
            Vehicle::Second => self.comps2.len(),
        }
    }

    pub fn is_live(&self, vehicle: Vehicle, c: CompId) -> bool {
        match vehicle {
            Vehicle::First => self.comps1[c as usize].live,
            Vehicle::Second => self.comps2[c as usize].live,
        }
    }

    pub fn is_active(&self, vehicle: Vehicle, c: CompId) -> bool {
        match vehicle {
            Vehicle::First => self.comps1[c as usize].active,
            Vehicle::Second => self.comps2[c as usize].active,
        }
    }

    pub fn has_depot(&self, vehicle: Vehicle, c: CompId) -> bool {
        match vehicle {
            Vehicle::First => self.comps1[c as usize].has_depot,
            Vehicle::Second => self.comps2[c as usize].has_depot,
        }
    }

    pub fn members(&self, vehicle: Vehicle, c: CompId) -> &[Vertex] {
        match vehicle {
            Vehicle::First => &self.members1[c as usize],
            Vehicle::Second => &self.members2[c as usize],
        }
    }

    /// w(C) for a forest-1 component.
    pub fn dual_inside(&self, c: CompId) -> &W {
        &self.comps1[c as usize].dual_inside
    }

    /// Bound(C) for a forest-1 component.
    pub fn dual_cap(&self, c: CompId) -> &W {
        &self.comps1[c as usize].dual_cap
    }

    pub fn child_count(&self, c: CompId) -> usize {
        self.comps1[c as usize].child_count
    }

    pub fn parent(&self, c2: CompId) -> Option<CompId> {
        self.comps2[c2 as usize].parent
    }

    pub fn potential(&self, vehicle: Vehicle, v: Vertex) -> &W {
        match vehicle {
            Vehicle::First => &self.potential1[v as usize],
            Vehicle::Second => &self.potential2[v as usize],
        }
    }

    pub fn active_count(&self, vehicle: Vehicle) -> usize {
        match vehicle {
            Vehicle::First => self.active1,
            Vehicle::Second => self.active2,
        }
    }

    pub fn live_count(&self, vehicle: Vehicle) -> usize {
        match vehicle {
            Vehicle::First => self.live1,
            Vehicle::Second => self.live2,
        }
    }

    pub fn label_of(&self, v: Vertex) -> Option<&[Vertex]> {
        self.labels[v as usize].map(|i| self.label_sets[i].as_slice())
    }

    pub fn label_id(&self, v: Vertex) -> Option<usize> {
        self.labels[v as usize]
    }

    /// Deactivation vertex sets in creation order (innermost first).
    pub fn label_sets(&self) -> &[Vec<Vertex>] {
        &self.label_sets
    }

    /// Uniform dual increase on every active component of both forests.
    pub fn bump_duals(&mut self, eps: &W) {
        assert!(
            eps.total_cmp(&W::zero()) != std::cmp::Ordering::Less,
            "dual increase must be non-negative, got {eps}"
        );
        for c in 0..self.comps1.len() {
            let comp = &mut self.comps1[c];
            if !comp.live || !comp.active {
                continue;
            }
            comp.dual_inside += eps.clone();
            comp.dual_cap += eps.scale(comp.child_count);
            self.records1[c].y += eps.clone();
            for &v in &self.members1[c] {
                self.potential1[v as usize] += eps.clone();
            }
        }
        for c in 0..self.comps2.len() {
            let comp = &self.comps2[c];
            if !comp.live || !comp.active {
                continue;
            }
            self.records2[c].y += eps.clone();
            for &v in &self.members2[c] {
                self.potential2[v as usize] += eps.clone();
            }
        }
        self.elapsed += eps.clone();
    }

    /// Adds `edge` to the forest and merges components `a` and `b` into a
    /// fresh component, combining metadata as the growth rules prescribe.
    pub fn merge(&mut self, vehicle: Vehicle, a: CompId, b: CompId, edge: (Vertex, Vertex)) -> MergeOutcome {
        assert_ne!(a, b, "cannot merge a component with itself");
        assert!(self.is_live(vehicle, a) && self.is_live(vehicle, b), "stale component id in merge");
        let (eu, ev) = edge;
        let (cu, cv) = (self.comp_of(vehicle, eu), self.comp_of(vehicle, ev));
        assert!(
            (cu, cv) == (a, b) || (cu, cv) == (b, a),
            "edge endpoints must lie one in each merged component"
        );
        let edge = (eu.min(ev), eu.max(ev));
        match vehicle {
            Vehicle::First => self.merge_forest1(a, b, edge),
            Vehicle::Second => self.merge_forest2(a, b, edge),
        }
    }

    fn take_merged_members(
        members: &mut Vec<Vec<Vertex>>,
        a: CompId,
        b: CompId,
    ) -> Vec<Vertex> {
        let ma = std::mem::take(&mut members[a as usize]);
        let mb = std::mem::take(&mut members[b as usize]);
        let mut merged = Vec::with_capacity(ma.len() + mb.len());
        let (mut i, mut j) = (0, 0);
        while i < ma.len() && j < mb.len() {
            if ma[i] < mb[j] {
                merged.push(ma[i]);
                i += 1;
            } else {
                merged.push(mb[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&ma[i..]);
        merged.extend_from_slice(&mb[j..]);
        merged
    }

    fn merge_forest1(&mut self, a: CompId, b: CompId, edge: (Vertex, Vertex)) -> MergeOutcome {
        self.f1_edges.push(edge);
        let new = self.comps1.len() as CompId;

        let has_depot = self.comps1[a as usize].has_depot || self.comps1[b as usize].has_depot;
        let active_new = !has_depot;
        let mut reactivated = Vec::new();
        for side in [a, b] {
            let was_active = self.comps1[side as usize].active;
            if active_new && !was_active {
                reactivated.extend_from_slice(&self.members1[side as usize]);
            }
            self.active1 -= usize::from(was_active);
            self.comps1[side as usize].live = false;
            self.comps1[side as usize].active = false;
        }
        self.active1 += usize::from(active_new);
        self.live1 -= 1;

        let merged = Self::take_merged_members(&mut self.members1, a, b);
        for &v in &merged {
            self.comp_of1[v as usize] = new;
        }
        let dual_inside =
            self.comps1[a as usize].dual_inside.clone() + self.comps1[b as usize].dual_inside.clone();
        let dual_cap =
            self.comps1[a as usize].dual_cap.clone() + self.comps1[b as usize].dual_cap.clone();
        let child_count =
            self.comps1[a as usize].child_count + self.comps1[b as usize].child_count;

        self.records1.push(DualRecord { verts: merged.clone(), y: W::zero(), parent: None });
        self.records1[a as usize].parent = Some(new as usize);
        self.records1[b as usize].parent = Some(new as usize);
        self.members1.push(merged);
        self.comps1.push(Comp1 { live: true, active: active_new, has_depot, dual_inside, dual_cap, child_count });

        // Re-parent the children of both sides; when the union holds the
        // first depot they all go inactive with it.
        for c2 in 0..self.comps2.len() {
            let comp = &mut self.comps2[c2];
            if !comp.live || comp.has_depot {
                continue;
            }
            if comp.parent == Some(a) || comp.parent == Some(b) {
                comp.parent = Some(new);
                if has_depot && comp.active {
                    comp.active = false;
                    self.active2 -= 1;
                }
            }
        }

        MergeOutcome {
            new_comp: new,
            reactivated,
            exhaustion_candidate: (active_new && child_count == 0).then_some(new),
            parent_exhaustion_candidate: None,
        }
    }

    fn merge_forest2(&mut self, a: CompId, b: CompId, edge: (Vertex, Vertex)) -> MergeOutcome {
        self.f2_edges.push(edge);
        let new = self.comps2.len() as CompId;
        let has_depot = self.comps2[a as usize].has_depot || self.comps2[b as usize].has_depot;

        let parent_new;
        let mut parent_exhaustion_candidate = None;
        if has_depot {
            parent_new = None;
            let non_depot = if self.comps2[a as usize].has_depot { b } else { a };
            let p = self.comps2[non_depot as usize]
                .parent
                .expect("non-depot forest-2 component must have a parent");
            let pc = &mut self.comps1[p as usize];
            assert!(pc.child_count > 0, "parent lost more children than it had");
            pc.child_count -= 1;
            if pc.active && pc.child_count == 0 {
                parent_exhaustion_candidate = Some(p);
            }
        } else {
            // Both sides are growing children of one forest-1 component; the
            // cost assumptions make any other shape unreachable.
            assert!(
                self.comps2[a as usize].active && self.comps2[b as usize].active,
                "forest-2 merge of components that are not both active"
            );
            let pa = self.comps2[a as usize].parent.expect("missing parent");
            let pb = self.comps2[b as usize].parent.expect("missing parent");
            assert_eq!(pa, pb, "forest-2 merge of components with different parents");
            parent_new = Some(pa);
            let pc = &mut self.comps1[pa as usize];
            assert!(pc.child_count >= 2);
            pc.child_count -= 1;
        }

        for side in [a, b] {
            self.active2 -= usize::from(self.comps2[side as usize].active);
            self.comps2[side as usize].live = false;
            self.comps2[side as usize].active = false;
        }
        let active_new = !has_depot;
        self.active2 += usize::from(active_new);
        self.live2 -= 1;

        let merged = Self::take_merged_members(&mut self.members2, a, b);
        for &v in &merged {
            self.comp_of2[v as usize] = new;
        }
        self.records2.push(DualRecord { verts: merged.clone(), y: W::zero(), parent: None });
        self.records2[a as usize].parent = Some(new as usize);
        self.records2[b as usize].parent = Some(new as usize);
        self.members2.push(merged);
        self.comps2.push(Comp2 { live: true, active: active_new, has_depot, parent: parent_new });

        MergeOutcome {
            new_comp: new,
            reactivated: Vec::new(),
            exhaustion_candidate: None,
            parent_exhaustion_candidate,
        }
    }

    /// Deactivates a childless forest-1 component whose dual mass reached its
    /// cap, and stamps its vertices that carry no label yet.
    pub fn deactivate_with_label(&mut self, c: CompId) {
        let comp = &self.comps1[c as usize];
        assert!(comp.live && comp.active, "deactivation of a dead or inactive component");
        assert_eq!(comp.child_count, 0, "deactivation with children present");
        let slack = W::tight_slack();
        assert!(
            leq_with_slack(&comp.dual_cap, &comp.dual_inside, &slack)
                && leq_with_slack(&comp.dual_inside, &comp.dual_cap, &slack),
            "deactivation before the cap is reached: w={} bound={}",
            comp.dual_inside,
            comp.dual_cap
        );
        self.comps1[c as usize].active = false;
        self.active1 -= 1;
        let set = self.members1[c as usize].clone();
        let id = self.label_sets.len();
        for &v in &set {
            if self.labels[v as usize].is_none() {
                self.labels[v as usize] = Some(id);
            }
        }
        self.label_sets.push(set);
    }

    pub fn history(&self) -> DualHistory<W> {
        DualHistory {
            n_targets: self.n,
            forest1: self.records1.clone(),
            forest2: self.records2.clone(),
        }
    }

    pub fn records(&self, vehicle: Vehicle) -> &[DualRecord<W>] {
        match vehicle {
            Vehicle::First => &self.records1,
            Vehicle::Second => &self.records2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Vehicle::{First, Second};

    type State = GrowthState<f64>;

    #[test]
    fn init_builds_singletons_with_depots_inactive() {
        let s = State::init(1);
        assert_eq!(s.arena_len(First), 2);
        assert_eq!(s.arena_len(Second), 2);
        assert!(!s.is_active(First, 0), "depot component starts inactive");
        assert!(s.is_active(First, 1));
        assert!(!s.is_active(Second, 0));
        assert!(s.is_active(Second, 1));
        assert_eq!(s.child_count(1), 1);
        assert_eq!(s.parent(1), Some(1));
        assert_eq!(s.parent(0), None);
        assert_eq!(s.child_count(0), 0);
    }

    #[test]
    fn init_component_counts() {
        let s = State::init(3);
        assert_eq!(s.arena_len(First) + s.arena_len(Second), 8);
        assert_eq!(s.active_count(First) + s.active_count(Second), 6);
    }

    #[test]
    fn init_empty_instance_has_no_active_components() {
        let s = State::init(0);
        assert_eq!(s.active_count(First), 0);
        assert_eq!(s.active_count(Second), 0);
    }

    #[test]
    fn bump_increases_everything_uniformly() {
        let mut s = State::init(3);
        s.bump_duals(&2.0);
        for v in 1..=3 {
            assert_eq!(*s.potential(First, v), 2.0);
            assert_eq!(*s.potential(Second, v), 2.0);
            assert_eq!(*s.dual_inside(v), 2.0);
            assert_eq!(*s.dual_cap(v), 2.0, "each singleton has exactly one child");
        }
        assert_eq!(*s.potential(First, 0), 0.0, "depot potential never grows");
        assert_eq!(s.elapsed, 2.0);
    }

    #[test]
    fn bump_skips_cap_for_childless_components() {
        let mut s = State::init(1);
        // Remove the only child by connecting it to the second depot.
        s.merge(Second, 1, 0, (1, 0));
        let (w0, b0) = (*s.dual_inside(1), *s.dual_cap(1));
        s.bump_duals(&1.0);
        assert_eq!(*s.dual_inside(1), w0 + 1.0);
        assert_eq!(*s.dual_cap(1), b0, "no children, cap unchanged");
    }

    #[test]
    fn bump_zero_is_identity() {
        let mut s = State::init(2);
        s.bump_duals(&1.5);
        let before = (*s.dual_inside(1), *s.potential(First, 2), s.elapsed);
        s.bump_duals(&0.0);
        assert_eq!(before, (*s.dual_inside(1), *s.potential(First, 2), s.elapsed));
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn bump_rejects_negative_epsilon() {
        State::init(1).bump_duals(&-0.5);
    }

    #[test]
    fn merge_with_first_depot_deactivates_children() {
        let mut s = State::init(1);
        let out = s.merge(First, 0, 1, (0, 1));
        assert!(!s.is_active(First, out.new_comp));
        assert!(s.has_depot(First, out.new_comp));
        assert!(!s.is_active(Second, 1), "child of a depot component goes inactive");
        assert_eq!(s.active_count(First), 0);
        assert_eq!(s.members(First, out.new_comp), &[0, 1]);
        assert!(out.reactivated.is_empty());
    }

    #[test]
    fn merge_with_second_depot_detaches_the_child() {
        let mut s = State::init(6);
        let out = s.merge(Second, 6, 0, (6, 0));
        assert!(!s.is_active(Second, out.new_comp));
        assert_eq!(s.parent(out.new_comp), None);
        assert_eq!(s.child_count(6), 0, "parent of t6 lost its only child");
        assert_eq!(out.parent_exhaustion_candidate, Some(6));
    }

    #[test]
    fn merge_two_children_of_one_parent_inherits_it() {
        let mut s = State::init(3);
        let p = s.merge(First, 2, 3, (2, 3)).new_comp;
        let out = s.merge(Second, 2, 3, (2, 3));
        assert!(s.is_active(Second, out.new_comp));
        assert_eq!(s.parent(out.new_comp), Some(p));
        assert_eq!(s.child_count(p), 1, "two children replaced by one");
    }

    #[test]
    #[should_panic(expected = "different parents")]
    fn forest2_merge_requires_shared_parent() {
        let mut s = State::init(2);
        s.merge(Second, 1, 2, (1, 2));
    }

    #[test]
    #[should_panic(expected = "merge a component with itself")]
    fn self_merge_is_rejected() {
        let mut s = State::init(2);
        s.merge(First, 1, 1, (1, 1));
    }

    #[test]
    #[should_panic(expected = "stale component id")]
    fn stale_ids_are_rejected() {
        let mut s = State::init(2);
        s.merge(First, 1, 2, (1, 2));
        s.merge(First, 1, 2, (1, 2));
    }

    #[test]
    fn deactivate_labels_only_unlabeled_vertices() {
        let mut s = State::init(2);
        s.bump_duals(&1.0);
        // t1 loses its child to the second depot, then exhausts its cap.
        s.merge(Second, 1, 0, (1, 0));
        s.deactivate_with_label(1);
        assert_eq!(s.label_of(1), Some(&[1][..]));

        // Reactivate t1 by merging it with the active t2 component.
        let c = s.merge(First, 1, 2, (1, 2)).new_comp;
        assert!(s.is_active(First, c), "merging with an active component reactivates");
        // {t2} in forest 2 joins the depot component; {t1,t2} is now childless
        // with w = cap = 2 and deactivates at once.
        s.merge(Second, s.comp_of(Second, 2), s.comp_of(Second, 1), (2, 0));
        assert_eq!(s.child_count(c), 0);
        s.deactivate_with_label(c);
        assert_eq!(s.label_of(1), Some(&[1][..]), "labels never change once set");
        assert_eq!(s.label_of(2), Some(&[1, 2][..]));
    }

    #[test]
    #[should_panic(expected = "children present")]
    fn deactivate_with_children_is_rejected() {
        let mut s = State::init(1);
        s.deactivate_with_label(1);
    }

    #[test]
    #[should_panic(expected = "before the cap")]
    fn deactivate_below_cap_is_rejected() {
        // {t1,t2} has two children, so its cap grows twice as fast as w.
        let mut s = State::init(2);
        let c = s.merge(First, 1, 2, (1, 2)).new_comp;
        s.bump_duals(&1.0);
        // Detach both children; w=1 < cap=2.
        s.merge(Second, 1, 0, (1, 0));
        s.merge(Second, s.comp_of(Second, 2), s.comp_of(Second, 0), (2, 0));
        assert_eq!(s.child_count(c), 0);
        s.deactivate_with_label(c);
    }

    #[test]
    fn merge_reactivation_reports_the_absorbed_vertices() {
        let mut s = State::init(2);
        s.bump_duals(&1.0);
        s.merge(Second, 1, 0, (1, 0));
        s.deactivate_with_label(1);
        let out = s.merge(First, 1, 2, (1, 2));
        assert_eq!(out.reactivated, vec![1]);
        assert!(s.is_active(First, out.new_comp));
    }

    #[test]
    fn history_records_follow_merges() {
        let mut s = State::init(2);
        s.bump_duals(&0.5);
        let c = s.merge(First, 1, 2, (1, 2)).new_comp;
        s.bump_duals(&0.25);
        let h = s.history();
        assert_eq!(h.forest1[1].y, 0.5);
        assert_eq!(h.forest1[1].parent, Some(c as usize));
        assert_eq!(h.forest1[c as usize].verts, vec![1, 2]);
        assert_eq!(h.forest1[c as usize].y, 0.25);
        assert_eq!(h.forest2[1].y, 0.75, "forest-2 singleton kept growing");
    }
}
