//! The main primal-dual loop.
//!
//! Every iteration raises the dual variables of all active components of
//! both forests by the same amount until one constraint goes tight, then
//! applies exactly one step:
//!
//! * a forest-1 edge constraint is tight -> merge the two forest-1 components,
//! * a forest-2 edge constraint is tight -> merge the two forest-2 components,
//! * the dual mass of a childless active forest-1 component reaches its cap
//!   -> deactivate the component and mark its vertices.
//!
//! On ties the cases are prioritized in that order. The loop ends when no
//! forest-1 component is active, after at most `3n + 2` iterations.
//!
//! Candidates are scheduled on event heaps keyed by the absolute growth time
//! at which a constraint goes tight. Entries go stale when components merge
//! or change activity; they are re-validated against the live state when
//! popped, which keeps the whole run near `O(n^2 log n)`. A straightforward
//! full-scan of the candidate minima is kept alongside ([`scan_edge_candidate`],
//! [`scan_exhaustion_candidate`]) and cross-checked against the heaps in
//! paranoid mode.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::components::{CompId, DualHistory, GrowthState, Vertex};
use crate::instance::{Costs, Vehicle};
use crate::weight::{leq_with_slack, Weight};

/// Which step an iteration applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepCase {
    #[serde(rename = "E1")]
    MergeForest1,
    #[serde(rename = "E2")]
    MergeForest2,
    #[serde(rename = "E3")]
    Deactivate,
}

/// One line of the event trace. `eps` holds the three candidate increases
/// (`null` when a case has no candidate).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationEvent {
    pub iter: usize,
    pub eps: [Option<f64>; 3],
    pub case: StepCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<[Vertex; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forest: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deactivated: Option<Vec<Vertex>>,
    #[serde(skip)]
    pub eps_min: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Cross-check the heap scheduler against full scans and re-derive all
    /// accounting from the dual records every iteration. Meant for tests.
    pub paranoid: bool,
}

pub struct RunOutput<W: Weight> {
    pub state: GrowthState<W>,
    pub history: DualHistory<W>,
    pub events: Vec<IterationEvent>,
}

impl<W: Weight> RunOutput<W> {
    pub fn iterations(&self) -> usize {
        self.events.len()
    }
}

struct EdgeEvent<W> {
    time: W,
    u: Vertex,
    v: Vertex,
}

struct ExhaustEvent<W> {
    time: W,
    comp: CompId,
}

macro_rules! impl_event_ord {
    ($ty:ident, $($field:ident),+) => {
        impl<W: Weight> PartialEq for $ty<W> {
            fn eq(&self, other: &Self) -> bool {
                self.cmp(other) == Ordering::Equal
            }
        }
        impl<W: Weight> Eq for $ty<W> {}
        impl<W: Weight> PartialOrd for $ty<W> {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl<W: Weight> Ord for $ty<W> {
            fn cmp(&self, other: &Self) -> Ordering {
                self.time
                    .total_cmp(&other.time)
                    $(.then(self.$field.cmp(&other.$field)))+
            }
        }
    };
}

impl_event_ord!(EdgeEvent, u, v);
impl_event_ord!(ExhaustEvent, comp);

type EdgeHeap<W> = BinaryHeap<std::cmp::Reverse<EdgeEvent<W>>>;
type ExhaustHeap<W> = BinaryHeap<std::cmp::Reverse<ExhaustEvent<W>>>;

fn initial_edge_events<W: Weight>(costs: &Costs<W>, vehicle: Vehicle) -> EdgeHeap<W> {
    let n = costs.n_targets() as Vertex;
    let mut entries = Vec::new();
    for u in 0..=n {
        for v in (u + 1)..=n {
            // Depot components start inactive, so depot edges tighten at rate 1.
            let rate = if u == 0 { 1 } else { 2 };
            let time = costs.cost(vehicle, u, v).clone().div_count(rate);
            entries.push(std::cmp::Reverse(EdgeEvent { time, u, v }));
        }
    }
    BinaryHeap::from(entries)
}

/// Pops until the heap's front is a currently-valid candidate, re-pushing
/// stale entries at their corrected times. The returned event is removed
/// from the heap; unused candidates must be pushed back by the caller.
fn next_edge_event<W: Weight>(
    state: &GrowthState<W>,
    costs: &Costs<W>,
    vehicle: Vehicle,
    heap: &mut EdgeHeap<W>,
) -> Option<EdgeEvent<W>> {
    let slack = W::tight_slack();
    while let Some(std::cmp::Reverse(ev)) = heap.pop() {
        let cu = state.comp_of(vehicle, ev.u);
        let cv = state.comp_of(vehicle, ev.v);
        if cu == cv {
            continue;
        }
        let rate = u32::from(state.is_active(vehicle, cu)) + u32::from(state.is_active(vehicle, cv));
        if rate == 0 {
            // Stays irrelevant until one side is reabsorbed into an active
            // component, which re-seeds events for all its incident edges.
            continue;
        }
        let reduced = costs.cost(vehicle, ev.u, ev.v).clone()
            - state.potential(vehicle, ev.u).clone()
            - state.potential(vehicle, ev.v).clone();
        assert!(
            leq_with_slack(&W::zero(), &reduced, &W::cert_slack()),
            "edge ({},{}) of forest {} has negative reduced cost {reduced}",
            ev.u,
            ev.v,
            vehicle
        );
        let true_time = state.elapsed.clone() + reduced.div_count(rate);
        if !leq_with_slack(&true_time, &ev.time, &slack) {
            heap.push(std::cmp::Reverse(EdgeEvent { time: true_time, u: ev.u, v: ev.v }));
            continue;
        }
        return Some(EdgeEvent { time: true_time, u: ev.u, v: ev.v });
    }
    None
}

fn next_exhaustion_event<W: Weight>(
    state: &GrowthState<W>,
    heap: &mut ExhaustHeap<W>,
) -> Option<ExhaustEvent<W>> {
    let slack = W::tight_slack();
    while let Some(std::cmp::Reverse(ev)) = heap.pop() {
        let c = ev.comp;
        if !state.is_live(Vehicle::First, c)
            || !state.is_active(Vehicle::First, c)
            || state.child_count(c) != 0
        {
            continue;
        }
        let gap = state.dual_cap(c).clone() - state.dual_inside(c).clone();
        assert!(
            leq_with_slack(&W::zero(), &gap, &W::cert_slack()),
            "component exceeded its dual cap by {gap}"
        );
        let true_time = state.elapsed.clone() + gap;
        if !leq_with_slack(&true_time, &ev.time, &slack) {
            heap.push(std::cmp::Reverse(ExhaustEvent { time: true_time, comp: c }));
            continue;
        }
        return Some(ExhaustEvent { time: true_time, comp: c });
    }
    None
}

/// Reference implementation of the forest-`vehicle` edge candidate: the
/// smallest uniform dual increase that makes some cross-component edge
/// constraint tight. Ties break to the lexicographically smallest edge.
pub fn scan_edge_candidate<W: Weight>(
    state: &GrowthState<W>,
    costs: &Costs<W>,
    vehicle: Vehicle,
) -> Option<(W, (Vertex, Vertex))> {
    let n = state.n_targets() as Vertex;
    let mut best: Option<(W, (Vertex, Vertex))> = None;
    for u in 0..=n {
        for v in (u + 1)..=n {
            let cu = state.comp_of(vehicle, u);
            let cv = state.comp_of(vehicle, v);
            if cu == cv {
                continue;
            }
            let rate =
                u32::from(state.is_active(vehicle, cu)) + u32::from(state.is_active(vehicle, cv));
            if rate == 0 {
                continue;
            }
            let reduced = costs.cost(vehicle, u, v).clone()
                - state.potential(vehicle, u).clone()
                - state.potential(vehicle, v).clone();
            let value = reduced.div_count(rate);
            if best.as_ref().map_or(true, |(b, _)| value.total_cmp(b) == Ordering::Less) {
                best = Some((value, (u, v)));
            }
        }
    }
    best
}

/// Reference implementation of the deactivation candidate: the active,
/// childless forest-1 component closest to its dual cap.
pub fn scan_exhaustion_candidate<W: Weight>(state: &GrowthState<W>) -> Option<(W, CompId)> {
    let mut best: Option<(W, CompId)> = None;
    for c in 0..state.arena_len(Vehicle::First) as CompId {
        if !state.is_live(Vehicle::First, c)
            || !state.is_active(Vehicle::First, c)
            || state.child_count(c) != 0
        {
            continue;
        }
        let gap = state.dual_cap(c).clone() - state.dual_inside(c).clone();
        if best.as_ref().map_or(true, |(b, _)| gap.total_cmp(b) == Ordering::Less) {
            best = Some((gap, c));
        }
    }
    best
}

fn measure<W: Weight>(state: &GrowthState<W>) -> usize {
    state.live_count(Vehicle::First)
        + state.active_count(Vehicle::First)
        + state.live_count(Vehicle::Second)
}

/// Runs the growth loop to completion on a validated instance's costs.
///
/// Panics on any internal invariant violation; that signals an
/// implementation bug, never a bad instance.
pub fn run<W: Weight>(costs: &Costs<W>, options: &RunOptions) -> RunOutput<W> {
    let n = costs.n_targets();
    let mut state = GrowthState::<W>::init(n);
    let mut heap1 = initial_edge_events(costs, Vehicle::First);
    let mut heap2 = initial_edge_events(costs, Vehicle::Second);
    let mut heap3: ExhaustHeap<W> = BinaryHeap::new();
    let mut events: Vec<IterationEvent> = Vec::new();
    let budget = 3 * n + 2;

    check_state_invariants(&state);

    while state.active_count(Vehicle::First) > 0 {
        let iter = events.len() + 1;
        assert!(iter <= budget, "more than {budget} iterations for {n} targets");
        let measure_before = measure(&state);

        let e1 = next_edge_event(&state, costs, Vehicle::First, &mut heap1);
        let e2 = next_edge_event(&state, costs, Vehicle::Second, &mut heap2);
        let e3 = next_exhaustion_event(&state, &mut heap3);

        if options.paranoid {
            cross_check_candidates(&state, costs, &e1, &e2, &e3);
        }

        let t1: Option<W> = e1.as_ref().map(|e| e.time.clone());
        let t2: Option<W> = e2.as_ref().map(|e| e.time.clone());
        let t3: Option<W> = e3.as_ref().map(|e| e.time.clone());
        let t_min = [&t1, &t2, &t3]
            .into_iter()
            .flatten()
            .min_by(|a, b| a.total_cmp(b))
            .expect("active components but no candidate event")
            .clone();

        let eps = |t: &Option<W>| -> Option<W> {
            t.as_ref().map(|t| {
                let d = t.clone() - state.elapsed.clone();
                if d.total_cmp(&W::zero()) == Ordering::Less {
                    W::zero()
                } else {
                    d
                }
            })
        };
        let (eps1, eps2, eps3) = (eps(&t1), eps(&t2), eps(&t3));
        let eps_min = eps(&Some(t_min)).unwrap();

        // Priority on (near-)ties: forest-1 merge, forest-2 merge,
        // deactivation. The slack keeps float rounding from reordering
        // mathematically tied cases, which the child/parent links rely on.
        let slack = W::tight_slack();
        let le = |a: &Option<W>, b: Option<&W>| -> bool {
            match (a, b) {
                (None, _) => false,
                (Some(_), None) => true,
                (Some(a), Some(b)) => leq_with_slack(a, b, &slack),
            }
        };
        let min_t23 = match (&t2, &t3) {
            (Some(a), Some(b)) => Some(if a.total_cmp(b) == Ordering::Greater { b } else { a }),
            (a, b) => a.as_ref().or(b.as_ref()),
        };

        state.bump_duals(&eps_min);

        let event = if le(&t1, min_t23) {
            let ev = e1.unwrap();
            if let Some(e) = e2 {
                heap2.push(std::cmp::Reverse(e));
            }
            if let Some(e) = e3 {
                heap3.push(std::cmp::Reverse(e));
            }
            apply_merge(&mut state, costs, Vehicle::First, ev.u, ev.v, &mut heap1, &mut heap3);
            IterationEvent {
                iter,
                eps: [to_opt_f64(&eps1), to_opt_f64(&eps2), to_opt_f64(&eps3)],
                case: StepCase::MergeForest1,
                edge: Some([ev.u, ev.v]),
                forest: Some(1),
                deactivated: None,
                eps_min: eps_min.to_f64(),
            }
        } else if le(&t2, t3.as_ref()) {
            let ev = e2.unwrap();
            if let Some(e) = e1 {
                heap1.push(std::cmp::Reverse(e));
            }
            if let Some(e) = e3 {
                heap3.push(std::cmp::Reverse(e));
            }
            apply_merge(&mut state, costs, Vehicle::Second, ev.u, ev.v, &mut heap1, &mut heap3);
            IterationEvent {
                iter,
                eps: [to_opt_f64(&eps1), to_opt_f64(&eps2), to_opt_f64(&eps3)],
                case: StepCase::MergeForest2,
                edge: Some([ev.u, ev.v]),
                forest: Some(2),
                deactivated: None,
                eps_min: eps_min.to_f64(),
            }
        } else {
            let ev = e3.expect("tie-break fell through to an absent deactivation candidate");
            if let Some(e) = e1 {
                heap1.push(std::cmp::Reverse(e));
            }
            if let Some(e) = e2 {
                heap2.push(std::cmp::Reverse(e));
            }
            let set = state.members(Vehicle::First, ev.comp).to_vec();
            state.deactivate_with_label(ev.comp);
            IterationEvent {
                iter,
                eps: [to_opt_f64(&eps1), to_opt_f64(&eps2), to_opt_f64(&eps3)],
                case: StepCase::Deactivate,
                edge: None,
                forest: None,
                deactivated: Some(set),
                eps_min: eps_min.to_f64(),
            }
        };

        assert!(measure(&state) < measure_before, "termination measure failed to decrease");
        check_state_invariants(&state);
        if options.paranoid {
            paranoid_state_checks(&state, costs);
        }
        events.push(event);
    }

    assert_eq!(
        state.active_count(Vehicle::Second),
        0,
        "active forest-2 component left after termination"
    );
    for u in 1..=n as Vertex {
        let c1 = state.comp_of(Vehicle::First, u);
        let c2 = state.comp_of(Vehicle::Second, u);
        assert!(
            state.has_depot(Vehicle::First, c1) || state.has_depot(Vehicle::Second, c2),
            "target {u} ended connected to neither depot"
        );
    }

    RunOutput { history: state.history(), state, events }
}

fn to_opt_f64<W: Weight>(e: &Option<W>) -> Option<f64> {
    e.as_ref().map(|w| w.to_f64())
}

fn apply_merge<W: Weight>(
    state: &mut GrowthState<W>,
    costs: &Costs<W>,
    vehicle: Vehicle,
    u: Vertex,
    v: Vertex,
    heap1: &mut EdgeHeap<W>,
    heap3: &mut ExhaustHeap<W>,
) {
    // The winning constraint is tight after the bump.
    let reduced = costs.cost(vehicle, u, v).clone()
        - state.potential(vehicle, u).clone()
        - state.potential(vehicle, v).clone();
    let slack = W::cert_slack();
    assert!(
        leq_with_slack(&reduced, &W::zero(), &slack) && leq_with_slack(&W::zero(), &reduced, &slack),
        "selected edge ({u},{v}) not tight after dual increase: residual {reduced}"
    );

    let a = state.comp_of(vehicle, u);
    let b = state.comp_of(vehicle, v);
    let out = state.merge(vehicle, a, b, (u, v));

    // Edges incident to reactivated vertices tighten faster from now on;
    // re-seed their events so the heap never misses an earlier time.
    let n = state.n_targets() as Vertex;
    for &x in &out.reactivated {
        for w in 0..=n {
            let cw = state.comp_of(Vehicle::First, w);
            if cw == out.new_comp {
                continue;
            }
            let rate = 1 + u32::from(state.is_active(Vehicle::First, cw));
            let reduced = costs.cost(Vehicle::First, x, w).clone()
                - state.potential(Vehicle::First, x).clone()
                - state.potential(Vehicle::First, w).clone();
            let time = state.elapsed.clone() + reduced.div_count(rate);
            heap1.push(std::cmp::Reverse(EdgeEvent { time, u: x.min(w), v: x.max(w) }));
        }
    }
    for c in [out.exhaustion_candidate, out.parent_exhaustion_candidate].into_iter().flatten() {
        let gap = state.dual_cap(c).clone() - state.dual_inside(c).clone();
        let gap = if gap.total_cmp(&W::zero()) == Ordering::Less { W::zero() } else { gap };
        let time = state.elapsed.clone() + gap;
        heap3.push(std::cmp::Reverse(ExhaustEvent { time, comp: c }));
    }
}

/// Invariants checked at every iteration boundary (linear time):
/// each target's forest-2 component lies inside its forest-1 component with
/// consistent parent/child links, activity never increases downwards,
/// potentials dominate, and dual mass never exceeds its cap.
pub fn check_state_invariants<W: Weight>(state: &GrowthState<W>) {
    let n = state.n_targets() as Vertex;
    let slack = W::tight_slack();
    let mut group_c1: Vec<Option<CompId>> = vec![None; state.arena_len(Vehicle::Second)];
    let mut children_seen: Vec<usize> = vec![0; state.arena_len(Vehicle::First)];
    for u in 1..=n {
        let c1 = state.comp_of(Vehicle::First, u);
        let c2 = state.comp_of(Vehicle::Second, u);
        assert!(
            state.is_active(Vehicle::First, c1) || !state.is_active(Vehicle::Second, c2),
            "target {u}: forest-2 component active while forest-1 component is not"
        );
        assert!(
            leq_with_slack(state.potential(Vehicle::Second, u), state.potential(Vehicle::First, u), &slack),
            "target {u}: forest-2 potential exceeds forest-1 potential"
        );
        if state.has_depot(Vehicle::Second, c2) {
            assert_eq!(state.parent(c2), None, "depot-side component with a parent");
            continue;
        }
        match group_c1[c2 as usize] {
            None => {
                group_c1[c2 as usize] = Some(c1);
                assert_eq!(
                    state.parent(c2),
                    Some(c1),
                    "target {u}: parent link disagrees with the enclosing component"
                );
                children_seen[c1 as usize] += 1;
            }
            Some(g) => assert_eq!(
                g, c1,
                "target {u}: forest-2 component spans two forest-1 components"
            ),
        }
    }
    for c in 0..state.arena_len(Vehicle::First) as CompId {
        if !state.is_live(Vehicle::First, c) {
            continue;
        }
        assert_eq!(
            state.child_count(c),
            children_seen[c as usize],
            "component {c}: child count out of sync"
        );
        assert!(
            leq_with_slack(state.dual_inside(c), state.dual_cap(c), &slack),
            "component {c}: dual mass {} exceeds cap {}",
            state.dual_inside(c),
            state.dual_cap(c)
        );
    }
}

fn cross_check_candidates<W: Weight>(
    state: &GrowthState<W>,
    costs: &Costs<W>,
    e1: &Option<EdgeEvent<W>>,
    e2: &Option<EdgeEvent<W>>,
    e3: &Option<ExhaustEvent<W>>,
) {
    let close = |a: &W, b: &W| {
        let slack = W::tight_slack();
        leq_with_slack(a, b, &slack) && leq_with_slack(b, a, &slack)
    };
    for (vehicle, ev) in [(Vehicle::First, e1), (Vehicle::Second, e2)] {
        let scan = scan_edge_candidate(state, costs, vehicle);
        match (ev, scan) {
            (None, None) => {}
            (Some(ev), Some((value, _))) => {
                let heap_value = ev.time.clone() - state.elapsed.clone();
                assert!(
                    close(&heap_value, &value),
                    "forest {vehicle}: heap candidate {heap_value} != scan candidate {value}"
                );
            }
            (ev, scan) => panic!(
                "forest {vehicle}: heap and scan disagree on candidate existence \
                 (heap: {:?}, scan: {:?})",
                ev.as_ref().map(|e| (e.u, e.v)),
                scan.map(|(_, e)| e)
            ),
        }
    }
    let scan3 = scan_exhaustion_candidate(state);
    match (e3, scan3) {
        (None, None) => {}
        (Some(ev), Some((gap, _))) => {
            let heap_gap = ev.time.clone() - state.elapsed.clone();
            assert!(close(&heap_gap, &gap), "deactivation: heap {heap_gap} != scan {gap}");
        }
        (ev, scan) => panic!(
            "deactivation: heap and scan disagree (heap: {:?}, scan: {:?})",
            ev.as_ref().map(|e| e.comp),
            scan.map(|(_, c)| c)
        ),
    }
}

/// Re-derives all derived quantities from the dual records and compares them
/// against the incremental bookkeeping. Quadratic-ish; used on small fuzzed
/// instances.
fn paranoid_state_checks<W: Weight>(state: &GrowthState<W>, costs: &Costs<W>) {
    let slack = W::tight_slack();
    let close = |a: &W, b: &W| leq_with_slack(a, b, &slack) && leq_with_slack(b, a, &slack);
    let n = state.n_targets() as Vertex;

    // Laminarity of each record family.
    for vehicle in [Vehicle::First, Vehicle::Second] {
        let records = state.records(vehicle);
        for (i, a) in records.iter().enumerate() {
            for b in records.iter().skip(i + 1) {
                let inter = intersection_size(&a.verts, &b.verts);
                assert!(
                    inter == 0 || inter == a.verts.len() || inter == b.verts.len(),
                    "records of forest {vehicle} are not laminar"
                );
            }
        }
    }

    // w(C) equals the dual mass of the records inside C; Bound(C) equals the
    // forest-2 dual mass of the records inside C.
    let arena1 = state.arena_len(Vehicle::First);
    let mut inside: Vec<W> = Vec::new();
    for r in state.records(Vehicle::First) {
        inside.push(r.y.clone());
    }
    for r in 0..inside.len() {
        if let Some(p) = state.records(Vehicle::First)[r].parent {
            let add = inside[r].clone();
            inside[p] += add;
        }
    }
    let mut cap_acc: Vec<W> = vec![W::zero(); arena1];
    for rec in state.records(Vehicle::Second) {
        if rec.verts.contains(&0) {
            assert!(rec.y.is_zero(), "depot-side forest-2 record accumulated dual mass");
            continue;
        }
        let c1 = state.comp_of(Vehicle::First, rec.verts[0]);
        for &v in &rec.verts {
            assert_eq!(state.comp_of(Vehicle::First, v), c1);
        }
        cap_acc[c1 as usize] += rec.y.clone();
    }
    for c in 0..arena1 as CompId {
        if !state.is_live(Vehicle::First, c) {
            continue;
        }
        assert!(
            close(&inside[c as usize], state.dual_inside(c)),
            "component {c}: recorded dual mass {} != tracked {}",
            inside[c as usize],
            state.dual_inside(c)
        );
        assert!(
            close(&cap_acc[c as usize], state.dual_cap(c)),
            "component {c}: recorded cap {} != tracked {}",
            cap_acc[c as usize],
            state.dual_cap(c)
        );
    }

    // Potentials equal the dual mass of all records containing the vertex.
    for vehicle in [Vehicle::First, Vehicle::Second] {
        let records = state.records(vehicle);
        for v in 0..=n {
            let mut total = W::zero();
            let mut r = v as usize;
            loop {
                total += records[r].y.clone();
                match records[r].parent {
                    Some(p) => r = p,
                    None => break,
                }
            }
            assert!(
                close(&total, state.potential(vehicle, v)),
                "vertex {v}: potential of forest {vehicle} out of sync"
            );
        }
    }

    // With dominated costs and dominated potentials, a target-target edge
    // can never tighten later in forest 1 than in forest 2.
    for u in 1..=n {
        for v in (u + 1)..=n {
            let c1u = state.comp_of(Vehicle::First, u);
            let c1v = state.comp_of(Vehicle::First, v);
            let c2u = state.comp_of(Vehicle::Second, u);
            let c2v = state.comp_of(Vehicle::Second, v);
            if c1u == c1v || c2u == c2v {
                continue;
            }
            let rate1 = u32::from(state.is_active(Vehicle::First, c1u))
                + u32::from(state.is_active(Vehicle::First, c1v));
            let rate2 = u32::from(state.is_active(Vehicle::Second, c2u))
                + u32::from(state.is_active(Vehicle::Second, c2v));
            if rate1 == 0 || rate2 == 0 {
                continue;
            }
            let cand1 = (costs.cost(Vehicle::First, u, v).clone()
                - state.potential(Vehicle::First, u).clone()
                - state.potential(Vehicle::First, v).clone())
            .div_count(rate1);
            let cand2 = (costs.cost(Vehicle::Second, u, v).clone()
                - state.potential(Vehicle::Second, u).clone()
                - state.potential(Vehicle::Second, v).clone())
            .div_count(rate2);
            assert!(
                leq_with_slack(&cand1, &cand2, &slack),
                "edge ({u},{v}): forest-2 candidate {cand2} below forest-1 candidate {cand1}"
            );
        }
    }
}

fn intersection_size(a: &[Vertex], b: &[Vertex]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Instance};

    fn costs_for(c1: Vec<Vec<f64>>, c2: Vec<Vec<f64>>) -> Costs<f64> {
        Costs::from_instance(&Instance::new(c1, c2, None).unwrap())
    }

    fn one_target(a: f64, b: f64) -> Costs<f64> {
        costs_for(vec![vec![0.0, a], vec![a, 0.0]], vec![vec![0.0, b], vec![b, 0.0]])
    }

    #[test]
    fn empty_instance_runs_zero_iterations() {
        let costs = Costs::from_instance(&generate(0, 1.0, 3, 10.0).unwrap());
        let out = run(&costs, &RunOptions::default());
        assert_eq!(out.iterations(), 0);
        assert!(out.state.f1_edges.is_empty() && out.state.f2_edges.is_empty());
    }

    #[test]
    fn zero_cost_edges_are_taken_at_zero_epsilon() {
        let out = run(&one_target(0.0, 0.0), &RunOptions { paranoid: true });
        assert_eq!(out.events[0].case, StepCase::MergeForest1, "ties prefer the first forest");
        assert_eq!(out.events[0].eps_min, 0.0);
    }

    #[test]
    fn hand_trace_second_vehicle_wins() {
        let out = run(&one_target(3.0, 1.0), &RunOptions { paranoid: true });
        let ev: Vec<_> = out.events.iter().map(|e| (e.case, e.eps)).collect();
        assert_eq!(
            ev,
            vec![
                (StepCase::MergeForest2, [Some(3.0), Some(1.0), None]),
                (StepCase::Deactivate, [Some(2.0), None, Some(0.0)]),
            ]
        );
        assert_eq!(out.events[0].edge, Some([0, 1]));
        assert_eq!(out.events[1].deactivated, Some(vec![1]));
        assert!(out.state.f1_edges.is_empty());
        assert_eq!(out.state.f2_edges, vec![(0, 1)]);
    }

    #[test]
    fn hand_trace_first_vehicle_wins() {
        let out = run(&one_target(1.0, 5.0), &RunOptions { paranoid: true });
        let ev: Vec<_> = out.events.iter().map(|e| (e.case, e.eps)).collect();
        assert_eq!(ev, vec![(StepCase::MergeForest1, [Some(1.0), Some(5.0), None])]);
        assert_eq!(out.state.f1_edges, vec![(0, 1)]);
        assert!(out.state.f2_edges.is_empty());
    }

    #[test]
    fn scan_candidates_on_fresh_state() {
        // Two active singletons at cost 4 across: candidate 4/(1+1) = 2.
        let costs = costs_for(
            vec![
                vec![0.0, 5.0, 5.0],
                vec![5.0, 0.0, 4.0],
                vec![5.0, 4.0, 0.0],
            ],
            vec![
                vec![0.0, 9.0, 9.0],
                vec![9.0, 0.0, 4.0],
                vec![9.0, 4.0, 0.0],
            ],
        );
        let state = GrowthState::<f64>::init(2);
        let (v1, e1) = scan_edge_candidate(&state, &costs, Vehicle::First).unwrap();
        assert_eq!((v1, e1), (2.0, (1, 2)));
        // Fresh states have no childless active component.
        assert!(scan_exhaustion_candidate(&state).is_none());
    }

    #[test]
    fn scan_depot_edge_uses_rate_one() {
        let costs = one_target(5.0, 9.0);
        let state = GrowthState::<f64>::init(1);
        let (v, e) = scan_edge_candidate(&state, &costs, Vehicle::First).unwrap();
        assert_eq!((v, e), (5.0, (0, 1)));
    }

    #[test]
    fn scan_skips_intra_component_edges() {
        let costs = one_target(3.0, 1.0);
        let out = run(&costs, &RunOptions::default());
        // After the run, forest 2 is a single component: no candidates left.
        assert!(scan_edge_candidate(&out.state, &costs, Vehicle::Second).is_none());
    }

    #[test]
    fn exhaustion_candidate_value_is_cap_minus_mass() {
        // Drive a four-target cluster to a known cap gap by hand.
        let mut state = GrowthState::<f64>::init(8);
        state.bump_duals(&0.5);
        for (a, b) in [(5u32, 6u32), (7, 8)] {
            state.merge(Vehicle::First, a, b, (a, b));
            state.merge(
                Vehicle::Second,
                state.comp_of(Vehicle::Second, a),
                state.comp_of(Vehicle::Second, b),
                (a, b),
            );
        }
        let c56 = state.comp_of(Vehicle::First, 5);
        let c78 = state.comp_of(Vehicle::First, 7);
        let cluster = state.merge(Vehicle::First, c56, c78, (6, 7)).new_comp;
        state.bump_duals(&0.5);
        state.merge(
            Vehicle::Second,
            state.comp_of(Vehicle::Second, 5),
            state.comp_of(Vehicle::Second, 7),
            (6, 7),
        );
        state.merge(
            Vehicle::Second,
            state.comp_of(Vehicle::Second, 5),
            state.comp_of(Vehicle::Second, 0),
            (5, 0),
        );
        assert_eq!(state.child_count(cluster), 0);
        assert_eq!(*state.dual_inside(cluster), 2.5);
        assert_eq!(*state.dual_cap(cluster), 3.0);
        let (gap, comp) = scan_exhaustion_candidate(&state).unwrap();
        assert_eq!((gap, comp), (0.5, cluster));
    }

    #[test]
    fn traces_are_deterministic() {
        let inst = generate(12, 1.3, 99, 100.0).unwrap();
        let costs = Costs::from_instance(&inst);
        let a = run(&costs, &RunOptions::default());
        let b = run(&costs, &RunOptions::default());
        assert_eq!(a.events, b.events);
    }

    #[test]
    fn random_instances_respect_iteration_budget() {
        for seed in 0..20 {
            let n = 1 + (seed as usize * 7) % 25;
            let inst = generate(n, 1.0 + (seed as f64) * 0.1, seed, 100.0).unwrap();
            let costs = Costs::from_instance(&inst);
            let out = run(&costs, &RunOptions { paranoid: true });
            assert!(out.iterations() <= 3 * n + 2);
        }
    }
}
