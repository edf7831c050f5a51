//! Rules, equation specifications, subcriticality, conformance, and
//! enumeration of the finite tree bases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::algebra::{parse_q, q_one, Degree, MultiIndex, Q};
use crate::error::{Error, ParseError, Result};
use crate::trees::{DegreeMode, DegreeParams, EdgeKind, EdgeType, Tree};

/// One slot of a rule clause: an edge type with an optional multiplicity
/// bound (`None` = unbounded). The lower bound is always zero, which makes
/// every rule built from clauses normal by construction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Slot {
    pub edge: EdgeType,
    pub max: Option<u32>,
}

/// A clause denotes all multisets of edge types whose multiplicities fit the
/// slots (edge types without a slot are forbidden).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RuleClause {
    pub slots: Vec<Slot>,
}

impl RuleClause {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for s in &slots {
            if !seen.insert(s.edge.clone()) {
                return Err(Error::Invalid(format!(
                    "clause has duplicate slot for edge type {}",
                    s.edge
                )));
            }
        }
        Ok(RuleClause { slots })
    }

    fn matches(&self, counts: &BTreeMap<&EdgeType, u32>) -> bool {
        counts.iter().all(|(e, &c)| {
            self.slots
                .iter()
                .any(|s| &&s.edge == e && s.max.map_or(true, |m| c <= m))
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub clauses: Vec<RuleClause>,
}

impl Rule {
    pub fn new(clauses: Vec<RuleClause>) -> Rule {
        Rule { clauses }
    }

    /// Membership of a multiset of edge types.
    pub fn contains(&self, multiset: &[EdgeType]) -> bool {
        let mut counts: BTreeMap<&EdgeType, u32> = BTreeMap::new();
        for e in multiset {
            *counts.entry(e).or_insert(0) += 1;
        }
        self.clauses.iter().any(|c| c.matches(&counts))
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Distinct noise edge types appearing in any slot.
    pub fn noise_types(&self) -> Vec<EdgeType> {
        self.edge_types(EdgeKind::Noise)
    }

    /// Distinct kernel edge types appearing in any slot.
    pub fn kernel_types(&self) -> Vec<EdgeType> {
        self.edge_types(EdgeKind::Kernel)
    }

    fn edge_types(&self, kind: EdgeKind) -> Vec<EdgeType> {
        let set: BTreeSet<EdgeType> = self
            .clauses
            .iter()
            .flat_map(|c| c.slots.iter())
            .filter(|s| s.edge.kind == kind && s.max != Some(0))
            .map(|s| s.edge.clone())
            .collect();
        set.into_iter().collect()
    }

    fn has_unbounded_noise(&self) -> bool {
        self.clauses.iter().any(|c| {
            c.slots
                .iter()
                .any(|s| s.edge.kind == EdgeKind::Noise && s.max.is_none())
        })
    }

    /// Exhaustively checks downward closure on all members with at most
    /// `max_size` elements (a sanity check; closure holds structurally).
    pub fn normal_check(&self, max_size: usize) -> bool {
        let members = self.members_up_to(max_size);
        members.iter().all(|m| {
            subsets_of_multiset(m)
                .into_iter()
                .all(|sub| self.contains(&sub))
        })
    }

    fn members_up_to(&self, max_size: usize) -> Vec<Vec<EdgeType>> {
        let mut out: BTreeSet<Vec<EdgeType>> = BTreeSet::new();
        for clause in &self.clauses {
            let mut stack = vec![(0usize, Vec::new())];
            while let Some((i, acc)) = stack.pop() {
                if i == clause.slots.len() {
                    out.insert(acc);
                    continue;
                }
                let slot = &clause.slots[i];
                let cap = slot
                    .max
                    .map_or(max_size, |m| m as usize)
                    .min(max_size - acc.len());
                for c in 0..=cap {
                    let mut next = acc.clone();
                    next.extend(std::iter::repeat(slot.edge.clone()).take(c));
                    stack.push((i + 1, next));
                }
            }
        }
        out.into_iter().collect()
    }
}

fn subsets_of_multiset(m: &[EdgeType]) -> Vec<Vec<EdgeType>> {
    let mut out = vec![Vec::new()];
    for e in m {
        let mut next = Vec::with_capacity(out.len() * 2);
        for s in out {
            let mut with = s.clone();
            with.push(e.clone());
            next.push(s);
            next.push(with);
        }
        out = next;
    }
    for s in &mut out {
        s.sort();
    }
    out.sort();
    out.dedup();
    out
}

/// Enumeration cutoffs: maximal tree degree, kernel-edge count, and a
/// componentwise bound on node polynomial decorations.
#[derive(Clone, Debug)]
pub struct Cutoffs {
    pub max_degree: Degree,
    pub max_kernel_edges: usize,
    pub max_poly: MultiIndex,
}

#[derive(Clone, Debug)]
pub struct EquationSpec {
    pub dim: usize,
    pub scaling: Vec<Q>,
    pub deg_noise: Degree,
    pub deg_kernel: Degree,
    pub rule: Rule,
    pub nonlinearity: Option<String>,
    pub cutoffs: Cutoffs,
}

impl EquationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.scaling.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.scaling.len(),
            });
        }
        if self.scaling.iter().any(|s| *s < q_one()) {
            return Err(Error::Invalid("scaling entries must be ≥ 1".into()));
        }
        if !self.deg_noise.is_negative() {
            return Err(Error::Invalid("noise degree must be negative".into()));
        }
        if !self.deg_kernel.is_positive() {
            return Err(Error::Invalid("kernel degree must be positive".into()));
        }
        if self.cutoffs.max_poly.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: self.cutoffs.max_poly.dim(),
            });
        }
        Ok(())
    }

    pub fn degree_params(&self) -> DegreeParams {
        DegreeParams {
            scaling: self.scaling.clone(),
            deg_noise: self.deg_noise.clone(),
            deg_kernel: self.deg_kernel.clone(),
        }
    }

    pub fn degree(&self, t: &Tree, mode: DegreeMode) -> Degree {
        t.degree(&self.degree_params(), mode)
    }
}

/// True iff every node's outgoing edge-type multiset belongs to the rule.
pub fn strongly_conforms(t: &Tree, rule: &Rule) -> bool {
    let multiset: Vec<EdgeType> = t.children().iter().map(|(e, _)| e.clone()).collect();
    rule.contains(&multiset) && t.children().iter().all(|(_, c)| strongly_conforms(c, rule))
}

// ---------------------------------------------------------------------------
// Subcriticality
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SubcriticalReport {
    pub subcritical: bool,
    /// Feasible regularity assignment `(reg Ξ, reg I)` when subcritical.
    pub witness: Option<(Degree, Degree)>,
}

/// One endpoint of an interval in the ordered field ℚ + ℚκ.
#[derive(Clone, Debug)]
struct Endpoint {
    value: Degree,
    strict: bool,
}

#[derive(Clone, Debug)]
struct Interval {
    lo: Option<Endpoint>,
    hi: Option<Endpoint>,
}

impl Interval {
    fn all() -> Interval {
        Interval { lo: None, hi: None }
    }

    fn empty() -> Interval {
        Interval {
            lo: Some(Endpoint {
                value: Degree::zero(),
                strict: true,
            }),
            hi: Some(Endpoint {
                value: Degree::zero(),
                strict: true,
            }),
        }
    }

    fn intersect(&self, other: &Interval) -> Interval {
        let lo = match (&self.lo, &other.lo) {
            (None, x) => x.clone(),
            (x, None) => x.clone(),
            (Some(a), Some(b)) => Some(if a.value > b.value || (a.value == b.value && a.strict) {
                a.clone()
            } else {
                b.clone()
            }),
        };
        let hi = match (&self.hi, &other.hi) {
            (None, x) => x.clone(),
            (x, None) => x.clone(),
            (Some(a), Some(b)) => Some(if a.value < b.value || (a.value == b.value && a.strict) {
                a.clone()
            } else {
                b.clone()
            }),
        };
        Interval { lo, hi }
    }

    fn is_empty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => {
                a.value > b.value || (a.value == b.value && (a.strict || b.strict))
            }
            _ => false,
        }
    }

    /// A point inside a nonempty interval. Prefers `hi − κ`, matching the
    /// usual convention of sitting just below the least upper bound.
    fn witness(&self) -> Degree {
        debug_assert!(!self.is_empty());
        let kappa = Degree::new(crate::algebra::q_zero(), q_one());
        match (&self.lo, &self.hi) {
            (_, Some(hi)) => {
                let candidate = &hi.value - &kappa;
                let ok = match &self.lo {
                    None => true,
                    Some(lo) => candidate > lo.value || (candidate == lo.value && !lo.strict),
                };
                if ok {
                    candidate
                } else {
                    // Narrow interval: take the midpoint.
                    let lo = self.lo.as_ref().unwrap();
                    (&lo.value + &hi.value).scale(&crate::algebra::q(1, 2))
                }
            }
            (Some(lo), None) => &lo.value + &Degree::from_q(q_one()),
            (None, None) => Degree::zero(),
        }
    }
}

/// Decides subcriticality with `reg Ξ = |Ξ|_s − κ`: the per-clause
/// constraints on `reg I` are piecewise-linear and concave, so the feasible
/// set is an exact interval intersection.
pub fn subcritical_check(spec: &EquationSpec) -> SubcriticalReport {
    let reg_noise = &spec.deg_noise - &Degree::new(crate::algebra::q_zero(), q_one());
    if spec.rule.has_unbounded_noise() {
        return SubcriticalReport {
            subcritical: false,
            witness: None,
        };
    }
    let mut feasible = Interval::all();
    for clause in &spec.rule.clauses {
        let iv = clause_interval(spec, clause, &reg_noise);
        feasible = feasible.intersect(&iv);
        if feasible.is_empty() {
            return SubcriticalReport {
                subcritical: false,
                witness: None,
            };
        }
    }
    let witness = feasible.witness();
    debug_assert!(check_regularity(spec, &reg_noise, &witness));
    SubcriticalReport {
        subcritical: true,
        witness: Some((reg_noise, witness)),
    }
}

fn clause_interval(spec: &EquationSpec, clause: &RuleClause, reg_noise: &Degree) -> Interval {
    let mut noise_const = Degree::zero();
    let mut bounded: Vec<(Degree, u32)> = Vec::new(); // (|m|_s, max multiplicity)
    let mut domain_lo: Option<Degree> = None;
    for slot in &clause.slots {
        let w = slot.edge.deriv.s_degree(&spec.scaling);
        match slot.edge.kind {
            EdgeKind::Noise => {
                let c = slot.max.expect("unbounded noise handled by caller");
                noise_const += &(reg_noise - &w).scale(&crate::algebra::qi(c as i64));
            }
            EdgeKind::Kernel => match slot.max {
                Some(c) => {
                    if c > 0 {
                        bounded.push((w, c));
                    }
                }
                None => {
                    domain_lo = Some(match domain_lo {
                        None => w,
                        Some(d) => d.max(w),
                    });
                }
            },
        }
    }

    // ψ(r) = deg_kernel + noise_const + Σ max·min(0, r − w) − r is concave
    // and piecewise linear with integer slopes, so {ψ > 0} is an interval
    // whose endpoints solve a linear equation exactly.
    let psi = |r: &Degree| -> Degree {
        let mut acc = &spec.deg_kernel + &noise_const;
        for (w, c) in &bounded {
            if r < w {
                acc += &(r - w).scale(&crate::algebra::qi(*c as i64));
            }
        }
        acc - r.clone()
    };

    let mut breaks: Vec<Degree> = bounded.iter().map(|(w, _)| w.clone()).collect();
    breaks.sort();
    breaks.dedup();

    // Slope of ψ strictly right of `r` (slots stay active while r < w).
    let slope_right_of = |r: &Degree| -> i64 {
        bounded
            .iter()
            .filter(|(w, _)| w > r)
            .map(|(_, c)| *c as i64)
            .sum::<i64>()
            - 1
    };
    // ψ(x) = ψ(at) + slope·(x − at) on a linear piece: zero at
    // at − ψ(at)/slope.
    let solve_zero = |at: &Degree, slope: i64| -> Degree {
        at - &psi(at).scale(&crate::algebra::q(1, slope))
    };

    let core = if breaks.is_empty() {
        // ψ(r) = deg + noise − r: feasible iff r < deg + noise.
        Interval {
            lo: None,
            hi: Some(Endpoint {
                value: &spec.deg_kernel + &noise_const,
                strict: true,
            }),
        }
    } else {
        let values: Vec<Degree> = breaks.iter().map(psi).collect();
        let zero = Degree::zero();
        match values.iter().position(|v| *v > zero) {
            Some(first) => {
                let lo = if first == 0 {
                    // Piece (−∞, b_0]: slope = Σ multiplicities − 1.
                    let s0: i64 =
                        bounded.iter().map(|(_, c)| *c as i64).sum::<i64>() - 1;
                    if s0 > 0 {
                        Some(Endpoint {
                            value: solve_zero(&breaks[0], s0),
                            strict: true,
                        })
                    } else {
                        None
                    }
                } else {
                    // Crossing inside [b_{first−1}, b_first].
                    let s = slope_right_of(&breaks[first - 1]);
                    debug_assert!(s > 0);
                    Some(Endpoint {
                        value: solve_zero(&breaks[first], s),
                        strict: true,
                    })
                };
                let last = values.iter().rposition(|v| *v > zero).unwrap();
                let hi = if last + 1 == breaks.len() {
                    // Rightmost piece has slope −1.
                    Some(Endpoint {
                        value: &breaks[last] + &values[last],
                        strict: true,
                    })
                } else {
                    let s = slope_right_of(&breaks[last]);
                    debug_assert!(s < 0);
                    Some(Endpoint {
                        value: solve_zero(&breaks[last], s),
                        strict: true,
                    })
                };
                Interval { lo, hi }
            }
            None => {
                // ψ ≤ 0 at every kink; by concavity it can only be positive
                // on the unbounded left piece, and only if ψ grows there.
                let s0: i64 = bounded.iter().map(|(_, c)| *c as i64).sum::<i64>() - 1;
                if s0 < 0 && psi(&breaks[0]) < zero {
                    Interval {
                        lo: None,
                        hi: Some(Endpoint {
                            value: solve_zero(&breaks[0], s0),
                            strict: true,
                        }),
                    }
                } else if s0 < 0 {
                    // ψ(b_0) = 0 exactly: positive strictly left of b_0.
                    Interval {
                        lo: None,
                        hi: Some(Endpoint {
                            value: breaks[0].clone(),
                            strict: true,
                        }),
                    }
                } else {
                    Interval::empty()
                }
            }
        }
    };

    match domain_lo {
        Some(d) => core.intersect(&Interval {
            lo: Some(Endpoint {
                value: d,
                strict: false,
            }),
            hi: None,
        }),
        None => core,
    }
}

/// Direct check that `(reg Ξ, reg I)` really witnesses subcriticality;
/// used to validate witnesses and for brute-force comparisons.
pub fn check_regularity(spec: &EquationSpec, reg_noise: &Degree, reg_kernel: &Degree) -> bool {
    if reg_noise >= &spec.deg_noise {
        return false;
    }
    for clause in &spec.rule.clauses {
        let mut inf = Degree::zero();
        for slot in &clause.slots {
            let w = slot.edge.deriv.s_degree(&spec.scaling);
            let per_edge = match slot.edge.kind {
                EdgeKind::Noise => reg_noise - &w,
                EdgeKind::Kernel => reg_kernel - &w,
            };
            match slot.max {
                Some(c) => {
                    if per_edge.is_negative() {
                        inf += &per_edge.scale(&crate::algebra::qi(c as i64));
                    }
                }
                None => {
                    if per_edge.is_negative() {
                        return false; // infimum −∞
                    }
                }
            }
        }
        if !(reg_kernel < &(&spec.deg_kernel + &inf)) {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Tree bases
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Flavor {
    /// Strongly conforming reduced trees.
    Circ,
    /// Contraction images of conforming trees (extended decorations).
    CircEx,
    /// Negative unplanted reduced trees with bare root polynomial.
    Minus,
    /// Extended analogue of `Minus`.
    MinusEx,
    /// Products of positive planted trees and polynomials (reduced).
    Plus,
    /// Extended analogue of `Plus`.
    PlusEx,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Flavor::Circ => "circ",
            Flavor::CircEx => "circ-ex",
            Flavor::Minus => "minus",
            Flavor::MinusEx => "minus-ex",
            Flavor::Plus => "plus",
            Flavor::PlusEx => "plus-ex",
        };
        write!(f, "{s}")
    }
}

/// An ordered, indexed list of canonical basis trees of one flavor.
#[derive(Clone, Debug)]
pub struct TreeBasis {
    pub flavor: Flavor,
    pub trees: Vec<Tree>,
    index: BTreeMap<Tree, usize>,
}

impl TreeBasis {
    pub fn new(flavor: Flavor, mut trees: Vec<Tree>) -> TreeBasis {
        trees.sort();
        trees.dedup();
        let index = trees
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TreeBasis {
            flavor,
            trees,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn contains(&self, t: &Tree) -> bool {
        self.index.contains_key(t)
    }

    pub fn position(&self, t: &Tree) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tree> {
        self.trees.iter()
    }
}

/// Enumerates all strongly conforming reduced trees within the cutoffs.
/// Termination relies on subcriticality (checked by the caller), which rules
/// out unbounded noise slots; unbounded kernel slots are capped by the
/// kernel-edge budget.
pub fn enumerate_circ(spec: &EquationSpec) -> Result<TreeBasis> {
    if !subcritical_check(spec).subcritical {
        return Err(Error::NotSubcritical);
    }
    let params = spec.degree_params();
    let n_max = spec.cutoffs.max_kernel_edges;

    // Lower bound for the degree contributed by any surrounding context
    // with k kernel edges; used to prune intermediate subtrees. Each context
    // kernel edge contributes at least the smallest kernel edge degree, and
    // at most k + 1 context nodes can each carry one clause's worth of
    // noise edges.
    let kernel_floor: Degree = spec
        .rule
        .kernel_types()
        .iter()
        .map(|e| params.edge_degree(e))
        .min()
        .unwrap_or_else(Degree::zero);
    let noise_floor = spec
        .rule
        .clauses
        .iter()
        .map(|c| {
            c.slots
                .iter()
                .filter(|s| s.edge.kind == EdgeKind::Noise)
                .map(|s| {
                    params
                        .edge_degree(&s.edge)
                        .scale(&crate::algebra::qi(s.max.unwrap_or(0) as i64))
                })
                .sum::<Degree>()
        })
        .fold(Degree::zero(), |acc, d| if d < acc { d } else { acc });
    let ctx_min = |k: usize| -> Degree {
        kernel_floor.scale(&crate::algebra::qi(k as i64))
            + noise_floor.scale(&crate::algebra::qi(k as i64 + 1))
    };

    let root_choices = root_multisets(&spec.rule, n_max);
    let mut strata: Vec<Vec<(Tree, Degree)>> = Vec::with_capacity(n_max + 1);
    let polys: Vec<(MultiIndex, Degree)> = spec
        .cutoffs
        .max_poly
        .sub_indices()
        .into_iter()
        .map(|k| {
            let d = k.s_degree(&spec.scaling);
            (k, d)
        })
        .collect();

    for n in 0..=n_max {
        let budget = &spec.cutoffs.max_degree - &ctx_min(n_max - n);
        // Most negative degree a single branch can contribute, for pruning.
        let min_branch: Degree = {
            let min_subtree = strata
                .iter()
                .flatten()
                .map(|(_, d)| d.clone())
                .min()
                .unwrap_or_else(Degree::zero)
                .min(Degree::zero());
            spec.rule
                .kernel_types()
                .iter()
                .map(|e| params.edge_degree(e) + min_subtree.clone())
                .min()
                .unwrap_or_else(Degree::zero)
                .min(Degree::zero())
        };
        let mut stratum: BTreeSet<(Tree, Degree)> = BTreeSet::new();
        for (kernel_part, noise_part) in &root_choices {
            let b: usize = kernel_part.iter().map(|(_, c)| *c as usize).sum();
            if b > n || (n > 0 && b == 0) {
                continue;
            }
            let mut base_children: Vec<(EdgeType, Tree)> = Vec::new();
            let mut base_deg = Degree::zero();
            for (l, c) in noise_part {
                let e = EdgeType::noise(l.clone());
                base_deg += &params.edge_degree(&e).scale(&crate::algebra::qi(*c as i64));
                for _ in 0..*c {
                    base_children.push((e.clone(), Tree::unit(spec.dim)));
                }
            }
            // Distribute the remaining n − b kernel edges among the b
            // branches, pruning on the degree budget as the multiset grows.
            let assignments = branch_assignments(
                kernel_part,
                n - b,
                &strata,
                &params,
                &base_deg,
                &budget,
                &min_branch,
            );
            for (branches, skeleton_deg) in assignments {
                let mut children = base_children.clone();
                for (m, t) in &branches {
                    children.push((EdgeType::kernel(m.clone()), t.clone()));
                }
                let skeleton =
                    Tree::new(MultiIndex::zero(spec.dim), Degree::zero(), children);
                for (k, kd) in &polys {
                    let deg = &skeleton_deg + kd;
                    if deg >= budget {
                        continue;
                    }
                    stratum.insert((skeleton.with_root_poly(k.clone()), deg));
                }
            }
        }
        strata.push(stratum.into_iter().collect());
    }

    let trees: Vec<Tree> = strata
        .into_iter()
        .flatten()
        .filter(|(_, d)| *d < spec.cutoffs.max_degree)
        .map(|(t, _)| t)
        .collect();
    Ok(TreeBasis::new(Flavor::Circ, trees))
}

/// All root edge-type multisets allowed by the rule, split into kernel and
/// noise parts with multiplicities; kernel multiplicities are capped by the
/// global kernel budget.
fn root_multisets(
    rule: &Rule,
    max_kernel: usize,
) -> Vec<(Vec<(MultiIndex, u32)>, Vec<(MultiIndex, u32)>)> {
    let mut out: BTreeSet<(Vec<(MultiIndex, u32)>, Vec<(MultiIndex, u32)>)> = BTreeSet::new();
    for clause in &rule.clauses {
        let mut stack: Vec<(usize, Vec<(MultiIndex, u32)>, Vec<(MultiIndex, u32)>, usize)> =
            vec![(0, Vec::new(), Vec::new(), 0)];
        while let Some((i, kernel, noise, used)) = stack.pop() {
            if i == clause.slots.len() {
                let mut k = kernel;
                let mut n = noise;
                k.sort();
                n.sort();
                out.insert((k, n));
                continue;
            }
            let slot = &clause.slots[i];
            let cap = match (slot.edge.kind, slot.max) {
                (EdgeKind::Kernel, Some(m)) => (m as usize).min(max_kernel - used),
                (EdgeKind::Kernel, None) => max_kernel - used,
                (EdgeKind::Noise, Some(m)) => m as usize,
                (EdgeKind::Noise, None) => {
                    // Unbounded noise never occurs for subcritical rules.
                    0
                }
            };
            for c in 0..=cap {
                let mut kernel2 = kernel.clone();
                let mut noise2 = noise.clone();
                let mut used2 = used;
                if c > 0 {
                    match slot.edge.kind {
                        EdgeKind::Kernel => {
                            kernel2.push((slot.edge.deriv.clone(), c as u32));
                            used2 += c;
                        }
                        EdgeKind::Noise => noise2.push((slot.edge.deriv.clone(), c as u32)),
                    }
                }
                stack.push((i + 1, kernel2, noise2, used2));
            }
        }
    }
    out.into_iter().collect()
}

/// Multiset choices of branch subtrees per derivative group, spending
/// exactly `extra` kernel edges beyond the branch edges themselves. Within
/// a group of equal derivatives, subtrees are chosen as a nondecreasing
/// sequence of (stratum, position) so each multiset appears once. Partial
/// sums are pruned against the degree budget; `min_branch` is the most
/// negative degree any further branch can contribute.
#[allow(clippy::too_many_arguments)]
fn branch_assignments(
    groups: &[(MultiIndex, u32)],
    extra: usize,
    strata: &[Vec<(Tree, Degree)>],
    params: &DegreeParams,
    base_deg: &Degree,
    budget: &Degree,
    min_branch: &Degree,
) -> Vec<(Vec<(MultiIndex, Tree)>, Degree)> {
    struct Rec<'a> {
        groups: &'a [(MultiIndex, u32)],
        strata: &'a [Vec<(Tree, Degree)>],
        edge_degs: Vec<Degree>,
        budget: &'a Degree,
        min_branch: &'a Degree,
        remaining_after: Vec<usize>,
        current: Vec<(MultiIndex, Tree)>,
        results: Vec<(Vec<(MultiIndex, Tree)>, Degree)>,
    }
    impl Rec<'_> {
        fn go(
            &mut self,
            gi: usize,
            slot_in_group: u32,
            min_stratum: usize,
            min_pos: usize,
            extra: usize,
            acc: Degree,
        ) {
            if gi == self.groups.len() {
                if extra == 0 {
                    self.results.push((self.current.clone(), acc));
                }
                return;
            }
            let (deriv, count) = &self.groups[gi];
            if slot_in_group == *count {
                self.go(gi + 1, 0, 0, 0, extra, acc);
                return;
            }
            // Slots still to fill after this one, for budget pruning.
            let remaining = (*count - slot_in_group - 1) as usize + self.remaining_after[gi];
            let floor = self
                .min_branch
                .scale(&crate::algebra::qi(remaining as i64));
            for n in min_stratum..self.strata.len().min(extra + 1) {
                let start = if n == min_stratum { min_pos } else { 0 };
                for pos in start..self.strata[n].len() {
                    let (t, d) = &self.strata[n][pos];
                    let next = &acc + &(&self.edge_degs[gi] + d);
                    if &(&next + &floor) >= self.budget {
                        continue;
                    }
                    self.current.push((deriv.clone(), t.clone()));
                    self.go(gi, slot_in_group + 1, n, pos, extra - n, next);
                    self.current.pop();
                }
            }
        }
    }
    let edge_degs = groups
        .iter()
        .map(|(m, _)| params.edge_degree(&EdgeType::kernel(m.clone())))
        .collect();
    // remaining_after[gi] = total slots in groups after gi.
    let mut remaining_after = vec![0usize; groups.len()];
    for gi in (0..groups.len()).rev() {
        remaining_after[gi] = groups[gi + 1..].iter().map(|(_, c)| *c as usize).sum();
    }
    let mut rec = Rec {
        groups,
        strata,
        edge_degs,
        budget,
        min_branch,
        remaining_after,
        current: Vec::new(),
        results: Vec::new(),
    };
    rec.go(0, 0, 0, 0, extra, base_deg.clone());
    rec.results
}

/// Filters a conforming basis down to the negative unplanted trees with
/// bare root polynomial (and, for the reduced flavor, zero extended
/// decorations everywhere).
pub fn filter_minus(spec: &EquationSpec, base: &TreeBasis, flavor: Flavor) -> TreeBasis {
    let params = spec.degree_params();
    let trees = base
        .iter()
        .filter(|t| {
            t.degree(&params, DegreeMode::S).is_negative()
                && t.poly().is_zero()
                && !t.is_planted()
                && !t.is_unit()
        })
        .cloned()
        .collect();
    TreeBasis::new(flavor, trees)
}

/// The local root profiles `(edge multiset, extended decoration)` realized
/// by a basis; membership of every node profile characterizes the extended
/// conforming trees.
#[derive(Clone, Debug, Default)]
pub struct RootProfiles {
    profiles: BTreeSet<(Vec<EdgeType>, Degree)>,
}

impl RootProfiles {
    pub fn from_basis(basis: &TreeBasis) -> RootProfiles {
        let mut profiles = BTreeSet::new();
        for t in basis.iter() {
            collect_profiles(t, &mut profiles);
        }
        RootProfiles { profiles }
    }

    pub fn contains(&self, multiset: &[EdgeType], ext: &Degree) -> bool {
        self.profiles
            .contains(&(multiset.to_vec(), ext.clone()))
    }

    /// Local conformance test: every node's `(edge multiset, ext)` pair must
    /// be realizable at the root of some extended conforming tree.
    pub fn conforms(&self, t: &Tree) -> bool {
        let multiset: Vec<EdgeType> = t.children().iter().map(|(e, _)| e.clone()).collect();
        self.contains(&multiset, t.ext())
            && t.children().iter().all(|(_, c)| self.conforms(c))
    }
}

fn collect_profiles(t: &Tree, acc: &mut BTreeSet<(Vec<EdgeType>, Degree)>) {
    let multiset: Vec<EdgeType> = t.children().iter().map(|(e, _)| e.clone()).collect();
    acc.insert((multiset, t.ext().clone()));
    for (_, c) in t.children() {
        collect_profiles(c, acc);
    }
}

// ---------------------------------------------------------------------------
// Spec files and presets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpecJson {
    dimension: usize,
    scaling: Vec<String>,
    degrees: DegreesJson,
    rule: Vec<ClauseJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nonlinearity: Option<String>,
    cutoffs: CutoffsJson,
}

#[derive(Serialize, Deserialize)]
struct DegreesJson {
    #[serde(rename = "Xi")]
    xi: String,
    #[serde(rename = "I")]
    i: String,
}

#[derive(Serialize, Deserialize)]
struct ClauseJson {
    slots: Vec<SlotJson>,
}

#[derive(Serialize, Deserialize)]
struct SlotJson {
    kind: String,
    #[serde(default)]
    deriv: Option<Vec<u32>>,
    #[serde(default)]
    min: u32,
    #[serde(default)]
    max: Option<u32>,
}

impl EquationSpec {
    pub fn from_json(src: &str) -> Result<EquationSpec> {
        let j: SpecJson = serde_json::from_str(src)?;
        let dim = j.dimension;
        let scaling = j
            .scaling
            .iter()
            .map(|s| parse_q(s).map_err(Error::from))
            .collect::<Result<Vec<Q>>>()?;
        let deg_noise: Degree = j.degrees.xi.parse().map_err(|e: ParseError| Error::from(e))?;
        let deg_kernel: Degree = j.degrees.i.parse().map_err(|e: ParseError| Error::from(e))?;
        let mut clauses = Vec::new();
        for c in &j.rule {
            let mut slots = Vec::new();
            for s in &c.slots {
                if s.min != 0 {
                    return Err(Error::Invalid(
                        "rule slots must have min = 0".into(),
                    ));
                }
                let kind = match s.kind.as_str() {
                    "I" => EdgeKind::Kernel,
                    "Xi" => EdgeKind::Noise,
                    other => {
                        return Err(Error::Invalid(format!("unknown edge kind `{other}`")))
                    }
                };
                let deriv = match &s.deriv {
                    Some(v) => {
                        if v.len() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                found: v.len(),
                            });
                        }
                        MultiIndex::new(v.clone())
                    }
                    None => MultiIndex::zero(dim),
                };
                slots.push(Slot {
                    edge: EdgeType { kind, deriv },
                    max: s.max,
                });
            }
            clauses.push(RuleClause::new(slots)?);
        }
        let cutoffs = Cutoffs {
            max_degree: j
                .cutoffs
                .max_degree
                .parse()
                .map_err(|e: ParseError| Error::from(e))?,
            max_kernel_edges: j.cutoffs.max_kernel_edges,
            max_poly: {
                let v = j.cutoffs.max_poly;
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
                MultiIndex::new(v)
            },
        };
        let spec = EquationSpec {
            dim,
            scaling,
            deg_noise,
            deg_kernel,
            rule: Rule::new(clauses),
            nonlinearity: j.nonlinearity,
            cutoffs,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A stable fingerprint of the spec contents, used to key disk caches.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(format!(
            "{};{:?};{};{};{:?};{:?};{};{};{}",
            self.dim,
            self.scaling,
            self.deg_noise,
            self.deg_kernel,
            self.rule,
            self.nonlinearity,
            self.cutoffs.max_degree,
            self.cutoffs.max_kernel_edges,
            self.cutoffs.max_poly,
        ));
        hex::encode(&h.finalize()[..16])
    }
}

#[derive(Serialize, Deserialize)]
struct CutoffsJson {
    max_degree: String,
    max_kernel_edges: usize,
    max_poly: Vec<u32>,
}

/// Built-in equation presets, shipped as JSON data files.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "phi4_3" => Some(include_str!("../presets/phi4_3.json")),
        "phi4_2" => Some(include_str!("../presets/phi4_2.json")),
        "gkpz" => Some(include_str!("../presets/gkpz.json")),
        _ => None,
    }
}

/// Loads a spec from a preset name or a file path.
pub fn load_spec(name_or_path: &str) -> Result<EquationSpec> {
    if let Some(src) = preset(name_or_path) {
        return EquationSpec::from_json(src);
    }
    let src = std::fs::read_to_string(name_or_path)?;
    EquationSpec::from_json(&src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::q;
    use crate::algebra::qi;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn phi4_rule() -> Rule {
        Rule::new(vec![
            RuleClause::new(vec![Slot {
                edge: EdgeType::kernel(mi(&[0, 0, 0, 0])),
                max: Some(3),
            }])
            .unwrap(),
            RuleClause::new(vec![Slot {
                edge: EdgeType::noise(mi(&[0, 0, 0, 0])),
                max: Some(1),
            }])
            .unwrap(),
        ])
    }

    fn phi43_spec() -> EquationSpec {
        EquationSpec {
            dim: 4,
            scaling: vec![qi(1), qi(1), qi(1), qi(2)],
            deg_noise: Degree::new(q(-5, 2), qi(-1)),
            deg_kernel: Degree::from_q(qi(2)),
            rule: phi4_rule(),
            nonlinearity: None,
            cutoffs: Cutoffs {
                max_degree: Degree::from_q(q(3, 2)),
                max_kernel_edges: 4,
                max_poly: mi(&[1, 1, 1, 1]),
            },
        }
    }

    #[test]
    fn conformance_examples() {
        let rule = phi4_rule();
        let xi = Tree::noise(mi(&[0, 0, 0, 0]));
        assert!(strongly_conforms(&xi, &rule));
        let psi = Tree::kernel(mi(&[0, 0, 0, 0]), xi.clone());
        let psi4 = psi.product(&psi).product(&psi).product(&psi);
        assert!(!strongly_conforms(&psi4, &rule));
        // X^k conforms iff the empty multiset is allowed.
        assert!(strongly_conforms(
            &Tree::poly_tree(mi(&[2, 0, 0, 0])),
            &rule
        ));
    }

    #[test]
    fn normality_structural() {
        assert!(phi4_rule().normal_check(4));
    }

    #[test]
    fn subcriticality_dimensions() {
        // |Ξ| = −d/2 − 1/2 − κ for d = 2, 3, 4: subcritical.
        for (dim, q0) in [(2usize, q(-3, 2)), (3, q(-2, 1)), (4, q(-5, 2))] {
            let mut spec = phi43_spec();
            spec.dim = dim;
            spec.scaling = vec![qi(1); dim];
            spec.scaling[dim - 1] = qi(2);
            spec.deg_noise = Degree::new(q0, qi(-1));
            spec.cutoffs.max_poly = MultiIndex::zero(dim);
            spec.rule = Rule::new(vec![
                RuleClause::new(vec![Slot {
                    edge: EdgeType::kernel(MultiIndex::zero(dim)),
                    max: Some(3),
                }])
                .unwrap(),
                RuleClause::new(vec![Slot {
                    edge: EdgeType::noise(MultiIndex::zero(dim)),
                    max: Some(1),
                }])
                .unwrap(),
            ]);
            let report = subcritical_check(&spec);
            assert!(report.subcritical, "d = {dim}");
        }
        // |Ξ| = −3: not subcritical.
        let mut spec = phi43_spec();
        spec.deg_noise = Degree::from_q(qi(-3));
        assert!(!subcritical_check(&spec).subcritical);
    }

    #[test]
    fn phi43_witness_matches_convention() {
        let report = subcritical_check(&phi43_spec());
        assert!(report.subcritical);
        let (reg_noise, reg_kernel) = report.witness.unwrap();
        assert_eq!(reg_noise, Degree::new(q(-5, 2), qi(-2)));
        // Interval is (−1, −1/2−2κ); the witness sits κ below the top.
        assert_eq!(reg_kernel, Degree::new(q(-1, 2), qi(-3)));
    }

    #[test]
    fn trivial_rules() {
        // R = {∅}: only polynomial trees conform.
        let mut spec = phi43_spec();
        spec.rule = Rule::new(vec![RuleClause::new(vec![]).unwrap()]);
        let basis = enumerate_circ(&spec).unwrap();
        assert!(!basis.is_empty());
        assert!(basis.iter().all(|t| t.children().is_empty()));
        // Empty rule: empty basis.
        spec.rule = Rule::new(vec![]);
        let basis = enumerate_circ(&spec).unwrap();
        assert!(basis.is_empty());
    }

    #[test]
    fn phi43_minus_basis_small_window() {
        let spec = phi43_spec();
        let circ = enumerate_circ(&spec).unwrap();
        let minus = filter_minus(&spec, &circ, Flavor::Minus);
        let psi = Tree::kernel(mi(&[0; 4]), Tree::noise(mi(&[0; 4])));
        let psi2 = psi.product(&psi);
        let psi3 = psi2.product(&psi);
        assert!(minus.contains(&psi2));
        assert!(minus.contains(&psi3));
        assert!(!minus.contains(&psi)); // planted
        assert!(!minus.contains(&Tree::noise(mi(&[0; 4])))); // planted
    }

    #[test]
    fn circ_closed_under_subtrees() {
        let spec = phi43_spec();
        let circ = enumerate_circ(&spec).unwrap();
        fn subtrees(t: &Tree, acc: &mut Vec<Tree>) {
            for (_, c) in t.children() {
                acc.push(c.clone());
                subtrees(c, acc);
            }
        }
        for t in circ.iter() {
            let mut subs = Vec::new();
            subtrees(t, &mut subs);
            for s in subs {
                assert!(
                    strongly_conforms(&s, &spec.rule),
                    "subtree {s} of {t} does not conform"
                );
            }
        }
    }

    #[test]
    fn monotone_cutoffs() {
        let spec_small = phi43_spec();
        let mut spec_big = phi43_spec();
        spec_big.cutoffs.max_degree = Degree::from_q(qi(2));
        let small = enumerate_circ(&spec_small).unwrap();
        let big = enumerate_circ(&spec_big).unwrap();
        for t in small.iter() {
            assert!(big.contains(t));
        }
        assert!(big.len() >= small.len());
    }
}
