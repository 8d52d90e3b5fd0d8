//! Signed gl(∞) action on Maya diagrams, graph operators and path sums.
//!
//! A state is a partition at a level n: row i carries a particle on site
//! λ_i − i + n, and every site below n − ℓ(λ) is occupied.

use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{parse_rational, Laurent, Scalar, Q};
use crate::partition::{MayaDiagram, Partition};
use crate::potential::Potential;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub level: i64,
    pub partition: Partition,
}

impl StateKey {
    pub fn new(partition: Partition, level: i64) -> Self {
        StateKey { level, partition }
    }

    pub fn vacuum(level: i64) -> Self {
        StateKey { level, partition: Partition::zero() }
    }
}

impl Ord for StateKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.level.cmp(&other.level).then_with(|| self.partition.cmp(&other.partition))
    }
}

impl PartialOrd for StateKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Particle sites of the top `rows` rows, decreasing.
fn explicit_sites(lambda: &Partition, level: i64, rows: usize) -> Vec<i64> {
    (0..rows).map(|j| lambda.part(j) as i64 - j as i64 - 1 + level).collect()
}

fn partition_from_sites(sites: &[i64], level: i64) -> Partition {
    let parts = sites.iter().enumerate().map(|(j, &s)| (s + j as i64 + 1 - level) as usize).collect();
    Partition::new(parts).expect("sorted sites above the sea form a partition")
}

pub fn occupied(lambda: &Partition, level: i64, site: i64) -> bool {
    let l = lambda.len() as i64;
    if site < level - l {
        return true;
    }
    explicit_sites(lambda, level, lambda.len()).contains(&site)
}

/// E_{ik}: moves the particle on site k to site i with sign (−1)^{c_ik},
/// c_ik = occupied sites strictly between. None when k is empty or i occupied.
pub fn apply_eik(i: i64, k: i64, lambda: &Partition, level: i64) -> Option<(Partition, i32)> {
    assert_ne!(i, k, "diagonal E_ii is an occupation test, see `occupied`");
    let lo = i.min(k);
    let rows = (lambda.len() as i64).max(level - lo + 1).max(0) as usize;
    let mut sites = explicit_sites(lambda, level, rows);
    let pos = sites.iter().position(|&s| s == k)?;
    if sites.contains(&i) {
        return None;
    }
    let hi = i.max(k);
    let between = sites.iter().filter(|&&s| s > lo && s < hi).count();
    sites[pos] = i;
    sites.sort_unstable_by(|a, b| b.cmp(a));
    let sign = if between % 2 == 0 { 1 } else { -1 };
    Some((partition_from_sites(&sites, level), sign))
}

/// E_{ik} on an explicit Maya window; the window grows if the hop reaches below it.
#[allow(non_snake_case)]
pub fn apply_Eik(i: i64, k: i64, m: &MayaDiagram) -> Result<Option<(MayaDiagram, i32)>> {
    let lambda = m.to_partition()?;
    Ok(apply_eik(i, k, &lambda, m.level).map(|(p, s)| {
        let lowest = i.min(k);
        let needed = (m.level - lowest).max(p.len() as i64).max(m.window as i64) as usize;
        (MayaDiagram::from_partition(&p, m.level, needed).expect("window covers the partition"), s)
    }))
}

pub fn charge(m: &MayaDiagram) -> i64 {
    m.level
}

/// Weighted arcs k → i (stored as (i, k)) on a bounded window.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphOperator<S> {
    pub arcs: BTreeMap<(i64, i64), S>,
    /// Occupation-testing diagonal terms; excluded unless set explicitly.
    pub diagonal: BTreeMap<i64, S>,
    pub window: (i64, i64),
}

impl<S: Scalar> GraphOperator<S> {
    pub fn empty(window: (i64, i64)) -> Self {
        GraphOperator { arcs: BTreeMap::new(), diagonal: BTreeMap::new(), window }
    }

    pub fn add_arc(&mut self, from: i64, to: i64, weight: S) -> Result<()> {
        if from == to {
            return Err(Error::param("arc", "from and to must differ; use diagonal terms"));
        }
        let (lo, hi) = self.window;
        if from < lo || from > hi || to < lo || to > hi {
            return Err(Error::param("arc", format!("({from} → {to}) outside window [{lo}, {hi}]")));
        }
        if !weight.is_zero() {
            let slot = self.arcs.entry((to, from)).or_insert_with(S::zero);
            *slot = slot.clone() + weight;
        }
        Ok(())
    }

    /// Nearest-neighbour hops inside the window: up(i) weights i−1 → i, down(i) weights i → i−1.
    pub fn hops(window: (i64, i64), up: impl Fn(i64) -> S, down: impl Fn(i64) -> S) -> Self {
        let mut g = Self::empty(window);
        for i in window.0 + 1..=window.1 {
            let u = up(i);
            if !u.is_zero() {
                g.arcs.insert((i, i - 1), u);
            }
            let d = down(i);
            if !d.is_zero() {
                g.arcs.insert((i - 1, i), d);
            }
        }
        g
    }

    /// H_{−1}: all upward unit arcs.
    pub fn h_minus_one(window: (i64, i64)) -> Self {
        Self::hops(window, |_| S::one(), |_| S::zero())
    }

    /// H_1: all downward unit arcs.
    pub fn h_one(window: (i64, i64)) -> Self {
        Self::hops(window, |_| S::zero(), |_| S::one())
    }

    /// H_1 + H_{−1}: the unweighted random-turn graph.
    pub fn random_turn(window: (i64, i64)) -> Self {
        Self::hops(window, |_| S::one(), |_| S::one())
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut g = self.clone();
        g.window = (self.window.0.min(other.window.0), self.window.1.max(other.window.1));
        for (k, w) in &other.arcs {
            let slot = g.arcs.entry(*k).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        for (k, w) in &other.diagonal {
            let slot = g.diagonal.entry(*k).or_insert_with(S::zero);
            *slot = slot.clone() + w.clone();
        }
        g
    }

    /// Images of one basis state under every arc.
    fn act(&self, key: &StateKey) -> Vec<(StateKey, S)> {
        let mut out = Vec::new();
        for (&(i, k), w) in &self.arcs {
            if let Some((p, sign)) = apply_eik(i, k, &key.partition, key.level) {
                let v = if sign < 0 { -w.clone() } else { w.clone() };
                out.push((StateKey::new(p, key.level), v));
            }
        }
        for (&i, w) in &self.diagonal {
            if occupied(&key.partition, key.level, i) {
                out.push((key.clone(), w.clone()));
            }
        }
        out
    }
}

impl GraphOperator<Laurent> {
    /// A₊(U) = Σ e^{U_{i−1}−U_i} E_{i,i−1} with exact weights.
    pub fn a_plus_exact(u: &Potential, window: (i64, i64)) -> Option<Self> {
        u.boltzmann_exact(0)?;
        Some(Self::hops(
            window,
            |i| u.boltzmann_exact(i).unwrap() * u.inv_boltzmann_exact(i - 1).unwrap(),
            |_| Laurent::zero(),
        ))
    }

    /// A₋(U) = Σ e^{U_i−U_{i−1}} E_{i−1,i} with exact weights.
    pub fn a_minus_exact(u: &Potential, window: (i64, i64)) -> Option<Self> {
        u.boltzmann_exact(0)?;
        Some(Self::hops(
            window,
            |_| Laurent::zero(),
            |i| {
                if u.hard_wall == Some(i) {
                    Laurent::zero()
                } else {
                    u.inv_boltzmann_exact(i).unwrap() * u.boltzmann_exact(i - 1).unwrap()
                }
            },
        ))
    }
}

impl GraphOperator<f64> {
    pub fn a_plus(u: &Potential, window: (i64, i64)) -> Self {
        Self::hops(window, |i| u.rate_up(i), |_| 0.0)
    }

    pub fn a_minus(u: &Potential, window: (i64, i64)) -> Self {
        Self::hops(window, |_| 0.0, |i| u.rate_down(i))
    }
}

/// JSON graph description: {"arcs":[{"from":k,"to":i,"weight":w},…],"window":[lo,hi]}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub arcs: Vec<ArcSpec>,
    pub window: [i64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub from: i64,
    pub to: i64,
    /// number or "p/q" string
    pub weight: serde_json::Value,
}

impl GraphFile {
    pub fn to_exact(&self) -> Result<GraphOperator<Q>> {
        let mut g = GraphOperator::empty((self.window[0], self.window[1]));
        for a in &self.arcs {
            let text = match &a.weight {
                serde_json::Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            let w = parse_rational(&text).ok_or_else(|| Error::param("weight", format!("{text} is not rational")))?;
            g.add_arc(a.from, a.to, w)?;
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub max_weight: Option<usize>,
    pub max_length: Option<usize>,
    /// Float coefficients with |c| ≤ floor are dropped.
    pub floor: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { max_weight: None, max_length: None, floor: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedStateVector<S> {
    pub entries: BTreeMap<StateKey, S>,
    pub policy: TruncationPolicy,
}

impl<S: Scalar> WeightedStateVector<S> {
    pub fn zero() -> Self {
        WeightedStateVector { entries: BTreeMap::new(), policy: TruncationPolicy::default() }
    }

    pub fn basis(key: StateKey) -> Self {
        let mut v = Self::zero();
        v.entries.insert(key, S::one());
        v
    }

    pub fn with_policy(mut self, policy: TruncationPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn add(&mut self, key: StateKey, c: S) {
        let slot = self.entries.entry(key).or_insert_with(S::zero);
        *slot = slot.clone() + c;
    }

    pub fn get(&self, key: &StateKey) -> S {
        self.entries.get(key).cloned().unwrap_or_else(S::zero)
    }

    pub fn scale(&self, a: &S) -> Self {
        let mut v = self.clone();
        for c in v.entries.values_mut() {
            *c = a.clone() * c.clone();
        }
        v.normalize();
        v
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut v = self.clone();
        for (k, c) in &other.entries {
            v.add(k.clone(), c.clone());
        }
        v.normalize();
        v
    }

    /// Drops zero (or sub-floor) coefficients.
    pub fn normalize(&mut self) {
        let floor = self.policy.floor;
        self.entries.retain(|_, c| !c.is_negligible(floor));
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    fn check(&self, key: &StateKey) -> Result<()> {
        if let Some(w) = self.policy.max_weight {
            if key.partition.weight() > w {
                return Err(Error::TruncationOverflow(format!("{} exceeds weight bound {w}", key.partition)));
            }
        }
        if let Some(l) = self.policy.max_length {
            if key.partition.len() > l {
                return Err(Error::TruncationOverflow(format!("{} exceeds length bound {l}", key.partition)));
            }
        }
        Ok(())
    }
}

/// A|v⟩ with sign-weighted accumulation. Basis terms are expanded in parallel
/// and merged in canonical key order, so the result does not depend on the pool size.
pub fn apply_operator<S: Scalar>(a: &GraphOperator<S>, v: &WeightedStateVector<S>) -> Result<WeightedStateVector<S>> {
    let terms: Vec<(&StateKey, &S)> = v.entries.iter().collect();
    let images: Vec<Vec<(StateKey, S)>> = terms.par_iter().map(|(k, _)| a.act(k)).collect();
    let mut out = WeightedStateVector { entries: BTreeMap::new(), policy: v.policy };
    for ((_, c), imgs) in terms.iter().zip(images) {
        for (key, w) in imgs {
            out.check(&key)?;
            out.add(key, w * (*c).clone());
        }
    }
    out.normalize();
    Ok(out)
}

/// ⟨λ|A^T|ν⟩ at the given level.
pub fn matrix_element<S: Scalar>(
    a: &GraphOperator<S>,
    steps: usize,
    nu: &Partition,
    lambda: &Partition,
    level: i64,
) -> Result<S> {
    let mut v = WeightedStateVector::basis(StateKey::new(nu.clone(), level));
    for _ in 0..steps {
        v = apply_operator(a, &v)?;
    }
    Ok(v.get(&StateKey::new(lambda.clone(), level)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathStep {
    pub from: i64,
    pub to: i64,
    pub state: Partition,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord<S> {
    pub steps: Vec<PathStep>,
    pub weight: S,
    pub sign: i32,
}

impl<S> PathRecord<S> {
    pub fn duration(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnumeration<S> {
    pub records: Vec<PathRecord<S>>,
    pub w_plus: S,
    pub w_minus: S,
}

impl<S: Scalar> PathEnumeration<S> {
    pub fn signed_total(&self) -> S {
        self.w_plus.clone() - self.w_minus.clone()
    }
}

pub const DEFAULT_PATH_BOUND: usize = 8;

fn permutation_parity(labels: &[usize]) -> i32 {
    let mut seen = vec![false; labels.len()];
    let mut parity = 0;
    for start in 0..labels.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = labels[j];
            len += 1;
        }
        parity += len - 1;
    }
    if parity % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Every duration-T path ν → λ. Particles carry labels, and each record's sign
/// is the parity of the final relabeling — computed without the c_ik counter.
pub fn enumerate_paths<S: Scalar>(
    a: &GraphOperator<S>,
    steps: usize,
    nu: &Partition,
    lambda: &Partition,
    level: i64,
    bound: usize,
) -> Result<PathEnumeration<S>> {
    if steps > bound {
        return Err(Error::BruteForceBoundExceeded(format!("T = {steps} > {bound}")));
    }
    let lo = a.window.0.min(a.arcs.keys().map(|&(i, k)| i.min(k)).min().unwrap_or(a.window.0));
    let rows = (nu.len() as i64).max(level - lo + 1).max(0) as usize;
    let start: Vec<(i64, usize)> = explicit_sites(nu, level, rows).into_iter().enumerate().map(|(l, s)| (s, l)).collect();
    let arcs: Vec<((i64, i64), S)> = a.arcs.iter().map(|(k, w)| (*k, w.clone())).collect();

    struct Ctx<'a, S> {
        arcs: &'a [((i64, i64), S)],
        target: &'a Partition,
        level: i64,
        steps: usize,
        out: Vec<PathRecord<S>>,
    }

    fn rec<S: Scalar>(ctx: &mut Ctx<'_, S>, conf: &mut Vec<(i64, usize)>, trail: &mut Vec<PathStep>, w: S) {
        if trail.len() == ctx.steps {
            let sites: Vec<i64> = conf.iter().map(|p| p.0).collect();
            if partition_from_sites(&sites, ctx.level) == *ctx.target {
                let labels: Vec<usize> = conf.iter().map(|p| p.1).collect();
                ctx.out.push(PathRecord { steps: trail.clone(), weight: w, sign: permutation_parity(&labels) });
            }
            return;
        }
        for idx in 0..ctx.arcs.len() {
            let ((i, k), ref aw) = ctx.arcs[idx];
            let Some(pos) = conf.iter().position(|p| p.0 == k) else { continue };
            if conf.iter().any(|p| p.0 == i) {
                continue;
            }
            let aw = aw.clone();
            let saved = conf.clone();
            conf[pos].0 = i;
            conf.sort_unstable_by(|x, y| y.0.cmp(&x.0));
            let sites: Vec<i64> = conf.iter().map(|p| p.0).collect();
            trail.push(PathStep { from: k, to: i, state: partition_from_sites(&sites, ctx.level) });
            rec(ctx, conf, trail, w.clone() * aw);
            trail.pop();
            *conf = saved;
        }
    }

    let mut ctx = Ctx { arcs: &arcs, target: lambda, level, steps, out: Vec::new() };
    rec(&mut ctx, &mut start.clone(), &mut Vec::new(), S::one());
    let mut w_plus = S::zero();
    let mut w_minus = S::zero();
    for r in &ctx.out {
        if r.sign > 0 {
            w_plus = w_plus + r.weight.clone();
        } else {
            w_minus = w_minus + r.weight.clone();
        }
    }
    Ok(PathEnumeration { records: ctx.out, w_plus, w_minus })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub states_checked: usize,
    pub interior_states: usize,
    /// max |coefficient| of (A₋A₊ − A₊A₋ − 1)|λ⟩ over interior states
    pub max_interior_residual: f64,
    pub max_boundary_residual: f64,
    /// residuals computed in exact arithmetic
    pub exact: bool,
}

fn residual_of<S: Scalar>(
    am: &GraphOperator<S>,
    ap: &GraphOperator<S>,
    key: &StateKey,
    norm: &dyn Fn(&S) -> f64,
) -> Result<f64> {
    let v = WeightedStateVector::basis(key.clone());
    let mp = apply_operator(am, &apply_operator(ap, &v)?)?;
    let pm = apply_operator(ap, &apply_operator(am, &v)?)?;
    let diff = mp.sum(&pm.scale(&-S::one())).sum(&v.scale(&-S::one()));
    Ok(diff.entries.values().map(norm).fold(0.0, f64::max))
}

/// Checks [A₋(U), A₊(U)] = 1 on every basis state |λ⟩ (level 0) with |λ| ≤ max_weight.
/// States whose active sites −ℓ−1 … λ₁ sit at least two sites inside the window are interior.
pub fn commutator_check(u: &Potential, window: (i64, i64), max_weight: usize) -> Result<CommutatorReport> {
    let states = crate::partition::partitions_up_to(max_weight);
    let interior = |l: &Partition| -(l.len() as i64) - 1 >= window.0 + 2 && l.part(0) as i64 + 1 <= window.1 - 2;
    let mut rep = CommutatorReport {
        states_checked: states.len(),
        interior_states: 0,
        max_interior_residual: 0.0,
        max_boundary_residual: 0.0,
        exact: u.is_exact(),
    };
    let exact_ops = GraphOperator::a_minus_exact(u, window).zip(GraphOperator::a_plus_exact(u, window));
    let float_ops = (GraphOperator::a_minus(u, window), GraphOperator::a_plus(u, window));
    let w = u.w();
    for l in &states {
        let key = StateKey::new(l.clone(), 0);
        let r = match &exact_ops {
            Some((am, ap)) => residual_of(am, ap, &key, &|c: &Laurent| c.eval(w).abs())?,
            None => residual_of(&float_ops.0, &float_ops.1, &key, &|c: &f64| c.abs())?,
        };
        if interior(l) {
            rep.interior_states += 1;
            rep.max_interior_residual = rep.max_interior_residual.max(r);
        } else {
            rep.max_boundary_residual = rep.max_boundary_residual.max(r);
        }
    }
    Ok(rep)
}
