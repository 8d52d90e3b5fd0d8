//! Determinantal weights: Wick/skew-Schur transitions, Gessel–Viennot
//! binomial determinants, and vicious walkers on the half-line or a ring.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glinf::{matrix_element, GraphOperator};
use crate::layering::growth_weight_at_level;
use crate::numeric::{binomial, det_bigint, det_f64, det_ring, factorial, mat_mul, q_int, Laurent, Matrix, Scalar, Q};
use crate::partition::{partitions_of, Partition};
use crate::potential::Potential;
use crate::report::Number;
use crate::schur::{skew_schur, TimeVector};

fn laurent_number(v: &Laurent, w: f64) -> Number {
    match v.as_rational() {
        Some(q) => Number::Exact(q),
        None => Number::Float(v.eval(w)),
    }
}

fn level0_sites(lambda: &Partition, m: usize) -> Vec<i64> {
    (1..=m).map(|i| lambda.part(i - 1) as i64 - i as i64).collect()
}

/// det(e^{U_{s_i} − U_{s'_j}}/(s'_j − s_i)!) over the m = ℓ(λ') window, with s, s'
/// the level-0 sites of λ and λ'. Exact when the potential allows it.
pub fn wick_transition(lambda_prime: &Partition, lambda: &Partition, u: &Potential) -> Number {
    if let Some(v) = wick_transition_exact(lambda_prime, lambda, u) {
        return laurent_number(&v, u.w());
    }
    let m = lambda_prime.len();
    if !lambda_prime.contains(lambda) {
        return Number::Float(0.0);
    }
    let s = level0_sites(lambda, m);
    let sp = level0_sites(lambda_prime, m);
    let mat: Matrix<f64> = s
        .iter()
        .map(|&si| {
            sp.iter()
                .map(|&sj| {
                    if sj < si {
                        0.0
                    } else {
                        (u.energy(si) - u.energy(sj) - crate::numeric::ln_factorial((sj - si) as u64)).exp()
                    }
                })
                .collect()
        })
        .collect();
    Number::Float(det_f64(&mat).0)
}

pub fn wick_transition_exact(lambda_prime: &Partition, lambda: &Partition, u: &Potential) -> Option<Laurent> {
    if !u.is_exact() {
        return None;
    }
    let m = lambda_prime.len();
    if !lambda_prime.contains(lambda) {
        return Some(Laurent::zero());
    }
    let s = level0_sites(lambda, m);
    let sp = level0_sites(lambda_prime, m);
    let mut mat: Matrix<Laurent> = Vec::with_capacity(m);
    for &si in &s {
        let mut row = Vec::with_capacity(m);
        for &sj in &sp {
            row.push(if sj < si {
                Laurent::zero()
            } else {
                let f = Q::new(BigInt::one(), BigInt::from(factorial((sj - si) as u64)));
                Laurent::constant(f) * u.inv_boltzmann_exact(si)? * u.boltzmann_exact(sj)?
            });
        }
        mat.push(row);
    }
    Some(if m == 0 { Laurent::one() } else { det_ring(&mat) })
}

fn check_decreasing(name: &'static str, v: &[i64]) -> Result<()> {
    if v.windows(2).any(|w| w[0] <= w[1]) || v.iter().any(|&x| x < 0) {
        return Err(Error::param(name, format!("must be strictly decreasing non-negative integers, got {v:?}")));
    }
    Ok(())
}

/// det(C(a_i, b_j)).
pub fn binomial_determinant(a: &[i64], b: &[i64]) -> Result<BigInt> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    check_decreasing("a", a)?;
    check_decreasing("b", b)?;
    if a.is_empty() {
        return Ok(BigInt::one());
    }
    let mat: Matrix<BigInt> = a.iter().map(|&ai| b.iter().map(|&bj| binomial(ai, bj)).collect()).collect();
    Ok(det_bigint(&mat))
}

/// Families of vertex-disjoint paths (0, a_i) → (b_i, b_i) with unit right/down steps,
/// counted by direct enumeration.
pub fn nonintersecting_path_count(a: &[i64], b: &[i64]) -> Result<BigInt> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    check_decreasing("a", a)?;
    check_decreasing("b", b)?;
    if a.len() > 4 || a.first().is_some_and(|&a1| a1 > 12) {
        return Err(Error::BruteForceBoundExceeded(format!("need k ≤ 4 and a₁ ≤ 12, got k={}, a={a:?}", a.len())));
    }
    fn paths(k: usize, a: &[i64], b: &[i64], used: &mut BTreeSet<(i64, i64)>) -> u64 {
        if k == a.len() {
            return 1;
        }
        let mut total = 0;
        walk((0, a[k]), k, a, b, used, &mut total);
        total
    }
    fn walk(p: (i64, i64), k: usize, a: &[i64], b: &[i64], used: &mut BTreeSet<(i64, i64)>, total: &mut u64) {
        let (x, y) = p;
        let target = (b[k], b[k]);
        if x > target.0 || y < target.1 || used.contains(&p) {
            return;
        }
        used.insert(p);
        if p == target {
            *total += paths(k + 1, a, b, used);
        } else {
            walk((x + 1, y), k, a, b, used, total);
            walk((x, y - 1), k, a, b, used, total);
        }
        used.remove(&p);
    }
    Ok(BigInt::from(paths(0, a, b, &mut BTreeSet::new())))
}

/// The two sides of det(C(h'_i, h_j)) = ratio · s_{λ'/λ}(t_∞), h = λ_i − i + n.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinomialSkewCheck {
    pub n: usize,
    #[serde(with = "crate::report::bigstr")]
    pub determinant: BigInt,
    #[serde(with = "crate::report::qstr")]
    pub skew: Q,
    /// (n)_λ = ∏_{(i,j)∈λ} (n + j − i), the content product.
    #[serde(with = "crate::report::bigstr")]
    pub content_lambda: BigInt,
    #[serde(with = "crate::report::bigstr")]
    pub content_lambda_prime: BigInt,
    /// determinant = (n)_λ/(n)_{λ'}·skew, as printed.
    pub printed_ratio_holds: bool,
    /// determinant = (n)_{λ'}/(n)_λ·skew.
    pub inverted_ratio_holds: bool,
}

fn content_product(lambda: &Partition, n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..lambda.len() {
        for j in 0..lambda.part(i) {
            acc *= n as i64 + j as i64 - i as i64;
        }
    }
    acc
}

pub fn binomial_skew_check(lambda_prime: &Partition, lambda: &Partition, n: usize) -> Result<BinomialSkewCheck> {
    if lambda_prime.len() > n || lambda.len() > n {
        return Err(Error::WindowTooSmall { window: n as i64, needed: lambda_prime.len().max(lambda.len()) as i64 });
    }
    let h = |l: &Partition| -> Vec<i64> { (1..=n).map(|i| l.part(i - 1) as i64 - i as i64 + n as i64).collect() };
    let determinant = if n == 0 { BigInt::one() } else { binomial_determinant(&h(lambda_prime), &h(lambda))? };
    let skew: Q = skew_schur(lambda_prime, lambda, &TimeVector::t_infinity());
    let cl = content_product(lambda, n);
    let clp = content_product(lambda_prime, n);
    let det_q = Q::from(determinant.clone());
    let printed_ratio_holds = !clp.is_zero() && det_q == Q::new(cl.clone(), clp.clone()) * skew.clone();
    let inverted_ratio_holds = !cl.is_zero() && det_q == Q::new(clp.clone(), cl.clone()) * skew.clone();
    Ok(BinomialSkewCheck { n, determinant, skew, content_lambda: cl, content_lambda_prime: clp, printed_ratio_holds, inverted_ratio_holds })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GvCheck {
    /// Σ_{λ ⊆ λ', |λ'| ≤ cap} s_{λ'}(x)·det(C(h'_i, h_j))·s_λ(y).
    pub sum_form: f64,
    /// det(1/(1 − x_i(1 + y_j)))/(Δ(x)Δ(y)).
    pub tau_form: f64,
    pub diff: f64,
    /// Partial sums by |λ'| = 0..=cap.
    pub partial_sums: Vec<f64>,
}

fn vandermonde(x: &[f64]) -> f64 {
    let mut v = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            v *= x[i] - x[j];
        }
    }
    v
}

/// Sum and tau forms of the Gessel–Viennot generating function on k-particle windows.
pub fn gv_generating_check(k: usize, x: &[f64], y: &[f64], cap: usize) -> Result<GvCheck> {
    if x.len() != k {
        return Err(Error::LengthMismatch { left: x.len(), right: k });
    }
    if y.len() != k {
        return Err(Error::LengthMismatch { left: y.len(), right: k });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("x", "variables must be finite"));
    }
    let dx = vandermonde(x);
    let dy = vandermonde(y);
    if k > 1 && (dx == 0.0 || dy == 0.0) {
        return Err(Error::param("x", "the tau form needs pairwise distinct variables"));
    }
    let h = |l: &Partition| -> Vec<i64> { (1..=k).map(|i| l.part(i - 1) as i64 - i as i64 + k as i64).collect() };
    let mut partial_sums = Vec::with_capacity(cap + 1);
    let mut total = 0.0;
    for w in 0..=cap {
        for lp in partitions_of(w, w, k) {
            let sx = crate::schur::schur_in_variables(&lp, x);
            let hp = h(&lp);
            for lw in 0..=w {
                for l in partitions_of(lw, lw, k) {
                    if !lp.contains(&l) {
                        continue;
                    }
                    let d = binomial_determinant(&hp, &h(&l))?;
                    if d.is_zero() {
                        continue;
                    }
                    total += sx * d.to_f64().unwrap_or(f64::INFINITY) * crate::schur::schur_in_variables(&l, y);
                }
            }
        }
        partial_sums.push(total);
    }
    let mat: Matrix<f64> = x.iter().map(|xi| y.iter().map(|yj| 1.0 / (1.0 - xi * (1.0 + yj))).collect()).collect();
    let tau_form = if k == 0 { 1.0 } else { det_f64(&mat).0 / (dx * dy) };
    Ok(GvCheck { sum_form: total, tau_form, diff: (total - tau_form).abs(), partial_sums })
}

/// ⟨0|f̄_i e^A f_j|0⟩ for A = Σ_i i·f_i f̄_{i−1}, by the factorial formula and by
/// (i−j)-fold application of A through the operator engine.
pub fn gv_single_particle(i: i64, j: i64) -> Result<(Q, Q)> {
    if j < 0 || i < j {
        return Err(Error::param("i", format!("need 0 ≤ j ≤ i, got i={i}, j={j}")));
    }
    let closed = Q::from(binomial(i, j));
    let mut a = GraphOperator::empty((0, i));
    for s in 1..=i {
        a.add_arc(s - 1, s, q_int(s))?;
    }
    // a single particle at site s sits on top of the level-1 sea at sites ≤ −1
    let steps = (i - j) as usize;
    let raw = matrix_element(&a, steps, &Partition::new(vec![j as usize])?, &Partition::new(vec![i as usize])?, 1)?;
    let engine = raw / Q::from(BigInt::from(factorial(steps as u64)));
    Ok((closed, engine))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    HalfLine,
    /// Sites 0..=n with the seam 0 ↔ n.
    Ring(usize),
}

/// Single-particle one-step propagator K(a, b) (from b to a) on sites 0..=max_site.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub max_site: usize,
    pub entries: Matrix<f64>,
    /// Exact entries as monomials in w, when both potentials allow it.
    pub exact: Option<Matrix<Laurent>>,
    pub w: f64,
}

impl KernelMatrix {
    pub fn get(&self, a: i64, b: i64) -> f64 {
        if a < 0 || b < 0 || a as usize > self.max_site || b as usize > self.max_site {
            return 0.0;
        }
        self.entries[a as usize][b as usize]
    }

    pub fn size(&self) -> usize {
        self.max_site + 1
    }
}

fn exact_pair(from: &Potential, to: &Potential) -> bool {
    from.is_exact() && to.is_exact() && from.w() == to.w()
}

/// K(i±1, i) = e^{−U_to(i±1) + U_from(i)}, plus K(i, i) when `stay` is set.
pub fn vicious_step_kernel(u_from: &Potential, u_to: &Potential, geometry: &Geometry, max_site: usize, stay: bool) -> Result<KernelMatrix> {
    let max_site = match geometry {
        Geometry::HalfLine => max_site,
        Geometry::Ring(n) if *n < 2 => return Err(Error::param("ring", format!("ring needs n ≥ 2, got {n}"))),
        Geometry::Ring(n) => *n,
    };
    let size = max_site + 1;
    let mut moves: Vec<(usize, usize)> = Vec::new();
    for b in 0..size {
        if b + 1 < size {
            moves.push((b + 1, b));
        }
        if b >= 1 {
            moves.push((b - 1, b));
        }
        if stay {
            moves.push((b, b));
        }
    }
    if let Geometry::Ring(n) = geometry {
        moves.push((0, *n));
        moves.push((*n, 0));
    }
    let mut entries = vec![vec![0.0; size]; size];
    for &(a, b) in &moves {
        entries[a][b] += (u_from.energy(b as i64) - u_to.energy(a as i64)).exp();
    }
    let exact = if exact_pair(u_from, u_to) {
        let mut m = vec![vec![Laurent::zero(); size]; size];
        for &(a, b) in &moves {
            let v = u_to.boltzmann_exact(a as i64).expect("exact") * u_from.inv_boltzmann_exact(b as i64).expect("exact");
            m[a][b] = m[a][b].clone() + v;
        }
        Some(m)
    } else {
        None
    };
    Ok(KernelMatrix { max_site, entries, exact, w: u_to.w() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub walkers: usize,
    /// U^{(0)}, …, U^{(T)}: one potential per time slice, so T = len − 1 steps.
    pub potentials: Vec<Potential>,
    pub geometry: Geometry,
    #[serde(default)]
    pub stay: bool,
}

impl ChainSpec {
    pub fn uniform(walkers: usize, steps: usize, u: Potential, geometry: Geometry) -> Self {
        ChainSpec { walkers, potentials: vec![u; steps + 1], geometry, stay: false }
    }

    pub fn steps(&self) -> usize {
        self.potentials.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.walkers == 0 {
            return Err(Error::param("walkers", "need at least one walker"));
        }
        if self.potentials.is_empty() {
            return Err(Error::param("potentials", "need the time-0 potential"));
        }
        self.potentials.iter().try_for_each(Potential::validate)
    }

    fn exact(&self) -> bool {
        let w = self.potentials[0].w();
        self.potentials.iter().all(|u| u.is_exact() && u.w() == w)
    }

    /// Largest site used: auto-sized to max(h, h') + T on the half-line.
    fn max_site(&self, start: &[i64], end: &[i64]) -> Result<usize> {
        let top = start.iter().chain(end).copied().max().unwrap_or(0);
        match self.geometry {
            Geometry::HalfLine => Ok(top as usize + self.steps()),
            Geometry::Ring(n) => {
                if top > n as i64 {
                    return Err(Error::WindowTooSmall { window: n as i64, needed: top });
                }
                Ok(n)
            }
        }
    }

    pub fn kernels(&self, max_site: usize) -> Result<Vec<KernelMatrix>> {
        self.potentials
            .windows(2)
            .map(|p| vicious_step_kernel(&p[0], &p[1], &self.geometry, max_site, self.stay))
            .collect()
    }

    /// h_i = λ_i − i + N.
    pub fn sites_of(&self, lambda: &Partition) -> Result<Vec<i64>> {
        if lambda.len() > self.walkers {
            return Err(Error::WindowTooSmall { window: self.walkers as i64, needed: lambda.len() as i64 });
        }
        Ok((1..=self.walkers).map(|i| lambda.part(i - 1) as i64 - i as i64 + self.walkers as i64).collect())
    }
}

fn check_sites(chain: &ChainSpec, start: &[i64], end: &[i64]) -> Result<()> {
    chain.validate()?;
    for (name, v) in [("start", start), ("end", end)] {
        if v.len() != chain.walkers {
            return Err(Error::LengthMismatch { left: v.len(), right: chain.walkers });
        }
        check_decreasing(name, v)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainWeight {
    pub weight: Number,
    /// Condition number of the float determinant (absent in exact mode).
    pub condition: Option<f64>,
}

fn compose<S: Scalar>(ks: &[Matrix<S>], size: usize) -> Matrix<S> {
    let mut g: Matrix<S> = (0..size).map(|a| (0..size).map(|b| if a == b { S::one() } else { S::zero() }).collect()).collect();
    for k in ks {
        g = mat_mul(k, &g);
    }
    g
}

/// det(G[end_i, start_j]) with G = K_T ⋯ K_1, sites given as strictly decreasing h-coordinates.
pub fn chain_weight_sites(start: &[i64], end: &[i64], chain: &ChainSpec) -> Result<ChainWeight> {
    check_sites(chain, start, end)?;
    let max_site = chain.max_site(start, end)?;
    let kernels = chain.kernels(max_site)?;
    let size = max_site + 1;
    if chain.exact() {
        let ks: Vec<Matrix<Laurent>> = kernels.iter().map(|k| k.exact.clone().expect("exact chain")).collect();
        let g = compose(&ks, size);
        let sub: Matrix<Laurent> = end.iter().map(|&a| start.iter().map(|&b| g[a as usize][b as usize].clone()).collect()).collect();
        let det = det_ring(&sub);
        return Ok(ChainWeight { weight: laurent_number(&det, chain.potentials[0].w()), condition: None });
    }
    let ks: Vec<Matrix<f64>> = kernels.iter().map(|k| k.entries.clone()).collect();
    let g = compose(&ks, size);
    let sub: Matrix<f64> = end.iter().map(|&a| start.iter().map(|&b| g[a as usize][b as usize]).collect()).collect();
    let (det, cond) = det_f64(&sub);
    Ok(ChainWeight { weight: Number::Float(det), condition: Some(cond) })
}

/// Chain weight from ν to λ, both read as h-coordinates h_i = λ_i − i + N.
pub fn chain_weight(nu: &Partition, lambda: &Partition, chain: &ChainSpec) -> Result<ChainWeight> {
    chain_weight_sites(&chain.sites_of(nu)?, &chain.sites_of(lambda)?, chain)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkerCount {
    /// Weight of walker families ending in an even relabelling.
    pub w_plus: Number,
    /// Weight of families ending in an odd relabelling (possible through swaps or the ring seam).
    pub w_minus: Number,
}

impl WalkerCount {
    pub fn signed(&self) -> f64 {
        self.w_plus.to_f64() - self.w_minus.to_f64()
    }
}

fn permutation_sign(p: &[usize]) -> i32 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

fn brute_force<S: Scalar>(start: &[i64], end: &[i64], kernels: &[Matrix<S>]) -> (S, S) {
    let size = kernels.first().map_or(0, Vec::len);
    let mut states: HashMap<Vec<usize>, S> = HashMap::new();
    states.insert(start.iter().map(|&s| s as usize).collect(), S::one());
    for k in kernels {
        let mut next: HashMap<Vec<usize>, S> = HashMap::new();
        for (pos, w) in &states {
            // each walker picks any target with a non-zero kernel entry; targets must be distinct
            let mut choice = vec![0usize; pos.len()];
            fn rec<S: Scalar>(
                i: usize,
                pos: &[usize],
                k: &Matrix<S>,
                size: usize,
                acc: S,
                choice: &mut Vec<usize>,
                next: &mut HashMap<Vec<usize>, S>,
            ) {
                if i == pos.len() {
                    let slot = next.entry(choice.clone()).or_insert_with(S::zero);
                    *slot = slot.clone() + acc;
                    return;
                }
                for a in 0..size {
                    let e = &k[a][pos[i]];
                    if e.is_zero() || choice[..i].contains(&a) {
                        continue;
                    }
                    choice[i] = a;
                    rec(i + 1, pos, k, size, acc.clone() * e.clone(), choice, next);
                }
            }
            rec(0, pos, k, size, w.clone(), &mut choice, &mut next);
        }
        states = next;
    }
    let mut plus = S::zero();
    let mut minus = S::zero();
    for (pos, w) in states {
        let perm: Option<Vec<usize>> = pos.iter().map(|&p| end.iter().position(|&e| e as usize == p)).collect();
        if let Some(perm) = perm {
            if permutation_sign(&perm) > 0 {
                plus = plus + w;
            } else {
                minus = minus + w;
            }
        }
    }
    (plus, minus)
}

/// Labelled enumeration of N walkers moving simultaneously on distinct sites,
/// split by the parity of the final relabelling.
pub fn brute_force_walkers(start: &[i64], end: &[i64], chain: &ChainSpec) -> Result<WalkerCount> {
    check_sites(chain, start, end)?;
    let max_site = chain.max_site(start, end)?;
    if chain.walkers > 4 || max_site > 40 {
        return Err(Error::BruteForceBoundExceeded(format!(
            "need N ≤ 4 walkers and at most 41 sites, got N={}, sites={}",
            chain.walkers,
            max_site + 1
        )));
    }
    let kernels = chain.kernels(max_site)?;
    if chain.exact() {
        let ks: Vec<Matrix<Laurent>> = kernels.iter().map(|k| k.exact.clone().expect("exact chain")).collect();
        let (p, m) = brute_force(start, end, &ks);
        let w = chain.potentials[0].w();
        return Ok(WalkerCount { w_plus: laurent_number(&p, w), w_minus: laurent_number(&m, w) });
    }
    let ks: Vec<Matrix<f64>> = kernels.iter().map(|k| k.entries.clone()).collect();
    let (p, m) = brute_force(start, end, &ks);
    Ok(WalkerCount { w_plus: Number::Float(p), w_minus: Number::Float(m) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    Contain,
    Avoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub time: usize,
    pub mode: ConstraintMode,
    pub sites: Vec<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, time: usize, mode: ConstraintMode, sites: Vec<i64>) -> Self {
        self.constraints.push(Constraint { time, mode, sites });
        self
    }

    fn validate(&self, steps: usize) -> Result<()> {
        for c in &self.constraints {
            if c.time == 0 || c.time >= steps {
                return Err(Error::param("constraint", format!("time {} outside 1..{}", c.time, steps.saturating_sub(1))));
            }
            check_decreasing("pinned sites", &c.sites)?;
        }
        Ok(())
    }

    /// Whether the configuration at `time` passes every constraint placed there.
    fn admits(&self, time: usize, config: &[i64]) -> bool {
        self.constraints.iter().filter(|c| c.time == time).all(|c| {
            let contains = c.sites.iter().all(|s| config.contains(s));
            match c.mode {
                ConstraintMode::Contain => contains,
                ConstraintMode::Avoid => !contains,
            }
        })
    }
}

fn subset_propagate<S: Scalar>(start: &[i64], end: &[i64], kernels: &[Matrix<S>], constraints: &ConstraintSet) -> S {
    let size = kernels.first().map_or(0, Vec::len);
    let mut cur: BTreeMap<Vec<i64>, S> = BTreeMap::new();
    cur.insert(start.to_vec(), S::one());
    for (t, k) in kernels.iter().enumerate() {
        let mut next: BTreeMap<Vec<i64>, S> = BTreeMap::new();
        for (s, w) in &cur {
            // candidate targets: every walker takes some non-zero kernel entry
            let mut targets: BTreeSet<Vec<i64>> = BTreeSet::new();
            fn rec<S: Scalar>(i: usize, s: &[i64], k: &Matrix<S>, size: usize, cur: &mut Vec<i64>, out: &mut BTreeSet<Vec<i64>>) {
                if i == s.len() {
                    let mut v = cur.clone();
                    v.sort_unstable_by(|a, b| b.cmp(a));
                    v.dedup();
                    if v.len() == s.len() {
                        out.insert(v);
                    }
                    return;
                }
                for a in 0..size {
                    if !k[a][s[i] as usize].is_zero() {
                        cur.push(a as i64);
                        rec(i + 1, s, k, size, cur, out);
                        cur.pop();
                    }
                }
            }
            rec(0, s, k, size, &mut Vec::new(), &mut targets);
            for sp in targets {
                let sub: Matrix<S> = sp.iter().map(|&a| s.iter().map(|&b| k[a as usize][b as usize].clone()).collect()).collect();
                let d = det_ring(&sub);
                if d.is_zero() {
                    continue;
                }
                let slot = next.entry(sp).or_insert_with(S::zero);
                *slot = slot.clone() + w.clone() * d;
            }
        }
        let time = t + 1;
        next.retain(|config, v| !v.is_zero() && constraints.admits(time, config));
        cur = next;
    }
    cur.get(end).cloned().unwrap_or_else(S::zero)
}

/// Chain weight summed over intermediate N-subsets, keeping only configurations that
/// pass the constraints (contain: all pinned sites occupied; avoid: not all of them).
pub fn constrained_chain_weight_sites(start: &[i64], end: &[i64], chain: &ChainSpec, constraints: &ConstraintSet) -> Result<Number> {
    check_sites(chain, start, end)?;
    constraints.validate(chain.steps())?;
    let max_site = chain.max_site(start, end)?;
    let kernels = chain.kernels(max_site)?;
    if chain.exact() {
        let ks: Vec<Matrix<Laurent>> = kernels.iter().map(|k| k.exact.clone().expect("exact chain")).collect();
        return Ok(laurent_number(&subset_propagate(start, end, &ks, constraints), chain.potentials[0].w()));
    }
    let ks: Vec<Matrix<f64>> = kernels.iter().map(|k| k.entries.clone()).collect();
    Ok(Number::Float(subset_propagate(start, end, &ks, constraints)))
}

pub fn constrained_chain_weight(nu: &Partition, lambda: &Partition, chain: &ChainSpec, constraints: &ConstraintSet) -> Result<Number> {
    constrained_chain_weight_sites(&chain.sites_of(nu)?, &chain.sites_of(lambda)?, chain, constraints)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussKernelCheck {
    pub layering: f64,
    pub determinant: f64,
    pub relative_diff: f64,
}

/// Growth weight with U_i = c·i²/2 and x_j = e^{c h'_j} at level T = len(h'), against
/// e^{cΣ(T−i)²/2}·e^{cΣh'²/2}·det(e^{−c(h_i − h'_j)²/2})/Δ(x).
pub fn gauss_kernel_check(h_prime: &[i64], lambda: &Partition, c: f64) -> Result<GaussKernelCheck> {
    check_decreasing("h'", h_prime)?;
    let t = h_prime.len();
    if t == 0 {
        return Err(Error::param("h'", "need at least one coordinate"));
    }
    let u = Potential::gauss(c);
    u.validate()?;
    let x: Vec<f64> = h_prime.iter().map(|&h| (c * h as f64).exp()).collect();
    let layering = growth_weight_at_level(lambda, &x, &u, t as i64);
    let determinant = if lambda.len() > t {
        0.0
    } else {
        let h: Vec<i64> = (1..=t).map(|i| lambda.part(i - 1) as i64 - i as i64 + t as i64).collect();
        let mat: Matrix<f64> = h
            .iter()
            .map(|&hi| h_prime.iter().map(|&hj| (-c * ((hi - hj) * (hi - hj)) as f64 / 2.0).exp()).collect())
            .collect();
        let pre: f64 = (1..=t).map(|i| ((t - i) * (t - i)) as f64).sum::<f64>() + h_prime.iter().map(|&h| (h * h) as f64).sum::<f64>();
        (c * pre / 2.0).exp() * det_f64(&mat).0 / vandermonde(&x)
    };
    let scale = layering.abs().max(determinant.abs());
    let relative_diff = if scale == 0.0 { 0.0 } else { (layering - determinant).abs() / scale };
    Ok(GaussKernelCheck { layering, determinant, relative_diff })
}
