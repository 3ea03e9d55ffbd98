//! Numerical search for small defects inside a finite ambient window:
//! coordinate swap search, frame descent on the Stiefel manifold, reducing
//! subspace search and a heuristic classification.
//!
//! Everything here produces upper bounds on the infimum of φ over projections
//! supported in the ambient window, never lower bounds.

use std::collections::{BTreeSet, HashMap, VecDeque};

use nalgebra::{ComplexField, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{word_ball_size, BasisIndex, IndexSort};
use crate::defect::hs_defect;
use crate::error::{Error, Result};
use crate::linalg::{cmul, cmul_adj, hermitian_eigen, qf, random_frame, SparseRows};
use crate::opmodel::Operator;
use crate::projlib::{Frame, Projection};
use crate::scalar::{lit, to_f64, Real, C};
use crate::schemes::ExtensionOracle;

pub const CAVEAT: &str = "numerical evidence inside a finite ambient window; not a proof";

/// How the defects of several operators are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// max over members of φ(T_i,P)
    #[default]
    Max,
    /// √(Σ_i φ(T_i,P)²)
    SumSquares,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub restarts: usize,
    pub iters: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { restarts: 8, iters: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult<T: Real> {
    pub rank: usize,
    /// Upper bound on the infimum of the objective over rank-`rank`
    /// projections inside the ambient window.
    pub best_value: T,
    pub best_projection: Projection<T>,
    pub restarts: usize,
    pub seed: u64,
    pub converged: bool,
}

/// Number of canonical basis vectors in the ambient of the given depth:
/// words of length at most `depth − 1` for word sorts, so that images under
/// the generators stay within depth `depth`.
pub fn ambient_for_depth(sort: &IndexSort, depth: u32) -> Result<usize> {
    match sort {
        IndexSort::Word(n) => {
            if depth == 0 {
                return Err(Error::validation("ambient_depth", "must be at least 1"));
            }
            Ok(word_ball_size(*n, depth - 1))
        }
        _ => Err(Error::Unsupported(format!("ambient depth on sort {sort}"))),
    }
}

fn common_sort<T: Real>(ops: &[Operator<T>]) -> Result<IndexSort> {
    let first = ops.first().ok_or_else(|| Error::Precondition("empty operator set".into()))?;
    let sort = first.sort();
    for op in &ops[1..] {
        let s = op.sort();
        if s != sort {
            return Err(Error::SortMismatch { expected: sort.to_string(), found: s.to_string() });
        }
    }
    Ok(sort)
}

fn combine<T: Real>(objective: Objective, parts: impl Iterator<Item = T>) -> T {
    match objective {
        Objective::Max => parts.fold(T::zero(), |a, b| a.max(b)),
        Objective::SumSquares => parts.fold(T::zero(), |a, b| a + b),
    }
}

/// Exact objective value of a projection (as a defect, not squared).
pub fn objective_value<T: Real>(ops: &[Operator<T>], p: &Projection<T>, objective: Objective) -> Result<T> {
    let mut parts = Vec::with_capacity(ops.len());
    for op in ops {
        let v = hs_defect(op, p)?.value;
        parts.push(v * v);
    }
    Ok(combine(objective, parts.into_iter()).sqrt())
}

/// Squared boundary weights of each window position, for fast evaluation of
/// coordinate defects of subsets of the window.
struct CoordModel<T: Real> {
    col: Vec<Vec<(usize, T)>>,
    row: Vec<Vec<(usize, T)>>,
}

struct CoordModels<T: Real> {
    models: Vec<CoordModel<T>>,
    ids: usize,
}

impl<T: Real> CoordModels<T> {
    fn new(ops: &[Operator<T>], window: &[BasisIndex]) -> Self {
        let mut ids: HashMap<BasisIndex, usize> =
            window.iter().enumerate().map(|(p, i)| (i.clone(), p)).collect();
        let mut id_of = |idx: BasisIndex| -> usize {
            let next = ids.len();
            *ids.entry(idx).or_insert(next)
        };
        let mut models = Vec::with_capacity(ops.len());
        for op in ops {
            let mut col = Vec::with_capacity(window.len());
            let mut row = Vec::with_capacity(window.len());
            for j in window {
                col.push(op.col(j).into_iter().map(|(i, v)| (id_of(i), v.modulus_squared())).collect());
                row.push(op.row_of(j).into_iter().map(|(k, v)| (id_of(k), v.modulus_squared())).collect());
            }
            models.push(CoordModel { col, row });
        }
        let n = ids.len();
        CoordModels { models, ids: n }
    }

    fn value(&self, set: &[usize], member: &[bool], objective: Objective) -> T {
        let r = lit::<T>(set.len() as f64);
        let parts = self.models.iter().map(|m| {
            let mut acc = T::zero();
            for &p in set {
                for &(id, w) in m.col[p].iter().chain(m.row[p].iter()) {
                    if !member[id] {
                        acc += w;
                    }
                }
            }
            acc / r
        });
        combine(objective, parts).sqrt()
    }
}

struct SwapOutcome {
    set: Vec<usize>,
    converged: bool,
}

/// Best-improvement swap search from `start` (positions into `window`,
/// restricted to `allowed`). Ties go to the lexicographically smallest label set.
fn swap_search<T: Real>(
    models: &CoordModels<T>,
    window: &[BasisIndex],
    allowed: &[usize],
    start: Vec<usize>,
    passes: usize,
    objective: Objective,
) -> SwapOutcome {
    let mut member = vec![false; models.ids];
    let mut set = start;
    for &p in &set {
        member[p] = true;
    }
    let mut value = models.value(&set, &member, objective);
    let labels = |s: &[usize]| -> BTreeSet<BasisIndex> { s.iter().map(|&p| window[p].clone()).collect() };
    let mut converged = false;
    for _ in 0..passes {
        let threshold = value - value * lit(1e-12);
        let mut best: Option<(T, usize, usize)> = None;
        for (slot, &out) in set.iter().enumerate() {
            for &inn in allowed {
                if member[inn] {
                    continue;
                }
                let mut trial = set.clone();
                trial[slot] = inn;
                member[out] = false;
                member[inn] = true;
                let v = models.value(&trial, &member, objective);
                member[inn] = false;
                member[out] = true;
                if v >= threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bv, bs, bi)) => {
                        if v < bv {
                            true
                        } else if v == bv {
                            let mut cur = set.clone();
                            cur[bs] = bi;
                            labels(&trial) < labels(&cur)
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((v, slot, inn));
                }
            }
        }
        match best {
            Some((v, slot, inn)) => {
                member[set[slot]] = false;
                member[inn] = true;
                set[slot] = inn;
                value = v;
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    set.sort_unstable();
    SwapOutcome { set, converged }
}

/// Sparse model of one operator on a window `A`: `M = (T*T)_AA + (TT*)_AA`
/// and the compression `T_AA`. For `P = VV*` supported in `A`,
/// ‖[T,P]‖₂² = Re tr(V*MV) − 2‖V*T_AA V‖₂².
pub struct FrameModel<T: Real> {
    m: SparseRows<T>,
    taa: SparseRows<T>,
}

impl<T: Real> FrameModel<T> {
    pub fn new(op: &Operator<T>, window: &[BasisIndex]) -> Self {
        let a = window.len();
        let pos: HashMap<&BasisIndex, usize> = window.iter().enumerate().map(|(p, i)| (i, p)).collect();
        let mut taa = SparseRows::new(a, a);
        let mut m = SparseRows::new(a, a);
        let mut by_row: HashMap<BasisIndex, Vec<(usize, C<T>)>> = HashMap::new();
        let mut by_col: HashMap<BasisIndex, Vec<(usize, C<T>)>> = HashMap::new();
        for (p, j) in window.iter().enumerate() {
            for (i, v) in op.col(j) {
                if let Some(&q) = pos.get(&i) {
                    taa.add(q, p, v);
                }
                by_row.entry(i).or_default().push((p, v));
            }
            for (k, v) in op.row_of(j) {
                by_col.entry(k).or_default().push((p, v));
            }
        }
        // (T*T)_{ab} = Σ_i conj(T_ia) T_ib ; (TT*)_{ab} = Σ_k T_ak conj(T_bk)
        let mut rows: Vec<_> = by_row.into_iter().collect();
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        for (_, list) in &rows {
            for &(a_, va) in list {
                for &(b_, vb) in list {
                    m.add(a_, b_, va.conj() * vb);
                }
            }
        }
        let mut cols: Vec<_> = by_col.into_iter().collect();
        cols.sort_by(|x, y| x.0.cmp(&y.0));
        for (_, list) in &cols {
            for &(a_, va) in list {
                for &(b_, vb) in list {
                    m.add(a_, b_, va * vb.conj());
                }
            }
        }
        FrameModel { m, taa }
    }

    /// ‖[T,VV*]‖₂² and its gradient with respect to conj(V).
    fn value_grad(&self, v: &DMatrix<C<T>>) -> (T, DMatrix<C<T>>) {
        let mv = self.m.mul_dense(v);
        let tv = self.taa.mul_dense(v);
        let tsv = self.taa.adjoint_mul_dense(v);
        let b = cmul_adj(v, &tv);
        let quad = v.zip_fold(&mv, T::zero(), |acc, x, y| acc + (x.conj() * y).re);
        let value = quad - b.norm_squared() * lit(2.0);
        let grad = mv - (cmul(&tv, &b.adjoint()) + cmul(&tsv, &b)) * C::new(lit(2.0), T::zero());
        (value.max(T::zero()), grad)
    }

    fn value(&self, v: &DMatrix<C<T>>) -> T {
        let mv = self.m.mul_dense(v);
        let b = cmul_adj(v, &self.taa.mul_dense(v));
        let quad = v.zip_fold(&mv, T::zero(), |acc, x, y| acc + (x.conj() * y).re);
        (quad - b.norm_squared() * lit(2.0)).max(T::zero())
    }
}

/// Objective values along one descent run on the squared scale ‖[T,P]‖₂²/rank,
/// with a maximum over several operators replaced by its power mean.
#[derive(Clone, Debug)]
pub struct DescentTrace<T: Real> {
    pub values: Vec<T>,
    pub frame: DMatrix<C<T>>,
    pub converged: bool,
}

/// Exponent of the power mean that smooths the maximum during descent.
const SMOOTH_MAX_POWER: f64 = 8.0;

/// Smooth surrogate of the objective on squared defects: the sum for
/// `SumSquares`, the power mean (Σ f_k^p)^(1/p) for `Max`. It equals the
/// maximum for a single operator and is within a factor n^(1/p) otherwise.
fn smooth_combine<T: Real>(objective: Objective, parts: &[T]) -> (T, Vec<T>) {
    match objective {
        Objective::SumSquares => (parts.iter().fold(T::zero(), |a, b| a + *b), vec![T::one(); parts.len()]),
        Objective::Max => {
            let top = parts.iter().fold(T::zero(), |a, b| a.max(*b));
            if parts.len() == 1 || top <= T::zero() {
                let w = parts.iter().map(|f| if *f == top { T::one() } else { T::zero() }).collect();
                return (top, w);
            }
            let p = lit::<T>(SMOOTH_MAX_POWER);
            let sum = parts.iter().fold(T::zero(), |a, f| a + (*f / top).powf(p));
            let value = top * sum.powf(p.recip());
            let w = parts.iter().map(|f| (*f / value).powf(p - T::one())).collect();
            (value, w)
        }
    }
}

fn frame_objective<T: Real>(models: &[FrameModel<T>], v: &DMatrix<C<T>>, objective: Objective) -> T {
    let r = lit::<T>(v.ncols() as f64);
    let parts: Vec<T> = models.iter().map(|m| m.value(v) / r).collect();
    smooth_combine(objective, &parts).0
}

fn frame_objective_grad<T: Real>(
    models: &[FrameModel<T>],
    v: &DMatrix<C<T>>,
    objective: Objective,
) -> (T, DMatrix<C<T>>) {
    let r = lit::<T>(v.ncols() as f64);
    let (parts, grads): (Vec<T>, Vec<DMatrix<C<T>>>) = models.iter().map(|m| m.value_grad(v)).unzip();
    let parts: Vec<T> = parts.into_iter().map(|f| f / r).collect();
    let (f, weights) = smooth_combine(objective, &parts);
    let mut g = DMatrix::zeros(v.nrows(), v.ncols());
    for (gk, w) in grads.iter().zip(weights) {
        if w > T::zero() {
            g += gk * C::new(w / r, T::zero());
        }
    }
    (f, g)
}

/// Riemannian descent from `v0` with a polar retraction and a backtracking
/// (Armijo) line search halving from step 1. Stops when the relative
/// improvement drops below 1e-10 or after `iters` accepted steps.
pub fn frame_descent<T: Real>(
    models: &[FrameModel<T>],
    v0: DMatrix<C<T>>,
    iters: usize,
    objective: Objective,
) -> DescentTrace<T> {
    let mut v = qf(v0);
    let (mut f, mut g) = frame_objective_grad(models, &v, objective);
    let mut values = vec![f];
    let mut converged = false;
    let tiny = T::default_epsilon() * lit(16.0);
    let min_step = lit::<T>(1e-10);
    let armijo = lit::<T>(1e-4);
    for _ in 0..iters {
        let xi = &g - cmul(&v, &cmul_adj(&v, &g));
        let xi_sq = xi.norm_squared();
        if xi_sq <= tiny * tiny || f <= tiny {
            converged = true;
            break;
        }
        // xi is orthogonal to the frame, so (V - t xi) has Gram matrix
        // I + t^2 xi* xi and the polar factor needs one small eigensolve.
        let (lams, u) = hermitian_eigen(cmul_adj(&xi, &xi));
        let u_adj = u.adjoint();
        let mut t = T::one();
        let mut accepted = None;
        while t >= min_step {
            let mut scaled = u.clone();
            for (c, lam) in lams.iter().enumerate() {
                let w = (T::one() + t * t * lam.max(T::zero())).sqrt().recip();
                scaled.column_mut(c).scale_mut(w);
            }
            let cand = cmul(&(&v - &xi * C::new(t, T::zero())), &(&scaled * &u_adj));
            let fc = frame_objective(models, &cand, objective);
            if fc <= f - armijo * t * xi_sq {
                accepted = Some((cand, fc));
                break;
            }
            t *= lit(0.5);
        }
        let Some((cand, fc)) = accepted else {
            converged = true;
            break;
        };
        let gain = f - fc;
        v = cand;
        values.push(fc);
        if gain < lit::<T>(1e-10) * f.max(tiny) {
            converged = true;
            break;
        }
        let (nf, ng) = frame_objective_grad(models, &v, objective);
        f = nf;
        g = ng;
    }
    DescentTrace { values, frame: qf(v), converged }
}

fn rng_for(seed: u64, rank: usize, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((rank as u64) << 32) | restart as u64);
    rng
}

struct Searcher<'a, T: Real> {
    ops: &'a [Operator<T>],
    window: Vec<BasisIndex>,
    coord: CoordModels<T>,
    frames: Vec<FrameModel<T>>,
    objective: Objective,
}

impl<'a, T: Real> Searcher<'a, T> {
    fn new(ops: &'a [Operator<T>], window: Vec<BasisIndex>, objective: Objective) -> Self {
        let coord = CoordModels::new(ops, &window);
        let frames = ops.iter().map(|op| FrameModel::new(op, &window)).collect();
        Searcher { ops, window, coord, frames, objective }
    }

    fn coordinate_projection(&self, set: &[usize]) -> Result<Projection<T>> {
        Projection::coordinate(set.iter().map(|&p| self.window[p].clone()))
    }

    fn run(&self, rank: usize, budget: Budget, seed: u64) -> Result<ProbeResult<T>> {
        let a = self.window.len();
        let allowed: Vec<usize> = (0..a).collect();
        let swap = swap_search(&self.coord, &self.window, &allowed, (0..rank).collect(), budget.iters, self.objective);
        let coord_proj = self.coordinate_projection(&swap.set)?;
        let coord_value = objective_value(self.ops, &coord_proj, self.objective)?;

        let mut seed_frame = DMatrix::zeros(a, rank);
        for (c, &p) in swap.set.iter().enumerate() {
            seed_frame[(p, c)] = C::new(T::one(), T::zero());
        }
        let runs: Vec<DescentTrace<T>> = crate::parallel::install(|| {
            (0..budget.restarts)
                .into_par_iter()
                .map(|restart| {
                    let v0 = if restart == 0 {
                        seed_frame.clone()
                    } else {
                        random_frame(&mut rng_for(seed, rank, restart), a, rank)
                    };
                    frame_descent(&self.frames, v0, budget.iters, self.objective)
                })
                .collect()
        });
        let mut best_run: Option<(T, usize)> = None;
        for (k, run) in runs.iter().enumerate() {
            let v = *run.values.last().expect("initial value recorded");
            if best_run.map_or(true, |(bv, _)| v < bv) {
                best_run = Some((v, k));
            }
        }
        let mut result = ProbeResult {
            rank,
            best_value: coord_value,
            best_projection: coord_proj,
            restarts: budget.restarts,
            seed,
            converged: swap.converged,
        };
        if let Some((_, k)) = best_run {
            let run = &runs[k];
            let p = Projection::Frame(Frame::new_unchecked(self.window.clone(), run.frame.clone()));
            let exact = objective_value(self.ops, &p, self.objective)?;
            if exact < result.best_value {
                result.best_value = exact;
                result.best_projection = p;
                result.converged = run.converged;
            }
        }
        Ok(result)
    }
}

fn check_budget(budget: Budget) -> Result<()> {
    if budget.restarts == 0 || budget.iters == 0 {
        return Err(Error::Precondition("probe budget must allow at least one restart and one iteration".into()));
    }
    Ok(())
}

fn check_rank(rank: usize, ambient: usize) -> Result<()> {
    if rank == 0 {
        return Err(Error::ZeroProjection);
    }
    if ambient < 4 * rank {
        return Err(Error::Precondition(format!(
            "ambient window of {ambient} is too small for rank {rank} (needs at least {})",
            4 * rank
        )));
    }
    Ok(())
}

/// Best rank-`rank` projection found in the canonical ambient window of
/// `ambient` basis vectors.
pub fn minimize_defect<T: Real>(
    ops: &[Operator<T>],
    rank: usize,
    ambient: usize,
    budget: Budget,
    seed: u64,
) -> Result<ProbeResult<T>> {
    minimize_defect_with(ops, rank, ambient, budget, seed, Objective::Max)
}

pub fn minimize_defect_with<T: Real>(
    ops: &[Operator<T>],
    rank: usize,
    ambient: usize,
    budget: Budget,
    seed: u64,
    objective: Objective,
) -> Result<ProbeResult<T>> {
    let sort = common_sort(ops)?;
    check_budget(budget)?;
    check_rank(rank, ambient)?;
    let window = sort.prefix(ambient)?;
    Searcher::new(ops, window, objective).run(rank, budget, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonCurve<T: Real> {
    pub results: Vec<ProbeResult<T>>,
    /// Running minimum of `best_value` over the ranks seen so far.
    pub envelope: Vec<T>,
}

fn curve_on<T: Real>(
    searcher: &Searcher<'_, T>,
    ranks: &[usize],
    budget: Budget,
    seed: u64,
) -> Result<EpsilonCurve<T>> {
    let mut results = Vec::with_capacity(ranks.len());
    let mut envelope = Vec::with_capacity(ranks.len());
    let mut running: Option<T> = None;
    for &r in ranks {
        check_rank(r, searcher.window.len())?;
        let res = searcher.run(r, budget, seed)?;
        let m = running.map_or(res.best_value, |x| x.min(res.best_value));
        running = Some(m);
        envelope.push(m);
        results.push(res);
    }
    Ok(EpsilonCurve { results, envelope })
}

pub fn epsilon_curve<T: Real>(
    ops: &[Operator<T>],
    ranks: &[usize],
    ambient: usize,
    budget: Budget,
    seed: u64,
) -> Result<EpsilonCurve<T>> {
    epsilon_curve_with(ops, ranks, ambient, budget, seed, Objective::Max)
}

pub fn epsilon_curve_with<T: Real>(
    ops: &[Operator<T>],
    ranks: &[usize],
    ambient: usize,
    budget: Budget,
    seed: u64,
    objective: Objective,
) -> Result<EpsilonCurve<T>> {
    let sort = common_sort(ops)?;
    check_budget(budget)?;
    if ranks.is_empty() {
        return Err(Error::Precondition("rank list is empty".into()));
    }
    for &r in ranks {
        check_rank(r, ambient)?;
    }
    let searcher = Searcher::new(ops, sort.prefix(ambient)?, objective);
    curve_on(&searcher, ranks, budget, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducingHit<T: Real> {
    pub projection: Projection<T>,
    /// φ(T,P) of the returned projection.
    pub residual: T,
}

/// Connected component of `start` in the graph of nonzero entries, or `None`
/// once it grows past `limit`. Every label reached is appended to `seen`.
fn component<T: Real>(
    ops: &[Operator<T>],
    start: &BasisIndex,
    limit: usize,
    seen: &mut BTreeSet<BasisIndex>,
) -> Option<BTreeSet<BasisIndex>> {
    let mut comp = BTreeSet::new();
    let mut queue = VecDeque::new();
    comp.insert(start.clone());
    queue.push_back(start.clone());
    seen.insert(start.clone());
    while let Some(x) = queue.pop_front() {
        for op in ops {
            for (y, _) in op.col(&x).into_iter().chain(op.row_of(&x)) {
                if comp.insert(y.clone()) {
                    seen.insert(y.clone());
                    if comp.len() > limit {
                        return None;
                    }
                    queue.push_back(y);
                }
            }
        }
    }
    Some(comp)
}

/// Closed coordinate blocks (invariant under the operators and their
/// adjoints) meeting the window, accumulated up to `max_rank`.
fn coordinate_blocks<T: Real>(
    ops: &[Operator<T>],
    window: &[BasisIndex],
    max_rank: usize,
) -> Vec<BTreeSet<BasisIndex>> {
    let mut seen = BTreeSet::new();
    let mut blocks = Vec::new();
    let mut total = 0;
    for x in window {
        if seen.contains(x) {
            continue;
        }
        if let Some(c) = component(ops, x, max_rank - total, &mut seen) {
            total += c.len();
            blocks.push(c);
            if total >= max_rank {
                break;
            }
        }
    }
    blocks
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducingParams {
    pub max_rank: usize,
    pub ambient: usize,
    pub tol: f64,
    pub budget: Budget,
    pub seed: u64,
}

/// First projection of rank ≤ `max_rank` with φ < tol: closed coordinate
/// blocks first, then frame descent rank by rank.
pub fn find_reducing_subspace<T: Real>(
    ops: &[Operator<T>],
    params: &ReducingParams,
) -> Result<Option<ReducingHit<T>>> {
    let sort = common_sort(ops)?;
    if params.tol <= 0.0 || params.max_rank == 0 {
        return Err(Error::Precondition("tolerance and max_rank must be positive".into()));
    }
    check_budget(params.budget)?;
    let tol = lit::<T>(params.tol);
    let window = sort.prefix(params.ambient)?;
    if let Some(block) = coordinate_blocks(ops, &window, params.max_rank).into_iter().next() {
        let p = Projection::Coordinate(block);
        let residual = objective_value(ops, &p, Objective::Max)?;
        if residual < tol {
            return Ok(Some(ReducingHit { projection: p, residual }));
        }
    }
    let searcher = Searcher::new(ops, window, Objective::Max);
    for r in 1..=params.max_rank {
        if 4 * r > params.ambient {
            break;
        }
        let res = searcher.run(r, params.budget, params.seed)?;
        if res.best_value < tol {
            return Ok(Some(ReducingHit { projection: res.best_projection, residual: res.best_value }));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    W0plus,
    W0minus,
    W1plus,
    S,
    Undetermined,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Cell::W0plus => "W0plus",
            Cell::W0minus => "W0minus",
            Cell::W1plus => "W1plus",
            Cell::S => "S",
            Cell::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decays,
    Floor,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport<T: Real> {
    pub ell_estimate: usize,
    pub epsilon_curve: Vec<(usize, T)>,
    pub cell: Cell,
    pub evidence: String,
    pub caveat: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub max_rank: usize,
    pub ambient: usize,
    pub tol: f64,
    pub budget: Budget,
    pub seed: u64,
}

impl ClassifyParams {
    pub fn new(max_rank: usize, ambient: usize, seed: u64) -> Self {
        ClassifyParams { max_rank, ambient, tol: 1e-8, budget: Budget::default(), seed }
    }
}

/// Trend statistics of an envelope: log-log slope against rank, last/first
/// ratio, and the minimum relative to `scale`, the best rank-one coordinate
/// value on the same window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendStats {
    pub slope: f64,
    pub last_over_first: f64,
    pub min_over_scale: f64,
    pub scale: f64,
}

/// Least-squares slope of `log y` against `log x` over the points with `y > 0`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Scale-free trend rule. `scale` is the best rank-one coordinate value on
/// the probed window; it scales with the operator and ignores scalar shifts.
/// * a curve at zero (below `tol`) decays;
/// * min/scale ≤ 0.3, or slope ≤ −0.25 with last/first ≤ 0.5, decays;
/// * min/scale ≥ 0.5 with slope ≥ −0.25 is a floor;
/// * anything else is undetermined.
pub fn classify_trend(ranks: &[usize], envelope: &[f64], scale: f64, tol: f64) -> (Trend, TrendStats) {
    let first = envelope.first().copied().unwrap_or(0.0);
    let last = envelope.last().copied().unwrap_or(0.0);
    let min = envelope.iter().copied().fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64)> = ranks.iter().zip(envelope).map(|(r, v)| (*r as f64, *v)).collect();
    let slope = loglog_slope(&pts).unwrap_or(0.0);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let stats = TrendStats { slope, last_over_first: ratio(last, first), min_over_scale: ratio(min, scale), scale };
    if min <= tol {
        return (Trend::Decays, stats);
    }
    let rank_decay = slope <= -0.25 && stats.last_over_first <= 0.5;
    if stats.min_over_scale <= 0.3 || rank_decay {
        return (Trend::Decays, stats);
    }
    if stats.min_over_scale >= 0.5 && slope >= -0.25 {
        return (Trend::Floor, stats);
    }
    (Trend::Undetermined, stats)
}

struct TrendEvidence<T: Real> {
    curve: EpsilonCurve<T>,
    ranks: Vec<usize>,
    trend: Trend,
    stats: TrendStats,
}

fn trend_on<T: Real>(
    ops: &[Operator<T>],
    window: Vec<BasisIndex>,
    max_rank: usize,
    params: &ClassifyParams,
) -> Result<Option<TrendEvidence<T>>> {
    let ranks: Vec<usize> = (1..=max_rank).filter(|r| 4 * r <= window.len()).collect();
    if ranks.is_empty() {
        return Ok(None);
    }
    let searcher = Searcher::new(ops, window, Objective::Max);
    let n = searcher.window.len();
    let mut member = vec![false; searcher.coord.ids];
    let scale = (0..n)
        .map(|i| {
            member[i] = true;
            let v = to_f64(searcher.coord.value(&[i], &member, Objective::Max));
            member[i] = false;
            v
        })
        .fold(f64::INFINITY, f64::min);
    let curve = curve_on(&searcher, &ranks, params.budget, params.seed)?;
    let env: Vec<f64> = curve.envelope.iter().map(|v| to_f64(*v)).collect();
    let (trend, stats) = classify_trend(&ranks, &env, scale, params.tol);
    Ok(Some(TrendEvidence { curve, ranks, trend, stats }))
}

/// Heuristic cell assignment from reducing blocks and ε-curves.
pub fn classify<T: Real>(ops: &[Operator<T>], params: &ClassifyParams) -> Result<ClassificationReport<T>> {
    let sort = common_sort(ops)?;
    check_budget(params.budget)?;
    if params.max_rank == 0 || params.tol <= 0.0 {
        return Err(Error::Precondition("max_rank and tol must be positive".into()));
    }
    let capped = sort.capacity().map_or(params.ambient, |c| c.min(params.ambient));
    let window = sort.prefix(capped)?;
    let blocks = coordinate_blocks(ops, &window, params.max_rank);
    let block: BTreeSet<BasisIndex> = blocks.iter().flatten().cloned().collect();
    let mut ell = block.len();
    let mut frame_block = None;
    if block.is_empty() {
        // no closed coordinate block; look for an invariant frame
        let searcher = Searcher::new(ops, window.clone(), Objective::Max);
        for r in 1..=params.max_rank {
            if 4 * r > window.len() {
                break;
            }
            let res = searcher.run(r, params.budget, params.seed)?;
            if res.best_value < lit(params.tol) {
                ell = r;
                frame_block = Some(res);
                break;
            }
        }
    }
    let complement: Vec<BasisIndex> = window.iter().filter(|i| !block.contains(i)).cloned().collect();
    let evidence_curve = if frame_block.is_some() {
        None
    } else {
        trend_on(ops, complement.clone(), params.max_rank, params)?
    };
    let (cell, mut evidence) = match (ell > 0, &evidence_curve) {
        (true, None) => (
            Cell::W0plus,
            format!("reducing block of rank {ell} exhausts the ambient window; no complement to probe"),
        ),
        (has_block, Some(ev)) => {
            let cell = match (has_block, ev.trend) {
                (true, Trend::Decays) => Cell::W0plus,
                (true, Trend::Floor) => Cell::W0minus,
                (false, Trend::Decays) => Cell::W1plus,
                (false, Trend::Floor) => Cell::S,
                (_, Trend::Undetermined) => Cell::Undetermined,
            };
            let min = ev.curve.envelope.iter().map(|v| to_f64(*v)).fold(f64::INFINITY, f64::min);
            let s = &ev.stats;
            (
                cell,
                format!(
                    "reducing block rank {ell}; {} curve over ranks {}..{}: min {min:.6}, rank-one coordinate scale {:.6}, min/scale {:.3}, log-log slope {:.3}, last/first {:.3}; trend {:?}",
                    if has_block { "complement" } else { "full" },
                    ev.ranks[0],
                    ev.ranks[ev.ranks.len() - 1],
                    s.scale,
                    s.min_over_scale,
                    s.slope,
                    s.last_over_first,
                    ev.trend,
                ),
            )
        }
        (false, None) => (Cell::Undetermined, "ambient window too small to probe".to_string()),
    };
    if let Some(fb) = &frame_block {
        evidence = format!(
            "invariant frame of rank {} with residual {:.3e}; complement not probed",
            fb.rank,
            to_f64(fb.best_value)
        );
    }
    let epsilon_curve = evidence_curve
        .map(|ev| ev.ranks.iter().copied().zip(ev.curve.envelope.iter().copied()).collect())
        .unwrap_or_default();
    Ok(ClassificationReport { ell_estimate: ell, epsilon_curve, cell, evidence, caveat: CAVEAT })
}

/// Extension oracle growing a coordinate set greedily: at each step it adds
/// the neighbouring basis vector that lowers the objective most.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerExtender {
    pub max_rank: usize,
}

impl Default for OptimizerExtender {
    fn default() -> Self {
        OptimizerExtender { max_rank: 64 }
    }
}

impl<T: Real> ExtensionOracle<T> for OptimizerExtender {
    fn name(&self) -> &'static str {
        "optimizer"
    }

    fn extend(&self, ops: &[Operator<T>], start: &Projection<T>, epsilon: T) -> Result<Option<Projection<T>>> {
        let sort = common_sort(ops)?;
        let mut set: BTreeSet<BasisIndex> = start.support().into_iter().collect();
        if set.is_empty() {
            return Err(Error::ZeroProjection);
        }
        let mut value = objective_value(ops, &Projection::Coordinate(set.clone()), Objective::Max)?;
        while value >= epsilon {
            if set.len() >= self.max_rank {
                return Ok(None);
            }
            let mut candidates: BTreeSet<BasisIndex> = BTreeSet::new();
            for x in &set {
                for op in ops {
                    for (y, _) in op.col(x).into_iter().chain(op.row_of(x)) {
                        if !set.contains(&y) {
                            candidates.insert(y);
                        }
                    }
                }
            }
            if candidates.is_empty() {
                let prefix = sort.prefix(set.len() + 1)?;
                candidates.extend(prefix.into_iter().filter(|i| !set.contains(i)));
            }
            let mut best: Option<(T, BasisIndex)> = None;
            for c in candidates {
                let mut trial = set.clone();
                trial.insert(c.clone());
                let v = objective_value(ops, &Projection::Coordinate(trial), Objective::Max)?;
                if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best = Some((v, c));
                }
            }
            let Some((v, c)) = best else { return Ok(None) };
            set.insert(c);
            value = v;
        }
        Ok(Some(Projection::Coordinate(set)))
    }
}
