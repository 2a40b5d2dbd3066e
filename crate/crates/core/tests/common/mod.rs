//! Independent oracles shared by the integration tests and the acceptance run.
//! Each returns a [`Tally`] instead of panicking so the acceptance harness can
//! report every criterion.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ragkit::geometry::{HPolyhedron, PolyUnion};
use ragkit::ActionGovernor;
use ragkit::learn::Mlp;
use ragkit::linalg::{dot, solve, Matrix};
use ragkit::optim::{solve_lp, solve_qp, LinearProgram, QuadraticProgram, Status};
use ragkit::pwa::PwaModel;

#[derive(Debug, Default)]
pub struct Tally {
    pub instances: usize,
    pub samples: usize,
    pub failures: Vec<String>,
    /// Largest error of the quantity the oracle compares.
    pub worst: f64,
}

impl Tally {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        } else if self.failures.len() == 20 {
            self.failures.push("...".into());
        }
    }

    fn worst(&mut self, e: f64) {
        if e > self.worst || e.is_nan() {
            self.worst = e;
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} instances, {} samples, {} failures, worst error {:.2e}{}",
            self.instances,
            self.samples,
            self.failures.len(),
            self.worst,
            self.failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        )
    }
}

fn unit_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dot(&r, &r).sqrt();
        if norm > 0.1 {
            return r.iter().map(|v| v / norm).collect();
        }
    }
}

/// Random bounded polytope around `center`: `rows` random half-spaces at
/// distance 0.3..1.5 plus the box `|x_i − c_i| ≤ 2`.
pub fn random_polytope(rng: &mut impl Rng, n: usize, rows: usize, center: &[f64]) -> HPolyhedron<f64> {
    let mut h = Vec::new();
    let mut k = Vec::new();
    for _ in 0..rows {
        let r = unit_row(rng, n);
        k.push(dot(&r, center) + rng.random_range(0.3..1.5));
        h.push(r);
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut r = vec![0.0; n];
            r[i] = s;
            k.push(s * center[i] + 2.0);
            h.push(r);
        }
    }
    HPolyhedron::from_rows(n, &h, &k).unwrap()
}

/// Uniform point of the bounding box of `p` widened by `pad`.
fn box_point(rng: &mut impl Rng, lo: &[f64], hi: &[f64], pad: f64) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| rng.random_range(l - pad..h + pad))
        .collect()
}

const MARGIN: f64 = 1e-7;

/// `x ∈ A ∼ B ⟺ x + v ∈ A` for every vertex `v` of `B`, with `B` a sheared box.
pub fn pontryagin_oracle(instances: usize, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    while t.instances < instances {
        let n = rng.random_range(2..=3);
        let rows = rng.random_range(3..8);
        let a = random_polytope(&mut rng, n, rows, &vec![0.0; n]);
        let half: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.4)).collect();
        let lo: Vec<f64> = half.iter().map(|h| -h).collect();
        let cube = HPolyhedron::from_box(&lo, &half).unwrap();
        // B = M·cube with M unit lower-triangular, so B = {y : M⁻¹ y ∈ cube}.
        let mut m = Matrix::identity(n);
        let mut m_inv_rows = Vec::new();
        for i in 1..n {
            m.row_mut(i)[0] = rng.random_range(-0.5..0.5);
        }
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            m_inv_rows.push(solve(&m.transpose(), &e).unwrap());
        }
        let m_inv = Matrix::from_rows(&m_inv_rows, n).unwrap();
        let b = cube.affine_preimage(&m_inv).unwrap();
        let vertices: Vec<Vec<f64>> = (0..1usize << n)
            .map(|mask| {
                let z: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { half[i] } else { lo[i] }).collect();
                m.matvec(&z)
            })
            .collect();
        let diff = a.pontryagin_diff(&b).unwrap();
        t.instances += 1;
        let (blo, bhi) = a.bounding_box().unwrap();
        for _ in 0..samples {
            let x = box_point(&mut rng, &blo, &bhi, 0.1);
            let slack = vertices
                .iter()
                .map(|v| {
                    let y: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
                    a.max_violation(&y)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if slack.abs() < MARGIN {
                continue;
            }
            t.samples += 1;
            let expected = slack <= 0.0;
            if diff.satisfies(&x, 0.0) != expected {
                t.fail(format!("instance {} point {x:?}: expected {expected}", t.instances));
            }
        }
    }
    t
}

/// `{z : z_keep = y} ∩ P` with the kept coordinates fixed at `y`.
fn slice(p: &HPolyhedron<f64>, keep: &[usize], y: &[f64]) -> HPolyhedron<f64> {
    let n = p.dim();
    let free: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (r, &h) in p.h_mat().row_iter().zip(p.h_vec()) {
        rows.push(free.iter().map(|&j| r[j]).collect());
        rhs.push(h - keep.iter().zip(y).map(|(&j, v)| r[j] * v).sum::<f64>());
    }
    HPolyhedron::from_rows(free.len(), &rows, &rhs).unwrap()
}

/// Both directions of projection: projected samples of `P` lie in the
/// projection, and a point of the projection's neighbourhood is in it iff its
/// fibre in `P` is non-empty.
pub fn projection_oracle(instances: usize, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    while t.instances < instances {
        let n = rng.random_range(3..=4);
        let center: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let rows = rng.random_range(4..9);
        let p = random_polytope(&mut rng, n, rows, &center);
        let k = rng.random_range(1..n);
        let mut keep: Vec<usize> = (0..n).collect();
        keep.sort_by_key(|_| rng.random::<u32>());
        keep.truncate(k);
        keep.sort();
        let proj = p.project(&keep).unwrap();
        t.instances += 1;
        let u = PolyUnion::single(p.clone()).unwrap();
        for z in u.sample(samples / 2, &mut rng).unwrap() {
            t.samples += 1;
            let y: Vec<f64> = keep.iter().map(|&i| z[i]).collect();
            let v = proj.max_violation(&y);
            t.worst(v.max(0.0));
            if v > 1e-9 {
                t.fail(format!("instance {}: projected sample {y:?} outside by {v:e}", t.instances));
            }
        }
        let (lo, hi) = proj.bounding_box().unwrap();
        for _ in 0..samples / 2 {
            let y = box_point(&mut rng, &lo, &hi, 0.2);
            let v = proj.max_violation(&y);
            if v.abs() < MARGIN {
                continue;
            }
            t.samples += 1;
            let fibre = !slice(&p, &keep, &y).is_empty().unwrap();
            if fibre != (v < 0.0) {
                t.fail(format!("instance {}: {y:?} fibre {fibre}, projection {}", t.instances, v < 0.0));
            }
        }
    }
    t
}

/// Redundancy removal keeps the set and leaves no removable row.
pub fn redundancy_oracle(instances: usize, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    while t.instances < instances {
        let n = rng.random_range(2..=4);
        let rows = rng.random_range(3..8);
        let p = random_polytope(&mut rng, n, rows, &vec![0.0; n]);
        // Pad with implied rows: positive combinations of two rows, loosened.
        let mut rows = p.h_mat().to_rows();
        let mut rhs = p.h_vec().to_vec();
        for _ in 0..rng.random_range(3..8) {
            let (i, j) = (rng.random_range(0..rows.len()), rng.random_range(0..rows.len()));
            let (a, b) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
            let r: Vec<f64> = rows[i].iter().zip(&rows[j]).map(|(x, y)| a * x + b * y).collect();
            let h = a * rhs[i] + b * rhs[j] + rng.random_range(0.0..0.5);
            rows.push(r);
            rhs.push(h);
        }
        let padded = HPolyhedron::from_rows(n, &rows, &rhs).unwrap();
        let reduced = padded.remove_redundant().unwrap();
        t.instances += 1;
        let (lo, hi) = padded.bounding_box().unwrap();
        for _ in 0..samples {
            let x = box_point(&mut rng, &lo, &hi, 0.2);
            let v = padded.max_violation(&x);
            if v.abs() < MARGIN {
                continue;
            }
            t.samples += 1;
            if reduced.satisfies(&x, 0.0) != (v < 0.0) {
                t.fail(format!("instance {}: membership of {x:?} changed", t.instances));
            }
        }
        // Every surviving row is supporting: dropping it enlarges the set.
        let kept = reduced.h_mat().to_rows();
        for i in 0..kept.len() {
            let others: Vec<Vec<f64>> = kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r.clone()).collect();
            let orhs: Vec<f64> = reduced.h_vec().iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| *v).collect();
            let relaxed = HPolyhedron::from_rows(n, &others, &orhs).unwrap();
            let gain = relaxed.support(&kept[i]).unwrap().map_or(f64::INFINITY, |s| s - reduced.h_vec()[i]);
            if gain <= 1e-9 {
                t.fail(format!("instance {}: row {i} of the reduced system is redundant", t.instances));
            }
        }
    }
    t
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all basic feasible solutions, `None` if there is none.
fn lp_by_bases(c: &[f64], a: &Matrix<f64>, b: &[f64]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    for basis in subsets(a.rows(), n) {
        let rows: Vec<Vec<f64>> = basis.iter().map(|&i| a.row(i).to_vec()).collect();
        let m = Matrix::from_rows(&rows, n).unwrap();
        let rhs: Vec<f64> = basis.iter().map(|&i| b[i]).collect();
        let Some(x) = solve(&m, &rhs) else { continue };
        if x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let feasible = a.row_iter().zip(b).all(|(r, &bi)| dot(r, &x) <= bi + 1e-9);
        if feasible {
            let v = dot(c, &x);
            best = Some(best.map_or(v, |o: f64| o.min(v)));
        }
    }
    best
}

/// Largest KKT residual of `min f(x)` over `A x ≤ b` with gradient `grad` at `x`
/// and multipliers `lambda`.
fn kkt_residual(grad: &[f64], a: &Matrix<f64>, b: &[f64], x: &[f64], lambda: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for (j, g) in grad.iter().enumerate() {
        let s = g + (0..a.rows()).map(|i| a.row(i)[j] * lambda[i]).sum::<f64>();
        r = r.max(s.abs());
    }
    for (i, row) in a.row_iter().enumerate() {
        let slack = b[i] - dot(row, x);
        r = r.max((-slack).max(0.0)).max((-lambda[i]).max(0.0)).max((lambda[i] * slack).abs());
    }
    r
}

/// Random bounded LPs, half with their box as variable bounds, checked
/// against basis enumeration; about a fifth are made infeasible.
pub fn lp_oracle(instances: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for inst in 0..instances {
        let n = rng.random_range(2..=3);
        let m = rng.random_range(3..=6);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rows: Vec<Vec<f64>> = (0..m).map(|_| unit_row(&mut rng, n)).collect();
        let mut rhs: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..2.0)).collect();
        if rng.random_bool(0.2) {
            let r = unit_row(&mut rng, n);
            let k = rng.random_range(0.0..1.0);
            rows.push(r.iter().map(|v| -v).collect());
            rhs.push(-k - rng.random_range(0.1..1.0));
            rows.push(r);
            rhs.push(k);
        }
        let bounds: Vec<(Option<f64>, Option<f64>)> = vec![(Some(-3.0), Some(3.0)); n];
        let lp = if inst % 2 == 0 {
            LinearProgram::new(c.clone(), Matrix::from_rows(&rows, n).unwrap(), rhs.clone())
                .unwrap()
                .with_bounds(bounds)
                .unwrap()
        } else {
            for j in 0..n {
                for s in [1.0, -1.0] {
                    let mut r = vec![0.0; n];
                    r[j] = s;
                    rows.push(r);
                    rhs.push(3.0);
                }
            }
            LinearProgram::new(c.clone(), Matrix::from_rows(&rows, n).unwrap(), rhs.clone()).unwrap()
        };
        let (a, b) = lp.constraint_rows();
        let expected = lp_by_bases(&c, &a, &b);
        let out = solve_lp(&lp).unwrap();
        t.instances += 1;
        match (expected, out.status) {
            (None, Status::Infeasible) => {}
            (Some(v), Status::Optimal) => {
                let x = out.solution.unwrap();
                let gap = (out.objective.unwrap() - v).abs();
                t.worst(gap);
                if gap > 1e-6 {
                    t.fail(format!("LP {inst}: objective {} vs {v}", out.objective.unwrap()));
                }
                let kkt = kkt_residual(&c, &a, &b, &x, &out.duals.unwrap());
                if kkt > 1e-8 {
                    t.fail(format!("LP {inst}: KKT residual {kkt:e}"));
                }
            }
            (e, s) => t.fail(format!("LP {inst}: oracle {e:?}, solver {s:?}")),
        }
    }
    t
}

/// `min f` over `{u : A u ≤ b}` for `n ≤ 2`: the convex profile
/// `g(u₁) = min over u₂ of f` (exact: a clamped scalar quadratic) is scanned on
/// a grid of spacing `step` over `[-r, r]`, then the bracket around the best
/// grid point, trimmed to the profile's domain, is closed by ternary search.
fn qp_by_grid(qp: &QuadraticProgram<f64>, r: f64, step: f64) -> Option<f64> {
    let n = qp.target().len();
    let (a, b) = qp.constraints();
    let (s, t) = (qp.penalty(), qp.target());
    let profile = |u1: f64| -> f64 {
        if n == 1 {
            let ok = a.row_iter().zip(b).all(|(row, &bi)| row[0] * u1 <= bi);
            return if ok { qp.objective(&[u1]) } else { f64::INFINITY };
        }
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (row, &bi) in a.row_iter().zip(b) {
            let rest = bi - row[0] * u1;
            if row[1] > 0.0 {
                hi = hi.min(rest / row[1]);
            } else if row[1] < 0.0 {
                lo = lo.max(rest / row[1]);
            } else if rest < 0.0 {
                return f64::INFINITY;
            }
        }
        if lo > hi {
            return f64::INFINITY;
        }
        let u2 = (t[1] - s[(0, 1)] * (u1 - t[0]) / s[(1, 1)]).clamp(lo, hi);
        qp.objective(&[u1, u2])
    };
    let count = (2.0 * r / step).round() as usize;
    let (best, fb) = (0..=count)
        .map(|i| -r + step * i as f64)
        .map(|u| (u, profile(u)))
        .min_by(|x, y| x.1.total_cmp(&y.1))?;
    if !fb.is_finite() {
        return None;
    }
    let edge = |inside: f64, outside: f64| {
        if profile(outside).is_finite() {
            return outside;
        }
        let (mut a, mut b) = (inside, outside);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if profile(m).is_finite() {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let (mut lo, mut hi) = (edge(best, best - step), edge(best, best + step));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if profile(m1) > profile(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    Some(profile(0.5 * (lo + hi)).min(fb))
}

/// Random strictly convex QPs with a non-empty interior, checked against a
/// refined grid search, with KKT residuals on every optimal return.
pub fn qp_oracle(instances: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for inst in 0..instances {
        let n = rng.random_range(1..=2);
        let s = if n == 1 {
            Matrix::from_vec(1, 1, vec![rng.random_range(0.2..3.0)]).unwrap()
        } else {
            let l = Matrix::from_vec(2, 2, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            l.matmul(&l.transpose()).unwrap().add(&Matrix::identity(2).scale(0.2)).unwrap()
        };
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let center: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for _ in 0..rng.random_range(2..=6) {
            let r = unit_row(&mut rng, n);
            rhs.push(dot(&r, &center) + rng.random_range(0.2..1.5));
            rows.push(r);
        }
        for j in 0..n {
            for sgn in [1.0, -1.0] {
                let mut r = vec![0.0; n];
                r[j] = sgn;
                rows.push(r);
                rhs.push(2.5);
            }
        }
        let a = Matrix::from_rows(&rows, n).unwrap();
        let qp = QuadraticProgram::new(s.clone(), target.clone(), a.clone(), rhs.clone()).unwrap();
        let out = solve_qp(&qp).unwrap();
        t.instances += 1;
        if out.status != Status::Optimal {
            t.fail(format!("QP {inst}: status {:?} on a feasible problem", out.status));
            continue;
        }
        let u = out.solution.unwrap();
        let grid = qp_by_grid(&qp, 2.5, 1e-4).expect("interior contains grid points");
        let gap = (out.objective.unwrap() - grid).abs();
        t.worst(gap);
        if gap > 1e-4 {
            t.fail(format!("QP {inst}: objective {} vs grid {grid}", out.objective.unwrap()));
        }
        let d: Vec<f64> = u.iter().zip(&target).map(|(x, y)| 2.0 * (x - y)).collect();
        let grad = s.matvec(&d);
        let kkt = kkt_residual(&grad, &a, &rhs, &u, &out.duals.unwrap());
        if kkt > 1e-8 {
            t.fail(format!("QP {inst}: KKT residual {kkt:e}"));
        }
    }
    t
}

/// Every (simplex vertex, disturbance vertex) successor of `(x, u)` in mode `q`,
/// computed straight from the vertex systems.
fn successors(model: &PwaModel<f64>, q: usize, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
    let mode = model.mode(q);
    let (wlo, whi) = mode.disturbance_set.bounding_box().unwrap();
    let d = wlo.len();
    let mut out = Vec::new();
    for v in &mode.vertices {
        for mask in 0..1usize << d {
            let wa: Vec<f64> = (0..d).map(|i| if mask >> i & 1 == 1 { whi[i] } else { wlo[i] }).collect();
            out.push(v.apply(x, u, &wa));
        }
    }
    out
}

/// `u` is admissible at `x` for piece `p`: `u ∈ U_q` and every vertex
/// successor lies in `p`.
fn admissible_for(model: &PwaModel<f64>, set: &PolyUnion<f64>, x: &[f64], u: &[f64], p: usize, tol: f64) -> bool {
    let q = model.mode_of(x).unwrap();
    model.mode(q).input_set.satisfies(u, tol)
        && successors(model, q, x, u).iter().all(|s| set.pieces()[p].satisfies(s, tol))
}

/// Exact scalar-input governor by grid search over `U_q` at resolution
/// `step`, with each piece's feasible interval refined by bisection.
fn govern_by_grid(model: &PwaModel<f64>, set: &PolyUnion<f64>, x: &[f64], u_phi: f64, step: f64) -> Option<f64> {
    let q = model.mode_of(x).unwrap();
    let (ulo, uhi) = model.mode(q).input_set.bounding_box().unwrap();
    let (ulo, uhi) = (ulo[0], uhi[0]);
    let count = ((uhi - ulo) / step).round() as usize;
    let grid: Vec<f64> = (0..=count).map(|i| (ulo + step * i as f64).min(uhi)).collect();
    let succ: Vec<Vec<Vec<f64>>> = grid.iter().map(|&u| successors(model, q, x, &[u])).collect();
    let mut best: Option<f64> = None;
    for p in 0..set.len() {
        let piece = &set.pieces()[p];
        let ok: Vec<usize> = (0..grid.len())
            .filter(|&i| succ[i].iter().all(|s| piece.satisfies(s, 0.0)))
            .collect();
        let (Some(&first), Some(&last)) = (ok.first(), ok.last()) else { continue };
        let edge = |inside: f64, outside: f64| {
            let (mut a, mut b) = (inside, outside);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if admissible_for(model, set, x, &[m], p, 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            a
        };
        let lo = if first == 0 { grid[0] } else { edge(grid[first], grid[first - 1]) };
        let hi = if last == grid.len() - 1 { grid[last] } else { edge(grid[last], grid[last + 1]) };
        let u = u_phi.clamp(lo, hi);
        let f = (u - u_phi) * (u - u_phi);
        best = Some(best.map_or(f, |b: f64| b.min(f)));
    }
    best
}

/// Governor objective vs the grid oracle on random states of the safe set
/// and random nominal inputs; the returned input must itself be admissible.
pub fn governor_oracle(gov: &ActionGovernor, queries: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = gov.model();
    let set = &gov.safe_set().set;
    let (ulo, uhi) = model.mode(0).input_set.bounding_box().unwrap();
    let mut t = Tally::default();
    for x in set.sample(queries, &mut rng).unwrap() {
        let u_phi = rng.random_range(ulo[0] - 2.0..uhi[0] + 2.0);
        t.instances += 1;
        let r = match gov.govern(&x, &[u_phi]) {
            Ok(r) => r,
            Err(e) => {
                t.fail(format!("x={x:?} u_phi={u_phi}: {e}"));
                continue;
            }
        };
        let Some(grid) = govern_by_grid(model, set, &x, u_phi, 1e-3) else {
            t.fail(format!("x={x:?}: no admissible grid input"));
            continue;
        };
        let gap = (r.objective - grid).abs();
        t.worst(gap);
        if gap > 1e-4 {
            t.fail(format!("x={x:?} u_phi={u_phi}: objective {} vs grid {grid}", r.objective));
        }
        let p = r.piece_index.unwrap_or(0);
        if !admissible_for(model, set, &x, &r.u_safe, p, 1e-7) {
            t.fail(format!("x={x:?}: governed input {:?} is not admissible", r.u_safe));
        }
    }
    t
}

/// One-step robust invariance: from sampled states of the safe set the
/// governor is feasible and every vertex successor stays in the set.
pub fn invariance_oracle(gov: &ActionGovernor, samples: usize, seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = gov.model();
    let set = &gov.safe_set().set;
    let (ulo, uhi) = model.mode(0).input_set.bounding_box().unwrap();
    let mut t = Tally::default();
    for x in set.sample(samples, &mut rng).unwrap() {
        t.instances += 1;
        let u_phi = rng.random_range(ulo[0]..uhi[0]);
        let r = match gov.govern(&x, &[u_phi]) {
            Ok(r) => r,
            Err(e) => {
                t.fail(format!("x={x:?}: {e}"));
                continue;
            }
        };
        let q = model.mode_of(&x).unwrap();
        for s in successors(model, q, &x, &r.u_safe) {
            t.samples += 1;
            let v = set
                .pieces()
                .iter()
                .map(|p| p.max_violation(&s))
                .fold(f64::INFINITY, f64::min);
            t.worst(v.max(0.0));
            if v > 1e-9 {
                t.fail(format!("x={x:?}: successor {s:?} leaves the set by {v:e}"));
            }
        }
    }
    t
}

/// Backpropagation vs central differences for one layer shape; the error is
/// `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` over all parameters.
pub fn gradient_check(sizes: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_in = sizes[0];
    let n_out = *sizes.last().unwrap();
    let mut net = Mlp::<f64>::new(sizes, seed)
        .unwrap()
        .with_input_normalization(vec![0.3; n_in], vec![1.7; n_in])
        .unwrap()
        .with_output_normalization(vec![-0.5; n_out], vec![2.5; n_out])
        .unwrap();
    let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..n_in).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let targets: Vec<Vec<f64>> = (0..6).map(|_| (0..n_out).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let (_, g) = net.loss_and_gradient(&inputs, &targets);
    let analytic = g.flatten();
    let theta = net.params();
    let h = 1e-6;
    let mut numeric = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let mut p = theta.clone();
        p[i] = theta[i] + h;
        net.set_params(&p).unwrap();
        let up = net.loss(&inputs, &targets);
        p[i] = theta[i] - h;
        net.set_params(&p).unwrap();
        let down = net.loss(&inputs, &targets);
        numeric.push((up - down) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na = dot(&analytic, &analytic).sqrt();
    let nn = dot(&numeric, &numeric).sqrt();
    diff / na.max(nn)
}
