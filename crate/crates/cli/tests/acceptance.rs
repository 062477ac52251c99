//! Acceptance checks. Run with `cargo test -p czreach --test acceptance`;
//! prints one PASS/FAIL line per criterion and exits non-zero on failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use czreach::run::{self, RunOptions};
use czreach::{sampling, Scenario};
use czreach_core::interval::im_cz_enclosure;
use czreach_core::nnet::{self, Layer};
use czreach_core::reach;
use czreach_core::verify::{self, Verdict};
use czreach_core::{
    ConstrainedZonotope, FeedforwardNetwork, Interval, IntervalMatrix, LinearModel, NonlinearModel, SetUnion, UnsafeSet,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenarios().join(name)).expect("bundled scenario loads")
}

fn di_model() -> LinearModel {
    LinearModel::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), DMatrix::from_row_slice(2, 1, &[0.5, 1.0])).unwrap()
}

fn di_x0() -> ConstrainedZonotope {
    ConstrainedZonotope::from_bounds(&[2.5, -0.25], &[3.0, 0.25])
}

fn directions(k: usize) -> Vec<DVector<f64>> {
    (0..k)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / k as f64;
            DVector::from_vec(vec![th.cos(), th.sin()])
        })
        .collect()
}

fn union_support(u: &SetUnion, d: &DVector<f64>) -> Interval {
    u.members()
        .iter()
        .map(|m| m.support(d).unwrap())
        .reduce(|a, b| a.hull(&b))
        .expect("nonempty union")
}

fn box_intersects(a: &[Interval], b: &[Interval]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.intersects(y))
}

fn box_set(b: &[Interval]) -> ConstrainedZonotope {
    ConstrainedZonotope::from_box(b)
}

// ---------------------------------------------------------------------------

fn c1_soundness() -> Outcome {
    let mut parts = Vec::new();
    for method in [czreach_core::Method::Exact, czreach_core::Method::Over] {
        let mut s = load("double_integrator.json");
        s.set_method(method).unwrap();
        let start = Instant::now();
        let reach = run::compute_reach(&s).map_err(|e| e.to_string())?;
        let tr = sampling::sample_trajectories(&s, 1000, s.seed).unwrap();
        let rep = sampling::containment(&reach, &tr).unwrap();
        let secs = start.elapsed().as_secs_f64();
        ensure(reach.horizon() == 5, || "horizon is not 5".into())?;
        for st in &rep.steps {
            ensure(st.contained == 1000 && st.total == 1000, || {
                format!("{}: t={} only {}/{} contained", method.as_str(), st.t, st.contained, st.total)
            })?;
        }
        ensure(secs < 60.0, || format!("{} took {secs:.1} s", method.as_str()))?;
        parts.push(format!("{} 1000/1000 at t=0..5 in {secs:.2} s", method.as_str()));
    }
    Ok(parts.join("; "))
}

fn c2_over_contains_exact() -> Outcome {
    let net = load("double_integrator.json").network;
    let exact = reach::reach_exact(&di_x0(), &di_model(), &net, 5).unwrap();
    let over = reach::reach_over(&di_x0(), &di_model(), &net, 5).unwrap();
    for t in 0..=5 {
        let he = exact.steps[t].interval_hull().unwrap();
        let ho = over.steps[t].interval_hull().unwrap();
        for k in 0..2 {
            ensure(ho[k].lo <= he[k].lo + 1e-9 && he[k].hi <= ho[k].hi + 1e-9, || {
                format!("t={t} x{}: exact {:?} not inside over {:?}", k + 1, he[k], ho[k])
            })?;
        }
        for d in directions(16) {
            let (se, so) = (union_support(&exact.steps[t], &d), union_support(&over.steps[t], &d));
            ensure(se.hi <= so.hi + 1e-9, || format!("t={t}: support {} > {}", se.hi, so.hi))?;
        }
    }
    let area = |h: &[Interval]| h[0].width() * h[1].width();
    let ratio = area(&over.steps[5].interval_hull().unwrap()) / area(&exact.steps[5].interval_hull().unwrap());
    Ok(format!("hulls nested at t=0..5; t=5 hull area ratio over/exact = {ratio:.3}"))
}

fn c3_linear_controller() -> Outcome {
    let k = DMatrix::from_row_slice(1, 2, &[-0.5, -1.2]);
    let model = di_model();
    let flat = FeedforwardNetwork::linear(k.clone(), DVector::zeros(1)).unwrap();
    // Same law through an always-active hidden layer: relu(x + 10) - 10.
    let shift = 10.0;
    let hidden = FeedforwardNetwork::new(vec![
        Layer { weights: DMatrix::identity(2, 2), bias: DVector::from_element(2, shift) },
        Layer { weights: k.clone(), bias: -(&k * DVector::from_element(2, shift)) },
    ])
    .unwrap();
    let acl = model.state_matrix() + model.input_matrix() * &k;
    let mut worst = 0.0f64;
    for net in [&flat, &hidden] {
        let exact = reach::reach_exact(&di_x0(), &model, net, 5).unwrap();
        let over = reach::reach_over(&di_x0(), &model, net, 5).unwrap();
        let mut power = DMatrix::identity(2, 2);
        for t in 0..=5 {
            let closed = di_x0().linear_map(&power).unwrap();
            ensure(exact.steps[t].len() == 1, || format!("t={t}: {} exact members", exact.steps[t].len()))?;
            for d in directions(16) {
                let want = closed.support(&d).unwrap();
                for got in [union_support(&exact.steps[t], &d), union_support(&over.steps[t], &d)] {
                    let err = (got.hi - want.hi).abs().max((got.lo - want.lo).abs());
                    worst = worst.max(err);
                    ensure(err <= 1e-7, || format!("t={t}: support error {err:.2e}"))?;
                }
            }
            power = &acl * power;
        }
    }
    Ok(format!("exact, over and (A+BK)^t X0 agree in 16 directions, max error {worst:.1e}"))
}

// Grid oracle for convex polygons given as unit-normal halfplanes n.x <= o.
struct Polygon(Vec<([f64; 2], f64)>);

impl Polygon {
    fn zonotope(c: &DVector<f64>, g: &DMatrix<f64>) -> Polygon {
        let mut lines = Vec::new();
        for col in g.column_iter() {
            let len = col.norm();
            if len < 1e-12 {
                continue;
            }
            let n = [-col[1] / len, col[0] / len];
            let beta: f64 = g.column_iter().map(|h| (n[0] * h[0] + n[1] * h[1]).abs()).sum();
            let nc = n[0] * c[0] + n[1] * c[1];
            lines.push((n, nc + beta));
            lines.push(([-n[0], -n[1]], -nc + beta));
        }
        Polygon(lines)
    }

    fn and(&self, other: &Polygon) -> Polygon {
        Polygon(self.0.iter().chain(&other.0).copied().collect())
    }

    /// Distance-like margin: positive inside, 1-Lipschitz.
    fn margin(&self, x: [f64; 2]) -> f64 {
        self.0.iter().map(|(n, o)| o - n[0] * x[0] - n[1] * x[1]).fold(f64::INFINITY, f64::min)
    }
}

struct GridScan {
    max_margin: f64,
    inside: Vec<([f64; 2], f64)>,
}

fn scan(poly: &Polygon, bbox: &[Interval], h: f64) -> GridScan {
    let nx = ((bbox[0].width() + 2.0 * h) / h).ceil() as usize + 1;
    let ny = ((bbox[1].width() + 2.0 * h) / h).ceil() as usize + 1;
    let mut max_margin = f64::NEG_INFINITY;
    let mut inside = Vec::new();
    for i in 0..nx {
        let x = bbox[0].lo - h + i as f64 * h;
        for j in 0..ny {
            let p = [x, bbox[1].lo - h + j as f64 * h];
            let m = poly.margin(p);
            max_margin = max_margin.max(m);
            if m >= 0.0 {
                inside.push((p, m));
            }
        }
    }
    GridScan { max_margin, inside }
}

#[derive(Default)]
struct Tally {
    agree: usize,
    empty: usize,
    ambiguous: usize,
    mismatches: Vec<String>,
}

impl Tally {
    fn record(&mut self, what: &str, case: usize, scan: &GridScan, h: f64, claimed_empty: bool) {
        let oracle = if scan.max_margin >= 0.0 {
            Some(false)
        } else if scan.max_margin < -h {
            Some(true)
        } else {
            None
        };
        match oracle {
            None => self.ambiguous += 1,
            Some(e) if e == claimed_empty => {
                self.agree += 1;
                self.empty += usize::from(e);
            }
            Some(e) => self.mismatches.push(format!("case {case} {what}: oracle empty={e}, is_empty={claimed_empty}")),
        }
    }
}

fn random_zonotope(rng: &mut ChaCha8Rng, spread: f64) -> ConstrainedZonotope {
    let ng = rng.gen_range(2..=4);
    let c = DVector::from_fn(2, |_, _| rng.gen_range(-spread..spread));
    let g = DMatrix::from_fn(2, ng, |_, _| rng.gen_range(-1.0..1.0));
    ConstrainedZonotope::zonotope(c, g).unwrap()
}

fn pick_inside(rng: &mut ChaCha8Rng, pts: &[([f64; 2], f64)]) -> DVector<f64> {
    let (p, m) = pts[rng.gen_range(0..pts.len())];
    let r = m * rng.gen::<f64>().sqrt();
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    DVector::from_vec(vec![p[0] + r * th.cos(), p[1] + r * th.sin()])
}

fn c4_set_kernel() -> Outcome {
    const CASES: usize = 200;
    const PER_CASE: usize = 50;
    let h = 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tally = Tally::default();
    let (mut member_checks, mut member_bad) = (0usize, 0usize);
    let mut violations = [0usize; 4];
    let mut samples = [0usize; 4];
    for case in 0..CASES {
        let z1 = random_zonotope(&mut rng, 1.0);
        let z2 = random_zonotope(&mut rng, 2.5);
        let p1 = Polygon::zonotope(z1.center(), z1.generators());
        let p2 = Polygon::zonotope(z2.center(), z2.generators());
        let hv = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let hn = hv.norm();
        let f = hv.dot(z1.center()) + rng.gen_range(-2.5..2.5) * hn;
        let ph = Polygon(vec![([hv[0] / hn, hv[1] / hn], f / hn)]);
        let bbox = z1.outer_box();

        let w = z1.intersect(&z2).unwrap();
        let pw = p1.and(&p2);
        let sw = scan(&pw, &bbox, h);
        tally.record("intersect", case, &sw, h, w.is_empty().unwrap());
        let cut = z1.intersect_halfspace(&hv, f).unwrap();
        tally.record("halfspace", case, &scan(&p1.and(&ph), &bbox, h), h, cut.is_empty().unwrap());
        let both = w.intersect_halfspace(&hv, f).unwrap();
        tally.record("intersect+halfspace", case, &scan(&pw.and(&ph), &bbox, h), h, both.is_empty().unwrap());

        for _ in 0..20 {
            let x = [rng.gen_range(bbox[0].lo..=bbox[0].hi), rng.gen_range(bbox[1].lo..=bbox[1].hi)];
            let m = pw.margin(x);
            if m.abs() > 1e-6 {
                member_checks += 1;
                if w.contains_point(&DVector::from_vec(x.to_vec())).unwrap() != (m > 0.0) {
                    member_bad += 1;
                }
            }
        }

        let (zs, pts) = if sw.inside.len() >= PER_CASE {
            (w.clone(), sw.inside)
        } else {
            (z1.clone(), scan(&p1, &bbox, h).inside)
        };
        let r = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
        let mapped = zs.linear_map(&r).unwrap();
        let sum = zs.minkowski_sum(&z2).unwrap();
        let mid = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let rad = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(0.0..0.3));
        let jm = IntervalMatrix::new(&mid - &rad, &mid + &rad).unwrap();
        let enc = im_cz_enclosure(&jm, &zs).unwrap();
        let reduced = zs.reduce_order(zs.num_generators().saturating_sub(2).max(2), zs.num_constraints().saturating_sub(1)).unwrap();
        for _ in 0..PER_CASE {
            let x = pick_inside(&mut rng, &pts);
            let xi2 = DVector::from_fn(z2.num_generators(), |_, _| rng.gen_range(-1.0..=1.0));
            let y = z2.at(&xi2);
            let m = DMatrix::from_fn(2, 2, |i, j| rng.gen_range(jm.lo()[(i, j)]..=jm.hi()[(i, j)]));
            let checks = [
                mapped.contains_point(&(&r * &x)).unwrap(),
                sum.contains_point(&(&x + &y)).unwrap(),
                enc.contains_point(&(&m * &x)).unwrap(),
                reduced.contains_point(&x).unwrap(),
            ];
            for (k, ok) in checks.iter().enumerate() {
                samples[k] += 1;
                if !ok {
                    violations[k] += 1;
                }
            }
        }
    }
    ensure(tally.mismatches.is_empty(), || tally.mismatches.join("; "))?;
    ensure(member_bad == 0, || format!("{member_bad}/{member_checks} point-membership mismatches"))?;
    let names = ["linear_map", "minkowski_sum", "im_cz_enclosure", "reduce_order"];
    for k in 0..4 {
        ensure(violations[k] == 0, || format!("{}: {}/{} samples outside", names[k], violations[k], samples[k]))?;
    }
    Ok(format!(
        "{} emptiness verdicts ({} empty) match the 1e-2 grid oracle ({} within one cell, skipped); \
         {member_checks} memberships agree; {} samples per operation contained",
        tally.agree, tally.empty, tally.ambiguous, samples[0]
    ))
}

fn c5_network_layers() -> Outcome {
    let abs = FeedforwardNetwork::new(vec![
        Layer { weights: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), bias: DVector::zeros(2) },
        Layer { weights: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), bias: DVector::zeros(1) },
    ])
    .unwrap();
    let one = DVector::from_element(1, 1.0);
    let mut worst = 0.0f64;
    let mut check = |net: &FeedforwardNetwork, lo: f64, hi: f64, want: (f64, f64)| -> Result<(), String> {
        let out = nnet::reach_exact_network(net, &SetUnion::single(ConstrainedZonotope::from_bounds(&[lo], &[hi]))).unwrap();
        let s = union_support(&out, &one);
        let err = (s.lo - want.0).abs().max((s.hi - want.1).abs());
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("input [{lo}, {hi}]: output [{}, {}], expected [{}, {}]", s.lo, s.hi, want.0, want.1))
    };
    for (lo, hi) in [(-1.0f64, 1.0f64), (-2.0, 1.0), (0.5, 1.0), (-1.0, -0.25)] {
        let want = if lo >= 0.0 {
            (lo, hi)
        } else if hi <= 0.0 {
            (-hi, -lo)
        } else {
            (0.0, hi.max(-lo))
        };
        check(&abs, lo, hi, want)?;
    }
    for (w, b, lo, hi) in [(2.0, -1.0, 0.0, 1.0), (-1.5, 0.25, -1.0, 2.0), (1.0, 3.0, -1.0, 1.0), (1.0, -3.0, -1.0, 1.0), (0.5, 0.0, -2.0, 0.0)] {
        let net = FeedforwardNetwork::new(vec![
            Layer { weights: DMatrix::from_element(1, 1, w), bias: DVector::from_element(1, b) },
            Layer { weights: DMatrix::identity(1, 1), bias: DVector::zeros(1) },
        ])
        .unwrap();
        let (a, c) = (w * lo + b, w * hi + b);
        check(&net, lo, hi, (a.min(c).max(0.0), a.max(c).max(0.0)))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let over_abs = nnet::reach_over_network(&abs, &ConstrainedZonotope::from_bounds(&[-1.0], &[1.0])).unwrap();
    let random = FeedforwardNetwork::new(vec![
        Layer { weights: DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0)), bias: DVector::from_fn(4, |_, _| rng.gen_range(-0.3..0.3)) },
        Layer { weights: DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0)), bias: DVector::from_fn(3, |_, _| rng.gen_range(-0.3..0.3)) },
        Layer { weights: DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)), bias: DVector::zeros(2) },
    ])
    .unwrap();
    let over_rand = nnet::reach_over_network(&random, &ConstrainedZonotope::from_bounds(&[-1.0, -1.0], &[1.0, 1.0])).unwrap();
    let mut misses = 0;
    for _ in 0..10_000 {
        let x = rng.gen_range(-1.0..=1.0);
        if !over_abs.contains_point(&DVector::from_element(1, f64::abs(x))).unwrap() {
            misses += 1;
        }
        let x2 = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..=1.0));
        if !over_rand.contains_point(&random.eval(&x2)).unwrap() {
            misses += 1;
        }
    }
    ensure(misses == 0, || format!("{misses} sampled outputs outside the relaxation"))?;

    let z = ConstrainedZonotope::from_bounds(&[-1.0, -1.0], &[1.0, 1.0])
        .affine_map(&DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.2, 0.1, 0.3, 0.3]), &DVector::from_vec(vec![0.2, 1.0, -1.0]))
        .unwrap();
    let hull = z.interval_hull().unwrap();
    let mut cur = z.clone();
    for (i, r) in hull.iter().enumerate() {
        let next = nnet::step_relu_over(&cur, i, r.lo, r.hi).unwrap();
        let (dg, dc) = (next.num_generators() - cur.num_generators(), next.num_constraints() - cur.num_constraints());
        let want = if r.lo < 0.0 && r.hi > 0.0 { (4, 3) } else { (0, 0) };
        ensure((dg, dc) == want, || format!("neuron {i} range {r:?}: grew by ({dg}, {dc}), expected {want:?}"))?;
        cur = next;
    }
    Ok(format!("9 exact support cases within {worst:.1e}; 2e4 sampled outputs inside the relaxation; +4/+3 per crossing neuron"))
}

fn c6_verification() -> Outcome {
    let net = load("double_integrator.json").network;
    let exact = reach::reach_exact(&di_x0(), &di_model(), &net, 5).unwrap();
    let over = reach::reach_over(&di_x0(), &di_model(), &net, 5).unwrap();
    let hulls: Vec<Vec<Interval>> = exact.steps.iter().map(|s| s.interval_hull().unwrap()).collect();
    let h5 = &hulls[5];

    // (a) A box 0.05 beyond the t=5 hull that no earlier hull touches.
    let candidates = [
        vec![h5[0], Interval::new(h5[1].hi + 0.05, h5[1].hi + 0.25)],
        vec![h5[0], Interval::new(h5[1].lo - 0.25, h5[1].lo - 0.05)],
        vec![Interval::new(h5[0].hi + 0.05, h5[0].hi + 0.25), h5[1]],
        vec![Interval::new(h5[0].lo - 0.25, h5[0].lo - 0.05), h5[1]],
    ];
    let far = candidates
        .iter()
        .find(|b| hulls[1..5].iter().all(|h| !box_intersects(b, h)))
        .ok_or("no margin box clear of earlier steps")?;
    let obs_a = UnsafeSet::new(box_set(far), "margin").unwrap();
    let rep = verify::check_avoid_exact(&exact, std::slice::from_ref(&obs_a)).unwrap();
    ensure(rep.verdict == Verdict::Safe, || format!("(a) verdict {:?}", rep.verdict))?;

    // (b) A copy of a reachable member.
    let member = exact.steps[5].members()[0].clone();
    let own = member.min_norm().unwrap().expect("member is nonempty").value;
    let obs_b = UnsafeSet::new(member.clone(), "copy").unwrap();
    let rep = verify::check_avoid_exact(&exact, std::slice::from_ref(&obs_b)).unwrap();
    ensure(rep.verdict == Verdict::UnsafeIntersectionFound, || format!("(b) verdict {:?}", rep.verdict))?;
    let w = rep.witnesses.iter().find(|w| w.t == 5 && w.member == 0).ok_or("(b) no witness for the copied member")?;
    ensure(w.lp_value - own <= 1e-6 && w.lp_value <= 1.0 + 1e-9, || format!("(b) witness value {} vs member {own}", w.lp_value))?;
    ensure(member.contains_point(&DVector::from_vec(w.point.clone())).unwrap(), || "(b) witness point outside member".into())?;

    // (c) A box between the exact and over-approximate t=5 sets.
    let ho = over.steps[5].interval_hull().unwrap();
    let mut obs_c = None;
    let mut gaps = Vec::new();
    for (axis, upper) in [(0, true), (0, false), (1, true), (1, false)] {
        let gap = if upper { ho[axis].hi - h5[axis].hi } else { h5[axis].lo - ho[axis].lo };
        gaps.push(gap);
        if gap < 1e-3 {
            continue;
        }
        let mut b = ho.clone();
        b[axis] = if upper {
            Interval::new(h5[axis].hi + gap / 3.0, ho[axis].hi)
        } else {
            Interval::new(ho[axis].lo, h5[axis].lo - gap / 3.0)
        };
        let o = UnsafeSet::new(box_set(&b), "gap").unwrap();
        if verify::check_avoid_exact(&exact, std::slice::from_ref(&o)).unwrap().verdict == Verdict::Safe {
            obs_c = Some(o);
            break;
        }
    }
    let obs_c = obs_c.ok_or_else(|| format!("(c) no usable gap between hulls: {gaps:?}"))?;
    let rep_over = verify::check_avoid_over(&over, std::slice::from_ref(&obs_c)).unwrap();
    ensure(rep_over.verdict == Verdict::Unknown, || format!("(c) over verdict {:?}", rep_over.verdict))?;

    let all = [obs_a, obs_b, obs_c];
    let n_sum: usize = exact.member_counts()[1..].iter().sum();
    let re = verify::check_avoid_exact(&exact, &all).unwrap();
    let ro = verify::check_avoid_over(&over, &all).unwrap();
    ensure(re.lp_count == 3 * n_sum, || format!("exact lp_count {} != {}", re.lp_count, 3 * n_sum))?;
    ensure(ro.lp_count == 3 * 5, || format!("over lp_count {} != 15", ro.lp_count))?;
    Ok(format!(
        "margin box safe; member copy unsafe (value {:.4} = member {own:.4}); gap box unknown/safe; lp counts {} and {}",
        w.lp_value, re.lp_count, ro.lp_count
    ))
}

fn c7_nonlinear() -> Outcome {
    let s = load("duffing.json");
    let start = Instant::now();
    let reach = run::compute_reach(&s).map_err(|e| e.to_string())?;
    let tr = sampling::sample_trajectories(&s, 1000, s.seed).unwrap();
    let rep = sampling::containment(&reach, &tr).unwrap();
    let secs = start.elapsed().as_secs_f64();
    ensure(reach.horizon() == 2, || format!("horizon {}", reach.horizon()))?;
    for st in &rep.steps {
        ensure(st.contained == st.total && st.total == 1000, || format!("t={}: {}/{}", st.t, st.contained, st.total))?;
    }
    ensure(secs < 120.0, || format!("took {secs:.1} s"))?;

    let affine = NonlinearModel::parse(&["x1 + x2", "x2"], DMatrix::from_row_slice(2, 1, &[0.5, 1.0])).unwrap();
    let net = load("double_integrator.json").network;
    let lin = reach::reach_exact(&di_x0(), &di_model(), &net, 5).unwrap();
    let non = reach::reach_nonlinear(&di_x0(), &affine, &net, 5, false).unwrap();
    ensure(lin.member_counts() == non.member_counts(), || format!("{:?} vs {:?}", lin.member_counts(), non.member_counts()))?;
    let mut worst = 0.0f64;
    for t in 0..=5 {
        for d in directions(16) {
            let (a, b) = (union_support(&lin.steps[t], &d), union_support(&non.steps[t], &d));
            worst = worst.max((a.lo - b.lo).abs()).max((a.hi - b.hi).abs());
        }
    }
    ensure(worst <= 1e-7, || format!("affine vs linear support error {worst:.2e}"))?;
    Ok(format!("Duffing 1000/1000 at t=0..2 in {secs:.2} s (members {:?}); affine vs linear error {worst:.1e}", reach.member_counts()))
}

fn c8_determinism() -> Outcome {
    let mut sizes = Vec::new();
    for name in ["double_integrator.json", "duffing.json"] {
        let s = load(name);
        let mut docs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            run::run(&s, &RunOptions { out_dir: Some(dir.path().to_path_buf()), ..Default::default() }).map_err(|e| e.to_string())?;
            let mut bytes = Vec::new();
            for f in [run::REACH_FILE, run::REPORT_FILE] {
                let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(f)).unwrap()).unwrap();
                bytes.extend(serde_json::to_vec_pretty(&run::strip_timings(v)).unwrap());
            }
            docs.push(bytes);
        }
        ensure(docs[0] == docs[1], || format!("{name}: outputs differ between runs"))?;
        sizes.push(format!("{name} {} bytes", docs[0].len()));
    }
    Ok(format!("identical results across runs: {}", sizes.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("soundness on the double integrator", c1_soundness),
        ("over-approximation contains exact set", c2_over_contains_exact),
        ("linear controller matches closed form", c3_linear_controller),
        ("set kernel against grid oracle", c4_set_kernel),
        ("exact and relaxed ReLU layers", c5_network_layers),
        ("verification verdicts", c6_verification),
        ("nonlinear plant linearization", c7_nonlinear),
        ("deterministic output", c8_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {}. {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
