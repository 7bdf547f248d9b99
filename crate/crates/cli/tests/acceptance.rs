//! Desk-scale acceptance run. Prints one line per criterion and fails if any
//! hard criterion fails.

use std::fmt::Write as _;

use portfolio_select::apsp::{apsp_dijkstra, apsp_floyd_warshall, apsp_peng};
use portfolio_select::eval::{wilcoxon_both, wilcoxon_signed_rank};
use portfolio_select::features::{
    degree_sequence_features, lp_bag_of_features, lp_svd_features, svd_compress, LP_BAG,
};
use portfolio_select::graph::WeightedGraph;
use portfolio_select::learn::{
    gbdt_train, mlp_train, softmax, Activation, GbdtConfig, LayerSpec, Loss, MlpConfig, MlpModel, Node, Optimizer, Tree,
};
use portfolio_select::linalg::Matrix;
use portfolio_select::lp::{chvatal_example, LpForm, LpInstance};
use portfolio_select::lp_gen::{generate_lp, LpGenConfig};
use portfolio_select::simplex::{pivot_scores, slack_tableau, solve, PivotRule, SimplexOptions};
use portfolio_select_cli::acceptance::{Check, Status};
use portfolio_select_cli::config::{CaseStudy, ExperimentConfig, Scale};
use portfolio_select_cli::featurize::cmd_featurize;
use portfolio_select_cli::generate::{cmd_generate, load_graph_entries};
use portfolio_select_cli::workspace::Workspace;
use portfolio_select_cli::{cmd_reproduce, Reproduction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(criterion: u8, label: &str, failures: &[String], detail: String) -> Check {
    let detail = if failures.is_empty() { detail } else { format!("{detail}; {}", failures.join("; ")) };
    Check::hard(criterion, label, failures.is_empty(), detail)
}

fn merge(criterion: u8, label: &str, parts: &[&Check]) -> Check {
    let status = if parts.iter().any(|c| c.failed()) {
        Status::Fail
    } else if parts.iter().any(|c| c.status == Status::Skip) {
        Status::Skip
    } else {
        Status::Pass
    };
    let detail = parts.iter().map(|c| c.detail.as_str()).collect::<Vec<_>>().join(" | ");
    Check::new(criterion, label, status, detail)
}

fn from_run(run: &Reproduction, criterion: u8) -> Check {
    run.checks
        .iter()
        .find(|c| c.criterion == criterion)
        .cloned()
        .unwrap_or_else(|| panic!("criterion {criterion} missing from the run"))
}

fn desk(case: CaseStudy) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_scale(case, Scale::Desk);
    cfg.repetitions = 1;
    cfg
}

// Criterion 1: graph agreement recomputed here, plus brute-force vertex enumeration.

fn apsp_recheck(ws: &Workspace) -> Check {
    let graphs = load_graph_entries(ws).unwrap();
    let mut failures = Vec::new();
    for e in &graphs {
        let (d, _) = apsp_dijkstra(&e.graph);
        let (p, _) = apsp_peng(&e.graph);
        let f = apsp_floyd_warshall(&e.graph);
        if d != f || p != f {
            failures.push(format!("{} disagrees", e.graph.id));
        }
    }
    let max_n = graphs.iter().map(|e| e.graph.n).max().unwrap_or(0);
    check(1, "APSP recomputation", &failures, format!("{} graphs recomputed (max n {max_n}), all identical", graphs.len()))
}

/// Maximum of `c·x` over the vertices of `{Ax ≤ b, x ≥ 0}` by enumerating
/// every choice of `n` tight constraints.
fn vertex_enumeration(lp: &LpInstance) -> Option<f64> {
    let (m, n) = (lp.m(), lp.n());
    let mut rows: Vec<(Vec<f64>, f64)> = (0..m).map(|i| (lp.a.row(i).to_vec(), lp.b[i])).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let mut aug: Vec<Vec<f64>> = pick.iter().map(|&r| {
            let mut v = rows[r].0.clone();
            v.push(rows[r].1);
            v
        }).collect();
        if let Some(x) = gauss(&mut aug, n) {
            let scale = rows.iter().map(|r| r.1.abs()).fold(1.0, f64::max);
            let feasible = rows.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9 * scale);
            if feasible {
                let obj: f64 = lp.c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(obj, |b| b.max(obj)));
            }
        }
        // Next n-combination of the m + n constraints.
        let total = rows.len();
        let mut i = n;
        while i > 0 && pick[i - 1] == total - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        pick[i - 1] += 1;
        for k in i..n {
            pick[k] = pick[k - 1] + 1;
        }
    }
}

fn gauss(aug: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))?;
        if aug[p][col].abs() < 1e-10 {
            return None;
        }
        aug.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = aug[r][col] / aug[col][col];
                for k in col..=n {
                    aug[r][k] -= f * aug[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

fn brute_force_small_lps() -> Check {
    let cfg = LpGenConfig { m_range: [2, 6], n_range: [2, 6], ..LpGenConfig::default() }.with_seed(11);
    let mut failures = Vec::new();
    let mut count = 0;
    for index in 0..200 {
        let lp = generate_lp(&cfg, index).unwrap();
        assert!(lp.m() + lp.n() <= 12);
        let Some(bf) = vertex_enumeration(&lp) else {
            failures.push(format!("{}: no feasible vertex", lp.id));
            continue;
        };
        for rule in PivotRule::ALL {
            let r = solve(&lp, rule, &SimplexOptions::default()).unwrap();
            if (r.objective - bf).abs() > 1e-9 * bf.abs().max(1.0) {
                failures.push(format!("{} {rule}: {} vs {bf}", lp.id, r.objective));
            }
        }
        count += 1;
    }
    check(1, "brute force", &failures, format!("{count} LPs with m + n <= 12 match vertex enumeration under all rules"))
}

// Criterion 2.

fn worked_example() -> Check {
    let lp = chvatal_example();
    let tab = slack_tableau(&lp).unwrap();
    let mut failures = Vec::new();
    let argmax = |scores: &[(usize, f64)]| scores.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let dantzig = pivot_scores(&tab, PivotRule::Dantzig);
    if argmax(&dantzig) != 0 {
        failures.push("Dantzig does not pick x1".into());
    }
    let se = pivot_scores(&tab, PivotRule::SteepestEdge);
    if argmax(&se) != 2 {
        failures.push("steepest edge does not pick x3".into());
    }
    let gi = pivot_scores(&tab, PivotRule::GreatestImprovement);
    let want_gi = [12.5, 20.0 / 3.0, 12.0];
    let want_se = [5.0 / 30f64.sqrt(), 4.0 / 27f64.sqrt(), 3.0 / 10f64.sqrt()];
    for (got, want, name) in [(&gi, want_gi, "increments"), (&se, want_se, "rates")] {
        let ok = got.len() == 3 && got.iter().zip(want).all(|((_, s), w)| (s - w).abs() <= 1e-12);
        if !ok {
            failures.push(format!("{name} {got:?}"));
        }
    }
    check(2, "worked pricing example", &failures, "x1 by Dantzig, x3 by steepest edge, increments and rates to 1e-12".into())
}

// Criterion 7: learner suites against oracles written here.

fn best_gain(x: &Matrix, rows: &[usize], g: &[f64], h: &[f64], lambda: f64, mcw: f64) -> f64 {
    let gt: f64 = rows.iter().map(|&r| g[r]).sum();
    let ht: f64 = rows.iter().map(|&r| h[r]).sum();
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let mut best = 0.0f64;
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x.row(r)[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (mut gl, mut hl) = (0.0, 0.0);
            for &r in rows {
                if x.row(r)[f] < t {
                    gl += g[r];
                    hl += h[r];
                }
            }
            if hl < mcw || ht - hl < mcw {
                continue;
            }
            best = best.max(0.5 * (score(gl, hl) + score(gt - gl, ht - hl) - score(gt, ht)));
        }
    }
    best
}

fn walk(tree: &Tree, node: usize, x: &Matrix, rows: &[usize], g: &[f64], h: &[f64], depth: usize, max_depth: usize) -> Result<(), String> {
    let best = if depth < max_depth { best_gain(x, rows, g, h, 1.0, 1.0) } else { 0.0 };
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => {
            if best > 1e-10 {
                return Err(format!("leaf at depth {depth} where a split gains {best}"));
            }
            let gs: f64 = rows.iter().map(|&r| g[r]).sum();
            let hs: f64 = rows.iter().map(|&r| h[r]).sum();
            let want = -gs / (hs + 1.0);
            if (value - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(format!("leaf {value} vs {want}"));
            }
            Ok(())
        }
        Node::Split { feature, threshold, gain, left, right, .. } => {
            if (gain - best).abs() > 1e-9 * best.abs().max(1.0) {
                return Err(format!("split gain {gain} vs best {best}"));
            }
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.row(i)[*feature] < *threshold);
            walk(tree, *left, x, &l, g, h, depth + 1, max_depth)?;
            walk(tree, *right, x, &r, g, h, depth + 1, max_depth)
        }
    }
}

fn learner_suites() -> Check {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut trees = 0;
    while trees < 200 {
        let n = rng.random_range(2..=30);
        let f = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.random_range(0..6) as f64).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let depth = rng.random_range(1..=3);
        let cfg = GbdtConfig { n_estimators: 1, max_depth: depth, learning_rate: 0.3, ..Default::default() };
        let model = gbdt_train(&cfg, &x, &y).unwrap();
        let base = y.iter().sum::<f64>() / n as f64;
        let g: Vec<f64> = y.iter().map(|t| base - t).collect();
        let h = vec![1.0; n];
        let all: Vec<usize> = (0..n).collect();
        if let Err(e) = walk(&model.trees[0], 0, &x, &all, &g, &h, 0, depth) {
            failures.push(format!("tree {trees}: {e}"));
        }
        trees += 1;
    }

    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - r[1] * r[2] + 0.1 * rng.random_range(-1.0..1.0)).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let cfg = GbdtConfig { n_estimators: 60, max_depth: 4, learning_rate: 0.2, seed: 3, ..Default::default() };
    let a = gbdt_train(&cfg, &x, &y).unwrap();
    let mut prev = a.initial_loss;
    for (i, &l) in a.train_loss.iter().enumerate() {
        if l > prev + 1e-12 {
            failures.push(format!("GBDT loss rose at round {i}: {prev} -> {l}"));
            break;
        }
        prev = l;
    }
    let b = gbdt_train(&cfg, &x, &y).unwrap();
    if serde_json::to_string(&a).unwrap() != serde_json::to_string(&b).unwrap() {
        failures.push("GBDT serialization differs on rerun".into());
    }

    let labels: Vec<f64> = rows.iter().map(|r| if r[0] + r[1] > 0.0 { 1.0 } else if r[2] > 0.3 { 2.0 } else { 0.0 }).collect();
    let mlp = MlpConfig {
        layers: vec![
            LayerSpec::new(8, Activation::Elu, 0.0),
            LayerSpec::new(6, Activation::Sigmoid, 0.0),
            LayerSpec::new(3, Activation::Softmax, 0.0),
        ],
        loss: Loss::CategoricalCrossEntropy,
        optimizer: Optimizer::adam(0.01),
        batch_size: 32,
        epochs: 5,
        seed: 9,
        validation_split: 0.1,
    };
    let small = Matrix::from_rows(&rows[..12]).unwrap();
    let model = MlpModel::init(&mlp, 5).unwrap();
    let (_, grads) = model.loss_and_gradients(&small, &labels[..12]).unwrap();
    let step = 1e-6;
    let mut worst = 0.0f64;
    for l in 0..model.layers.len() {
        let (r, c) = model.layers[l].w.dim();
        for i in 0..r {
            for j in 0..c {
                let mut p = model.clone();
                p.layers[l].w[(i, j)] += step;
                let mut q = model.clone();
                q.layers[l].w[(i, j)] -= step;
                let fd = (p.loss_and_gradients(&small, &labels[..12]).unwrap().0
                    - q.loss_and_gradients(&small, &labels[..12]).unwrap().0)
                    / (2.0 * step);
                let bp = grads[l].0[(i, j)];
                worst = worst.max((fd - bp).abs() / fd.abs().max(bp.abs()).max(1e-6));
            }
        }
    }
    if worst >= 1e-4 {
        failures.push(format!("MLP gradient relative error {worst:.2e}"));
    }
    for logits in [vec![1000.0, -1000.0, 0.0], vec![0.1, 0.2, 0.3], vec![-50.0; 4]] {
        let s: f64 = softmax(&logits).iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            failures.push(format!("softmax sums to {s}"));
        }
    }
    let m1 = mlp_train(&mlp, &x, &labels).unwrap();
    let m2 = mlp_train(&mlp, &x, &labels).unwrap();
    if serde_json::to_string(&m1).unwrap() != serde_json::to_string(&m2).unwrap() {
        failures.push("MLP serialization differs on rerun".into());
    }
    check(
        7,
        "learner property suites",
        &failures,
        format!("{trees} trees match the split oracle, monotone loss, gradient error {worst:.1e}, softmax, bit-identical reruns"),
    )
}

// Criterion 8.

fn statistics() -> Check {
    let mut failures = Vec::new();
    let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
    if !(r.exact && r.statistic == 0.0 && r.p_value == 0.25) {
        failures.push(format!("n = 3 all negative: W {} p {}", r.statistic, r.p_value));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(15..=25);
        let shift = rng.random_range(-0.5..0.5);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + shift + rng.random_range(-1.0..1.0)).collect();
        let (exact, approx) = wilcoxon_both(&x, &y).unwrap();
        worst = worst.max((exact - approx).abs());
    }
    if worst > 0.02 {
        failures.push(format!("normal approximation off by {worst}"));
    }
    check(8, "Wilcoxon signed-rank", &failures, format!("n = 3, W = 0 gives p = 0.25; max |exact - normal| = {worst:.4}"))
}

// Criterion 9.

/// Largest singular value by power iteration on `AᵀA`.
fn spectral_norm(a: &Matrix) -> f64 {
    let mut v = vec![1.0; a.cols()];
    let mut s = 0.0;
    for _ in 0..2000 {
        let av: Vec<f64> = (0..a.rows()).map(|i| a.row(i).iter().zip(&v).map(|(p, q)| p * q).sum()).collect();
        let mut w = vec![0.0; a.cols()];
        for i in 0..a.rows() {
            for (j, x) in a.row(i).iter().enumerate() {
                w[j] += x * av[i];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / norm).collect();
        s = norm.sqrt();
    }
    s
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relabel(g: &WeightedGraph, perm: &[u32]) -> WeightedGraph {
    let edges = g.edges.iter().map(|&(u, v, w)| (perm[u as usize], perm[v as usize], w)).collect();
    WeightedGraph::new(format!("{}-perm", g.id), g.n, edges).unwrap()
}

fn feature_suite() -> Check {
    let mut failures = Vec::new();
    let cfg = LpGenConfig::smoke().with_seed(5);
    for index in 0..20 {
        let lp = generate_lp(&cfg, index).unwrap();
        let full = svd_compress(&lp.a, lp.m().max(lp.n()));
        let want = frobenius(lp.a.as_slice());
        if (frobenius(&full) - want).abs() > 1e-6 * want {
            failures.push(format!("{}: full-rank block norm {} vs {want}", lp.id, frobenius(&full)));
        }
        let k = 3;
        let block = Matrix::from_vec(k, k, svd_compress(&lp.a, k)).unwrap();
        let (s1, s2) = (spectral_norm(&lp.a), spectral_norm(&block));
        if (s1 - s2).abs() > 1e-6 * s1 {
            failures.push(format!("{}: top singular value {s2} vs {s1}", lp.id));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut edges = Vec::new();
    for u in 0..60u32 {
        for v in (u + 1)..60 {
            if rng.random_bool(0.1) {
                edges.push((u, v, rng.random_range(1..=100)));
            }
        }
    }
    let g = WeightedGraph::new("perm", 60, edges).unwrap();
    let mut perm: Vec<u32> = (0..60).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    for q in [10, 50, 80] {
        if degree_sequence_features(&g, q).unwrap() != degree_sequence_features(&relabel(&g, &perm), q).unwrap() {
            failures.push(format!("degree features change under relabeling (q = {q})"));
        }
    }

    let mut fired = std::collections::BTreeSet::new();
    let zero_a = LpInstance::new("zero", LpForm::Inequality, Matrix::zeros(2, 2), vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
    let huge = LpInstance::new(
        "huge",
        LpForm::Inequality,
        Matrix::from_rows(&[[1e300, -1e300], [1e300, 1e300]]).unwrap(),
        vec![1e-300, 1.0],
        vec![1.0, 1.0],
    )
    .unwrap();
    for lp in [&zero_a, &huge] {
        for fv in [lp_bag_of_features(lp).unwrap(), lp_svd_features(lp, 2).unwrap()] {
            if fv.values.iter().any(|v| !v.is_finite()) {
                failures.push(format!("{}: non-finite {}", lp.id, fv.schema_id));
            }
            fired.extend(fv.flags);
        }
    }
    let tiny = WeightedGraph::new("tiny", 5, vec![(0, 1, 3)]).unwrap();
    fired.extend(degree_sequence_features(&tiny, 50).unwrap().flags);
    let expected = ["degree_stride_zero", "empty:a", "empty:a_over_b", "empty:a_over_c", "empty:b_over_deg", "empty:c_over_deg", "nonfinite"];
    for rule in expected {
        if !fired.contains(rule) {
            failures.push(format!("sentinel `{rule}` never fired"));
        }
    }

    let headers: Vec<Vec<String>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = ExperimentConfig::for_scale(CaseStudy::Simplex, Scale::Smoke);
            cfg.train = 6;
            cfg.test = 2;
            let ws = Workspace::init(dir.path(), &cfg).unwrap();
            cmd_generate(&ws, &cfg).unwrap();
            cmd_featurize(&ws, &cfg, &cfg.schemas).unwrap();
            cfg.schemas
                .iter()
                .map(|s| std::fs::read_to_string(ws.features_path(s)).unwrap().lines().next().unwrap().to_string())
                .collect()
        })
        .collect();
    if headers[0] != headers[1] {
        failures.push("CSV headers differ between runs".into());
    }
    if !headers[0][0].starts_with("id,split,m,n,") || !headers[0].iter().all(|h| h.contains(",best,cost_dantzig,")) {
        failures.push(format!("unexpected {LP_BAG} header {}", headers[0][0]));
    }
    check(
        9,
        "feature suite",
        &failures,
        format!("spectrum preserved, degree features relabeling-invariant, sentinels {fired:?}, headers byte-identical"),
    )
}

#[test]
fn acceptance() {
    let simplex_dir = tempfile::tempdir().unwrap();
    let apsp_dir = tempfile::tempdir().unwrap();
    let simplex = cmd_reproduce(simplex_dir.path(), &desk(CaseStudy::Simplex)).unwrap();
    let apsp_cfg = desk(CaseStudy::Apsp);
    let apsp = cmd_reproduce(apsp_dir.path(), &apsp_cfg).unwrap();
    let apsp_ws = Workspace::at(apsp_dir.path(), &apsp_cfg);

    let checks = vec![
        merge(
            1,
            "correctness oracles",
            &[&from_run(&apsp, 1), &apsp_recheck(&apsp_ws), &from_run(&simplex, 1), &brute_force_small_lps()],
        ),
        worked_example(),
        from_run(&apsp, 3),
        from_run(&simplex, 4),
        from_run(&simplex, 5),
        from_run(&apsp, 6),
        learner_suites(),
        statistics(),
        feature_suite(),
        from_run(&apsp, 10),
    ];
    let mut summary = String::new();
    for c in &checks {
        println!("{c}");
        let _ = writeln!(summary, "{c}");
    }
    let failed: Vec<u8> = checks.iter().filter(|c| c.failed() || c.status == Status::Skip).map(|c| c.criterion).collect();
    assert!(failed.is_empty(), "criteria {failed:?} did not pass:\n{summary}");
}
