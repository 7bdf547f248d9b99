//! Two-phase primal simplex parameterized by a pivot rule.
//!
//! Every basis change counts as one iteration, including Phase I pivots and
//! the pivots that drive artificial variables out of the basis.

mod pricing;
mod reference;
mod tableau;

use serde::{Deserialize, Serialize};

use crate::linalg::{max_abs, LinalgError};
use crate::lp::{to_standard_form, LpError, LpForm, LpInstance};

pub use pricing::{choose_pivot, edge_norm, objective_increment, PivotRule, Pricer, DEVEX_RESET};
pub use reference::{brute_force_optimum, BruteForce};
pub use tableau::{Tableau, PIVOT_TOL};

/// Steps at or below this length are degenerate.
pub const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    /// Overrides the default limit of `50·(m + n)` basis changes.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    pub bland_fallback: bool,
    /// Pivots between full refactorizations of the tableau.
    pub refactor_interval: usize,
    pub hybrid_divisor: usize,
    pub trace: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            degenerate_limit: 100,
            bland_fallback: true,
            refactor_interval: 50,
            hybrid_divisor: 4,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexStatus {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub phase: u8,
    pub entering: usize,
    pub leaving: usize,
    pub step: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    pub bland: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub status: SimplexStatus,
    pub objective: f64,
    /// Values of the input instance's variables (slacks excluded for
    /// inequality-form input).
    pub x: Vec<f64>,
    pub iterations: usize,
    pub phase1_iterations: usize,
    pub rule: PivotRule,
    pub bland_activations: usize,
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplexError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("basis factorization failed: {0}")]
    Linalg(#[from] LinalgError),
    #[error("problem is infeasible (phase I objective {phase1_objective})")]
    Infeasible { phase1_objective: f64 },
}

/// Default iteration limit for a standard-form problem with `m` rows and `n` columns.
pub fn iteration_limit(m: usize, n: usize) -> usize {
    50 * (m + n)
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

struct Run<'a> {
    opts: &'a SimplexOptions,
    limit: usize,
    iterations: usize,
    bland_activations: usize,
    trace: Vec<TraceStep>,
}

impl Run<'_> {
    fn phase(&mut self, phase: u8, tab: &mut Tableau, pricer: &mut Pricer) -> PhaseEnd {
        let mut degenerate_run = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.limit {
                return PhaseEnd::Limit;
            }
            let Some(q) = pricer.choose(tab) else {
                return PhaseEnd::Optimal;
            };
            let Some((row, step)) = tab.ratio_test(q) else {
                return PhaseEnd::Unbounded;
            };
            let before = tab.objective();
            let leaving = tab.basis()[row];
            let bland = pricer.is_bland();
            pricer.before_pivot(tab, row, q);
            tab.pivot(row, q);
            self.iterations += 1;
            since_refactor += 1;
            if since_refactor >= self.opts.refactor_interval.max(1) {
                since_refactor = 0;
                // A failed refactorization keeps the updated tableau.
                if let Err(e) = tab.refactor() {
                    log::debug!("refactorization skipped: {e}");
                }
            }
            if self.opts.trace {
                self.trace.push(TraceStep {
                    phase,
                    entering: q,
                    leaving,
                    step,
                    objective_before: before,
                    objective_after: tab.objective(),
                    bland,
                });
            }
            if step <= DEGENERATE_STEP {
                degenerate_run += 1;
                if self.opts.bland_fallback && !pricer.is_bland() && degenerate_run >= self.opts.degenerate_limit {
                    pricer.set_bland(true);
                    self.bland_activations += 1;
                }
            } else {
                degenerate_run = 0;
                pricer.set_bland(false);
            }
        }
    }
}

/// Initial basis for `A x = b` with `b ≥ 0`: for each row, an existing
/// column equal to that unit vector if any, otherwise `None`.
fn unit_columns(lp: &LpInstance) -> Vec<Option<usize>> {
    let (m, n) = (lp.m(), lp.n());
    let mut found = vec![None; m];
    for j in 0..n {
        let mut hit = None;
        let mut ok = true;
        for i in 0..m {
            let v = lp.a[(i, j)];
            if v == 0.0 {
                continue;
            }
            if v == 1.0 && hit.is_none() {
                hit = Some(i);
            } else {
                ok = false;
                break;
            }
        }
        if let (true, Some(i)) = (ok, hit) {
            if found[i].is_none() {
                found[i] = Some(j);
            }
        }
    }
    found
}

/// Solves `max cᵀx` over `lp` with the given pivot rule.
pub fn solve(lp: &LpInstance, rule: PivotRule, opts: &SimplexOptions) -> Result<SimplexResult, SimplexError> {
    lp.validate()?;
    let (std_lp, n_out) = match lp.form {
        LpForm::Inequality => (to_standard_form(lp)?, lp.n()),
        LpForm::Standard => (lp.clone(), lp.n()),
    };
    let mut std_lp = std_lp;
    for i in 0..std_lp.m() {
        if std_lp.b[i] < 0.0 {
            std_lp.b[i] = -std_lp.b[i];
            std_lp.a.row_mut(i).iter_mut().for_each(|v| *v = -*v);
        }
    }
    let (m, n) = (std_lp.m(), std_lp.n());
    let units = unit_columns(&std_lp);
    let missing: Vec<usize> = (0..m).filter(|&i| units[i].is_none()).collect();
    let width = n + missing.len();

    let mut a = crate::linalg::Matrix::zeros(m, width);
    for i in 0..m {
        a.row_mut(i)[..n].copy_from_slice(std_lp.a.row(i));
    }
    let mut basis = vec![0usize; m];
    for i in 0..m {
        if let Some(j) = units[i] {
            basis[i] = j;
        }
    }
    for (k, &i) in missing.iter().enumerate() {
        a[(i, n + k)] = 1.0;
        basis[i] = n + k;
    }

    let limit = opts.max_iterations.unwrap_or_else(|| iteration_limit(m, n));
    let mut run = Run {
        opts,
        limit,
        iterations: 0,
        bland_activations: 0,
        trace: Vec::new(),
    };

    let mut phase2_cost = std_lp.c.clone();
    phase2_cost.resize(width, 0.0);

    let mut tab;
    if missing.is_empty() {
        tab = Tableau::new(a, std_lp.b.clone(), phase2_cost.clone(), basis)?;
    } else {
        let mut cost1 = vec![0.0; width];
        cost1[n..].iter_mut().for_each(|v| *v = -1.0);
        tab = Tableau::new(a, std_lp.b.clone(), cost1, basis)?;
        let mut pricer = Pricer::new(rule, width, n, 1e-9 * 2.0).with_hybrid_divisor(opts.hybrid_divisor);
        match run.phase(1, &mut tab, &mut pricer) {
            PhaseEnd::Limit => return Ok(finish(&run, &tab, SimplexStatus::IterationLimit, rule, n_out, &std_lp)),
            // Phase I is bounded above by zero; an unbounded ray means numerical trouble.
            PhaseEnd::Unbounded | PhaseEnd::Optimal => {}
        }
        let p1 = tab.objective();
        if p1 < -1e-7 * (1.0 + max_abs(&std_lp.b)) {
            return Err(SimplexError::Infeasible { phase1_objective: p1 });
        }
        drive_out_artificials(&mut tab, n, &mut run);
        for j in n..width {
            tab.set_eligible(j, false);
        }
        tab.set_cost(phase2_cost);
    }
    let phase1_iterations = run.iterations;

    let tol = 1e-9 * (1.0 + max_abs(&std_lp.c));
    let mut pricer = Pricer::new(rule, width, n, tol).with_hybrid_divisor(opts.hybrid_divisor);
    let status = match run.phase(2, &mut tab, &mut pricer) {
        PhaseEnd::Optimal => SimplexStatus::Optimal,
        PhaseEnd::Unbounded => SimplexStatus::Unbounded,
        PhaseEnd::Limit => SimplexStatus::IterationLimit,
    };
    let mut result = finish(&run, &tab, status, rule, n_out, &std_lp);
    result.phase1_iterations = phase1_iterations;
    Ok(result)
}

fn drive_out_artificials(tab: &mut Tableau, n: usize, run: &mut Run<'_>) {
    for row in 0..tab.m() {
        if tab.basis()[row] < n {
            continue;
        }
        let entering = (0..n)
            .filter(|&j| !tab.is_basic(j))
            .max_by(|&p, &q| tab.entry(row, p).abs().total_cmp(&tab.entry(row, q).abs()).then(q.cmp(&p)));
        if let Some(j) = entering {
            if tab.entry(row, j).abs() > PIVOT_TOL {
                tab.pivot(row, j);
                run.iterations += 1;
            }
        }
    }
}

fn finish(
    run: &Run<'_>,
    tab: &Tableau,
    status: SimplexStatus,
    rule: PivotRule,
    n_out: usize,
    std_lp: &LpInstance,
) -> SimplexResult {
    let full = tab.solution();
    let x: Vec<f64> = full[..n_out].to_vec();
    let objective = std_lp.c.iter().zip(&full).map(|(c, x)| c * x).sum();
    SimplexResult {
        status,
        objective,
        x,
        iterations: run.iterations,
        phase1_iterations: run.iterations,
        rule,
        bland_activations: run.bland_activations,
        trace: run.trace.clone(),
    }
}

/// Tableau of an inequality-form instance with `b ≥ 0` at its slack basis,
/// priced with the original objective.
pub fn slack_tableau(lp: &LpInstance) -> Result<Tableau, SimplexError> {
    let std_lp = to_standard_form(lp)?;
    if std_lp.b.iter().any(|&v| v < 0.0) {
        return Err(SimplexError::Lp(LpError::InvalidBasis(
            "slack basis is infeasible for negative b".into(),
        )));
    }
    let (m, n) = (lp.m(), lp.n());
    let basis: Vec<usize> = (n..n + m).collect();
    Ok(Tableau::new(std_lp.a, std_lp.b, std_lp.c, basis)?)
}

/// Scores of every improving column under `rule` on `tab`, as
/// `(column, score)` pairs. Hybrid is scored in its initial mode.
pub fn pivot_scores(tab: &Tableau, rule: PivotRule) -> Vec<(usize, f64)> {
    Pricer::new(rule, tab.n(), tab.n(), 1e-9).scores(tab)
}

/// A value for each pivot rule, serialized under the rule keys.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleMap<T> {
    pub dantzig: T,
    pub hybrid: T,
    pub devex: T,
    pub steepest: T,
    pub greatest: T,
}

impl<T> RuleMap<T> {
    pub fn from_fn(mut f: impl FnMut(PivotRule) -> T) -> Self {
        Self {
            dantzig: f(PivotRule::Dantzig),
            hybrid: f(PivotRule::Hybrid),
            devex: f(PivotRule::Devex),
            steepest: f(PivotRule::SteepestEdge),
            greatest: f(PivotRule::GreatestImprovement),
        }
    }

    pub fn get(&self, rule: PivotRule) -> &T {
        match rule {
            PivotRule::Dantzig => &self.dantzig,
            PivotRule::Hybrid => &self.hybrid,
            PivotRule::Devex => &self.devex,
            PivotRule::SteepestEdge => &self.steepest,
            PivotRule::GreatestImprovement => &self.greatest,
        }
    }

    pub fn get_mut(&mut self, rule: PivotRule) -> &mut T {
        match rule {
            PivotRule::Dantzig => &mut self.dantzig,
            PivotRule::Hybrid => &mut self.hybrid,
            PivotRule::Devex => &mut self.devex,
            PivotRule::SteepestEdge => &mut self.steepest,
            PivotRule::GreatestImprovement => &mut self.greatest,
        }
    }

    /// Values in tie-break order.
    pub fn values(&self) -> [&T; 5] {
        PivotRule::ALL.map(|r| self.get(r))
    }
}

/// Per-instance outcome of running every pivot rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub instance_id: String,
    pub iterations: RuleMap<usize>,
    pub statuses: RuleMap<SimplexStatus>,
    pub objectives: RuleMap<f64>,
    pub best_rule: PivotRule,
}

impl SolveRecord {
    pub fn all_optimal(&self) -> bool {
        self.statuses.values().iter().all(|s| **s == SimplexStatus::Optimal)
    }

    pub fn min_iterations(&self) -> usize {
        *self.iterations.get(self.best_rule)
    }
}

/// Rule with the fewest iterations; ties go to the earlier rule in
/// [`PivotRule::ALL`].
pub fn best_rule(iterations: &RuleMap<usize>) -> PivotRule {
    let mut best = PivotRule::Dantzig;
    for r in PivotRule::ALL {
        if iterations.get(r) < iterations.get(best) {
            best = r;
        }
    }
    best
}

/// Solves `lp` under every rule. A rule that hits the iteration limit
/// records the limit value with status `IterationLimit`.
pub fn run_portfolio(lp: &LpInstance, opts: &SimplexOptions) -> Result<SolveRecord, SimplexError> {
    let mut iterations = RuleMap::<usize>::default();
    let mut statuses = RuleMap::from_fn(|_| SimplexStatus::Optimal);
    let mut objectives = RuleMap::<f64>::default();
    for rule in PivotRule::ALL {
        let res = solve(lp, rule, opts)?;
        *iterations.get_mut(rule) = res.iterations;
        *statuses.get_mut(rule) = res.status;
        *objectives.get_mut(rule) = res.objective;
    }
    Ok(SolveRecord {
        instance_id: lp.id.clone(),
        best_rule: best_rule(&iterations),
        iterations,
        statuses,
        objectives,
    })
}
