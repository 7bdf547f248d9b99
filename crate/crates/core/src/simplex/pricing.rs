//! Entering-variable selection for the five portfolio rules.

use serde::{Deserialize, Serialize};

use super::tableau::Tableau;

/// The pivot rules of the portfolio, declared in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    Dantzig,
    Hybrid,
    Devex,
    SteepestEdge,
    GreatestImprovement,
}

impl PivotRule {
    /// All rules in the fixed tie-break order.
    pub const ALL: [PivotRule; 5] = [
        PivotRule::Dantzig,
        PivotRule::Hybrid,
        PivotRule::Devex,
        PivotRule::SteepestEdge,
        PivotRule::GreatestImprovement,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short key used in record files and CSV headers.
    pub fn key(self) -> &'static str {
        match self {
            PivotRule::Dantzig => "dantzig",
            PivotRule::Hybrid => "hybrid",
            PivotRule::Devex => "devex",
            PivotRule::SteepestEdge => "steepest",
            PivotRule::GreatestImprovement => "greatest",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.key() == key)
    }

    pub fn display_name(self) -> &'static str {
        match self {
            PivotRule::Dantzig => "Dantzig",
            PivotRule::Hybrid => "Hybrid",
            PivotRule::Devex => "Devex",
            PivotRule::SteepestEdge => "Steepest edge",
            PivotRule::GreatestImprovement => "Greatest improvement",
        }
    }
}

impl std::fmt::Display for PivotRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Devex reference weights are reset once any of them exceeds this.
pub const DEVEX_RESET: f64 = 1e7;

/// Mutable pricing state carried across iterations of one solve.
#[derive(Debug, Clone)]
pub struct Pricer {
    rule: PivotRule,
    tol: f64,
    /// Hybrid prices with Dantzig while more than `n / divisor` columns improve.
    hybrid_divisor: usize,
    /// Structural column count used by the hybrid trigger.
    structural: usize,
    hybrid_switched: bool,
    devex_weights: Vec<f64>,
    devex_resets: usize,
    bland: bool,
}

impl Pricer {
    /// `ncols` is the tableau width; `structural` the column count the hybrid
    /// trigger compares against (artificial columns excluded).
    pub fn new(rule: PivotRule, ncols: usize, structural: usize, tol: f64) -> Self {
        Self {
            rule,
            tol,
            hybrid_divisor: 4,
            structural,
            hybrid_switched: false,
            devex_weights: vec![1.0; ncols],
            devex_resets: 0,
            bland: false,
        }
    }

    pub fn rule(&self) -> PivotRule {
        self.rule
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn with_hybrid_divisor(mut self, divisor: usize) -> Self {
        self.hybrid_divisor = divisor.max(1);
        self
    }

    /// Bland mode overrides the rule with smallest-index entering.
    pub fn set_bland(&mut self, on: bool) {
        self.bland = on;
    }

    pub fn is_bland(&self) -> bool {
        self.bland
    }

    pub fn hybrid_switched(&self) -> bool {
        self.hybrid_switched
    }

    pub fn devex_weights(&self) -> &[f64] {
        &self.devex_weights
    }

    pub fn devex_resets(&self) -> usize {
        self.devex_resets
    }

    /// Picks the entering column, or `None` at optimality.
    pub fn choose(&mut self, tab: &Tableau) -> Option<usize> {
        let candidates: Vec<usize> = tab.improving(self.tol).collect();
        if candidates.is_empty() {
            return None;
        }
        if self.bland {
            return candidates.first().copied();
        }
        let effective = match self.rule {
            PivotRule::Hybrid => {
                if !self.hybrid_switched && candidates.len() * self.hybrid_divisor > self.structural {
                    PivotRule::Dantzig
                } else {
                    self.hybrid_switched = true;
                    PivotRule::SteepestEdge
                }
            }
            r => r,
        };
        let scores = score_candidates(effective, tab, &candidates, &self.devex_weights);
        argmax(&scores)
    }

    /// Per-candidate scores under this pricer's rule (hybrid reported in its
    /// current mode). Exposed for diagnostics and the worked examples.
    pub fn scores(&self, tab: &Tableau) -> Vec<(usize, f64)> {
        let candidates: Vec<usize> = tab.improving(self.tol).collect();
        let effective = match self.rule {
            PivotRule::Hybrid if !self.hybrid_switched => PivotRule::Dantzig,
            PivotRule::Hybrid => PivotRule::SteepestEdge,
            r => r,
        };
        score_candidates(effective, tab, &candidates, &self.devex_weights)
            .into_iter()
            .map(|s| (s.col, s.score))
            .collect()
    }

    /// Devex reference-framework update; call before `tab.pivot(row, q)`.
    pub fn before_pivot(&mut self, tab: &Tableau, row: usize, q: usize) {
        if self.rule != PivotRule::Devex {
            return;
        }
        let alpha = tab.row(row);
        let alpha_q = alpha[q];
        let w_q = self.devex_weights[q];
        let leaving = tab.basis()[row];
        for (j, &a) in alpha.iter().enumerate() {
            if j == q || tab.is_basic(j) {
                continue;
            }
            let ratio = a / alpha_q;
            let cand = ratio * ratio * w_q;
            if cand > self.devex_weights[j] {
                self.devex_weights[j] = cand;
            }
        }
        self.devex_weights[leaving] = (w_q / (alpha_q * alpha_q)).max(1.0);
        if self.devex_weights.iter().any(|&w| w > DEVEX_RESET) {
            self.devex_weights.iter_mut().for_each(|w| *w = 1.0);
            self.devex_resets += 1;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    col: usize,
    score: f64,
    /// Secondary key for exact score ties (larger wins).
    secondary: f64,
}

fn score_candidates(rule: PivotRule, tab: &Tableau, candidates: &[usize], devex: &[f64]) -> Vec<Scored> {
    let z = tab.reduced_costs();
    candidates
        .iter()
        .map(|&j| {
            let score = match rule {
                PivotRule::Dantzig | PivotRule::Hybrid => z[j],
                PivotRule::SteepestEdge => z[j] / edge_norm(tab, j),
                PivotRule::Devex => z[j] * z[j] / devex[j],
                PivotRule::GreatestImprovement => objective_increment(tab, j),
            };
            Scored {
                col: j,
                score,
                secondary: z[j],
            }
        })
        .collect()
}

/// Euclidean length of the edge direction of column `j`: the entering unit
/// component plus the basic components `−B⁻¹A_j`.
pub fn edge_norm(tab: &Tableau, j: usize) -> f64 {
    let mut s = 1.0;
    for i in 0..tab.m() {
        let d = tab.entry(i, j);
        s += d * d;
    }
    s.sqrt()
}

/// Objective gain of a full ratio-test step along column `j`
/// (`+∞` if the column is unbounded).
pub fn objective_increment(tab: &Tableau, j: usize) -> f64 {
    match tab.max_step(j) {
        Some(theta) => tab.reduced_costs()[j] * theta,
        None => f64::INFINITY,
    }
}

fn argmax(scores: &[Scored]) -> Option<usize> {
    let mut best: Option<Scored> = None;
    for &s in scores {
        best = match best {
            None => Some(s),
            Some(b) => {
                if s.score > b.score || (s.score == b.score && s.secondary > b.secondary) {
                    Some(s)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.map(|s| s.col)
}

/// Entering column chosen by `pricer` on `tab`, or `None` at optimality.
pub fn choose_pivot(pricer: &mut Pricer, tab: &Tableau) -> Option<usize> {
    pricer.choose(tab)
}
