use crate::lp::{basic_solution, to_standard_form, Basis, LpError, LpForm, LpInstance};

/// Best basic feasible solution found by enumerating every basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub objective: f64,
    /// Standard-form solution vector.
    pub x: Vec<f64>,
    pub feasible_bases: usize,
}

/// Maximum of `cᵀx` over all basic feasible solutions, or `None` when no
/// basis is feasible. Exponential in the problem size; meant for tiny
/// instances only. The result is the LP optimum whenever the LP is bounded.
pub fn brute_force_optimum(lp: &LpInstance) -> Result<Option<BruteForce>, LpError> {
    let std_lp = match lp.form {
        LpForm::Inequality => to_standard_form(lp)?,
        LpForm::Standard => lp.clone(),
    };
    let (m, n) = (std_lp.m(), std_lp.n());
    let mut best: Option<BruteForce> = None;
    let mut feasible_bases = 0;
    let mut comb: Vec<usize> = (0..m).collect();
    if m > n {
        return Ok(None);
    }
    loop {
        let basis = Basis::new(comb.clone(), &std_lp)?;
        match basic_solution(&std_lp, &basis) {
            Ok(sol) if sol.feasible => {
                feasible_bases += 1;
                let obj = std_lp.objective(&sol.x);
                if best.as_ref().is_none_or(|b| obj > b.objective) {
                    best = Some(BruteForce {
                        objective: obj,
                        x: sol.x,
                        feasible_bases: 0,
                    });
                }
            }
            Ok(_) | Err(LpError::SingularBasis) => {}
            Err(e) => return Err(e),
        }
        if !next_combination(&mut comb, n) {
            break;
        }
    }
    Ok(best.map(|mut b| {
        b.feasible_bases = feasible_bases;
        b
    }))
}

/// Advances `comb` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_counted() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn example_optimum() {
        let lp = crate::lp::chvatal_example();
        let bf = brute_force_optimum(&lp).unwrap().unwrap();
        assert!((bf.objective - 13.0).abs() < 1e-12);
        assert!((bf.x[0] - 2.0).abs() < 1e-12);
        assert!((bf.x[2] - 1.0).abs() < 1e-12);
    }
}
