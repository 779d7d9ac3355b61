//! Human-readable listing of everything a config can name.

use std::fmt::Write;

use resolvent_core::splitting::Generator;
use resolvent_core::{Algorithm, RateFormula};

use crate::config::PropertyCheck;

fn builder_summary(name: &str) -> &'static str {
    match name {
        "relaxed_admm" => "relaxed ADMM on min f(x)+g(u) s.t. Ax+Bu=c; state (x, u, s); params tau, gamma in ]0, 2[",
        "proximal_admm" => "proximal ADMM with terms P1, P2 (scalar, linearized or matrix); state (x, u, s); param tau",
        "pdhg_mp" => "primal-dual hybrid gradient, dual step first, on min f(x)+g(Ax); state (s, x); sigma tau ||A||^2 < 1",
        "pdhg_mu" => "primal-dual hybrid gradient, primal extrapolation; state (s, x_prev); sigma tau ||A||^2 < 1",
        "alm" => "augmented Lagrangian on min h(x) s.t. Ax=c; state (x, s); param tau",
        "linearized_alm" => "linearized augmented Lagrangian; state (x, s); rho > tau ||A^T A||",
        "linearized_bregman" => "linearized Bregman; state (x, s); 1/rho >= ||A^T A||",
        "proximal_point" => "relaxed proximal point on h + x^T L x/2 + <shift, x>; Q = rho I or rho I - L (linearize)",
        _ => "",
    }
}

/// Builders, rate formulas, property checks and problem generators.
pub fn catalog() -> String {
    let mut out = String::new();
    let _ = writeln!(out, "builders ({}):", Algorithm::NAMES.len());
    for name in Algorithm::NAMES {
        let _ = writeln!(out, "  {name} -> {}", builder_summary(name));
    }
    let _ = writeln!(out, "\nrate formulas ({}):", RateFormula::ALL.len());
    for f in RateFormula::ALL {
        let _ = writeln!(
            out,
            "  {} -> {} [constants: {}]",
            f.name(),
            f.describe(),
            f.required_constants().join(", ")
        );
    }
    let _ = writeln!(out, "\nproperty checks ({}):", PropertyCheck::ALL.len());
    for p in PropertyCheck::ALL {
        let _ = writeln!(out, "  {} -> {}", p.name(), p.describe());
    }
    let _ = writeln!(out, "\nproblem generators ({}):", Generator::ALL.len());
    for g in Generator::ALL {
        let _ = writeln!(out, "  {} -> {}", g.name(), g.describe());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_counts() {
        let text = catalog();
        assert!(text.contains("rate formulas (12):"));
        assert!(text.contains("problem generators (3):"));
        assert!(text.contains("relaxed_admm -> relaxed ADMM"));
        for name in Algorithm::NAMES {
            assert!(!builder_summary(name).is_empty(), "{name}");
        }
    }
}
