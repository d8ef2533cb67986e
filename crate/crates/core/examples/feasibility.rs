//! Check a target correlation matrix against simulated discrete bounds, the
//! binary bounds of the collapsed margins, and the range the collapse and
//! expansion steps can reach.

use multidiscrete::engine::collapse_specs;
use multidiscrete::{check_target_matrix, ep_binary_bounds, BoundsOptions, CorrelationMatrix, MarginalSpec};

fn main() -> multidiscrete::Result<()> {
    let specs = [
        MarginalSpec::GeneralizedPoisson { theta: 23.0, lambda: 0.72 },
        MarginalSpec::GeneralizedPoisson { theta: 40.0, lambda: 0.58 },
        MarginalSpec::GeneralizedPoisson { theta: 4.6, lambda: 0.14 },
    ];
    let sigma = CorrelationMatrix::from_upper_triangle(3, &[0.6, 0.24, 0.71])?;
    let margins = collapse_specs(&specs)?;
    for (i, m) in margins.iter().enumerate() {
        println!(
            "X{}: median {}, P(Y = 1) = {:.4}, attenuation {:.4}",
            i + 1,
            m.median_m,
            m.p_b,
            m.attenuation()
        );
    }
    let (lo, hi) = ep_binary_bounds(margins[0].p_b, margins[1].p_b)?;
    println!("binary bounds for (Y1, Y2): [{lo:.4}, {hi:.4}]\n");

    let report = check_target_matrix(&margins, &sigma, &BoundsOptions { gsc_draws: 200_000, seed: 1 })?;
    print!("{report}");
    if !report.is_feasible() {
        println!("infeasible: {}", report.infeasible_labels());
    }
    Ok(())
}
