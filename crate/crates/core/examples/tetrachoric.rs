//! Latent normal correlations for binary pairs, and repair of a matrix that
//! is not positive definite.

use multidiscrete::{bvn_cdf, ep_binary_bounds, nearest_pd, solve_tetrachoric, std_normal_quantile, CorrelationMatrix};

fn main() -> multidiscrete::Result<()> {
    let (pj, pk) = (0.3, 0.7);
    let (lo, hi) = ep_binary_bounds(pj, pk)?;
    println!("p = ({pj}, {pk}), binary correlation range [{lo:.4}, {hi:.4}]");
    for delta in [-0.35, -0.1, 0.0, 0.2, 0.35] {
        let rho = solve_tetrachoric(pj, pk, delta)?;
        // thresholding normals at rho gives back delta
        let joint = bvn_cdf(std_normal_quantile(pj)?, std_normal_quantile(pk)?, rho)?;
        let back = (joint - pj * pk) / (pj * (1.0 - pj) * pk * (1.0 - pk)).sqrt();
        println!("  delta {delta:>6.3} -> rho {rho:>8.5} (check {back:>7.4})");
    }

    let m = CorrelationMatrix::from_upper_triangle(3, &[0.9, 0.9, -0.9])?;
    let r = nearest_pd(&m)?;
    println!(
        "\nmin eigenvalue {:.4} -> {:.2e} after {} iterations, max change {:.4}",
        r.min_eigenvalue_before, r.min_eigenvalue_after, r.iterations, r.max_abs_change
    );
    for row in r.repaired.rows() {
        println!("  {}", row.iter().map(|v| format!("{v:>8.5}")).collect::<String>());
    }
    Ok(())
}
