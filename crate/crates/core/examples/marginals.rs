//! Truncated PMFs, closed-form moments and method-of-moments recovery for
//! the three margin families.

use multidiscrete::{mom_estimate, MarginalSpec, RngStream};
use rand::Rng;

fn main() -> multidiscrete::Result<()> {
    let specs = [
        MarginalSpec::GeneralizedPoisson { theta: 5.14, lambda: 0.6445 },
        MarginalSpec::GeneralizedPoisson { theta: 30.38, lambda: -0.1378 },
        MarginalSpec::NegativeBinomial { r: 8, p: 0.45 },
        MarginalSpec::Binomial { n: 25, p: 0.45 },
    ];
    let mut rng = RngStream::new(1);
    println!("{:<34} {:>5} {:>10} {:>10}   {:>9} {:>9}", "margin", "K", "mean", "variance", "est 1", "est 2");
    for spec in specs {
        let pmf = spec.truncate_support()?;
        let sample: Vec<u32> = (0..50_000).map(|_| pmf.quantile(rng.random()).unwrap()).collect();
        let est = mom_estimate(&sample, spec.family())?;
        let [a, b] = est.values();
        println!(
            "{:<34} {:>5} {:>10.4} {:>10.4}   {:>9.4} {:>9.4}",
            format!("{spec:?}"),
            pmf.support_max,
            pmf.mean,
            pmf.variance,
            a,
            b
        );
    }

    let bad = MarginalSpec::GeneralizedPoisson { theta: 3.0, lambda: 1.0 };
    println!("\n{bad:?}: {}", bad.validate());
    Ok(())
}
