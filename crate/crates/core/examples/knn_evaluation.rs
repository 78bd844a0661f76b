//! Stratified k-NN validation of band subsets: a subset containing the one
//! discriminative band classifies well, a noise-only subset does not.
//!
//!     cargo run --example knn_evaluation

use bandsel::eval::EvalOptions;
use bandsel::synthetic::labelled_scene;
use bandsel::{metrics, repeated_eval, SplitSpec};

fn main() -> bandsel::Result<()> {
    let image = labelled_scene(10, 5, 60, 4, 3)?;
    let spec = SplitSpec::default();
    let options = EvalOptions::default();

    for (name, subset) in [("with band 4", vec![4, 7]), ("noise only", vec![0, 7])] {
        let report = repeated_eval(&image, &subset, &spec, 10, &options)?;
        println!(
            "{name:<12} OA {:.3}±{:.3}  AA {:.3}±{:.3}  Kappa {:.3}±{:.3}",
            report.oa_mean, report.oa_std, report.aa_mean, report.aa_std, report.kappa_mean, report.kappa_std
        );
    }

    let m = metrics(&[vec![4, 1], vec![1, 4]])?;
    println!("metrics([[4,1],[1,4]]) = OA {} AA {} Kappa {}", m.oa, m.aa, m.kappa);
    Ok(())
}
