//! The three weight-norm priors on a small head with two base rows and two
//! low-shot rows.

use lowshot::dataset::Split;
use lowshot::linalg::{squared_norm, Matrix};
use lowshot::losses::{equal_norm_penalty, shrink_penalty, up_penalty, NormPrior, NormPriorState};
use lowshot::model::HeadWeights;

fn main() -> lowshot::Result<()> {
    let head = HeadWeights::new(Matrix::from_rows(&[[3.0, 0.0], [0.0, 2.0], [0.5, 0.0], [0.0, 0.3]])?);
    let split = [Split::Base, Split::Base, Split::LowShot, Split::LowShot];
    for k in 0..4 {
        println!("w{k} {:?} |w|^2 = {}", head.row(k), squared_norm(head.row(k)));
    }

    let st = NormPriorState::refresh(&head, &split, NormPrior::Up)?;
    let (up, g) = up_penalty(&head, &[2, 3], st.alpha)?;
    println!("\nUP: alpha = {}, penalty = {up:.4}", st.alpha);
    for k in 0..4 {
        println!("  grad row {k}: {:?}", g.row(k));
    }

    let (shrink, _) = shrink_penalty(&head);
    println!("\nshrink penalty = {shrink}");

    let st = NormPriorState::refresh(&head, &split, NormPrior::EqualNorm)?;
    let (eq, g) = equal_norm_penalty(&head, st.beta)?;
    println!("equal-norm: beta = {}, penalty = {eq:.4}", st.beta);
    println!(
        "  grad row 0 {:?} (pulls in), row 2 {:?} (pushes out)",
        g.row(0),
        g.row(2)
    );
    Ok(())
}
