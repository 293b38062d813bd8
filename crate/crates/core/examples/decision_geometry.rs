//! How shrinking one class's weight vector moves the bias-free decision
//! boundary and enlarges the region won by the other class.

use lowshot::eval::{count_j_side, decision_ratio, grid_2d};

fn main() -> lowshot::Result<()> {
    let w_j = [1.0, 0.3];
    let w_k = [0.4, 1.2];
    let grid = grid_2d(0.0, 2.0, 21);
    println!("grid of {} points over [0, 2]^2", grid.rows());
    for s in [1.0, 0.75, 0.5, 0.25] {
        let wk = [s * w_k[0], s * w_k[1]];
        println!(
            "|w_k| scaled by {s:<4}: class j wins {:>3} points",
            count_j_side(&w_j, &wk, &grid)?
        );
    }
    let r = decision_ratio(&w_j, &w_k, &[1.0, 1.0])?;
    let back = decision_ratio(&w_k, &w_j, &[1.0, 1.0])?;
    println!(
        "ratio at (1, 1): {:.4}, reversed {:.4}, product {}",
        r.ratio,
        back.ratio,
        r.ratio * back.ratio
    );
    Ok(())
}
