//! Softmax on logits that would overflow a naive `exp`.

use lowshot::linalg::{argmax, log_sum_exp, stable_softmax};

fn main() {
    let logits = [1000.0, 999.0, -1000.0, 0.0];
    let p = stable_softmax(&logits);
    println!("logits   {logits:?}");
    println!("softmax  {p:.6?}");
    println!("sum      {:.17}", p.iter().sum::<f64>());
    println!("lse      {}", log_sum_exp(&logits));
    println!("argmax   {}", argmax(&logits));

    let shifted: Vec<f64> = logits.iter().map(|z| z - 12345.0).collect();
    let q = stable_softmax(&shifted);
    let diff = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max |softmax(z) - softmax(z - 12345)| = {diff:e}");

    // Ties resolve to the lowest index.
    println!("argmax of [2, 5, 5] = {}", argmax(&[2.0, 5.0, 5.0]));
}
