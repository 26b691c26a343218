//! The reverse-mode tape that powers training, on a toy problem.
//!
//! Builds f(w) = mean((tanh(W x) - y)^2), runs one backward pass, and checks
//! a few entries of the analytic gradient against central finite differences.
//!
//! Run with: cargo run --example autodiff_basics

use windcast::tape::Tape;
use windcast::tensor::Tensor;

fn main() {
    let w_values = vec![0.4, -0.3, 0.8, 0.1, -0.6, 0.5];
    let x = Tensor::vector(&[1.0, -2.0, 0.5]).unwrap();
    let y = Tensor::vector(&[0.2, -0.1]).unwrap();

    let loss_value = |w_data: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![2, 3], w_data.to_vec()).unwrap());
        let xv = tape.leaf(x.clone());
        let yv = tape.leaf(y.clone());
        let z = tape.matmul(w, xv).unwrap();
        let a = tape.tanh(z);
        let d = tape.sub(a, yv).unwrap();
        let sq = tape.mul(d, d).unwrap();
        let loss = tape.mean(sq);
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::from_vec(vec![2, 3], w_values.clone()).unwrap());
    let xv = tape.leaf(x.clone());
    let yv = tape.leaf(y.clone());
    let z = tape.matmul(w, xv).unwrap();
    let a = tape.tanh(z);
    let d = tape.sub(a, yv).unwrap();
    let sq = tape.mul(d, d).unwrap();
    let loss = tape.mean(sq);

    println!("loss = {:.6}", tape.value(loss).item());
    tape.backward(loss).unwrap();
    let grad = tape.grad(w).expect("w participates in the loss").to_vec();

    println!("\n   i  analytic      finite-diff   |difference|");
    let eps = 1e-6;
    for i in 0..w_values.len() {
        let mut plus = w_values.clone();
        plus[i] += eps;
        let mut minus = w_values.clone();
        minus[i] -= eps;
        let fd = (loss_value(&plus) - loss_value(&minus)) / (2.0 * eps);
        println!(
            "  {i}  {:>12.8}  {:>12.8}  {:.2e}",
            grad[i],
            fd,
            (grad[i] - fd).abs()
        );
    }
    println!("\nGradients flow through matmul, tanh, and the mean reduction;");
    println!("the same machinery differentiates the full encoder-decoder.");
}
