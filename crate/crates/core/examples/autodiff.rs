//! Reverse-mode gradients of a tiny two-layer network, checked against a
//! central finite difference.
//!
//!     cargo run --release --example autodiff

use levrl::tensor::{Graph, ParamStore, Tensor};

fn loss(store: &ParamStore<f64>, x: &Tensor<f64>) -> levrl::Result<(f64, levrl::tensor::Gradients<f64>)> {
    let mut g = Graph::new(store);
    let w1 = g.param(store.id("w1").unwrap());
    let w2 = g.param(store.id("w2").unwrap());
    let x = g.input(x.clone())?;
    let h = g.matmul(x, w1)?;
    let h = g.relu(h)?;
    let logits = g.matmul(h, w2)?;
    let l = g.cross_entropy(logits, &[Some(1), Some(0)])?;
    Ok((g.value(l).item(), g.backward(l)?))
}

fn main() -> levrl::Result<()> {
    let mut store = ParamStore::new();
    store.add("w1", Tensor::from_f64(&[3, 4], &[0.3, -0.2, 0.5, 0.1, -0.4, 0.6, 0.2, -0.3, 0.05, 0.2, -0.5, 0.4])?)?;
    store.add("w2", Tensor::from_f64(&[4, 2], &[0.2, -0.1, 0.4, 0.3, -0.6, 0.5, 0.1, -0.2])?)?;
    let x = Tensor::from_f64(&[2, 3], &[1.0, 0.5, -1.0, -0.3, 0.8, 0.2])?;

    let (value, grads) = loss(&store, &x)?;
    println!("loss {value:.6}");
    let id = store.id("w1").unwrap();
    let analytic = grads.get(id).unwrap().to_f64_vec();
    let h = 1e-6;
    for e in 0..analytic.len() {
        let shifted = |d: f64| {
            let mut s = store.clone();
            s.get_mut(id).tensor.data_mut()[e] += d;
            loss(&s, &x).map(|r| r.0)
        };
        let numeric = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        println!("dL/dw1[{e:>2}]  tape {:+.8}  finite difference {numeric:+.8}", analytic[e]);
    }
    Ok(())
}
