//! Compares reverse-mode gradients of the full constraint loss with central differences.

use ddg::gradcheck::{finite_diff_grad, relative_error};
use ddg::model::{Model, ModelBundle, ModelDims};
use ddg::trainer::{batch_terms, ConstraintMode, PairIndex, Pairing, TermOptions};
use ddg::{Graph, Result, Tensor};

fn main() -> Result<()> {
    let dims = ModelDims {
        image_size: 4,
        classes: 3,
        s_dim: 3,
        v_dim: 2,
        hidden: 5,
    };
    let model = ModelBundle::new(dims, 11)?;
    let images: Vec<Tensor> = (0..3)
        .map(|k| {
            Tensor::new(
                vec![4, 4],
                (0..16)
                    .map(|i| ((i * 7 + k * 5) % 11) as f64 / 10.0)
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor> = images.iter().collect();
    let x = model.batch(&refs)?;
    let labels = [0, 2, 1];
    let opts = TermOptions {
        gamma: 0.5,
        mode: ConstraintMode::Hinge,
        augment: false,
        cycle: true,
    };
    let pairs = PairIndex::new(3, Pairing::AllPairs)?;

    let loss_of = |w: &Tensor, name: &str| -> Result<f64> {
        let mut m = model.clone();
        for (_, p) in m.params_mut() {
            if p.name == name {
                p.value = w.clone();
            }
        }
        let mut g = Graph::new();
        let net = m.bind_params(&mut g)?;
        let xv = g.constant(x.clone())?;
        let t = batch_terms(&net, &mut g, xv, &labels, &pairs, &opts)?.means(&mut g)?;
        let total = t.lagrangian(&mut g, 0.7)?;
        Ok(g.value(total).data()[0])
    };

    let mut g = Graph::new();
    let net = model.bind_params(&mut g)?;
    let vars = net.param_vars();
    let xv = g.constant(x.clone())?;
    let t = batch_terms(&net, &mut g, xv, &labels, &pairs, &opts)?.means(&mut g)?;
    let total = t.lagrangian(&mut g, 0.7)?;
    let grads = g.backward(total)?;

    for ((_, p), v) in model.params().into_iter().zip(vars) {
        let analytic = grads.get(v).expect("leaf gradient");
        let numeric = finite_diff_grad(|w| loss_of(w, &p.name), &p.value, 1e-5)?;
        println!(
            "{:<28} rel_err={:.2e}",
            p.name,
            relative_error(analytic, &numeric, 1e-8)
        );
    }
    Ok(())
}
