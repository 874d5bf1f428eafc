//! Loss terms evaluated on a hand-built autoencoder whose outputs are known exactly.

use ddg::model::stubs::IdentityAutoencoder;
use ddg::trainer::{
    augmented_loss, constraint_loss, cycle_loss, dual_step, erm_loss, ConstraintMode, DualState,
};
use ddg::{Result, Tensor};

fn main() -> Result<()> {
    let x = Tensor::full(&[16, 16], 0.5);
    let y = Tensor::full(&[16, 16], 0.2);
    let exact = IdentityAutoencoder::new(16, 3);
    let off = IdentityAutoencoder::new(16, 3).with_offset(0.01);

    println!(
        "perfect reconstruction, gamma 0.1: {}",
        constraint_loss(&exact, &x, &y, 0.1, ConstraintMode::Hinge)?
    );
    println!(
        "offset 0.01 over 256 px, gamma 1:  {:.6}",
        constraint_loss(&off, &x, &y, 1.0, ConstraintMode::Hinge)?
    );
    println!(
        "same, gamma 3, raw residual:      {:.6}",
        constraint_loss(&off, &x, &y, 3.0, ConstraintMode::Raw)?
    );
    println!(
        "cross-entropy:                    {:.6}",
        erm_loss(&exact, &x, 1)?
    );
    println!(
        "augmented, self pair:             {:.6}",
        augmented_loss(&exact, &x, &x, 1)?
    );
    println!(
        "cycle, identity model:            {}",
        cycle_loss(&exact, &x, &y)?
    );

    let mut dual = DualState::new(0.5);
    dual_step(&mut dual, 0.2, 0.1, 0);
    println!("dual step 0.5 + 0.1 * 0.2 = {}", dual.lambda);
    Ok(())
}
