//! Saves a model checkpoint and verifies the reload is bit-for-bit identical.

use ddg::checkpoint::Checkpoint;
use ddg::model::{ModelBundle, ModelDims};
use ddg::trainer::TrainConfig;
use ddg::Result;

fn main() -> Result<()> {
    let dims = ModelDims {
        image_size: 16,
        classes: 5,
        s_dim: 16,
        v_dim: 8,
        hidden: 128,
    };
    let ckpt = Checkpoint {
        config: TrainConfig::default(),
        gamma: 7.25,
        lambda: 0.1,
        step: 0,
        model: ModelBundle::new(dims, 42)?,
    };
    let path = std::env::temp_dir().join("ddg-example.ddgc");
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!(
        "{} parameters, {} bytes on disk",
        back.model.param_count(),
        ckpt.to_bytes()?.len()
    );
    println!("identical after reload: {}", back == ckpt);
    Ok(())
}
