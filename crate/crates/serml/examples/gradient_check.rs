//! Verify analytic gradients of the full joint objective against central
//! finite differences, tensor by tensor, for every induction strategy.
//!
//! ```bash
//! cargo run --release -p serml --example gradient_check
//! ```

use serml::config::{InductionKind, ModelConfig};
use serml::trainer::grad_check;

fn main() -> anyhow::Result<()> {
    for kind in InductionKind::ALL {
        let cfg = ModelConfig {
            d: 4,
            hidden: 4,
            attn: 4,
            word_dim: 4,
            memory_slots: 3,
            induction: kind,
            ..ModelConfig::desk()
        };
        println!("=== induction strategy: {kind} ===");
        let report = grad_check(&cfg, 25, 1e-5, 1e-4, 42)?;
        print!("{}", report.render());
    }
    Ok(())
}
