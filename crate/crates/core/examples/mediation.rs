//! Three-step mediation on simulated complete, partial and absent mediation.

use emocascade::stats::{mediation_analysis, MediationMode};
use emocascade::synth::mediation_panel;

fn main() -> emocascade::Result<()> {
    for (label, a, b, direct) in [("complete", 0.6, 0.6, 0.0), ("partial", 0.6, 0.5, 0.3), ("none", 0.0, 0.5, 0.4)] {
        let (design, mediator) = mediation_panel(80, 15, a, b, direct, 11)?;
        for mode in [MediationMode::Mixed, MediationMode::Ols] {
            let r = mediation_analysis(&design, "avg_age", &mediator, &["anxiety"], mode)?;
            let row = &r.rows[0];
            println!(
                "{label:<9} {mode:?}: a {:+.3}, total {:+.3}, direct {:+.3} -> {} (identity gap {:.1e})",
                row.path_a, row.total, row.direct, row.classification, row.identity_gap
            );
        }
    }
    Ok(())
}
