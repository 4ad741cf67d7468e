//! Every acquisition criterion on one fitted model, then one maximization step.

use activegsa::acquisition::{Acquisition, AcquisitionKind, AcquisitionSpec};
use activegsa::bounds::Bounds;
use activegsa::gp::{fit, Dataset, FitConfig};
use activegsa::optimize::{maximize, OptimConfig};
use activegsa::sobol::SobolSequence;

fn main() -> activegsa::Result<()> {
    let bounds = Bounds::unit(2);
    let points = SobolSequence::scrambled(2, 4)?.points(1, 10);
    let outputs = points.iter().map(|p| (5.0 * p[0]).sin() * p[1]).collect();
    let model = fit(&Dataset::new(points.clone(), outputs, bounds.clone())?, 4, &FitConfig::default())?;
    let sites = SobolSequence::scrambled(2, 5)?.points(1, 60);
    let candidate = [0.3, 0.8];

    for kind in AcquisitionKind::ALL {
        let mut spec = AcquisitionSpec::new(kind);
        spec.chunk_count = Some(4);
        let acq = Acquisition::new(&spec, &model, &sites)?;
        println!("{:<24} {:.6e}", kind.name(), acq.evaluate(&candidate)?);
    }

    let spec = AcquisitionSpec::new(AcquisitionKind::GlobalGradVarRed);
    let acq = Acquisition::new(&spec, &model, &sites)?;
    let config = OptimConfig { raw_candidates: Some(256), refine_starts: 4, ..OptimConfig::default() };
    let best = maximize(|x| acq.evaluate(x), &bounds, &points, &config)?;
    println!("next point {:.4?} (value {:.4e}, raw best {:.4e}, {} evaluations)", best.x, best.value, best.raw_value, best.evaluations);
    Ok(())
}
