//! Drive a simulator through the subprocess protocol: one JSON line
//! `{"x": [...]}` on stdin, one line `{"y": value}` on stdout.

use activegsa::inputs::InputModel;
use activegsa::bounds::Bounds;
use activegsa::testbed::{Benchmark, ExternalSimulator};

fn main() -> activegsa::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let sim = ExternalSimulator::new(vec!["python3".into(), "ishigami_stub.py".into()], 30.0)?.in_dir(dir);
    let pi = std::f64::consts::PI;
    let inputs = InputModel::uniform_box(&Bounds::new(vec![-pi; 3], vec![pi; 3])?)?;
    let bench = Benchmark::external("ishigami_stub", sim, inputs);
    for x in [[0.0, 0.0, 0.0], [pi / 2.0, pi / 2.0, pi], [1.0, -2.0, 0.5]] {
        println!("f({x:.3?}) = {:.6}", bench.evaluate(&x)?);
    }
    println!("finite-difference gradient at the origin: {:.4?}", bench.gradient(&[0.0, 0.0, 0.0])?);
    Ok(())
}
