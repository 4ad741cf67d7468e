//! A short active-learning run on Ishigami, comparing the global gradient
//! criterion with plain Sobol' enrichment.

use activegsa::harness::{run_active_learning, Experiment, RunConfig};

fn main() -> activegsa::Result<()> {
    let text = r#"
        seed = 1
        [benchmark]
        id = "ishigami"
        [design]
        initial_count = 15
        budget = 10
        [strategy]
        site_count = 60
        [optimizer]
        raw_candidates = 512
        refine_starts = 4
        [metrics]
        dgsm_mc = 2048
        sobol_mc = 1024
        test_size = 512
        reference_mc = 4096
    "#;
    for strategy in ["GlobalGradVarRed", "random_sobol"] {
        let mut config = RunConfig::parse(text, "example")?;
        config.strategy.kind = strategy.into();
        let exp = Experiment::prepare(config, None)?;
        let record = run_active_learning(&exp, 1, None)?;
        println!("{strategy}");
        for m in &record.metrics {
            println!("  n = {:>2}  rmse_dgsm = {:.4}  q2 = {:.4}", m.n, m.rmse_dgsm.unwrap(), m.q2);
        }
    }
    Ok(())
}
