#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use netintent_core::agent::backend::ScriptFile;
use netintent_core::agent::{BackendFactory, ScriptedFactory};
use netintent_core::stack::{Stack, StackConfig};

pub fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

pub fn demo_config() -> StackConfig {
    StackConfig::load(&configs_dir().join("demo.json")).unwrap()
}

pub fn demo_stack_with(backends: Arc<dyn BackendFactory>) -> Stack {
    Stack::with_backends(&demo_config(), backends, |s| s).unwrap()
}

pub fn demo_stack() -> Stack {
    let script = ScriptFile::load(&configs_dir().join("scripts.json")).unwrap();
    demo_stack_with(Arc::new(ScriptedFactory { script }))
}

/// Runs a property with a fixed-seed runner so results are reproducible.
pub fn check_property<S: proptest::strategy::Strategy>(
    cases: u32,
    strategy: &S,
    test: impl Fn(S::Value) -> Result<(), proptest::test_runner::TestCaseError>,
) -> Result<(), String> {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(strategy, test).map_err(|e| e.to_string())
}
