use std::hint::black_box;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use netintent_core::agent::{
    parse_turn, run_intent, AgentConfig, ApprovalWaiter, BackendFactory, RunControl, ScriptFile, ScriptedFactory,
    Transcript,
};
use netintent_core::stack::{Stack, StackConfig};
use netintent_core::tools::{ApprovalState, Decision, EngineHandle};

const INTENT: &str = "Increase the bandwidth of the 'streaming' slice by 20% between 16:27 and 16:30 on weekdays.";

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

/// Approves every token as soon as it is requested.
struct AutoApprove(Arc<EngineHandle>);

impl ApprovalWaiter for AutoApprove {
    fn now_ms(&self) -> u64 {
        self.0.read().now_ms()
    }

    fn wait(&self, token: &str, _stop: &AtomicBool) -> ApprovalState {
        self.0.write(|e| e.resolve_approval(token, Decision::Approve)).map_or(ApprovalState::Denied, |t| t.state)
    }
}

fn turns(c: &mut Criterion) {
    let call = r#"I will inspect the data first. {"tool_call": {"name": "query_data", "arguments": {"collection": "upf.memory_utilization_pct", "limit": 50}}}"#;
    let garbage = r#"Sure! {"tool_call": {"name": "query_data"}, "final_answer": "done"} trailing"#;
    c.bench_function("parse_turn_tool_call", |b| b.iter(|| parse_turn(black_box(call))));
    c.bench_function("parse_turn_rejected", |b| b.iter(|| parse_turn(black_box(garbage))));
}

fn scripted_intent(c: &mut Criterion) {
    let cfg = StackConfig::load(&configs().join("demo.json")).unwrap();
    let factory = ScriptedFactory { script: ScriptFile::load(&configs().join("scripts.json")).unwrap() };
    let agent = AgentConfig::default();
    c.bench_function("scripted_scheduled_intent", |b| {
        b.iter_batched(
            || {
                let stack = Stack::build(&cfg).unwrap();
                stack.engine.write(|e| e.advance_by_ms(6 * 60_000));
                stack
            },
            |stack| {
                let mut backend = factory.create(INTENT);
                let waiter = AutoApprove(stack.engine.clone());
                let transcript = Transcript::new();
                let outcome = run_intent(
                    INTENT,
                    backend.as_mut(),
                    stack.gateway.as_ref(),
                    &waiter,
                    &transcript,
                    &RunControl::default(),
                    &agent,
                );
                assert!(outcome.goal_achieved);
                outcome
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, turns, scripted_intent);
criterion_main!(benches);
