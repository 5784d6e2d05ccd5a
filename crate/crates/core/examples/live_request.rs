//! Inspect what a live provider would send, and parse a reply, without
//! touching the network.
//!
//!     cargo run --example live_request

use disposition::pool::{permute, ConstraintPool};
use disposition::providers::{
    build_prompt, parse_selection, ApiStyle, Backend, InstructionRegistry, LiveProvider,
    LiveSettings, ProviderConfig, ReasoningEffort, Verbosity,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = ConstraintPool::placeholder();
    let registry = InstructionRegistry::builtin();
    let instruction = registry.require("Optimistic")?;
    let permutation = permute(&pool, 99);
    let prompt = build_prompt(&pool, &permutation, instruction, 20);

    std::env::set_var("DISPOSITION_EXAMPLE_KEY", "not-a-real-key");
    let config = ProviderConfig {
        model: "gpt5".into(),
        temperature: 1.0,
        top_p: 1.0,
        reasoning_effort: Some(ReasoningEffort::High),
        verbosity: Some(Verbosity::High),
        backend: Backend::Live(LiveSettings {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_model: Some("gpt-5-2025-08-07".into()),
            api_style: ApiStyle::OpenaiChat,
            credential_env: "DISPOSITION_EXAMPLE_KEY".into(),
            max_in_flight: 4,
            max_attempts: 5,
            backoff_ms: 500,
            timeout_secs: 600,
            max_tokens: 16_000,
        }),
    };
    let provider = LiveProvider::new(config)?;
    let mut body = provider.request_body(&prompt);
    body["messages"][1]["content"] = format!("<{} characters>", prompt.user.len()).into();
    println!("{}", serde_json::to_string_pretty(&body)?);

    let picks: Vec<u32> = permutation.order.iter().copied().take(20).collect();
    let mut reply = String::from("Here is my plan.\n\nSELECTIONS:\n");
    for id in &picks {
        reply.push_str(&format!("[{id}] {}\n", pool.get(*id).unwrap().text));
    }
    reply.push_str("END_SELECTIONS\nJUSTIFICATIONS:\n");
    for id in &picks {
        reply.push_str(&format!("{id}: fits the arc\n"));
    }
    reply.push_str("END_JUSTIFICATIONS\nCOMPATIBILITY:\nThey cohere.\n");
    let parsed = parse_selection(&reply, &pool, 20)?;
    println!(
        "parsed {} selections, first {:?}",
        parsed.selected.len(),
        &parsed.selected[..5]
    );
    Ok(())
}
