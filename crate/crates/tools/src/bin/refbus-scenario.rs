use std::process::ExitCode;

use refbus_tools::scenario::{run_scenario, ScenarioError, SCENARIOS};

fn main() -> ExitCode {
    let names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        eprintln!("usage: refbus-scenario <name>... | all");
        eprintln!("scenarios: {}", SCENARIOS.join(", "));
        return ExitCode::from(2);
    }
    let names: Vec<String> = if names == ["all"] {
        SCENARIOS.iter().map(|s| s.to_string()).collect()
    } else {
        names
    };
    let mut ok = true;
    for name in &names {
        match run_scenario(name) {
            Ok(t) => {
                println!("== {name}");
                for line in t.lines() {
                    println!("{line}");
                }
            }
            Err(e @ ScenarioError::Unknown(_)) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            Err(e) => {
                eprintln!("{e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
