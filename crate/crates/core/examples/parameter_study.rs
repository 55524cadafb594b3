//! Grades fictitious-model coefficients on a fixed layout with open and
//! sealed voids, over a grid of `a_p` and `ε_p`.

use std::path::Path;

use topopt::config::parse_config;
use topopt::scenario::run_scenario;

fn main() -> topopt::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fig2_validation.toml");
    let base = parse_config(&std::fs::read_to_string(&path).expect("config is readable"))?;
    let a_values = [1e0, 1e1, 1e2, 1e3];
    let eps_values = [1e-3, 1e-4, 1e-5, 1e-6];

    print!("{:>10}", "a_p \\ eps");
    for eps in eps_values {
        print!("{eps:>16e}");
    }
    println!();
    for a_p in a_values {
        print!("{a_p:>10e}");
        for epsilon_p in eps_values {
            let mut c = base.clone();
            c.cavity.a_p = a_p;
            c.cavity.epsilon_p = epsilon_p;
            c.output = format!("output/examples/parameter_study/a{a_p:e}_e{epsilon_p:e}").into();
            let s = run_scenario(&c)?;
            print!("{:>16}", s.verdict.unwrap_or("-"));
        }
        println!();
    }
    Ok(())
}
