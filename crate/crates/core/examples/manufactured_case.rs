//! Built-in manufactured solutions, their random-point self-check and the
//! initial-data approximation errors.

use spmhd::verification::{build_case, default_params, initial_data_error, CASES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in CASES {
        let case = build_case(name, default_params(name))?;
        let rep = case.self_check(1, 200);
        println!("{name:<13} {:?} self-check {rep:?}", case.params);
    }
    let case = build_case("decay-trig", default_params("decay-trig"))?;
    for n in [2, 4, 8] {
        let (eu, eb) = initial_data_error(&case, n)?;
        println!("n = {n}: ‖u⁰ − u_h⁰‖ = {eu:.4e}, ‖B⁰ − B_h⁰‖ = {eb:.4e}");
    }
    Ok(())
}
