//! Built-in experiment configurations.

pub const NAMES: [&str; 5] = ["example1", "example2", "example3", "counterexample", "staged"];

/// Growing Cimmino-like weights on three coordinate hyperplanes.
const EXAMPLE1: &str = r#"
seed = 1
mode = "plain"
x0 = [0.5, -0.7, 2.3]

[family]
kind = "linear_system"
matrix = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
rhs = [1.0, -1.0, 2.0]

[schedule]
kind = "cimmino_growing"

[stop]
max_iters = 10000

[[checks]]
kind = "divergent_sums"
k_max = 100000

[[checks]]
kind = "uasc"

[output]
name = "example1"
"#;

/// Growing Kaczmarz-like strings in shuffled order on a skewed system.
const EXAMPLE2: &str = r#"
seed = 2
mode = "plain"
x0 = [0.0, 0.0, 0.0]

[family]
kind = "linear_system"
matrix = [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.2, 1.0]]
rhs = [0.0, 1.0, 3.2]

[schedule]
kind = "kaczmarz_growing"
permutation = "seeded"

[stop]
max_iters = 10000
feasibility_tol = 1e-12

[[checks]]
kind = "divergent_sums"
k_max = 10000

[output]
name = "example2"
"#;

/// Odd/even weights on two hyperplanes and four halfspaces, with the block
/// conditions for `kappa_r = 2r`, `f_r = 1/(2(r+1))`.
const EXAMPLE3: &str = r#"
seed = 3
mode = "plain"
x0 = [4.0, -3.0, 2.0]

[family]
kind = "sets"
sets = [
    { type = "hyperplane", normal = [1.0, 1.0, 0.0], offset = 1.0 },
    { type = "hyperplane", normal = [0.0, 1.0, -1.0], offset = 0.5 },
    { type = "halfspace", normal = [1.0, 0.0, 0.0], offset = 2.0 },
    { type = "halfspace", normal = [-1.0, 0.0, 0.0], offset = 2.0 },
    { type = "halfspace", normal = [0.0, 0.0, 1.0], offset = 1.0 },
    { type = "halfspace", normal = [1.0, -1.0, 1.0], offset = 3.0 },
]

[schedule]
kind = "example3"

[stop]
max_iters = 100000
feasibility_tol = 5e-4

[[checks]]
kind = "c1"
r_max = 1000
kappa = { slope = 2 }
f = { kind = "reciprocal", scale = 2.0, shift = 1.0 }

[[checks]]
kind = "c2"
r_min = 3
r_max = 1000
kappa = { slope = 2 }
f = { kind = "reciprocal", scale = 2.0, shift = 1.0 }

[output]
name = "example3"
"#;

/// Rays through the origin whose angles never settle.
const COUNTEREXAMPLE: &str = r#"
mode = "plain"

[family]
kind = "rays_counterexample"
prefix_len = 10000

[schedule]
kind = "rays_natural"

[stop]
max_iters = 9999

[[checks]]
kind = "divergent_sums"
k_max = 9998

[output]
name = "counterexample"
"#;

/// Two hyperplanes followed by balls of radius `1 + 1/i`, solved in stages.
const STAGED: &str = r#"
seed = 5
mode = "staged_eps"
x0 = [3.0, -2.0, 2.0]
stages = [{ m = 2, n = 10 }, { m = 4, n = 100 }, { m = 8, n = 1000 }]
stage_cap = 1000000

[family]
kind = "descending_chain"
dim = 3
base = 1.0
decay = 1.0
head = [
    { type = "hyperplane", normal = [1.0, 0.0, 0.0], offset = 0.8 },
    { type = "hyperplane", normal = [0.0, 1.0, 0.0], offset = -0.5 },
]

[schedule]
kind = "cyclic"
block = "kaczmarz"

[output]
name = "staged"
"#;

/// Configuration text of a built-in demo.
pub fn demo_config(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example2" => Some(EXAMPLE2),
        "example3" => Some(EXAMPLE3),
        "counterexample" => Some(COUNTEREXAMPLE),
        "staged" => Some(STAGED),
        _ => None,
    }
}
