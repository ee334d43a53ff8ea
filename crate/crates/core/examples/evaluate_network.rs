//! Parse a small advisory network, normalize a raw input and classify it.

use safecomp::network::{parse_network, render_network};

const NET: &str = "\
RELUNET 1
name advisory
labels COC,WL,WR
score_order min_best
inputs 2
input_min 0,-3.15
input_max 60000,3.15
input_mean 30000,0
input_range 60000,6.3
meta polar_dims 0,1
layer 4x2 relu
1,0
-1,0
0,1
0,-1
0,0,0,0
layer 3x4 identity
-1,-1,0,0
0.5,0.5,-2,0
0.5,0.5,0,-2
0.4,0,0
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = parse_network(NET)?;
    for raw in [[12000.0, 0.0], [40000.0, 1.2], [5000.0, -2.5]] {
        let x = net.normalize(&raw)?;
        let scores = net.evaluate(&x)?;
        let label = &net.labels[net.classify(&x)?];
        println!("raw {raw:?} -> normalized {x:.3?} -> scores {scores:.3?} -> {label}");
    }
    assert_eq!(parse_network(&render_network(&net))?, net);
    println!("{} ReLUs, round trip ok", net.relu_count());
    Ok(())
}
