//! Cut-point grids labeled by a network, and the downrange/crossrange
//! projection of polar inputs.

use std::f64::consts::PI;

use safecomp::app::grid::{generate_grid, write_grid_csv};
use safecomp::app::polar::{project_polar, render_polar_svg, PolarPoint};
use safecomp::network::random::random_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rho: Vec<f64> = (0..5).map(|i| 0.2 + 0.2 * i as f64).collect();
    let theta: Vec<f64> = (0..8).map(|i| -PI + PI * i as f64 / 4.0).collect();
    let names = vec!["rho".to_string(), "theta".to_string()];
    let grid = generate_grid(vec![rho.clone(), theta.clone()], names.clone())?;
    println!("{} points", grid.size());

    let mut net = random_network(5, 2, &[8], 3);
    net.input_min = vec![0.0, -PI];
    net.input_max = vec![1.0, PI];
    net.input_mean = vec![0.5, 0.0];
    net.input_range = vec![1.0, 2.0 * PI];
    let mut csv = Vec::new();
    write_grid_csv(grid.clone(), &mut csv, Some(&net))?;
    print!(
        "{}",
        String::from_utf8(csv)?
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );
    println!("\n...");

    let mut labeled = Vec::new();
    for p in grid {
        let (downrange, crossrange) = project_polar(p[0], p[1]);
        let l = net.classify(&net.normalize(&p)?)?;
        labeled.push((
            net.labels[l].clone(),
            PolarPoint {
                downrange,
                crossrange,
            },
        ));
    }
    let svg = render_polar_svg(&labeled);
    let path = std::env::temp_dir().join("safecomp_grid_polar.svg");
    std::fs::write(&path, svg)?;
    println!("plot written to {}", path.display());

    let five = generate_grid(
        vec![
            vec![0.0; 41],
            vec![0.0; 41],
            vec![0.0; 44],
            vec![0.0; 6],
            vec![0.0; 6],
        ],
        (0..5).map(|i| format!("x{i}")).collect(),
    )?;
    println!(
        "41*41*44*6*6 grid has {} rows, generated lazily",
        five.size()
    );
    Ok(())
}
