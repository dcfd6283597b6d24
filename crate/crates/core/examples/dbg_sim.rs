//! Throwaway closed-loop probe for the Lissajous tracking scenario: dumps
//! state directly every step, including the pre-roll, so divergence can be
//! localized. Not a deliverable.

use tiltsim_core::config::SimSetup;
use tiltsim_core::model::rotation_to_euler;
use tiltsim_core::scenario::ScenarioSpec;
use tiltsim_core::sim::{SimOptions, Simulation};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let substeps: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(4);
    let dur: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(12.0);
    let out = args.get(3).cloned().unwrap_or_else(|| "/tmp/run.csv".into());

    let mut setup = SimSetup::default_hexacopter();
    setup.force_set_subdivisions = 1;
    setup.force_set_grid = (7, 7);
    setup.substeps = substeps;

    let mut spec = ScenarioSpec::level_translation(0.5, 0.7);
    spec.duration = dur;

    let mut sim = Simulation::new(setup, spec.clone(), SimOptions::default()).unwrap();
    let mut rows = String::from("t,ex,ey,ez,roll,pitch,yaw,om0,om1,om2,om3,om4,om5\n");
    loop {
        let t_pre = sim.time();
        if let Err(e) = sim.step() {
            eprintln!("abort: {e}");
            break;
        }
        if t_pre >= dur {
            eprintln!("done without abort");
            break;
        }
        let st = sim.state();
        let mu = rotation_to_euler(&st.rotation);
        let r = spec.position.eval(t_pre);
        let mut line = format!(
            "{:.4},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e},{:.5e}",
            t_pre,
            st.position.x - r.x,
            st.position.y - r.y,
            st.position.z - r.z,
            mu.x,
            mu.y,
            mu.z,
        );
        for w in &sim.actuators().omega {
            line.push_str(&format!(",{:.3}", w));
        }
        line.push('\n');
        rows.push_str(&line);
    }
    std::fs::write(&out, rows).unwrap();
}
