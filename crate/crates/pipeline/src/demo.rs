//! A small synthetic batch wired to the mock adapters.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{PipelineError, Result};
use maskflow_core::eval::smooth_texture;
use maskflow_core::io::save_frame;
use maskflow_core::Frame;

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 48;
pub const FRAMES: usize = 12;

/// `(x0, y0, width, height)` of the bright object.
type Square = (usize, usize, usize, usize);

fn scene(phase: f64, square: Option<Square>) -> Result<Frame> {
    let mut data = Vec::with_capacity(WIDTH * HEIGHT * 3);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let inside = square.is_some_and(|(x0, y0, w, h)| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
            if inside {
                data.extend_from_slice(&[255, 255, 255]);
            } else {
                let t = smooth_texture(x as f64 + phase, y as f64);
                let v = 40.0 + 150.0 * t;
                data.extend_from_slice(&[v as u8, (0.8 * v) as u8, (0.6 * v + 20.0) as u8]);
            }
        }
    }
    Ok(Frame::new(WIDTH, HEIGHT, 3, data)?)
}

struct DemoPair {
    id: &'static str,
    task: &'static str,
    instruction: &'static str,
    phase: f64,
    square: Square,
}

const PAIRS: [DemoPair; 3] = [
    DemoPair {
        id: "remove-small",
        task: "remove",
        instruction: "remove the white box",
        phase: 0.0,
        square: (20, 16, 12, 12),
    },
    DemoPair {
        id: "add-small",
        task: "add",
        instruction: "add a white box",
        phase: 5.0,
        square: (30, 20, 10, 10),
    },
    DemoPair {
        id: "remove-large",
        task: "remove",
        instruction: "remove the white wall",
        phase: 9.0,
        square: (4, 4, 52, 40),
    },
];

/// Writes images and a config for three pairs into `dir` and returns the
/// config path. `program` is the `maskflow` executable serving as adapter.
///
/// The third pair's object covers most of the frame, so it is filtered out.
pub fn write_demo(dir: &Path, program: &Path) -> Result<PathBuf> {
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| PipelineError::io(&images, e))?;
    let exe = program.display();
    let mut cfg = format!(
        r#"output_dir = "dataset"

[adapters.i2v]
command = "{exe} mock i2v --in {{in}} --out {{out}} --prompt {{prompt}} --frames {FRAMES} --shift 1,0"
timeout = 60

[adapters.detect_segment]
command = "{exe} mock segment --in {{in}} --out {{out}} --prompt {{prompt}}"
timeout = 60

[adapters.inpaint]
command = "{exe} mock inpaint --in {{in}} --mask {{mask}} --out {{out}} --prompt {{prompt}}"
timeout = 60
"#
    );
    for p in &PAIRS {
        let with = scene(p.phase, Some(p.square))?;
        let without = scene(p.phase, None)?;
        let (src, tgt) = if p.task == "add" { (without, with) } else { (with, without) };
        save_frame(&src, &images.join(format!("{}_source.png", p.id)))?;
        save_frame(&tgt, &images.join(format!("{}_target.png", p.id)))?;
        cfg.push_str(&format!(
            "\n[[pairs]]\nid = \"{id}\"\nsource_image = \"images/{id}_source.png\"\ntarget_image = \"images/{id}_target.png\"\ninstruction = \"{}\"\ntask = \"{}\"\n",
            p.instruction,
            p.task,
            id = p.id,
        ));
    }
    let path = dir.join("pipeline.toml");
    fs::write(&path, cfg).map_err(|e| PipelineError::io(&path, e))?;
    Ok(path)
}
