//! Binary PPM (P6) frame dumps for visual debugging.

use crate::render::Frame;
use std::io::Write;
use std::path::Path;

pub fn write_ppm<P: AsRef<Path>>(frame: &Frame, path: P) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(frame.w * frame.h * 3 + 32);
    write!(buf, "P6\n{} {}\n255\n", frame.w, frame.h)?;
    for y in 0..frame.h {
        for x in 0..frame.w {
            buf.extend_from_slice(&frame.get(x, y));
        }
    }
    std::fs::write(path, buf)
}
