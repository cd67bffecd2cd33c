//! Binary trajectory log.
//!
//! Little-endian layout: a 40-byte header (`b"SWTRAJ\0\0"`, version `u32`,
//! robot count `u32`, `dt`, arena width and height as `f64`), followed by
//! one frame per tick starting with the initial poses at tick 0. A frame is
//! `N` pairs of `f64` positions `(x, y)` then `N` collision-avoidance flag
//! bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const MAGIC: [u8; 8] = *b"SWTRAJ\0\0";
pub const VERSION: u32 = 1;
pub const HEADER_SIZE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryHeader {
    pub robots: u32,
    pub dt: f64,
    pub arena_width: f64,
    pub arena_height: f64,
}

impl TrajectoryHeader {
    pub fn frame_size(&self) -> usize {
        self.robots as usize * 17
    }

    fn encode(&self) -> [u8; HEADER_SIZE] {
        let mut b = [0u8; HEADER_SIZE];
        b[..8].copy_from_slice(&MAGIC);
        b[8..12].copy_from_slice(&VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.robots.to_le_bytes());
        b[16..24].copy_from_slice(&self.dt.to_le_bytes());
        b[24..32].copy_from_slice(&self.arena_width.to_le_bytes());
        b[32..40].copy_from_slice(&self.arena_height.to_le_bytes());
        b
    }

    fn decode(b: &[u8; HEADER_SIZE]) -> Result<Self> {
        if b[..8] != MAGIC {
            return Err(Error::TrajectoryFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(b[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::TrajectoryFormat(format!("unsupported version {version}")));
        }
        let f = |r: std::ops::Range<usize>| f64::from_le_bytes(b[r].try_into().unwrap());
        Ok(Self {
            robots: u32::from_le_bytes(b[12..16].try_into().unwrap()),
            dt: f(16..24),
            arena_width: f(24..32),
            arena_height: f(32..40),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub positions: Vec<Vec2>,
    pub ca_active: Vec<bool>,
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
    robots: usize,
    frames: u64,
    buf: Vec<u8>,
}

impl TrajectoryWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: TrajectoryHeader) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, header: TrajectoryHeader) -> Result<Self> {
        out.write_all(&header.encode())?;
        Ok(Self {
            out,
            robots: header.robots as usize,
            frames: 0,
            buf: Vec::with_capacity(header.frame_size()),
        })
    }

    pub fn write_frame(&mut self, positions: &[Vec2], ca_active: &[bool]) -> Result<()> {
        if positions.len() != self.robots || ca_active.len() != self.robots {
            return Err(Error::TrajectoryFormat(format!(
                "frame has {} robots, log has {}",
                positions.len(),
                self.robots
            )));
        }
        self.buf.clear();
        for p in positions {
            self.buf.extend_from_slice(&p.x.to_le_bytes());
            self.buf.extend_from_slice(&p.y.to_le_bytes());
        }
        self.buf.extend(ca_active.iter().map(|&a| a as u8));
        self.out.write_all(&self.buf)?;
        self.frames += 1;
        Ok(())
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Streaming reader over the frames of a log.
pub struct TrajectoryReader<R: Read> {
    input: R,
    header: TrajectoryHeader,
    buf: Vec<u8>,
}

impl TrajectoryReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> TrajectoryReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut b = [0u8; HEADER_SIZE];
        input
            .read_exact(&mut b)
            .map_err(|_| Error::TrajectoryFormat("truncated header".into()))?;
        let header = TrajectoryHeader::decode(&b)?;
        Ok(Self {
            input,
            buf: vec![0; header.frame_size()],
            header,
        })
    }

    pub fn header(&self) -> TrajectoryHeader {
        self.header
    }

    /// Next frame, `None` at a clean end of file.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        let mut filled = 0;
        while filled < self.buf.len() {
            let n = self.input.read(&mut self.buf[filled..])?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        if filled == 0 && !self.buf.is_empty() {
            return Ok(None);
        }
        if filled < self.buf.len() {
            return Err(Error::TrajectoryFormat("truncated frame".into()));
        }
        let n = self.header.robots as usize;
        let f = |i: usize| f64::from_le_bytes(self.buf[i * 8..i * 8 + 8].try_into().unwrap());
        let positions = (0..n).map(|i| Vec2::new(f(2 * i), f(2 * i + 1))).collect();
        let ca_active = self.buf[16 * n..].iter().map(|&b| b != 0).collect();
        Ok(Some(Frame {
            positions,
            ca_active,
        }))
    }
}

/// Number of ticks recorded in a log file (frames minus the initial one),
/// computed from its size.
pub fn recorded_ticks(path: &Path) -> Result<u64> {
    let reader = TrajectoryReader::open(path)?;
    let frame = reader.header().frame_size() as u64;
    let len = std::fs::metadata(path)?.len();
    let body = len - HEADER_SIZE as u64;
    if frame == 0 || !body.is_multiple_of(frame) || body == 0 {
        return Err(Error::TrajectoryFormat(format!(
            "{} bytes of frames is not a whole number of {frame}-byte frames",
            body
        )));
    }
    Ok(body / frame - 1)
}
