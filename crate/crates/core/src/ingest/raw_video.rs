//! `RPPGRAW1` container: the 8-byte magic, a little-endian `u32` header
//! length, a UTF-8 JSON header `{width, height, fps, frames}`, then tightly
//! packed interleaved RGB24 frames (row-major, top-left origin).

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{spatial_mean, ChannelTrace, RgbFrame, RoiSelection};

pub const MAGIC: &[u8; 8] = b"RPPGRAW1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub frames: usize,
}

impl VideoMeta {
    pub fn frame_bytes(&self) -> usize {
        self.width * self.height * 3
    }

    pub fn payload_bytes(&self) -> u64 {
        self.frame_bytes() as u64 * self.frames as u64
    }

    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.fps
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Format(format!(
                "frame size {}x{} is empty",
                self.width, self.height
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Format(format!("fps must be > 0, got {}", self.fps)));
        }
        Ok(())
    }

    fn header_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(self)?;
        let mut out = Vec::with_capacity(12 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        Ok(out)
    }
}

/// Streaming frame reader.
#[derive(Debug)]
pub struct RawVideoReader<R> {
    meta: VideoMeta,
    inner: R,
    next_frame: usize,
    header_len: u64,
}

impl<R: Read> RawVideoReader<R> {
    /// Parses the header from `inner`; frames are read lazily.
    pub fn new(mut inner: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact_or(&mut inner, &mut magic, || {
            Error::Format("missing RPPGRAW1 magic".into())
        })?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected RPPGRAW1".into()));
        }
        let mut len = [0u8; 4];
        read_exact_or(&mut inner, &mut len, || {
            Error::Format("missing header length".into())
        })?;
        let len = u32::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        read_exact_or(&mut inner, &mut header, || {
            Error::Format("header is truncated".into())
        })?;
        let meta: VideoMeta = serde_json::from_slice(&header)
            .map_err(|e| Error::Format(format!("invalid header JSON: {e}")))?;
        meta.validate()?;
        Ok(Self {
            meta,
            inner,
            next_frame: 0,
            header_len: 12 + len as u64,
        })
    }

    pub fn meta(&self) -> &VideoMeta {
        &self.meta
    }

    fn read_frame(&mut self) -> Result<RgbFrame> {
        let mut data = vec![0u8; self.meta.frame_bytes()];
        let mut filled = 0;
        while filled < data.len() {
            match self.inner.read(&mut data[filled..]) {
                Ok(0) => {
                    let actual = self.header_len
                        + (self.next_frame * self.meta.frame_bytes() + filled) as u64;
                    return Err(Error::TruncatedVideo {
                        expected: self.header_len + self.meta.payload_bytes(),
                        actual,
                    });
                }
                Ok(k) => filled += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(Error::io("<video stream>", e)),
            }
        }
        self.next_frame += 1;
        RgbFrame::new(self.meta.width, self.meta.height, data)
    }
}

impl<R: Read> Iterator for RawVideoReader<R> {
    type Item = Result<RgbFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_frame >= self.meta.frames {
            return None;
        }
        let frame = self.read_frame();
        if frame.is_err() {
            // stop after the first failure
            self.next_frame = self.meta.frames;
        }
        Some(frame)
    }
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], err: impl FnOnce() -> Error) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => err(),
        _ => Error::io("<video stream>", e),
    })
}

/// Opens a container file, checking up front that the payload is complete.
pub fn read_raw_video(path: impl AsRef<Path>) -> Result<RawVideoReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let actual = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let reader = RawVideoReader::new(BufReader::new(file))?;
    let expected = reader.header_len + reader.meta.payload_bytes();
    if actual < expected {
        return Err(Error::TruncatedVideo { expected, actual });
    }
    if actual > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last frame",
            actual - expected
        )));
    }
    Ok(reader)
}

/// Frame-by-frame writer. [`RawVideoWriter::finish`] checks the frame count
/// declared in the header was honoured.
#[derive(Debug)]
pub struct RawVideoWriter<W: Write> {
    meta: VideoMeta,
    inner: W,
    written: usize,
}

impl<W: Write> RawVideoWriter<W> {
    pub fn new(mut inner: W, meta: VideoMeta) -> Result<Self> {
        meta.validate()?;
        inner
            .write_all(&meta.header_bytes()?)
            .map_err(|e| Error::io("<video stream>", e))?;
        Ok(Self {
            meta,
            inner,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, frame: &RgbFrame) -> Result<()> {
        if frame.width != self.meta.width || frame.height != self.meta.height {
            return Err(Error::InvalidParameter(format!(
                "frame is {}x{}, container is {}x{}",
                frame.width, frame.height, self.meta.width, self.meta.height
            )));
        }
        if self.written == self.meta.frames {
            return Err(Error::InvalidParameter(format!(
                "header declares {} frames",
                self.meta.frames
            )));
        }
        self.inner
            .write_all(&frame.data)
            .map_err(|e| Error::io("<video stream>", e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.meta.frames {
            return Err(Error::InvalidParameter(format!(
                "wrote {} of {} declared frames",
                self.written, self.meta.frames
            )));
        }
        self.inner
            .flush()
            .map_err(|e| Error::io("<video stream>", e))?;
        Ok(self.inner)
    }
}

/// Averages every frame over the ROI into a trace at the video's frame rate.
pub fn video_to_trace<R: Read>(
    reader: RawVideoReader<R>,
    roi: &RoiSelection,
) -> Result<ChannelTrace> {
    let meta = *reader.meta();
    let roi = roi.resolve(meta.width, meta.height)?;
    let mut samples = Vec::with_capacity(meta.frames);
    for frame in reader {
        samples.push(spatial_mean(&frame?, &roi)?);
    }
    ChannelTrace::from_rgb(&samples, meta.fps, "")
}
