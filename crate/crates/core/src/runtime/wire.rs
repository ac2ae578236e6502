//! Newline-delimited JSON framing and a loopback stream transport.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver};
use std::thread::JoinHandle;

use super::message::AgentMessage;
use crate::error::{Error, Result};

/// One frame: the message as compact JSON followed by `\n`.
pub fn encode_frame(m: &AgentMessage) -> Result<String> {
    let mut s = serde_json::to_string(m)?;
    s.push('\n');
    Ok(s)
}

pub fn decode_frame(line: &str) -> Result<AgentMessage> {
    serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| Error::Payload(format!("bad frame: {e}")))
}

pub struct FrameReader<R> {
    inner: R,
    line: String,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        FrameReader { inner, line: String::new() }
    }

    /// Next frame, skipping blank lines; `None` at end of stream.
    pub fn next_frame(&mut self) -> Result<Option<AgentMessage>> {
        loop {
            self.line.clear();
            if self.inner.read_line(&mut self.line)? == 0 {
                return Ok(None);
            }
            if !self.line.trim().is_empty() {
                return decode_frame(&self.line).map(Some);
            }
        }
    }
}

/// How a sealed message travels from sender to the recipient's mailbox.
pub trait Transport: Send {
    fn carry(&mut self, m: AgentMessage) -> Result<AgentMessage>;
    fn name(&self) -> &'static str;
}

pub struct InProcess;

impl Transport for InProcess {
    fn carry(&mut self, m: AgentMessage) -> Result<AgentMessage> {
        Ok(m)
    }

    fn name(&self) -> &'static str {
        "in-process"
    }
}

/// Frames every message over a loopback TCP connection; a reader thread
/// decodes frames on the far side.
pub struct WireTransport {
    writer: TcpStream,
    rx: Receiver<Result<AgentMessage>>,
    reader: Option<JoinHandle<()>>,
    pub frames: u64,
}

impl WireTransport {
    pub fn loopback() -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let writer = TcpStream::connect(listener.local_addr()?)?;
        writer.set_nodelay(true)?;
        let (server, _) = listener.accept()?;
        let (tx, rx) = channel();
        let reader = std::thread::spawn(move || {
            let mut frames = FrameReader::new(BufReader::new(server));
            loop {
                match frames.next_frame() {
                    Ok(Some(m)) => {
                        if tx.send(Ok(m)).is_err() {
                            break;
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(WireTransport { writer, rx, reader: Some(reader), frames: 0 })
    }
}

impl Transport for WireTransport {
    fn carry(&mut self, m: AgentMessage) -> Result<AgentMessage> {
        self.writer.write_all(encode_frame(&m)?.as_bytes())?;
        self.frames += 1;
        self.rx
            .recv()
            .map_err(|_| Error::Payload("wire reader closed".into()))?
    }

    fn name(&self) -> &'static str {
        "wire"
    }
}

impl Drop for WireTransport {
    fn drop(&mut self) {
        let _ = self.writer.shutdown(std::net::Shutdown::Both);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::message::{run_key, seal_message, verify_tag, MessageKind};
    use serde_json::json;

    fn msg(i: u32) -> AgentMessage {
        seal_message(
            AgentMessage::new(format!("m{i}"), i, "A".into(), "B".into(), MessageKind::Control, &json!({"i": i, "s": "x\ny"}))
                .unwrap(),
            &run_key(3),
        )
    }

    #[test]
    fn frames_round_trip() {
        let text: String = (0..3).map(|i| encode_frame(&msg(i)).unwrap()).collect::<Vec<_>>().join("\n");
        assert_eq!(text.matches('\n').count(), 5);
        let mut r = FrameReader::new(std::io::Cursor::new(text));
        for i in 0..3 {
            let m = r.next_frame().unwrap().unwrap();
            assert_eq!(m, msg(i));
            assert!(verify_tag(&m, &run_key(3)).is_accept());
        }
        assert!(r.next_frame().unwrap().is_none());
        assert!(decode_frame("{not json").is_err());
    }

    #[test]
    fn loopback_carries_messages() {
        let mut w = WireTransport::loopback().unwrap();
        let big = AgentMessage::new("big", 0, "A".into(), "B".into(), MessageKind::Model, &vec![0.125f64; 200_000]).unwrap();
        assert_eq!(w.carry(big.clone()).unwrap(), big);
        for i in 0..20 {
            assert_eq!(w.carry(msg(i)).unwrap(), msg(i));
        }
        assert_eq!(w.frames, 21);
    }
}
