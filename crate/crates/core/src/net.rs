//! Framed TCP transport: a server holding one database replica and a client
//! running a retrieval against two servers.
//!
//! Every message is one frame:
//!
//! ```text
//! "VPIR" | version 0x01 | msg_type | scheme | payload_len: u32 BE | payload
//! ```
//!
//! A session starts with an empty HELLO answered by HELLO_ACK carrying the
//! server's [`SessionParams`]. `Pi3` clients then send a second HELLO whose
//! payload is the hash parameters. After that the client sends QUERY frames,
//! each answered by one ANSWER. Any malformed input gets an ERROR frame and
//! the connection is closed.
//!
//! There is no channel security; run it behind TLS or on a trusted network.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use crate::adversary::Offset;
use crate::codec::Cursor;
use crate::costs::{cost_row, measure_transcript, CostRow, Transcript};
use crate::dbfile;
use crate::error::{Error, Result};
use crate::field::{Database, FieldParams};
use crate::grouphash::HashParams;
use crate::schemes::{answer_gen, verify, Answer, AnswerExtra, Aux, ClientSetup, Query, RetrievalResult, SchemeId};

pub const MAGIC: [u8; 4] = *b"VPIR";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 11;
/// Frames above this size are refused.
pub const MAX_PAYLOAD: u32 = 1 << 28;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Hello = 0x01,
    HelloAck = 0x02,
    Query = 0x03,
    Answer = 0x04,
    Error = 0x7F,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => MsgType::Hello,
            0x02 => MsgType::HelloAck,
            0x03 => MsgType::Query,
            0x04 => MsgType::Answer,
            0x7F => MsgType::Error,
            _ => return None,
        })
    }
}

/// ERROR frame reason codes.
pub mod code {
    pub const MALFORMED: u8 = 0x01;
    pub const LENGTH_MISMATCH: u8 = 0x02;
    pub const MISSING_AUX: u8 = 0x03;
    pub const BAD_VERSION: u8 = 0x04;
    pub const UNKNOWN_TYPE: u8 = 0x05;
    pub const SCHEME_MISMATCH: u8 = 0x06;
    pub const INTERNAL: u8 = 0x07;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    /// Raw scheme code; see [`SchemeId::wire_code`].
    pub scheme: u8,
    pub payload: Vec<u8>,
}

fn protocol(code: u8, message: impl Into<String>) -> Error {
    Error::Protocol { code, message: message.into() }
}

impl Frame {
    pub fn new(msg_type: MsgType, scheme: SchemeId, payload: Vec<u8>) -> Self {
        Frame { msg_type, scheme: scheme.wire_code(), payload }
    }

    /// ERROR frame: code byte then a UTF-8 message.
    pub fn error(scheme: u8, code: u8, message: &str) -> Self {
        let mut payload = vec![code];
        payload.extend_from_slice(message.as_bytes());
        Frame { msg_type: MsgType::Error, scheme, payload }
    }

    pub fn scheme_id(&self) -> Result<SchemeId> {
        SchemeId::from_wire_code(self.scheme)
            .ok_or_else(|| protocol(code::MALFORMED, format!("unknown scheme code 0x{:02x}", self.scheme)))
    }

    /// `(code, message)` of an ERROR frame.
    pub fn error_parts(&self) -> Option<(u8, String)> {
        if self.msg_type != MsgType::Error {
            return None;
        }
        let (&c, rest) = self.payload.split_first()?;
        Some((c, String::from_utf8_lossy(rest).into_owned()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type as u8);
        out.push(self.scheme);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_LEN {
            return Err(protocol(code::MALFORMED, "truncated frame header"));
        }
        let (header, payload) = bytes.split_at(HEADER_LEN);
        let (msg_type, scheme, len) = parse_header(header.try_into().expect("header length"))?;
        if payload.len() != len as usize {
            return Err(protocol(
                code::MALFORMED,
                format!("payload length {} does not match header {len}", payload.len()),
            ));
        }
        Ok(Frame { msg_type, scheme, payload: payload.to_vec() })
    }

    /// Reads one frame; `Ok(None)` on a clean end of stream before the
    /// first header byte.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>> {
        let mut header = [0u8; HEADER_LEN];
        let mut got = 0;
        while got < HEADER_LEN {
            match r.read(&mut header[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let (msg_type, scheme, len) = parse_header(&header)?;
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame { msg_type, scheme, payload }))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(MsgType, u8, u32)> {
    if h[..4] != MAGIC {
        return Err(protocol(code::MALFORMED, "bad magic"));
    }
    if h[4] != VERSION {
        return Err(protocol(code::BAD_VERSION, format!("unsupported version 0x{:02x}", h[4])));
    }
    let msg_type =
        MsgType::from_byte(h[5]).ok_or_else(|| protocol(code::UNKNOWN_TYPE, format!("unknown type 0x{:02x}", h[5])))?;
    let len = u32::from_be_bytes([h[7], h[8], h[9], h[10]]);
    if len > MAX_PAYLOAD {
        return Err(protocol(code::MALFORMED, format!("payload of {len} bytes is too large")));
    }
    Ok((msg_type, h[6], len))
}

/// What a server reports in HELLO_ACK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionParams {
    pub field: FieldParams,
    pub m: u32,
    /// SHA-256 of the canonical database file.
    pub fingerprint: [u8; 32],
    /// SHA-256 of the installed hash parameters, if any.
    pub aux: Option<[u8; 32]>,
}

impl SessionParams {
    /// Field encoding | m: u32 | fingerprint | aux flag | aux digest.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.field.encode(&mut out);
        out.extend_from_slice(&self.m.to_be_bytes());
        out.extend_from_slice(&self.fingerprint);
        match &self.aux {
            None => out.push(0),
            Some(d) => {
                out.push(1);
                out.extend_from_slice(d);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let (field, used) = FieldParams::decode(bytes)?;
        let mut cur = Cursor::new(&bytes[used..]);
        let m = cur.u32()?;
        let fingerprint = cur.take(32)?.try_into().expect("32 bytes");
        let aux = match cur.u8()? {
            0 => None,
            1 => Some(cur.take(32)?.try_into().expect("32 bytes")),
            f => return Err(Error::Decode(format!("bad aux flag {f}"))),
        };
        cur.finish()?;
        Ok(SessionParams { field, m, fingerprint, aux })
    }

    fn same_database(&self, other: &Self) -> bool {
        self.field == other.field && self.m == other.m && self.fingerprint == other.fingerprint
    }
}

/// `f_part` then `fv_part`, each `m` fixed-width elements.
pub fn encode_query(field: &FieldParams, q: &Query) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.byte_width() * q.f_part.len() * 2);
    for e in q.f_part.iter().chain(q.fv_part.iter().flatten()) {
        field.encode_fp(e, &mut out);
    }
    out
}

pub fn decode_query(field: &FieldParams, scheme: SchemeId, m: usize, payload: &[u8]) -> Result<Query> {
    let w = field.byte_width();
    let parts = if scheme.has_check_query() { 2 } else { 1 };
    if payload.len() % (w * parts) != 0 {
        return Err(Error::Decode(format!("query payload of {} bytes is not whole elements", payload.len())));
    }
    let got = payload.len() / (w * parts);
    if got != m {
        return Err(Error::LengthMismatch { expected: m, got });
    }
    let elems = payload.chunks(w).map(|c| field.decode_fp(c)).collect::<Result<Vec<_>>>()?;
    let (f_part, fv) = elems.split_at(m);
    Ok(Query {
        scheme,
        f_part: f_part.to_vec(),
        fv_part: (parts == 2).then(|| fv.to_vec()),
    })
}

/// `z`, then `w` or the digest.
pub fn encode_answer(field: &FieldParams, hash: Option<&HashParams>, a: &Answer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    field.encode_ext(&a.z, &mut out);
    match &a.extra {
        AnswerExtra::None => {}
        AnswerExtra::Field(w) => field.encode_ext(w, &mut out),
        AnswerExtra::Digest(d) => hash.ok_or(Error::MissingAux("hash parameters"))?.encode_digest(d, &mut out),
    }
    Ok(out)
}

pub fn decode_answer(
    field: &FieldParams,
    scheme: SchemeId,
    hash: Option<&HashParams>,
    payload: &[u8],
) -> Result<Answer> {
    let mut cur = Cursor::new(payload);
    let n = field.ext_byte_len();
    let z = field.decode_ext(cur.take(n)?)?;
    let extra = match scheme {
        SchemeId::Pi0 => AnswerExtra::None,
        SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::AltA => AnswerExtra::Field(field.decode_ext(cur.take(n)?)?),
        SchemeId::Pi3 => {
            let hash = hash.ok_or(Error::MissingAux("hash parameters"))?;
            AnswerExtra::Digest(hash.decode_digest(cur.take(hash.group().byte_width())?)?)
        }
    };
    cur.finish()?;
    Ok(Answer { scheme, z, extra })
}

// ---- server ----

#[derive(Clone, Debug, Default)]
pub struct ServerConfig {
    /// Test hook: perturb every answer so clients should reject.
    pub tamper: bool,
    /// Seed for the tamper offsets.
    pub seed: u64,
    pub timeout: Option<Duration>,
}

pub struct Server {
    listener: TcpListener,
    db: Arc<Database>,
    fingerprint: [u8; 32],
    config: ServerConfig,
}

impl Server {
    pub fn bind(addr: &str, db: Database, config: ServerConfig) -> Result<Server> {
        let listener =
            TcpListener::bind(addr).map_err(|source| Error::Bind { addr: addr.to_string(), source })?;
        let fingerprint = dbfile::fingerprint(&db);
        Ok(Server { listener, db: Arc::new(db), fingerprint, config })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections forever, one thread each.
    pub fn run(self) -> Result<()> {
        let connections = AtomicU64::new(0);
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let n = connections.fetch_add(1, Ordering::Relaxed);
            let handler = Handler {
                db: self.db.clone(),
                fingerprint: self.fingerprint,
                tamper: self.config.tamper.then(|| {
                    let mut rng = ChaCha20Rng::seed_from_u64(self.config.seed);
                    rng.set_stream(n);
                    rng
                }),
            };
            let timeout = self.config.timeout;
            std::thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                if let Err(e) = handler.serve(stream, timeout) {
                    log::debug!("connection {peer}: {e}");
                }
            });
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<SocketAddr> {
        let addr = self.local_addr()?;
        std::thread::spawn(move || self.run());
        Ok(addr)
    }
}

struct Handler {
    db: Arc<Database>,
    fingerprint: [u8; 32],
    tamper: Option<ChaCha20Rng>,
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Protocol { code, .. } => *code,
        Error::LengthMismatch { .. } => code::LENGTH_MISMATCH,
        Error::MissingAux(_) => code::MISSING_AUX,
        Error::SchemeMismatch(_) => code::SCHEME_MISMATCH,
        Error::Decode(_) | Error::VariantMismatch { .. } | Error::ParamsMismatch(_) => code::MALFORMED,
        _ => code::INTERNAL,
    }
}

impl Handler {
    fn serve(mut self, mut stream: TcpStream, timeout: Option<Duration>) -> Result<()> {
        stream.set_read_timeout(timeout)?;
        stream.set_write_timeout(timeout)?;
        stream.set_nodelay(true)?;
        let mut session: Option<SchemeId> = None;
        let mut hash = None;
        loop {
            let (scheme_byte, reply) = match Frame::read_from(&mut stream) {
                Ok(None) => return Ok(()),
                Ok(Some(frame)) => (frame.scheme, self.handle(&frame, &mut session, &mut hash)),
                Err(e @ Error::Protocol { .. }) => (0, Err(e)),
                Err(e) => return Err(e),
            };
            match reply {
                Ok(frame) => frame.write_to(&mut stream)?,
                Err(e) => {
                    Frame::error(scheme_byte, error_code(&e), &e.to_string()).write_to(&mut stream)?;
                    return Err(e);
                }
            }
        }
    }

    fn session_params(&self, aux: Option<[u8; 32]>) -> SessionParams {
        SessionParams {
            field: (**self.db.params()).clone(),
            m: self.db.len() as u32,
            fingerprint: self.fingerprint,
            aux,
        }
    }

    fn handle(
        &mut self,
        frame: &Frame,
        session: &mut Option<SchemeId>,
        hash: &mut Option<(HashParams, [u8; 32])>,
    ) -> Result<Frame> {
        let scheme = frame.scheme_id()?;
        if let Some(s) = session {
            if *s != scheme {
                return Err(Error::SchemeMismatch(format!("session is {s}, frame is {scheme}")));
            }
        }
        let field = self.db.params();
        match frame.msg_type {
            MsgType::Hello => {
                *session = Some(scheme);
                if !frame.payload.is_empty() {
                    if scheme != SchemeId::Pi3 {
                        return Err(protocol(code::MALFORMED, format!("{scheme} takes no hash parameters")));
                    }
                    let mut cur = Cursor::new(&frame.payload);
                    let h = HashParams::decode_from(&mut cur)?;
                    cur.finish()?;
                    h.check_field(field)?;
                    *hash = Some((h, Sha256::digest(&frame.payload).into()));
                }
                let aux = hash.as_ref().map(|(_, d)| *d);
                Ok(Frame::new(MsgType::HelloAck, scheme, self.session_params(aux).encode()))
            }
            MsgType::Query => {
                if scheme == SchemeId::Pi3 && hash.is_none() {
                    return Err(Error::MissingAux("hash parameters must be sent in HELLO first"));
                }
                let hash = hash.as_ref().map(|(h, _)| h);
                let query = decode_query(field, scheme, self.db.len(), &frame.payload)?;
                let mut aux = Aux::empty(field.clone());
                aux.hash = hash.cloned();
                // The server index does not change the computation.
                let mut answer = answer_gen(scheme, 1, &query, &self.db, &aux)?;
                if let Some(rng) = &mut self.tamper {
                    let d0 = field.ext_one();
                    let d1 = field.scale(&field.random_nonzero_fp(rng), &d0);
                    answer = Offset::Field { d0, d1 }.apply(answer, field, hash)?;
                }
                Ok(Frame::new(MsgType::Answer, scheme, encode_answer(field, hash, &answer)?))
            }
            other => Err(protocol(code::MALFORMED, format!("unexpected {other:?} from client"))),
        }
    }
}

// ---- client ----

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub addr1: String,
    pub addr2: String,
    pub scheme: SchemeId,
    /// 1-based record index.
    pub i: usize,
    pub timeout: Duration,
}

#[derive(Clone, Debug)]
pub struct ClientOutcome {
    pub result: RetrievalResult,
    pub answers: [Answer; 2],
    pub session: SessionParams,
    /// Costs from the payload sizes actually exchanged.
    pub measured: CostRow,
    /// Costs from the formulas.
    pub formula: CostRow,
    pub trace: Transcript,
}

struct Conn {
    stream: TcpStream,
    peer: String,
}

impl Conn {
    fn open(addr: &str, timeout: Duration) -> Result<Conn> {
        let transport = |source| Error::Transport { peer: addr.to_string(), source };
        let target = addr
            .to_socket_addrs()
            .map_err(transport)?
            .next()
            .ok_or_else(|| transport(io::Error::new(io::ErrorKind::NotFound, "address did not resolve")))?;
        let stream = TcpStream::connect_timeout(&target, timeout).map_err(transport)?;
        let setup = || -> io::Result<()> {
            stream.set_read_timeout(Some(timeout))?;
            stream.set_write_timeout(Some(timeout))?;
            stream.set_nodelay(true)
        };
        setup().map_err(transport)?;
        Ok(Conn { stream, peer: addr.to_string() })
    }

    fn exchange(&mut self, frame: &Frame, expect: MsgType) -> Result<Frame> {
        let transport = |source| Error::Transport { peer: self.peer.clone(), source };
        frame.write_to(&mut self.stream).map_err(transport)?;
        let reply = match Frame::read_from(&mut self.stream) {
            Ok(Some(f)) => f,
            Ok(None) => return Err(transport(io::Error::from(io::ErrorKind::UnexpectedEof))),
            Err(Error::Io(e)) => return Err(transport(e)),
            Err(e) => return Err(e),
        };
        if let Some((c, message)) = reply.error_parts() {
            return Err(Error::Protocol { code: c, message: format!("{}: {message}", self.peer) });
        }
        if reply.msg_type != expect || reply.scheme != frame.scheme {
            return Err(protocol(code::MALFORMED, format!("{}: unexpected {:?} reply", self.peer, reply.msg_type)));
        }
        Ok(reply)
    }
}

/// Sends one frame to each server concurrently.
fn exchange_both(conns: &mut [Conn; 2], frames: [&Frame; 2], expect: MsgType) -> Result<[Frame; 2]> {
    let [c1, c2] = conns;
    let (r1, r2) = std::thread::scope(|s| {
        let h = s.spawn(|| c2.exchange(frames[1], expect));
        let r1 = c1.exchange(frames[0], expect);
        (r1, h.join().expect("exchange thread panicked"))
    });
    Ok([r1?, r2?])
}

/// Full retrieval over the wire. `rng` is consumed in the same order as
/// [`crate::schemes::retrieve`], so equal seeds give equal queries.
pub fn client_retrieve<R: RngCore + ?Sized>(config: &ClientConfig, rng: &mut R) -> Result<ClientOutcome> {
    let scheme = config.scheme;
    let (c1, c2) = std::thread::scope(|s| {
        let h = s.spawn(|| Conn::open(&config.addr2, config.timeout));
        (Conn::open(&config.addr1, config.timeout), h.join().expect("connect thread panicked"))
    });
    let mut conns = [c1?, c2?];
    let mut trace = Transcript { scheme: Some(scheme), ..Transcript::default() };

    let hello = Frame::new(MsgType::Hello, scheme, Vec::new());
    let acks = exchange_both(&mut conns, [&hello, &hello], MsgType::HelloAck)?;
    let s1 = SessionParams::decode(&acks[0].payload)?;
    let s2 = SessionParams::decode(&acks[1].payload)?;
    if !s1.same_database(&s2) {
        return Err(Error::FingerprintMismatch);
    }
    trace.handshake_bytes += acks.iter().map(|a| a.payload.len()).sum::<usize>();

    let field = Arc::new(s1.field.clone());
    let m = s1.m as usize;
    let setup = ClientSetup::new(scheme, field.clone(), m, rng)?;
    if let Some(hash) = setup.hash() {
        let mut payload = Vec::new();
        hash.encode(&mut payload);
        let expected: [u8; 32] = Sha256::digest(&payload).into();
        let hello = Frame::new(MsgType::Hello, scheme, payload);
        let acks = exchange_both(&mut conns, [&hello, &hello], MsgType::HelloAck)?;
        for ack in &acks {
            if SessionParams::decode(&ack.payload)?.aux != Some(expected) {
                return Err(protocol(code::MISSING_AUX, "server did not install the hash parameters"));
            }
        }
        trace.handshake_bytes += 2 * hello.payload.len() + acks.iter().map(|a| a.payload.len()).sum::<usize>();
    }

    let bundle = setup.queries_gen(config.i, rng)?;
    let q1 = Frame::new(MsgType::Query, scheme, encode_query(&field, &bundle.sigma1));
    let q2 = Frame::new(MsgType::Query, scheme, encode_query(&field, &bundle.sigma2));
    trace.query_bytes = vec![q1.payload.len(), q2.payload.len()];
    let replies = exchange_both(&mut conns, [&q1, &q2], MsgType::Answer)?;
    trace.answer_bytes = replies.iter().map(|r| r.payload.len()).collect();
    let pi1 = decode_answer(&field, scheme, setup.hash(), &replies[0].payload)?;
    let pi2 = decode_answer(&field, scheme, setup.hash(), &replies[1].payload)?;
    let result = verify(scheme, config.i, &bundle.vk, &pi1, &pi2, &bundle.aux_v)?;

    Ok(ClientOutcome {
        result,
        answers: [pi1, pi2],
        session: s1,
        measured: measure_transcript(&trace, m as u64, &field)?,
        formula: cost_row(scheme, m as u64, &field, setup.group())?,
        trace,
    })
}
