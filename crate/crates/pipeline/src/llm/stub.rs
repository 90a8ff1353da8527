//! In-process OpenAI-compatible endpoint for tests and offline demos. Serves
//! one request per connection on a local port.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};

use super::FixtureStore;
use crate::dataset::ProblemInput;
use crate::run::{problem_text, Stage};

/// A received chat-completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct StubRequest {
    pub authorization: Option<String>,
    pub body: Value,
}

impl StubRequest {
    /// Concatenated message contents.
    pub fn prompt(&self) -> String {
        self.body["messages"]
            .as_array()
            .map(|ms| {
                ms.iter()
                    .filter_map(|m| m["content"].as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
}

impl StubReply {
    /// A 200 response whose first choice carries `content`.
    pub fn completion(content: &str) -> Self {
        let words = content.split_whitespace().count();
        Self {
            status: 200,
            body: json!({
                "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
                "usage": {"prompt_tokens": 0, "completion_tokens": words},
            })
            .to_string(),
        }
    }

    pub fn error(status: u16, message: &str) -> Self {
        Self {
            status,
            body: json!({"error": {"message": message}}).to_string(),
        }
    }
}

type Responder = dyn Fn(&StubRequest) -> StubReply + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<Mutex<Vec<StubRequest>>>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start<F>(responder: F) -> io::Result<Self>
    where
        F: Fn(&StubRequest) -> StubReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let responder: Arc<Responder> = Arc::new(responder);
        let handle = {
            let stop = Arc::clone(&stop);
            let requests = Arc::clone(&requests);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let responder = Arc::clone(&responder);
                    let requests = Arc::clone(&requests);
                    thread::spawn(move || {
                        if let Err(e) = serve(stream, &*responder, &requests) {
                            log::debug!("stub connection: {e}");
                        }
                    });
                }
            })
        };
        Ok(Self {
            addr,
            stop,
            requests,
            handle: Some(handle),
        })
    }

    /// Answers pipeline calls from recorded fixtures. The stage is recognized
    /// from its prompt template, the problem from its description, and the
    /// attempt by counting calls per problem and stage.
    pub fn from_fixtures(store: FixtureStore, problems: &[ProblemInput]) -> io::Result<Self> {
        let texts: Vec<(String, String)> = problems.iter().map(|p| (p.id.clone(), problem_text(p))).collect();
        let counters: Mutex<BTreeMap<(String, Stage), u32>> = Mutex::new(BTreeMap::new());
        Self::start(move |req| {
            let prompt = req.prompt();
            let Some(stage) = detect_stage(&prompt) else {
                return StubReply::error(400, "unrecognized prompt");
            };
            let by_description = texts
                .iter()
                .filter(|(_, t)| prompt.contains(t.as_str()))
                .max_by_key(|(_, t)| t.len())
                .map(|(id, _)| id);
            // Prompts without the description quote an earlier response instead.
            let by_response = || {
                texts
                    .iter()
                    .filter_map(|(id, _)| {
                        let longest = store
                            .problem(id)?
                            .values()
                            .map(|e| e.content.trim())
                            .filter(|c| !c.is_empty() && prompt.contains(c))
                            .map(str::len)
                            .max()?;
                        Some((id, longest))
                    })
                    .max_by_key(|(_, n)| *n)
                    .map(|(id, _)| id)
            };
            let Some(id) = by_description.or_else(by_response) else {
                return StubReply::error(400, "unknown problem");
            };
            let attempt = {
                let mut c = counters.lock().expect("stub counters");
                let n = c.entry((id.clone(), stage)).or_insert(0);
                *n += 1;
                *n - 1
            };
            let key = format!("{}/{attempt}", stage.name());
            match store.problem(id).and_then(|m| m.get(&key)) {
                Some(entry) => StubReply::completion(&entry.content),
                None => StubReply::error(404, &format!("no response for {id}:{key}")),
            }
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<StubRequest> {
        self.requests.lock().expect("stub requests").clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it observes the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Recognizes which stage template produced `prompt`.
pub fn detect_stage(prompt: &str) -> Option<Stage> {
    const MARKERS: [(&str, Stage); 6] = [
        ("list every parameter", Stage::SemanticEncoder),
        ("Write a mathematical model", Stage::Formalization),
        ("Translate the problem below into a model document", Stage::ExecutiveCompiler),
        ("A colleague drafted this model document", Stage::SupervisorForward),
        ("counterfactual checks", Stage::SupervisorBackward),
        ("List every condition", Stage::Reasoner),
    ];
    MARKERS.iter().find(|(m, _)| prompt.contains(m)).map(|(_, s)| *s)
}

fn serve(stream: TcpStream, responder: &Responder, requests: &Mutex<Vec<StubRequest>>) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.is_empty() {
        return Ok(());
    }
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        line.clear();
        reader.read_line(&mut line)?;
        let header = line.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = value.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let request = StubRequest {
        authorization,
        body: serde_json::from_slice(&body).unwrap_or(Value::Null),
    };
    let reply = responder(&request);
    requests.lock().expect("stub requests").push(request);
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}
