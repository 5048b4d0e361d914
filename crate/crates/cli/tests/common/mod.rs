#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;
use taxoenrich::taxonomy::{synset, Pos, Taxonomy};
use taxoenrich::vectors::VectorStore;

pub const BIN: &str = env!("CARGO_BIN_EXE_taxoenrich");

pub fn t0() -> Taxonomy {
    Taxonomy::from_synsets(vec![
        synset("s1", Pos::Noun, &["organism", "being"], &[]),
        synset("s2", Pos::Noun, &["animal"], &["s1"]),
        synset("s3", Pos::Noun, &["dog"], &["s2"]),
        synset("s4", Pos::Noun, &["cat"], &["s2"]),
        synset("s5", Pos::Noun, &["plant"], &["s1"]),
        synset("s6", Pos::Noun, &["tree"], &["s5"]),
    ])
    .unwrap()
}

/// Random DAG on `n` nodes `n00..`: node 0 is the root and every later node
/// takes one to `max_parents` parents among the nodes before it.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, max_parents: usize) -> Taxonomy {
    let syns: Vec<_> = (0..n)
        .map(|i| {
            let id = format!("n{i:02}");
            let word = format!("w{i}");
            let parents: Vec<String> = if i == 0 {
                Vec::new()
            } else {
                let k = rng.random_range(1..=max_parents.min(i));
                let mut p: Vec<String> = sample(rng, i, k).into_iter().map(|j| format!("n{j:02}")).collect();
                p.sort();
                p
            };
            let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
            synset(&id, Pos::Noun, &[&word], &refs)
        })
        .collect();
    Taxonomy::from_synsets(syns).unwrap()
}

/// Writes the toy inputs into `dir` and returns it: two taxonomy releases,
/// 3-d word vectors and a wiktionary table.
pub fn toy_workspace(dir: &Path) -> PathBuf {
    let old = t0();
    old.save(dir.join("old.jsonl")).unwrap();
    let mut syns: Vec<_> = old.synsets().cloned().collect();
    syns.push(synset("s7", Pos::Noun, &["puppy"], &["s3"]));
    syns.push(synset("s8", Pos::Noun, &["kitten"], &["s4"]));
    syns.push(synset("s9", Pos::Noun, &["sapling"], &["s6"]));
    Taxonomy::from_synsets(syns).unwrap().save(dir.join("new.jsonl")).unwrap();

    let mut store = VectorStore::new(3);
    for (w, v) in [
        ("organism", [1.0, 0.0, 0.0]),
        ("being", [1.0, 0.1, 0.0]),
        ("animal", [0.7, 0.7, 0.0]),
        ("dog", [0.5, 0.8, 0.1]),
        ("cat", [0.5, 0.8, -0.1]),
        ("plant", [0.7, 0.0, 0.7]),
        ("tree", [0.5, 0.1, 0.8]),
        ("puppy", [0.52, 0.79, 0.12]),
        ("kitten", [0.5, 0.79, -0.12]),
        ("sapling", [0.45, 0.12, 0.82]),
    ] {
        store.insert(w, &v);
    }
    store.write(std::fs::File::create(dir.join("v.vec")).unwrap()).unwrap();
    std::fs::write(
        dir.join("wikt.tsv"),
        "puppy\tdog\tpup\ta young dog\nkitten\tcat\t\ta young cat\nsapling\ttree\t\ta young tree\n",
    )
    .unwrap();
    dir.to_path_buf()
}

pub fn run_cli<S: AsRef<str>>(args: &[S], extra: &[&str]) -> Output {
    Command::new(BIN)
        .args(args.iter().map(AsRef::as_ref))
        .args(extra)
        .output()
        .expect("spawn taxoenrich")
}

pub struct HttpServer {
    child: Child,
    port: u16,
}

impl HttpServer {
    /// Spawn `taxoenrich <args> --port <free port>` and wait until it accepts
    /// connections.
    pub fn start(args: &[String]) -> Result<Self, String> {
        let port = TcpListener::bind("127.0.0.1:0")
            .and_then(|l| l.local_addr())
            .map_err(|e| e.to_string())?
            .port();
        let child = Command::new(BIN)
            .args(args)
            .args(["--port", &port.to_string()])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut server = HttpServer { child, port };
        let deadline = Instant::now() + Duration::from_secs(30);
        while TcpStream::connect(("127.0.0.1", port)).is_err() {
            if let Ok(Some(status)) = server.child.try_wait() {
                return Err(format!("server exited early: {status}"));
            }
            if Instant::now() > deadline {
                return Err("server did not start".into());
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        // keep the child owned even on the early returns above
        server.port = port;
        Ok(server)
    }

    /// One request over a fresh connection; returns the status code and body.
    pub fn request(&self, method: &str, path: &str, body: Option<&str>) -> Result<(u16, Vec<u8>), String> {
        let mut stream = TcpStream::connect(("127.0.0.1", self.port)).map_err(|e| e.to_string())?;
        let body = body.unwrap_or("");
        let head = format!(
            "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            body.len()
        );
        stream.write_all(head.as_bytes()).map_err(|e| e.to_string())?;
        stream.write_all(body.as_bytes()).map_err(|e| e.to_string())?;
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).map_err(|e| e.to_string())?;
        let split = raw
            .windows(4)
            .position(|w| w == b"\r\n\r\n")
            .ok_or("malformed response")?;
        let head = String::from_utf8_lossy(&raw[..split]).to_string();
        let status = head
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse().ok())
            .ok_or("missing status")?;
        Ok((status, raw[split + 4..].to_vec()))
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
