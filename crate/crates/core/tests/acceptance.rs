//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use vpir::adversary::{
    self, count_alt_tuples, exact_epsilon_alt, exact_epsilon_pi1, monte_carlo, AdditiveTamper, KeyGuesser,
    RandomTamper, ALT_DEFAULT_BUDGET,
};
use vpir::costs::{asymptotic_capacity, capacity, cost_row};
use vpir::grouphash::{hash_setup, setup_group};
use vpir::net::{self, encode_answer, encode_query, ClientConfig, Frame, MsgType, Server, ServerConfig, SessionParams};
use vpir::schemes::{answer_gen, ClientSetup, KeyCoins, QueryCoins};
use vpir::sharing::EvalPoints;
use vpir::{dbfile, ArithOp, Database, FieldParams, RetrievalResult, SchemeId};

type Outcome = Result<String, String>;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn field(p: impl Into<BigUint>, t: usize) -> Arc<FieldParams> {
    Arc::new(FieldParams::generate(p.into(), t).unwrap())
}

fn demo_p() -> BigUint {
    (BigUint::one() << 61u32) - 1u32
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// 1. Honest retrievals reproduce the record for every scheme.
fn correctness() -> Outcome {
    let f = field(97u32, 2);
    let per_scheme = 10_000u64;
    let failures: u64 = SchemeId::ALL
        .par_iter()
        .map(|&scheme| {
            let mut rng = ChaCha20Rng::seed_from_u64(scheme.wire_code() as u64);
            let mut bad = 0;
            for _ in 0..per_scheme {
                let m = rng.gen_range(1..=8);
                let i = rng.gen_range(1..=m);
                let db = Database::random(f.clone(), m, &mut rng).unwrap();
                let got = vpir::schemes::retrieve(scheme, m, i, &f, &db, &mut rng).unwrap();
                if got != RetrievalResult::Value(db.get(i).unwrap().clone()) {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    ensure!(failures == 0, "{failures} wrong retrievals");
    Ok(format!("{} retrievals per scheme, 0 failures", per_scheme))
}

// 2. Key-scalar soundness: ε ∈ {0, 1/(p-1)}.
fn pi1_exact_bound() -> Outcome {
    let mut checked = 0;
    for (p, pairs) in [(5u64, None), (97, Some(500))] {
        let f = field(p, 1);
        let bound = rat(1, p as i64 - 1);
        let grid: Vec<(u64, u64)> = match pairs {
            None => (1..p).flat_map(|a| (0..p).map(move |b| (a, b))).collect(),
            Some(n) => {
                let mut rng = ChaCha20Rng::seed_from_u64(2);
                (0..n).map(|_| (rng.gen_range(1..p), rng.gen_range(0..p))).collect()
            }
        };
        for (d0, d1) in grid {
            let eps = exact_epsilon_pi1(&f, &f.fp(d0), &f.fp(d1)).map_err(|e| e.to_string())?;
            // Δ1 = vΔ0 has the single solution v = Δ1/Δ0, which is a key iff Δ1 != 0.
            let expected = if d1 == 0 { BigRational::zero() } else { bound.clone() };
            ensure!(eps == expected, "p={p} Δ0={d0} Δ1={d1}: got {eps}, expected {expected}");
            ensure!(eps <= bound, "p={p} exceeds 1/(p-1)");
            checked += 1;
        }
    }
    Ok(format!("{checked} tamperings, all in {{0, 1/(p-1)}}"))
}

// 3. Secret-point soundness at p = 5 and 7.
fn alt_exact_bound() -> Outcome {
    // Independent enumeration of the same win condition.
    let reference: [(u64, &[(i64, i64)]); 2] = [
        (5, &[(0, 1), (1, 3), (2, 9), (2, 9), (2, 9)]),
        (7, &[(0, 1), (1, 5), (4, 25), (4, 25), (4, 25), (4, 25), (4, 25)]),
    ];
    let mut worst = Vec::new();
    for (p, expected) in reference {
        let f = field(p, 1);
        let bound = adversary::alt_bound(f.p());
        let mut max = BigRational::zero();
        for d1 in 0..p {
            let eps = exact_epsilon_alt(&f, &f.fp(1u32), &f.fp(d1), ALT_DEFAULT_BUDGET).map_err(|e| e.to_string())?;
            let (n, d) = expected[d1 as usize];
            ensure!(eps == rat(n, d), "p={p} Δ1={d1}: got {eps}, reference {n}/{d}");
            let hits = count_alt_tuples(&f, 1, &f.ext_one(), &f.embed(&f.fp(d1))).map_err(|e| e.to_string())?;
            let total = (p - 1) * (p - 1) * (p - 2) * (p - 2);
            ensure!(eps == BigRational::new(hits.into(), total.into()), "p={p} Δ1={d1}: counting routes disagree");
            ensure!(eps <= bound, "p={p} Δ1={d1}: {eps} > {bound}");
            max = max.max(eps);
        }
        worst.push(format!("p={p}: max {max} <= {bound}"));
    }
    Ok(worst.join(", "))
}

// 4. Monte-Carlo KeyGuesser against the exact 1/256.
fn monte_carlo_agreement() -> Outcome {
    let f = field(257u32, 1);
    let db = Database::random(f.clone(), 4, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
    let n = 100_000u64;
    let report = monte_carlo(SchemeId::Pi1, &KeyGuesser, &db, 2, 1, n, false, 44).map_err(|e| e.to_string())?;
    let exact = exact_epsilon_pi1(&f, &f.fp(1u32), &f.fp(1u32)).unwrap().to_f64().unwrap();
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    let rate = report.rate_f64();
    let z = (rate - exact) / se;
    ensure!(z.abs() <= 3.0, "rate {rate:.6} is {z:.2} standard errors from {exact:.6}");
    Ok(format!("{} wins / {n}, rate {rate:.6} vs {exact:.6} ({z:+.2} se), ci_upper {:.6}", report.wins, report.ci_upper.unwrap()))
}

// 5. Discrete-log schemes at 61-bit p, and hash homomorphy.
fn dlog_smoke() -> Outcome {
    let f = field(demo_p(), 2);
    let db = Database::random(f.clone(), 4, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
    let n = 100_000u64;
    let strategies: Vec<Box<dyn adversary::AdversaryStrategy>> =
        vec![Box::new(RandomTamper), Box::new(AdditiveTamper::scalar(&f, 1, 1))];
    let mut lines = Vec::new();
    for scheme in [SchemeId::Pi2, SchemeId::Pi3] {
        for (k, s) in strategies.iter().enumerate() {
            let r = monte_carlo(scheme, s.as_ref(), &db, 3, 1 + k % 2, n, false, 50 + k as u64)
                .map_err(|e| e.to_string())?;
            ensure!(r.wins == 0, "{scheme} {}: {} wins", s.name(), r.wins);
            lines.push(format!("{scheme}/{}", s.name()));
        }
    }
    let public = monte_carlo(SchemeId::Pi2, &RandomTamper, &db, 1, 2, n, true, 60).map_err(|e| e.to_string())?;
    ensure!(public.wins == 0, "public game: {} wins", public.wins);

    let mut cases = 0;
    for (p, t) in [(BigUint::from(97u32), 2usize), (demo_p(), 4)] {
        let f = field(p, t);
        let group = setup_group(f.p()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(55);
        let h = hash_setup(&f, &group, &mut rng).unwrap();
        for _ in 0..1000 {
            let (y1, y2) = (f.random_ext(&mut rng), f.random_ext(&mut rng));
            let (a1, a2) = (f.random_fp(&mut rng), f.random_fp(&mut rng));
            let lin = f
                .ext_arith(&f.scale_ext(&a1, &y1).unwrap(), &f.scale_ext(&a2, &y2).unwrap(), ArithOp::Add)
                .unwrap();
            let lhs = h.hhash(&f, &lin).unwrap();
            let rhs = h.combine(&h.hscale(&h.hhash(&f, &y1).unwrap(), &a1), &h.hscale(&h.hhash(&f, &y2).unwrap(), &a2));
            ensure!(lhs == rhs, "homomorphy fails at p={}", f.p());
            cases += 1;
        }
    }
    Ok(format!("0 wins in {}x{n} trials plus public game; {cases} homomorphy cases", lines.len()))
}

// 6. Each server's query distribution does not depend on i.
fn privacy() -> Outcome {
    let f = field(3u32, 1);
    let m = 2;
    let all_vectors: Vec<Vec<u64>> = (0..9).map(|n| vec![n % 3, n / 3]).collect();
    let to_fp = |v: &Vec<u64>| v.iter().map(|&x| f.fp(x)).collect::<Vec<_>>();
    let mut summary = Vec::new();
    for scheme in [SchemeId::Pi1, SchemeId::AltA] {
        let setup = ClientSetup::new(scheme, f.clone(), m, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
        let keys: Vec<KeyCoins> = match scheme {
            SchemeId::Pi1 => (1..3u64).map(|v| KeyCoins::Scalar(f.fp(v))).collect(),
            _ => {
                let pairs = [(1u64, 2u64), (2, 1)];
                pairs
                    .iter()
                    .flat_map(|&(a, b)| {
                        pairs.iter().map(move |&(c, d)| (a, b, c, d))
                    })
                    .map(|(a, b, c, d)| KeyCoins::Points {
                        primary: EvalPoints::new(f.fp(a), f.fp(b)).unwrap(),
                        check: EvalPoints::new(f.fp(c), f.fp(d)).unwrap(),
                    })
                    .collect()
            }
        };
        let mut outcomes = 0;
        for j in 1..=2 {
            let mut views: [BTreeMap<Vec<String>, u64>; 2] = Default::default();
            for (slot, i) in [1usize, 2].into_iter().enumerate() {
                outcomes = 0;
                for key in &keys {
                    for r in &all_vectors {
                        for r_v in &all_vectors {
                            let coins = QueryCoins { key: key.clone(), r: to_fp(r), r_v: to_fp(r_v) };
                            let b = setup.queries_gen_with(i, &coins).unwrap();
                            let q = b.sigma(j);
                            let view = q
                                .f_part
                                .iter()
                                .chain(q.fv_part.iter().flatten())
                                .map(|e| e.value().to_string())
                                .collect();
                            *views[slot].entry(view).or_default() += 1;
                            outcomes += 1;
                        }
                    }
                }
            }
            ensure!(views[0] == views[1], "{scheme} server {j}: query multisets differ between i=1 and i=2");
        }
        summary.push(format!("{scheme}: {outcomes} outcomes"));
    }
    Ok(summary.join(", "))
}

fn spawn_pair(db: &Database, tamper_second: bool) -> (String, String) {
    let a = Server::bind("127.0.0.1:0", db.clone(), ServerConfig::default()).unwrap().spawn().unwrap();
    let cfg = ServerConfig { tamper: tamper_second, seed: 3, timeout: None };
    let b = Server::bind("127.0.0.1:0", db.clone(), cfg).unwrap().spawn().unwrap();
    (a.to_string(), b.to_string())
}

// 7. Table rates and measured wire costs.
fn rates_and_transcripts() -> Outcome {
    let toy = field(97u32, 2);
    ensure!(cost_row(SchemeId::Pi0, 8, &toy, None).unwrap().rate == rat(1, 2), "pi0 rate");
    for s in [SchemeId::Pi1, SchemeId::Pi2, SchemeId::AltA] {
        ensure!(cost_row(s, 8, &toy, None).unwrap().rate == rat(1, 4), "{s} rate");
    }
    let demo = field(demo_p(), 64);
    let group = setup_group(demo.p()).unwrap();
    let pi3 = cost_row(SchemeId::Pi3, 4, &demo, Some(&group)).unwrap();
    let (lp, lr) = (demo.p_bits(), group.r_bits());
    let formula = BigRational::new(BigInt::from(64 * lp), BigInt::from(2 * (64 * lp + lr)));
    ensure!(pi3.rate == formula, "pi3 rate {} != {formula}", pi3.rate);
    ensure!(pi3.rate_f64() >= 0.45, "pi3 rate {} below 0.45", pi3.rate_f64());

    let db = Database::random(demo.clone(), 4, &mut ChaCha20Rng::seed_from_u64(7)).unwrap();
    let (a1, a2) = spawn_pair(&db, false);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for scheme in SchemeId::ALL {
        let cfg = ClientConfig { addr1: a1.clone(), addr2: a2.clone(), scheme, i: 2, timeout: net::DEFAULT_TIMEOUT };
        let out = net::client_retrieve(&cfg, &mut rng).map_err(|e| e.to_string())?;
        ensure!(out.result == RetrievalResult::Value(db.get(2).unwrap().clone()), "{scheme} retrieval failed");
        for (measured, formula, what) in [
            (out.measured.download_bits, out.formula.download_bits, "download"),
            (out.measured.upload_bits, out.formula.upload_bits, "upload"),
        ] {
            let ratio = measured as f64 / formula as f64;
            ensure!(ratio >= 1.0, "{scheme} {what}: measured {measured} < formula {formula}");
            ensure!(ratio <= 1.10, "{scheme} {what}: ratio {ratio:.4} > 1.10");
            worst = worst.max(ratio);
        }
    }
    Ok(format!("pi3 demo rate {:.4} (r {lr} bits); worst measured/formula ratio {worst:.4}", pi3.rate_f64()))
}

// 8. Capacity sequence and limit.
fn capacity_formulas() -> Outcome {
    for m in 1..=64u32 {
        // (1/2) / (1 - 2^-m) = 2^(m-1) / (2^m - 1)
        let two_m = BigInt::one() << m;
        let expected = BigRational::new(&two_m >> 1u32, &two_m - 1);
        ensure!(capacity(1, 2, m as u64).unwrap() == expected, "m={m}");
    }
    let limit = asymptotic_capacity(1, 2).unwrap();
    ensure!(limit == rat(1, 2), "limit {limit}");
    let gap = capacity(1, 2, 64).unwrap() - &limit;
    let tol = BigRational::new(BigInt::one(), BigInt::one() << 60u32);
    ensure!(gap < tol, "gap {gap} at m=64");
    Ok(format!("m=1..64 exact; C_64 - 1/2 = {:.3e}", gap.to_f64().unwrap()))
}

// 9. Separate server processes driven by the command-line client.
struct ServerProc(Child);

impl Drop for ServerProc {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

const BIN: &str = env!("CARGO_BIN_EXE_vpir");

fn start_server(db: &Path, tamper: bool) -> (ServerProc, String) {
    let mut cmd = Command::new(BIN);
    cmd.args(["serve", "--db"]).arg(db).args(["--bind", "127.0.0.1:0", "--seed", "9"]);
    if tamper {
        cmd.arg("--tamper");
    }
    let mut child = cmd.stdout(Stdio::piped()).stderr(Stdio::null()).spawn().expect("spawn server");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("server banner").to_string();
    (ServerProc(child), addr)
}

fn retrieve_cli(scheme: &str, i: usize, a1: &str, a2: &str, seed: u64) -> (Option<i32>, String) {
    let out = Command::new(BIN)
        .args(["retrieve", "--scheme", scheme, "--i", &i.to_string(), "--addr1", a1, "--addr2", a2])
        .args(["--seed", &seed.to_string()])
        .env_remove("VPIR_SEED")
        .output()
        .expect("run client");
    (out.status.code(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.db");
    let status = Command::new(BIN)
        .args(["gen-db", "--preset", "small", "--m", "8", "--seed", "12", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    ensure!(status.success(), "gen-db failed");
    let db = dbfile::read(&path).map_err(|e| e.to_string())?;
    let (_s1, a1) = start_server(&path, false);
    let (_s2, a2) = start_server(&path, false);
    let (_s3, bad) = start_server(&path, true);

    for scheme in ["pi1", "pi3"] {
        let (code, stdout) = retrieve_cli(scheme, 3, &a1, &a2, 1);
        ensure!(code == Some(0), "{scheme} honest exit {code:?}");
        let first = stdout.lines().next().unwrap_or_default();
        ensure!(first == db.get(3).unwrap().to_string(), "{scheme} printed {first:?}");
    }
    let runs = 100;
    let rejected = (0..runs)
        .into_par_iter()
        .filter(|&k| {
            let (a, b) = if k % 2 == 0 { (&a1, &bad) } else { (&bad, &a1) };
            retrieve_cli("pi1", 1 + k as usize % 8, a, b, 100 + k).0 == Some(2)
        })
        .count();
    ensure!(rejected >= 95, "tampering detected in only {rejected}/{runs} runs");
    Ok(format!("honest pi1 and pi3 exit 0; tamper rejected (exit 2) in {rejected}/{runs} runs"))
}

// 10. Byte-exact frames at p = 5, t = 1, m = 2.
fn golden_vectors() -> Outcome {
    fn hex(s: &str) -> Vec<u8> {
        let s: String = s.split_whitespace().collect();
        (0..s.len()).step_by(2).map(|k| u8::from_str_radix(&s[k..k + 2], 16).unwrap()).collect()
    }
    // Database x = (3, 4); Pi1 coins v = 3, r = (1, 2), r_v = (4, 0), i = 1.
    // Server 1 at u = 1: f = (1+1, 2) = (2, 2), f_v = (3+4, 0) = (2, 0);
    // z = 2*3 + 2*4 = 4, w = 2*3 + 0*4 = 1 (mod 5).
    let fingerprint = "0ebe520ac65fe89db2ca93365aae52baff695151ad839a438ea4b537a28da1a7";
    let golden = [
        ("HELLO", hex("56504952 01 01 01 00000000")),
        ("HELLO alt", hex("56504952 01 01 0a 00000000")),
        ("HELLO_ACK", hex(&format!("56504952 01 02 01 0000002c 0001 05 0001 00 01 00000002 {fingerprint} 00"))),
        ("QUERY", hex("56504952 01 03 01 00000004 02 02 02 00")),
        ("ANSWER", hex("56504952 01 04 01 00000002 04 01")),
        // Code 0x02, "bad length".
        ("ERROR", hex("56504952 01 7f 01 0000000b 02 626164206c656e677468")),
    ];

    let f = field(5u32, 1);
    let db = dbfile::parse("vpir-db v1\np=5 t=1 m=2 irr=0,1\n3\n4\n").map_err(|e| e.to_string())?;
    let setup = ClientSetup::new(SchemeId::Pi1, f.clone(), 2, &mut ChaCha20Rng::seed_from_u64(0)).unwrap();
    let coins = QueryCoins {
        key: KeyCoins::Scalar(f.fp(3u32)),
        r: vec![f.fp(1u32), f.fp(2u32)],
        r_v: vec![f.fp(4u32), f.fp(0u32)],
    };
    let bundle = setup.queries_gen_with(1, &coins).unwrap();
    let answer = answer_gen(SchemeId::Pi1, 1, &bundle.sigma1, &db, &bundle.aux_a).unwrap();
    let session = SessionParams {
        field: (*f).clone(),
        m: 2,
        fingerprint: dbfile::fingerprint(&db),
        aux: None,
    };
    let built = [
        Frame::new(MsgType::Hello, SchemeId::Pi1, vec![]),
        Frame::new(MsgType::Hello, SchemeId::AltA, vec![]),
        Frame::new(MsgType::HelloAck, SchemeId::Pi1, session.encode()),
        Frame::new(MsgType::Query, SchemeId::Pi1, encode_query(&f, &bundle.sigma1)),
        Frame::new(MsgType::Answer, SchemeId::Pi1, encode_answer(&f, None, &answer).unwrap()),
        Frame::error(0x01, 0x02, "bad length"),
    ];
    for ((name, bytes), frame) in golden.iter().zip(&built) {
        let decoded = Frame::decode(bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure!(decoded.encode() == *bytes, "{name}: re-encoding differs");
        ensure!(&decoded == frame, "{name}: API frame differs from golden bytes");
    }
    ensure!(SessionParams::decode(&built[2].payload).unwrap() == session, "HELLO_ACK payload round trip");
    ensure!(built[5].error_parts().unwrap() == (2, "bad length".to_string()), "ERROR payload");
    Ok(format!("{} frames byte-exact", golden.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("correctness", correctness),
        ("pi1 exact bound", pi1_exact_bound),
        ("alt exact bound", alt_exact_bound),
        ("monte-carlo vs exact", monte_carlo_agreement),
        ("pi2/pi3 soundness smoke", dlog_smoke),
        ("privacy enumeration", privacy),
        ("rates and transcripts", rates_and_transcripts),
        ("capacity", capacity_formulas),
        ("end-to-end network", end_to_end),
        ("wire golden vectors", golden_vectors),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2}s): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2}s): {detail}", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
