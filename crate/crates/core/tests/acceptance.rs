//! Acceptance suite. Every test prints one `PASS` or `FAIL` line to stderr,
//! bypassing the test harness capture so the lines show up in plain
//! `cargo test` output.

use std::io::Write;
use std::thread;

use rand::Rng;
use upad::adversary::{self, EveView, StolenMessage};
use upad::bits::{self, BitString, PositionKey, SharedKey};
use upad::harness::{self, ExperimentConfig, Z_99};
use upad::protocol::{
    self, ExtractedKey, KeyId, KeyKind, Material, Purpose, Record, RecordKind, System, SystemOneSession,
    Transcript, UsageLedger,
};
use upad::transport::{self, Broadcast, MemoryChannel, TcpBroadcaster, TcpSubscriber};
use upad::{seeded_rng, Error};

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {id}] {status} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn bs(s: &str) -> BitString {
    s.parse().unwrap()
}

#[test]
fn c1_worked_example_reproduction() {
    let key: SharedKey = "01110101000101".parse().unwrap();
    let (r, p) = bits::derive_position_keys(&key);
    let mut failures = Vec::new();
    if r.positions() != [2, 3, 4, 6, 8, 12, 14] {
        failures.push(format!("K^r = {r}"));
    }
    if p.positions() != [1, 5, 7, 9, 10, 11, 13] {
        failures.push(format!("K^p = {p}"));
    }

    // (label, sequence, r-key, p-key)
    let table = [
        ("S_1", "01011101010010", "1011100", "0100101"),
        ("S_2", "11001110100001", "1001001", "1111000"),
        ("S_3", "10100101011010", "0101100", "1000111"),
        ("S_4", "11001101101001", "1001101", "1101010"),
        ("S_i", "01110010100110", "1110010", "0011001"),
    ];
    let mut session = SystemOneSession::new(key);
    for (label, seq, want_r, want_p) in table {
        let (kr, kp) = session.step(&bs(seq)).unwrap();
        if kr.bits != bs(want_r) || kp.bits != bs(want_p) {
            failures.push(format!("{label}: got {} {}", kr.bits, kp.bits));
        }
    }
    let detail = if failures.is_empty() {
        "position keys and 10 extracted keys bit-exact".to_string()
    } else {
        failures.join("; ")
    };
    verdict(1, "worked example reproduction", failures.is_empty(), &detail);
}

#[test]
fn c2_otp_round_trip() {
    let mut rng = seeded_rng(2);
    let mut failures = 0u64;
    let mut total = 0u64;
    for n in [1usize, 7, 64] {
        let mut sender = UsageLedger::new();
        let mut receiver = UsageLedger::new();
        for i in 0..10_000u32 {
            let key = ExtractedKey {
                id: KeyId::new(System::One, i + 1, KeyKind::ExtractedR),
                bits: bits::random_bits(n, &mut rng),
            };
            let message = bits::random_bits(n, &mut rng);
            let cipher = protocol::encrypt(&key, &message, &mut sender).unwrap();
            let back = protocol::decrypt(&key, &cipher, &mut receiver).unwrap();
            failures += u64::from(back != message);
            total += 1;
        }
    }
    verdict(2, "OTP round trip", failures == 0, &format!("{total} pairs, {failures} failures"));
}

#[test]
fn c3_system_two_agreement() {
    let mut rng = seeded_rng(3);
    let shared = bits::random_balanced_bits(7, &mut rng).unwrap();
    let mut run = protocol::run_system_two(&shared, 100, false, &mut rng).unwrap();
    let mut problems = Vec::new();

    if run.a.final_keys() != run.b.final_keys() || run.a.final_keys().len() != 100 {
        problems.push("final key lists differ".to_string());
    }
    let replayed = protocol::replay_system_two(&shared, &run.transcript).unwrap();
    if replayed.final_keys() != run.a.final_keys() {
        problems.push("replayed B differs".to_string());
    }

    for party in [&run.a, &run.b] {
        for step in 1..=100 {
            if !matches!(party.attached_key(step), Err(Error::DestroyedMaterial(_)))
                || !matches!(party.fresh_key(step), Err(Error::DestroyedMaterial(_)))
            {
                problems.push(format!("step {step} scratch still readable"));
            }
        }
        let leftover = party
            .held_material()
            .into_iter()
            .any(|m| matches!(m, Material::AttachedKey(_) | Material::FreshKey(_)));
        if leftover {
            problems.push("intermediate material still held".to_string());
        }
    }

    let mut rejected = 0;
    let mut attempts = 0;
    for step in 1..=100 {
        // k_i was spent carrying X_i; X_i was spent deriving the final keys.
        for (kind, purpose) in [(KeyKind::Attached, Purpose::Encryption), (KeyKind::Fresh, Purpose::KeyGeneration)] {
            attempts += 1;
            let id = KeyId::new(System::Two, step, kind);
            if matches!(run.a.ledger_mut().record(id, purpose), Err(Error::OneTimeViolation(_))) {
                rejected += 1;
            }
        }
        let pair = run.a.final_keys()[step as usize - 1].clone();
        let message = bits::random_bits(7, &mut rng);
        protocol::encrypt(&pair.r, &message, run.a.ledger_mut()).unwrap();
        attempts += 2;
        if matches!(protocol::encrypt(&pair.r, &message, run.a.ledger_mut()), Err(Error::OneTimeViolation(_))) {
            rejected += 1;
        }
        if matches!(protocol::authenticate(&pair.r, run.a.ledger_mut()), Err(Error::OneTimeViolation(_))) {
            rejected += 1;
        }
    }
    if rejected != attempts {
        problems.push(format!("{} reuse attempts accepted", attempts - rejected));
    }

    let ok = problems.is_empty();
    let detail = if ok {
        format!("100 steps agree, scratch destroyed, {rejected}/{attempts} reuse attempts rejected")
    } else {
        problems.join("; ")
    };
    verdict(3, "A/B agreement", ok, &detail);
}

#[test]
fn c4_accidental_match_rate() {
    let mut lines = Vec::new();
    let mut ok = true;
    for leaks in [1u32, 2, 3, 5, 8] {
        let report = harness::accidental_match_experiment(7, leaks, 100_000, 40 + u64::from(leaks)).unwrap();
        let expected = 1.0 / f64::from(1u32 << leaks);
        ok &= (report.expected - expected).abs() < 1e-15 && report.within_sigmas(3.0);
        lines.push(format!("N={leaks} rate={:.6} expected={expected:.6}", report.rate));
    }
    verdict(4, "accidental match 2^-N", ok, &lines.join(", "));
}

/// Direct count of `falling(M, n) * (M - n)^n / M^(2n)` with `M = 2^N`: the
/// true columns must be pairwise distinct and every wrong column must avoid
/// all of them.
fn closed_form(n: u32, leaks: u32) -> f64 {
    let m = f64::from(1u32 << leaks);
    let n_f = f64::from(n);
    let falling: f64 = (0..n).map(|k| m - f64::from(k)).product();
    (falling * (m - n_f).max(0.0).powi(n as i32)) / m.powi(2 * n as i32)
}

#[test]
fn c5_oracle_agreement() {
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, leaks) in [(1usize, 1u32), (1, 2), (2, 1), (2, 2), (2, 3)] {
        let exact = harness::exact_attack_probability(n, leaks).unwrap();
        ok &= (exact - closed_form(n as u32, leaks)).abs() < 1e-12;
        let config = ExperimentConfig::new(n, leaks, 100_000, 500 + 10 * n as u64 + u64::from(leaks));
        let report = harness::run_attack_experiment(&config).unwrap();
        let (lo, hi) = harness::wilson_interval(report.successes, config.trials, Z_99);
        let inside = lo <= exact && exact <= hi;
        ok &= inside;
        lines.push(format!(
            "(n={n},N={leaks}) measured={:.5} exact={exact:.5} ci=[{lo:.5},{hi:.5}]",
            report.measured_rate
        ));
    }
    verdict(5, "oracle agreement", ok, &lines.join(", "));
}

#[test]
fn c6_formula_sweep() {
    let configs: Vec<_> = (0..=20).map(|leaks| ExperimentConfig::new(7, leaks, 10_000, 600)).collect();
    let csv = harness::sweep(&configs).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(harness::CSV_HEADER));
    let rows: Vec<(f64, f64)> = lines
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            (cols[3].parse().unwrap(), cols[6].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 21);

    let trials = 10_000f64;
    let sd = |p: f64| (p * (1.0 - p) / trials).sqrt();
    let zero_at_start = rows[0].0 == 0.0;
    let monotone = rows.windows(2).all(|w| {
        let (a, b) = (w[0].0, w[1].0);
        b >= a - 3.0 * (sd(a).powi(2) + sd(b).powi(2)).sqrt()
    });
    let (last_measured, last_formula) = rows[20];
    let ok = zero_at_start && monotone && last_measured >= 0.999 && last_formula >= 0.999;

    let side_by_side: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(leaks, _)| matches!(leaks, 0 | 1 | 3 | 5 | 8 | 12 | 20))
        .map(|(leaks, (m, f))| format!("N={leaks} {m:.4}/{f:.4}"))
        .collect();
    verdict(
        6,
        "formula sweep (measured/formula)",
        ok,
        &format!("{}; monotone={monotone}", side_by_side.join(", ")),
    );
}

#[test]
fn c7_message_stealing_equivalence() {
    let mut mismatches = 0;
    for seed in 0..100u64 {
        let mut rng = seeded_rng(7_000 + seed);
        let n = rng.random_range(1..=12);
        let steps = rng.random_range(1..=16);
        let shared = bits::random_balanced_bits(n, &mut rng).unwrap();
        let run = protocol::run_system_one(&shared, steps, protocol::KeyUse::Encrypt, &mut rng).unwrap();
        let view = EveView::from_transcript(&run.transcript, RecordKind::Seq).unwrap();

        let stolen: Vec<StolenMessage> = run
            .transcript
            .of_kind(RecordKind::Ciphertext)
            .zip(&run.messages)
            .map(|(c, m)| StolenMessage { step: c.step, ciphertext: c.payload.clone(), message: m.clone() })
            .collect();
        let by_stealing = adversary::message_steal_attack(&view, &stolen).unwrap();

        let leaked = run.a.r_set().iter().map(|k| (k.id.step, k.bits.clone())).collect();
        let direct = adversary::correlation_attack(&view.with_leaked_keys(leaked).unwrap()).unwrap();
        mismatches += usize::from(by_stealing != direct);
    }
    verdict(7, "message-stealing equivalence", mismatches == 0, &format!("100 sessions, {mismatches} mismatches"));
}

#[test]
fn c8_system_two_single_use() {
    let n = 7usize;
    let trials = 10_000u64;
    let (candidate_total, full) = (0..trials)
        .map(|t| {
            let mut rng = harness::trial_rng(800, t);
            let shared = bits::random_balanced_bits(n, &mut rng).unwrap();
            let run = protocol::run_system_two(&shared, 1, true, &mut rng).unwrap();
            let view = EveView::from_transcript(&run.transcript, RecordKind::SeqStar).unwrap();
            let result = adversary::correlation_attack(&view).unwrap();
            let total: usize = result.candidate_counts().iter().sum();
            // Score against the position keys of the one-time fresh key,
            // rebuilt from the public cipher key and the attached key.
            let seq = run.transcript.of_kind(RecordKind::Seq).next().unwrap();
            let cipher = run.transcript.of_kind(RecordKind::CipherKey).next().unwrap();
            let (r, p) = bits::derive_position_keys(&shared);
            let attached = bits::concat(
                &bits::extract(&r, &seq.payload).unwrap(),
                &bits::extract(&p, &seq.payload).unwrap(),
            );
            let fresh = SharedKey::new(bits::xor(&attached, &cipher.payload).unwrap()).unwrap();
            let (fresh_r, _): (PositionKey, PositionKey) = bits::derive_position_keys(&fresh);
            (total as u64, u64::from(result.score(&fresh_r).full_recovery))
        })
        .fold((0u64, 0u64), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let mean = candidate_total as f64 / (trials as f64 * n as f64);
    let ok = (n as f64..=n as f64 + 1.0).contains(&mean) && full == 0;
    verdict(
        8,
        "System-II single use",
        ok,
        &format!("mean candidate set size {mean:.4} (n={n}), full recovery {full}/{trials}"),
    );
}

fn transcript_bytes(transcript: &Transcript) -> Vec<u8> {
    transcript.iter().flat_map(|r| transport::encode_frame(r).unwrap()).collect()
}

fn seeded_session(seed: u64) -> Transcript {
    let mut rng = seeded_rng(seed);
    let shared = bits::random_balanced_bits(7, &mut rng).unwrap();
    protocol::run_system_two(&shared, 200, true, &mut rng).unwrap().transcript
}

#[test]
fn c9_wire_round_trip() {
    let mut problems = Vec::new();

    let mut rng = seeded_rng(9);
    let mut bad_frames = 0;
    for _ in 0..10_000 {
        let kind = RecordKind::ALL[rng.random_range(0..RecordKind::ALL.len())];
        let len = rng.random_range(1..=512);
        let record = Record::new(rng.random(), kind, bits::random_bits(len, &mut rng));
        let bytes = transport::encode_frame(&record).unwrap();
        match transport::decode_frame(&bytes) {
            Ok((back, used)) if back == record && used == bytes.len() => {}
            _ => bad_frames += 1,
        }
    }
    if bad_frames > 0 {
        problems.push(format!("{bad_frames} frames failed to round trip"));
    }

    // Hand packing of 0101 1101 | 0100 10(00).
    let s1 = Record::new(1, RecordKind::Seq, bs("01011101010010"));
    let frame = transport::encode_frame(&s1).unwrap();
    let hand = [0b0101_1101u8, 0b0100_1000];
    if frame[10..14] != 14u32.to_be_bytes() || frame[14..] != hand || hand != [0x5D, 0x48] {
        problems.push(format!("S_1 frame {frame:02X?}"));
    }

    let sent = seeded_session(99);
    let mut memory = MemoryChannel::new();
    let mut mem_sub = memory.subscribe();
    transport::broadcast_transcript(&mut memory, &sent).unwrap();
    memory.close().unwrap();
    let via_memory = transport::collect_transcript(&mut mem_sub).unwrap();

    let again = seeded_session(99);
    let mut server = TcpBroadcaster::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let client = thread::spawn(move || {
        let mut sub = TcpSubscriber::connect(addr).unwrap();
        transport::collect_transcript(&mut sub).unwrap()
    });
    server.accept_subscribers(1).unwrap();
    transport::broadcast_transcript(&mut server, &again).unwrap();
    server.close().unwrap();
    let via_socket = client.join().unwrap();

    let reference = transcript_bytes(&sent);
    if transcript_bytes(&via_memory) != reference || transcript_bytes(&via_socket) != reference {
        problems.push("memory and socket transcripts differ".to_string());
    }

    let ok = problems.is_empty();
    let detail = if ok {
        format!(
            "10000 frames round trip, S_1 packs to 5D 48, {} frames identical over memory and socket",
            sent.len()
        )
    } else {
        problems.join("; ")
    };
    verdict(9, "wire round trip", ok, &detail);
}
