//! Command line front end for the signature tools.
//!
//! Every subcommand reads its inputs from positional arguments, writes its
//! result to stdout and keeps diagnostics on stderr. Exit codes: 0 for a
//! successful computation (including a produced certificate), 1 when the two
//! signatures are isomorphic and no certificate exists, 2 for unusable input,
//! and 3 when a configured search cap or size limit was hit.
//!
//! With `--json` the result is a single line of JSON with alphabetically
//! sorted keys, so re-serializing a parsed output reproduces it byte for
//! byte. Quantities that can exceed 64 bits (orders, ranks, counts) are
//! emitted as decimal strings.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fuchsian::abelianization::abelianize;
use fuchsian::arith::{decimal_approx, FactoredInteger};
use fuchsian::distinguisher::{
    distinguish_capped, verify_certificate, BaseGroup, QuotientCertificate, VerificationReport,
    DEFAULT_PRIME_SCAN_CAP,
};
use fuchsian::finite_groups::{
    count_homomorphisms, find_epimorphism, ConcreteGroup, GeneratorImages, GroupElement,
};
use fuchsian::scrape_matrices::matrix_report;
use fuchsian::scrapes::{closure, find_good_distinguishing_scrape, scrape};
use fuchsian::signatures::Signature;
use fuchsian::smooth_reps::{find_q, kernel_signature, macbeath_admits};
use fuchsian::Error;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(
    name = "fuchsian",
    version,
    about = "Distinguish finitely generated Fuchsian groups by finite quotients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide isomorphism of two signatures; if they differ, build and
    /// print a certificate quotient that only the winner surjects onto.
    Distinguish {
        /// Left signature, e.g. "(0;0;3,4,7)".
        left: String,
        /// Right signature.
        right: String,
        /// Emit the certificate as JSON.
        #[arg(long)]
        json: bool,
        /// Re-check the produced certificate and print the check results.
        #[arg(long)]
        verify: bool,
        /// Cap for prime power scans.
        #[arg(long, value_name = "N")]
        max_prime_scan: Option<u64>,
    },
    /// Print the abelianization of a signature group.
    Abelianize {
        signature: String,
        #[arg(long)]
        json: bool,
    },
    /// Print the s-scrape of a cone multiset.
    Scrape {
        /// Comma separated cone orders, e.g. "15,42,63".
        multiset: String,
        /// Scrape scale.
        #[arg(long = "s", value_name = "INT")]
        scale: u64,
        #[arg(long)]
        json: bool,
    },
    /// Print the closure of a factor inside its parent multiset.
    Closure {
        /// Comma separated factor entries.
        factor: String,
        /// Comma separated parent multiset; entry i must be divided by
        /// factor entry i.
        #[arg(long)]
        parent: String,
        #[arg(long)]
        json: bool,
    },
    /// Search scrape scales for one whose closures separate two cone
    /// multisets, and print the accepted scale with both closures.
    FindScrape {
        /// Left cone multiset; "-" for empty.
        left: String,
        /// Right cone multiset.
        right: String,
        #[arg(long)]
        json: bool,
    },
    /// Print ranks and pivot structure of the divisor matrices at a modulus.
    MatrixCheck {
        modulus: u64,
        #[arg(long)]
        json: bool,
    },
    /// Search for an epimorphism from a signature group onto a small group.
    Epis {
        signature: String,
        /// Group descriptor: trivial, cyclic:<n>, dihedral:<2n>, psl2:<q>,
        /// or alt4.
        group: String,
        /// Required image orders for the cone generators, aligned with the
        /// signature's sorted cone list.
        #[arg(long, value_name = "C1,..,CK")]
        profile: Option<String>,
        /// Count surjections instead of printing one witness.
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        json: bool,
    },
    /// Test whether a projective group admits a smooth representation of a
    /// cone multiset by the divisibility criterion.
    Macbeath {
        /// Comma separated cone orders (at least three).
        multiset: String,
        /// Odd prime power field size.
        q: u64,
        #[arg(long)]
        json: bool,
    },
    /// Find the smallest admissible odd prime power field size realizing a
    /// factor of a signature's cone multiset.
    FindQ {
        /// Signature whose cone orders drive the search.
        signature: String,
        /// Use the s-scrape of the cones as the factor instead of the
        /// cones themselves.
        #[arg(long, value_name = "S")]
        scrape: Option<u64>,
        /// Cap for the prime power scan.
        #[arg(long, value_name = "N")]
        max_prime_scan: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Print the signature of the kernel of a smooth epimorphism, given the
    /// image order and the generator image orders.
    Kernel {
        signature: String,
        /// Order of the image group.
        order: u128,
        /// Image orders of the standard generators: puncture generators
        /// first, then cone generators.
        orders: String,
        #[arg(long)]
        json: bool,
    },
}

/// A diagnostic plus the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Isomorphic => 1,
            Error::ScanCapExceeded { .. }
            | Error::GroupTooLarge { .. }
            | Error::EnumerationTooLarge { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Distinguish { left, right, json, verify, max_prime_scan } => {
            cmd_distinguish(&left, &right, json, verify, max_prime_scan)
        }
        Command::Abelianize { signature, json } => cmd_abelianize(&signature, json),
        Command::Scrape { multiset, scale, json } => cmd_scrape(&multiset, scale, json),
        Command::Closure { factor, parent, json } => cmd_closure(&factor, &parent, json),
        Command::FindScrape { left, right, json } => cmd_find_scrape(&left, &right, json),
        Command::MatrixCheck { modulus, json } => cmd_matrix_check(modulus, json),
        Command::Epis { signature, group, profile, count_only, json } => {
            cmd_epis(&signature, &group, profile.as_deref(), count_only, json)
        }
        Command::Macbeath { multiset, q, json } => cmd_macbeath(&multiset, q, json),
        Command::FindQ { signature, scrape, max_prime_scan, json } => {
            cmd_find_q(&signature, scrape, max_prime_scan, json)
        }
        Command::Kernel { signature, order, orders, json } => {
            cmd_kernel(&signature, order, &orders, json)
        }
    }
}

/// Parses a comma separated multiset of positive integers; "-" is empty.
fn parse_multiset(input: &str) -> Result<Vec<u64>, Failure> {
    let trimmed = input.trim();
    if trimmed == "-" || trimmed.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for part in trimmed.split(',') {
        let offset = part.as_ptr() as usize - input.as_ptr() as usize;
        match part.trim().parse::<u64>() {
            Ok(v) if v > 0 => out.push(v),
            _ => {
                return Err(Failure::usage(format!(
                    "cannot parse multiset: expected a positive integer at byte {offset}, got {:?}",
                    part.trim()
                )))
            }
        }
    }
    Ok(out)
}

fn parse_signature(input: &str) -> Result<Signature, Failure> {
    input.parse::<Signature>().map_err(Failure::from)
}

fn join(values: &[u64]) -> String {
    if values.is_empty() {
        return "-".into();
    }
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    parts.join(",")
}

fn multiset_value(values: &[u64]) -> Value {
    Value::Array(values.iter().map(|&v| json!(v)).collect())
}

/// Factored integer as a JSON map from prime to decimal exponent string.
fn factored_value(f: &FactoredInteger) -> Value {
    let mut map = Map::new();
    for (p, e) in f {
        map.insert(p.to_string(), Value::String(e.to_string()));
    }
    Value::Object(map)
}

fn factored_text(f: &FactoredInteger) -> String {
    if f.is_empty() {
        return "1".into();
    }
    let parts: Vec<String> = f
        .iter()
        .map(|(p, e)| if *e == 1 { p.to_string() } else { format!("{p}^{e}") })
        .collect();
    parts.join(" * ")
}

fn emit(value: &Value) {
    println!("{value}");
}

fn base_group_value(base: &BaseGroup) -> Value {
    let mut map = Map::new();
    map.insert("kind".into(), json!(base.kind()));
    map.insert("order".into(), Value::String(base.order().to_string()));
    map.insert(
        "q_or_n".into(),
        match base.parameter() {
            Some(v) => json!(v),
            None => Value::Null,
        },
    );
    if let BaseGroup::Abelian { orders } = base {
        map.insert("invariants".into(), multiset_value(orders));
    }
    Value::Object(map)
}

fn verification_value(report: &VerificationReport) -> Value {
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "detail": c.detail,
                "name": c.name,
                "passed": c.passed,
            })
        })
        .collect();
    json!({ "checks": checks, "ok": report.ok })
}

fn certificate_value(
    cert: &QuotientCertificate,
    bound_power: u64,
    verification: Option<&VerificationReport>,
) -> Value {
    let mut root = Map::new();
    root.insert("winner".into(), json!(cert.winner.label()));
    root.insert("branch_trace".into(), json!(cert.trace));
    root.insert("base_group".into(), base_group_value(&cert.base_group));
    root.insert("smooth_factor".into(), multiset_value(&cert.smooth_factor));
    root.insert(
        "loser_max_factor".into(),
        match &cert.loser_max_factor {
            Some(d) => multiset_value(d),
            None => Value::Null,
        },
    );
    root.insert("a".into(), json!(cert.extension_exponent));
    root.insert("f".into(), Value::String(cert.extension_rank.to_string()));
    root.insert(
        "order".into(),
        json!({
            "decimal_approx": decimal_approx(&cert.order),
            "factored": factored_value(&cert.order),
        }),
    );
    root.insert(
        "bound".into(),
        json!({
            "base": cert.bound.base,
            "exponent_factored": {
                "constant": 15,
                "power": bound_power,
                "power_base": cert.bound.base - 1,
            },
            "satisfied": cert.bound.satisfied,
        }),
    );
    if let Some(report) = verification {
        root.insert("verification".into(), verification_value(report));
    }
    Value::Object(root)
}

fn cmd_distinguish(
    left: &str,
    right: &str,
    json: bool,
    verify: bool,
    max_prime_scan: Option<u64>,
) -> Result<ExitCode, Failure> {
    let l = parse_signature(left)?;
    let r = parse_signature(right)?;
    let cap = max_prime_scan.unwrap_or(DEFAULT_PRIME_SCAN_CAP);
    let cert = match distinguish_capped(&l, &r, cap) {
        Ok(cert) => cert,
        Err(Error::Isomorphic) => {
            if json {
                emit(&json!({ "isomorphic": true }));
            } else {
                println!("isomorphic: no distinguishing finite quotient exists");
            }
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    // 15(b + k) for b the larger free rank and k the larger cone count.
    let b = abelianize(&l).free_rank().max(abelianize(&r).free_rank());
    let k = l.cones().len().max(r.cones().len()) as u64;
    let bound_power = 15 * (b + k);
    let verification = if verify {
        Some(verify_certificate(&cert, &l, &r)?)
    } else {
        None
    };
    if json {
        emit(&certificate_value(&cert, bound_power, verification.as_ref()));
    } else {
        println!("winner: {}", cert.winner.label());
        println!("trace: {}", cert.trace.join(" > "));
        println!("base group: {} (order {})", cert.base_group, cert.base_group.order());
        println!("smooth factor: {}", join(&cert.smooth_factor));
        match &cert.loser_max_factor {
            Some(d) => println!("loser max factor: {}", join(d)),
            None => println!("loser max factor: none (loser has no quotient onto the base)"),
        }
        println!("extension exponent a: {}", cert.extension_exponent);
        println!("extension rank f: {}", cert.extension_rank);
        println!(
            "order: {} (about {})",
            factored_text(&cert.order),
            decimal_approx(&cert.order)
        );
        let base = cert.bound.base;
        println!(
            "bound: {base}^(15 + {}^{bound_power}); satisfied: {}",
            base - 1,
            cert.bound.satisfied
        );
        if let Some(report) = &verification {
            for check in &report.checks {
                let verdict = if check.passed { "pass" } else { "FAIL" };
                println!("check {}: {} ({})", check.name, verdict, check.detail);
            }
            println!("verification: {}", if report.ok { "ok" } else { "FAILED" });
        }
    }
    if let Some(report) = &verification {
        if !report.ok {
            return Err(Failure::usage("certificate verification failed"));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_abelianize(signature: &str, json: bool) -> Result<ExitCode, Failure> {
    let sig = parse_signature(signature)?;
    let ab = abelianize(&sig);
    let torsion = ab.torsion();
    if json {
        emit(&json!({
            "free_rank": ab.free_rank(),
            "torsion": multiset_value(&torsion),
        }));
    } else {
        println!("free rank: {}", ab.free_rank());
        if torsion.is_empty() {
            println!("torsion: none");
        } else {
            println!("torsion: {}", join(&torsion));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scrape(multiset: &str, scale: u64, json: bool) -> Result<ExitCode, Failure> {
    let m = parse_multiset(multiset)?;
    let scraped = scrape(&m, scale)?;
    if json {
        emit(&json!({ "scrape": multiset_value(&scraped) }));
    } else {
        println!("{}", join(&scraped));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_closure(factor: &str, parent: &str, json: bool) -> Result<ExitCode, Failure> {
    let c = parse_multiset(factor)?;
    let m = parse_multiset(parent)?;
    let closed = closure(&c, &m)?;
    if json {
        emit(&json!({ "closure": multiset_value(&closed) }));
    } else {
        println!("{}", join(&closed));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_find_scrape(left: &str, right: &str, json: bool) -> Result<ExitCode, Failure> {
    let m = parse_multiset(left)?;
    let n = parse_multiset(right)?;
    // The search needs aligned lengths; pad with 1s, which stay 1 through
    // the coscrape and its closure, then cut each report back to its own
    // original length.
    let mut ml = m.clone();
    let mut nl = n.clone();
    while ml.len() < nl.len() {
        ml.push(1);
    }
    while nl.len() < ml.len() {
        nl.push(1);
    }
    let found = find_good_distinguishing_scrape(&ml, &nl)?;
    let (winner_len, loser_len) = if found.winner_is_left {
        (m.len(), n.len())
    } else {
        (n.len(), m.len())
    };
    let winner_coscrape = &found.winner_coscrape[..winner_len];
    let winner_closure = &found.winner_closure[..winner_len];
    let loser_coscrape = &found.loser_coscrape[..loser_len];
    let loser_closure = &found.loser_closure[..loser_len];
    let winner = if found.winner_is_left { "left" } else { "right" };
    if json {
        emit(&json!({
            "clause": found.clause,
            "loser_closure": multiset_value(loser_closure),
            "loser_coscrape": multiset_value(loser_coscrape),
            "t": found.t,
            "winner": winner,
            "winner_closure": multiset_value(winner_closure),
            "winner_coscrape": multiset_value(winner_coscrape),
        }));
    } else {
        println!("t: {}", found.t);
        println!("clause: {}", found.clause);
        println!("winner: {winner}");
        println!("winner coscrape: {}", join(winner_coscrape));
        println!("winner closure: {}", join(winner_closure));
        println!("loser coscrape: {}", join(loser_coscrape));
        println!("loser closure: {}", join(loser_closure));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_matrix_check(modulus: u64, json: bool) -> Result<ExitCode, Failure> {
    if modulus == 0 {
        return Err(Failure::usage("the modulus must be positive"));
    }
    let report = matrix_report(modulus);
    if json {
        emit(&json!({
            "divisor_count": report.divisor_count,
            "modulus": report.modulus,
            "pivotless_columns": multiset_value(&report.pivotless_columns),
            "rank_e": report.rank_e,
            "rank_f": report.rank_f,
            "rank_f_patched": report.rank_f_patched,
            "x_routes_agree": report.x_routes_agree,
            "x_triangular_under_pivot": report.x_triangular_under_pivot,
            "y_routes_agree": report.y_routes_agree,
        }));
    } else {
        println!("modulus: {}", report.modulus);
        println!("divisor count: {}", report.divisor_count);
        println!("rank E: {}", report.rank_e);
        println!("rank F: {}", report.rank_f);
        println!("rank F patched: {}", report.rank_f_patched);
        println!("pivotless columns: {}", join(&report.pivotless_columns));
        println!("X routes agree: {}", report.x_routes_agree);
        println!("Y routes agree: {}", report.y_routes_agree);
        println!("X triangular under pivot: {}", report.x_triangular_under_pivot);
    }
    Ok(ExitCode::SUCCESS)
}

/// One group element in a short printable form.
fn render_element(e: &GroupElement) -> String {
    match e {
        GroupElement::Trivial => "e".into(),
        GroupElement::Cyclic(r) => r.to_string(),
        GroupElement::Dihedral { rotation, reflected } => match (rotation, reflected) {
            (0, false) => "e".into(),
            (0, true) => "s".into(),
            (r, false) => format!("r^{r}"),
            (r, true) => format!("r^{r} s"),
        },
        GroupElement::Psl2([a, b, c, d]) => format!("[[{a},{b}],[{c},{d}]]"),
        GroupElement::Perm4(images) => {
            // Cycle notation over {0,1,2,3}.
            let mut seen = [false; 4];
            let mut out = String::new();
            for start in 0..4usize {
                if seen[start] || images[start] as usize == start {
                    seen[start] = true;
                    continue;
                }
                out.push('(');
                let mut i = start;
                loop {
                    seen[i] = true;
                    out.push_str(&i.to_string());
                    i = images[i] as usize;
                    if i == start {
                        break;
                    }
                    out.push(' ');
                }
                out.push(')');
            }
            if out.is_empty() {
                "id".into()
            } else {
                out
            }
        }
    }
}

fn witness_value(images: &GeneratorImages) -> Value {
    let handles: Vec<Value> = images
        .handles
        .iter()
        .map(|(a, b)| json!([render_element(a), render_element(b)]))
        .collect();
    let elliptic: Vec<Value> =
        images.elliptic.iter().map(|e| json!(render_element(e))).collect();
    let parabolic: Vec<Value> =
        images.parabolic.iter().map(|e| json!(render_element(e))).collect();
    json!({ "elliptic": elliptic, "handles": handles, "parabolic": parabolic })
}

fn cmd_epis(
    signature: &str,
    group: &str,
    profile: Option<&str>,
    count_only: bool,
    json: bool,
) -> Result<ExitCode, Failure> {
    let sig = parse_signature(signature)?;
    let group = ConcreteGroup::parse(group)?;
    let profile = profile.map(parse_multiset).transpose()?;
    if count_only {
        let count = count_homomorphisms(&sig, &group, profile.as_deref(), true)?;
        if json {
            emit(&json!({ "count": count.to_string() }));
        } else {
            println!("epimorphisms: {count}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    match find_epimorphism(&sig, &group, profile.as_deref())? {
        Some(images) => {
            if json {
                emit(&json!({ "found": true, "witness": witness_value(&images) }));
            } else {
                println!("epimorphism found");
                for (i, (a, b)) in images.handles.iter().enumerate() {
                    println!(
                        "handle {}: a = {}, b = {}",
                        i + 1,
                        render_element(a),
                        render_element(b)
                    );
                }
                for (i, e) in images.parabolic.iter().enumerate() {
                    println!("puncture {}: {}", i + 1, render_element(e));
                }
                for (i, e) in images.elliptic.iter().enumerate() {
                    println!("cone {}: {}", i + 1, render_element(e));
                }
            }
        }
        None => {
            if json {
                emit(&json!({ "found": false }));
            } else {
                println!("no epimorphism");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_macbeath(multiset: &str, q: u64, json: bool) -> Result<ExitCode, Failure> {
    let m = parse_multiset(multiset)?;
    let admits = macbeath_admits(&m, q)?;
    if json {
        emit(&json!({ "admits": admits, "q": q }));
    } else {
        println!("admits: {admits}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_find_q(
    signature: &str,
    scrape_scale: Option<u64>,
    max_prime_scan: Option<u64>,
    json: bool,
) -> Result<ExitCode, Failure> {
    let sig = parse_signature(signature)?;
    let cones = sig.cones().to_vec();
    if cones.is_empty() {
        return Err(Failure::usage("the signature has no cone points to realize"));
    }
    let x = match scrape_scale {
        Some(s) => scrape(&cones, s)?,
        None => cones.clone(),
    };
    let cap = max_prime_scan.unwrap_or(DEFAULT_PRIME_SCAN_CAP);
    let q = find_q(&x, &cones, cap)?;
    if json {
        emit(&json!({ "factor": multiset_value(&x), "q": q }));
    } else {
        println!("q = {q}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_kernel(
    signature: &str,
    order: u128,
    orders: &str,
    json: bool,
) -> Result<ExitCode, Failure> {
    let sig = parse_signature(signature)?;
    let all = parse_multiset(orders)?;
    let punctures = sig.punctures() as usize;
    let expected = punctures + sig.cones().len();
    if all.len() != expected {
        return Err(Failure::usage(format!(
            "expected {expected} generator orders ({punctures} puncture, {} cone), got {}",
            sig.cones().len(),
            all.len()
        )));
    }
    let (parabolic, elliptic) = all.split_at(punctures);
    let kernel = kernel_signature(&sig, order, parabolic, elliptic)?;
    if json {
        emit(&json!({
            "cones": multiset_value(kernel.cones()),
            "display": kernel.to_string(),
            "genus": kernel.genus(),
            "punctures": kernel.punctures(),
        }));
    } else {
        println!("{kernel}");
    }
    Ok(ExitCode::SUCCESS)
}
