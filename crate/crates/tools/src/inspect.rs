//! `refbus-inspect`: list, describe and call deployments on a running node.

use std::io::Write;
use std::time::Duration;

use clap::{Parser, Subcommand};
use refbus::wire::{
    decode_listing, decode_reply, encode_call, CallEnvelope, ReplyEnvelope, CONTENT_TYPE,
};
use refbus::{Descriptor, FaultCode, Finite, Ior, Value};

use crate::scenario::show_value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NETWORK: i32 = 2;
pub const EXIT_UNKNOWN_SERVICE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_FAULT: i32 = 5;

const TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Parser, Debug)]
#[command(
    name = "refbus-inspect",
    about = "Inspect deployments on a refbus node"
)]
struct Cli {
    /// Node address as host:port
    node: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// List named and numbered deployments
    List,
    /// Print the interface descriptor of a deployment
    Describe {
        /// A deployment name or obj/N
        target: String,
        /// Print the descriptor document as served
        #[arg(long)]
        raw: bool,
    },
    /// Invoke a method with literal arguments
    Call {
        target: String,
        method: String,
        /// i:42, f:1.5, s:text, b:true, null, ref:host:port:obj:iface
        #[arg(allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

/// Parses one argument literal.
pub fn parse_literal(s: &str) -> Result<Value, String> {
    if s == "null" {
        return Ok(Value::Null);
    }
    let (tag, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("bad literal {s:?}: expected a tag such as i:, f:, s:, b:, ref:"))?;
    match tag {
        "i" => rest
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("bad integer {rest:?}")),
        "f" => rest
            .parse::<f64>()
            .ok()
            .and_then(|f| Finite::new(f).ok())
            .map(Value::Float)
            .ok_or_else(|| format!("bad float {rest:?}")),
        "s" => Ok(Value::Str(rest.to_string())),
        "b" => match rest {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("bad boolean {rest:?}")),
        },
        "ref" => parse_ref(rest).ok_or_else(|| format!("bad reference {s:?}")),
        _ => Err(format!("unknown literal tag {tag:?}")),
    }
}

/// `host:port:obj:iface`, split from the right so IPv6 hosts keep their colons.
fn parse_ref(s: &str) -> Option<Value> {
    let (rest, iface) = s.rsplit_once(':')?;
    let (rest, obj) = rest.rsplit_once(':')?;
    let (host, port) = rest.rsplit_once(':')?;
    let host = host
        .strip_prefix('[')
        .and_then(|h| h.strip_suffix(']'))
        .unwrap_or(host);
    Ior::new(host, port.parse().ok()?, obj.parse().ok()?, iface)
        .ok()
        .map(Value::Ref)
}

fn parse_node(s: &str) -> Result<(String, u16), String> {
    let (host, port) = s
        .rsplit_once(':')
        .ok_or_else(|| format!("bad node address {s:?}"))?;
    let port: u16 = port.parse().map_err(|_| format!("bad port in {s:?}"))?;
    if host.is_empty() || port == 0 {
        return Err(format!("bad node address {s:?}"));
    }
    let host = host
        .strip_prefix('[')
        .and_then(|h| h.strip_suffix(']'))
        .unwrap_or(host);
    let base = if host.contains(':') {
        format!("http://[{host}]:{port}")
    } else {
        format!("http://{host}:{port}")
    };
    Ok((base, port))
}

fn check_target(t: &str) -> Result<(), String> {
    if t.is_empty() || t.contains(['?', '#', '/']) && !t.starts_with("obj/") {
        return Err(format!("bad target {t:?}: expected a name or obj/N"));
    }
    if let Some(n) = t.strip_prefix("obj/") {
        n.parse::<u64>()
            .map_err(|_| format!("bad object number in {t:?}"))?;
    }
    Ok(())
}

enum Failure {
    Usage(String),
    Network(String),
    Fault(refbus::Fault),
}

impl From<ureq::Error> for Failure {
    fn from(e: ureq::Error) -> Self {
        match e {
            ureq::Error::Status(code, _) => Failure::Network(format!("HTTP status {code}")),
            other => Failure::Network(other.to_string()),
        }
    }
}

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(TIMEOUT).build()
}

fn body(resp: ureq::Response) -> Result<String, Failure> {
    resp.into_string()
        .map_err(|e| Failure::Network(e.to_string()))
}

/// Runs the inspector; returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Network(m)) => {
            let _ = writeln!(err, "network error: {m}");
            EXIT_NETWORK
        }
        Err(Failure::Fault(f)) => {
            let _ = writeln!(err, "fault {}: {}", f.code, f.message);
            if f.code == FaultCode::UnknownService {
                EXIT_UNKNOWN_SERVICE
            } else {
                EXIT_FAULT
            }
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let (base, _) = parse_node(&cli.node).map_err(Failure::Usage)?;
    let agent = agent();
    match cli.cmd {
        Cmd::List => {
            let text = body(agent.get(&format!("{base}/")).call()?)?;
            let entries =
                decode_listing(&text).map_err(|e| Failure::Network(format!("bad listing: {e}")))?;
            let rows: Vec<(String, String, String)> = entries
                .iter()
                .map(|e| {
                    let obj = e.object_number.map(|n| format!("obj/{n}"));
                    match (e.names.is_empty(), obj) {
                        (true, Some(obj)) => (obj, e.interface.clone(), String::new()),
                        (_, obj) => (
                            e.names.join(","),
                            e.interface.clone(),
                            obj.unwrap_or_default(),
                        ),
                    }
                })
                .collect();
            let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
            for (first, iface, obj) in rows {
                let line = format!("{first:<w$}  {iface}  {obj}");
                let _ = writeln!(out, "{}", line.trim_end());
            }
        }
        Cmd::Describe { target, raw } => {
            check_target(&target).map_err(Failure::Usage)?;
            let text = body(agent.get(&format!("{base}/{target}?wsdl")).call()?)?;
            if let Ok(ReplyEnvelope::Fault(f)) = decode_reply(&text) {
                return Err(Failure::Fault(f));
            }
            let desc = Descriptor::parse(&text)
                .map_err(|e| Failure::Network(format!("bad descriptor: {e}")))?;
            if raw {
                let _ = writeln!(out, "{text}");
            } else {
                let _ = write!(out, "{}", render_descriptor(&desc));
            }
        }
        Cmd::Call {
            target,
            method,
            args,
        } => {
            check_target(&target).map_err(Failure::Usage)?;
            let args = args
                .iter()
                .map(|a| parse_literal(a))
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::Usage)?;
            let envelope = encode_call(&CallEnvelope { method, args });
            let text = body(
                agent
                    .post(&format!("{base}/{target}"))
                    .set("Content-Type", CONTENT_TYPE)
                    .send_string(&envelope)?,
            )?;
            match decode_reply(&text).map_err(|e| Failure::Network(format!("bad reply: {e}")))? {
                ReplyEnvelope::Result(Value::Str(s)) => {
                    let _ = writeln!(out, "{s}");
                }
                ReplyEnvelope::Result(v) => {
                    let _ = writeln!(out, "{}", show_value(&v));
                }
                ReplyEnvelope::Fault(f) => return Err(Failure::Fault(f)),
            }
        }
    }
    Ok(())
}

pub fn render_descriptor(d: &Descriptor) -> String {
    let mut s = format!("interface {}\n", d.interface.name());
    for m in d.interface.methods() {
        s.push_str(&format!("  {m}\n"));
    }
    for (name, fields) in &d.records {
        s.push_str(&format!("record {name}\n"));
        for (f, ty) in fields {
            s.push_str(&format!("  {f}: {ty}\n"));
        }
    }
    for (name, iface) in &d.interfaces {
        s.push_str(&format!("interface {name}\n"));
        for m in iface.methods() {
            s.push_str(&format!("  {m}\n"));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(parse_literal("i:-3").unwrap(), Value::Int(-3));
        assert_eq!(parse_literal("s:a:b").unwrap(), Value::Str("a:b".into()));
        assert_eq!(parse_literal("s:").unwrap(), Value::Str(String::new()));
        assert_eq!(parse_literal("b:true").unwrap(), Value::Bool(true));
        assert_eq!(parse_literal("null").unwrap(), Value::Null);
        assert_eq!(parse_literal("f:2.5").unwrap(), Value::float(2.5).unwrap());
        assert!(parse_literal("f:NaN").is_err());
        assert!(parse_literal("f:inf").is_err());
        assert!(parse_literal("i:1.0").is_err());
        assert!(parse_literal("x:1").is_err());
        assert!(parse_literal("42").is_err());
    }

    #[test]
    fn ref_literals_split_from_the_right() {
        let v = parse_literal("ref:::1:8080:3:IPerson").unwrap();
        let Value::Ref(ior) = v else { panic!() };
        assert_eq!(
            (ior.host(), ior.port(), ior.object_number(), ior.interface()),
            ("::1", 8080, 3, "IPerson")
        );
        assert!(parse_literal("ref:h:0:1:I").is_err());
        assert!(parse_literal("ref:h:80:x:I").is_err());
    }

    #[test]
    fn node_addresses() {
        assert_eq!(parse_node("localhost:80").unwrap().0, "http://localhost:80");
        assert_eq!(parse_node("[::1]:80").unwrap().0, "http://[::1]:80");
        assert!(parse_node("localhost").is_err());
        assert!(parse_node("h:70000").is_err());
    }

    #[test]
    fn targets() {
        assert!(check_target("bob").is_ok());
        assert!(check_target("obj/3").is_ok());
        assert!(check_target("obj/x").is_err());
        assert!(check_target("a?b").is_err());
        assert!(check_target("").is_err());
    }

    #[test]
    fn usage_errors_exit_4() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["refbus-inspect"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(
            run(["refbus-inspect", "h:1", "frobnicate"], &mut o, &mut e),
            EXIT_USAGE
        );
        assert_eq!(
            run(["refbus-inspect", "nohost", "list"], &mut o, &mut e),
            EXIT_USAGE
        );
        assert_eq!(
            run(
                ["refbus-inspect", "127.0.0.1:1", "call", "bob", "m", "q:1"],
                &mut o,
                &mut e
            ),
            EXIT_USAGE
        );
    }
}
