//! Scripted two-node scenarios over loopback HTTP.
//!
//! Each run produces a transcript. Ports vary between runs, so the
//! transcript is compared against its expectation after replacing each
//! node's port with a placeholder.

use refbus::{
    CallOverride, Datum, Node, NodeConfig, ObjRef, PolicyCtx, Position, TransmissionPolicy, TypeRef,
};

use crate::classes::{
    iperson, named_entity, new_person, new_student, person_class, student_class, IPERSON,
};

pub const SCENARIOS: &[&str] = &[
    "figure1",
    "figure2-byref",
    "figure2-byvalue",
    "figure2-local",
    "figure4-precedence",
];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("scenario {name} failed:\n{diff}")]
    Failed { name: String, diff: String },
    #[error(transparent)]
    Runtime(#[from] refbus::Error),
}

#[derive(Debug, Clone)]
pub struct Transcript {
    lines: Vec<String>,
    ports: Vec<(u16, &'static str)>,
}

impl Transcript {
    fn new() -> Self {
        Transcript {
            lines: Vec::new(),
            ports: Vec::new(),
        }
    }

    fn port(&mut self, port: u16, placeholder: &'static str) {
        self.ports.push((port, placeholder));
    }

    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn last(&self) -> Option<&str> {
        self.lines.last().map(String::as_str)
    }

    /// The transcript with every node port replaced by its placeholder.
    pub fn normalized(&self) -> Vec<String> {
        self.lines
            .iter()
            .map(|l| {
                self.ports
                    .iter()
                    .fold(l.clone(), |acc, (port, ph)| replace_port(&acc, *port, ph))
            })
            .collect()
    }
}

/// Replaces `port` where it appears as a whole number.
fn replace_port(line: &str, port: u16, placeholder: &str) -> String {
    let needle = port.to_string();
    let bytes = line.as_bytes();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    while i < line.len() {
        if line[i..].starts_with(&needle) {
            let before = i == 0 || !bytes[i - 1].is_ascii_digit();
            let end = i + needle.len();
            let after = end == line.len() || !bytes[end].is_ascii_digit();
            if before && after {
                out.push_str(placeholder);
                i = end;
                continue;
            }
        }
        let ch = line[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

pub fn expected(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "figure1" => FIGURE1,
        "figure2-byref" => FIGURE2_BYREF,
        "figure2-byvalue" => FIGURE2_BYVALUE,
        "figure2-local" => FIGURE2_LOCAL,
        "figure4-precedence" => FIGURE4,
        _ => return None,
    })
}

const FIGURE1: &[&str] = &[
    "B: deploy(INamedEntity, aStudent, \"bob\") -> http://127.0.0.1:<port-B>/bob",
    "A: GET http://127.0.0.1:<port-B>/bob?wsdl -> interface INamedEntity { getName() -> str }",
    "A: getComponentByName(\"bob\", 127.0.0.1, <port-B>) -> ref:127.0.0.1:<port-B>:0:INamedEntity",
    "A: remoteEntity.getName() -> \"Bobby Jones\"",
];

const FIGURE2_BYREF: &[&str] = &[
    "B: deploy(IPerson, mary, \"mary\") -> http://127.0.0.1:<port-B>/mary",
    "A: setMethodPolicy(IPerson, setSpouse, BY_REFERENCE)",
    "A: mary = findLocalOrRemotePerson(\"Mary Smith\") -> ref:127.0.0.1:<port-B>:0:IPerson",
    "A: john = new Person(\"John Brown\", 35)",
    "A: mary.setSpouse(john)",
    "A: john.incrementAge()",
    "A: print(mary.getSpouse().getAge())",
    "36",
];

const FIGURE2_BYVALUE: &[&str] = &[
    "B: deploy(IPerson, mary, \"mary\") -> http://127.0.0.1:<port-B>/mary",
    "A: setMethodPolicy(IPerson, setSpouse, BY_VALUE)",
    "A: mary = findLocalOrRemotePerson(\"Mary Smith\") -> ref:127.0.0.1:<port-B>:0:IPerson",
    "A: john = new Person(\"John Brown\", 35)",
    "A: mary.setSpouse(john)",
    "A: john.incrementAge()",
    "A: print(mary.getSpouse().getAge())",
    "35",
];

const FIGURE2_LOCAL: &[&str] = &[
    "A: mary = findLocalOrRemotePerson(\"Mary Smith\") -> local Person",
    "A: john = new Person(\"John Brown\", 35)",
    "A: mary.setSpouse(john)",
    "A: john.incrementAge()",
    "A: print(mary.getSpouse().getAge())",
    "36",
];

const FIGURE4: &[&str] = &[
    "A: setClassPolicy(Student, BY_REFERENCE)",
    "A: setMethodPolicy(IPerson, setSpouse, BY_VALUE)",
    "A: IRoster.enrol param 0, class Student -> BY_REFERENCE",
    "A: IRoster.enrol param 0, class Person -> BY_VALUE",
    "A: IPerson.setSpouse param 0, class Student -> BY_VALUE",
    "A: IPerson.getSpouse return, class Student -> BY_REFERENCE",
    "A: IPerson.setSpouse param 0, proxy -> BY_VALUE",
    "A: setParamPolicy(IPerson, setSpouse, 0, BY_REFERENCE)",
    "A: IPerson.setSpouse param 0, class Person -> BY_REFERENCE",
    "A: IPerson.setSpouse param 0, class Person, call override BY_VALUE -> BY_VALUE",
    "A: marshal aStudent as INamedEntity at IRoster.enrol param 0 -> ref:127.0.0.1:<port-A>:0:INamedEntity",
    "A: marshal john as IPerson at IPerson.setSpouse param 0 -> ref:127.0.0.1:<port-A>:1:IPerson",
    "A: marshal john as IPerson at IPerson.setSpouse param 0, call override BY_VALUE -> Person{name: \"John Brown\", age: 35}",
];

/// Runs a scenario and checks its transcript against the expectation.
pub fn run_scenario(name: &str) -> Result<Transcript, ScenarioError> {
    let want = expected(name).ok_or_else(|| ScenarioError::Unknown(name.to_string()))?;
    let t = match name {
        "figure1" => figure1()?,
        "figure2-byref" => figure2(Some(TransmissionPolicy::ByReference))?,
        "figure2-byvalue" => figure2(Some(TransmissionPolicy::ByValue))?,
        "figure2-local" => figure2(None)?,
        _ => figure4()?,
    };
    let got = t.normalized();
    if got.iter().map(String::as_str).ne(want.iter().copied()) {
        return Err(ScenarioError::Failed {
            name: name.to_string(),
            diff: diff(want, &got),
        });
    }
    Ok(t)
}

fn diff(want: &[&str], got: &[String]) -> String {
    let mut out = String::new();
    for i in 0..want.len().max(got.len()) {
        let w = want.get(i).copied();
        let g = got.get(i).map(String::as_str);
        if w == g {
            out.push_str(&format!("  {}\n", w.unwrap_or_default()));
        } else {
            if let Some(w) = w {
                out.push_str(&format!("- {w}\n"));
            }
            if let Some(g) = g {
                out.push_str(&format!("+ {g}\n"));
            }
        }
    }
    out
}

fn loopback() -> refbus::Result<Node> {
    Node::start(NodeConfig::new("127.0.0.1", 0))
}

fn figure1() -> refbus::Result<Transcript> {
    let mut t = Transcript::new();
    let b = loopback()?;
    let a = loopback()?;
    t.port(b.port(), "<port-B>");
    t.port(a.port(), "<port-A>");

    let student = new_student(&student_class(), "Bobby Jones", 1234);
    let url = b.deploy(&named_entity(), &student, "bob")?;
    t.say(format!(
        "B: deploy(INamedEntity, aStudent, \"bob\") -> {url}"
    ));

    let wsdl = ureq::get(&format!("{url}?wsdl"))
        .call()
        .map_err(|e| refbus::Error::Network(e.to_string()))?
        .into_string()
        .map_err(|e| refbus::Error::Network(e.to_string()))?;
    let desc =
        refbus::Descriptor::parse(&wsdl).map_err(|e| refbus::Error::Network(e.to_string()))?;
    let methods: Vec<String> = desc
        .interface
        .methods()
        .iter()
        .map(|m| m.to_string())
        .collect();
    t.say(format!(
        "A: GET {url}?wsdl -> interface {} {{ {} }}",
        desc.interface.name(),
        methods.join("; ")
    ));

    a.register_interface(named_entity())?;
    let proxy = a.get_component_by_name("bob", b.host(), b.port())?;
    t.say(format!(
        "A: getComponentByName(\"bob\", {}, {}) -> {}",
        b.host(),
        b.port(),
        proxy.ior()
    ));
    let name = proxy.invoke("getName", vec![])?;
    t.say(format!("A: remoteEntity.getName() -> {}", show(&name)));
    Ok(t)
}

/// `None` runs the all-local variant: Mary lives on node A itself.
fn figure2(policy: Option<TransmissionPolicy>) -> refbus::Result<Transcript> {
    let mut t = Transcript::new();
    let class = person_class();
    let a = loopback()?;
    t.port(a.port(), "<port-A>");
    a.register_class(&class)?;
    a.register_interface(iperson())?;

    let _b;
    let mary = match policy {
        Some(p) => {
            let b = loopback()?;
            t.port(b.port(), "<port-B>");
            b.register_class(&class)?;
            let mary = new_person(&class, "Mary Smith", 33);
            let url = b.deploy(&iperson(), &mary, "mary")?;
            t.say(format!("B: deploy(IPerson, mary, \"mary\") -> {url}"));
            a.policy().set_method_policy(IPERSON, "setSpouse", p);
            t.say(format!(
                "A: setMethodPolicy(IPerson, setSpouse, {})",
                p.as_str()
            ));
            let proxy = a.get_component_by_name("mary", b.host(), b.port())?;
            t.say(format!(
                "A: mary = findLocalOrRemotePerson(\"Mary Smith\") -> {}",
                proxy.ior()
            ));
            _b = b;
            ObjRef::Remote(proxy)
        }
        None => {
            let mary = new_person(&class, "Mary Smith", 33);
            t.say("A: mary = findLocalOrRemotePerson(\"Mary Smith\") -> local Person");
            ObjRef::Local(mary)
        }
    };

    let john = new_person(&class, "John Brown", 35);
    t.say("A: john = new Person(\"John Brown\", 35)");
    mary.invoke("setSpouse", vec![john.clone().into()])?;
    t.say("A: mary.setSpouse(john)");
    john.invoke("incrementAge", vec![])?;
    t.say("A: john.incrementAge()");
    let spouse = mary.invoke("getSpouse", vec![])?;
    let age = spouse.expect_object()?.invoke("getAge", vec![])?;
    t.say("A: print(mary.getSpouse().getAge())");
    t.say(show(&age));
    Ok(t)
}

fn figure4() -> refbus::Result<Transcript> {
    use TransmissionPolicy::*;
    let mut t = Transcript::new();
    let a = loopback()?;
    t.port(a.port(), "<port-A>");
    let students = student_class();
    let people = person_class();
    a.register_class(&students)?;
    a.register_class(&people)?;
    a.register_interface(named_entity())?;
    a.register_interface(iperson())?;
    let policy = a.policy();
    let none = CallOverride::default();

    policy.set_class_policy("Student", ByReference);
    t.say("A: setClassPolicy(Student, BY_REFERENCE)");
    policy.set_method_policy(IPERSON, "setSpouse", ByValue);
    t.say("A: setMethodPolicy(IPerson, setSpouse, BY_VALUE)");

    let cases: [(&str, &str, Position, Option<&str>); 5] = [
        ("IRoster", "enrol", Position::Param(0), Some("Student")),
        ("IRoster", "enrol", Position::Param(0), Some("Person")),
        (IPERSON, "setSpouse", Position::Param(0), Some("Student")),
        (IPERSON, "getSpouse", Position::Return, Some("Student")),
        (IPERSON, "setSpouse", Position::Param(0), None),
    ];
    for (iface, method, pos, class) in cases {
        let p = policy.resolve(pos, iface, method, class, &none);
        t.say(format!(
            "A: {iface}.{method} {}, {} -> {}",
            show_position(pos),
            class.map_or("proxy".to_string(), |c| format!("class {c}")),
            p.as_str()
        ));
    }

    policy.set_param_policy(IPERSON, "setSpouse", 0, ByReference);
    t.say("A: setParamPolicy(IPerson, setSpouse, 0, BY_REFERENCE)");
    let p = policy.resolve(
        Position::Param(0),
        IPERSON,
        "setSpouse",
        Some("Person"),
        &none,
    );
    t.say(format!(
        "A: IPerson.setSpouse param 0, class Person -> {}",
        p.as_str()
    ));
    let whole = CallOverride::whole(ByValue);
    let p = policy.resolve(
        Position::Param(0),
        IPERSON,
        "setSpouse",
        Some("Person"),
        &whole,
    );
    t.say(format!(
        "A: IPerson.setSpouse param 0, class Person, call override BY_VALUE -> {}",
        p.as_str()
    ));

    let student: Datum = new_student(&students, "Bobby Jones", 1234).into();
    let john: Datum = new_person(&people, "John Brown", 35).into();
    let marshals = [
        (
            &student,
            "aStudent",
            "INamedEntity",
            "IRoster",
            "enrol",
            &none,
            "",
        ),
        (&john, "john", IPERSON, IPERSON, "setSpouse", &none, ""),
        (
            &john,
            "john",
            IPERSON,
            IPERSON,
            "setSpouse",
            &whole,
            ", call override BY_VALUE",
        ),
    ];
    for (datum, label, declared, iface, method, over, note) in marshals {
        let ctx = PolicyCtx {
            iface,
            method,
            position: Position::Param(0),
            over,
        };
        let v = a.marshal_outbound(datum, &TypeRef::interface(declared), &ctx)?;
        t.say(format!(
            "A: marshal {label} as {declared} at {iface}.{method} param 0{note} -> {}",
            show_value(&v)
        ));
    }
    Ok(t)
}

fn show_position(p: Position) -> String {
    match p {
        Position::Param(i) => format!("param {i}"),
        Position::Return => "return".to_string(),
    }
}

fn show(d: &Datum) -> String {
    match d {
        Datum::Str(s) => format!("{s:?}"),
        Datum::Int(i) => i.to_string(),
        other => format!("{other:?}"),
    }
}

/// Renders a wire value the way the inspector prints results.
pub fn show_value(v: &refbus::Value) -> String {
    use refbus::Value;
    match v {
        Value::Null => "null".to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => format!("{:?}", f.get()),
        Value::Str(s) => format!("{s:?}"),
        Value::List(items) => format!(
            "[{}]",
            items.iter().map(show_value).collect::<Vec<_>>().join(", ")
        ),
        Value::Record(r) => format!(
            "{}{{{}}}",
            r.type_name(),
            r.fields()
                .iter()
                .map(|(k, v)| format!("{k}: {}", show_value(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        Value::Ref(ior) => ior.to_string(),
    }
}
