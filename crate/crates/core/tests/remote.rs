mod common;

use std::net::TcpListener;
use std::time::{Duration, Instant};

use common::*;
use refbus::{
    CallOptions, CallOverride, Datum, Error, FaultCode, Ior, ObjRef, TransmissionPolicy, Value,
};

fn post(url: &str, body: &str) -> (u16, String) {
    match ureq::post(url).send_string(body) {
        Ok(r) => (r.status(), r.into_string().unwrap()),
        Err(ureq::Error::Status(code, r)) => (code, r.into_string().unwrap()),
        Err(e) => panic!("{e}"),
    }
}

fn get(url: &str) -> (u16, String) {
    match ureq::get(url).call() {
        Ok(r) => (r.status(), r.into_string().unwrap()),
        Err(ureq::Error::Status(code, r)) => (code, r.into_string().unwrap()),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn named_endpoint_over_http() {
    let b = node();
    let url = b.deploy(&named_entity(), &bob(), "bob").unwrap();
    assert_eq!(url, format!("http://127.0.0.1:{}/bob", b.port()));

    let (status, wsdl) = get(&format!("{url}?wsdl"));
    assert_eq!(status, 200);
    assert_eq!(
        wsdl,
        r#"{"interface":"INamedEntity","methods":[{"name":"getName","params":[],"returns":"str"}],"records":{},"interfaces":{}}"#
    );

    let (status, body) = post(&url, r#"{"method":"getName","args":[]}"#);
    assert_eq!(status, 200);
    assert_eq!(body, r#"{"result":{"t":"str","v":"Bobby Jones"}}"#);

    let (status, body) = post(&url, r#"{"method":"getMatriculationNumber","args":[]}"#);
    assert_eq!(status, 200);
    assert!(
        body.starts_with(r#"{"fault":{"code":"UNKNOWN_METHOD""#),
        "{body}"
    );

    // No object number exists until someone needs one.
    assert_eq!(b.registry().object_count(), 0);
    let (_, body) = post(
        &format!("http://127.0.0.1:{}/obj/0", b.port()),
        r#"{"method":"getName","args":[]}"#,
    );
    assert!(body.contains("UNKNOWN_SERVICE"), "{body}");
}

#[test]
fn get_component_by_name_and_proxy_interning() {
    let b = node();
    b.deploy(&named_entity(), &bob(), "bob").unwrap();
    let a = node();
    a.register_interface(named_entity()).unwrap();
    let p1 = a
        .get_component_by_name("bob", "127.0.0.1", b.port())
        .unwrap();
    let p2 = a
        .get_component_by_name("bob", "127.0.0.1", b.port())
        .unwrap();
    assert!(p1.same_identity(&p2));
    assert_eq!(a.registry().proxy_count(), 1);
    assert_eq!(p1.ior().object_number(), 0);
    assert_eq!(
        p1.invoke("getName", vec![]).unwrap(),
        Datum::from("Bobby Jones")
    );

    match a.get_component_by_name("nosuch", "127.0.0.1", b.port()) {
        Err(Error::Fault(f)) => assert_eq!(f.code, FaultCode::UnknownService),
        other => panic!("{other:?}"),
    }
}

#[test]
fn client_needs_local_interface_knowledge() {
    let b = node();
    b.deploy(&named_entity(), &bob(), "bob").unwrap();
    let a = node();
    assert!(matches!(
        a.get_component_by_name("bob", "127.0.0.1", b.port()),
        Err(Error::UnknownInterface(_))
    ));
}

fn figure2(policy: TransmissionPolicy) -> i64 {
    let class = person_class();
    let b = person_node(&class);
    b.deploy(&iperson(), &person(&class, "Mary Smith", 33), "mary")
        .unwrap();
    let a = person_node(&class);
    a.policy().set_method_policy("IPerson", "setSpouse", policy);
    let mary = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    let john = person(&class, "John Brown", 35);
    mary.invoke("setSpouse", vec![john.clone().into()]).unwrap();
    john.invoke("incrementAge", vec![]).unwrap();
    let spouse = mary.invoke("getSpouse", vec![]).unwrap();
    spouse
        .expect_object()
        .unwrap()
        .invoke("getAge", vec![])
        .unwrap()
        .expect_int()
        .unwrap()
}

#[test]
fn spouse_by_reference_sees_the_birthday() {
    assert_eq!(figure2(TransmissionPolicy::ByReference), 36);
}

#[test]
fn spouse_by_value_keeps_a_copy() {
    assert_eq!(figure2(TransmissionPolicy::ByValue), 35);
}

#[test]
fn by_value_copy_is_a_distinct_component_on_the_receiver() {
    let class = person_class();
    let b = person_node(&class);
    let mary = person(&class, "Mary Smith", 33);
    b.deploy(&iperson(), &mary, "mary").unwrap();
    let a = person_node(&class);
    let proxy = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    let john = person(&class, "John Brown", 35);
    proxy
        .invoke("setSpouse", vec![john.clone().into()])
        .unwrap();

    let held = mary.invoke("getSpouse", vec![]).unwrap();
    let held = held
        .expect_object()
        .unwrap()
        .as_local()
        .expect("reconstructed locally")
        .clone();
    assert!(!held.same_identity(&john));
    assert_eq!(held.snapshot().field("age"), Some(&Datum::Int(35)));
    // The copy was never exported.
    assert_eq!(a.registry().object_count(), 0);
}

#[test]
fn reference_round_trip_returns_the_original() {
    let class = person_class();
    let b = person_node(&class);
    b.deploy(&iperson(), &person(&class, "Mary Smith", 33), "mary")
        .unwrap();
    let a = person_node(&class);
    a.policy()
        .set_method_policy("IPerson", "setSpouse", TransmissionPolicy::ByReference);
    let mary = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    let john = person(&class, "John Brown", 35);
    mary.invoke("setSpouse", vec![john.clone().into()]).unwrap();

    let opts = CallOptions::with_override(
        CallOverride::default().returning(TransmissionPolicy::ByReference),
    );
    let back = mary.invoke_with("getSpouse", vec![], &opts).unwrap();
    let back = back
        .expect_object()
        .unwrap()
        .as_local()
        .expect("unproxied")
        .clone();
    assert!(back.same_identity(&john));
    assert_eq!(a.registry().object_count(), 1);
}

#[test]
fn repeated_receipts_intern_to_one_proxy() {
    let class = person_class();
    let b = person_node(&class);
    let m1 = person(&class, "Mary Smith", 33);
    let m2 = person(&class, "Ann Lee", 40);
    b.deploy(&iperson(), &m1, "m1").unwrap();
    b.deploy(&iperson(), &m2, "m2").unwrap();
    let a = person_node(&class);
    a.policy()
        .set_method_policy("IPerson", "setSpouse", TransmissionPolicy::ByReference);
    let john = person(&class, "John Brown", 35);
    for name in ["m1", "m2"] {
        let p = a
            .get_component_by_name(name, "127.0.0.1", b.port())
            .unwrap();
        p.invoke("setSpouse", vec![john.clone().into()]).unwrap();
    }
    let s1 = m1.invoke("getSpouse", vec![]).unwrap();
    let s2 = m2.invoke("getSpouse", vec![]).unwrap();
    let (p1, p2) = (s1.expect_object().unwrap(), s2.expect_object().unwrap());
    assert!(p1.as_proxy().unwrap().same_identity(p2.as_proxy().unwrap()));
    assert_eq!(b.registry().proxy_count(), 1);
    assert_eq!(a.registry().object_count(), 1);
}

#[test]
fn chained_references_keep_pointing_home() {
    let class = person_class();
    let b = person_node(&class);
    b.deploy(&iperson(), &person(&class, "Mary Smith", 33), "mary")
        .unwrap();
    let c = person_node(&class);
    let carol = person(&class, "Carol King", 50);
    c.deploy(&iperson(), &carol, "carol").unwrap();

    let a = person_node(&class);
    a.policy()
        .set_method_policy("IPerson", "setSpouse", TransmissionPolicy::ByReference);
    let mary = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    let carol_proxy = a
        .get_component_by_name("carol", "127.0.0.1", c.port())
        .unwrap();
    carol_proxy
        .invoke("setSpouse", vec![mary.clone().into()])
        .unwrap();

    let held = carol.invoke("getSpouse", vec![]).unwrap();
    let held = held.expect_object().unwrap().as_proxy().unwrap().clone();
    assert_eq!(held.ior(), mary.ior());
    assert_eq!(held.ior().port(), b.port());
    assert_eq!(held.invoke("getAge", vec![]).unwrap(), Datum::Int(33));
    assert_eq!(a.registry().object_count(), 0);
}

#[test]
fn proxy_passed_by_value_carries_the_remote_state() {
    let class = person_class();
    let b = person_node(&class);
    b.deploy(&iperson(), &person(&class, "Mary Smith", 33), "mary")
        .unwrap();
    let c = person_node(&class);
    let carol = person(&class, "Carol King", 50);
    c.deploy(&iperson(), &carol, "carol").unwrap();
    let a = person_node(&class);
    let mary = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    let carol_proxy = a
        .get_component_by_name("carol", "127.0.0.1", c.port())
        .unwrap();
    carol_proxy.invoke("setSpouse", vec![mary.into()]).unwrap();
    let held = carol.invoke("getSpouse", vec![]).unwrap();
    let held = held.expect_object().unwrap().as_local().unwrap().clone();
    assert_eq!(
        held.snapshot().field("name"),
        Some(&Datum::from("Mary Smith"))
    );
}

#[test]
fn proxies_match_direct_invocation() {
    let b = node();
    let student = bob();
    b.deploy(&named_entity(), &student, "bob").unwrap();
    let a = node();
    a.register_interface(named_entity()).unwrap();
    let p = a
        .get_component_by_name("bob", "127.0.0.1", b.port())
        .unwrap();
    assert_eq!(
        p.invoke("getName", vec![]).unwrap(),
        student.invoke("getName", vec![]).unwrap()
    );
}

#[test]
fn multi_interface_deployment_is_confined_per_endpoint() {
    let class = person_class();
    let n = person_node(&class);
    let p = person(&class, "Mary Smith", 33);
    let as_person = n.deploy(&iperson(), &p, "mary").unwrap();
    let as_aged = n.deploy(&iaged(), &p, "mary-aged").unwrap();
    let as_named = n.deploy(&named_entity(), &p, "mary-named").unwrap();

    post(&as_person, r#"{"method":"incrementAge","args":[]}"#);
    let (_, body) = post(&as_aged, r#"{"method":"getAge","args":[]}"#);
    assert_eq!(body, r#"{"result":{"t":"i64","v":34}}"#);
    let (_, body) = post(&as_named, r#"{"method":"getName","args":[]}"#);
    assert_eq!(body, r#"{"result":{"t":"str","v":"Mary Smith"}}"#);

    for (url, banned) in [
        (&as_aged, "incrementAge"),
        (&as_aged, "getName"),
        (&as_named, "getAge"),
        (&as_person, "getName"),
    ] {
        let (_, body) = post(url, &format!(r#"{{"method":"{banned}","args":[]}}"#));
        assert!(body.contains("UNKNOWN_METHOD"), "{url} {banned}: {body}");
    }

    let listing = get(&format!("{}/", n.base_url())).1;
    assert!(
        listing.contains("mary-aged") && listing.contains("mary-named"),
        "{listing}"
    );
}

#[test]
fn incompatible_deployment_is_rejected() {
    let n = node();
    match n.deploy(&iperson(), &bob(), "x") {
        Err(Error::IncompatibleComponent { missing, .. }) => {
            let names: Vec<_> = missing.iter().map(|m| m.name.as_str()).collect();
            assert_eq!(names, ["getSpouse", "setSpouse", "getAge", "incrementAge"]);
        }
        other => panic!("{other:?}"),
    }
    assert!(n.registry().lookup_name("x").is_none());
}

#[test]
fn return_policy_header_controls_the_reply() {
    let class = person_class();
    let n = person_node(&class);
    let mary = person(&class, "Mary Smith", 33);
    let john = person(&class, "John Brown", 35);
    mary.invoke("setSpouse", vec![john.into()]).unwrap();
    let url = n.deploy(&iperson(), &mary, "mary").unwrap();

    let (_, by_value) = post(&url, r#"{"method":"getSpouse","args":[]}"#);
    assert_eq!(
        by_value,
        r#"{"result":{"t":"rec","type":"Person","v":{"name":{"t":"str","v":"John Brown"},"age":{"t":"i64","v":35}}}}"#
    );
    let r = ureq::post(&url)
        .set("X-Refbus-Return-Policy", "BY_REFERENCE")
        .send_string(r#"{"method":"getSpouse","args":[]}"#)
        .unwrap()
        .into_string()
        .unwrap();
    // mary was numbered by nobody yet, so john takes 0.
    assert_eq!(
        r,
        format!(
            r#"{{"result":{{"t":"ref","v":{{"host":"127.0.0.1","port":{},"obj":0,"iface":"IPerson"}}}}}}"#,
            n.port()
        )
    );
    let r = ureq::post(&url)
        .set("X-Refbus-Return-Policy", "SIDEWAYS")
        .send_string(r#"{"method":"getSpouse","args":[]}"#)
        .unwrap()
        .into_string()
        .unwrap();
    assert!(r.contains("BAD_ENVELOPE"), "{r}");
}

#[test]
fn reserved_calls() {
    let n = node();
    let url = n.deploy(&named_entity(), &bob(), "bob").unwrap();
    let (_, r) = post(&url, r#"{"method":"__resolve","args":[]}"#);
    assert!(r.contains(r#""obj":0,"iface":"INamedEntity""#), "{r}");
    let (_, r) = post(
        &format!("{}/obj/0", n.base_url()),
        r#"{"method":"__snapshot","args":[]}"#,
    );
    assert_eq!(
        r,
        r#"{"result":{"t":"rec","type":"Student","v":{"name":{"t":"str","v":"Bobby Jones"},"matricNumber":{"t":"i64","v":1234}}}}"#
    );
    let (_, r) = post(&url, r#"{"method":"__resolve","args":[{"t":"null"}]}"#);
    assert!(r.contains("TYPE_MISMATCH"), "{r}");
}

#[test]
fn argument_type_errors_fault_before_invocation() {
    let class = person_class();
    let n = person_node(&class);
    let mary = person(&class, "Mary Smith", 33);
    let url = n.deploy(&iperson(), &mary, "mary").unwrap();
    for body in [
        r#"{"method":"setSpouse","args":[{"t":"i64","v":1}]}"#,
        r#"{"method":"setSpouse","args":[]}"#,
        r#"{"method":"getAge","args":[{"t":"null"}]}"#,
        r#"{"method":"setSpouse","args":[{"t":"ref","v":{"host":"h","port":1,"obj":0,"iface":"INamedEntity"}}]}"#,
    ] {
        let (_, r) = post(&url, body);
        assert!(r.contains("TYPE_MISMATCH"), "{body}: {r}");
    }
    // A reference to an unknown local object.
    let bogus = format!(
        r#"{{"method":"setSpouse","args":[{{"t":"ref","v":{{"host":"127.0.0.1","port":{},"obj":99,"iface":"IPerson"}}}}]}}"#,
        n.port()
    );
    let (_, r) = post(&url, &bogus);
    assert!(r.contains("UNKNOWN_SERVICE"), "{r}");
    assert!(mary.invoke("getSpouse", vec![]).unwrap().is_null());
}

#[test]
fn remote_reference_argument_becomes_a_proxy() {
    let class = person_class();
    let n = person_node(&class);
    let mary = person(&class, "Mary Smith", 33);
    let url = n.deploy(&iperson(), &mary, "mary").unwrap();
    let (_, r) = post(
        &url,
        r#"{"method":"setSpouse","args":[{"t":"ref","v":{"host":"elsewhere.example","port":5001,"obj":3,"iface":"IPerson"}}]}"#,
    );
    assert_eq!(r, r#"{"result":{"t":"null"}}"#);
    let held = mary.invoke("getSpouse", vec![]).unwrap();
    let p = held.expect_object().unwrap().as_proxy().unwrap().clone();
    assert_eq!(
        p.ior(),
        &Ior::new("elsewhere.example", 5001, 3, "IPerson").unwrap()
    );
}

#[test]
fn unreachable_node_is_a_network_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let a = node();
    a.register_interface(named_entity()).unwrap();
    let p = a
        .materialize(&Value::Ref(
            Ior::new("127.0.0.1", u64::from(port), 0, "INamedEntity").unwrap(),
        ))
        .unwrap();
    let ObjRef::Remote(p) = p.expect_object().unwrap().clone() else {
        panic!()
    };
    assert!(matches!(
        p.invoke("getName", vec![]),
        Err(Error::Network(_))
    ));
}

#[test]
fn silent_node_times_out() {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let hold = std::thread::spawn(move || {
        // Accept and never answer.
        let req = server.recv().unwrap();
        std::thread::sleep(Duration::from_secs(2));
        drop(req);
    });
    let a = node();
    a.register_interface(named_entity()).unwrap();
    let d = a
        .materialize(&Value::Ref(
            Ior::new("127.0.0.1", u64::from(port), 0, "INamedEntity").unwrap(),
        ))
        .unwrap();
    let p = d.expect_object().unwrap().as_proxy().unwrap().clone();
    let opts = CallOptions {
        timeout: Duration::from_millis(300),
        ..CallOptions::default()
    };
    let t0 = Instant::now();
    assert!(matches!(
        p.invoke_with("getName", vec![], &opts),
        Err(Error::Timeout(_))
    ));
    assert!(t0.elapsed() < Duration::from_secs(2));
    hold.join().unwrap();
}

#[test]
fn unknown_interface_in_reference_is_rejected() {
    let a = node();
    let r = a.materialize(&Value::Ref(Ior::new("elsewhere", 1, 0, "IBogus").unwrap()));
    assert!(matches!(r, Err(Error::UnknownInterface(_))));
}

#[test]
fn proxy_checks_method_and_arity_locally() {
    let a = node();
    a.register_interface(named_entity()).unwrap();
    let d = a
        .materialize(&Value::Ref(
            Ior::new("elsewhere.invalid", 1, 0, "INamedEntity").unwrap(),
        ))
        .unwrap();
    let p = d.expect_object().unwrap().as_proxy().unwrap().clone();
    assert_eq!(
        p.invoke("nope", vec![]).unwrap_err().fault_code(),
        Some(FaultCode::UnknownMethod)
    );
    assert_eq!(
        p.invoke("getName", vec![Datum::Int(1)])
            .unwrap_err()
            .fault_code(),
        Some(FaultCode::TypeMismatch)
    );
}

#[test]
fn concurrent_proxy_calls_are_serialized_per_component() {
    let class = person_class();
    let b = person_node(&class);
    let mary = person(&class, "Mary Smith", 0);
    b.deploy(&iperson(), &mary, "mary").unwrap();
    let a = person_node(&class);
    let p = a
        .get_component_by_name("mary", "127.0.0.1", b.port())
        .unwrap();
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| {
                for _ in 0..25 {
                    p.invoke("incrementAge", vec![]).unwrap();
                }
            });
        }
    });
    assert_eq!(mary.invoke("getAge", vec![]).unwrap(), Datum::Int(200));
}
