mod common;

use std::collections::BTreeSet;

use common::*;
use refbus::{
    CallOverride, Datum, Node, ObjRef, PolicyCtx, Position, TransmissionPolicy, TypeEnvironment,
    TypeRef, Value,
};

fn by_ref() -> CallOverride {
    CallOverride::whole(TransmissionPolicy::ByReference)
}

fn marshal(n: &Node, d: &Datum, over: &CallOverride) -> Value {
    let ctx = PolicyCtx {
        iface: "IPerson",
        method: "setSpouse",
        position: Position::Param(0),
        over,
    };
    n.marshal_outbound(d, &TypeRef::interface("IPerson"), &ctx)
        .unwrap()
}

fn detached() -> (Node, std::sync::Arc<refbus::Class<Person>>) {
    let class = person_class();
    let n = Node::detached("127.0.0.1", 5001, TypeEnvironment::new());
    n.register_class(&class).unwrap();
    n.register_interface(iperson()).unwrap();
    (n, class)
}

#[test]
fn numbers_start_at_zero_and_repeat_for_the_same_component() {
    let (n, class) = detached();
    let a: Datum = person(&class, "A", 1).into();
    let b: Datum = person(&class, "B", 2).into();
    let first = marshal(&n, &a, &by_ref());
    let Value::Ref(ior) = &first else {
        panic!("{first:?}")
    };
    assert_eq!(
        (ior.host(), ior.port(), ior.object_number(), ior.interface()),
        ("127.0.0.1", 5001, 0, "IPerson")
    );
    for _ in 0..10 {
        assert_eq!(marshal(&n, &a, &by_ref()), first);
    }
    let Value::Ref(second) = marshal(&n, &b, &by_ref()) else {
        panic!()
    };
    assert_eq!(second.object_number(), 1);
    assert_eq!(n.registry().object_count(), 2);
}

#[test]
fn by_value_snapshot_and_primitives() {
    let (n, class) = detached();
    let john: Datum = person(&class, "John Brown", 35).into();
    let v = marshal(&n, &john, &CallOverride::default());
    assert_eq!(
        refbus::wire::encode_value(&v),
        r#"{"t":"rec","type":"Person","v":{"name":{"t":"str","v":"John Brown"},"age":{"t":"i64","v":35}}}"#
    );
    assert_eq!(n.registry().object_count(), 0);
    let ctx = PolicyCtx {
        iface: "IPerson",
        method: "getAge",
        position: Position::Return,
        over: &by_ref(),
    };
    assert_eq!(
        n.marshal_outbound(&Datum::Int(36), &TypeRef::Int, &ctx)
            .unwrap(),
        Value::Int(36)
    );
    assert_eq!(marshal(&n, &Datum::Null, &by_ref()), Value::Null);
}

#[test]
fn own_reference_materializes_to_the_original() {
    let (n, class) = detached();
    let john = person(&class, "John Brown", 35);
    let v = marshal(&n, &john.clone().into(), &by_ref());
    let back = n.materialize(&v).unwrap();
    match back.expect_object().unwrap() {
        ObjRef::Local(c) => assert!(c.same_identity(&john)),
        other => panic!("{other:?}"),
    }
    // A record with a registered constructor becomes a fresh component.
    let copy = n
        .materialize(&marshal(&n, &john.clone().into(), &CallOverride::default()))
        .unwrap();
    let copy = copy.expect_object().unwrap().as_local().unwrap().clone();
    assert!(!copy.same_identity(&john));
    assert_eq!(copy.invoke("getAge", vec![]).unwrap(), Datum::Int(35));
}

#[test]
fn concurrent_marshals_assign_one_number_per_component() {
    let (n, class) = detached();
    let people: Vec<Datum> = (0..100)
        .map(|i| person(&class, &format!("p{i}"), i).into())
        .collect();
    let results: Vec<Vec<(usize, Value)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|t| {
                let (n, people) = (&n, &people);
                s.spawn(move || {
                    (0..125)
                        .map(|k| {
                            let idx = (t * 125 + k) * 37 % 100;
                            (idx, marshal(n, &people[idx], &by_ref()))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut per_component = vec![None; 100];
    for (idx, v) in results.into_iter().flatten() {
        let Value::Ref(ior) = v else { panic!() };
        let dep = n
            .registry()
            .resolve(ior.object_number())
            .expect("resolvable");
        assert!(dep
            .component()
            .same_identity(people[idx].expect_object().unwrap().as_local().unwrap()));
        match per_component[idx] {
            None => per_component[idx] = Some(ior.object_number()),
            Some(prev) => assert_eq!(prev, ior.object_number()),
        }
    }
    let numbers: BTreeSet<u64> = per_component.iter().map(|n| n.unwrap()).collect();
    assert_eq!(numbers.len(), 100);
    assert_eq!(n.registry().object_count(), 100);
}

#[test]
fn named_deployments_get_numbers_lazily_and_share_them() {
    let (n, class) = detached();
    let mary = person(&class, "Mary Smith", 33);
    n.deploy(&iperson(), &mary, "mary").unwrap();
    assert_eq!(
        n.registry().lookup_name("mary").unwrap().object_number(),
        None
    );
    let Value::Ref(ior) = marshal(&n, &mary.clone().into(), &by_ref()) else {
        panic!()
    };
    let dep = n.registry().lookup_name("mary").unwrap();
    assert_eq!(dep.object_number(), Some(ior.object_number()));
    // Binding a second name to the same deployment is allowed; reuse is not.
    n.bind_name("mrs-smith", &iperson(), &mary).unwrap();
    n.bind_name("mary", &iperson(), &mary).unwrap();
    let other = person(&class, "Other", 1);
    assert!(matches!(
        n.deploy(&iperson(), &other, "mary"),
        Err(refbus::Error::NameInUse(_))
    ));
    assert!(matches!(
        n.deploy(&iperson(), &other, "a/b"),
        Err(refbus::Error::InvalidName(_))
    ));
    assert_eq!(n.registry().object_count(), 1);
}

#[test]
fn describe_is_stable() {
    let env = {
        let mut e = TypeEnvironment::new();
        e.add_interface(iperson()).unwrap();
        e
    };
    let a = refbus::describe(&iperson(), &env);
    let b = refbus::describe(&iperson(), &env.clone());
    assert_eq!(a, b);
    assert_eq!(a.matches(r#""name":"setSpouse""#).count(), 1);
}
