#![allow(dead_code)]

use std::sync::Arc;

use refbus::{
    Class, ClassDescriptor, Component, Datum, InterfaceDescriptor, MethodSig, Node, NodeConfig,
    TypeRef,
};

pub fn named_entity() -> InterfaceDescriptor {
    InterfaceDescriptor::new(
        "INamedEntity",
        vec![MethodSig::new("getName", vec![], TypeRef::Str)],
    )
    .unwrap()
}

pub fn iperson() -> InterfaceDescriptor {
    InterfaceDescriptor::new("IPerson", person_sigs()).unwrap()
}

pub fn iaged() -> InterfaceDescriptor {
    InterfaceDescriptor::new(
        "IAged",
        vec![MethodSig::new("getAge", vec![], TypeRef::Int)],
    )
    .unwrap()
}

fn person_sigs() -> Vec<MethodSig> {
    vec![
        MethodSig::new("getSpouse", vec![], TypeRef::interface("IPerson")),
        MethodSig::new(
            "setSpouse",
            vec![TypeRef::interface("IPerson")],
            TypeRef::Null,
        ),
        MethodSig::new("getAge", vec![], TypeRef::Int),
        MethodSig::new("incrementAge", vec![], TypeRef::Null),
    ]
}

pub struct Student {
    pub name: String,
    pub matric: i64,
}

pub fn student_class() -> Arc<Class<Student>> {
    Class::<Student>::builder(
        ClassDescriptor::new("Student")
            .with_state("name", TypeRef::Str)
            .with_state("matricNumber", TypeRef::Int)
            .with_method(MethodSig::new("getName", vec![], TypeRef::Str))
            .with_method(MethodSig::new(
                "getMatriculationNumber",
                vec![],
                TypeRef::Int,
            )),
    )
    .method("getName", |s, _| Ok(Datum::from(s.name.as_str())))
    .method("getMatriculationNumber", |s, _| Ok(Datum::Int(s.matric)))
    .snapshot(|s| {
        vec![
            ("name".into(), s.name.as_str().into()),
            ("matricNumber".into(), Datum::Int(s.matric)),
        ]
    })
    .build()
    .unwrap()
}

pub fn bob() -> Component {
    student_class().instantiate(Student {
        name: "Bobby Jones".into(),
        matric: 1234,
    })
}

pub struct Person {
    pub name: String,
    pub age: i64,
    pub spouse: Datum,
}

pub fn person_class() -> Arc<Class<Person>> {
    let mut desc = ClassDescriptor::new("Person")
        .with_state("name", TypeRef::Str)
        .with_state("age", TypeRef::Int)
        .with_method(MethodSig::new("getName", vec![], TypeRef::Str));
    for m in person_sigs() {
        desc = desc.with_method(m);
    }
    Class::<Person>::builder(desc)
        .method("getName", |p, _| Ok(p.name.as_str().into()))
        .method("getSpouse", |p, _| Ok(p.spouse.clone()))
        .method_mut("setSpouse", |p, mut a| {
            p.spouse = a.pop().unwrap();
            Ok(Datum::Null)
        })
        .method("getAge", |p, _| Ok(Datum::Int(p.age)))
        .method_mut("incrementAge", |p, _| {
            p.age += 1;
            Ok(Datum::Null)
        })
        .snapshot(|p| {
            vec![
                ("name".into(), p.name.as_str().into()),
                ("age".into(), Datum::Int(p.age)),
            ]
        })
        .constructor(|f| {
            Ok(Person {
                name: f[0].1.expect_str()?.to_string(),
                age: f[1].1.expect_int()?,
                spouse: Datum::Null,
            })
        })
        .build()
        .unwrap()
}

pub fn person(class: &Arc<Class<Person>>, name: &str, age: i64) -> Component {
    class.instantiate(Person {
        name: name.into(),
        age,
        spouse: Datum::Null,
    })
}

pub fn node() -> Node {
    Node::start(NodeConfig::new("127.0.0.1", 0)).unwrap()
}

/// A node that knows both example interfaces and can rebuild Persons.
pub fn person_node(class: &Arc<Class<Person>>) -> Node {
    let n = node();
    n.register_class(class).unwrap();
    n.register_interface(iperson()).unwrap();
    n.register_interface(named_entity()).unwrap();
    n
}
