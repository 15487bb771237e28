//! The example component classes: `Student` (deployed as `INamedEntity`)
//! and `Person` (deployed as `IPerson`).

use std::sync::Arc;

use refbus::{
    Class, ClassDescriptor, Component, Datum, Error, InterfaceDescriptor, MethodSig, TypeRef,
};

pub const NAMED_ENTITY: &str = "INamedEntity";
pub const IPERSON: &str = "IPerson";

pub fn named_entity() -> InterfaceDescriptor {
    InterfaceDescriptor::new(
        NAMED_ENTITY,
        vec![MethodSig::new("getName", vec![], TypeRef::Str)],
    )
    .expect("static interface")
}

pub fn iperson() -> InterfaceDescriptor {
    InterfaceDescriptor::new(IPERSON, person_methods()).expect("static interface")
}

fn person_methods() -> Vec<MethodSig> {
    vec![
        MethodSig::new("getSpouse", vec![], TypeRef::interface(IPERSON)),
        MethodSig::new(
            "setSpouse",
            vec![TypeRef::interface(IPERSON)],
            TypeRef::Null,
        ),
        MethodSig::new("getAge", vec![], TypeRef::Int),
        MethodSig::new("incrementAge", vec![], TypeRef::Null),
    ]
}

pub struct Student {
    pub name: String,
    pub matric_number: i64,
}

fn field<'a>(fields: &'a [(String, Datum)], name: &str) -> Result<&'a Datum, Error> {
    fields
        .iter()
        .find(|(k, _)| k == name)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::type_mismatch(format!("missing field {name}")))
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
    .method("getMatriculationNumber", |s, _| {
        Ok(Datum::Int(s.matric_number))
    })
    .snapshot(|s| {
        vec![
            ("name".into(), Datum::from(s.name.as_str())),
            ("matricNumber".into(), Datum::Int(s.matric_number)),
        ]
    })
    .constructor(|fields| {
        Ok(Student {
            name: field(&fields, "name")?.expect_str()?.to_string(),
            matric_number: field(&fields, "matricNumber")?.expect_int()?,
        })
    })
    .build()
    .expect("static class")
}

/// A person. The spouse reference is not part of the by-value state.
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
    for m in person_methods() {
        desc = desc.with_method(m);
    }
    Class::<Person>::builder(desc)
        .method("getName", |p, _| Ok(Datum::from(p.name.as_str())))
        .method("getSpouse", |p, _| Ok(p.spouse.clone()))
        .method_mut("setSpouse", |p, mut args| {
            p.spouse = args.pop().unwrap_or(Datum::Null);
            Ok(Datum::Null)
        })
        .method("getAge", |p, _| Ok(Datum::Int(p.age)))
        .method_mut("incrementAge", |p, _| {
            p.age += 1;
            Ok(Datum::Null)
        })
        .snapshot(|p| {
            vec![
                ("name".into(), Datum::from(p.name.as_str())),
                ("age".into(), Datum::Int(p.age)),
            ]
        })
        .constructor(|fields| {
            Ok(Person {
                name: field(&fields, "name")?.expect_str()?.to_string(),
                age: field(&fields, "age")?.expect_int()?,
                spouse: Datum::Null,
            })
        })
        .build()
        .expect("static class")
}

pub fn new_student(class: &Arc<Class<Student>>, name: &str, matric_number: i64) -> Component {
    class.instantiate(Student {
        name: name.to_string(),
        matric_number,
    })
}

pub fn new_person(class: &Arc<Class<Person>>, name: &str, age: i64) -> Component {
    class.instantiate(Person {
        name: name.to_string(),
        age,
        spouse: Datum::Null,
    })
}
