//! A demo node hosting `bob` (a Student as INamedEntity) and `mary`
//! (a Person as IPerson).

use clap::Parser;
use refbus::{Node, NodeConfig};
use refbus_tools::classes::{
    iperson, named_entity, new_person, new_student, person_class, student_class,
};

#[derive(Parser)]
#[command(name = "refbus-node")]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port
    #[arg(long, default_value_t = 5001)]
    port: u16,
}

fn main() -> Result<(), refbus::Error> {
    env_logger::init();
    let args = Args::parse();
    let node = Node::start(NodeConfig::new(args.host, args.port))?;
    let people = person_class();
    node.register_class(&people)?;
    let bob = new_student(&student_class(), "Bobby Jones", 1234);
    println!("{}", node.deploy(&named_entity(), &bob, "bob")?);
    let mary = new_person(&people, "Mary Smith", 33);
    println!("{}", node.deploy(&iperson(), &mary, "mary")?);
    loop {
        std::thread::park();
    }
}
