use regcalc_core::context::Context;
use regcalc_core::rules::load_spec;
use regcalc_core::trees::extraction::IndexedTree;
use regcalc_core::trees::parse_tree;

fn main() {
    let c = Context::new(load_spec("gkpz").unwrap());
    let t = parse_tree("Xi*I[Xi]*I[Xi]*I[Xi*I[Xi]]", 2).unwrap();
    let it = IndexedTree::new(&t);
    println!("nodes: {}", it.len());
    for i in it.node_ids() {
        let n = it.node(i);
        println!(
            "  {i}: parent {:?} children {:?} subtree {}",
            n.parent.as_ref().map(|(p, e)| format!("{p} via {e}")),
            n.children,
            it.subtree(i)
        );
    }
    let _ = c;
}
