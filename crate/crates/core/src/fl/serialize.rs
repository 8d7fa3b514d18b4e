//! Writes descriptions back as FL text that parses to the same tree.

use super::ast::{Block, FlDescription, Node, Target, TargetValue};

fn node(out: &mut String, n: &Node) {
    if let Some(k) = n.quantifier().and_then(|q| q.keyword()) {
        out.push_str(k);
        out.push(' ');
    }
    out.push_str(&n.text());
}

fn creator(out: &mut String, c: &Option<String>) {
    if let Some(c) = c {
        out.push_str(" (");
        out.push_str(c);
        out.push(')');
    }
}

fn target(out: &mut String, t: &Target) {
    match &t.value {
        TargetValue::Node(n) => node(out, n),
        TargetValue::Nested(d) => {
            out.push('[');
            line(out, d);
            out.push(']');
        }
    }
    creator(out, &t.creator);
}

fn block(out: &mut String, b: &Block) {
    out.push_str(&b.relation);
    creator(out, &b.creator);
    out.push(':');
    for t in &b.targets {
        out.push(' ');
        target(out, t);
    }
}

fn line(out: &mut String, d: &FlDescription) {
    node(out, &d.head);
    creator(out, &d.head_creator);
    for (i, b) in d.blocks.iter().enumerate() {
        out.push_str(if i == 0 { " " } else { ", " });
        block(out, b);
    }
}

fn write(out: &mut String, d: &FlDescription, depth: usize) {
    out.push_str(&"  ".repeat(depth));
    line(out, d);
    if d.terminated {
        out.push(';');
    }
    out.push('\n');
    for c in &d.children {
        write(out, c, depth + 1);
    }
}

pub fn serialize(descriptions: &[FlDescription]) -> String {
    let mut out = String::new();
    for d in descriptions {
        write(&mut out, d, 0);
    }
    out
}

pub fn serialize_description(d: &FlDescription) -> String {
    serialize(std::slice::from_ref(d))
}
