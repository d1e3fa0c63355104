//! GraphML export of proximity networks and backbones.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::backbone::BackboneEdge;
use crate::error::{Error, Result};
use crate::io;
use crate::proximity::ProximityNetwork;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Undirected GraphML document. With `backbone`, only backbone edges are
/// written and carry `significance` and `origin`.
pub fn to_graphml(net: &ProximityNetwork, backbone: Option<&[BackboneEdge]>) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"total_mentions\" for=\"node\" attr.name=\"total_mentions\" attr.type=\"long\"/>\n");
    s.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    if backbone.is_some() {
        s.push_str("  <key id=\"significance\" for=\"edge\" attr.name=\"significance\" attr.type=\"double\"/>\n");
        s.push_str("  <key id=\"origin\" for=\"edge\" attr.name=\"origin\" attr.type=\"string\"/>\n");
    }
    s.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for (i, (name, attrs)) in net.names().iter().zip(net.attrs()).enumerate() {
        let _ = write!(s, "    <node id=\"n{i}\">\n      <data key=\"name\">{}</data>\n", escape(name));
        if let Some(t) = attrs.total_mentions {
            let _ = writeln!(s, "      <data key=\"total_mentions\">{t}</data>");
        }
        if let Some(c) = attrs.community {
            let _ = writeln!(s, "      <data key=\"community\">{c}</data>");
        }
        s.push_str("    </node>\n");
    }
    match backbone {
        Some(edges) => {
            for (k, e) in edges.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "    <edge id=\"e{k}\" source=\"n{}\" target=\"n{}\">\n      <data key=\"weight\">{}</data>\n      <data key=\"significance\">{}</data>\n      <data key=\"origin\">{}</data>\n    </edge>",
                    e.source,
                    e.target,
                    io::fmt_f64(e.weight),
                    io::fmt_f64(e.significance),
                    e.origin.as_str()
                );
            }
        }
        None => {
            for (k, e) in net.edges().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "    <edge id=\"e{k}\" source=\"n{}\" target=\"n{}\">\n      <data key=\"weight\">{}</data>\n    </edge>",
                    e.source,
                    e.target,
                    io::fmt_f64(e.weight)
                );
            }
        }
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

pub fn write_graphml(path: &Path, net: &ProximityNetwork, backbone: Option<&[BackboneEdge]>) -> Result<()> {
    fs::write(path, to_graphml(net, backbone)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::backbone;

    #[test]
    fn escapes_names_and_counts_elements() {
        let mut net = ProximityNetwork::new(
            vec!["R & <co>".into(), "SPSS".into(), "Stata".into()],
            [(0, 1, 0.5), (1, 2, 0.25)],
        )
        .unwrap();
        net.set_communities(&[("SPSS".to_string(), 1usize)].into_iter().collect());
        let xml = to_graphml(&net, None);
        assert!(xml.contains("R &amp; &lt;co&gt;"));
        assert_eq!(xml.matches("<node ").count(), 3);
        assert_eq!(xml.matches("<edge ").count(), 2);
        assert!(xml.contains("<data key=\"community\">1</data>"));

        let bb = backbone(&net, 0.05, true).unwrap();
        let xml = to_graphml(&net, Some(&bb));
        assert!(xml.contains("<data key=\"origin\">mst</data>"));
    }
}
