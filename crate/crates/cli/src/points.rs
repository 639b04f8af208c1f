//! Point syntax on the command line: a vertex name, or `u:v:t` for the point at
//! distance `t` from `u` along the edge `u`–`v`.

use dendrite::{EdgeId, Error, PointRef, Result, TreeSpec, VertexId};

fn find_edge(tree: &TreeSpec<f64>, u: &str, v: &str) -> Result<(VertexId, EdgeId)> {
    let (u, v) = (tree.require_vertex(u)?, tree.require_vertex(v)?);
    tree.neighbors(u)
        .iter()
        .find(|(w, _)| *w == v)
        .map(|&(_, e)| (u, e))
        .ok_or_else(|| Error::InvalidPoint(format!("no edge between {} and {}", tree.name(u), tree.name(v))))
}

pub fn parse_edge(tree: &TreeSpec<f64>, spec: &str) -> Result<EdgeId> {
    let (u, v) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("expected an edge u:v, got {spec:?}")))?;
    Ok(find_edge(tree, u, v)?.1)
}

pub fn parse_point(tree: &TreeSpec<f64>, spec: &str) -> Result<PointRef<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [u, v, t] = parts.as_slice() else {
        if parts.len() == 1 {
            return Ok(PointRef::Vertex(tree.require_vertex(spec)?));
        }
        return Err(Error::InvalidPoint(format!("expected a vertex or u:v:t, got {spec:?}")));
    };
    let (from, e) = find_edge(tree, u, v)?;
    let t: f64 = t
        .parse()
        .map_err(|_| Error::InvalidPoint(format!("bad offset {t:?} in {spec:?}")))?;
    let edge = tree.edge(e);
    if !(0.0..=edge.length).contains(&t) {
        return Err(Error::InvalidPoint(format!("offset {t} is outside the edge of length {}", edge.length)));
    }
    let offset = if edge.u == from { t } else { edge.length - t };
    tree.point_on_edge(e, offset)
}

/// The inverse of [`parse_point`].
pub fn point_label(tree: &TreeSpec<f64>, p: &PointRef<f64>) -> String {
    match *p {
        PointRef::Vertex(v) => tree.name(v).to_string(),
        PointRef::Interior { edge, offset } => {
            let e = tree.edge(edge);
            format!("{}:{}:{offset}", tree.name(e.u), tree.name(e.v))
        }
    }
}
