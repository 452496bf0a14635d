//! View-selection pair files: a view count, then for each view a line with its
//! id and a line `n id0 score0 id1 score1 ...` listing ranked neighbors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub score: f32,
}

/// Ranked neighbor lists indexed by view id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairList {
    neighbors: Vec<Vec<Neighbor>>,
}

impl PairList {
    pub fn new(neighbors: Vec<Vec<Neighbor>>) -> Result<Self> {
        let n = neighbors.len();
        for (view, list) in neighbors.iter().enumerate() {
            if let Some(bad) = list.iter().find(|nb| nb.id >= n) {
                return Err(Error::InvalidArgument(format!(
                    "view {view} lists neighbor {} but there are only {n} views",
                    bad.id
                )));
            }
        }
        Ok(Self { neighbors })
    }

    pub fn num_views(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, view: usize) -> &[Neighbor] {
        self.neighbors.get(view).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn parse_pair(text: &str) -> Result<PairList> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n0, first) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty pair file"))?;
    let count: usize = first
        .parse()
        .map_err(|_| Error::parse(n0, format!("invalid view count '{first}'")))?;
    let mut slots: Vec<Option<Vec<Neighbor>>> = vec![None; count];
    let mut last = n0;
    for _ in 0..count {
        let (ln, id_text) = lines
            .next()
            .ok_or_else(|| Error::parse(last + 1, "unexpected end of file, expected view id"))?;
        let id: usize = id_text
            .parse()
            .map_err(|_| Error::parse(ln, format!("invalid view id '{id_text}'")))?;
        if id >= count {
            return Err(Error::parse(ln, format!("view id {id} out of range 0..{count}")));
        }
        if slots[id].is_some() {
            return Err(Error::parse(ln, format!("duplicate view id {id}")));
        }
        let (ln, list_text) = lines
            .next()
            .ok_or_else(|| Error::parse(ln + 1, "unexpected end of file, expected neighbor list"))?;
        last = ln;
        let tokens: Vec<&str> = list_text.split_whitespace().collect();
        let n: usize = tokens[0]
            .parse()
            .map_err(|_| Error::parse(ln, format!("invalid neighbor count '{}'", tokens[0])))?;
        if (tokens.len() - 1) % 2 != 0 {
            return Err(Error::parse(ln, "odd number of id/score tokens"));
        }
        if tokens.len() != 1 + 2 * n {
            return Err(Error::parse(
                ln,
                format!("expected {n} id/score pairs, found {}", (tokens.len() - 1) / 2),
            ));
        }
        let mut list = Vec::with_capacity(n);
        for pair in tokens[1..].chunks_exact(2) {
            let nid: usize = pair[0]
                .parse()
                .map_err(|_| Error::parse(ln, format!("invalid neighbor id '{}'", pair[0])))?;
            if nid >= count {
                return Err(Error::parse(ln, format!("neighbor id {nid} out of range 0..{count}")));
            }
            let score: f32 = pair[1]
                .parse()
                .map_err(|_| Error::parse(ln, format!("invalid score '{}'", pair[1])))?;
            list.push(Neighbor { id: nid, score });
        }
        slots[id] = Some(list);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(ln, "unexpected content after last view"));
    }
    // every id was seen exactly once, so all slots are filled
    PairList::new(slots.into_iter().map(|s| s.unwrap_or_default()).collect())
}

pub fn write_pair(pairs: &PairList) -> String {
    let mut s = format!("{}\n", pairs.num_views());
    for (id, list) in pairs.neighbors.iter().enumerate() {
        s.push_str(&format!("{id}\n{}", list.len()));
        for nb in list {
            s.push_str(&format!(" {} {}", nb.id, nb.score));
        }
        s.push('\n');
    }
    s
}
