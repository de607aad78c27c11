//! Compiled URL patterns.
//!
//! A pattern is a sequence of literal bytes, `^` separator placeholders and
//! `*` wildcards, matched by simulating the pattern as an NFA over URL byte
//! positions. Matching is linear in `pattern × url` with no backtracking.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Piece {
    Byte(u8),
    Separator,
    Star,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Pattern {
    pieces: Vec<Piece>,
    anchor_start: bool,
    anchor_end: bool,
    domain_anchor: bool,
}

/// A separator is anything but a letter, a digit, or one of `_ - . %`.
pub(crate) fn is_separator(b: u8) -> bool {
    !(b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'%'))
}

/// Byte range of the host in `scheme://host/...`, if the URL has an
/// authority part.
pub(crate) fn host_span(url: &[u8]) -> Option<(usize, usize)> {
    let sep = url.windows(3).position(|w| w == b"://")?;
    let start = sep + 3;
    let len = url[start..]
        .iter()
        .position(|b| matches!(b, b'/' | b'?' | b'#'))
        .unwrap_or(url.len() - start);
    Some((start, start + len))
}

impl Pattern {
    pub(crate) fn compile(
        body: &str,
        anchor_start: bool,
        anchor_end: bool,
        domain_anchor: bool,
    ) -> Pattern {
        let mut pieces: Vec<Piece> = Vec::with_capacity(body.len());
        for b in body.bytes() {
            let piece = match b {
                b'*' => Piece::Star,
                b'^' => Piece::Separator,
                other => Piece::Byte(other),
            };
            if piece == Piece::Star && pieces.last() == Some(&Piece::Star) {
                continue;
            }
            pieces.push(piece);
        }
        Pattern {
            pieces,
            anchor_start,
            anchor_end,
            domain_anchor,
        }
    }

    pub(crate) fn is_match(&self, url: &str) -> bool {
        let url = url.as_bytes();
        let n = url.len();
        let mut live = vec![false; n + 1];
        if self.domain_anchor {
            let Some((start, end)) = host_span(url) else {
                return false;
            };
            live[start] = true;
            for i in start..end {
                if url[i] == b'.' {
                    live[i + 1] = true;
                }
            }
        } else if self.anchor_start {
            live[0] = true;
        } else {
            live.iter_mut().for_each(|x| *x = true);
        }

        let mut next = vec![false; n + 1];
        for piece in &self.pieces {
            next.iter_mut().for_each(|x| *x = false);
            let mut any = false;
            match *piece {
                Piece::Byte(c) => {
                    for p in 0..n {
                        if live[p] && url[p] == c {
                            next[p + 1] = true;
                            any = true;
                        }
                    }
                }
                Piece::Separator => {
                    for p in 0..n {
                        if live[p] && is_separator(url[p]) {
                            next[p + 1] = true;
                            any = true;
                        }
                    }
                    // `^` also matches the end of the URL, consuming nothing.
                    if live[n] {
                        next[n] = true;
                        any = true;
                    }
                }
                Piece::Star => {
                    if let Some(first) = live.iter().position(|&x| x) {
                        next[first..].iter_mut().for_each(|x| *x = true);
                        any = true;
                    }
                }
            }
            if !any {
                return false;
            }
            std::mem::swap(&mut live, &mut next);
        }
        if self.anchor_end {
            live[n]
        } else {
            live.iter().any(|&x| x)
        }
    }
}
