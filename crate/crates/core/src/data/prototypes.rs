//! The twelve canonical hand-object interaction layouts.
//!
//! Geometry is given in pixels relative to the scene center, y pointing
//! down. Each object is split into named parts; parts flagged `avoided` are
//! regions a hand never touches (blades, cutting edges).

use super::raster::{arch, capsule, ellipse, rect, ring, Shape};

pub const PROTOTYPE_COUNT: usize = 12;

#[derive(Clone, Debug)]
pub struct Part {
    pub name: &'static str,
    pub shapes: Vec<Shape>,
    /// Brightness offset relative to the object's base tone.
    pub tone: f32,
    pub avoided: bool,
}

#[derive(Clone, Debug)]
pub struct Prototype {
    pub id: usize,
    pub name: &'static str,
    /// Object family; prototypes sharing a family share object geometry.
    pub object: &'static str,
    pub parts: Vec<Part>,
    pub hand: Vec<Shape>,
}

fn part(name: &'static str, shapes: Vec<Shape>) -> Part {
    Part {
        name,
        shapes,
        tone: 0.0,
        avoided: false,
    }
}

fn blade(name: &'static str, shapes: Vec<Shape>) -> Part {
    Part {
        name,
        shapes,
        tone: 0.18,
        avoided: true,
    }
}

const FINGER: f32 = 1.8;

fn mug() -> Vec<Part> {
    vec![
        part("body", vec![rect(-6.0, -1.5, 8.0, 9.5, 0.0)]),
        part("bottom", vec![rect(-6.0, 9.5, 8.0, 1.5, 0.0)]),
        part("handle", vec![ring(4.0, 0.0, 6.0, 3.0)]),
    ]
}

fn cutter() -> Vec<Part> {
    vec![
        part("grip", vec![rect(-6.0, 0.0, 11.0, 3.2, 0.0)]),
        blade(
            "blade",
            vec![
                rect(9.5, 0.0, 4.5, 1.4, 0.0),
                Shape::Triangle {
                    a: (14.0, -1.4),
                    b: (14.0, 1.4),
                    c: (19.0, 1.4),
                },
            ],
        ),
    ]
}

fn scissors() -> Vec<Part> {
    vec![
        part(
            "grip",
            vec![
                ring(-13.0, -5.5, 4.5, 2.3),
                ring(-13.0, 5.5, 4.5, 2.3),
                capsule(-9.5, -4.0, -2.0, -0.8, 1.5),
                capsule(-9.5, 4.0, -2.0, 0.8, 1.5),
            ],
        ),
        blade(
            "blade",
            vec![
                capsule(-1.0, -0.9, 19.0, -0.3, 1.3),
                capsule(-1.0, 0.9, 19.0, 0.3, 1.3),
            ],
        ),
    ]
}

/// Builds prototype `id`; `None` when `id >= PROTOTYPE_COUNT`.
pub fn prototype(id: usize) -> Option<Prototype> {
    let (name, object, parts, hand): (&str, &str, Vec<Part>, Vec<Shape>) = match id {
        0 => (
            "mug_handle",
            "mug",
            mug(),
            vec![
                ellipse(16.0, 0.0, 4.5, 6.5, 0.0),
                capsule(13.0, -4.0, 6.0, -3.5, FINGER),
                capsule(13.0, 0.0, 5.0, 0.0, FINGER),
                capsule(13.0, 4.0, 6.0, 3.5, FINGER),
                capsule(14.0, -6.0, 8.0, -8.5, FINGER),
            ],
        ),
        1 => (
            "mug_bottom",
            "mug",
            mug(),
            vec![
                ellipse(-6.0, 15.0, 8.5, 3.8, 0.0),
                capsule(-15.8, 14.0, -15.8, 4.0, FINGER),
                capsule(-12.0, 16.5, -16.0, 9.0, FINGER),
                capsule(3.8, 14.0, 3.8, 7.5, FINGER),
            ],
        ),
        2 => (
            "cutter_power",
            "cutter",
            cutter(),
            vec![
                ellipse(-6.0, -8.0, 8.5, 3.8, 0.0),
                capsule(-11.5, -5.0, -11.5, -1.5, FINGER),
                capsule(-6.0, -5.0, -6.0, -1.0, FINGER),
                capsule(-0.5, -5.0, -0.5, -1.5, FINGER),
            ],
        ),
        3 => (
            "cutter_press",
            "cutter",
            cutter(),
            vec![
                ellipse(-21.0, 1.0, 4.5, 6.5, 0.0),
                capsule(-17.0, -5.0, -3.0, -5.0, FINGER),
                capsule(-18.0, 5.0, -9.0, 5.0, FINGER),
            ],
        ),
        4 => (
            "scissors",
            "scissors",
            scissors(),
            vec![
                ellipse(-23.0, 0.0, 4.0, 7.5, 0.0),
                capsule(-21.0, -6.0, -13.5, -5.5, FINGER),
                capsule(-21.0, 6.0, -13.5, 5.5, FINGER),
                capsule(-21.0, 9.5, -15.0, 11.5, FINGER),
            ],
        ),
        5 => (
            "pen",
            "pen",
            vec![
                part("barrel", vec![capsule(-20.0, -8.0, 4.0, 0.0, 1.6)]),
                part("grip", vec![capsule(4.0, 0.0, 16.0, 4.0, 1.6)]),
            ],
            vec![
                ellipse(2.0, 12.0, 6.5, 4.5, 20.0),
                capsule(-2.0, 8.0, 6.5, 0.5, FINGER),
                capsule(4.0, 9.0, 11.0, 4.0, FINGER),
                capsule(7.0, 11.0, 13.5, 7.0, FINGER),
            ],
        ),
        6 => (
            "disc_pinch",
            "disc",
            vec![part("rim", vec![ellipse(0.0, 4.0, 6.5, 6.5, 0.0)])],
            vec![
                ellipse(0.0, -14.0, 7.0, 4.2, 0.0),
                capsule(-4.5, -11.0, -7.0, -1.0, FINGER),
                capsule(4.5, -11.0, 7.0, -1.0, FINGER),
                capsule(0.0, -11.0, 0.0, -5.0, FINGER),
            ],
        ),
        7 => (
            "bottle_side",
            "bottle",
            vec![
                part("body", vec![rect(3.0, 3.0, 5.5, 12.0, 0.0)]),
                part("neck", vec![rect(3.0, -12.0, 2.5, 3.5, 0.0)]),
            ],
            vec![
                ellipse(-9.0, 3.0, 4.2, 7.5, 0.0),
                capsule(-7.0, -2.0, -1.0, -2.0, FINGER),
                capsule(-7.0, 2.5, -0.5, 2.5, FINGER),
                capsule(-7.0, 7.0, -1.0, 7.0, FINGER),
            ],
        ),
        8 => (
            "ball_palm",
            "ball",
            vec![part("surface", vec![ellipse(0.0, 5.0, 9.0, 9.0, 0.0)])],
            vec![
                ellipse(0.0, -8.0, 8.5, 3.8, 0.0),
                capsule(-7.0, -7.0, -11.0, 2.0, FINGER),
                capsule(7.0, -7.0, 11.0, 2.0, FINGER),
                capsule(-3.0, -9.0, -4.0, -3.5, FINGER),
            ],
        ),
        9 => (
            "bag_hook",
            "bag",
            vec![
                part("grip", vec![arch(0.0, 2.0, 9.0, 6.2)]),
                part("body", vec![rect(0.0, 10.0, 13.0, 8.0, 0.0)]),
            ],
            vec![
                ellipse(0.0, -13.0, 7.0, 4.0, 0.0),
                capsule(-3.5, -11.0, -3.5, -3.0, FINGER),
                capsule(0.0, -11.0, 0.0, -2.5, FINGER),
                capsule(3.5, -11.0, 3.5, -3.0, FINGER),
            ],
        ),
        10 => (
            "tray_support",
            "tray",
            vec![part("board", vec![rect(0.0, 0.0, 17.0, 2.2, 0.0)])],
            vec![
                ellipse(-4.0, 7.0, 9.0, 3.8, 0.0),
                capsule(-13.0, -4.8, -6.0, -4.0, FINGER),
                capsule(3.0, 6.0, 11.0, 4.8, FINGER),
                capsule(-13.0, 6.0, -13.5, 0.0, FINGER),
            ],
        ),
        11 => (
            "key_lateral",
            "key",
            vec![
                part("grip", vec![ellipse(-7.0, 0.0, 4.8, 4.8, 0.0)]),
                part(
                    "shaft",
                    vec![rect(4.0, 0.0, 7.0, 1.3, 0.0), rect(8.0, 2.2, 2.5, 1.0, 0.0)],
                ),
            ],
            vec![
                ellipse(-19.5, 2.0, 5.0, 6.5, 0.0),
                capsule(-15.5, -5.0, -6.0, -6.0, FINGER),
                capsule(-15.5, 6.5, -6.0, 6.0, FINGER),
            ],
        ),
        _ => return None,
    };
    Some(Prototype {
        id,
        name,
        object,
        parts,
        hand,
    })
}

pub fn all_prototypes() -> Vec<Prototype> {
    (0..PROTOTYPE_COUNT).filter_map(prototype).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_distinct_prototypes() {
        let all = all_prototypes();
        assert_eq!(all.len(), PROTOTYPE_COUNT);
        let mut names: Vec<_> = all.iter().map(|p| p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), PROTOTYPE_COUNT);
        assert!(prototype(PROTOTYPE_COUNT).is_none());
    }
}
