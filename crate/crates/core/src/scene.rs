//! Procedural scenes for the toy backend.
//!
//! A prompt is scanned for registered nouns (optionally preceded by a colour
//! word) and background keywords. Each match becomes a flat-coloured sprite on
//! the latent grid, laid out deterministically, so the segmenter and the
//! evaluator have exact ground truth to compare against.

use thiserror::Error;

use crate::direction::Direction;
use crate::frame::FrameImage;
use crate::latent::{LatentGrid, LatentShape};
use crate::mask::{Mask, Resolution};

/// Channels of a toy latent (RGB).
pub const TOY_CHANNELS: usize = 3;

/// Minimum RGB distance between any two colours placed in one scene.
pub const MIN_COLOR_DISTANCE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("no registered entity in prompt {prompt:?}; known entities: {}", .known.join(", "))]
    NoEntity { prompt: String, known: Vec<String> },
    #[error("latent size {0} is too small for a scene (need at least 16 cells)")]
    TooSmall(usize),
}

pub const COLORS: &[(&str, [u8; 3])] = &[
    ("red", [220, 30, 30]),
    ("blue", [30, 70, 220]),
    ("yellow", [240, 220, 20]),
    ("green", [30, 170, 50]),
    ("orange", [250, 140, 0]),
    ("purple", [140, 40, 190]),
    ("pink", [250, 120, 200]),
    ("white", [245, 245, 245]),
    ("black", [15, 15, 15]),
    ("cyan", [0, 210, 210]),
    ("brown", [120, 70, 30]),
];

const BACKGROUNDS: &[(&[&str], [u8; 3])] = &[
    (&["sky", "air", "day", "cloudy"], [120, 180, 235]),
    (&["grass", "field", "meadow", "park", "lawn"], [80, 150, 60]),
    (&["snow", "snowy", "slope", "ski"], [225, 235, 245]),
    (&["night", "dark", "space"], [15, 15, 45]),
    (&["sea", "ocean", "water", "lake", "river"], [30, 80, 150]),
    (&["desert", "sand", "beach"], [215, 195, 135]),
    (&["gray", "grey"], [128, 128, 128]),
];

pub const DEFAULT_BACKGROUND: [u8; 3] = [128, 128, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sprite {
    Square,
    Circle,
    /// Isosceles triangle whose apex points left.
    WedgeLeft,
    Tall,
    Wide,
    /// Full-width band along the bottom edge.
    Strip,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Zone {
    Sky,
    Ground,
    Floor,
}

struct EntitySpec {
    noun: &'static str,
    aliases: &'static [&'static str],
    sprite: Sprite,
    zone: Zone,
    color: [u8; 3],
    /// May appear mid-video when a later prompt slice mentions it.
    overlay: bool,
}

const fn spec(
    noun: &'static str,
    aliases: &'static [&'static str],
    sprite: Sprite,
    zone: Zone,
    color: [u8; 3],
) -> EntitySpec {
    EntitySpec {
        noun,
        aliases,
        sprite,
        zone,
        color,
        overlay: false,
    }
}

const REGISTRY: &[EntitySpec] = &[
    spec("square", &["block", "box", "cube"], Sprite::Square, Zone::Ground, [220, 30, 30]),
    spec("circle", &["ball", "disc"], Sprite::Circle, Zone::Ground, [30, 70, 220]),
    spec("airplane", &["plane", "aeroplane", "aircraft", "jet"], Sprite::WedgeLeft, Zone::Sky, [245, 245, 245]),
    spec("bird", &["eagle", "crow"], Sprite::Circle, Zone::Sky, [15, 15, 15]),
    spec("balloon", &[], Sprite::Circle, Zone::Sky, [250, 120, 200]),
    spec("sun", &[], Sprite::Circle, Zone::Sky, [240, 220, 20]),
    spec("cloud", &["cloudy"], Sprite::Wide, Zone::Sky, [245, 245, 245]),
    EntitySpec {
        noun: "rainbow",
        aliases: &[],
        sprite: Sprite::Arc,
        zone: Zone::Sky,
        color: [140, 40, 190],
        overlay: true,
    },
    spec("horse", &["pony"], Sprite::Wide, Zone::Ground, [120, 70, 30]),
    spec("man", &["person", "boy", "guy", "skier", "player"], Sprite::Tall, Zone::Ground, [30, 70, 220]),
    spec("woman", &["girl", "lady"], Sprite::Tall, Zone::Ground, [250, 120, 200]),
    spec("cat", &["kitten"], Sprite::Square, Zone::Ground, [250, 140, 0]),
    spec("dog", &["puppy"], Sprite::Wide, Zone::Ground, [0, 210, 210]),
    spec("car", &["truck", "bus"], Sprite::Wide, Zone::Ground, [240, 220, 20]),
    spec("boat", &["ship"], Sprite::Wide, Zone::Ground, [245, 245, 245]),
    spec("fish", &[], Sprite::Circle, Zone::Ground, [250, 140, 0]),
    spec("tree", &[], Sprite::Tall, Zone::Ground, [30, 170, 50]),
    spec("rocket", &[], Sprite::Tall, Zone::Ground, [245, 245, 245]),
    spec("obstacle", &["fence", "hurdle", "wall", "log"], Sprite::Tall, Zone::Ground, [120, 70, 30]),
    spec("runway", &["road", "track", "street"], Sprite::Strip, Zone::Floor, [60, 60, 60]),
];

/// Nouns the toy scene compiler understands.
pub fn known_entities() -> Vec<&'static str> {
    REGISTRY.iter().map(|e| e.noun).collect()
}

/// One sprite placed in a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedEntity {
    pub noun: String,
    /// Words from the prompt that named it (`"red square"`).
    pub phrase: String,
    pub color: [u8; 3],
    /// Latent-resolution ground truth.
    pub mask: Mask,
    pub facing: Option<Direction>,
    pub overlay: bool,
}

impl PlacedEntity {
    /// Ground truth at image resolution.
    pub fn image_mask(&self, factor: usize) -> Mask {
        let m = &self.mask;
        Mask::from_fn(m.width() * factor, m.height() * factor, Resolution::Image, |x, y| {
            m.get(x / factor, y / factor)
        })
    }

    /// Whether `phrase` refers to this entity: it mentions the noun (or an
    /// alias) and any colour word in it matches.
    pub fn matches(&self, phrase: &str) -> bool {
        let words = tokenize(phrase);
        let spec = match lookup_noun(&self.noun) {
            Some(s) => s,
            None => return false,
        };
        let names_me = words.iter().any(|w| lookup_noun(w).is_some_and(|s| s.noun == spec.noun));
        if !names_me {
            return false;
        }
        words
            .iter()
            .filter_map(|w| color_by_name(w))
            .all(|c| color_distance(c, self.color) < MIN_COLOR_DISTANCE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub size: usize,
    pub background: [u8; 3],
    pub entities: Vec<PlacedEntity>,
}

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn singular(word: &str) -> Vec<&str> {
    let mut forms = vec![word];
    if let Some(s) = word.strip_suffix("es") {
        forms.push(s);
    }
    if let Some(s) = word.strip_suffix('s') {
        forms.push(s);
    }
    forms
}

fn lookup_noun(word: &str) -> Option<&'static EntitySpec> {
    singular(word)
        .into_iter()
        .find_map(|w| REGISTRY.iter().find(|e| e.noun == w || e.aliases.contains(&w)))
}

fn color_by_name(word: &str) -> Option<[u8; 3]> {
    COLORS.iter().find(|(n, _)| *n == word).map(|(_, c)| *c)
}

pub fn color_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(&p, &q)| (p as f64 - q as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Maps an 8-bit channel to the latent range `[−1, 1]`.
pub fn to_latent_value(c: u8) -> f64 {
    c as f64 / 127.5 - 1.0
}

pub fn from_latent_value(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

fn sprite_cells(sprite: Sprite, s: usize, size: usize) -> (usize, usize, Vec<(usize, usize)>) {
    let mut cells = Vec::new();
    let (w, h) = match sprite {
        Sprite::Square | Sprite::Circle | Sprite::WedgeLeft => (s, s),
        Sprite::Tall => ((s / 2).max(1), s),
        Sprite::Wide => (s, (s / 2).max(1)),
        Sprite::Strip => (size, (s / 2).max(1)),
        Sprite::Arc => (2 * s, s),
    };
    for j in 0..h {
        for i in 0..w {
            let inside = match sprite {
                Sprite::Circle => {
                    let r = s as f64 / 2.0;
                    let (dx, dy) = (i as f64 + 0.5 - r, j as f64 + 0.5 - r);
                    dx * dx + dy * dy <= r * r
                }
                Sprite::WedgeLeft => {
                    let half = (j as f64 + 0.5 - s as f64 / 2.0).abs();
                    half <= (i as f64 + 1.0) / 2.0
                }
                Sprite::Arc => {
                    let (cx, cy) = (s as f64, s as f64);
                    let d = ((i as f64 + 0.5 - cx).powi(2) + (j as f64 + 0.5 - cy).powi(2)).sqrt();
                    d <= s as f64 && d >= s as f64 * 0.6
                }
                _ => true,
            };
            if inside {
                cells.push((i, j));
            }
        }
    }
    (w, h, cells)
}

/// Compiles `prompt` into a scene on a `size × size` latent grid.
pub fn compile_scene(prompt: &str, size: usize) -> Result<Scene, SceneError> {
    if size < 16 {
        return Err(SceneError::TooSmall(size));
    }
    let words = tokenize(prompt);
    let background = words
        .iter()
        .find_map(|w| BACKGROUNDS.iter().find(|(keys, _)| keys.contains(&w.as_str())).map(|(_, c)| *c))
        .unwrap_or(DEFAULT_BACKGROUND);

    let mut found: Vec<(&'static EntitySpec, Option<([u8; 3], &str)>)> = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let Some(spec) = lookup_noun(w) else { continue };
        if found.iter().any(|(s, _)| s.noun == spec.noun) {
            continue;
        }
        let adjective = i
            .checked_sub(1)
            .and_then(|p| color_by_name(&words[p]).map(|c| (c, words[p].as_str())));
        found.push((spec, adjective));
    }
    if found.is_empty() {
        return Err(SceneError::NoEntity {
            prompt: prompt.to_string(),
            known: known_entities().into_iter().map(str::to_string).collect(),
        });
    }

    let s = (size / 8).max(2);
    let mut used = vec![background];
    let movable: Vec<usize> = (0..found.len()).filter(|&i| found[i].0.zone != Zone::Floor).collect();
    let mut entities = Vec::with_capacity(found.len());
    for (idx, (spec, adjective)) in found.iter().enumerate() {
        let wanted = adjective.map(|(c, _)| c).unwrap_or(spec.color);
        let color = std::iter::once(wanted)
            .chain(COLORS.iter().map(|(_, c)| *c))
            .find(|c| used.iter().all(|u| color_distance(*u, *c) >= MIN_COLOR_DISTANCE))
            .unwrap_or(wanted);
        used.push(color);

        let (w, h, cells) = sprite_cells(spec.sprite, s, size);
        let (x0, y0) = match spec.zone {
            Zone::Floor => (0, size - h),
            zone => {
                let slot = movable.iter().position(|&m| m == idx).unwrap_or(0);
                let cx = (slot + 1) * size / (movable.len() + 1);
                let cy = if zone == Zone::Sky { size / 4 } else { size / 2 };
                (cx.saturating_sub(w / 2).min(size - w), cy.saturating_sub(h / 2).min(size - h))
            }
        };
        let mut mask = Mask::empty(size, size, Resolution::Latent);
        for (i, j) in cells {
            mask.set(x0 + i, y0 + j, true);
        }
        let phrase = match adjective {
            Some((_, word)) => format!("{word} {}", spec.noun),
            None => spec.noun.to_string(),
        };
        entities.push(PlacedEntity {
            noun: spec.noun.to_string(),
            phrase,
            color,
            mask,
            facing: (spec.sprite == Sprite::WedgeLeft).then_some(Direction::Left),
            overlay: spec.overlay,
        });
    }
    Ok(Scene {
        size,
        background,
        entities,
    })
}

impl Scene {
    /// Colour of one latent cell; later entities cover earlier ones.
    pub fn color_at(&self, x: usize, y: usize) -> [u8; 3] {
        self.entities
            .iter()
            .rev()
            .find(|e| e.mask.get(x, y))
            .map(|e| e.color)
            .unwrap_or(self.background)
    }

    pub fn latent(&self) -> LatentGrid {
        LatentGrid::from_fn(LatentShape::new(TOY_CHANNELS, self.size, self.size), |c, x, y| {
            to_latent_value(self.color_at(x, y)[c])
        })
    }

    pub fn render(&self, factor: usize) -> FrameImage {
        let px = (self.size * factor) as u32;
        let mut img = FrameImage::new(px, px, self.background);
        for y in 0..px {
            for x in 0..px {
                img.put_pixel(x, y, self.color_at(x as usize / factor, y as usize / factor));
            }
        }
        img
    }

    /// The entity a segmentation phrase refers to.
    pub fn find(&self, phrase: &str) -> Option<&PlacedEntity> {
        self.entities.iter().find(|e| e.matches(phrase))
    }

    /// All colours present in the scene, background first.
    pub fn palette(&self) -> Vec<[u8; 3]> {
        std::iter::once(self.background)
            .chain(self.entities.iter().map(|e| e.color))
            .collect()
    }
}

/// Every colour any scene can contain.
pub fn global_palette() -> Vec<[u8; 3]> {
    let mut out: Vec<[u8; 3]> = Vec::new();
    let all = COLORS
        .iter()
        .map(|(_, c)| *c)
        .chain(BACKGROUNDS.iter().map(|(_, c)| *c))
        .chain(REGISTRY.iter().map(|e| e.color))
        .chain(std::iter::once(DEFAULT_BACKGROUND));
    for c in all {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn red_square_on_gray() {
        let scene = compile_scene("a red square on gray", 64).unwrap();
        assert_eq!(scene.background, DEFAULT_BACKGROUND);
        assert_eq!(scene.entities.len(), 1);
        let sq = &scene.entities[0];
        assert_eq!(sq.phrase, "red square");
        assert_eq!(sq.mask.count(), 64);
        // 64x64 pixels at factor 8.
        assert_eq!(sq.image_mask(8).count(), 64 * 64);
        assert_eq!(scene.render(8).width(), 512);
    }

    #[test]
    fn layout_is_deterministic_and_disjoint() {
        let a = compile_scene("a horse jumping over an obstacle", 64).unwrap();
        let b = compile_scene("a horse jumping over an obstacle", 64).unwrap();
        assert_eq!(a, b);
        let (h, o) = (&a.entities[0].mask, &a.entities[1].mask);
        assert!(h.intersection(o).unwrap().is_empty());
        assert!(h.bounding_box().unwrap().max_x < o.bounding_box().unwrap().min_x);
    }

    #[test]
    fn unknown_prompt_lists_entities() {
        match compile_scene("a flying spaghetti", 64) {
            Err(SceneError::NoEntity { known, .. }) => assert!(known.contains(&"airplane".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn airplane_faces_left_over_runway() {
        let scene = compile_scene("An airplane is landing on the runway.", 64).unwrap();
        let plane = scene.find("airplane").unwrap();
        assert_eq!(plane.facing, Some(Direction::Left));
        let runway = scene.find("the runway").unwrap();
        assert_eq!(runway.mask.bounding_box().unwrap().max_y, 63);
        assert!(scene.find("unicorn").is_none());
    }

    #[test]
    fn colours_in_a_scene_stay_apart() {
        let scene = compile_scene("a man and a circle on the snow", 64).unwrap();
        let pal = scene.palette();
        for i in 0..pal.len() {
            for j in i + 1..pal.len() {
                assert!(color_distance(pal[i], pal[j]) >= MIN_COLOR_DISTANCE, "{pal:?}");
            }
        }
    }

    #[test]
    fn phrase_matching_uses_colour_words() {
        let scene = compile_scene("a red square and a blue circle", 64).unwrap();
        assert_eq!(scene.find("red square").unwrap().noun, "square");
        assert!(scene.find("green square").is_none());
        assert_eq!(scene.find("balls").unwrap().noun, "circle");
    }

    #[test]
    fn latent_round_trips_colours() {
        for (_, c) in COLORS {
            for ch in c {
                assert_eq!(from_latent_value(to_latent_value(*ch)), *ch);
            }
        }
    }
}
