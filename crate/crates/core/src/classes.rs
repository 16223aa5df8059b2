//! Semantic class table for urban photogrammetry scenes.

/// Number of semantic classes; ids run `0..NUM_CLASSES`.
pub const NUM_CLASSES: usize = 13;

/// Label value for unlabeled points and nodata pixels.
pub const UNLABELED: u8 = 255;

/// Class names indexed by class id.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "ground",
    "vegetation",
    "building",
    "wall",
    "bridge",
    "parking",
    "rail",
    "traffic road",
    "street furniture",
    "car",
    "footpath",
    "bike",
    "water",
];

pub const GROUND: u8 = 0;
pub const VEGETATION: u8 = 1;
pub const BUILDING: u8 = 2;
pub const WALL: u8 = 3;
pub const PARKING: u8 = 5;
pub const TRAFFIC_ROAD: u8 = 7;
pub const CAR: u8 = 9;
pub const FOOTPATH: u8 = 10;
pub const WATER: u8 = 12;

/// True for `0..=12` and for [`UNLABELED`].
#[inline]
pub fn is_valid_label(label: u8) -> bool {
    (label as usize) < NUM_CLASSES || label == UNLABELED
}

#[inline]
pub fn is_class(label: u8) -> bool {
    (label as usize) < NUM_CLASSES
}

pub fn class_name(id: u8) -> Option<&'static str> {
    CLASS_NAMES.get(id as usize).copied()
}
