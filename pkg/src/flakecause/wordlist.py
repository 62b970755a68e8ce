"""Default wordlist for augmentation: common English nouns.

Every entry is a valid Java identifier on its own and safe to camel-case
concatenate when a single word collides.
"""

WORDS: tuple[str, ...] = (
    "anchor", "apple", "arrow", "autumn", "badge", "banner", "basket", "beacon",
    "berry", "blanket", "bottle", "branch", "breeze", "bridge", "brook", "bucket",
    "butter", "cabin", "candle", "canvas", "canyon", "carpet", "castle", "cellar",
    "chair", "chalk", "cherry", "cloud", "clover", "coast", "cobble", "copper",
    "coral", "corner", "cotton", "cradle", "crayon", "cricket", "crystal", "curtain",
    "daisy", "dawn", "desert", "dome", "donkey", "drift", "eagle", "ember",
    "engine", "fabric", "falcon", "feather", "fern", "field", "flame", "flint",
    "forest", "fountain", "garden", "garnet", "giant", "ginger", "glacier", "goose",
    "granite", "grape", "gravel", "grove", "harbor", "hazel", "heather", "hedge",
    "hill", "hollow", "honey", "horizon", "island", "ivory", "jacket", "jasmine",
    "jungle", "kettle", "kite", "ladder", "lagoon", "lantern", "ledger", "lemon",
    "lily", "linen", "lobster", "locket", "lumber", "machine", "magnet", "mango",
    "maple", "marble", "meadow", "melon", "mirror", "mitten", "morning", "mountain",
    "muffin", "mulberry", "needle", "nest", "nickel", "oasis", "ocean", "olive",
    "orchard", "otter", "paddle", "pantry", "parrot", "pasture", "pebble", "pepper",
    "petal", "pinecone", "pillow", "pilot", "planet", "plum", "pocket", "pond",
    "poppy", "prairie", "puzzle", "quartz", "quill", "rabbit", "raft", "raven",
    "reef", "ribbon", "ridge", "river", "rocket", "rooster", "rose", "ruby",
    "saddle", "sage", "salmon", "sand", "satchel", "seed", "shadow", "shell",
    "shore", "silver", "sketch", "slate", "snow", "spark", "sparrow", "spice",
    "spring", "spruce", "stone", "stream", "summer", "sunset", "syrup", "tangerine",
    "thicket", "thimble", "thunder", "timber", "torch", "trail", "tulip", "tunnel",
    "turtle", "valley", "velvet", "village", "violet", "wagon", "walnut", "wave",
    "whistle", "willow", "window", "winter", "wolf", "yarn", "zephyr", "zinnia",
)
