"""Body-part and keypoint vocabulary shared by templates, fitting and metrics.

Left and right are frame-centric: "left" parts sit at negative template x.
"""

PART_NAMES: tuple[str, ...] = (
    "core",
    "left_hip",
    "right_hip",
    "left_thigh",
    "right_thigh",
    "left_shin",
    "right_shin",
    "left_shoulder",
    "right_shoulder",
    "left_upper_arm",
    "left_forearm",
    "left_hand",
    "right_upper_arm",
    "right_forearm",
    "right_hand",
    "left_foot",
    "right_foot",
    "head",
)

ARM_PARTS: tuple[str, ...] = (
    "left_upper_arm",
    "left_forearm",
    "left_hand",
    "right_upper_arm",
    "right_forearm",
    "right_hand",
)

KEYPOINT_NAMES: tuple[str, ...] = (
    "abdomen",
    "chest",
    "neck",
    "left_hip",
    "right_hip",
    "left_shoulder",
    "right_shoulder",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
)

# Limb name -> (proximal keypoint, distal keypoint).
LIMBS: dict[str, tuple[str, str]] = {
    "left_thigh": ("left_hip", "left_knee"),
    "right_thigh": ("right_hip", "right_knee"),
    "left_shin": ("left_knee", "left_ankle"),
    "right_shin": ("right_knee", "right_ankle"),
    "left_upper_arm": ("left_shoulder", "left_elbow"),
    "right_upper_arm": ("right_shoulder", "right_elbow"),
    "left_forearm": ("left_elbow", "left_wrist"),
    "right_forearm": ("right_elbow", "right_wrist"),
}

TORSO: tuple[str, str] = ("neck", "abdomen")

REGIONS: dict[str, tuple[str, ...]] = {
    "torso": (
        "abdomen",
        "chest",
        "neck",
        "left_hip",
        "right_hip",
        "left_shoulder",
        "right_shoulder",
    ),
    "legs": ("left_knee", "right_knee", "left_ankle", "right_ankle"),
    "arms": ("left_elbow", "right_elbow", "left_wrist", "right_wrist"),
}

SIDED_JOINTS: tuple[str, ...] = ("hip", "shoulder", "knee", "ankle", "elbow", "wrist")


def swap_side(name: str) -> str:
    """Swap a left_/right_ prefix; unsided names map to themselves."""
    if name.startswith("left_"):
        return "right_" + name[len("left_") :]
    if name.startswith("right_"):
        return "left_" + name[len("right_") :]
    return name
