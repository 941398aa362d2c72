class ImagePatch:
    """A crop of an image centered around a particular object, with information about the crop.

    Attributes
    ----------
    left, lower, right, upper : int
        Bounds of the crop; the origin is the bottom-left corner of the image.
    width, height : int
    horizontal_center, vertical_center : float

    Methods
    -------
    find(object_name: str) -> List[ImagePatch]
        Returns patches for every object matching object_name, ordered by (left, lower).
    exists(object_name: str) -> bool
        Returns True if the object specified by object_name is found in the patch.
    verify_property(object_name: str, property: str) -> bool
        Returns True if the object has the given property.
    simple_query(question: str = None) -> str
        Answers a basic question about the patch.
    best_text_match(option_list: List[str]) -> str
        Returns the option that best matches the patch.
    crop(left: int, lower: int, right: int, upper: int) -> ImagePatch
        Returns a new patch for the given absolute coordinates.
    compute_depth() -> float
        Returns the mean depth of the objects in the patch.
    """

    def __init__(self, image, left: int = None, lower: int = None, right: int = None, upper: int = None):
        ...


def best_image_match(list_patches: List[ImagePatch], content: List[str], return_index: bool = False) -> Union[ImagePatch, int]:
    """Returns the patch most likely to contain the content, or its index if return_index is True."""


def distance(patch_a: ImagePatch, patch_b: ImagePatch) -> float:
    """Returns the distance between the edges of two patches; 0 if they overlap."""


def bool_to_yesno(bool_answer: bool) -> str:
    return "yes" if bool_answer else "no"


# Examples

# Is there a backpack to the right of the man?
def execute_command(image) -> str:
    image_patch = ImagePatch(image)
    man_patches = image_patch.find('man')
    if len(man_patches) == 0:
        return image_patch.simple_query('Is there a backpack to the right of the man?')
    man_patch = man_patches[0]
    backpack_patches = image_patch.find('backpack')
    for backpack_patch in backpack_patches:
        if backpack_patch.horizontal_center > man_patch.horizontal_center:
            return 'yes'
    return 'no'


# Which kind of furniture is not large?
def execute_command(image) -> str:
    image_patch = ImagePatch(image)
    furniture_patches = image_patch.find('furniture')
    for furniture_patch in furniture_patches:
        if not furniture_patch.verify_property('furniture', 'large'):
            return furniture_patch.simple_query('What kind of furniture is this?')
    return image_patch.simple_query('Which kind of furniture is not large?')
