def execute_command(image) -> str:
    image_patch = ImagePatch(image)
    image_patch = best_image_match(list_patches=[ImagePatch(image)], content=['item'], return_index=True)
    return image_patch.simple_query('What item of furniture is not large?')
