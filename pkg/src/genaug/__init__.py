"""genaug: annotation-preserving generative data augmentation toolkit.

Prepares conditioning images (edge maps, annotation plots), drives an
external image-generation service, gates generated images by perceptual
similarity, assembles augmented dataset plans, and evaluates detectors
with IoU/keypoint-similarity mAP.
"""

__version__ = "0.1.0"
