"""Offline style-transfer augmentation toolkit.

Builds N-times stylized datasets with an embedded AdaIN inference engine,
scores style images by texture complexity, emits deterministic sampling
manifests with online photometric transforms, and evaluates segmentation
predictions in a harmonized 19-class label space.
"""

__version__ = "0.1.0"
