"""Two-step face mask detection pipeline.

Detect faces, align them on a canonical landmark template, classify each
aligned chip as Mask / No-mask, and score the results against VOC-style
ground truth. Ships a relabel workflow (diff files + review service), a
mask-wearing-rate monitor, a FastAPI service wrapping the whole package,
and a thin CLI.
"""

__version__ = "0.1.0"
