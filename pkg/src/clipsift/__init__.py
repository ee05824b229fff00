"""clipsift: content-based retrieval of classroom video clips.

Feature extraction over codec-free media, principal-shot construction by
adaptive k-means, multiple-instance learning (alternating-SVM and noisy-OR
diverse density), evaluation tooling, and a review session service.
"""

__version__ = "0.1.0"
