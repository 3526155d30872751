"""Segmenter-agnostic refinement engine for video camouflage masks: determines
how many targets a clip holds, tracks their identities, picks the frames worth
prompting, refines point+box prompts, and drives a promptable video segmenter
to final masks."""

from .mask_core import Box, Overlap, Region, binarize, label_components, min_enclosing_box, morph_close, overlap
from .pipeline import PipelineConfig, PipelineResult, SequenceManifest, inspect_sequence, refine_sequence, run_ampr
from .segmenter import MockVideoSegmenter, PointPrompt, PromptSet

__version__ = "0.1.0"

__all__ = [
    "Box", "Overlap", "Region", "binarize", "label_components",
    "min_enclosing_box", "morph_close", "overlap",
    "PipelineConfig", "PipelineResult", "SequenceManifest",
    "inspect_sequence", "refine_sequence", "run_ampr",
    "MockVideoSegmenter", "PointPrompt", "PromptSet",
    "__version__",
]
