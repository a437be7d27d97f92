"""Block attention masks, mask extraction and mask propagation for
multi-object motion transfer in video diffusion transformers."""

__version__ = "0.1.0"

from .attention import ProjectedTokens, apply_mask, attention_scores, masked_attention
from .dmem import TextQuerySelection, extract_training_mask
from .layout import SpatialMask, TokenLayout, build_layout, object_video_tokens, video_token_index
from .masks import AttentionMask, assemble
from .rmpm import DynamicState, MaskTrack, dynamic_update, propagate_all, propagate_object

__all__ = [
    "AttentionMask", "DynamicState", "MaskTrack", "ProjectedTokens", "SpatialMask",
    "TextQuerySelection", "TokenLayout", "apply_mask", "assemble", "attention_scores",
    "build_layout", "dynamic_update", "extract_training_mask", "masked_attention",
    "object_video_tokens", "propagate_all", "propagate_object", "video_token_index",
]
