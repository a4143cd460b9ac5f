"""
Closed token vocabulary for prompt conditioning
"""

from src.apps.core.exceptions import ParameterError

BLEND = "BLEND"
NULL = "NULL"

DIRECTION_WORDS = (
    "left",
    "right",
    "top",
    "down",
    "top_left",
    "top_right",
    "down_left",
    "down_right",
)
COLOR_WORDS = ("white", "warm", "cool", "red", "green", "purple")
SCENE_WORDS = ("gradient_sky", "flat", "two_tone")

VOCABULARY = (BLEND, NULL, *DIRECTION_WORDS, *COLOR_WORDS, *SCENE_WORDS)
TOKEN_IDS = {word: index for index, word in enumerate(VOCABULARY)}

BLEND_ID = TOKEN_IDS[BLEND]
NULL_ID = TOKEN_IDS[NULL]


def encode_prompt(words: list[str]) -> list[int]:
    unknown = [word for word in words if word not in TOKEN_IDS]
    if unknown:
        raise ParameterError(f"Words outside the vocabulary: {', '.join(unknown)}")
    if not words:
        raise ParameterError("Prompt needs at least one token")
    return [TOKEN_IDS[word] for word in words]


def decode_prompt(token_ids: list[int]) -> list[str]:
    try:
        return [VOCABULARY[index] for index in token_ids]
    except IndexError as exc:
        raise ParameterError(f"Token id outside the vocabulary: {exc}") from exc
