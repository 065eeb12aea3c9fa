"""
Reply schemas for every prompt template, plus tolerant reply-text parsing.
"""

import ast
import json
import re
from typing import Annotated, List, Literal

from pydantic import BaseModel, Field, TypeAdapter, ValidationError, field_validator

try:
    from .exceptions import ProtocolError
except ImportError:
    from exceptions import ProtocolError


def _normalize_label(value):
    if isinstance(value, str):
        return re.sub(r"[\s_\-]+", " ", value.strip().lower())
    return value


class ProcessLabelReply(BaseModel):
    process_type: Literal["planning", "execution", "feedback", "control"]
    justification: str = Field(min_length=1)

    @field_validator("process_type", mode="before")
    @classmethod
    def _lower(cls, v):
        return _normalize_label(v)


class OutputUseReply(BaseModel):
    label: Literal["reuse", "apply", "pushback", "reject"]
    justification: str = Field(min_length=1)

    @field_validator("label", mode="before")
    @classmethod
    def _lower(cls, v):
        return _normalize_label(v)


class RecallGradeReply(BaseModel):
    answer: Literal["incorrect", "partially correct", "mostly correct", "fully correct"]
    reason: str = ""

    @field_validator("answer", mode="before")
    @classmethod
    def _lower(cls, v):
        return _normalize_label(v)


class AiStepReply(BaseModel):
    ai_assisted: bool
    justification: str = ""


class SegmentAnnotationReply(BaseModel):
    description: str = Field(min_length=1)


class SegmentGroup(BaseModel):
    segments: List[int] = Field(min_length=1)
    text: str = Field(min_length=1)


class SegmentGroupReply(BaseModel):
    steps: List[SegmentGroup] = Field(min_length=1)


class ParaphraseReply(BaseModel):
    text: str = Field(min_length=1)


StepText = Annotated[str, Field(min_length=1)]
StepList = Annotated[List[StepText], Field(min_length=1)]

SCHEMAS = {
    "step_list": TypeAdapter(StepList),
    "process_label": TypeAdapter(ProcessLabelReply),
    "output_use_label": TypeAdapter(OutputUseReply),
    "recall_grade": TypeAdapter(RecallGradeReply),
    "ai_step": TypeAdapter(AiStepReply),
    "segment_annotation": TypeAdapter(SegmentAnnotationReply),
    "segment_group": TypeAdapter(SegmentGroupReply),
    "paraphrase": TypeAdapter(ParaphraseReply),
}

_BLOCK = re.compile(r"(\{.*\}|\[.*\])", re.DOTALL)


def is_registered(schema_id):
    return schema_id in SCHEMAS


def parse_reply_text(text):
    """Decode a raw reply into Python data.

    Tries strict JSON, then the outermost {...} or [...] block (models like to
    wrap JSON in prose or code fences), then a Python literal.
    """
    if text is None:
        raise ProtocolError("Empty reply")
    stripped = text.strip()
    candidates = [stripped]
    match = _BLOCK.search(stripped)
    if match and match.group(1) != stripped:
        candidates.append(match.group(1))

    for candidate in candidates:
        try:
            return json.loads(candidate)
        except ValueError:
            pass
    for candidate in candidates:
        try:
            return ast.literal_eval(candidate)
        except (ValueError, SyntaxError):
            pass
    raise ProtocolError(f"Reply is not structured data: {stripped[:120]!r}")


def validate_reply(schema_id, data):
    """Validate decoded reply data against a registered schema.

    Raises:
        ProtocolError: If the schema is unknown or the data does not conform
    """
    adapter = SCHEMAS.get(schema_id)
    if adapter is None:
        raise ProtocolError(f"Unregistered response schema '{schema_id}'")
    try:
        value = adapter.validate_python(data)
    except ValidationError as e:
        raise ProtocolError(f"Reply violates schema '{schema_id}': {e.errors()[0]['msg']}") from e
    if schema_id == "step_list":
        value = [s.strip() for s in value]
        if not all(value):
            raise ProtocolError("Reply contains a blank step")
    return value


def parse_and_validate(schema_id, text):
    return validate_reply(schema_id, parse_reply_text(text))
